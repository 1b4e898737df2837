//! Stacked bidirectional peephole LSTM with a multilabel logistic output
//! layer, trained by backpropagation through time and RMSProp.
//!
//! Each direction of a layer keeps its four gates fused: input weights
//! `w_x` are `n_in x 4n`, recurrent weights `w_h` are `n x 4n` and the bias
//! is `4n`, with column blocks ordered input gate, forget gate, cell
//! candidate, output gate. Peephole connections are diagonal, one weight
//! per cell and gate.
//!
//! All arithmetic is `f64`.

mod bptt;
mod cell;
mod forward;
mod model_file;
mod rmsprop;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use bptt::{batch_gradient, bptt, bptt_accumulate, BatchGradient};
pub use cell::{lstm_step, sigmoid, StepTrace};
pub use forward::{forward, predict, DirectionTrace, ForwardTrace, LayerTrace};
pub use model_file::{read_model, write_model, ModelFile, MODEL_MAGIC};
pub use rmsprop::{RmsPropState, RMSPROP_EPSILON};

use crate::error::{Error, Result};
use crate::features::BandNormalizer;

/// Range of the uniform weight initialisation.
pub const INIT_RANGE: f64 = 0.1;

/// Gate column blocks inside the fused weight matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

/// Layer sizes of a network. `cells_per_layer` counts cells per direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub n_bands: usize,
    pub cells_per_layer: Vec<usize>,
    pub n_classes: usize,
}

impl Architecture {
    pub fn new(n_bands: usize, cells_per_layer: Vec<usize>, n_classes: usize) -> Result<Self> {
        let arch = Self {
            n_bands,
            cells_per_layer,
            n_classes,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Four hidden layers of 200 units (100 per direction) on 40 bands.
    pub fn reference(n_classes: usize) -> Self {
        Self {
            n_bands: 40,
            cells_per_layer: vec![100; 4],
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bands == 0 || self.n_classes == 0 {
            return Err(Error::InvalidInput(
                "network needs bands and classes".into(),
            ));
        }
        if self.cells_per_layer.is_empty() || self.cells_per_layer.contains(&0) {
            return Err(Error::InvalidInput(
                "every layer needs at least one cell".into(),
            ));
        }
        Ok(())
    }

    pub fn layer_input_size(&self, layer: usize) -> usize {
        if layer == 0 {
            self.n_bands
        } else {
            2 * self.cells_per_layer[layer - 1]
        }
    }

    pub fn top_hidden_size(&self) -> usize {
        2 * self.cells_per_layer.last().copied().unwrap_or(0)
    }
}

/// One direction of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub n_in: usize,
    pub n_cells: usize,
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub peep_i: Vec<f64>,
    pub peep_f: Vec<f64>,
    pub peep_o: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmDirection {
    pub fn zeros(n_in: usize, n_cells: usize) -> Self {
        Self {
            n_in,
            n_cells,
            w_x: vec![0.0; n_in * 4 * n_cells],
            w_h: vec![0.0; n_cells * 4 * n_cells],
            peep_i: vec![0.0; n_cells],
            peep_f: vec![0.0; n_cells],
            peep_o: vec![0.0; n_cells],
            bias: vec![0.0; 4 * n_cells],
        }
    }

    /// Weight from input `j` to cell `c` of `gate`.
    pub fn input_weight(&self, gate: Gate, j: usize, c: usize) -> f64 {
        self.w_x[j * 4 * self.n_cells + gate as usize * self.n_cells + c]
    }

    /// Weight from previous hidden output `j` to cell `c` of `gate`.
    pub fn recurrent_weight(&self, gate: Gate, j: usize, c: usize) -> f64 {
        self.w_h[j * 4 * self.n_cells + gate as usize * self.n_cells + c]
    }

    pub fn gate_bias(&self, gate: Gate, c: usize) -> f64 {
        self.bias[gate as usize * self.n_cells + c]
    }

    fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.w_x,
            &self.w_h,
            &self.peep_i,
            &self.peep_f,
            &self.peep_o,
            &self.bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w_x,
            &mut self.w_h,
            &mut self.peep_i,
            &mut self.peep_f,
            &mut self.peep_o,
            &mut self.bias,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlstmLayer {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

/// Logistic output layer, `w` is `n_in x n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub n_in: usize,
    pub n_classes: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Every trainable tensor of a network. Gradients and optimizer state use
/// the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmParams {
    pub layers: Vec<BlstmLayer>,
    pub output: OutputLayer,
}

impl BlstmParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let layers = arch
            .cells_per_layer
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                let n_in = arch.layer_input_size(j);
                BlstmLayer {
                    forward: LstmDirection::zeros(n_in, n),
                    backward: LstmDirection::zeros(n_in, n),
                }
            })
            .collect();
        let n_in = arch.top_hidden_size();
        Self {
            layers,
            output: OutputLayer {
                n_in,
                n_classes: arch.n_classes,
                w: vec![0.0; n_in * arch.n_classes],
                b: vec![0.0; arch.n_classes],
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    /// Tensors in canonical order: per layer forward then backward
    /// (`w_x, w_h, peep_i, peep_f, peep_o, bias`), then output `w, b`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 12 + 2);
        for layer in &self.layers {
            out.extend(layer.forward.tensors());
            out.extend(layer.backward.tensors());
        }
        out.push(&self.output.w);
        out.push(&self.output.b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 12 + 2);
        for layer in &mut self.layers {
            out.extend(layer.forward.tensors_mut());
            out.extend(layer.backward.tensors_mut());
        }
        out.push(&mut self.output.w);
        out.push(&mut self.output.b);
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    /// `self += scale * other`, entry by entry in canonical order.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// Entries flattened in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
    }
}

/// Gradient of a cost with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub BlstmParams);

/// The trained artifact: parameters plus the feature normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmNetwork {
    pub arch: Architecture,
    pub params: BlstmParams,
    pub normalizer: BandNormalizer,
}

impl BlstmNetwork {
    pub fn zeros(arch: Architecture) -> Self {
        let params = BlstmParams::zeros(&arch);
        let normalizer = BandNormalizer::identity(arch.n_bands);
        Self {
            arch,
            params,
            normalizer,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.arch.n_classes
    }

    pub fn n_bands(&self) -> usize {
        self.arch.n_bands
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Every weight and bias i.i.d. uniform on `[-0.1, 0.1]`, drawn in
/// canonical tensor order from a generator seeded with `rng_seed`.
pub fn init_network(arch: &Architecture, rng_seed: u64) -> Result<BlstmNetwork> {
    arch.validate()?;
    let mut net = BlstmNetwork::zeros(arch.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for t in net.params.tensors_mut() {
        for w in t.iter_mut() {
            *w = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
    }
    Ok(net)
}
