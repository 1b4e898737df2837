use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::cell::{accumulate_vec_mat, sigmoid, step_into};
use super::{BlstmNetwork, LstmDirection};
use crate::error::{Error, Result};

/// Activations of one direction, indexed by time (not processing order).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionTrace {
    pub n_cells: usize,
    /// `T x 4n` gate activations: input, forget, candidate, output.
    pub act: Vec<f64>,
    /// `T x n` cell states.
    pub cell: Vec<f64>,
    /// `T x n` hidden outputs.
    pub hidden: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// `T x n_in` input seen by both directions.
    pub input: Vec<f64>,
    pub forward: DirectionTrace,
    pub backward: DirectionTrace,
}

/// Everything BPTT needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub seq_len: usize,
    pub layers: Vec<LayerTrace>,
    /// `T x 2n` concatenated top-layer outputs.
    pub top_hidden: Vec<f64>,
    /// `T x L` class posteriors.
    pub output: Array2<f64>,
}

fn run_direction(
    dir: &LstmDirection,
    input: &[f64],
    seq_len: usize,
    reverse: bool,
) -> DirectionTrace {
    let n = dir.n_cells;
    let n_in = dir.n_in;
    let mut act = vec![0.0; seq_len * 4 * n];
    let mut cell = vec![0.0; seq_len * n];
    let mut hidden = vec![0.0; seq_len * n];
    let mut h_prev = vec![0.0; n];
    let mut c_prev = vec![0.0; n];
    for s in 0..seq_len {
        let t = if reverse { seq_len - 1 - s } else { s };
        step_into(
            dir,
            &input[t * n_in..(t + 1) * n_in],
            &h_prev,
            &c_prev,
            &mut act[t * 4 * n..(t + 1) * 4 * n],
            &mut cell[t * n..(t + 1) * n],
            &mut hidden[t * n..(t + 1) * n],
        );
        h_prev.copy_from_slice(&hidden[t * n..(t + 1) * n]);
        c_prev.copy_from_slice(&cell[t * n..(t + 1) * n]);
    }
    DirectionTrace {
        n_cells: n,
        act,
        cell,
        hidden,
    }
}

fn concat_directions(fwd: &DirectionTrace, bwd: &DirectionTrace, seq_len: usize) -> Vec<f64> {
    let (nf, nb) = (fwd.n_cells, bwd.n_cells);
    let mut out = Vec::with_capacity(seq_len * (nf + nb));
    for t in 0..seq_len {
        out.extend_from_slice(&fwd.hidden[t * nf..(t + 1) * nf]);
        out.extend_from_slice(&bwd.hidden[t * nb..(t + 1) * nb]);
    }
    out
}

/// Full forward pass. With `noise_sigma > 0` the input is perturbed by
/// i.i.d. Gaussian noise drawn from a generator seeded with `rng_seed`.
/// Outputs are independent logistic units, never softmax-normalized.
pub fn forward(
    net: &BlstmNetwork,
    seq: ArrayView2<f64>,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<ForwardTrace> {
    if seq.ncols() != net.n_bands() {
        return Err(Error::DimensionMismatch {
            what: "feature bands",
            expected: net.n_bands(),
            actual: seq.ncols(),
        });
    }
    let seq_len = seq.nrows();
    if seq_len == 0 {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    let mut input: Vec<f64> = seq.iter().copied().collect();
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma)
            .map_err(|e| Error::InvalidInput(format!("noise sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for v in &mut input {
            *v += normal.sample(&mut rng);
        }
    }

    let mut layers = Vec::with_capacity(net.params.layers.len());
    for layer in &net.params.layers {
        let fwd = run_direction(&layer.forward, &input, seq_len, false);
        let bwd = run_direction(&layer.backward, &input, seq_len, true);
        let next = concat_directions(&fwd, &bwd, seq_len);
        layers.push(LayerTrace {
            input,
            forward: fwd,
            backward: bwd,
        });
        input = next;
    }
    let top_hidden = input;

    let out = &net.params.output;
    let mut output = Array2::zeros((seq_len, out.n_classes));
    let mut logits = vec![0.0; out.n_classes];
    for t in 0..seq_len {
        logits.copy_from_slice(&out.b);
        accumulate_vec_mat(
            &mut logits,
            &top_hidden[t * out.n_in..(t + 1) * out.n_in],
            &out.w,
        );
        for (k, &z) in logits.iter().enumerate() {
            output[[t, k]] = sigmoid(z);
        }
    }

    Ok(ForwardTrace {
        seq_len,
        layers,
        top_hidden,
        output,
    })
}

/// Noise-free class posteriors for an already normalized sequence.
pub fn predict(net: &BlstmNetwork, seq: ArrayView2<f64>) -> Result<Array2<f64>> {
    forward(net, seq, 0.0, 0).map(|trace| trace.output)
}
