use rayon::prelude::*;

use super::forward::{forward, DirectionTrace, ForwardTrace};
use super::{BlstmNetwork, GradientSet, LstmDirection};
use crate::error::{Error, Result};
use crate::sequence::{TargetRoll, TrainingSequence};

/// Sequences per partial gradient. Partial sums are always added in chunk
/// order, so a batch gradient does not depend on the thread count.
const REDUCTION_CHUNK: usize = 8;
/// Chunks evaluated concurrently before their sums are folded in.
const REDUCTION_WINDOW: usize = 16;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[j] += row_j(w) . v` for a row-major `out.len() x v.len()` matrix.
#[inline]
fn accumulate_mat_vec(out: &mut [f64], w: &[f64], v: &[f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(v.len())) {
        *o += dot(row, v);
    }
}

/// `g += x (outer) v` for a row-major `x.len() x v.len()` matrix.
#[inline]
fn accumulate_outer(g: &mut [f64], x: &[f64], v: &[f64]) {
    for (xj, row) in x.iter().zip(g.chunks_exact_mut(v.len())) {
        if *xj == 0.0 {
            continue;
        }
        for (gv, vv) in row.iter_mut().zip(v) {
            *gv += xj * vv;
        }
    }
}

/// Backpropagate one direction. `d_out` holds the gradient with respect to
/// this direction's hidden outputs at column `offset` of a `T x stride`
/// matrix; input gradients are added to `d_input` when given.
#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    dir: &LstmDirection,
    tr: &DirectionTrace,
    input: &[f64],
    d_out: &[f64],
    offset: usize,
    stride: usize,
    seq_len: usize,
    reverse: bool,
    grad: &mut LstmDirection,
    mut d_input: Option<&mut [f64]>,
) {
    let n = dir.n_cells;
    let n_in = dir.n_in;
    let zeros = vec![0.0; n];
    let mut dh_rec = vec![0.0; n];
    let mut dc_carry = vec![0.0; n];
    let mut da = vec![0.0; 4 * n];

    for s in (0..seq_len).rev() {
        let t = if reverse { seq_len - 1 - s } else { s };
        let prev = match s {
            0 => None,
            _ => Some(if reverse { t + 1 } else { t - 1 }),
        };
        let c_prev = prev.map_or(&zeros[..], |p| &tr.cell[p * n..(p + 1) * n]);
        let h_prev = prev.map_or(&zeros[..], |p| &tr.hidden[p * n..(p + 1) * n]);
        let act = &tr.act[t * 4 * n..(t + 1) * 4 * n];
        let cell = &tr.cell[t * n..(t + 1) * n];
        let d_ext = &d_out[t * stride + offset..t * stride + offset + n];

        for k in 0..n {
            let (i, f, g, o) = (act[k], act[n + k], act[2 * n + k], act[3 * n + k]);
            let dh = d_ext[k] + dh_rec[k];
            let tc = cell[k].tanh();
            let da_o = dh * tc * o * (1.0 - o);
            let dc = dh * o * (1.0 - tc * tc) + da_o * dir.peep_o[k] + dc_carry[k];
            let da_i = dc * g * i * (1.0 - i);
            let da_f = dc * c_prev[k] * f * (1.0 - f);
            let da_g = dc * i * (1.0 - g * g);
            da[k] = da_i;
            da[n + k] = da_f;
            da[2 * n + k] = da_g;
            da[3 * n + k] = da_o;
            grad.peep_i[k] += da_i * c_prev[k];
            grad.peep_f[k] += da_f * c_prev[k];
            grad.peep_o[k] += da_o * cell[k];
            dc_carry[k] = dc * f + da_i * dir.peep_i[k] + da_f * dir.peep_f[k];
        }

        for (b, d) in grad.bias.iter_mut().zip(&da) {
            *b += d;
        }
        accumulate_outer(&mut grad.w_x, &input[t * n_in..(t + 1) * n_in], &da);
        if prev.is_some() {
            accumulate_outer(&mut grad.w_h, h_prev, &da);
        }
        if let Some(d_in) = d_input.as_deref_mut() {
            accumulate_mat_vec(&mut d_in[t * n_in..(t + 1) * n_in], &dir.w_x, &da);
        }
        dh_rec.fill(0.0);
        accumulate_mat_vec(&mut dh_rec, &dir.w_h, &da);
    }
}

/// Add the gradient of `scale * sum((y - d)^2)` to `grads` and return the
/// unscaled sum of squared errors.
pub fn bptt_accumulate(
    net: &BlstmNetwork,
    trace: &ForwardTrace,
    targets: &TargetRoll,
    scale: f64,
    grads: &mut GradientSet,
) -> Result<f64> {
    let seq_len = trace.seq_len;
    let n_classes = net.n_classes();
    if targets.n_frames() != seq_len || targets.n_classes() != n_classes {
        return Err(Error::DimensionMismatch {
            what: "targets (frames x classes)",
            expected: seq_len * n_classes,
            actual: targets.n_frames() * targets.n_classes(),
        });
    }
    let out = &net.params.output;
    let n_top = out.n_in;
    let g = &mut grads.0;

    let mut sse = 0.0;
    let mut dz = vec![0.0; n_classes];
    let mut d_hidden = vec![0.0; seq_len * n_top];
    for t in 0..seq_len {
        for k in 0..n_classes {
            let y = trace.output[[t, k]];
            let d = if targets.values[[t, k]] { 1.0 } else { 0.0 };
            let e = y - d;
            sse += e * e;
            dz[k] = 2.0 * scale * e * y * (1.0 - y);
        }
        for (b, d) in g.output.b.iter_mut().zip(&dz) {
            *b += d;
        }
        let h = &trace.top_hidden[t * n_top..(t + 1) * n_top];
        accumulate_outer(&mut g.output.w, h, &dz);
        accumulate_mat_vec(&mut d_hidden[t * n_top..(t + 1) * n_top], &out.w, &dz);
    }

    for (l, layer) in net.params.layers.iter().enumerate().rev() {
        let lt = &trace.layers[l];
        let stride = layer.forward.n_cells + layer.backward.n_cells;
        let mut d_input = if l > 0 {
            vec![0.0; seq_len * layer.forward.n_in]
        } else {
            Vec::new()
        };
        let gl = &mut g.layers[l];
        backprop_direction(
            &layer.forward,
            &lt.forward,
            &lt.input,
            &d_hidden,
            0,
            stride,
            seq_len,
            false,
            &mut gl.forward,
            (l > 0).then_some(&mut d_input[..]),
        );
        backprop_direction(
            &layer.backward,
            &lt.backward,
            &lt.input,
            &d_hidden,
            layer.forward.n_cells,
            stride,
            seq_len,
            true,
            &mut gl.backward,
            (l > 0).then_some(&mut d_input[..]),
        );
        d_hidden = d_input;
    }
    Ok(sse)
}

/// Gradient of the mean squared error over all frames and classes, with
/// the root-mean-square error as the reported cost.
pub fn bptt(
    net: &BlstmNetwork,
    trace: &ForwardTrace,
    targets: &TargetRoll,
) -> Result<(GradientSet, f64)> {
    let mut grads = GradientSet(net.params.zeros_like());
    let n = (trace.seq_len * net.n_classes()) as f64;
    let sse = bptt_accumulate(net, trace, targets, 1.0 / n, &mut grads)?;
    Ok((grads, (sse / n).sqrt()))
}

/// Mean-squared-error gradient of a whole batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub grads: GradientSet,
    pub sse: f64,
    /// Number of (frame, class) cells that contributed to `sse`.
    pub cells: usize,
}

/// Average the per-sequence MSE gradients of a batch. Sequence `i` gets
/// input noise seeded with `noise_seed(i)`.
pub fn batch_gradient<F>(
    net: &BlstmNetwork,
    batch: &[&TrainingSequence],
    noise_sigma: f64,
    noise_seed: F,
) -> Result<BatchGradient>
where
    F: Fn(usize) -> u64 + Sync,
{
    let n_seq = batch.len();
    let mut total = GradientSet(net.params.zeros_like());
    let mut sse = 0.0;
    let mut cells = 0;
    if n_seq == 0 {
        return Ok(BatchGradient {
            grads: total,
            sse,
            cells,
        });
    }
    let chunk_starts: Vec<usize> = (0..n_seq).step_by(REDUCTION_CHUNK).collect();
    for window in chunk_starts.chunks(REDUCTION_WINDOW) {
        let partials: Vec<Result<(GradientSet, f64, usize)>> = window
            .par_iter()
            .map(|&start| {
                let mut g = GradientSet(net.params.zeros_like());
                let mut chunk_sse = 0.0;
                let mut chunk_cells = 0;
                for i in start..(start + REDUCTION_CHUNK).min(n_seq) {
                    let seq = batch[i];
                    let trace = forward(net, seq.features.view(), noise_sigma, noise_seed(i))?;
                    let per_seq = (seq.len() * net.n_classes()) as f64;
                    chunk_sse += bptt_accumulate(
                        net,
                        &trace,
                        &seq.targets,
                        1.0 / (per_seq * n_seq as f64),
                        &mut g,
                    )?;
                    chunk_cells += seq.len() * net.n_classes();
                }
                Ok((g, chunk_sse, chunk_cells))
            })
            .collect();
        for partial in partials {
            let (g, s, c) = partial?;
            total.0.add_scaled(&g.0, 1.0);
            sse += s;
            cells += c;
        }
    }
    Ok(BatchGradient {
        grads: total,
        sse,
        cells,
    })
}
