use super::LstmDirection;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations produced by one LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    /// `tanh` of the cell candidate pre-activation.
    pub candidate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// `acc += x * w` where `w` is a row-major `x.len() x acc.len()` matrix.
#[inline]
pub(crate) fn accumulate_vec_mat(acc: &mut [f64], x: &[f64], w: &[f64]) {
    let cols = acc.len();
    for (xj, row) in x.iter().zip(w.chunks_exact(cols)) {
        if *xj == 0.0 {
            continue;
        }
        for (a, wv) in acc.iter_mut().zip(row) {
            *a += xj * wv;
        }
    }
}

/// One step with caller-owned buffers. `act` receives the four gate
/// activations laid out like the fused weights.
#[inline]
pub(crate) fn step_into(
    dir: &LstmDirection,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    act: &mut [f64],
    c: &mut [f64],
    h: &mut [f64],
) {
    let n = dir.n_cells;
    act.copy_from_slice(&dir.bias);
    accumulate_vec_mat(act, x, &dir.w_x);
    accumulate_vec_mat(act, h_prev, &dir.w_h);
    let (ai, rest) = act.split_at_mut(n);
    let (af, rest) = rest.split_at_mut(n);
    let (ag, ao) = rest.split_at_mut(n);
    for k in 0..n {
        let i = sigmoid(ai[k] + dir.peep_i[k] * c_prev[k]);
        let f = sigmoid(af[k] + dir.peep_f[k] * c_prev[k]);
        let g = ag[k].tanh();
        let ck = f * c_prev[k] + i * g;
        let o = sigmoid(ao[k] + dir.peep_o[k] * ck);
        ai[k] = i;
        af[k] = f;
        ag[k] = g;
        ao[k] = o;
        c[k] = ck;
        h[k] = o * ck.tanh();
    }
}

/// A single peephole LSTM step: input and forget gates look at the previous
/// cell state, the output gate at the updated one.
pub fn lstm_step(
    dir: &LstmDirection,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<StepTrace> {
    let n = dir.n_cells;
    for (what, expected, actual) in [
        ("step input", dir.n_in, x.len()),
        ("previous hidden state", n, h_prev.len()),
        ("previous cell state", n, c_prev.len()),
    ] {
        if expected != actual {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                actual,
            });
        }
    }
    let mut act = vec![0.0; 4 * n];
    let mut c = vec![0.0; n];
    let mut h = vec![0.0; n];
    step_into(dir, x, h_prev, c_prev, &mut act, &mut c, &mut h);
    Ok(StepTrace {
        input_gate: act[..n].to_vec(),
        forget_gate: act[n..2 * n].to_vec(),
        candidate: act[2 * n..3 * n].to_vec(),
        output_gate: act[3 * n..].to_vec(),
        cell: c,
        hidden: h,
    })
}
