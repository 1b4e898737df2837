#![allow(dead_code)]

use ndarray::Array2;
use polysed::neural::{
    bptt, forward, init_network, sigmoid, Architecture, BlstmNetwork, Gate, LstmDirection,
};
use polysed::sequence::TargetRoll;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

/// A random toy network with a random input sequence and target roll.
pub struct ToyCase {
    pub net: BlstmNetwork,
    pub seq: Array2<f64>,
    pub roll: TargetRoll,
}

pub fn toy_case_scaled(
    seed: u64,
    scale: f64,
    max_layers: usize,
    max_cells: usize,
    max_len: usize,
    max_classes: usize,
) -> ToyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bands = rng.random_range(1..=4);
    let layers = rng.random_range(1..=max_layers);
    let cells = (0..layers)
        .map(|_| rng.random_range(1..=max_cells))
        .collect();
    let n_classes = rng.random_range(1..=max_classes);
    let arch = Architecture::new(n_bands, cells, n_classes).unwrap();
    let mut net = init_network(&arch, rng.random()).unwrap();
    // `scale` 1 is the training initialisation; larger values push the
    // gates towards saturation.
    for t in net.params.tensors_mut() {
        for w in t.iter_mut() {
            *w *= scale;
        }
    }
    let t = rng.random_range(2..=max_len);
    let seq = Array2::from_shape_fn((t, n_bands), |_| rng.random_range(-1.5..1.5));
    let roll = TargetRoll {
        values: Array2::from_shape_fn((t, n_classes), |_| rng.random_bool(0.4)),
    };
    ToyCase { net, seq, roll }
}

/// Mean squared error in plain `f64`.
pub fn mse(net: &BlstmNetwork, case: &ToyCase) -> f64 {
    let y = forward(net, case.seq.view(), 0.0, 0).unwrap().output;
    let d = case.roll.to_f64();
    (&y - &d).mapv(|e| e * e).mean().unwrap()
}

/// Double-double `exp`: `x = k ln 2 + r`, then `expm1(r / 1024)` by Taylor
/// series and ten doublings of `(1 + p)^2 - 1 = 2p + p^2`.
fn dd_exp(x: TwoFloat) -> TwoFloat {
    if x.hi() < -700.0 {
        return TwoFloat::from(0.0);
    }
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let s = (x - twofloat::consts::LN_2 * k) / 1024.0;
    let mut term = s;
    let mut p = s;
    for n in 2..=12 {
        term = term * s / n as f64;
        p += term;
    }
    for _ in 0..10 {
        p = p * 2.0 + p * p;
    }
    (p + 1.0) * 2f64.powi(k as i32)
}

/// `1 / b` by long division; the crate's double-double quotient is only
/// accurate to about one `f64` ulp.
fn dd_recip(b: TwoFloat) -> TwoFloat {
    let q1 = 1.0 / b.hi();
    let r = TwoFloat::from(1.0) - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::from(q1) + q2 + q3
}

fn dd_sigmoid(x: TwoFloat) -> TwoFloat {
    dd_recip(dd_exp(-x) + 1.0)
}

fn dd_tanh(x: TwoFloat) -> TwoFloat {
    // 2 sigmoid(2x) - 1 stays finite for large |x|.
    dd_sigmoid(x * 2.0) * 2.0 - 1.0
}

/// Mean squared error evaluated in double-double arithmetic, reading the
/// parameters from `tensors` (canonical order, same shapes as `net`).
pub fn mse_dd(net: &BlstmNetwork, tensors: &[Vec<TwoFloat>], case: &ToyCase) -> TwoFloat {
    let t_len = case.seq.nrows();
    let mut input: Vec<Vec<TwoFloat>> = case
        .seq
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| TwoFloat::from(v)).collect())
        .collect();
    for (l, layer) in net.params.layers.iter().enumerate() {
        let mut outputs = Vec::new();
        for (d, dir) in [&layer.forward, &layer.backward].into_iter().enumerate() {
            let p = &tensors[l * 12 + d * 6..l * 12 + d * 6 + 6];
            let (w_x, w_h, pi, pf, po, b) = (&p[0], &p[1], &p[2], &p[3], &p[4], &p[5]);
            let n = dir.n_cells;
            let mut h = vec![TwoFloat::from(0.0); n];
            let mut c = vec![TwoFloat::from(0.0); n];
            let mut out = vec![Vec::new(); t_len];
            for s in 0..t_len {
                let t = if d == 0 { s } else { t_len - 1 - s };
                let mut a: Vec<TwoFloat> = b.clone();
                for (j, xj) in input[t].iter().enumerate() {
                    for q in 0..4 * n {
                        a[q] += *xj * w_x[j * 4 * n + q];
                    }
                }
                for (j, hj) in h.iter().enumerate() {
                    for q in 0..4 * n {
                        a[q] += *hj * w_h[j * 4 * n + q];
                    }
                }
                let mut h_new = Vec::with_capacity(n);
                for k in 0..n {
                    let i = dd_sigmoid(a[k] + pi[k] * c[k]);
                    let f = dd_sigmoid(a[n + k] + pf[k] * c[k]);
                    let g = dd_tanh(a[2 * n + k]);
                    c[k] = f * c[k] + i * g;
                    let o = dd_sigmoid(a[3 * n + k] + po[k] * c[k]);
                    h_new.push(o * dd_tanh(c[k]));
                }
                h = h_new;
                out[t] = h.clone();
            }
            outputs.push(out);
        }
        input = (0..t_len)
            .map(|t| {
                outputs[0][t]
                    .iter()
                    .chain(&outputs[1][t])
                    .copied()
                    .collect()
            })
            .collect();
    }
    let n_out = tensors.len();
    let (w, b) = (&tensors[n_out - 2], &tensors[n_out - 1]);
    let n_classes = b.len();
    let mut sum = TwoFloat::from(0.0);
    for (t, h) in input.iter().enumerate() {
        for k in 0..n_classes {
            let mut z = b[k];
            for (j, hj) in h.iter().enumerate() {
                z += *hj * w[j * n_classes + k];
            }
            let target = if case.roll.values[[t, k]] { 1.0 } else { 0.0 };
            let e = dd_sigmoid(z) - target;
            sum += e * e;
        }
    }
    sum / (t_len * n_classes) as f64
}

/// Largest relative error `|g - fd| / max(|g|, 1e-8)` between the BPTT
/// gradient and central finite differences with step `h`. The reference
/// loss is evaluated in double-double arithmetic.
pub fn max_gradient_error(case: &ToyCase, h: f64) -> f64 {
    let trace = forward(&case.net, case.seq.view(), 0.0, 0).unwrap();
    let (grads, _) = bptt(&case.net, &trace, &case.roll).unwrap();
    let analytic = grads
        .0
        .tensors()
        .into_iter()
        .map(<[f64]>::to_vec)
        .collect::<Vec<_>>();
    let mut tensors: Vec<Vec<TwoFloat>> = case
        .net
        .params
        .tensors()
        .into_iter()
        .map(|t| t.iter().map(|&v| TwoFloat::from(v)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for (k, g_tensor) in analytic.iter().enumerate() {
        for (i, &g) in g_tensor.iter().enumerate() {
            let base = tensors[k][i];
            tensors[k][i] = base + h;
            let up = mse_dd(&case.net, &tensors, case);
            tensors[k][i] = base - h;
            let down = mse_dd(&case.net, &tensors, case);
            tensors[k][i] = base;
            let fd: f64 = ((up - down) / (2.0 * h)).into();
            worst = worst.max((g - fd).abs() / g.abs().max(1e-8));
        }
    }
    worst
}

pub fn toy_case(
    seed: u64,
    max_layers: usize,
    max_cells: usize,
    max_len: usize,
    max_classes: usize,
) -> ToyCase {
    toy_case_scaled(seed, 1.0, max_layers, max_cells, max_len, max_classes)
}

/// The step written out cell by cell through the accessor methods.
pub fn scalar_lstm_step(
    dir: &LstmDirection,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let pre = |gate: Gate, k: usize| {
        let mut z = dir.gate_bias(gate, k);
        for (j, xj) in x.iter().enumerate() {
            z += dir.input_weight(gate, j, k) * xj;
        }
        for (j, hj) in h.iter().enumerate() {
            z += dir.recurrent_weight(gate, j, k) * hj;
        }
        z
    };
    let mut c_new = Vec::new();
    let mut h_new = Vec::new();
    for k in 0..dir.n_cells {
        let i = sigmoid(pre(Gate::Input, k) + dir.peep_i[k] * c[k]);
        let f = sigmoid(pre(Gate::Forget, k) + dir.peep_f[k] * c[k]);
        let g = pre(Gate::Cell, k).tanh();
        let ck = f * c[k] + i * g;
        let o = sigmoid(pre(Gate::Output, k) + dir.peep_o[k] * ck);
        c_new.push(ck);
        h_new.push(o * ck.tanh());
    }
    (c_new, h_new)
}

/// Random parameters in [-1, 1) with a random input, hidden and cell state.
pub fn random_step_input(
    rng: &mut ChaCha8Rng,
    n_in: usize,
    n: usize,
) -> (LstmDirection, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dir = LstmDirection::zeros(n_in, n);
    for v in dir
        .w_x
        .iter_mut()
        .chain(&mut dir.w_h)
        .chain(&mut dir.peep_i)
        .chain(&mut dir.peep_f)
        .chain(&mut dir.peep_o)
        .chain(&mut dir.bias)
    {
        *v = rng.random_range(-1.0..1.0);
    }
    let x = (0..n_in).map(|_| rng.random_range(-2.0..2.0)).collect();
    let h = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    (dir, x, h, c)
}
