use super::{BlstmParams, GradientSet};
use crate::error::{Error, Result};

/// Added under the square root.
pub const RMSPROP_EPSILON: f64 = 1e-8;

/// RMSProp with a running average of squared gradients per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub accum: BlstmParams,
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl RmsPropState {
    pub fn new(params: &BlstmParams, learning_rate: f64, decay: f64) -> Self {
        Self {
            accum: params.zeros_like(),
            learning_rate,
            decay,
            epsilon: RMSPROP_EPSILON,
        }
    }

    /// Apply one step. A gradient with any non-finite entry is rejected
    /// before anything is modified; the error names the tensor index in
    /// canonical order.
    pub fn update(&mut self, params: &mut BlstmParams, grads: &GradientSet) -> Result<()> {
        let g_tensors = grads.0.tensors();
        if let Some(tensor) = g_tensors
            .iter()
            .position(|t| t.iter().any(|g| !g.is_finite()))
        {
            return Err(Error::Divergence { tensor });
        }
        let (eta, rho, eps) = (self.learning_rate, self.decay, self.epsilon);
        for ((w, r), g) in params
            .tensors_mut()
            .into_iter()
            .zip(self.accum.tensors_mut())
            .zip(g_tensors)
        {
            for ((wv, rv), &gv) in w.iter_mut().zip(r.iter_mut()).zip(g) {
                *rv = rho * *rv + (1.0 - rho) * gv * gv;
                *wv -= eta * gv / (*rv + eps).sqrt();
            }
        }
        Ok(())
    }
}
