//! Mixture-of-Laplace likelihood over flow residuals.
//!
//! Two Laplace components share location zero: a unit-scale component with
//! weight `α` (its log-scale `β₁` is pinned to 0) and a component with scale
//! `e^{β₂}` and weight `1 − α`. The two flow components `u` and `v` are
//! treated as independent, so a pixel's loss is the sum of two 1-D terms.
//!
//! `α` is parameterized by its logit so fitting is unconstrained.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::buffer::{BoolMask, ConfidenceMap, FlowField, ScalarMap};
use crate::error::{Error, Result};

/// Log-scale of the deterministic component. Fixed.
pub const BETA1: f64 = 0.0;

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(alpha: f64) -> f64 {
    (alpha / (1.0 - alpha)).ln()
}

/// `log(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-densities of the two weighted components at residual `e`.
#[inline]
fn component_logs(e: f64, logit_alpha: f64, beta2: f64) -> (f64, f64) {
    let abs = e.abs();
    let log_alpha = -softplus(-logit_alpha);
    let log_one_minus = -softplus(logit_alpha);
    let sharp = log_alpha - abs - BETA1 - LN_2;
    let wide = log_one_minus - abs * (-beta2).exp() - beta2 - LN_2;
    (sharp, wide)
}

/// Negative log-likelihood of one residual component.
#[inline]
pub fn component_nll(e: f64, logit_alpha: f64, beta2: f64) -> f64 {
    let (a, b) = component_logs(e, logit_alpha, beta2);
    let m = a.max(b);
    -(m + ((a - m).exp() + (b - m).exp()).ln())
}

/// Gradient of [`component_nll`] with respect to `(e, logit_alpha, beta2)`.
///
/// At `e == 0` the subgradient 0 is used for `∂/∂e`.
#[inline]
pub fn component_grad(e: f64, logit_alpha: f64, beta2: f64) -> (f64, f64, f64) {
    let (a, b) = component_logs(e, logit_alpha, beta2);
    // Posterior responsibility of the sharp component.
    let w_sharp = sigmoid(a - b);
    let w_wide = 1.0 - w_sharp;
    let inv_scale = (-beta2).exp();
    let sign = if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    };
    let d_e = sign * (w_sharp + w_wide * inv_scale);
    let d_logit = sigmoid(logit_alpha) - w_sharp;
    let d_beta2 = -w_wide * (e.abs() * inv_scale - 1.0);
    (d_e, d_logit, d_beta2)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
    }
    Ok(())
}

/// Pixel loss for predicted `pred` against `gt`: `ℓ(e_u) + ℓ(e_v)`.
pub fn mol_nll(pred: (f64, f64), gt: (f64, f64), alpha: f64, beta2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let a = logit(alpha);
    Ok(component_nll(pred.0 - gt.0, a, beta2) + component_nll(pred.1 - gt.1, a, beta2))
}

/// Gradients of the pixel loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MolGrad {
    /// `∂ℓ/∂u_p`, `∂ℓ/∂v_p`.
    pub pred: (f64, f64),
    pub logit_alpha: f64,
    pub beta2: f64,
}

pub fn mol_grad(pred: (f64, f64), gt: (f64, f64), logit_alpha: f64, beta2: f64) -> MolGrad {
    let gu = component_grad(pred.0 - gt.0, logit_alpha, beta2);
    let gv = component_grad(pred.1 - gt.1, logit_alpha, beta2);
    MolGrad {
        pred: (gu.0, gv.0),
        logit_alpha: gu.1 + gv.1,
        beta2: gu.2 + gv.2,
    }
}

/// Per-pixel mixture parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MolParams {
    pub logit_alpha: ScalarMap,
    pub beta2: ScalarMap,
}

impl MolParams {
    pub fn uniform(height: usize, width: usize, alpha: f64, beta2: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(MolParams {
            logit_alpha: ScalarMap::filled(height, width, logit(alpha)),
            beta2: ScalarMap::filled(height, width, beta2),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.logit_alpha.dims()
    }

    pub fn alpha(&self, i: usize) -> f64 {
        sigmoid(self.logit_alpha.data()[i])
    }

    pub fn beta1(&self) -> f64 {
        BETA1
    }
}

/// Per-pixel losses and their mean over `mask`.
pub fn nll_map(pred: &FlowField, gt: &FlowField, params: &MolParams, mask: &BoolMask) -> Result<(ScalarMap, Option<f64>)> {
    pred.check_dims("nll prediction", gt.dims())?;
    params.beta2.check_dims("nll beta2", gt.dims())?;
    params.logit_alpha.check_dims("nll alpha", gt.dims())?;
    mask.check_dims("nll mask", gt.dims())?;
    let data: Vec<f64> = (0..gt.len())
        .map(|i| {
            let a = params.logit_alpha.data()[i];
            let b = params.beta2.data()[i];
            component_nll(pred.u()[i] as f64 - gt.u()[i] as f64, a, b)
                + component_nll(pred.v()[i] as f64 - gt.v()[i] as f64, a, b)
        })
        .collect();
    let n = mask.count();
    let mean = (n > 0).then(|| {
        data.iter()
            .zip(mask.bits())
            .filter_map(|(&v, &m)| m.then_some(v))
            .sum::<f64>()
            / n as f64
    });
    Ok((ScalarMap::from_vec(gt.height(), gt.width(), data)?, mean))
}

/// Result of [`fit_mol`].
#[derive(Debug, Clone, PartialEq)]
pub struct MolFit {
    pub alpha: f64,
    pub beta2: f64,
    /// Mean pixel loss before each step, then after the last one.
    pub loss_trace: Vec<f64>,
}

const FIT_CHUNK: usize = 4096;

/// Mean loss and mean gradient over residual pairs. Chunked in a fixed
/// layout so the sum does not depend on the thread count.
fn loss_and_grad(residuals: &[(f64, f64)], logit_alpha: f64, beta2: f64) -> (f64, f64, f64) {
    let partial: Vec<(f64, f64, f64)> = residuals
        .par_chunks(FIT_CHUNK)
        .map(|chunk| {
            let mut acc = (0.0, 0.0, 0.0);
            for &(eu, ev) in chunk {
                for e in [eu, ev] {
                    acc.0 += component_nll(e, logit_alpha, beta2);
                    let (_, ga, gb) = component_grad(e, logit_alpha, beta2);
                    acc.1 += ga;
                    acc.2 += gb;
                }
            }
            acc
        })
        .collect();
    let n = residuals.len() as f64;
    let sum = partial
        .into_iter()
        .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    (sum.0 / n, sum.1 / n, sum.2 / n)
}

/// Fits one `(α, β₂)` to a set of `(e_u, e_v)` residuals by plain gradient
/// descent on the mean pixel loss, starting from `logit α = 0`, `β₂ = 1`.
pub fn fit_mol(residuals: &[(f64, f64)], steps: usize, lr: f64) -> Result<MolFit> {
    if residuals.is_empty() {
        return Err(Error::Empty("residuals"));
    }
    if lr <= 0.0 || !lr.is_finite() {
        return Err(Error::param("lr", "must be positive"));
    }
    if residuals.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
        return Err(Error::NonFinite("residuals"));
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut trace = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (loss, ga, gb) = loss_and_grad(residuals, a, b);
        trace.push(loss);
        a -= lr * ga;
        b -= lr * gb;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("mol fit parameters"));
        }
    }
    trace.push(loss_and_grad(residuals, a, b).0);
    Ok(MolFit {
        alpha: sigmoid(a),
        beta2: b,
        loss_trace: trace,
    })
}

/// Unnormalized confidence `α / (2e^{β₁}) + (1 − α) / (2e^{β₂})`.
pub fn raw_confidence(alpha: f64, beta2: f64) -> f64 {
    alpha / (2.0 * BETA1.exp()) + (1.0 - alpha) / (2.0 * beta2.exp())
}

/// Per-frame min-max normalized confidence; constant maps become all ones.
pub fn confidence_map(params: &MolParams) -> ConfidenceMap {
    let (h, w) = params.dims();
    let raw: Vec<f64> = (0..h * w)
        .map(|i| raw_confidence(params.alpha(i), params.beta2.data()[i]))
        .collect();
    ConfidenceMap::normalize(&ScalarMap::from_vec(h, w, raw).expect("dims"))
}
