//! Marginalized Bernoulli likelihood and its analytic gradient.

use serde::{Deserialize, Serialize};

use crate::domain::{DebiasingParams, LabeledExample, SensitiveGroup};
use crate::error::{Error, Result};

/// Likelihoods are clamped to `[EPS, 1 - EPS]` before the log.
pub const LIKELIHOOD_EPS: f64 = 1e-12;

/// Logistic-regression weights and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        ModelParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub(crate) fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.weights.clone();
        flat.push(self.bias);
        flat
    }

    pub(crate) fn from_flat(flat: &[f64]) -> Self {
        let (w, b) = flat.split_at(flat.len() - 1);
        ModelParams {
            weights: w.to_vec(),
            bias: b[0],
        }
    }
}

/// Gradient with respect to `(weights, bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic function, evaluated without overflow for any finite logit.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Fair score `P(ȳ=1 | x) = σ(⟨x, w⟩ + b)`.
pub fn score(params: &ModelParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimMismatch {
            expected: params.dim(),
            found: x.len(),
        });
    }
    Ok(sigmoid(params.logit(x)))
}

/// Observed-label probability `P(y=1 | x, s) = m_s · c̄ + b_s`.
pub fn marginalize(cbar: f64, group: SensitiveGroup, debias: &DebiasingParams) -> f64 {
    debias.slope(group) * cbar + debias.intercept(group)
}

/// Loss of one example and its derivative with respect to the logit.
///
/// Groups with identity debiasing use the closed-form logistic loss, so
/// the fairness-unaware model is exactly standard logistic regression.
#[inline]
pub(crate) fn example_terms(
    z: f64,
    label: bool,
    group: SensitiveGroup,
    debias: &DebiasingParams,
) -> (f64, f64) {
    if debias.is_identity_for(group) {
        let y = if label { 1.0 } else { 0.0 };
        let loss = if label { softplus(-z) } else { softplus(z) };
        return (loss, sigmoid(z) - y);
    }
    let c = sigmoid(z);
    let m = debias.slope(group);
    let p_pos = m * c + debias.intercept(group);
    let lik = if label { p_pos } else { 1.0 - p_pos };
    if lik <= LIKELIHOOD_EPS {
        return (-LIKELIHOOD_EPS.ln(), 0.0);
    }
    if lik >= 1.0 - LIKELIHOOD_EPS {
        return (-(1.0 - LIKELIHOOD_EPS).ln(), 0.0);
    }
    // dσ/dz = σ(z)σ(-z)
    let dlik = m * c * sigmoid(-z);
    let dlik = if label { dlik } else { -dlik };
    (-lik.ln(), -dlik / lik)
}

/// Accumulates mean loss and gradient over rows in iteration order.
pub(crate) fn accumulate<'a, I>(
    rows: I,
    params: &ModelParams,
    debias: &DebiasingParams,
    l2: f64,
    grad: Option<&mut [f64]>,
) -> Result<f64>
where
    I: Iterator<Item = (&'a [f64], bool, SensitiveGroup)>,
{
    let dim = params.dim();
    let mut loss_sum = 0.0;
    let mut n = 0usize;
    match grad {
        Some(g) => {
            debug_assert_eq!(g.len(), dim + 1);
            g.iter_mut().for_each(|v| *v = 0.0);
            for (x, y, s) in rows {
                if x.len() != dim {
                    return Err(Error::DimMismatch {
                        expected: dim,
                        found: x.len(),
                    });
                }
                let (loss, dz) = example_terms(params.logit(x), y, s, debias);
                loss_sum += loss;
                for (gj, xj) in g[..dim].iter_mut().zip(x) {
                    *gj += dz * xj;
                }
                g[dim] += dz;
                n += 1;
            }
            if n == 0 {
                return Err(Error::EmptyBatch);
            }
            let inv = 1.0 / n as f64;
            for (gj, wj) in g[..dim].iter_mut().zip(&params.weights) {
                *gj = *gj * inv + 2.0 * l2 * wj;
            }
            g[dim] *= inv;
        }
        None => {
            for (x, y, s) in rows {
                if x.len() != dim {
                    return Err(Error::DimMismatch {
                        expected: dim,
                        found: x.len(),
                    });
                }
                loss_sum += example_terms(params.logit(x), y, s, debias).0;
                n += 1;
            }
            if n == 0 {
                return Err(Error::EmptyBatch);
            }
        }
    }
    let penalty: f64 = params.weights.iter().map(|w| w * w).sum();
    Ok(loss_sum / n as f64 + l2 * penalty)
}

/// Mean negative marginal log-likelihood plus `l2 · ‖w‖²` (bias unpenalized).
pub fn nll_loss(
    batch: &[LabeledExample],
    params: &ModelParams,
    debias: &DebiasingParams,
    l2: f64,
) -> Result<f64> {
    accumulate(
        batch
            .iter()
            .map(|e| (e.features.as_slice(), e.label, e.group)),
        params,
        debias,
        l2,
        None,
    )
}

/// Analytic gradient of [`nll_loss`].
pub fn grad_nll(
    batch: &[LabeledExample],
    params: &ModelParams,
    debias: &DebiasingParams,
    l2: f64,
) -> Result<Gradient> {
    let mut flat = vec![0.0; params.dim() + 1];
    accumulate(
        batch
            .iter()
            .map(|e| (e.features.as_slice(), e.label, e.group)),
        params,
        debias,
        l2,
        Some(&mut flat),
    )?;
    let bias = flat.pop().unwrap_or_default();
    Ok(Gradient {
        weights: flat,
        bias,
    })
}
