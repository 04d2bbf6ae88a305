//! Point-wise cross-entropy losses on predicted relevance probabilities.

use crate::error::{Error, Result};

/// Predictions are clamped into `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking
/// logs.
pub const LOG_CLAMP: f64 = 1e-8;

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

/// `-ln r_hat`
#[inline]
pub fn positive_term(r_hat: f64) -> f64 {
    -clamp_prob(r_hat).ln()
}

/// `-ln (1 - r_hat)`
#[inline]
pub fn negative_term(r_hat: f64) -> f64 {
    -(1.0 - clamp_prob(r_hat)).ln()
}

/// Loss on an observed click label, treating every click as relevant.
pub fn biased_loss(y: f64, r_hat: f64) -> f64 {
    y * positive_term(r_hat) + (1.0 - y) * negative_term(r_hat)
}

/// Loss against the true relevance probability.
pub fn ideal_loss(rho: f64, r_hat: f64) -> f64 {
    rho * positive_term(r_hat) + (1.0 - rho) * negative_term(r_hat)
}

/// Inverse-propensity weighted loss. Negative when `y = 1`, `omega < 1`
/// and the prediction is already confident.
pub fn sipw_loss(y: f64, r_hat: f64, omega: f64) -> f64 {
    let w = y / omega;
    w * positive_term(r_hat) + (1.0 - w) * negative_term(r_hat)
}

/// Mean squared gap between two models' predictions on the same pairs.
/// An empty pair set contributes zero.
pub fn bu_loss(pred_a: &[f64], pred_b: &[f64]) -> Result<f64> {
    if pred_a.len() != pred_b.len() {
        return Err(Error::Dimension(format!(
            "{} vs {} predictions",
            pred_a.len(),
            pred_b.len()
        )));
    }
    if pred_a.is_empty() {
        log::warn!("bu_loss: empty pair set");
        return Ok(0.0);
    }
    let sum: f64 = pred_a
        .iter()
        .zip(pred_b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred_a.len() as f64)
}
