//! Xavier initialization and the Adagrad update.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::config::XavierVariant;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng, Stream};

/// Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Row-major `rows x cols` tensor with Glorot-uniform entries, seeded.
pub fn xavier_init(shape: (usize, usize), seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_for(seed, Stream::Init);
    xavier_fill(shape, XavierVariant::Uniform, &mut rng)
}

/// Draws a `rows x cols` tensor from `rng`. The normal variant has the
/// same variance `2 / (fan_in + fan_out)` as the uniform one.
pub fn xavier_fill(shape: (usize, usize), variant: XavierVariant, rng: &mut Rng) -> Result<Vec<f64>> {
    let (rows, cols) = shape;
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!("xavier_init needs positive dims, got {rows}x{cols}")));
    }
    let len = rows * cols;
    Ok(match variant {
        XavierVariant::Uniform => {
            let b = xavier_bound(rows, cols);
            (0..len).map(|_| rng.random_range(-b..=b)).collect()
        }
        XavierVariant::Normal => {
            let sd = (2.0 / (rows + cols) as f64).sqrt();
            let dist = Normal::new(0.0, sd).expect("positive sd");
            (0..len).map(|_| dist.sample(rng)).collect()
        }
    })
}

/// Per-tensor squared-gradient accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub accumulators: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(sizes: &[usize], init: f64, epsilon: f64) -> Self {
        Self {
            accumulators: sizes.iter().map(|&n| vec![init; n]).collect(),
            epsilon,
        }
    }
}

/// `acc += g^2; param -= lr * g / (sqrt(acc) + eps)`.
///
/// Gradients are checked before anything is touched, so a non-finite
/// gradient leaves both the parameters and the accumulators unchanged.
pub fn adagrad_step(
    params: &mut [f64],
    grads: &[f64],
    accum: &mut [f64],
    lr: f64,
    epsilon: f64,
    name: &'static str,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != accum.len() {
        return Err(Error::Dimension(format!(
            "`{name}`: {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            accum.len()
        )));
    }
    if let Some(pos) = grads.iter().position(|g| !g.is_finite()) {
        log::error!("non-finite gradient in `{name}` at index {pos}: {}", grads[pos]);
        return Err(Error::NonFiniteGradient { param: name });
    }
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(accum.iter_mut()) {
        if g == 0.0 {
            continue;
        }
        *a += g * g;
        *p -= lr * g / (a.sqrt() + epsilon);
    }
    Ok(())
}

/// Adagrad restricted to rows `rows` of a row-major matrix of width `width`.
pub fn adagrad_rows(
    params: &mut [f64],
    grads: &[f64],
    accum: &mut [f64],
    rows: &[u32],
    width: usize,
    lr: f64,
    epsilon: f64,
    name: &'static str,
) -> Result<()> {
    for &r in rows {
        let span = r as usize * width..(r as usize + 1) * width;
        adagrad_step(
            &mut params[span.clone()],
            &grads[span.clone()],
            &mut accum[span],
            lr,
            epsilon,
            name,
        )?;
    }
    Ok(())
}
