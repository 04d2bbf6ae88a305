//! Unbiased top-N recommendation from biased implicit feedback.
//!
//! The crate trains user- and item-based shallow autoencoders with
//! self-propensity weighting and a bilateral agreement penalty, alongside
//! matrix-factorization and popularity-weighted baselines, and evaluates
//! them with average-over-all and popularity-debiased ranking metrics.
//!
//! Module map:
//! - [`data`]: loading, binarization, core filtering, and split protocols
//! - [`propensity`]: popularity, self-prediction, and evaluation propensities
//! - [`models`]: autoencoder and factorization scoring, losses, analytic gradients
//! - [`training`]: optimizer, initialization, training loops, grid search
//! - [`eval`]: ranking, metrics, evaluation schemes, popularity diagnostics
//! - [`synth`]: synthetic click data with known exposure and relevance
//! - [`cli`]: manifest-driven experiment commands

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod models;
pub mod propensity;
pub mod rng;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
