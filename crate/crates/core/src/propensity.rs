//! Observation-probability estimates used as inverse weights.
//!
//! Three sources are supported: a popularity power law for training-time
//! weighting, the model's own clipped predictions on observed positives,
//! and the popularity propensity used by the debiased evaluation scheme.

use std::io::Write;

use crate::data::{Interactions, ItemStats};
use crate::error::{Error, Result};

pub const DEFAULT_CLIP_MIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityValues {
    /// One value per item.
    PerItem(Vec<f64>),
    /// One value per observed positive, aligned with the rows of the
    /// interaction matrix the table was built for. Only positives carry a
    /// label that is divided by the propensity, so other pairs are never
    /// materialized.
    PerPair(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityTable {
    pub clip_min: f64,
    pub values: PropensityValues,
}

fn check_clip(clip_min: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&clip_min) {
        return Err(Error::Config(format!(
            "clip_min must lie in [0, 1], got {clip_min}"
        )));
    }
    Ok(())
}

fn power_law(stats: &ItemStats, exponent: f64, clip_min: f64) -> Result<Vec<f64>> {
    check_clip(clip_min)?;
    if stats.max_count == 0 {
        return Err(Error::Data("item counts are all zero".into()));
    }
    let max = stats.max_count as f64;
    Ok(stats
        .counts
        .iter()
        .map(|&c| (c as f64 / max).powf(exponent).clamp(clip_min, 1.0))
        .collect())
}

/// `(n_i / max n)^eta`, clipped to `[clip_min, 1]`.
pub fn popularity_propensity(stats: &ItemStats, eta: f64, clip_min: f64) -> Result<PropensityTable> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    Ok(PropensityTable {
        clip_min,
        values: PropensityValues::PerItem(power_law(stats, eta, clip_min)?),
    })
}

/// Evaluation propensity `(n_i / max n)^((gamma + 1) / 2)`, clipped.
pub fn eval_propensity(stats: &ItemStats, gamma: f64, clip_min: f64) -> Result<PropensityTable> {
    eval_propensity_with_exponent(stats, (gamma + 1.0) / 2.0, clip_min)
}

pub fn eval_propensity_with_exponent(
    stats: &ItemStats,
    exponent: f64,
    clip_min: f64,
) -> Result<PropensityTable> {
    Ok(PropensityTable {
        clip_min,
        values: PropensityValues::PerItem(power_law(stats, exponent, clip_min)?),
    })
}

/// Clamps model predictions on observed positives to `[clip_min, 1]`.
/// The result is a constant for the next round of updates; nothing
/// differentiates through it.
pub fn self_propensity(predictions: Vec<Vec<f64>>, clip_min: f64) -> Result<PropensityTable> {
    check_clip(clip_min)?;
    let mut rows = predictions;
    for row in &mut rows {
        for p in row.iter_mut() {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Internal(format!(
                    "prediction {p} is not a probability"
                )));
            }
            *p = p.clamp(clip_min, 1.0);
        }
    }
    Ok(PropensityTable {
        clip_min,
        values: PropensityValues::PerPair(rows),
    })
}

impl PropensityTable {
    /// Uniform table (no reweighting).
    pub fn ones(num_items: usize) -> Self {
        PropensityTable {
            clip_min: 0.0,
            values: PropensityValues::PerItem(vec![1.0; num_items]),
        }
    }

    pub fn item(&self, i: usize) -> Option<f64> {
        match &self.values {
            PropensityValues::PerItem(v) => v.get(i).copied(),
            PropensityValues::PerPair(_) => None,
        }
    }

    /// Propensities of the positives in `rows.row(r)`.
    ///
    /// `items_are_columns` says whether the columns of `rows` are items
    /// (user-major) or users (item-major); a per-item table is looked up
    /// accordingly. Per-pair tables must have been built for the same
    /// orientation.
    pub fn positive_weights(&self, rows: &Interactions, r: usize, items_are_columns: bool) -> Vec<f64> {
        match &self.values {
            PropensityValues::PerItem(v) => {
                if items_are_columns {
                    rows.row(r).iter().map(|&i| v[i as usize]).collect()
                } else {
                    vec![v[r]; rows.degree(r)]
                }
            }
            PropensityValues::PerPair(p) => {
                debug_assert_eq!(p[r].len(), rows.degree(r));
                p[r].clone()
            }
        }
    }

    /// Writes `item<TAB>value` lines. Per-pair tables have no per-item view.
    pub fn write_item_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let PropensityValues::PerItem(v) = &self.values else {
            return Err(Error::Config("only per-item propensities can be dumped".into()));
        };
        for (i, p) in v.iter().enumerate() {
            writeln!(out, "{i}\t{p}").map_err(|e| Error::io("<propensity dump>", e))?;
        }
        Ok(())
    }
}
