//! Exhaustive hyperparameter search.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ModelKind, TrainConfig};
use super::trainer::train;
use crate::data::DatasetSplit;
use crate::error::{Error, Result};

/// Candidate values per training key, in the order given.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub axes: Vec<(String, Vec<String>)>,
}

/// `n` points evenly spaced in log10 between `hi` and `lo`, largest first.
pub fn log_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (hi.log10(), lo.log10());
            (0..n)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

impl Grid {
    pub fn axis(mut self, key: &str, values: impl IntoIterator<Item = impl ToString>) -> Self {
        self.axes
            .push((key.to_string(), values.into_iter().map(|v| v.to_string()).collect()));
        self
    }

    /// Grid used when none is configured: hidden width, learning rate
    /// and L2 for every model, plus the two agreement weights for the
    /// bilateral model.
    pub fn default_for(kind: ModelKind) -> Self {
        let g = Grid::default()
            .axis("hidden_dim", [50, 100, 200, 400])
            .axis("learning_rate", log_grid(2e-1, 1e-5, 5))
            .axis("l2", log_grid(1e-4, 1e-14, 5));
        if kind == ModelKind::Biser {
            g.axis("lambda_u", [0.1, 0.5, 0.9]).axis("lambda_i", [0.1, 0.5, 0.9])
        } else {
            g
        }
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("grid has no axes".into()));
        }
        for (key, values) in &self.axes {
            if values.is_empty() {
                return Err(Error::Config(format!("grid axis `{key}` has no values")));
            }
            if !TrainConfig::KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("grid axis `{key}` is not a training key")));
            }
        }
        Ok(())
    }

    /// Cartesian product over `base`, first axis slowest. Each entry holds
    /// the assignment and the resulting config, or the reason it is
    /// invalid.
    pub fn expand(&self, base: &TrainConfig) -> Result<Vec<(Vec<(String, String)>, Result<TrainConfig>)>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.size());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            let assignment: Vec<(String, String)> = self
                .axes
                .iter()
                .zip(&idx)
                .map(|((k, v), &i)| (k.clone(), v[i].clone()))
                .collect();
            let mut cfg = base.clone();
            let built = assignment
                .iter()
                .try_for_each(|(k, v)| cfg.set(k, v))
                .and_then(|_| cfg.validate())
                .map(|_| cfg);
            out.push((assignment, built));
            let mut axis = self.axes.len();
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.axes[axis].1.len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub index: usize,
    pub assignment: Vec<(String, String)>,
    /// `(best validation metric, best epoch, epochs run)` or the failure.
    pub outcome: Result<(f64, usize, usize), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index of the selected row; `None` when every run failed.
    pub best: Option<usize>,
    pub best_config: Option<TrainConfig>,
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        if let Some(r) = self.rows.first() {
            for (k, _) in &r.assignment {
                let _ = write!(out, ",{k}");
            }
        }
        out.push_str(",val_metric,best_epoch,epochs,status\n");
        for r in &self.rows {
            let _ = write!(out, "{}", r.index);
            for (_, v) in &r.assignment {
                let _ = write!(out, ",{v}");
            }
            match &r.outcome {
                Ok((m, b, e)) => {
                    let _ = writeln!(out, ",{m},{b},{e},ok");
                }
                Err(msg) => {
                    let _ = writeln!(out, ",,,,\"error: {}\"", msg.replace('"', "'"));
                }
            }
        }
        out
    }
}

/// Trains every grid point (up to `jobs` at a time) and selects the best
/// validation metric; ties go to the earliest row.
pub fn grid_search(split: &DatasetSplit, base: &TrainConfig, grid: &Grid, jobs: usize) -> Result<GridResult> {
    let points = grid.expand(base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<(Result<(f64, usize, usize), String>, Option<TrainConfig>)> = pool.install(|| {
        points
            .par_iter()
            .map(|(_, cfg)| match cfg {
                Err(e) => (Err(e.to_string()), None),
                Ok(cfg) => match train(split, cfg) {
                    Ok(out) => (
                        Ok((out.report.best_metric, out.report.best_epoch, out.report.epochs.len())),
                        Some(cfg.clone()),
                    ),
                    Err(e) => {
                        log::warn!("grid point failed: {e}");
                        (Err(e.to_string()), None)
                    }
                },
            })
            .collect()
    });
    let mut best: Option<(usize, f64)> = None;
    let mut rows = Vec::with_capacity(points.len());
    let mut configs = Vec::with_capacity(points.len());
    for (index, ((assignment, _), (outcome, cfg))) in points.into_iter().zip(outcomes).enumerate() {
        if let Ok((m, _, _)) = outcome {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((index, m));
            }
        }
        rows.push(GridRow {
            index,
            assignment,
            outcome,
        });
        configs.push(cfg);
    }
    let best = best.map(|(i, _)| i);
    Ok(GridResult {
        rows,
        best,
        best_config: best.and_then(|i| configs[i].clone()),
    })
}
