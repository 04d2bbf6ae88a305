//! Top-N ranking evaluation.
//!
//! Rankings are built per user over that user's candidate items. Metrics
//! are averaged over users with at least one relevant test item, either
//! plainly (average-over-all) or with each relevant item's contribution
//! divided by its popularity propensity.

mod diagnostics;
pub mod metrics;
mod stats;

pub use diagnostics::{
    item_precision_at, popularity_groups, popularity_prediction_correlation, Group,
    PopularityGroups,
};
pub use metrics::{item_gains, map_at, metric_at, ndcg_at, recall_at};
pub use stats::{mean_and_stderr, paired_t_test, TTest};

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{DatasetSplit, Interactions};
use crate::error::{Error, Result};
use crate::models::ScoreMatrix;
use crate::propensity::PropensityTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Ndcg,
    Map,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ndcg, Metric::Map, Metric::Recall];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ndcg => "ndcg",
            Metric::Map => "map",
            Metric::Recall => "recall",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Metric::Ndcg),
            "map" => Ok(Metric::Map),
            "recall" => Ok(Metric::Recall),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Aoa,
    Unbiased,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Aoa => "aoa",
            Scheme::Unbiased => "unbiased",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aoa" => Ok(Scheme::Aoa),
            "unbiased" => Ok(Scheme::Unbiased),
            other => Err(Error::Config(format!("unknown evaluation scheme `{other}`"))),
        }
    }
}

/// Items for one user, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub user: u32,
    pub items: Vec<u32>,
}

fn by_score_then_index(scores: &[f64]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    move |&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    }
}

/// Sorts `candidates` by descending score, ties by ascending item index,
/// keeping the first `max_n`. `scores` is indexed by item. Returns `None`
/// when there are no candidates.
pub fn rank_items(user: u32, scores: &[f64], candidates: &[u32], max_n: usize) -> Option<RankedList> {
    if candidates.is_empty() {
        log::debug!("rank_items: user {user} has no candidates");
        return None;
    }
    let mut items = candidates.to_vec();
    let cmp = by_score_then_index(scores);
    if max_n < items.len() && max_n > 0 {
        items.select_nth_unstable_by(max_n - 1, &cmp);
        items.truncate(max_n);
    }
    items.sort_unstable_by(&cmp);
    Some(RankedList { user, items })
}

/// Aggregate of one metric at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub scheme: Scheme,
    pub metric: Metric,
    pub cutoff: usize,
    pub value: f64,
    pub stderr: f64,
    pub num_users: usize,
    /// Per-user values in user order, for significance tests.
    pub per_user: Vec<(u32, f64)>,
}

fn report(scheme: Scheme, metric: Metric, cutoff: usize, per_user: Vec<(u32, f64)>) -> MetricReport {
    let values: Vec<f64> = per_user.iter().map(|&(_, v)| v).collect();
    let (value, stderr) = mean_and_stderr(&values);
    MetricReport {
        scheme,
        metric,
        cutoff,
        value,
        stderr,
        num_users: per_user.len(),
        per_user,
    }
}

/// Average-over-all: per user, the mean of the relevant items'
/// contributions; then the mean over users with relevant test items.
pub fn aoa_evaluate(
    rankings: &[RankedList],
    relevance: &Interactions,
    metric: Metric,
    n: usize,
) -> MetricReport {
    let per_user = rankings
        .iter()
        .filter_map(|r| {
            let rel = relevance.row(r.user as usize);
            if rel.is_empty() {
                return None;
            }
            let gains = item_gains(metric, &r.items, rel, n);
            Some((r.user, gains.iter().sum::<f64>() / rel.len() as f64))
        })
        .collect();
    report(Scheme::Aoa, metric, n, per_user)
}

/// Popularity-debiased estimate: each relevant item's contribution is
/// divided by its propensity `P_i`. With `self_normalized`, a user's sum
/// is divided by `sum 1/P_i` instead of `|S_u|`.
pub fn unbiased_evaluate(
    rankings: &[RankedList],
    relevance: &Interactions,
    propensity: &PropensityTable,
    metric: Metric,
    n: usize,
    self_normalized: bool,
) -> Result<MetricReport> {
    let mut per_user = Vec::with_capacity(rankings.len());
    for r in rankings {
        let rel = relevance.row(r.user as usize);
        if rel.is_empty() {
            continue;
        }
        let gains = item_gains(metric, &r.items, rel, n);
        let mut num = 0.0;
        let mut inv_sum = 0.0;
        for (&i, g) in rel.iter().zip(&gains) {
            let p = propensity
                .item(i as usize)
                .ok_or_else(|| Error::Config(format!("no per-item propensity for item {i}")))?
                .max(propensity.clip_min);
            num += g / p;
            inv_sum += 1.0 / p;
        }
        let denom = if self_normalized {
            inv_sum
        } else {
            rel.len() as f64
        };
        per_user.push((r.user, num / denom));
    }
    Ok(report(Scheme::Unbiased, metric, n, per_user))
}

/// Ranks every user's candidates. `candidates(u)` yields the item list.
pub fn rank_all<'a, F>(scores: &ScoreMatrix, candidates: F, max_n: usize) -> Vec<RankedList>
where
    F: Fn(usize) -> std::borrow::Cow<'a, [u32]> + Sync,
{
    (0..scores.num_users)
        .into_par_iter()
        .filter_map(|u| rank_items(u as u32, scores.row(u), &candidates(u), max_n))
        .collect()
}

/// Test rankings for a split.
pub fn rank_test(scores: &ScoreMatrix, split: &DatasetSplit, max_n: usize) -> Vec<RankedList> {
    rank_all(
        scores,
        |u| std::borrow::Cow::Borrowed(split.test_candidates(u)),
        max_n,
    )
}

/// Mean NDCG@n of validation positives, ranking every item the user has
/// not trained on.
pub fn validation_ndcg(scores: &ScoreMatrix, split: &DatasetSplit, n: usize) -> f64 {
    let rankings = rank_all(
        scores,
        |u| std::borrow::Cow::Owned(split.validation_candidates(u)),
        n,
    );
    aoa_evaluate(&rankings, &split.validation, Metric::Ndcg, n).value
}

pub const METRIC_CSV_HEADER: &str = "scheme,metric,n,value,stderr,num_users";

pub fn metrics_csv(reports: &[MetricReport]) -> String {
    let mut out = format!("{METRIC_CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{}",
            r.scheme.as_str(),
            r.metric.as_str(),
            r.cutoff,
            r.value,
            r.stderr,
            r.num_users
        );
    }
    out
}

/// `user,value` rows of one report, for paired tests across runs.
pub fn per_user_csv(r: &MetricReport) -> String {
    let mut out = String::from("user,value\n");
    for (u, v) in &r.per_user {
        let _ = writeln!(out, "{u},{v:?}");
    }
    out
}
