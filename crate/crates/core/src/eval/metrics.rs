//! Per-user top-N metrics with binary relevance.
//!
//! `relevant` is always a sorted slice of item indices.

use super::Metric;

#[inline]
fn is_relevant(relevant: &[u32], item: u32) -> bool {
    relevant.binary_search(&item).is_ok()
}

#[inline]
fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

pub(crate) fn idcg(n: usize, num_relevant: usize) -> f64 {
    (1..=n.min(num_relevant)).map(discount).sum()
}

/// NDCG@n. Zero when there is nothing relevant.
pub fn ndcg_at(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    let ideal = idcg(n, relevant.len());
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, &i)| is_relevant(relevant, i))
        .map(|(r, _)| discount(r + 1))
        .sum();
    dcg / ideal
}

/// AP@n normalized by `min(n, |relevant|)`.
pub fn map_at(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    let denom = n.min(relevant.len());
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &i) in ranked.iter().take(n).enumerate() {
        if is_relevant(relevant, i) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    sum / denom as f64
}

pub fn recall_at(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .take(n)
        .filter(|&&i| is_relevant(relevant, i))
        .count();
    hits as f64 / relevant.len() as f64
}

pub fn metric_at(metric: Metric, ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    match metric {
        Metric::Ndcg => ndcg_at(ranked, relevant, n),
        Metric::Map => map_at(ranked, relevant, n),
        Metric::Recall => recall_at(ranked, relevant, n),
    }
}

/// Contribution `c_i` of each relevant item, in `relevant` order, scaled
/// so that their plain mean equals [`metric_at`]. Items outside the top
/// `n` contribute zero.
pub fn item_gains(metric: Metric, ranked: &[u32], relevant: &[u32], n: usize) -> Vec<f64> {
    let s = relevant.len();
    let mut gains = vec![0.0; s];
    if s == 0 {
        return gains;
    }
    let ideal = idcg(n, s);
    let denom = n.min(s) as f64;
    let mut hits = 0usize;
    for (r0, &i) in ranked.iter().take(n).enumerate() {
        let Ok(pos) = relevant.binary_search(&i) else {
            continue;
        };
        hits += 1;
        let rank = r0 + 1;
        gains[pos] = match metric {
            Metric::Recall => 1.0,
            Metric::Ndcg => s as f64 * discount(rank) / ideal,
            Metric::Map => s as f64 * (hits as f64 / rank as f64) / denom,
        };
    }
    gains
}
