//! Reference implementations shared by the integration tests. Everything
//! here is written from the metric and loss definitions directly and does
//! not call into the library code it is compared against.

#![allow(dead_code)]

use std::collections::HashSet;

/// Full ranking of `candidates`: score descending, ties by item index.
pub fn ref_rank(scores: &[f64], candidates: &[u32]) -> Vec<u32> {
    let mut v: Vec<(f64, u32)> = candidates.iter().map(|&i| (scores[i as usize], i)).collect();
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, i)| i).collect()
}

fn dcg(labels: &[bool], n: usize) -> f64 {
    labels
        .iter()
        .take(n)
        .enumerate()
        .map(|(k, &l)| if l { 1.0 / ((k + 2) as f64).log2() } else { 0.0 })
        .sum()
}

pub fn ref_ndcg(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let labels: Vec<bool> = ranked.iter().map(|i| rel.contains(i)).collect();
    let mut ideal = vec![true; relevant.len()];
    ideal.extend(std::iter::repeat_n(false, n));
    let best = dcg(&ideal, n);
    if best == 0.0 {
        0.0
    } else {
        dcg(&labels, n) / best
    }
}

pub fn ref_map(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let denom = n.min(rel.len());
    if denom == 0 {
        return 0.0;
    }
    let top: Vec<u32> = ranked.iter().take(n).copied().collect();
    let mut sum = 0.0;
    for k in 0..top.len() {
        if rel.contains(&top[k]) {
            let hits = top[..=k].iter().filter(|i| rel.contains(i)).count();
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / denom as f64
}

pub fn ref_recall(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let top: HashSet<u32> = ranked.iter().take(n).copied().collect();
    relevant.iter().filter(|i| top.contains(i)).count() as f64 / relevant.len() as f64
}

/// Per-item gain whose mean over the relevant set is the metric value.
pub fn ref_item_gain(metric: &str, ranked: &[u32], relevant: &[u32], n: usize, item: u32) -> f64 {
    let Some(pos) = ranked.iter().take(n).position(|&i| i == item) else {
        return 0.0;
    };
    let rank = pos + 1;
    let s = relevant.len() as f64;
    match metric {
        "recall" => 1.0,
        "ndcg" => {
            let ideal: f64 = (1..=n.min(relevant.len())).map(|k| 1.0 / ((k + 1) as f64).log2()).sum();
            s * (1.0 / ((rank + 1) as f64).log2()) / ideal
        }
        "map" => {
            let hits = ranked[..rank].iter().filter(|i| relevant.contains(i)).count();
            s * (hits as f64 / rank as f64) / n.min(relevant.len()) as f64
        }
        other => panic!("unknown metric {other}"),
    }
}

/// `(shown, hits)` per item over the top `n` of every list.
pub fn ref_item_precision(lists: &[(Vec<u32>, Vec<u32>)], num_items: usize, n: usize) -> Vec<Option<f64>> {
    (0..num_items as u32)
        .map(|item| {
            let mut shown = 0;
            let mut hits = 0;
            for (ranked, relevant) in lists {
                if ranked.iter().take(n).any(|&i| i == item) {
                    shown += 1;
                    if relevant.contains(&item) {
                        hits += 1;
                    }
                }
            }
            (shown > 0).then(|| hits as f64 / shown as f64)
        })
        .collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dense autoencoder weights for the loss oracle, same row-major layout
/// as the library parameters.
pub struct RefAe<'a> {
    pub n: usize,
    pub d: usize,
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
}

impl RefAe<'_> {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = (0..self.d)
            .map(|k| sig(self.b1[k] + (0..self.n).map(|j| x[j] * self.w1[j * self.d + k]).sum::<f64>()))
            .collect();
        (0..self.n)
            .map(|j| sig(self.b2[j] + (0..self.d).map(|k| h[k] * self.w2[k * self.n + j]).sum::<f64>()))
            .collect()
    }

    /// Row objective: weighted cross-entropy over all columns, the
    /// agreement penalty on positives and the L2 penalty on both weight
    /// matrices.
    #[allow(clippy::too_many_arguments)]
    pub fn row_loss(
        &self,
        active: &[u32],
        omega: &[f64],
        pseudo: &[f64],
        lambda: f64,
        l2: f64,
        sipw_scale: f64,
        bu_scale: f64,
    ) -> f64 {
        let mut x = vec![0.0; self.n];
        for &j in active {
            x[j as usize] = 1.0;
        }
        let out = self.forward(&x);
        let mut ce = 0.0;
        let mut agree = 0.0;
        for j in 0..self.n {
            let p = out[j];
            let (y_over_w, target) = match active.iter().position(|&a| a as usize == j) {
                Some(k) => (1.0 / omega[k], Some(pseudo[k])),
                None => (0.0, None),
            };
            ce += -y_over_w * p.ln() - (1.0 - y_over_w) * (1.0 - p).ln();
            if let Some(t) = target {
                agree += (p - t) * (p - t);
            }
        }
        let norm: f64 = self.w1.iter().chain(self.w2).map(|w| w * w).sum();
        sipw_scale * ce + lambda * bu_scale * agree + 0.5 * l2 * norm
    }
}
