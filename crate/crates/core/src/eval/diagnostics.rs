//! Popularity-bias diagnostics: per-item precision, popularity groups and
//! the popularity/prediction correlation.

use super::RankedList;
use crate::data::{Interactions, ItemStats};
use crate::error::{Error, Result};
use crate::models::ScoreMatrix;

/// Per item: among users who got the item in their top `n`, the share for
/// whom it was relevant. `None` for items never recommended.
pub fn item_precision_at(
    rankings: &[RankedList],
    relevance: &Interactions,
    n: usize,
) -> Vec<Option<f64>> {
    let num_items = relevance.num_items();
    let mut shown = vec![0u32; num_items];
    let mut hit = vec![0u32; num_items];
    for r in rankings {
        let rel = relevance.row(r.user as usize);
        for &i in r.items.iter().take(n) {
            shown[i as usize] += 1;
            if rel.binary_search(&i).is_ok() {
                hit[i as usize] += 1;
            }
        }
    }
    shown
        .iter()
        .zip(&hit)
        .map(|(&s, &h)| (s > 0).then(|| h as f64 / s as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Tail,
    Mid,
    Head,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Tail, Group::Mid, Group::Head];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Tail => "tail",
            Group::Mid => "mid",
            Group::Head => "head",
        }
    }
}

/// Items split into three popularity bands of near-equal interaction mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityGroups {
    pub membership: Vec<Group>,
    /// Largest count in the tail and mid bands (0 when a band is empty).
    pub boundaries: [u32; 2],
    pub masses: [u64; 3],
}

impl PopularityGroups {
    pub fn size(&self, g: Group) -> usize {
        self.membership.iter().filter(|&&m| m == g).count()
    }

    /// Mean of the defined per-item values in each group.
    pub fn group_means(&self, per_item: &[Option<f64>]) -> [Option<f64>; 3] {
        let mut sum = [0.0; 3];
        let mut cnt = [0usize; 3];
        for (g, v) in self.membership.iter().zip(per_item) {
            if let Some(v) = v {
                sum[*g as usize] += v;
                cnt[*g as usize] += 1;
            }
        }
        std::array::from_fn(|k| (cnt[k] > 0).then(|| sum[k] / cnt[k] as f64))
    }
}

/// Sorts items by count (ties by index) and cuts the sequence into tail,
/// mid and head so the spread between the largest and smallest band mass
/// is minimal. Remaining ties prefer masses closest to a third each, then
/// shorter lower bands.
pub fn popularity_groups(stats: &ItemStats) -> Result<PopularityGroups> {
    let total = stats.total();
    if total == 0 {
        return Err(Error::Data("popularity groups need at least one interaction".into()));
    }
    let mut order: Vec<usize> = (0..stats.counts.len()).collect();
    order.sort_by_key(|&i| (stats.counts[i], i));
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0u64);
    for &i in &order {
        prefix.push(prefix.last().unwrap() + u64::from(stats.counts[i]));
    }
    let len = order.len();
    let third = total as f64 / 3.0;
    let mut best: Option<((u64, f64), usize, usize)> = None;
    for a in 0..=len {
        for b in a..=len {
            let m = [prefix[a], prefix[b] - prefix[a], total - prefix[b]];
            let spread = m.iter().max().unwrap() - m.iter().min().unwrap();
            let dev: f64 = m.iter().map(|&x| (x as f64 - third).powi(2)).sum();
            let key = (spread, dev);
            if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
                best = Some((key, a, b));
            }
        }
    }
    let (_, a, b) = best.expect("non-empty search");
    let mut membership = vec![Group::Head; len];
    for (pos, &i) in order.iter().enumerate() {
        membership[i] = if pos < a {
            Group::Tail
        } else if pos < b {
            Group::Mid
        } else {
            Group::Head
        };
    }
    let top = |end: usize, start: usize| {
        if end > start {
            stats.counts[order[end - 1]]
        } else {
            0
        }
    };
    Ok(PopularityGroups {
        membership,
        boundaries: [top(a, 0), top(b, a)],
        masses: [prefix[a], prefix[b] - prefix[a], total - prefix[b]],
    })
}

/// Pearson correlation between each clicked item's training count and its
/// mean predicted score over the users who clicked it. `Ok(None)` when
/// either side has zero variance.
pub fn popularity_prediction_correlation(
    scores: &ScoreMatrix,
    train: &Interactions,
) -> Result<Option<f64>> {
    if (scores.num_users, scores.num_items) != (train.num_users(), train.num_items()) {
        return Err(Error::Dimension(format!(
            "scores are {}x{}, train is {}x{}",
            scores.num_users,
            scores.num_items,
            train.num_users(),
            train.num_items()
        )));
    }
    let items = train.transpose();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..items.num_users() {
        let users = items.row(i);
        if users.is_empty() {
            continue;
        }
        let mean = users.iter().map(|&u| scores.get(u as usize, i)).sum::<f64>() / users.len() as f64;
        xs.push(users.len() as f64);
        ys.push(mean);
    }
    if xs.len() < 3 {
        return Err(Error::Data(format!(
            "correlation needs at least 3 clicked items, found {}",
            xs.len()
        )));
    }
    Ok(pearson(&xs, &ys))
}

pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    // spreads at rounding level count as zero variance
    let tiny = |s: f64, v: &[f64]| {
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        s <= n * (4.0 * f64::EPSILON * scale).powi(2)
    };
    if tiny(sxx, xs) || tiny(syy, ys) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
