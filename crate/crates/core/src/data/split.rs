use std::fmt::Display;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::{DatasetSplit, ExplicitRatings, Interactions, ItemStats, Protocol};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

/// Ratings at or above `threshold` become positives; everything else,
/// including unrated cells, is absent.
pub fn binarize(ratings: &ExplicitRatings, threshold: f64) -> Interactions {
    let max = ratings
        .entries
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    if ratings.entries.is_empty() || threshold > max {
        log::warn!("binarize: threshold {threshold} above every rating (max {max})");
    }
    let pairs = ratings
        .entries
        .iter()
        .filter(|r| r.value >= threshold)
        .map(|r| (r.user, r.item));
    Interactions::from_pairs(ratings.num_users, ratings.num_items, pairs)
        .expect("ratings are indexed inside their own dimensions")
}

/// Result of [`filter_core`] with the surviving original indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreFiltered {
    pub interactions: Interactions,
    /// `kept_users[new] = old`
    pub kept_users: Vec<u32>,
    pub kept_items: Vec<u32>,
}

/// One user pass then one item pass: users with at most `min_user_deg`
/// positives are dropped, then items with at most `min_item_deg` among
/// the remaining users. Indices are re-compacted in ascending order.
pub fn filter_core(
    inter: &Interactions,
    min_user_deg: usize,
    min_item_deg: usize,
) -> Result<CoreFiltered> {
    let kept_users: Vec<u32> = (0..inter.num_users())
        .filter(|&u| inter.degree(u) > min_user_deg)
        .map(|u| u as u32)
        .collect();

    let mut item_deg = vec![0usize; inter.num_items()];
    for &u in &kept_users {
        for &i in inter.row(u as usize) {
            item_deg[i as usize] += 1;
        }
    }
    let kept_items: Vec<u32> = (0..inter.num_items())
        .filter(|&i| item_deg[i] > min_item_deg)
        .map(|i| i as u32)
        .collect();

    let mut new_item = vec![u32::MAX; inter.num_items()];
    for (new, &old) in kept_items.iter().enumerate() {
        new_item[old as usize] = new as u32;
    }
    let rows: Vec<Vec<u32>> = kept_users
        .iter()
        .map(|&u| {
            inter
                .row(u as usize)
                .iter()
                .map(|&i| new_item[i as usize])
                .filter(|&i| i != u32::MAX)
                .collect()
        })
        .collect();
    let interactions = Interactions::from_rows(kept_users.len(), kept_items.len(), rows)?;
    if interactions.is_empty() {
        return Err(Error::Data("dataset fully filtered".into()));
    }
    Ok(CoreFiltered {
        interactions,
        kept_users,
        kept_items,
    })
}

fn round_count(deg: usize, frac: f64) -> usize {
    (deg as f64 * frac).round() as usize
}

/// Random per-user holdout. Each user with at least two positives sends
/// `round(deg * test_frac)` (at least one) to test, then
/// `round(rest * val_frac_of_train)` of the remainder to validation,
/// keeping at least one training positive.
pub fn split_holdout(
    inter: &Interactions,
    test_frac: f64,
    val_frac_of_train: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    for (name, f) in [("test_frac", test_frac), ("val_frac", val_frac_of_train)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let (m, n) = (inter.num_users(), inter.num_items());
    let mut rng = rng_for(seed, Stream::Split);
    let mut train = vec![Vec::new(); m];
    let mut val = vec![Vec::new(); m];
    let mut test = vec![Vec::new(); m];
    let mut untestable = 0usize;
    for u in 0..m {
        let mut items = inter.row(u).to_vec();
        let deg = items.len();
        if deg < 2 {
            untestable += usize::from(deg > 0);
            train[u] = items;
            continue;
        }
        items.shuffle(&mut rng);
        let n_test = round_count(deg, test_frac).clamp(1, deg - 1);
        let rest = deg - n_test;
        let n_val = round_count(rest, val_frac_of_train).min(rest - 1);
        test[u] = items[..n_test].to_vec();
        val[u] = items[n_test..n_test + n_val].to_vec();
        train[u] = items[n_test + n_val..].to_vec();
    }
    if untestable > 0 {
        log::info!("split_holdout: {untestable} users with a single positive kept train-only");
    }
    let train = Interactions::from_rows(m, n, train)?;
    let validation = Interactions::from_rows(m, n, val)?;
    let test = Interactions::from_rows(m, n, test)?;
    let candidates = DatasetSplit::mnar_candidates(&train, &validation);
    DatasetSplit::new(train, validation, test, Protocol::MnarTest, candidates)
}

/// Split for a separately collected MAR test file. Validation positives are
/// drawn per user from `train`; each user's test candidates are exactly the
/// items rated in `test_ratings`, and test positives are those rated at or
/// above `threshold`.
pub fn make_mar_split(
    train: &Interactions,
    test_ratings: &ExplicitRatings,
    threshold: f64,
    val_frac: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Config(format!(
            "val_frac must lie in [0, 1), got {val_frac}"
        )));
    }
    let (m, n) = (train.num_users(), train.num_items());
    if test_ratings.num_items != n {
        return Err(Error::Dimension(format!(
            "test file has {} items, train has {n}",
            test_ratings.num_items
        )));
    }
    let mut rng = rng_for(seed, Stream::Split);
    let mut tr = vec![Vec::new(); m];
    let mut val = vec![Vec::new(); m];
    for u in 0..m {
        let mut items = train.row(u).to_vec();
        let deg = items.len();
        let n_val = round_count(deg, val_frac).min(deg.saturating_sub(1));
        if n_val > 0 {
            items.shuffle(&mut rng);
        }
        val[u] = items[..n_val].to_vec();
        tr[u] = items[n_val..].to_vec();
    }

    let mut candidates = vec![Vec::new(); m];
    let mut positives = Vec::new();
    let mut dropped = 0usize;
    for r in &test_ratings.entries {
        let u = r.user as usize;
        if u >= m {
            // cold users cannot be scored
            dropped += 1;
            continue;
        }
        candidates[u].push(r.item);
        if r.value >= threshold {
            positives.push((r.user, r.item));
        }
    }
    if dropped > 0 {
        log::warn!("make_mar_split: dropped {dropped} test ratings of users absent from train");
    }
    for c in &mut candidates {
        c.sort_unstable();
        c.dedup();
    }
    let train = Interactions::from_rows(m, n, tr)?;
    let validation = Interactions::from_rows(m, n, val)?;
    let test = Interactions::from_pairs(m, n, positives)?;
    DatasetSplit::new(train, validation, test, Protocol::MarTest, candidates)
}

pub fn item_popularity(inter: &Interactions) -> ItemStats {
    let counts: Vec<u32> = inter.item_degrees().into_iter().map(|d| d as u32).collect();
    let max_count = counts.iter().copied().max().unwrap_or(0);
    ItemStats { counts, max_count }
}

/// Replayable record of how a split was produced: ordered `key=value`
/// lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitManifest {
    entries: Vec<(String, String)>,
}

impl SplitManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Data(format!("split manifest lacks `{key}`")))
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Data(format!("split manifest `{key}={raw}` is malformed")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut out = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, idx + 1, "expected key=value"))?;
            out.set(k.trim(), v.trim());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rating;

    fn ratings(entries: &[(u32, u32, f64)], m: usize, n: usize) -> ExplicitRatings {
        ExplicitRatings {
            num_users: m,
            num_items: n,
            entries: entries
                .iter()
                .map(|&(user, item, value)| Rating { user, item, value })
                .collect(),
        }
    }

    #[test]
    fn binarize_threshold_rule() {
        let r = ratings(&[(0, 0, 5.0), (0, 1, 3.0)], 1, 2);
        let x = binarize(&r, 4.0);
        assert_eq!(x.row(0), &[0]);
        assert!(binarize(&r, 6.0).is_empty());
    }

    #[test]
    fn binarize_implicit_input_is_unchanged() {
        let r = ratings(&[(0, 0, 1.0), (1, 1, 1.0), (1, 0, 1.0)], 2, 2);
        let x = binarize(&r, 1.0);
        assert_eq!(x.nnz(), 3);
    }

    fn user_with_degree(deg: usize, n: usize) -> Vec<u32> {
        (0..deg as u32).map(|i| i % n as u32).collect()
    }

    #[test]
    fn filter_drops_users_at_threshold() {
        // user 0 has 10 positives, user 1 has 11
        let rows = vec![user_with_degree(10, 20), user_with_degree(11, 20)];
        let x = Interactions::from_rows(2, 20, rows).unwrap();
        let f = filter_core(&x, 10, 0).unwrap();
        assert_eq!(f.kept_users, vec![1]);
        assert_eq!(f.interactions.num_users(), 1);
        assert_eq!(f.interactions.num_items(), 11);
    }

    #[test]
    fn filter_zero_thresholds_drop_only_empty_entities() {
        let x = Interactions::from_pairs(3, 4, [(0, 1), (2, 3)]).unwrap();
        let f = filter_core(&x, 0, 0).unwrap();
        assert_eq!(f.kept_users, vec![0, 2]);
        assert_eq!(f.kept_items, vec![1, 3]);
        assert_eq!(f.interactions.row(1), &[1]);
    }

    #[test]
    fn filter_everything_is_an_error() {
        let x = Interactions::from_pairs(2, 2, [(0, 1)]).unwrap();
        assert!(matches!(filter_core(&x, 5, 0), Err(Error::Data(_))));
    }

    #[test]
    fn holdout_counts_for_ten_positives() {
        let x = Interactions::from_rows(1, 20, vec![(0..10).collect()]).unwrap();
        let s = split_holdout(&x, 0.2, 0.3, 7).unwrap();
        assert_eq!(s.test.degree(0), 2);
        assert_eq!(s.validation.degree(0), 2);
        assert_eq!(s.train.degree(0), 6);
        // candidates exclude train and validation positives
        let c = s.test_candidates(0);
        assert_eq!(c.len(), 20 - 8);
        for &i in c {
            assert!(!s.train.contains(0, i) && !s.validation.contains(0, i));
        }
    }

    #[test]
    fn holdout_keeps_single_positive_users_in_train() {
        let x = Interactions::from_pairs(2, 5, [(0, 1), (1, 2), (1, 3)]).unwrap();
        let s = split_holdout(&x, 0.2, 0.3, 1).unwrap();
        assert_eq!(s.train.row(0), &[1]);
        assert_eq!(s.test.degree(0), 0);
        assert_eq!(s.test.degree(1), 1);
    }

    #[test]
    fn holdout_is_seeded() {
        let x = Interactions::from_rows(3, 30, vec![(0..12).collect(), (5..25).collect(), (1..4).collect()])
            .unwrap();
        assert_eq!(split_holdout(&x, 0.2, 0.3, 9).unwrap(), split_holdout(&x, 0.2, 0.3, 9).unwrap());
        assert_ne!(split_holdout(&x, 0.2, 0.3, 9).unwrap(), split_holdout(&x, 0.2, 0.3, 10).unwrap());
    }

    #[test]
    fn mar_split_candidates_and_validation() {
        let train = Interactions::from_rows(2, 6, vec![(0..5).collect(), vec![2, 3]]).unwrap();
        let test = ratings(
            &[(0, 5, 5.0), (0, 1, 2.0), (1, 0, 4.0), (1, 4, 1.0), (7, 0, 5.0)],
            8,
            6,
        );
        let s = make_mar_split(&train, &test, 4.0, 0.3, 3).unwrap();
        assert_eq!(s.protocol, Protocol::MarTest);
        assert_eq!(s.test_candidates(0), &[1, 5]);
        assert_eq!(s.test_candidates(1), &[0, 4]);
        assert_eq!(s.test.row(0), &[5]);
        assert_eq!(s.validation.degree(0), 2);
        assert_eq!(s.train.degree(0) + s.validation.degree(0), 5);

        let s0 = make_mar_split(&train, &test, 4.0, 0.0, 3).unwrap();
        assert!(s0.validation.is_empty());
    }

    #[test]
    fn popularity_counts() {
        let x = Interactions::from_pairs(3, 2, [(0, 1), (1, 1), (2, 0)]).unwrap();
        let s = item_popularity(&x);
        assert_eq!(s.counts, vec![1, 2]);
        assert_eq!(s.max_count, 2);
        let e = item_popularity(&Interactions::empty(2, 3));
        assert_eq!(e.counts, vec![0, 0, 0]);
        assert_eq!(e.max_count, 0);
    }

    #[test]
    fn manifest_round_trip_keeps_order() {
        let mut m = SplitManifest::new();
        m.set("seed", 3).set("protocol", "mar_test").set("seed", 4);
        let text = m.to_text();
        assert_eq!(text, "seed=4\nprotocol=mar_test\n");
        assert_eq!(SplitManifest::parse(&text, "mem").unwrap(), m);
    }
}
