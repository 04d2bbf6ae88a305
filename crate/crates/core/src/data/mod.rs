//! Interaction data: loaders, binarization, core filtering, and the two
//! split protocols (random held-out test vs. a separately collected
//! missing-at-random test file).

mod io;
mod split;

pub use io::{
    compact_ids, load_dense_ascii, load_triplets, parse_dense_ascii, parse_triplets, read_interactions, read_split,
    write_interactions, write_split, DenseRatings, ExplicitRatings, IdMap, Rating, RatingTriplet,
};
pub use split::{
    binarize, filter_core, item_popularity, make_mar_split, split_holdout, CoreFiltered,
    SplitManifest,
};

use crate::error::{Error, Result};

/// Binary implicit feedback in per-user sparse form. Only positives are
/// stored; a missing pair means label 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interactions {
    num_users: usize,
    num_items: usize,
    rows: Vec<Vec<u32>>,
}

impl Interactions {
    pub fn empty(num_users: usize, num_items: usize) -> Self {
        Self {
            num_users,
            num_items,
            rows: vec![Vec::new(); num_users],
        }
    }

    /// Builds from (user, item) pairs. Duplicates collapse to one positive.
    pub fn from_pairs<I>(num_users: usize, num_items: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut rows = vec![Vec::new(); num_users];
        for (u, i) in pairs {
            if u as usize >= num_users || i as usize >= num_items {
                return Err(Error::Data(format!(
                    "pair ({u}, {i}) outside {num_users}x{num_items}"
                )));
            }
            rows[u as usize].push(i);
        }
        Self::from_rows(num_users, num_items, rows)
    }

    pub fn from_rows(num_users: usize, num_items: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        if rows.len() != num_users {
            return Err(Error::Data(format!(
                "{} rows given for {num_users} users",
                rows.len()
            )));
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= num_items {
                    return Err(Error::Data(format!(
                        "item {last} outside 0..{num_items}"
                    )));
                }
            }
        }
        Ok(Self {
            num_users,
            num_items,
            rows,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Sorted positive items of user `u`.
    pub fn row(&self, u: usize) -> &[u32] {
        &self.rows[u]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn contains(&self, u: usize, i: u32) -> bool {
        self.rows[u].binary_search(&i).is_ok()
    }

    /// Offset of item `i` inside `row(u)`, if positive.
    pub fn position(&self, u: usize, i: u32) -> Option<usize> {
        self.rows[u].binary_search(&i).ok()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    pub fn degree(&self, u: usize) -> usize {
        self.rows[u].len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&i| (u as u32, i)))
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_items];
        for row in &self.rows {
            for &i in row {
                deg[i as usize] += 1;
            }
        }
        deg
    }

    /// Item-major view: row `i` lists the users who clicked item `i`.
    pub fn transpose(&self) -> Interactions {
        let mut rows = vec![Vec::new(); self.num_items];
        for (u, row) in self.rows.iter().enumerate() {
            for &i in row {
                rows[i as usize].push(u as u32);
            }
        }
        // users are visited in ascending order, so rows come out sorted
        Interactions {
            num_users: self.num_items,
            num_items: self.num_users,
            rows,
        }
    }

    pub fn union(&self, other: &Interactions) -> Result<Interactions> {
        if self.num_users != other.num_users || self.num_items != other.num_items {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.num_users, self.num_items, other.num_users, other.num_items
            )));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        Interactions::from_rows(self.num_users, self.num_items, rows)
    }

    /// Dense 0/1 vector for row `u`.
    pub fn dense_row(&self, u: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_items];
        for &i in &self.rows[u] {
            v[i as usize] = 1.0;
        }
        v
    }

    /// Fraction of empty cells.
    pub fn sparsity(&self) -> f64 {
        let cells = (self.num_users * self.num_items) as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.nnz() as f64 / cells
    }
}

/// Per-item click counts of one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemStats {
    pub counts: Vec<u32>,
    pub max_count: u32,
}

impl ItemStats {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Test file gathered on uniformly random items per user.
    MarTest,
    /// Test positives held out from the same biased log.
    MnarTest,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::MarTest => "mar_test",
            Protocol::MnarTest => "mnar_test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mar_test" | "mar" => Ok(Protocol::MarTest),
            "mnar_test" | "mnar" => Ok(Protocol::MnarTest),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Train / validation / test positives plus the per-user candidate items
/// that test rankings are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Interactions,
    pub validation: Interactions,
    pub test: Interactions,
    pub protocol: Protocol,
    test_candidates: Vec<Vec<u32>>,
}

impl DatasetSplit {
    pub fn new(
        train: Interactions,
        validation: Interactions,
        test: Interactions,
        protocol: Protocol,
        test_candidates: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let dims = (train.num_users(), train.num_items());
        for (name, part) in [("validation", &validation), ("test", &test)] {
            if (part.num_users(), part.num_items()) != dims {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, train is {}x{}",
                    part.num_users(),
                    part.num_items(),
                    dims.0,
                    dims.1
                )));
            }
        }
        if test_candidates.len() != dims.0 {
            return Err(Error::Dimension(format!(
                "{} candidate lists for {} users",
                test_candidates.len(),
                dims.0
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
            protocol,
            test_candidates,
        })
    }

    /// Candidates for MNAR protocols: every item outside the user's
    /// train and validation positives.
    pub fn mnar_candidates(train: &Interactions, validation: &Interactions) -> Vec<Vec<u32>> {
        (0..train.num_users())
            .map(|u| {
                (0..train.num_items() as u32)
                    .filter(|&i| !train.contains(u, i) && !validation.contains(u, i))
                    .collect()
            })
            .collect()
    }

    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }

    pub fn test_candidates(&self, u: usize) -> &[u32] {
        &self.test_candidates[u]
    }

    pub fn all_test_candidates(&self) -> &[Vec<u32>] {
        &self.test_candidates
    }

    /// Validation rankings consider every item the user has not trained on.
    pub fn validation_candidates(&self, u: usize) -> Vec<u32> {
        (0..self.num_items() as u32)
            .filter(|&i| !self.train.contains(u, i))
            .collect()
    }
}
