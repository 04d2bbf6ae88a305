//! Synthetic click data with known exposure and relevance.
//!
//! A click is the product of two independent Bernoulli events, exposure
//! with probability `omega` and relevance with probability `rho`. Relevance
//! comes from a low-rank logit model; exposure follows a popularity power
//! law over a random item ranking.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{write_interactions, Interactions};
use crate::error::{Error, Result};
use crate::models::sigmoid;
use crate::rng::{rng_for, Stream};

/// Logit scale and offset of the relevance model. With standard-normal
/// factor products this puts the mean relevance near 0.22.
pub const RELEVANCE_SCALE: f64 = 2.0;
pub const RELEVANCE_BIAS: f64 = -2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Exposure {
    /// One probability per item.
    PerItem(Vec<f64>),
    /// Row-major `num_users x num_items`.
    PerPair(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGroundTruth {
    pub num_users: usize,
    pub num_items: usize,
    pub latent_rank: usize,
    pub seed: u64,
    /// Row-major `num_users x num_items` relevance probabilities.
    pub rho: Vec<f64>,
    pub omega: Exposure,
}

impl SynthGroundTruth {
    pub fn rho(&self, u: usize, i: usize) -> f64 {
        self.rho[u * self.num_items + i]
    }

    pub fn omega(&self, u: usize, i: usize) -> f64 {
        match &self.omega {
            Exposure::PerItem(v) => v[i],
            Exposure::PerPair(v) => v[u * self.num_items + i],
        }
    }

    pub fn click_prob(&self, u: usize, i: usize) -> f64 {
        self.omega(u, i) * self.rho(u, i)
    }

    /// Pairs with `rho >= threshold`.
    pub fn relevance_set(&self, threshold: f64) -> Interactions {
        let rows = (0..self.num_users)
            .map(|u| {
                (0..self.num_items as u32)
                    .filter(|&i| self.rho(u, i as usize) >= threshold)
                    .collect()
            })
            .collect();
        Interactions::from_rows(self.num_users, self.num_items, rows).expect("in-range rows")
    }

    /// Switches to per-pair exposure `omega_i ^ s_u` with a user
    /// sensitivity `s_u` drawn from `U(0.5, 1.5)`.
    pub fn with_user_sensitivity(mut self, seed: u64) -> Self {
        let Exposure::PerItem(per_item) = &self.omega else {
            return self;
        };
        let mut rng = rng_for(seed, Stream::Synth);
        let mut values = Vec::with_capacity(self.num_users * self.num_items);
        for _ in 0..self.num_users {
            let s: f64 = rng.random_range(0.5..1.5);
            values.extend(per_item.iter().map(|w| w.powf(s)));
        }
        self.omega = Exposure::PerPair(values);
        self
    }
}

/// Relevance `sigmoid(scale * A B^T / sqrt(k) + bias)` with standard-normal
/// `A` (`m x k`) and `B` (`n x k`); exposure `rank_i ^ -exponent` over a
/// random popularity ranking, so the most popular item has exposure 1.
pub fn generate_ground_truth(
    num_users: usize,
    num_items: usize,
    latent_rank: usize,
    popularity_exponent: f64,
    seed: u64,
) -> Result<SynthGroundTruth> {
    if num_users < 2 || num_items < 2 {
        return Err(Error::Config(format!(
            "synthetic data needs at least 2 users and 2 items, got {num_users}x{num_items}"
        )));
    }
    if latent_rank == 0 {
        return Err(Error::Config("latent_rank must be positive".into()));
    }
    if !(popularity_exponent >= 0.0 && popularity_exponent.is_finite()) {
        return Err(Error::Config(format!(
            "popularity exponent must be a non-negative number, got {popularity_exponent}"
        )));
    }
    let mut rng = rng_for(seed, Stream::Synth);
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let a = draw(num_users * latent_rank);
    let b = draw(num_items * latent_rank);
    let norm = (latent_rank as f64).sqrt();
    let mut rho = Vec::with_capacity(num_users * num_items);
    for u in 0..num_users {
        let au = &a[u * latent_rank..(u + 1) * latent_rank];
        for i in 0..num_items {
            let bi = &b[i * latent_rank..(i + 1) * latent_rank];
            let dot: f64 = au.iter().zip(bi).map(|(x, y)| x * y).sum();
            rho.push(sigmoid(RELEVANCE_SCALE * dot / norm + RELEVANCE_BIAS));
        }
    }
    let mut ranks: Vec<usize> = (1..=num_items).collect();
    ranks.shuffle(&mut rng);
    let omega = ranks
        .iter()
        .map(|&r| (r as f64).powf(-popularity_exponent))
        .collect();
    Ok(SynthGroundTruth {
        num_users,
        num_items,
        latent_rank,
        seed,
        rho,
        omega: Exposure::PerItem(omega),
    })
}

/// One independent Bernoulli draw per pair with probability
/// `omega * rho`.
pub fn sample_clicks(gt: &SynthGroundTruth, seed: u64) -> Interactions {
    let mut rng = rng_for(seed, Stream::Clicks);
    let rows = (0..gt.num_users)
        .map(|u| {
            (0..gt.num_items)
                .filter(|&i| rng.random::<f64>() < gt.click_prob(u, i))
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    Interactions::from_rows(gt.num_users, gt.num_items, rows).expect("in-range rows")
}

pub const CLICKS_FILE: &str = "clicks.tsv";
pub const RELEVANCE_FILE: &str = "relevance.tsv";
pub const RHO_FILE: &str = "rho.tsv";
pub const OMEGA_FILE: &str = "omega.tsv";

/// Writes clicks and thresholded relevance as `user\titem\t1` triplets,
/// `rho` as `user\titem\trho` for every pair, and exposure as
/// `user\titem\tomega` (per pair) or `item\tomega` (per item).
pub fn write_ground_truth(dir: &Path, gt: &SynthGroundTruth, clicks: &Interactions, threshold: f64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_interactions(&dir.join(CLICKS_FILE), clicks)?;
    write_interactions(&dir.join(RELEVANCE_FILE), &gt.relevance_set(threshold))?;
    let mut rho = String::new();
    for u in 0..gt.num_users {
        for i in 0..gt.num_items {
            let _ = writeln!(rho, "{u}\t{i}\t{:?}", gt.rho(u, i));
        }
    }
    let path = dir.join(RHO_FILE);
    fs::write(&path, rho).map_err(|e| Error::io(&path, e))?;
    let mut omega = String::new();
    match &gt.omega {
        Exposure::PerItem(v) => {
            for (i, w) in v.iter().enumerate() {
                let _ = writeln!(omega, "{i}\t{w:?}");
            }
        }
        Exposure::PerPair(_) => {
            for u in 0..gt.num_users {
                for i in 0..gt.num_items {
                    let _ = writeln!(omega, "{u}\t{i}\t{:?}", gt.omega(u, i));
                }
            }
        }
    }
    let path = dir.join(OMEGA_FILE);
    fs::write(&path, omega).map_err(|e| Error::io(&path, e))
}
