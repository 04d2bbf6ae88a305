//! Scoring models and their losses: user- and item-based autoencoders,
//! sigmoid matrix factorization, and the averaged two-autoencoder
//! predictor.

mod autoencoder;
mod checkpoint;
pub mod loss;
mod mf;

pub use autoencoder::{AeGrads, AeParams, RowBatch};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{biased_loss, bu_loss, ideal_loss, sipw_loss};
pub use mf::{MfCell, MfGrads, MfParams};

use rayon::prelude::*;

use crate::data::Interactions;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Which side of the click matrix an autoencoder reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Input is a user's row over all items.
    User,
    /// Input is an item's column over all users.
    Item,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::User => "user",
            Orientation::Item => "item",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(Orientation::User),
            "item" => Ok(Orientation::Item),
            other => Err(Error::Config(format!("unknown orientation `{other}`"))),
        }
    }

    /// The training rows for this orientation.
    pub fn rows(self, train: &Interactions) -> Interactions {
        match self {
            Orientation::User => train.clone(),
            Orientation::Item => train.transpose(),
        }
    }
}

/// Components of one loss evaluation. `total = sipw + lambda * bu + l2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub sipw: f64,
    pub bu: f64,
    pub l2: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(sipw: f64, bu: f64, l2: f64, lambda: f64) -> Self {
        Self {
            sipw,
            bu,
            l2,
            lambda,
            total: sipw + lambda * bu + l2,
        }
    }

    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.sipw += other.sipw;
        self.bu += other.bu;
        self.l2 += other.l2;
        self.lambda = other.lambda;
        self.total += other.total;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            sipw: self.sipw * s,
            bu: self.bu * s,
            l2: self.l2 * s,
            lambda: self.lambda,
            total: self.total * s,
        }
    }
}

/// Dense user-major prediction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub num_users: usize,
    pub num_items: usize,
    pub values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_rows(num_items: usize, rows: Vec<Vec<f64>>) -> Self {
        let num_users = rows.len();
        let values = rows.into_iter().flatten().collect::<Vec<_>>();
        debug_assert_eq!(values.len(), num_users * num_items);
        Self {
            num_users,
            num_items,
            values,
        }
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.values[u * self.num_items..(u + 1) * self.num_items]
    }

    pub fn get(&self, u: usize, i: usize) -> f64 {
        self.values[u * self.num_items + i]
    }

    /// Values at the positives of `rows`, which may be user-major
    /// (`transposed = false`) or item-major.
    pub fn gather(&self, rows: &Interactions, transposed: bool) -> Vec<Vec<f64>> {
        (0..rows.num_users())
            .map(|r| {
                rows.row(r)
                    .iter()
                    .map(|&c| {
                        if transposed {
                            self.get(c as usize, r)
                        } else {
                            self.get(r, c as usize)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Elementwise mean of the two autoencoders' predictions.
pub fn predict_final(pred_uae: &ScoreMatrix, pred_iae: &ScoreMatrix) -> Result<ScoreMatrix> {
    if (pred_uae.num_users, pred_uae.num_items) != (pred_iae.num_users, pred_iae.num_items) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            pred_uae.num_users, pred_uae.num_items, pred_iae.num_users, pred_iae.num_items
        )));
    }
    Ok(ScoreMatrix {
        num_users: pred_uae.num_users,
        num_items: pred_uae.num_items,
        values: pred_uae
            .values
            .iter()
            .zip(&pred_iae.values)
            .map(|(a, b)| (a + b) / 2.0)
            .collect(),
    })
}

/// Full prediction matrix of an autoencoder given the training clicks as
/// input.
pub fn predict_ae(params: &AeParams, train: &Interactions) -> Result<ScoreMatrix> {
    let (m, n) = (train.num_users(), train.num_items());
    match params.orientation {
        Orientation::User => {
            if params.input_dim != n {
                return Err(Error::Dimension(format!(
                    "user autoencoder expects {} items, data has {n}",
                    params.input_dim
                )));
            }
            let rows: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|u| params.forward_active(train.row(u)))
                .collect();
            Ok(ScoreMatrix::from_rows(n, rows))
        }
        Orientation::Item => {
            if params.input_dim != m {
                return Err(Error::Dimension(format!(
                    "item autoencoder expects {} users, data has {m}",
                    params.input_dim
                )));
            }
            let t = train.transpose();
            let cols: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| params.forward_active(t.row(i)))
                .collect();
            let mut values = vec![0.0; m * n];
            for (i, col) in cols.iter().enumerate() {
                for (u, &v) in col.iter().enumerate() {
                    values[u * n + i] = v;
                }
            }
            Ok(ScoreMatrix {
                num_users: m,
                num_items: n,
                values,
            })
        }
    }
}

pub fn predict_mf(params: &MfParams) -> ScoreMatrix {
    let rows: Vec<Vec<f64>> = (0..params.num_users)
        .into_par_iter()
        .map(|u| params.score_row(u))
        .collect();
    ScoreMatrix::from_rows(params.num_items, rows)
}

/// A trained scorer.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mf(MfParams),
    Ae(AeParams),
    /// User- and item-based autoencoders whose predictions are averaged.
    Bilateral { uae: AeParams, iae: AeParams },
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mf(_) => "mf",
            Model::Ae(p) => match p.orientation {
                Orientation::User => "uae",
                Orientation::Item => "iae",
            },
            Model::Bilateral { .. } => "biser",
        }
    }

    /// Shape the model was trained on, as (users, items).
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Model::Mf(p) => (p.num_users, p.num_items),
            Model::Ae(p) => ae_dims(p, None),
            Model::Bilateral { uae, iae } => ae_dims(uae, Some(iae)),
        }
    }

    pub fn predict(&self, train: &Interactions) -> Result<ScoreMatrix> {
        let (m, n) = self.dims();
        let users_ok = m == 0 || m == train.num_users();
        let items_ok = n == 0 || n == train.num_items();
        if !(users_ok && items_ok) {
            return Err(Error::Dimension(format!(
                "model was trained on {m}x{n}, data is {}x{}",
                train.num_users(),
                train.num_items()
            )));
        }
        match self {
            Model::Mf(p) => Ok(predict_mf(p)),
            Model::Ae(p) => predict_ae(p, train),
            Model::Bilateral { uae, iae } => {
                predict_final(&predict_ae(uae, train)?, &predict_ae(iae, train)?)
            }
        }
    }
}

/// (users, items) implied by autoencoder widths; a lone autoencoder only
/// fixes one side, reported as 0 for the other.
fn ae_dims(a: &AeParams, b: Option<&AeParams>) -> (usize, usize) {
    let mut users = 0;
    let mut items = 0;
    for p in std::iter::once(a).chain(b) {
        match p.orientation {
            Orientation::User => items = p.input_dim,
            Orientation::Item => users = p.input_dim,
        }
    }
    (users, items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(values: Vec<f64>, n: usize) -> ScoreMatrix {
        ScoreMatrix {
            num_users: values.len() / n,
            num_items: n,
            values,
        }
    }

    #[test]
    fn averaging() {
        let a = sm(vec![0.6, 0.2], 2);
        let b = sm(vec![0.8, 0.2], 2);
        let f = predict_final(&a, &b).unwrap();
        assert!((f.values[0] - 0.7).abs() < 1e-15);
        assert_eq!(f.values[1], 0.2);
        assert_eq!(predict_final(&a, &a).unwrap(), a);
        assert_eq!(predict_final(&a, &b).unwrap(), predict_final(&b, &a).unwrap());
        assert!(predict_final(&a, &sm(vec![0.1; 4], 4)).is_err());
    }

    #[test]
    fn item_autoencoder_fills_columns() {
        let train = Interactions::from_pairs(3, 2, [(0, 0), (2, 1)]).unwrap();
        let mut iae = AeParams::zeros(Orientation::Item, 3, 2);
        iae.decoder_bias = vec![0.0, 1.0, 2.0];
        let s = predict_ae(&iae, &train).unwrap();
        assert_eq!((s.num_users, s.num_items), (3, 2));
        assert_eq!(s.get(2, 0), sigmoid(2.0));
        assert_eq!(s.get(1, 1), sigmoid(1.0));
        let uae = AeParams::zeros(Orientation::User, 3, 2);
        assert!(predict_ae(&uae, &train).is_err());
    }

    #[test]
    fn gather_both_orientations() {
        let train = Interactions::from_pairs(2, 3, [(0, 2), (1, 0), (1, 2)]).unwrap();
        let s = sm(vec![0.0, 0.1, 0.2, 1.0, 1.1, 1.2], 3);
        assert_eq!(s.gather(&train, false), vec![vec![0.2], vec![1.0, 1.2]]);
        assert_eq!(
            s.gather(&train.transpose(), true),
            vec![vec![1.0], vec![], vec![0.2, 1.2]]
        );
    }
}
