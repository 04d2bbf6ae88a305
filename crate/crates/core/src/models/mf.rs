use super::loss::{negative_term, positive_term};
use super::{sigmoid, LossBreakdown};
use crate::error::{Error, Result};

/// Matrix factorization with a sigmoid link and no bias terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    /// Row-major `num_users x dim`.
    pub user_factors: Vec<f64>,
    /// Row-major `num_items x dim`.
    pub item_factors: Vec<f64>,
}

/// One training cell. `positive_weight` is `y / omega` (0 for unclicked
/// cells).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfCell {
    pub user: u32,
    pub item: u32,
    pub positive_weight: f64,
}

/// Dense gradients plus the rows a batch touched.
#[derive(Debug, Clone, PartialEq)]
pub struct MfGrads {
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub touched_users: Vec<u32>,
    pub touched_items: Vec<u32>,
}

impl MfParams {
    pub fn zeros(num_users: usize, num_items: usize, dim: usize) -> Self {
        Self {
            num_users,
            num_items,
            dim,
            user_factors: vec![0.0; num_users * dim],
            item_factors: vec![0.0; num_items * dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_factors.len() != self.num_users * self.dim
            || self.item_factors.len() != self.num_items * self.dim
        {
            return Err(Error::Dimension(format!(
                "factor buffers {} / {} do not match {}x{} with dim {}",
                self.user_factors.len(),
                self.item_factors.len(),
                self.num_users,
                self.num_items,
                self.dim
            )));
        }
        Ok(())
    }

    pub fn user(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.dim..(i + 1) * self.dim]
    }

    fn logit(&self, u: usize, i: usize) -> f64 {
        self.user(u).iter().zip(self.item(i)).map(|(a, b)| a * b).sum()
    }

    /// `sigmoid(p_u . q_i)`
    pub fn score(&self, u: usize, i: usize) -> Result<f64> {
        if u >= self.num_users || i >= self.num_items {
            return Err(Error::Dimension(format!(
                "({u}, {i}) outside {}x{}",
                self.num_users, self.num_items
            )));
        }
        Ok(sigmoid(self.logit(u, i)))
    }

    pub fn score_row(&self, u: usize) -> Vec<f64> {
        (0..self.num_items).map(|i| sigmoid(self.logit(u, i))).collect()
    }

    /// Mean weighted cross-entropy of a mini-batch plus `l2 / 2` times the
    /// batch-averaged squared norms of the factors involved, with exact
    /// gradients.
    pub fn batch_loss_and_grads(&self, cells: &[MfCell], l2: f64) -> Result<(LossBreakdown, MfGrads)> {
        let k = self.dim;
        let mut gu = vec![0.0; self.user_factors.len()];
        let mut gi = vec![0.0; self.item_factors.len()];
        let mut seen_u = vec![false; self.num_users];
        let mut seen_i = vec![false; self.num_items];
        let mut touched_users = Vec::new();
        let mut touched_items = Vec::new();
        if cells.is_empty() {
            return Ok((
                LossBreakdown::new(0.0, 0.0, 0.0, 0.0),
                MfGrads {
                    user_factors: gu,
                    item_factors: gi,
                    touched_users,
                    touched_items,
                },
            ));
        }
        let scale = 1.0 / cells.len() as f64;
        let mut ce = 0.0;
        let mut reg = 0.0;
        for c in cells {
            let (u, i) = (c.user as usize, c.item as usize);
            if u >= self.num_users || i >= self.num_items {
                return Err(Error::Dimension(format!("cell ({u}, {i}) out of range")));
            }
            let p = sigmoid(self.logit(u, i));
            let a = c.positive_weight;
            ce += a * positive_term(p) + (1.0 - a) * negative_term(p);
            let dz = scale * (p - a);
            let (pu, qi) = (self.user(u), self.item(i));
            reg += pu.iter().chain(qi).map(|v| v * v).sum::<f64>();
            let gur = &mut gu[u * k..(u + 1) * k];
            for f in 0..k {
                gur[f] += dz * qi[f] + scale * l2 * pu[f];
            }
            let gir = &mut gi[i * k..(i + 1) * k];
            for f in 0..k {
                gir[f] += dz * pu[f] + scale * l2 * qi[f];
            }
            if !seen_u[u] {
                seen_u[u] = true;
                touched_users.push(u as u32);
            }
            if !seen_i[i] {
                seen_i[i] = true;
                touched_items.push(i as u32);
            }
        }
        for (name, g) in [("user_factors", &gu), ("item_factors", &gi)] {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { param: name });
            }
        }
        let breakdown = LossBreakdown::new(ce * scale, 0.0, 0.5 * l2 * reg * scale, 0.0);
        Ok((
            breakdown,
            MfGrads {
                user_factors: gu,
                item_factors: gi,
                touched_users,
                touched_items,
            },
        ))
    }
}
