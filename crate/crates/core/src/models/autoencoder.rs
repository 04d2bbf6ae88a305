//! Shallow autoencoder over one row of the click matrix (a user's items or
//! an item's users) with sigmoid hidden and output layers.

use super::loss::{negative_term, positive_term};
use super::{sigmoid, LossBreakdown, Orientation};
use crate::error::{Error, Result};

/// Autoencoder parameters. Weight matrices are row-major:
/// `encoder_weights[j * hidden_dim + k]` connects input `j` to hidden `k`,
/// `decoder_weights[k * input_dim + j]` connects hidden `k` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AeParams {
    pub orientation: Orientation,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub encoder_weights: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    pub decoder_weights: Vec<f64>,
    pub decoder_bias: Vec<f64>,
}

/// Gradient buffers with the same layout as [`AeParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AeGrads {
    pub encoder_weights: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    pub decoder_weights: Vec<f64>,
    pub decoder_bias: Vec<f64>,
}

/// One training row: its positives, their propensities and (optionally)
/// the partner model's detached predictions on those positives.
#[derive(Debug, Clone, Copy)]
pub struct RowBatch<'a> {
    /// Sorted positive columns of the row.
    pub active: &'a [u32],
    /// Propensity of each positive.
    pub omega: &'a [f64],
    /// Partner predictions on each positive; `None` disables the
    /// agreement term.
    pub pseudo_labels: Option<&'a [f64]>,
    pub lambda: f64,
    pub l2: f64,
    /// Weight of each cell's weighted cross-entropy.
    pub sipw_scale: f64,
    /// Weight of each positive's squared gap.
    pub bu_scale: f64,
}

impl<'a> RowBatch<'a> {
    /// Row weights under which summing row losses over one pass of all
    /// `num_rows` rows gives the full-data objective: the weighted
    /// cross-entropy averaged over every cell and the agreement term
    /// averaged over the `num_positives` observed pairs.
    pub fn scales(input_dim: usize, num_rows: usize, num_positives: usize) -> (f64, f64) {
        let sipw = 1.0 / input_dim as f64;
        let bu = if num_positives == 0 {
            0.0
        } else {
            num_rows as f64 / num_positives as f64
        };
        (sipw, bu)
    }
}

impl AeParams {
    pub fn zeros(orientation: Orientation, input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            orientation,
            input_dim,
            hidden_dim,
            encoder_weights: vec![0.0; input_dim * hidden_dim],
            encoder_bias: vec![0.0; hidden_dim],
            decoder_weights: vec![0.0; hidden_dim * input_dim],
            decoder_bias: vec![0.0; input_dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.input_dim, self.hidden_dim);
        let shapes = [
            ("encoder_weights", self.encoder_weights.len(), n * d),
            ("encoder_bias", self.encoder_bias.len(), d),
            ("decoder_weights", self.decoder_weights.len(), d * n),
            ("decoder_bias", self.decoder_bias.len(), n),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Dimension(format!("{name} has {got} entries, expected {want}")));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("encoder_weights", &self.encoder_weights),
            ("encoder_bias", &self.encoder_bias),
            ("decoder_weights", &self.decoder_weights),
            ("decoder_bias", &self.decoder_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 4] {
        [
            ("encoder_weights", &mut self.encoder_weights),
            ("encoder_bias", &mut self.encoder_bias),
            ("decoder_weights", &mut self.decoder_weights),
            ("decoder_bias", &mut self.decoder_bias),
        ]
    }

    fn decode(&self, hidden: &[f64]) -> Vec<f64> {
        let n = self.input_dim;
        let mut z = self.decoder_bias.clone();
        for (k, &h) in hidden.iter().enumerate() {
            let w = &self.decoder_weights[k * n..(k + 1) * n];
            for (zj, wj) in z.iter_mut().zip(w) {
                *zj += h * wj;
            }
        }
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        z
    }

    fn encode_active(&self, active: &[u32]) -> Vec<f64> {
        let d = self.hidden_dim;
        let mut a = self.encoder_bias.clone();
        for &j in active {
            let w = &self.encoder_weights[j as usize * d..(j as usize + 1) * d];
            for (ak, wk) in a.iter_mut().zip(w) {
                *ak += wk;
            }
        }
        a.iter_mut().for_each(|v| *v = sigmoid(*v));
        a
    }

    /// Reconstruction probabilities for a dense input row.
    pub fn forward(&self, input_row: &[f64]) -> Result<Vec<f64>> {
        if input_row.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "input row has {} entries, model expects {}",
                input_row.len(),
                self.input_dim
            )));
        }
        let d = self.hidden_dim;
        let mut a = self.encoder_bias.clone();
        for (j, &x) in input_row.iter().enumerate() {
            if x != 0.0 {
                let w = &self.encoder_weights[j * d..(j + 1) * d];
                for (ak, wk) in a.iter_mut().zip(w) {
                    *ak += x * wk;
                }
            }
        }
        a.iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(self.decode(&a))
    }

    /// Forward pass for a binary row given by its positive columns.
    pub fn forward_active(&self, active: &[u32]) -> Vec<f64> {
        self.decode(&self.encode_active(active))
    }

    /// Loss of one row and its exact gradient.
    ///
    /// Every column of the row contributes its propensity-weighted
    /// cross-entropy; positives additionally contribute `lambda` times the
    /// squared gap to the partner's prediction, which is held constant.
    /// The L2 term is `l2 / 2` times the squared norm of both weight
    /// matrices.
    pub fn combined_loss_and_grads(&self, batch: &RowBatch<'_>) -> Result<(LossBreakdown, AeGrads)> {
        let (n, d) = (self.input_dim, self.hidden_dim);
        if batch.omega.len() != batch.active.len() {
            return Err(Error::Dimension(format!(
                "{} propensities for {} positives",
                batch.omega.len(),
                batch.active.len()
            )));
        }
        if let Some(p) = batch.pseudo_labels {
            if p.len() != batch.active.len() {
                return Err(Error::Dimension(format!(
                    "{} pseudo-labels for {} positives",
                    p.len(),
                    batch.active.len()
                )));
            }
        }
        if let Some(&j) = batch.active.last() {
            if j as usize >= n {
                return Err(Error::Dimension(format!("column {j} outside input width {n}")));
            }
        }

        let hidden = self.encode_active(batch.active);
        let out = self.decode(&hidden);

        // dL/dz at the output pre-activation
        let mut gz = vec![0.0; n];
        let mut sipw = 0.0;
        for (j, &p) in out.iter().enumerate() {
            sipw += negative_term(p);
            gz[j] = batch.sipw_scale * p;
        }
        let mut bu = 0.0;
        for (idx, &j) in batch.active.iter().enumerate() {
            let j = j as usize;
            let p = out[j];
            let w = 1.0 / batch.omega[idx];
            sipw += w * (positive_term(p) - negative_term(p));
            gz[j] -= batch.sipw_scale * w;
            if let Some(labels) = batch.pseudo_labels {
                let diff = p - labels[idx];
                bu += diff * diff;
                gz[j] += batch.lambda * batch.bu_scale * 2.0 * diff * p * (1.0 - p);
            }
        }
        let sipw = sipw * batch.sipw_scale;
        let bu = bu * batch.bu_scale;

        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let l2_term = 0.5 * batch.l2 * (sq(&self.encoder_weights) + sq(&self.decoder_weights));

        let mut dec_w: Vec<f64> = self.decoder_weights.iter().map(|w| batch.l2 * w).collect();
        let mut gh = vec![0.0; d];
        for k in 0..d {
            let row = &mut dec_w[k * n..(k + 1) * n];
            let w = &self.decoder_weights[k * n..(k + 1) * n];
            let h = hidden[k];
            let mut acc = 0.0;
            for j in 0..n {
                row[j] += h * gz[j];
                acc += w[j] * gz[j];
            }
            gh[k] = acc;
        }
        let ga: Vec<f64> = gh
            .iter()
            .zip(&hidden)
            .map(|(g, h)| g * h * (1.0 - h))
            .collect();
        let mut enc_w: Vec<f64> = self.encoder_weights.iter().map(|w| batch.l2 * w).collect();
        for &j in batch.active {
            let row = &mut enc_w[j as usize * d..(j as usize + 1) * d];
            for (r, g) in row.iter_mut().zip(&ga) {
                *r += g;
            }
        }

        let grads = AeGrads {
            encoder_weights: enc_w,
            encoder_bias: ga,
            decoder_weights: dec_w,
            decoder_bias: gz,
        };
        grads.check_finite()?;
        let breakdown = LossBreakdown::new(sipw, bu, l2_term, batch.lambda);
        if !breakdown.total.is_finite() {
            return Err(Error::Divergence {
                epoch: 0,
                detail: "row loss is not finite".into(),
            });
        }
        Ok((breakdown, grads))
    }
}

impl AeGrads {
    pub fn tensors(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("encoder_weights", &self.encoder_weights),
            ("encoder_bias", &self.encoder_bias),
            ("decoder_weights", &self.decoder_weights),
            ("decoder_bias", &self.decoder_bias),
        ]
    }

    fn check_finite(&self) -> Result<()> {
        for (name, t) in self.tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { param: name });
            }
        }
        Ok(())
    }
}
