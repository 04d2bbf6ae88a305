//! Training loops for the single-model baselines and the bilateral model.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::config::{ModelKind, TrainConfig, Weighting};
use super::optim::{adagrad_rows, adagrad_step, xavier_fill, OptimizerState};
use crate::data::{item_popularity, DatasetSplit, Interactions};
use crate::error::{Error, Result};
use crate::eval::validation_ndcg;
use crate::models::{
    predict_ae, predict_final, predict_mf, AeParams, LossBreakdown, MfCell, MfParams, Model,
    Orientation, RowBatch, ScoreMatrix,
};
use crate::propensity::{popularity_propensity, self_propensity, PropensityTable, PropensityValues};
use crate::rng::{rng_for, Rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
    /// Epochs spent on the unweighted pretraining phase, if any.
    pub pretrain_epochs: usize,
    pub wall_time: f64,
}

pub const REPORT_CSV_HEADER: &str = "epoch,sipw_loss,bu_loss,l2,total,val_metric";

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_CSV_HEADER}\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.loss.sipw, r.loss.bu, r.loss.l2, r.loss.total, r.val_metric
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub report: TrainReport,
}

fn divergence_at(epoch: usize, best_epoch: usize) -> impl Fn(Error) -> Error {
    move |e| {
        let detail = match e {
            Error::NonFiniteGradient { param } => format!("non-finite gradient in `{param}`"),
            Error::Divergence { detail, .. } => detail,
            other => return other,
        };
        Error::Divergence {
            epoch,
            detail: format!("{detail}; last stable epoch {best_epoch}"),
        }
    }
}

/// One autoencoder plus its optimizer state and row order.
#[derive(Debug, Clone)]
pub(crate) struct AeLearner {
    pub(crate) params: AeParams,
    state: OptimizerState,
    rows: Interactions,
    shuffle: Rng,
}

impl AeLearner {
    pub(crate) fn new(orientation: Orientation, train: &Interactions, cfg: &TrainConfig) -> Result<Self> {
        let rows = orientation.rows(train);
        let (n, d) = (rows.num_items(), cfg.hidden_dim);
        let (init, shuffle) = match orientation {
            Orientation::User => (Stream::UserInit, Stream::UserShuffle),
            Orientation::Item => (Stream::ItemInit, Stream::ItemShuffle),
        };
        let mut rng = rng_for(cfg.seed, init);
        let mut params = AeParams::zeros(orientation, n, d);
        params.encoder_weights = xavier_fill((n, d), cfg.xavier, &mut rng)?;
        params.decoder_weights = xavier_fill((d, n), cfg.xavier, &mut rng)?;
        let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        Ok(Self {
            params,
            state: OptimizerState::new(&sizes, cfg.adagrad_init_accum, cfg.adagrad_epsilon),
            rows,
            shuffle: rng_for(cfg.seed, shuffle),
        })
    }

    fn orientation(&self) -> Orientation {
        self.params.orientation
    }

    pub(crate) fn predict(&self, train: &Interactions) -> Result<ScoreMatrix> {
        predict_ae(&self.params, train)
    }

    /// `scores` restricted to this learner's positives, row-aligned.
    pub(crate) fn on_positives(&self, scores: &ScoreMatrix) -> Vec<Vec<f64>> {
        scores.gather(&self.rows, self.orientation() == Orientation::Item)
    }

    /// One pass over every row in shuffled order.
    pub(crate) fn epoch(
        &mut self,
        omega: &PropensityTable,
        pseudo: Option<&[Vec<f64>]>,
        lambda: f64,
        cfg: &TrainConfig,
    ) -> Result<LossBreakdown> {
        let num_rows = self.rows.num_users();
        let (sipw_scale, bu_scale) =
            RowBatch::scales(self.params.input_dim, num_rows, self.rows.nnz());
        let items_are_columns = self.orientation() == Orientation::User;
        let mut order: Vec<usize> = (0..num_rows).collect();
        order.shuffle(&mut self.shuffle);
        let mut acc = LossBreakdown::default();
        for r in order {
            let weights = omega.positive_weights(&self.rows, r, items_are_columns);
            let batch = RowBatch {
                active: self.rows.row(r),
                omega: &weights,
                pseudo_labels: pseudo.map(|p| p[r].as_slice()),
                lambda,
                l2: cfg.l2,
                sipw_scale,
                bu_scale,
            };
            let (loss, grads) = self.params.combined_loss_and_grads(&batch)?;
            acc.accumulate(&loss);
            let eps = self.state.epsilon;
            for (((name, p), (_, g)), a) in self
                .params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(self.state.accumulators.iter_mut())
            {
                adagrad_step(p, g, a, cfg.learning_rate, eps, name)?;
            }
        }
        let l2 = if num_rows > 0 { acc.l2 / num_rows as f64 } else { 0.0 };
        Ok(LossBreakdown::new(acc.sipw, acc.bu, l2, lambda))
    }
}

/// Matrix factorization with its optimizer state and batch order.
#[derive(Debug, Clone)]
pub(crate) struct MfLearner {
    pub(crate) params: MfParams,
    state: OptimizerState,
    shuffle: Rng,
}

impl MfLearner {
    pub(crate) fn new(train: &Interactions, cfg: &TrainConfig) -> Result<Self> {
        let (m, n, k) = (train.num_users(), train.num_items(), cfg.hidden_dim);
        let mut rng = rng_for(cfg.seed, Stream::Init);
        let mut params = MfParams::zeros(m, n, k);
        params.user_factors = xavier_fill((m, k), cfg.xavier, &mut rng)?;
        params.item_factors = xavier_fill((n, k), cfg.xavier, &mut rng)?;
        Ok(Self {
            state: OptimizerState::new(&[m * k, n * k], cfg.adagrad_init_accum, cfg.adagrad_epsilon),
            params,
            shuffle: rng_for(cfg.seed, Stream::Shuffle),
        })
    }

    /// One pass over all user-item cells in shuffled mini-batches.
    pub(crate) fn epoch(
        &mut self,
        train: &Interactions,
        omega: &PropensityTable,
        cfg: &TrainConfig,
    ) -> Result<LossBreakdown> {
        let (m, n) = (train.num_users(), train.num_items());
        let weights: Vec<Vec<f64>> = (0..m).map(|u| omega.positive_weights(train, u, true)).collect();
        let mut cells: Vec<u64> = (0..(m * n) as u64).collect();
        cells.shuffle(&mut self.shuffle);
        let mut acc = LossBreakdown::default();
        let mut batches = 0usize;
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for chunk in cells.chunks(cfg.batch_size) {
            batch.clear();
            for &c in chunk {
                let (u, i) = ((c / n as u64) as u32, (c % n as u64) as u32);
                let positive_weight = match train.position(u as usize, i) {
                    Some(pos) => 1.0 / weights[u as usize][pos],
                    None => 0.0,
                };
                batch.push(MfCell { user: u, item: i, positive_weight });
            }
            let (loss, grads) = self.params.batch_loss_and_grads(&batch, cfg.l2)?;
            acc.accumulate(&loss);
            batches += 1;
            let k = self.params.dim;
            let (lr, eps) = (cfg.learning_rate, self.state.epsilon);
            let [au, ai] = &mut self.state.accumulators[..] else {
                unreachable!("two factor tensors")
            };
            adagrad_rows(&mut self.params.user_factors, &grads.user_factors, au, &grads.touched_users, k, lr, eps, "user_factors")?;
            adagrad_rows(&mut self.params.item_factors, &grads.item_factors, ai, &grads.touched_items, k, lr, eps, "item_factors")?;
        }
        Ok(acc.scaled(1.0 / batches.max(1) as f64))
    }
}

/// Early-stopping bookkeeping shared by every loop.
struct Monitor {
    patience: usize,
    best_metric: f64,
    best_epoch: usize,
    since_best: usize,
    records: Vec<EpochRecord>,
}

impl Monitor {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best_metric: f64::NEG_INFINITY,
            best_epoch: 0,
            since_best: 0,
            records: Vec::new(),
        }
    }

    /// Records an epoch; returns whether it is the new best.
    fn observe(&mut self, epoch: usize, loss: LossBreakdown, val_metric: f64) -> bool {
        self.records.push(EpochRecord { epoch, loss, val_metric });
        if val_metric > self.best_metric {
            self.best_metric = val_metric;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    fn finish(self, stopped_early: bool, pretrain_epochs: usize, started: Instant) -> TrainReport {
        TrainReport {
            epochs: self.records,
            best_epoch: self.best_epoch,
            best_metric: if self.best_epoch == 0 { 0.0 } else { self.best_metric },
            stopped_early,
            pretrain_epochs,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }
}

fn check_metric(value: f64, epoch: usize, best_epoch: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence {
            epoch,
            detail: format!("validation metric is {value}; last stable epoch {best_epoch}"),
        })
    }
}

/// How the propensity table of a single model is obtained each epoch.
enum Weights {
    Fixed(PropensityTable),
    SelfRefreshed { clip_min: f64 },
}

fn fixed_weights(split: &DatasetSplit, cfg: &TrainConfig) -> Result<Weights> {
    Ok(match cfg.weighting {
        Weighting::None => Weights::Fixed(PropensityTable::ones(split.num_items())),
        Weighting::RelIpw => Weights::Fixed(popularity_propensity(
            &item_popularity(&split.train),
            cfg.eta,
            cfg.clip_min,
        )?),
        Weighting::Sipw => Weights::SelfRefreshed { clip_min: cfg.clip_min },
        Weighting::PreSipw => unreachable!("resolved by the pretraining phase"),
    })
}

/// Trains MF, UAE or IAE with the configured weighting.
pub fn train_single(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.model_kind == ModelKind::Biser {
        return Err(Error::Config("train_single does not train the bilateral model".into()));
    }
    run_single(split, cfg)
}

/// Trains MF, UAE or IAE with an externally supplied per-item propensity
/// table in place of `cfg.weighting`, e.g. the true exposure of a
/// synthetic dataset.
pub fn train_with_propensity(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    omega: PropensityTable,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    match omega.values {
        PropensityValues::PerItem(ref v) if v.len() == split.num_items() => {
            if let Some(bad) = v.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
                return Err(Error::Config(format!("propensity {bad} is outside (0, 1]")));
            }
        }
        PropensityValues::PerItem(ref v) => {
            return Err(Error::Dimension(format!(
                "propensity table has {} items, split has {}",
                v.len(),
                split.num_items()
            )))
        }
        PropensityValues::PerPair(_) => {
            return Err(Error::Config("an external propensity table must be per item".into()))
        }
    }
    let started = Instant::now();
    let weights = Weights::Fixed(omega);
    match cfg.model_kind {
        ModelKind::Mf => train_mf_loop(split, cfg, weights, 0, started),
        ModelKind::Uae => train_ae_loop(split, cfg, Orientation::User, weights, 0, started),
        ModelKind::Iae => train_ae_loop(split, cfg, Orientation::Item, weights, 0, started),
        ModelKind::Biser => Err(Error::Config(
            "an external propensity table is only supported for mf, uae and iae".into(),
        )),
    }
}

pub(crate) fn run_single(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let started = Instant::now();
    let (weights, pretrain_epochs) = if cfg.weighting == Weighting::PreSipw {
        let phase1 = TrainConfig {
            weighting: Weighting::None,
            ..cfg.clone()
        };
        let pre = run_single(split, &phase1)?;
        let scores = pre.model.predict(&split.train)?;
        let table = match cfg.model_kind {
            ModelKind::Iae => self_propensity(scores.gather(&split.train.transpose(), true), cfg.clip_min)?,
            _ => self_propensity(scores.gather(&split.train, false), cfg.clip_min)?,
        };
        log::info!(
            "pretraining finished after {} epochs (best {})",
            pre.report.epochs.len(),
            pre.report.best_epoch
        );
        (Weights::Fixed(table), pre.report.epochs.len())
    } else {
        (fixed_weights(split, cfg)?, 0)
    };
    match cfg.model_kind {
        ModelKind::Mf => train_mf_loop(split, cfg, weights, pretrain_epochs, started),
        ModelKind::Uae => train_ae_loop(split, cfg, Orientation::User, weights, pretrain_epochs, started),
        ModelKind::Iae => train_ae_loop(split, cfg, Orientation::Item, weights, pretrain_epochs, started),
        ModelKind::Biser => unreachable!("checked by callers"),
    }
}

fn train_ae_loop(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    orientation: Orientation,
    weights: Weights,
    pretrain_epochs: usize,
    started: Instant,
) -> Result<TrainOutcome> {
    let train = &split.train;
    let cutoff = cfg.early_stop_metric.cutoff();
    let mut learner = AeLearner::new(orientation, train, cfg)?;
    let mut best = learner.params.clone();
    let mut monitor = Monitor::new(cfg.patience);
    let mut scores = learner.predict(train)?;
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let fail = divergence_at(epoch, monitor.best_epoch);
        let refreshed;
        let omega = match &weights {
            Weights::Fixed(t) => t,
            Weights::SelfRefreshed { clip_min } => {
                refreshed = self_propensity(learner.on_positives(&scores), *clip_min).map_err(&fail)?;
                &refreshed
            }
        };
        let loss = learner.epoch(omega, None, 0.0, cfg).map_err(&fail)?;
        scores = learner.predict(train)?;
        let metric = check_metric(validation_ndcg(&scores, split, cutoff), epoch, monitor.best_epoch)?;
        log::debug!("{} epoch {epoch}: loss {:.6} val ndcg@{cutoff} {metric:.6}", orientation.as_str(), loss.total);
        if monitor.observe(epoch, loss, metric) {
            best = learner.params.clone();
        }
        if monitor.should_stop() {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    Ok(TrainOutcome {
        model: Model::Ae(best),
        report: monitor.finish(stopped_early, pretrain_epochs, started),
    })
}

fn train_mf_loop(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    weights: Weights,
    pretrain_epochs: usize,
    started: Instant,
) -> Result<TrainOutcome> {
    let train = &split.train;
    let cutoff = cfg.early_stop_metric.cutoff();
    let mut learner = MfLearner::new(train, cfg)?;
    let mut best = learner.params.clone();
    let mut monitor = Monitor::new(cfg.patience);
    let mut scores = predict_mf(&learner.params);
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let fail = divergence_at(epoch, monitor.best_epoch);
        let refreshed;
        let omega = match &weights {
            Weights::Fixed(t) => t,
            Weights::SelfRefreshed { clip_min } => {
                refreshed = self_propensity(scores.gather(train, false), *clip_min).map_err(&fail)?;
                &refreshed
            }
        };
        let loss = learner.epoch(train, omega, cfg).map_err(&fail)?;
        scores = predict_mf(&learner.params);
        let metric = check_metric(validation_ndcg(&scores, split, cutoff), epoch, monitor.best_epoch)?;
        log::debug!("mf epoch {epoch}: loss {:.6} val ndcg@{cutoff} {metric:.6}", loss.total);
        if monitor.observe(epoch, loss, metric) {
            best = learner.params.clone();
        }
        if monitor.should_stop() {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    Ok(TrainOutcome {
        model: Model::Mf(best),
        report: monitor.finish(stopped_early, pretrain_epochs, started),
    })
}

/// Per-model propensities for one bilateral epoch.
fn bilateral_weights(
    cfg: &TrainConfig,
    fixed: &Option<PropensityTable>,
    learner: &AeLearner,
    scores: &ScoreMatrix,
) -> Result<PropensityTable> {
    match fixed {
        Some(t) => Ok(t.clone()),
        None => self_propensity(learner.on_positives(scores), cfg.clip_min),
    }
}

/// Trains the user- and item-based autoencoders jointly. Each epoch both
/// models are snapshotted, each derives its propensities from its own
/// snapshot and its agreement targets from the partner's snapshot, and
/// then both take a full pass over their rows. Early stopping watches the
/// averaged prediction.
pub fn train_biser(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.model_kind != ModelKind::Biser {
        return Err(Error::Config(format!(
            "train_biser called with model_kind={}",
            cfg.model_kind.as_str()
        )));
    }
    run_biser(split, cfg)
}

pub(crate) fn run_biser(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let started = Instant::now();
    let train = &split.train;
    let cutoff = cfg.early_stop_metric.cutoff();
    let fixed = match cfg.weighting {
        Weighting::Sipw => None,
        Weighting::None => Some(PropensityTable::ones(split.num_items())),
        Weighting::RelIpw => Some(popularity_propensity(&item_popularity(train), cfg.eta, cfg.clip_min)?),
        Weighting::PreSipw => {
            return Err(Error::Config("pre_sipw is not available for the bilateral model".into()))
        }
    };
    let mut uae = AeLearner::new(Orientation::User, train, cfg)?;
    let mut iae = AeLearner::new(Orientation::Item, train, cfg)?;
    let mut best = (uae.params.clone(), iae.params.clone());
    let mut monitor = Monitor::new(cfg.patience);
    let mut pu = uae.predict(train)?;
    let mut pi = iae.predict(train)?;
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let fail = divergence_at(epoch, monitor.best_epoch);
        let omega_u = bilateral_weights(cfg, &fixed, &uae, &pu).map_err(&fail)?;
        let omega_i = bilateral_weights(cfg, &fixed, &iae, &pi).map_err(&fail)?;
        let targets_u = uae.on_positives(&pi);
        let targets_i = iae.on_positives(&pu);
        let (lu, li) = rayon::join(
            || uae.epoch(&omega_u, Some(&targets_u), cfg.lambda_u, cfg),
            || iae.epoch(&omega_i, Some(&targets_i), cfg.lambda_i, cfg),
        );
        let (lu, li) = (lu.map_err(&fail)?, li.map_err(&fail)?);
        pu = uae.predict(train)?;
        pi = iae.predict(train)?;
        let averaged = predict_final(&pu, &pi)?;
        let metric = check_metric(validation_ndcg(&averaged, split, cutoff), epoch, monitor.best_epoch)?;
        let loss = LossBreakdown {
            sipw: lu.sipw + li.sipw,
            bu: lu.bu + li.bu,
            l2: lu.l2 + li.l2,
            lambda: 0.0,
            total: lu.total + li.total,
        };
        log::debug!("biser epoch {epoch}: loss {:.6} val ndcg@{cutoff} {metric:.6}", loss.total);
        if monitor.observe(epoch, loss, metric) {
            best = (uae.params.clone(), iae.params.clone());
        }
        if monitor.should_stop() {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    Ok(TrainOutcome {
        model: Model::Bilateral {
            uae: best.0,
            iae: best.1,
        },
        report: monitor.finish(stopped_early, 0, started),
    })
}

/// Dispatches on `cfg.model_kind`.
pub fn train(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    match cfg.model_kind {
        ModelKind::Biser => train_biser(split, cfg),
        _ => train_single(split, cfg),
    }
}
