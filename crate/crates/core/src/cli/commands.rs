use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::{DataFormat, ExperimentManifest};
use crate::data::{
    binarize, compact_ids, filter_core, item_popularity, load_dense_ascii, load_triplets,
    make_mar_split, read_split, split_holdout, write_split, DatasetSplit, ExplicitRatings, Rating,
    SplitManifest,
};
use crate::error::{Error, Result};
use crate::eval::{
    aoa_evaluate, item_precision_at, metrics_csv, paired_t_test, per_user_csv,
    popularity_groups, popularity_prediction_correlation, rank_test, unbiased_evaluate,
    MetricReport, Scheme, METRIC_CSV_HEADER,
};
use crate::models::{read_checkpoint, write_checkpoint, Model};
use crate::propensity::eval_propensity;
use crate::synth::{generate_ground_truth, sample_clicks, write_ground_truth};
use crate::training::{grid_search, train, Grid};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| Error::Config(format!("`{key}` is required for this data format")))
}

fn load_explicit_triplets(m: &ExperimentManifest) -> Result<ExplicitRatings> {
    let d = &m.data;
    let triplets = load_triplets(require(&d.path, "data.path")?, &d.sep)?;
    match (d.num_users, d.num_items) {
        (Some(nu), Some(ni)) => {
            let mut entries = Vec::with_capacity(triplets.len());
            for t in &triplets {
                if t.user >= nu as u64 || t.item >= ni as u64 {
                    return Err(Error::Data(format!(
                        "triplet ({}, {}) outside the declared {nu}x{ni}",
                        t.user, t.item
                    )));
                }
                entries.push(Rating {
                    user: t.user as u32,
                    item: t.item as u32,
                    value: t.rating,
                });
            }
            Ok(ExplicitRatings {
                num_users: nu,
                num_items: ni,
                entries,
            })
        }
        (None, None) => Ok(compact_ids(&triplets).0),
        _ => Err(Error::Config(
            "set both data.num_users and data.num_items, or neither".into(),
        )),
    }
}

/// Builds the split described by the manifest and writes it under
/// `<output>/split`.
pub fn cmd_prepare(m: &ExperimentManifest) -> Result<DatasetSplit> {
    let d = &m.data;
    let mut manifest = SplitManifest::new();
    let split = match d.format {
        DataFormat::Coat => {
            let (nu, ni) = d
                .num_users
                .zip(d.num_items)
                .ok_or_else(|| Error::Config("coat format needs data.num_users and data.num_items".into()))?;
            let train_raw = load_dense_ascii(require(&d.train, "data.train")?, nu, ni)?;
            let test_raw = load_dense_ascii(require(&d.test, "data.test")?, nu, ni)?;
            let train = binarize(&train_raw.to_explicit(), d.rating_threshold);
            log::info!(
                "train: {} users, {} items, {} positives of {} ratings, sparsity {:.3}",
                nu,
                ni,
                train.nnz(),
                train_raw.to_explicit().entries.len(),
                train.sparsity()
            );
            manifest.set("raw_ratings", train_raw.to_explicit().entries.len());
            manifest.set("positives", train.nnz());
            make_mar_split(&train, &test_raw.to_explicit(), d.rating_threshold, d.val_frac, m.seed)?
        }
        DataFormat::Triplets => {
            let ratings = load_explicit_triplets(m)?;
            let raw = ratings.entries.len();
            let positives = binarize(&ratings, d.rating_threshold);
            let filtered = filter_core(&positives, d.min_user_deg, d.min_item_deg)?;
            let inter = &filtered.interactions;
            log::info!(
                "{raw} ratings over {}x{}; {} positives; after filtering {} users, {} items, {} positives, sparsity {:.4}",
                ratings.num_users,
                ratings.num_items,
                positives.nnz(),
                inter.num_users(),
                inter.num_items(),
                inter.nnz(),
                inter.sparsity()
            );
            manifest.set("raw_ratings", raw);
            manifest.set("positives", positives.nnz());
            manifest.set("filtered_positives", inter.nnz());
            split_holdout(inter, d.test_frac, d.val_frac, m.seed)?
        }
    };
    manifest
        .set("num_users", split.num_users())
        .set("num_items", split.num_items())
        .set("protocol", split.protocol.as_str())
        .set("seed", m.seed)
        .set("rating_threshold", d.rating_threshold)
        .set("min_user_deg", d.min_user_deg)
        .set("min_item_deg", d.min_item_deg)
        .set("test_frac", d.test_frac)
        .set("val_frac", d.val_frac)
        .set("train_positives", split.train.nnz())
        .set("validation_positives", split.validation.nnz())
        .set("test_positives", split.test.nnz());
    write_split(&m.split_dir(), &split, &manifest)?;
    log::info!(
        "wrote split to {} (train {}, validation {}, test {})",
        m.split_dir().display(),
        split.train.nnz(),
        split.validation.nnz(),
        split.test.nnz()
    );
    Ok(split)
}

fn load_split(m: &ExperimentManifest) -> Result<DatasetSplit> {
    let dir = m.split_dir();
    if !dir.exists() {
        return Err(Error::Config(format!(
            "no prepared split at {}; run `prepare` first",
            dir.display()
        )));
    }
    Ok(read_split(&dir)?.0)
}

/// Trains the configured model and writes the checkpoint, the per-epoch
/// report and the effective configuration.
pub fn cmd_train(m: &ExperimentManifest) -> Result<Model> {
    let split = load_split(m)?;
    let out = train(&split, &m.train)?;
    log::info!(
        "trained {} for {} epochs; best epoch {} with validation ndcg@{} {:.4} ({:.1}s)",
        out.model.kind(),
        out.report.epochs.len(),
        out.report.best_epoch,
        m.train.early_stop_metric.cutoff(),
        out.report.best_metric,
        out.report.wall_time
    );
    fs::create_dir_all(&m.output).map_err(|e| Error::io(&m.output, e))?;
    write_checkpoint(&m.checkpoint_path(), &out.model)?;
    write_file(&m.output.join("train_report.csv"), &out.report.to_csv())?;
    write_file(&m.output.join("train_config.txt"), &m.train.to_text())?;
    Ok(out.model)
}

/// Scores the test split with a checkpoint and writes metric reports and
/// the requested diagnostics.
pub fn cmd_evaluate(m: &ExperimentManifest, checkpoint: Option<&Path>) -> Result<Vec<MetricReport>> {
    let split = load_split(m)?;
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| m.checkpoint_path());
    let model = read_checkpoint(&path)?;
    let scores = model.predict(&split.train)?;
    let max_n = m.eval.cutoffs.iter().copied().max().unwrap_or(1);
    let rankings = rank_test(&scores, &split, max_n);
    let stats = item_popularity(&split.train);
    let clip = m.eval.clip_min.unwrap_or(m.train.clip_min);
    let mut reports = Vec::new();
    for &scheme in &m.eval.schemes {
        let prop = match scheme {
            Scheme::Unbiased => Some(eval_propensity(&stats, m.eval.gamma, clip)?),
            Scheme::Aoa => None,
        };
        for &metric in &m.eval.metrics {
            for &n in &m.eval.cutoffs {
                let r = match &prop {
                    None => aoa_evaluate(&rankings, &split.test, metric, n),
                    Some(p) => unbiased_evaluate(&rankings, &split.test, p, metric, n, m.eval.self_normalized)?,
                };
                reports.push(r);
            }
        }
    }
    write_file(&m.output.join("metrics.csv"), &metrics_csv(&reports))?;
    if m.eval.per_user {
        for r in &reports {
            let name = format!("{}_{}_{}.csv", r.scheme.as_str(), r.metric.as_str(), r.cutoff);
            write_file(&m.output.join("per_user").join(name), &per_user_csv(r))?;
        }
    }
    if m.eval.groups {
        let groups = popularity_groups(&stats)?;
        let mut out = String::from("scheme,metric,n,group,value,stderr,num_users\n");
        for &n in &m.eval.cutoffs {
            let precision = item_precision_at(&rankings, &split.test, n);
            for g in crate::eval::Group::ALL {
                let values: Vec<f64> = groups
                    .membership
                    .iter()
                    .zip(&precision)
                    .filter(|(mg, _)| **mg == g)
                    .filter_map(|(_, p)| *p)
                    .collect();
                // an empty group has no defined precision
                let (mean, se) = if values.is_empty() {
                    (String::new(), String::new())
                } else {
                    let (mean, se) = crate::eval::mean_and_stderr(&values);
                    (format!("{mean:.6}"), format!("{se:.6}"))
                };
                let _ = writeln!(out, "aoa,item_precision,{n},{},{mean},{se},{}", g.as_str(), values.len());
            }
        }
        write_file(&m.output.join("item_precision_groups.csv"), &out)?;
        let mut sizes = String::from("group,items,interactions,max_count\n");
        for (k, g) in crate::eval::Group::ALL.iter().enumerate() {
            let max = groups
                .membership
                .iter()
                .zip(&stats.counts)
                .filter(|(mg, _)| *mg == g)
                .map(|(_, &c)| c)
                .max()
                .unwrap_or(0);
            let _ = writeln!(sizes, "{},{},{},{max}", g.as_str(), groups.size(*g), groups.masses[k]);
        }
        write_file(&m.output.join("popularity_groups.csv"), &sizes)?;
    }
    if m.eval.correlation {
        let r = popularity_prediction_correlation(&scores, &split.train)?;
        let value = r.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
        write_file(&m.output.join("popularity_correlation.csv"), &format!("model,pearson\n{},{value}\n", model.kind()))?;
        let items = split.train.transpose();
        let mut out = String::from("item,popularity,mean_prediction\n");
        for i in 0..items.num_users() {
            let users = items.row(i);
            if users.is_empty() {
                continue;
            }
            let mean = users.iter().map(|&u| scores.get(u as usize, i)).sum::<f64>() / users.len() as f64;
            let _ = writeln!(out, "{i},{},{mean:.6}", users.len());
        }
        write_file(&m.output.join("item_popularity_prediction.csv"), &out)?;
    }
    for r in &reports {
        log::info!("{} {}@{}: {:.4}", r.scheme.as_str(), r.metric.as_str(), r.cutoff, r.value);
    }
    Ok(reports)
}

/// Runs the grid and writes one row per configuration plus the selected
/// configuration.
pub fn cmd_grid(m: &ExperimentManifest, jobs: usize) -> Result<Option<usize>> {
    let split = load_split(m)?;
    let grid = if m.grid.axes.is_empty() {
        Grid::default_for(m.train.model_kind)
    } else {
        m.grid.clone()
    };
    log::info!("grid search over {} configurations with {jobs} workers", grid.size());
    let result = grid_search(&split, &m.train, &grid, jobs)?;
    write_file(&m.output.join("grid.csv"), &result.to_csv())?;
    match &result.best_config {
        Some(cfg) => {
            write_file(&m.output.join("best_config.txt"), &cfg.to_text())?;
            log::info!("best row {}", result.best.unwrap_or(0));
        }
        None => log::warn!("every grid point failed"),
    }
    Ok(result.best)
}

/// Generates a synthetic dataset with its ground truth under
/// `<output>/synth`.
pub fn cmd_synth(m: &ExperimentManifest) -> Result<PathBuf> {
    let s = &m.synth;
    let mut gt = generate_ground_truth(s.num_users, s.num_items, s.latent_rank, s.popularity_exponent, m.seed)?;
    if s.per_pair {
        gt = gt.with_user_sensitivity(m.seed);
    }
    let clicks = sample_clicks(&gt, m.seed);
    let dir = m.output.join("synth");
    write_ground_truth(&dir, &gt, &clicks, s.relevance_threshold)?;
    log::info!(
        "synthetic {}x{}: {} clicks, {} relevant pairs",
        s.num_users,
        s.num_items,
        clicks.nnz(),
        gt.relevance_set(s.relevance_threshold).nnz()
    );
    Ok(dir)
}

fn read_metric_rows(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(METRIC_CSV_HEADER) {
        return Err(Error::parse(&path.display().to_string(), 1, "not a metrics file"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::parse(&path.display().to_string(), n + 2, "expected 6 columns"));
        }
        let value = cols[3]
            .parse()
            .map_err(|_| Error::parse(&path.display().to_string(), n + 2, "bad value"))?;
        rows.push((cols[..3].join(","), value));
    }
    Ok(rows)
}

fn read_per_user(path: &Path) -> Result<Vec<(u32, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(n, line)| {
            let (u, v) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(&origin, n + 2, "expected user,value"))?;
            Ok((
                u.parse().map_err(|_| Error::parse(&origin, n + 2, "bad user"))?,
                v.parse().map_err(|_| Error::parse(&origin, n + 2, "bad value"))?,
            ))
        })
        .collect()
}

/// Summarizes evaluation outputs of several runs (mean and standard error
/// of each metric across runs). With baselines, also runs a one-tailed
/// paired t-test of runs against baselines over per-user values, pairing
/// run `k` with baseline `k`.
pub fn cmd_report(runs: &[PathBuf], baselines: &[PathBuf], out: &Path) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let mut keys: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for dir in runs {
        for (key, v) in read_metric_rows(&dir.join("metrics.csv"))? {
            match keys.iter().position(|k| *k == key) {
                Some(p) => values[p].push(v),
                None => {
                    keys.push(key);
                    values.push(vec![v]);
                }
            }
        }
    }
    let mut summary = String::from("scheme,metric,n,mean,stderr,runs\n");
    for (k, vs) in keys.iter().zip(&values) {
        let (mean, se) = crate::eval::mean_and_stderr(vs);
        let _ = writeln!(summary, "{k},{mean:.6},{se:.6},{}", vs.len());
    }
    write_file(&out.join("summary.csv"), &summary)?;
    if baselines.is_empty() {
        return Ok(());
    }
    if baselines.len() != runs.len() {
        return Err(Error::Config(format!(
            "{} runs but {} baselines; they are paired in order",
            runs.len(),
            baselines.len()
        )));
    }
    let mut tt = String::from("scheme,metric,n,mean_diff,t,df,p_value\n");
    for key in &keys {
        let file = format!("{}.csv", key.replace(',', "_"));
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (run, base) in runs.iter().zip(baselines) {
            let ra = read_per_user(&run.join("per_user").join(&file))?;
            let rb = read_per_user(&base.join("per_user").join(&file))?;
            for (u, va) in &ra {
                if let Some((_, vb)) = rb.iter().find(|(ub, _)| ub == u) {
                    a.push(*va);
                    b.push(*vb);
                }
            }
        }
        if let Some(t) = paired_t_test(&a, &b) {
            let _ = writeln!(tt, "{key},{:.6},{:.6},{},{:.6}", t.mean_diff, t.t, t.df, t.p_value);
        }
    }
    write_file(&out.join("ttest.csv"), &tt)
}
