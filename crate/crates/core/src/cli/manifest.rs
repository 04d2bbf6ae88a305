//! Experiment manifests: flat `key=value` text with `data.`, `train.`,
//! `eval.`, `grid.` and `synth.` sections plus top-level `seed` and
//! `output`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{Metric, Scheme};
use crate::training::{parse_key_values, EarlyStopMetric, Grid, TrainConfig};

pub const OUTPUT_ROOT_ENV: &str = "BISER_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Dense ascii train and MAR test matrices.
    Coat,
    /// `user<sep>item<sep>rating` lines, split by random holdout.
    Triplets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub format: DataFormat,
    /// Triplet file.
    pub path: Option<PathBuf>,
    /// Dense train and test files.
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub sep: String,
    /// Known shape. For triplets this disables id compaction and uses the
    /// ids as indices.
    pub num_users: Option<usize>,
    pub num_items: Option<usize>,
    pub rating_threshold: f64,
    pub min_user_deg: usize,
    pub min_item_deg: usize,
    pub test_frac: f64,
    pub val_frac: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            format: DataFormat::Triplets,
            path: None,
            train: None,
            test: None,
            sep: "\t".into(),
            num_users: None,
            num_items: None,
            rating_threshold: 4.0,
            min_user_deg: 0,
            min_item_deg: 0,
            test_frac: 0.2,
            val_frac: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub schemes: Vec<Scheme>,
    pub metrics: Vec<Metric>,
    pub cutoffs: Vec<usize>,
    pub gamma: f64,
    /// Defaults to the training clip.
    pub clip_min: Option<f64>,
    pub self_normalized: bool,
    pub per_user: bool,
    pub groups: bool,
    pub correlation: bool,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Aoa, Scheme::Unbiased],
            metrics: Metric::ALL.to_vec(),
            cutoffs: vec![10, 30, 50],
            gamma: 2.0,
            clip_min: None,
            self_normalized: false,
            per_user: true,
            groups: false,
            correlation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub num_users: usize,
    pub num_items: usize,
    pub latent_rank: usize,
    pub popularity_exponent: f64,
    pub relevance_threshold: f64,
    pub per_pair: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_users: 300,
            num_items: 200,
            latent_rank: 8,
            popularity_exponent: 1.0,
            relevance_threshold: 0.5,
            per_pair: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub data: DataSpec,
    pub train: TrainConfig,
    pub eval: EvalSpec,
    pub grid: Grid,
    pub synth: SynthSpec,
    pub output: PathBuf,
    pub seed: u64,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{value}` is not a valid value for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{value}` is not a boolean for `{key}`"))),
    }
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("`{key}` needs at least one value")));
    }
    items.into_iter().map(item).collect()
}

fn unescape(s: &str) -> String {
    s.replace("\\t", "\t")
}

/// Defaults for known datasets, applied before any explicit key.
fn preset(name: &str) -> Result<Vec<(&'static str, &'static str)>> {
    Ok(match name {
        "coat" => vec![
            ("data.format", "coat"),
            ("data.num_users", "290"),
            ("data.num_items", "300"),
            ("data.rating_threshold", "4"),
            ("data.val_frac", "0.3"),
            ("eval.cutoffs", "1,3,5"),
            ("train.early_stop_metric", "ndcg@3"),
        ],
        "ml-100k" => vec![
            ("data.format", "triplets"),
            ("data.sep", "\\t"),
            ("data.rating_threshold", "4"),
            ("data.min_user_deg", "9"),
            ("data.min_item_deg", "4"),
            ("data.test_frac", "0.2"),
            ("data.val_frac", "0.3"),
            ("eval.cutoffs", "10,30,50"),
            ("train.early_stop_metric", "ndcg@30"),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (expected coat or ml-100k)"
            )))
        }
    })
}

impl ExperimentManifest {
    /// Parses manifest text. Relative paths resolve against `base_dir`;
    /// `overrides` are applied after the file's own keys.
    pub fn parse(
        text: &str,
        base_dir: &Path,
        default_output: PathBuf,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut pairs = parse_key_values(text)?;
        pairs.extend(overrides.iter().cloned());
        let mut m = ExperimentManifest {
            data: DataSpec::default(),
            train: TrainConfig::default(),
            eval: EvalSpec::default(),
            grid: Grid::default(),
            synth: SynthSpec::default(),
            output: default_output,
            seed: 0,
        };
        if let Some((_, name)) = pairs.iter().rev().find(|(k, _)| k == "data.preset") {
            for (k, v) in preset(name)? {
                m.set(k, v, base_dir)?;
            }
        }
        let mut explicit_train_seed = false;
        for (k, v) in &pairs {
            explicit_train_seed |= k == "train.seed";
            m.set(k, v, base_dir)?;
        }
        if !explicit_train_seed {
            m.train.seed = m.seed;
        }
        m.train.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path, output_override: Option<PathBuf>, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        let mut m = Self::parse(&text, &base, root.join(stem), overrides)?;
        if let Some(out) = output_override {
            m.output = out;
        }
        Ok(m)
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v.trim());
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        if let Some(k) = key.strip_prefix("train.") {
            return self.train.set(k, value);
        }
        if let Some(k) = key.strip_prefix("grid.") {
            if !TrainConfig::KEYS.contains(&k) {
                return Err(Error::Config(format!("grid axis `{k}` is not a training key")));
            }
            let values = parse_list(key, value, |s| Ok(s.to_string()))?;
            self.grid.axes.retain(|(a, _)| a != k);
            self.grid.axes.push((k.to_string(), values));
            return Ok(());
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = path(value),
            "data.preset" => {}
            "data.format" => {
                self.data.format = match value.trim() {
                    "coat" => DataFormat::Coat,
                    "triplets" => DataFormat::Triplets,
                    other => return Err(Error::Config(format!("unknown data.format `{other}`"))),
                }
            }
            "data.path" => self.data.path = Some(path(value)),
            "data.train" => self.data.train = Some(path(value)),
            "data.test" => self.data.test = Some(path(value)),
            "data.sep" => self.data.sep = unescape(value.trim()),
            "data.num_users" => self.data.num_users = Some(parse(key, value)?),
            "data.num_items" => self.data.num_items = Some(parse(key, value)?),
            "data.rating_threshold" => self.data.rating_threshold = parse(key, value)?,
            "data.min_user_deg" => self.data.min_user_deg = parse(key, value)?,
            "data.min_item_deg" => self.data.min_item_deg = parse(key, value)?,
            "data.test_frac" => self.data.test_frac = parse(key, value)?,
            "data.val_frac" => self.data.val_frac = parse(key, value)?,
            "eval.schemes" => self.eval.schemes = parse_list(key, value, Scheme::parse)?,
            "eval.metrics" => self.eval.metrics = parse_list(key, value, Metric::parse)?,
            "eval.cutoffs" => {
                self.eval.cutoffs = parse_list(key, value, |s| parse::<usize>(key, s))?;
                if self.eval.cutoffs.contains(&0) {
                    return Err(Error::Config("eval.cutoffs must be positive".into()));
                }
            }
            "eval.gamma" => self.eval.gamma = parse(key, value)?,
            "eval.clip_min" => self.eval.clip_min = Some(parse(key, value)?),
            "eval.self_normalized" => self.eval.self_normalized = parse_bool(key, value)?,
            "eval.per_user" => self.eval.per_user = parse_bool(key, value)?,
            "eval.groups" => self.eval.groups = parse_bool(key, value)?,
            "eval.correlation" => self.eval.correlation = parse_bool(key, value)?,
            "synth.num_users" => self.synth.num_users = parse(key, value)?,
            "synth.num_items" => self.synth.num_items = parse(key, value)?,
            "synth.latent_rank" => self.synth.latent_rank = parse(key, value)?,
            "synth.popularity_exponent" => self.synth.popularity_exponent = parse(key, value)?,
            "synth.relevance_threshold" => self.synth.relevance_threshold = parse(key, value)?,
            "synth.per_pair" => self.synth.per_pair = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown manifest key `{other}`"))),
        }
        Ok(())
    }

    /// Early-stopping cutoff used by training.
    pub fn early_stop(&self) -> EarlyStopMetric {
        self.train.early_stop_metric
    }

    pub fn split_dir(&self) -> PathBuf {
        self.output.join("split")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output.join("model.ckpt")
    }
}

/// Splits `key=value` command-line overrides.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_text(text: &str) -> Result<ExperimentManifest> {
        ExperimentManifest::parse(text, Path::new("/base"), PathBuf::from("/out"), &[])
    }

    #[test]
    fn presets_then_explicit_keys() {
        let m = parse_text("data.preset=ml-100k\ndata.path=u.data\neval.cutoffs=5\nseed=3\n").unwrap();
        assert_eq!(m.data.min_user_deg, 9);
        assert_eq!(m.data.sep, "\t");
        assert_eq!(m.data.path, Some(PathBuf::from("/base/u.data")));
        assert_eq!(m.eval.cutoffs, vec![5]);
        assert_eq!(m.train.seed, 3);
        assert_eq!(m.train.early_stop_metric, EarlyStopMetric::NdcgAt30);
        let c = parse_text("data.preset=coat").unwrap();
        assert_eq!(c.data.format, DataFormat::Coat);
        assert_eq!(c.eval.cutoffs, vec![1, 3, 5]);
    }

    #[test]
    fn grid_and_errors() {
        let m = parse_text("grid.lambda_u=0.1,0.5,0.9\ngrid.lambda_i=0.1, 0.5, 0.9\n").unwrap();
        assert_eq!(m.grid.size(), 9);
        assert!(parse_text("grid.lambda_u=").is_err());
        assert!(parse_text("grid.depth=1,2").is_err());
        assert!(parse_text("data.colour=red").is_err());
        assert!(parse_text("train.learning_rate=-1").is_err());
        assert!(parse_text("eval.cutoffs=0,3").is_err());
    }

    #[test]
    fn overrides_win() {
        let m = ExperimentManifest::parse(
            "seed=1\ntrain.seed=5\n",
            Path::new("."),
            PathBuf::from("o"),
            &[("train.seed".into(), "9".into())],
        )
        .unwrap();
        assert_eq!(m.train.seed, 9);
    }
}
