//! Run configuration: defaults, the flat `key=value` config file and the
//! command-line flags, which share one set of keys.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use histograde::data::AugmentConfig;
use histograde::TrainConfig;

use crate::error::CliError;

/// Keys accepted in config files, in the order [`RunConfig::to_config_string`]
/// writes them.
pub const CONFIG_KEYS: [&str; 13] = [
    "data",
    "holdout",
    "weights",
    "head",
    "metrics",
    "epochs",
    "batch-size",
    "val-split",
    "zoom",
    "threshold",
    "lr",
    "seed-shuffle",
    "seed-augment",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub holdout: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    /// Head file written by `train` and read by `evaluate` and `predict`.
    pub head: PathBuf,
    pub metrics: PathBuf,
    pub train: TrainConfig,
    pub val_split: f64,
    pub zoom: f64,
    pub seed_shuffle: u64,
    pub seed_augment: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            holdout: None,
            weights: None,
            head: PathBuf::from("head.bcnw"),
            metrics: PathBuf::from("metrics.csv"),
            train: TrainConfig::default(),
            val_split: 0.25,
            zoom: AugmentConfig::default().zoom_range,
            seed_shuffle: 0,
            seed_augment: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "holdout" => self.holdout = Some(PathBuf::from(value)),
            "weights" => self.weights = Some(PathBuf::from(value)),
            "head" => self.head = PathBuf::from(value),
            "metrics" => self.metrics = PathBuf::from(value),
            "epochs" => self.train.max_epochs = parse(key, value)?,
            "batch-size" => self.train.batch_size = parse(key, value)?,
            "val-split" => self.val_split = parse(key, value)?,
            "zoom" => self.zoom = parse(key, value)?,
            "threshold" => self.train.early_stop_val_accuracy = parse(key, value)?,
            "lr" => self.train.lr = parse(key, value)?,
            "seed-shuffle" => self.seed_shuffle = parse(key, value)?,
            "seed-augment" => self.seed_augment = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file's `key=value` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {}: expected key=value", n + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        self.apply_str(&text)
    }

    /// Every set key as config-file text; `apply_str` of the result
    /// reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            if let Some(value) = self.get(key) {
                writeln!(out, "{key}={value}").unwrap();
            }
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Path| p.display().to_string();
        Some(match key {
            "data" => path(self.data.as_deref()?),
            "holdout" => path(self.holdout.as_deref()?),
            "weights" => path(self.weights.as_deref()?),
            "head" => path(&self.head),
            "metrics" => path(&self.metrics),
            "epochs" => self.train.max_epochs.to_string(),
            "batch-size" => self.train.batch_size.to_string(),
            "val-split" => self.val_split.to_string(),
            "zoom" => self.zoom.to_string(),
            "threshold" => self.train.early_stop_val_accuracy.to_string(),
            "lr" => self.train.lr.to_string(),
            "seed-shuffle" => self.seed_shuffle.to_string(),
            "seed-augment" => self.seed_augment.to_string(),
            _ => return None,
        })
    }

    /// Training config with the shuffle seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            rng_seed: self.seed_shuffle,
            ..self.train
        }
    }

    pub fn augment(&self) -> AugmentConfig {
        AugmentConfig {
            zoom_range: self.zoom,
            rng_seed: self.seed_augment,
        }
    }

    /// Range checks on the numeric settings.
    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.val_split) {
            return Err(CliError::Config(format!(
                "val-split {} must be in [0, 1)",
                self.val_split
            )));
        }
        if !(0.0..1.0).contains(&self.zoom) {
            return Err(CliError::Config(format!(
                "zoom {} must be in [0, 1)",
                self.zoom
            )));
        }
        Ok(())
    }
}

/// Flags shared by the dataset and model commands. Each mirrors a config key.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file of key=value lines; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dataset root, one directory per class.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Evaluation root with the same layout as --data.
    #[arg(long, value_name = "DIR")]
    pub holdout: Option<PathBuf>,
    /// Backbone weights (BCNW).
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    /// Head weights to write (train) or read (evaluate, predict).
    #[arg(long, value_name = "FILE")]
    pub head: Option<PathBuf>,
    /// Per-epoch metrics CSV written by train.
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of each class held out for validation.
    #[arg(long)]
    pub val_split: Option<f64>,
    /// Zoom range; factors are drawn from [1 - zoom, 1 + zoom].
    #[arg(long)]
    pub zoom: Option<f64>,
    /// Validation accuracy that stops training.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed_shuffle: Option<u64>,
    #[arg(long)]
    pub seed_augment: Option<u64>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        fn num<T: ToString>(v: Option<T>) -> Option<String> {
            v.map(|v| v.to_string())
        }
        [
            ("data", path(&self.data)),
            ("holdout", path(&self.holdout)),
            ("weights", path(&self.weights)),
            ("head", path(&self.head)),
            ("metrics", path(&self.metrics)),
            ("epochs", num(self.epochs)),
            ("batch-size", num(self.batch_size)),
            ("val-split", num(self.val_split)),
            ("zoom", num(self.zoom)),
            ("threshold", num(self.threshold)),
            ("lr", num(self.lr)),
            ("seed-shuffle", num(self.seed_shuffle)),
            ("seed-augment", num(self.seed_augment)),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides() {
            cfg.set(key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_training_run() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train.max_epochs, 50);
        assert_eq!(cfg.train.batch_size, 52);
        assert_eq!(cfg.val_split, 0.25);
        assert_eq!(cfg.zoom, 0.2);
        assert_eq!(cfg.train.early_stop_val_accuracy, 0.88);
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# run\nepochs = 7\nzoom=0.1\n\nseed-shuffle=3\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            epochs: Some(9),
            ..RunArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.train.max_epochs, 9);
        assert_eq!(cfg.zoom, 0.1);
        assert_eq!(cfg.seed_shuffle, 3);
        assert_eq!(cfg.train_config().rng_seed, 3);
    }

    #[test]
    fn config_string_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_str("data=/d\nweights=/w.bcnw\nlr=0.0005\nthreshold=0.9\nseed-augment=11")
            .unwrap();
        let mut back = RunConfig::default();
        back.apply_str(&cfg.to_config_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_lines_are_config_errors() {
        let mut cfg = RunConfig::default();
        for text in ["colour=red", "epochs", "epochs=many", "zoom=x"] {
            let err = cfg.apply_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }

    #[test]
    fn out_of_range_values_rejected() {
        for (key, value) in [("val-split", "1.0"), ("zoom", "-0.1"), ("batch-size", "0")] {
            let mut cfg = RunConfig::default();
            cfg.set(key, value).unwrap();
            assert!(cfg.validate().is_err(), "{key}={value}");
        }
    }
}
