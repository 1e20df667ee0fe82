//! Plain-text `key = value` experiment configuration.
//!
//! Recognized keys:
//!
//! | key | meaning |
//! |---|---|
//! | `data_dir`, `summary_dir` | corpus location (EDF files and `*-summary.txt`) |
//! | `cache` | segment cache written by `segment` (alternative to `data_dir`) |
//! | `channels` / `channels_file` | comma-separated labels / one label per line |
//! | `segment_seconds`, `decimation`, `zscore` | segmentation and preprocessing |
//! | `repetitions`, `split`, `seed` | protocol (`split = 70,15,15`) |
//! | `model`, `depth`, `hidden_sizes`, `fc1_hidden` | architecture (`indrnn`, `lstm`, `cnn`) |
//! | `learning_rate`, `batch_size`, `epochs`, `optimizer`, `recurrent_clip`, `shuffle`, `epoch_selection` | training |
//! | `lengths`, `depths` | sweep axes |
//! | `learning_rate@V`, `epochs@V`, `batch_size@V` | per sweep point overrides (V is a length or depth) |
//!
//! Lines starting with `#` and blank lines are ignored. Paths are relative to
//! the configuration file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::default_channels;
use crate::error::{Error, Result};
use crate::experiments::{AxisOverride, ExperimentConfig, DEFAULT_SWEEP_DEPTHS, DEFAULT_SWEEP_LENGTHS};
use crate::model::{CnnConfig, LstmConfig, ModelConfig, ModelSpec};
use crate::training::{EpochSelection, OptimizerKind, TrainConfig};

const KEYS: [&str; 24] = [
    "data_dir",
    "summary_dir",
    "cache",
    "channels",
    "channels_file",
    "segment_seconds",
    "decimation",
    "zscore",
    "repetitions",
    "split",
    "seed",
    "model",
    "depth",
    "hidden_sizes",
    "fc1_hidden",
    "learning_rate",
    "batch_size",
    "epochs",
    "optimizer",
    "recurrent_clip",
    "shuffle",
    "epoch_selection",
    "lengths",
    "depths",
];

const OVERRIDABLE: [&str; 3] = ["learning_rate", "epochs", "batch_size"];

/// Ordered key/value settings; later insertions replace earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

fn check_key(key: &str) -> Result<()> {
    let ok = match key.split_once('@') {
        Some((k, v)) => OVERRIDABLE.contains(&k) && v.parse::<f64>().is_ok(),
        None => KEYS.contains(&key),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("unknown configuration key `{key}`")))
    }
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            check_key(k).map_err(|e| Error::config(format!("line {}: {e}", i + 1)))?;
            if s.values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::config(format!("line {}: `{k}` set twice", i + 1)));
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::parse(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    /// Applies a `key=value` override (from the command line).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("`{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(format!("`{key}`: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse()
                            .map_err(|_| Error::config(format!("`{key}`: cannot parse {x:?}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(Error::config(format!("`{key}`: expected true/false, got {v:?}"))),
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| match &self.base_dir {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        })
    }

    pub fn channels(&self) -> Result<Vec<String>> {
        if let Some(list) = self.get("channels") {
            return Ok(list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
        }
        if let Some(p) = self.path("channels_file") {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            return Ok(text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect());
        }
        Ok(default_channels())
    }

    pub fn model_kind(&self) -> Result<&str> {
        match self.get("model").unwrap_or("indrnn") {
            k @ ("indrnn" | "lstm" | "cnn") => Ok(k),
            other => Err(Error::config(format!("unknown model `{other}` (indrnn, lstm, cnn)"))),
        }
    }

    /// The effective experiment configuration: per-model defaults, then
    /// every explicitly set key.
    pub fn experiment(&self, input_channels: usize) -> Result<ExperimentConfig> {
        let kind = self.model_kind()?;
        let mut train = TrainConfig::default();
        let model = match kind {
            "indrnn" => {
                let depth = self.parsed::<usize>("depth")?.unwrap_or(15);
                let mut m = ModelConfig::with_depth(depth);
                if let Some(h) = self.list("hidden_sizes")? {
                    m.block_hidden_sizes = h;
                }
                if let Some(v) = self.parsed("fc1_hidden")? {
                    m.fc1_hidden = v;
                }
                m.input_channels = input_channels;
                ModelSpec::IndRnn(m)
            }
            "lstm" => {
                train.learning_rate = 7e-4;
                train.epochs = 30;
                train.optimizer = OptimizerKind::RmsProp;
                ModelSpec::Lstm(LstmConfig {
                    input_channels,
                    ..LstmConfig::default()
                })
            }
            _ => {
                train.learning_rate = 1e-3;
                train.epochs = 50;
                ModelSpec::Cnn(CnnConfig {
                    input_channels,
                    ..CnnConfig::default()
                })
            }
        };
        if let Some(v) = self.parsed("learning_rate")? {
            train.learning_rate = v;
        }
        if let Some(v) = self.parsed("batch_size")? {
            train.batch_size = v;
        }
        if let Some(v) = self.parsed("epochs")? {
            train.epochs = v;
        }
        if let Some(v) = self.parsed("recurrent_clip")? {
            train.recurrent_clip = v;
        }
        if let Some(v) = self.flag("shuffle")? {
            train.shuffle = v;
        }
        if let Some(v) = self.get("optimizer") {
            train.optimizer = match v {
                "adam" => OptimizerKind::Adam,
                "rmsprop" => OptimizerKind::RmsProp,
                _ => return Err(Error::config(format!("unknown optimizer `{v}`"))),
            };
        }
        if let Some(v) = self.get("epoch_selection") {
            train.epoch_selection = match v {
                "best" | "best_validation_accuracy" => EpochSelection::BestValidationAccuracy,
                "last" => EpochSelection::Last,
                _ => return Err(Error::config(format!("unknown epoch_selection `{v}`"))),
            };
        }
        let mut model = model;
        if let ModelSpec::IndRnn(m) = &mut model {
            m.recurrent_clip = train.recurrent_clip;
        }
        let mut cfg = ExperimentConfig {
            model,
            train,
            ..ExperimentConfig::default()
        };
        if let Some(v) = self.parsed("segment_seconds")? {
            cfg.segment_seconds = v;
        }
        if let Some(v) = self.parsed("repetitions")? {
            cfg.repetitions = v;
        }
        if let Some(v) = self.parsed("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = self.parsed("decimation")? {
            cfg.decimation = v;
        }
        if let Some(v) = self.flag("zscore")? {
            cfg.zscore = v;
        }
        if let Some(v) = self.list::<usize>("split")? {
            cfg.split = v
                .try_into()
                .map_err(|_| Error::config("`split` needs three comma-separated parts"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lengths(&self) -> Result<Vec<f64>> {
        Ok(self.list("lengths")?.unwrap_or_else(|| DEFAULT_SWEEP_LENGTHS.to_vec()))
    }

    pub fn depths(&self) -> Result<Vec<usize>> {
        Ok(self.list("depths")?.unwrap_or_else(|| DEFAULT_SWEEP_DEPTHS.to_vec()))
    }

    /// Collects every `key@value` override, ordered by sweep value.
    pub fn overrides(&self) -> Result<Vec<(f64, AxisOverride)>> {
        let mut by_value: BTreeMap<String, (f64, AxisOverride)> = BTreeMap::new();
        for (k, v) in &self.values {
            let Some((key, at)) = k.split_once('@') else {
                continue;
            };
            let point: f64 = at.parse().map_err(|_| Error::config(format!("bad override point in `{k}`")))?;
            let entry = by_value.entry(format!("{point:020.6}")).or_insert((point, AxisOverride::default()));
            let bad = || Error::config(format!("`{k}`: cannot parse {v:?}"));
            match key {
                "learning_rate" => entry.1.learning_rate = Some(v.parse().map_err(|_| bad())?),
                "epochs" => entry.1.epochs = Some(v.parse().map_err(|_| bad())?),
                "batch_size" => entry.1.batch_size = Some(v.parse().map_err(|_| bad())?),
                _ => unreachable!("checked on insert"),
            }
        }
        Ok(by_value.into_values().collect())
    }
}
