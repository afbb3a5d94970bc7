//! Experiment configuration files.
//!
//! ```text
//! dataset = house1.csv            # or: synthetic = house.synth
//! appliances = kettle, fridge     # default: every appliance channel
//! split.train_start = 2024-01-01
//! split.train_end = 2024-01-26
//! split.val_end = 2024-02-02
//! split.test_end = 2024-02-09
//! mode = automl                   # or: single
//! family = seq2point              # single mode
//! params.window_size = 50         # single mode hyperparameters
//! space.model = co, fhmm, seq2point
//! space.seq2point.optimizer = adam
//! max_evals = 30
//! epochs = 20
//! output = out
//! ```
//!
//! Relative paths resolve against the config file's directory. Unknown
//! keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nilm_core::dataset::parse_date;
use nilm_core::{Family, SplitSpec};
use nilm_hpo::{Algorithm, TpeConfig, Value};

use crate::families::TrainingSettings;
use crate::kv;
use crate::synth::SyntheticHouseSpec;
use crate::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticHouseSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Automl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Target appliances; empty means every appliance channel.
    pub appliances: Vec<String>,
    pub sample_period_s: i64,
    pub split: SplitSpec,
    pub mode: Mode,
    pub family: Option<Family>,
    /// Single-mode hyperparameters, unprefixed (`window_size`, `k`, ...).
    pub params: BTreeMap<String, Value>,
    pub max_evals: usize,
    pub algorithm: Algorithm,
    /// `(space key, allowed values)`; one value fixes the parameter.
    pub space: Vec<(String, Vec<Value>)>,
    pub training: TrainingSettings,
    pub threshold_watts: f64,
    pub thresholds: BTreeMap<String, f64>,
    pub seed: u64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// A config over `data` with every optional field at its default.
    pub fn new(data: DataSource, split: SplitSpec, mode: Mode, output: PathBuf) -> Self {
        Self {
            data,
            appliances: Vec::new(),
            sample_period_s: 60,
            split,
            mode,
            family: None,
            params: BTreeMap::new(),
            max_evals: 30,
            algorithm: Algorithm::Tpe(TpeConfig::default()),
            space: Vec::new(),
            training: TrainingSettings::default(),
            threshold_watts: 10.0,
            thresholds: BTreeMap::new(),
            seed: 0,
            output,
        }
    }

    pub fn threshold_for(&self, label: &str) -> f64 {
        self.thresholds.get(label).copied().unwrap_or(self.threshold_watts)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RunnerError::Config(m.to_string()));
        if self.max_evals < 1 {
            return bad("max_evals must be >= 1");
        }
        if self.sample_period_s <= 0 {
            return bad("sample_period_s must be positive");
        }
        if self.mode == Mode::Single && self.family.is_none() {
            return bad("mode = single requires `family`");
        }
        if self.mode == Mode::Automl && (self.family.is_some() || !self.params.is_empty()) {
            return bad("`family` and `params.*` are single-mode keys; use `space.*` in automl mode");
        }
        if !(self.threshold_watts >= 0.0) || self.thresholds.values().any(|t| !(*t >= 0.0)) {
            return bad("thresholds must be >= 0");
        }
        if let Algorithm::Tpe(t) = &self.algorithm {
            t.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        }
        self.training.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(RunnerError::io(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = kv::parse(text)?;
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let cfg_err = |e: nilm_core::Error| RunnerError::Config(e.to_string());

        let data = match (map.remove("dataset"), map.remove("synthetic")) {
            (Some(p), None) => DataSource::Csv(resolve(p)),
            (None, Some(p)) => {
                let path = resolve(p);
                let text = std::fs::read_to_string(&path).map_err(RunnerError::io(&path))?;
                DataSource::Synthetic(SyntheticHouseSpec::parse(&text)?)
            }
            (None, None) => {
                // Inline `synth.*` keys.
                let inline: BTreeMap<String, String> = map
                    .iter()
                    .filter_map(|(k, v)| k.strip_prefix("synth.").map(|s| (s.to_string(), v.clone())))
                    .collect();
                if inline.is_empty() {
                    return Err(RunnerError::Config("one of `dataset` or `synthetic` is required".into()));
                }
                map.retain(|k, _| !k.starts_with("synth."));
                DataSource::Synthetic(SyntheticHouseSpec::from_map(inline)?)
            }
            (Some(_), Some(_)) => {
                return Err(RunnerError::Config("`dataset` and `synthetic` are mutually exclusive".into()))
            }
        };

        let mut split_key = |k: &str| -> Result<i64> {
            let key = format!("split.{k}");
            let v = map
                .remove(&key)
                .ok_or_else(|| RunnerError::Config(format!("missing `{key}`")))?;
            parse_date(&v).map_err(cfg_err)
        };
        let split = SplitSpec::new(
            split_key("train_start")?,
            split_key("train_end")?,
            split_key("val_end")?,
            split_key("test_end")?,
        )
        .map_err(cfg_err)?;

        let mode = match map.remove("mode").as_deref() {
            Some("single") => Mode::Single,
            Some("automl") => Mode::Automl,
            Some(other) => return Err(RunnerError::Config(format!("unknown mode `{other}`"))),
            None => return Err(RunnerError::Config("missing `mode`".into())),
        };
        let output = resolve(map.remove("output").unwrap_or_else(|| "out".into()));
        let mut cfg = Self::new(data, split, mode, output);

        if let Some(list) = map.remove("appliances") {
            cfg.appliances = kv::parse_list(&list);
        }
        cfg.sample_period_s = kv::take(&mut map, "sample_period_s", 60)?;
        cfg.family = match map.remove("family") {
            Some(f) => Some(f.parse().map_err(|e: nilm_core::model::UnknownFamily| RunnerError::Config(e.to_string()))?),
            None => None,
        };
        cfg.max_evals = kv::take(&mut map, "max_evals", 30)?;
        cfg.seed = kv::take(&mut map, "seed", 0)?;
        cfg.threshold_watts = kv::take(&mut map, "threshold", 10.0)?;
        cfg.training = TrainingSettings {
            epochs: kv::take(&mut map, "epochs", cfg.training.epochs)?,
            hidden: kv::take(&mut map, "hidden", cfg.training.hidden)?,
            batch_size: kv::take(&mut map, "batch_size", cfg.training.batch_size)?,
            train_stride: kv::take(&mut map, "train_stride", cfg.training.train_stride)?,
        };

        let defaults = TpeConfig::default();
        let tpe = TpeConfig {
            gamma: kv::take(&mut map, "tpe.gamma", defaults.gamma)?,
            n_startup: kv::take(&mut map, "tpe.n_startup", defaults.n_startup)?,
            n_candidates: kv::take(&mut map, "tpe.n_candidates", defaults.n_candidates)?,
            prior_weight: kv::take(&mut map, "tpe.prior_weight", defaults.prior_weight)?,
            bandwidth_clip: defaults.bandwidth_clip,
        };
        cfg.algorithm = match map.remove("algorithm").as_deref() {
            None | Some("tpe") => Algorithm::Tpe(tpe),
            Some("random") => Algorithm::Random,
            Some(other) => return Err(RunnerError::Config(format!("unknown algorithm `{other}`"))),
        };

        let rest: Vec<(String, String)> = std::mem::take(&mut map).into_iter().collect();
        for (k, v) in rest {
            if let Some(name) = k.strip_prefix("params.") {
                cfg.params.insert(name.to_string(), kv::parse_value(&v));
            } else if let Some(key) = k.strip_prefix("space.") {
                cfg.space.push((key.to_string(), kv::parse_list(&v).iter().map(|s| kv::parse_value(s)).collect()));
            } else if let Some(label) = k.strip_prefix("threshold.") {
                let t = v
                    .parse()
                    .map_err(|_| RunnerError::Config(format!("`{k}` = `{v}` is not a number")))?;
                cfg.thresholds.insert(label.to_string(), t);
            } else {
                map.insert(k, v);
            }
        }
        kv::reject_unknown(&map)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPLIT: &str = "split.train_start = 0\nsplit.train_end = 100\nsplit.val_end = 200\nsplit.test_end = 300\n";

    fn parse(extra: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&format!("dataset = d.csv\n{SPLIT}{extra}"), Path::new("/cfg"))
    }

    #[test]
    fn minimal_single_config_gets_defaults() {
        let c = parse("mode = single\nfamily = co\nappliances = kettle\n").unwrap();
        assert_eq!(c.sample_period_s, 60);
        assert_eq!(c.training.epochs, 20);
        assert_eq!(c.max_evals, 30);
        assert_eq!(c.family, Some(Family::Co));
        assert_eq!(c.data, DataSource::Csv(PathBuf::from("/cfg/d.csv")));
    }

    #[test]
    fn zero_evals_rejected() {
        assert!(parse("mode = automl\nmax_evals = 0\n").unwrap_err().to_string().contains("max_evals"));
    }

    #[test]
    fn misspelled_key_named() {
        let e = parse("mode = automl\nmax_eval = 3\n").unwrap_err();
        assert!(e.to_string().contains("`max_eval`"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn space_and_params() {
        let c = parse("mode = automl\nspace.model = co, fhmm\nthreshold.kettle = 50\nalgorithm = random\n").unwrap();
        assert_eq!(c.space, vec![("model".into(), vec![Value::from("co"), Value::from("fhmm")])]);
        assert_eq!(c.threshold_for("kettle"), 50.0);
        assert_eq!(c.threshold_for("fridge"), 10.0);
        assert_eq!(c.algorithm, Algorithm::Random);
        let s = parse("mode = single\nfamily = seq2point\nparams.window_size = 20\n").unwrap();
        assert_eq!(s.params["window_size"], Value::Int(20));
        assert!(parse("mode = single\nfamily = svm\n").is_err());
        assert!(parse("mode = single\n").is_err());
    }
}
