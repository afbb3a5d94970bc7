//! Maps a family name plus flat hyperparameters onto the fitting entry
//! point of its crate.
//!
//! | family | hyperparameters (default) |
//! |---|---|
//! | dt | `criterion` (squared_error), `min_samples_split` (2), `max_depth` (20) |
//! | rf | as dt, plus `n_estimators` (10) |
//! | fcnn, dae | `num_layers` (5), `dropout` (0.2) |
//! | rnn_gru, lstm | `sequence_length` (50), `dropout` (0.2) |
//! | window_gru, seq2point, seq2seq | `window_size` (50), `dropout` (0.2) |
//! | every neural family | `optimizer` (adam), `learning_rate` (1e-3), `loss` (mse) |
//! | fhmm, co | `k` (2) |
//!
//! Tree models read `DEFAULT_LAG` lagged aggregate samples.

use std::collections::BTreeMap;

use nilm_classic::{CoModel, FhmmModel};
use nilm_core::{AlignedDataset, Disaggregator, Family};
use nilm_hpo::Value;
use nilm_neural::{NetworkSpec, NeuralDisaggregator};
use nilm_nn::{LossKind, OptimizerKind};
use nilm_trees::{CartParams, Criterion, ForestParams, TreeDisaggregator, DEFAULT_LAG};

use crate::{Result, RunnerError};

/// Neural training knobs that are not searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingSettings {
    pub epochs: usize,
    pub hidden: usize,
    pub batch_size: usize,
    /// Train on every n-th window.
    pub train_stride: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            epochs: 20,
            hidden: 64,
            batch_size: 64,
            train_stride: 1,
        }
    }
}

impl TrainingSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.hidden < 1 || self.batch_size < 1 || self.train_stride < 1 {
            return Err(RunnerError::Config(
                "epochs, hidden, batch_size and train_stride must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// The hyperparameters a default single run of `family` uses.
pub fn default_params(family: Family) -> BTreeMap<String, Value> {
    let mut p = BTreeMap::new();
    let mut set = |k: &str, v: Value| {
        p.insert(k.to_string(), v);
    };
    match family {
        Family::Dt | Family::Rf => {
            let c = CartParams::default();
            set("criterion", Value::from("squared_error"));
            set("min_samples_split", Value::Int(c.min_samples_split as i64));
            set("max_depth", Value::Int(c.max_depth.unwrap_or(0) as i64));
            if family == Family::Rf {
                set("n_estimators", Value::Int(ForestParams::default().n_estimators as i64));
            }
        }
        Family::Fhmm | Family::Co => set("k", Value::Int(2)),
        f => {
            let s = NetworkSpec::new(f);
            set("optimizer", Value::from("adam"));
            set("learning_rate", Value::Float(s.learning_rate));
            set("loss", Value::from("mse"));
            set("dropout", Value::Float(s.dropout));
            match f {
                Family::Fcnn | Family::Dae => set("num_layers", Value::Int(s.num_layers as i64)),
                Family::RnnGru | Family::Lstm => set("sequence_length", Value::Int(s.window as i64)),
                _ => set("window_size", Value::Int(s.window as i64)),
            }
        }
    }
    p
}

/// Reads typed values out of a parameter map, remembering what was used so
/// leftovers can be reported.
struct Params<'a> {
    family: Family,
    map: &'a BTreeMap<String, Value>,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn err(&self, key: &str, what: &str) -> RunnerError {
        RunnerError::Config(format!("{}: `{key}` {what}", self.family))
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.map.get(key)
    }

    fn usize(&mut self, key: &'static str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => match v.as_f64() {
                Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
                _ => Err(self.err(key, &format!("must be a non-negative integer, got {v}"))),
            },
        }
    }

    fn f64(&mut self, key: &'static str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| self.err(key, &format!("must be a number, got {v}"))),
        }
    }

    fn choice<T: Copy>(&mut self, key: &'static str, default: T, options: &[(&str, T)]) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                let s = v.as_str().unwrap_or("");
                options
                    .iter()
                    .find(|(name, _)| *name == s)
                    .map(|(_, t)| *t)
                    .ok_or_else(|| self.err(key, &format!("has unknown value {v}")))
            }
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, "is not a hyperparameter of this family")),
            None => Ok(()),
        }
    }
}

fn runtime(family: Family) -> impl Fn(&dyn std::fmt::Display) -> RunnerError {
    move |e| RunnerError::Runtime(format!("{family}: {e}"))
}

/// Fits `family` on `train` (validation is only read by the neural
/// families, for per-epoch monitoring). Unknown or ill-typed
/// hyperparameters are configuration errors; fitting failures are runtime
/// errors.
pub fn fit_family(
    family: Family,
    params: &BTreeMap<String, Value>,
    settings: &TrainingSettings,
    train: &AlignedDataset,
    val: &AlignedDataset,
    targets: &[String],
    seed: u64,
) -> Result<Box<dyn Disaggregator>> {
    let mut p = Params {
        family,
        map: params,
        used: Vec::new(),
    };
    let rt = runtime(family);
    match family {
        Family::Dt | Family::Rf => {
            let d = CartParams::default();
            let criterion = p.choice(
                "criterion",
                d.criterion,
                &[("squared_error", Criterion::SquaredError), ("friedman_mse", Criterion::FriedmanMse)],
            )?;
            let min_samples_split = p.usize("min_samples_split", d.min_samples_split)?;
            let max_depth = match p.usize("max_depth", d.max_depth.unwrap_or(0))? {
                0 => None,
                n => Some(n),
            };
            let cart = CartParams {
                criterion,
                min_samples_split,
                max_depth,
                ..d
            };
            if family == Family::Dt {
                p.finish()?;
                return Ok(Box::new(
                    TreeDisaggregator::fit_tree(train, targets, DEFAULT_LAG, &cart, seed).map_err(|e| rt(&e))?,
                ));
            }
            let forest = ForestParams {
                n_estimators: p.usize("n_estimators", ForestParams::default().n_estimators)?,
                cart,
                ..ForestParams::default()
            };
            p.finish()?;
            Ok(Box::new(
                TreeDisaggregator::fit_forest(train, targets, DEFAULT_LAG, &forest, seed).map_err(|e| rt(&e))?,
            ))
        }
        Family::Co | Family::Fhmm => {
            let k = p.usize("k", 2)?;
            p.finish()?;
            if family == Family::Co {
                Ok(Box::new(CoModel::fit(train, targets, k, seed).map_err(|e| rt(&e))?))
            } else {
                Ok(Box::new(FhmmModel::fit(train, targets, k, seed).map_err(|e| rt(&e))?))
            }
        }
        _ => {
            let mut spec = NetworkSpec::new(family);
            spec.optimizer = p.choice(
                "optimizer",
                spec.optimizer,
                &[("adam", OptimizerKind::Adam), ("nadam", OptimizerKind::Nadam)],
            )?;
            spec.learning_rate = p.f64("learning_rate", spec.learning_rate)?;
            spec.loss = p.choice("loss", spec.loss, &[("mse", LossKind::Mse), ("mae", LossKind::Mae)])?;
            spec.dropout = p.f64("dropout", spec.dropout)?;
            match family {
                Family::Fcnn | Family::Dae => spec.num_layers = p.usize("num_layers", spec.num_layers)?,
                Family::RnnGru | Family::Lstm => spec.window = p.usize("sequence_length", spec.window)?,
                _ => spec.window = p.usize("window_size", spec.window)?,
            }
            p.finish()?;
            spec.hidden = settings.hidden;
            spec.epochs = settings.epochs;
            spec.batch_size = settings.batch_size;
            spec.train_stride = settings.train_stride;
            spec.seed = seed;
            spec.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
            let (model, _) = NeuralDisaggregator::fit(&spec, train, val, targets).map_err(|e| rt(&e))?;
            Ok(Box::new(model))
        }
    }
}
