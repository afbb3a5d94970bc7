//! Search over model families and hyperparameters.
//!
//! Each trial fits on train and is scored by validation MAE (mean over
//! targets). After the budget the best configuration is refit on train
//! with its trial seed and scored once on test.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use nilm_core::{Family, MetricReport};
use nilm_hpo::{default_space, run_optimization, Configuration, HpoError, Outcome, SearchSpace, Trial, Value};

use crate::config::{ExperimentConfig, Mode};
use crate::data;
use crate::families::fit_family;
use crate::log::{TrialLog, TrialLogRecord};
use crate::report::emit_report;
use crate::single::evaluate;
use crate::{Result, RunnerError};

#[derive(Debug, Clone)]
pub struct AutomlOutcome {
    pub best: Trial,
    pub history: Vec<Trial>,
    pub records: Vec<TrialLogRecord>,
    pub test: MetricReport,
    /// Test-split reads recorded before the final evaluation.
    pub test_accesses_before_final: usize,
}

#[derive(Serialize)]
struct FinalReport<'a> {
    best_trial_id: usize,
    family: &'a str,
    params: &'a BTreeMap<String, Value>,
    seed: u64,
    val_mae: f64,
    test_mae: f64,
    test_accuracy: f64,
    test: &'a MetricReport,
    test_accesses_before_final: usize,
}

/// The default space with the config's `space.*` overrides applied.
pub fn build_space(cfg: &ExperimentConfig) -> Result<SearchSpace> {
    let mut space = default_space();
    for (key, values) in &cfg.space {
        let r = match values.as_slice() {
            [v] => space.fix(key, v.clone()),
            vs => space.restrict(key, vs),
        };
        r.map_err(|e| RunnerError::Config(format!("space.{key}: {e}")))?;
    }
    Ok(space)
}

/// Family and unprefixed hyperparameters of a configuration.
pub fn split_config(config: &Configuration) -> Result<(Family, BTreeMap<String, Value>)> {
    let name = config
        .get("model")
        .and_then(Value::as_str)
        .ok_or_else(|| RunnerError::Config("configuration has no `model`".into()))?;
    let family: Family = name.parse().map_err(|e| RunnerError::Config(format!("{e}")))?;
    let prefix = format!("{name}.");
    let params = config
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(&prefix).map(|s| (s.to_string(), v.clone())))
        .collect();
    Ok((family, params))
}

pub fn run_automl(cfg: &ExperimentConfig) -> Result<AutomlOutcome> {
    if cfg.mode != Mode::Automl {
        return Err(RunnerError::Config("run_automl needs mode = automl".into()));
    }
    cfg.validate()?;
    let space = build_space(cfg)?;
    let ds = data::dataset(cfg)?;
    let targets = data::targets(cfg, &ds)?;
    let splits = data::splits(cfg, &ds)?;
    std::fs::create_dir_all(&cfg.output).map_err(RunnerError::io(&cfg.output))?;
    let mut log = TrialLog::create(&cfg.output.join("trials.jsonl"))?;
    let mut records = Vec::new();

    let (train, val) = (&splits.train, &splits.val);
    let elapsed = Cell::new(0.0);
    let objective = |config: &Configuration, seed: u64| -> std::result::Result<Outcome, String> {
        let started = Instant::now();
        let result = (|| {
            let (family, params) = split_config(config)?;
            let model = fit_family(family, &params, &cfg.training, train, val, &targets, seed)?;
            evaluate(model.as_ref(), val, &targets, cfg)
        })();
        elapsed.set(started.elapsed().as_secs_f64());
        let report = result.map_err(|e| e.to_string())?;
        Ok(Outcome {
            loss: report.mae,
            aux: [("accuracy".to_string(), report.accuracy)].into(),
        })
    };
    let observer = |trial: &Trial| -> std::result::Result<(), String> {
        let record = TrialLogRecord::from_trial(trial, elapsed.get());
        log.append(&record).map_err(|e| e.to_string())?;
        records.push(record);
        Ok(())
    };
    let (history, best) = run_optimization(&space, cfg.algorithm, cfg.max_evals, cfg.seed, objective, observer)
        .map_err(|e| match e {
            HpoError::AllTrialsFailed(_) => RunnerError::Runtime(e.to_string()),
            other => RunnerError::Config(other.to_string()),
        })?;

    let (family, params) = split_config(&best.config)?;
    let model = fit_family(family, &params, &cfg.training, train, val, &targets, best.seed)?;
    let test_accesses_before_final = splits.test.access_count();
    let test = evaluate(model.as_ref(), splits.test.open("final evaluation"), &targets, cfg)?;

    let final_report = FinalReport {
        best_trial_id: best.id,
        family: family.name(),
        params: &best.config,
        seed: best.seed,
        val_mae: best.loss,
        test_mae: test.mae,
        test_accuracy: test.accuracy,
        test: &test,
        test_accesses_before_final,
    };
    let path = cfg.output.join("final.json");
    let body = serde_json::to_string_pretty(&final_report).map_err(|e| RunnerError::Runtime(e.to_string()))?;
    std::fs::write(&path, body + "\n").map_err(RunnerError::io(&path))?;
    emit_report(&records, &cfg.output.join("report"))?;

    Ok(AutomlOutcome {
        best,
        history,
        records,
        test,
        test_accesses_before_final,
    })
}
