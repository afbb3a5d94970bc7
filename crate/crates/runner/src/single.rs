//! One model family with explicit hyperparameters.

use std::collections::BTreeMap;

use serde::Serialize;

use nilm_core::{AlignedDataset, Disaggregator, Family, MetricReport};
use nilm_hpo::Value;

use crate::config::{ExperimentConfig, Mode};
use crate::data;
use crate::families::{default_params, fit_family};
use crate::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleOutcome {
    pub family: String,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub test: MetricReport,
    pub test_accesses: Vec<String>,
}

/// Scores `model` on `ds` against each target's ground truth.
pub fn evaluate(
    model: &dyn Disaggregator,
    ds: &AlignedDataset,
    targets: &[String],
    cfg: &ExperimentConfig,
) -> Result<MetricReport> {
    let pred = model
        .predict(ds.aggregate())
        .map_err(|e| RunnerError::Runtime(format!("{}: predict: {e}", model.family())))?;
    let truth = targets
        .iter()
        .map(|t| {
            ds.appliance(t)
                .ok_or_else(|| RunnerError::Config(format!("unknown appliance `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::evaluate(&truth, &pred, |l| cfg.threshold_for(l))?)
}

/// Defaults for `family` overlaid with `overrides`.
pub fn merged_params(family: Family, overrides: &BTreeMap<String, Value>) -> BTreeMap<String, Value> {
    let mut p = default_params(family);
    p.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
    p
}

/// Fits on train, scores once on test and writes `report.json` to the
/// output directory.
pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleOutcome> {
    if cfg.mode != Mode::Single {
        return Err(RunnerError::Config("run_single needs mode = single".into()));
    }
    cfg.validate()?;
    let family = cfg.family.expect("validated");
    let ds = data::dataset(cfg)?;
    let targets = data::targets(cfg, &ds)?;
    let splits = data::splits(cfg, &ds)?;
    let params = merged_params(family, &cfg.params);
    let model = fit_family(family, &params, &cfg.training, &splits.train, &splits.val, &targets, cfg.seed)?;
    let test = evaluate(model.as_ref(), splits.test.open("single-run evaluation"), &targets, cfg)?;
    let out = SingleOutcome {
        family: family.name().to_string(),
        params,
        seed: cfg.seed,
        test,
        test_accesses: splits.test.accesses(),
    };
    std::fs::create_dir_all(&cfg.output).map_err(RunnerError::io(&cfg.output))?;
    let path = cfg.output.join("report.json");
    let body = serde_json::to_string_pretty(&out).map_err(|e| RunnerError::Runtime(e.to_string()))?;
    std::fs::write(&path, body + "\n").map_err(RunnerError::io(&path))?;
    Ok(out)
}
