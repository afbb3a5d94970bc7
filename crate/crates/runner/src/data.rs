//! Loading, resampling and splitting experiment data.

use std::path::Path;

use nilm_core::series::DEFAULT_MAX_GAP;
use nilm_core::{align, load_csv, resample, split_by_date, AlignedDataset, GapPolicy, PowerSeries};

use crate::audit::{Splits, TestSplit};
use crate::config::{DataSource, ExperimentConfig};
use crate::synth::generate_synthetic;
use crate::{Result, RunnerError};

/// Reads a dataset CSV (`timestamp,aggregate,<appliance>,...`), resamples
/// every channel to `period` and aligns them. Short gaps are forward-filled
/// and longer ones zero-filled.
pub fn load_dataset(path: &Path, period: i64) -> Result<AlignedDataset> {
    let file = std::fs::File::open(path).map_err(RunnerError::io(path))?;
    let channels = load_csv(file)?;
    prepare(channels, period)
}

fn prepare(channels: Vec<PowerSeries>, period: i64) -> Result<AlignedDataset> {
    let aggregate_at = channels
        .iter()
        .position(|c| c.label() == "aggregate")
        .ok_or_else(|| RunnerError::Config("dataset has no `aggregate` column".into()))?;
    let mut resampled = channels
        .iter()
        .map(|c| resample(c, period, DEFAULT_MAX_GAP))
        .collect::<nilm_core::Result<Vec<_>>>()?;
    let aggregate = resampled.remove(aggregate_at);
    Ok(align(
        &aggregate,
        &resampled,
        GapPolicy::ForwardFill {
            max_gap: DEFAULT_MAX_GAP,
        },
    )?)
}

/// The full dataset of `cfg`, at `cfg.sample_period_s`.
pub fn dataset(cfg: &ExperimentConfig) -> Result<AlignedDataset> {
    match &cfg.data {
        DataSource::Csv(path) => load_dataset(path, cfg.sample_period_s),
        DataSource::Synthetic(spec) => {
            let ds = generate_synthetic(spec)?;
            if ds.period() == cfg.sample_period_s {
                return Ok(ds);
            }
            let mut channels = vec![ds.aggregate().clone()];
            channels.extend(ds.appliances().iter().cloned());
            prepare(channels, cfg.sample_period_s)
        }
    }
}

/// Target labels: `cfg.appliances`, or every channel when empty.
pub fn targets(cfg: &ExperimentConfig, ds: &AlignedDataset) -> Result<Vec<String>> {
    if cfg.appliances.is_empty() {
        return Ok(ds.labels().into_iter().map(String::from).collect());
    }
    for a in &cfg.appliances {
        if ds.appliance(a).is_none() {
            return Err(RunnerError::Config(format!(
                "appliance `{a}` not in dataset (have: {})",
                ds.labels().join(", ")
            )));
        }
    }
    Ok(cfg.appliances.clone())
}

pub fn splits(cfg: &ExperimentConfig, ds: &AlignedDataset) -> Result<Splits> {
    let (train, val, test) = split_by_date(ds, &cfg.split).map_err(|e| RunnerError::Config(e.to_string()))?;
    Ok(Splits {
        train,
        val,
        test: TestSplit::new(test),
    })
}
