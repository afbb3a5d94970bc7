//! `Disaggregator` wrappers around the state-based algorithms.

use serde::{Deserialize, Serialize};

use nilm_core::model::{Disaggregator, Family, ModelError};
use nilm_core::{AlignedDataset, PowerSeries};

use crate::co::co_disaggregate;
use crate::fhmm::{fhmm_disaggregate, fit_fhmm};
use crate::states::{learn_states, ApplianceStateModel};
use crate::{ClassicError, Result};

/// Learns levels for every appliance channel of `train`.
pub fn fit_levels(train: &AlignedDataset, ks: &[usize], seed: u64) -> Result<Vec<ApplianceStateModel>> {
    if ks.len() != train.appliances().len() {
        return Err(ClassicError::InvalidModel("one state count per appliance required".into()));
    }
    train
        .appliances()
        .iter()
        .zip(ks)
        .enumerate()
        .map(|(i, (s, &k))| learn_states(s, k, seed.wrapping_add(i as u64)))
        .collect()
}

fn check_targets(train: &AlignedDataset, targets: &[String]) -> Result<()> {
    match targets.iter().find(|t| train.appliance(t).is_none()) {
        Some(t) => Err(ClassicError::InvalidModel(format!("unknown target appliance `{t}`"))),
        None => Ok(()),
    }
}

fn pick(all: Vec<PowerSeries>, targets: &[String]) -> Vec<PowerSeries> {
    targets
        .iter()
        .filter_map(|t| all.iter().find(|s| s.label() == t).cloned())
        .collect()
}

/// Combinatorial optimization over all appliance channels seen in training;
/// predictions are reported for `targets` only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoModel {
    pub models: Vec<ApplianceStateModel>,
    pub targets: Vec<String>,
    pub cap: usize,
}

impl CoModel {
    pub fn fit(train: &AlignedDataset, targets: &[String], k: usize, seed: u64) -> Result<Self> {
        check_targets(train, targets)?;
        Ok(Self {
            models: fit_levels(train, &vec![k; train.appliances().len()], seed)?,
            targets: targets.to_vec(),
            cap: crate::DEFAULT_CO_CAP,
        })
    }
}

impl Disaggregator for CoModel {
    fn family(&self) -> Family {
        Family::Co
    }

    fn targets(&self) -> &[String] {
        &self.targets
    }

    fn predict(&self, aggregate: &PowerSeries) -> Result<Vec<PowerSeries>, ModelError> {
        Ok(pick(co_disaggregate(aggregate, &self.models, self.cap)?, &self.targets))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FhmmModel {
    pub models: Vec<ApplianceStateModel>,
    pub targets: Vec<String>,
    pub cap: usize,
}

impl FhmmModel {
    pub fn fit(train: &AlignedDataset, targets: &[String], k: usize, seed: u64) -> Result<Self> {
        check_targets(train, targets)?;
        Ok(Self {
            models: fit_fhmm(train, &vec![k; train.appliances().len()], seed)?,
            targets: targets.to_vec(),
            cap: crate::DEFAULT_VITERBI_CAP,
        })
    }
}

impl Disaggregator for FhmmModel {
    fn family(&self) -> Family {
        Family::Fhmm
    }

    fn targets(&self) -> &[String] {
        &self.targets
    }

    fn predict(&self, aggregate: &PowerSeries) -> Result<Vec<PowerSeries>, ModelError> {
        Ok(pick(fhmm_disaggregate(aggregate, &self.models, self.cap)?, &self.targets))
    }
}
