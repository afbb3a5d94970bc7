use nilm_core::model::{Disaggregator, Family, ModelError};
use nilm_core::{AlignedDataset, PowerSeries};

use crate::network::Network;
use crate::spec::NetworkSpec;
use crate::train::{train, TrainingHistory};
use crate::{NeuralError, Result};

/// One trained network per target appliance.
#[derive(Debug, Clone)]
pub struct NeuralDisaggregator {
    family: Family,
    targets: Vec<String>,
    networks: Vec<Network>,
}

impl NeuralDisaggregator {
    /// Target `j` is trained with seed `spec.seed + j`.
    pub fn fit(
        spec: &NetworkSpec,
        train_set: &AlignedDataset,
        val_set: &AlignedDataset,
        targets: &[String],
    ) -> Result<(Self, Vec<TrainingHistory>)> {
        let mut networks = Vec::with_capacity(targets.len());
        let mut histories = Vec::with_capacity(targets.len());
        for (j, t) in targets.iter().enumerate() {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(j as u64);
            let (net, hist) = train(&s, train_set, val_set, t)?;
            networks.push(net);
            histories.push(hist);
        }
        Ok((
            Self {
                family: spec.family,
                targets: targets.to_vec(),
                networks,
            },
            histories,
        ))
    }

    pub fn from_networks(networks: Vec<Network>) -> Result<Self> {
        let family = networks
            .first()
            .map(|n| n.spec().family)
            .ok_or_else(|| NeuralError::InvalidSpec("no networks".into()))?;
        if networks.iter().any(|n| n.spec().family != family) {
            return Err(NeuralError::InvalidSpec("networks of mixed families".into()));
        }
        Ok(Self {
            family,
            targets: networks.iter().map(|n| n.target().to_string()).collect(),
            networks,
        })
    }

    pub fn networks(&self) -> &[Network] {
        &self.networks
    }
}

impl Disaggregator for NeuralDisaggregator {
    fn family(&self) -> Family {
        self.family
    }

    fn targets(&self) -> &[String] {
        &self.targets
    }

    fn predict(&self, aggregate: &PowerSeries) -> Result<Vec<PowerSeries>, ModelError> {
        Ok(self
            .networks
            .iter()
            .map(|n| n.predict_series(aggregate))
            .collect::<Result<Vec<_>>>()?)
    }
}
