//! `Disaggregator` wrapper: one tree or forest per target appliance.

use serde::{Deserialize, Serialize};

use nilm_core::model::{output_series, Disaggregator, Family, ModelError};
use nilm_core::series::is_gap;
use nilm_core::{AlignedDataset, PowerSeries};

use crate::cart::{fit_cart, CartParams, Tree};
use crate::features::{build_lag_features, Matrix};
use crate::forest::{fit_forest, ForestModel, ForestParams};
use crate::{Result, TreeError};

/// Aggregate samples per feature row.
pub const DEFAULT_LAG: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeEnsemble {
    Single(Tree),
    Forest(ForestModel),
}

impl TreeEnsemble {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Self::Single(t) => t.predict(x),
            Self::Forest(f) => f.predict(x),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDisaggregator {
    family: Family,
    lag: usize,
    targets: Vec<String>,
    models: Vec<TreeEnsemble>,
}

/// Gaps in the aggregate are read as zero power.
fn features(aggregate: &PowerSeries, lag: usize) -> Result<Matrix> {
    let filled: Vec<f64> = aggregate.values().iter().map(|&v| if is_gap(v) { 0.0 } else { v }).collect();
    Ok(build_lag_features(&filled, lag)?.0)
}

fn target_values<'a>(train: &'a AlignedDataset, target: &str) -> Result<&'a [f64]> {
    train
        .appliance(target)
        .map(PowerSeries::values)
        .ok_or_else(|| TreeError::InvalidParameter(format!("unknown target appliance `{target}`")))
}

impl TreeDisaggregator {
    pub fn fit_tree(train: &AlignedDataset, targets: &[String], lag: usize, params: &CartParams, seed: u64) -> Result<Self> {
        let x = features(train.aggregate(), lag)?;
        let models = targets
            .iter()
            .map(|t| Ok(TreeEnsemble::Single(fit_cart(&x, target_values(train, t)?, params, seed)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            family: Family::Dt,
            lag,
            targets: targets.to_vec(),
            models,
        })
    }

    pub fn fit_forest(
        train: &AlignedDataset,
        targets: &[String],
        lag: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        let x = features(train.aggregate(), lag)?;
        let models = targets
            .iter()
            .map(|t| Ok(TreeEnsemble::Forest(fit_forest(&x, target_values(train, t)?, params, seed)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            family: Family::Rf,
            lag,
            targets: targets.to_vec(),
            models,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn models(&self) -> &[TreeEnsemble] {
        &self.models
    }
}

impl Disaggregator for TreeDisaggregator {
    fn family(&self) -> Family {
        self.family
    }

    fn targets(&self) -> &[String] {
        &self.targets
    }

    fn predict(&self, aggregate: &PowerSeries) -> Result<Vec<PowerSeries>, ModelError> {
        let x = features(aggregate, self.lag)?;
        let mut out = Vec::with_capacity(self.targets.len());
        for (label, model) in self.targets.iter().zip(&self.models) {
            out.push(output_series(aggregate, label, model.predict(&x)?)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset() -> AlignedDataset {
        let a: Vec<f64> = (0..200).map(|i| if (i / 7) % 2 == 0 { 100.0 } else { 0.0 }).collect();
        let b: Vec<f64> = (0..200).map(|i| if (i / 11) % 3 == 0 { 40.0 } else { 0.0 }).collect();
        let agg: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        AlignedDataset::new(
            PowerSeries::new("aggregate", 0, 60, agg).unwrap(),
            vec![
                PowerSeries::new("a", 0, 60, a).unwrap(),
                PowerSeries::new("b", 0, 60, b).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn tree_recovers_separable_appliances() {
        let ds = dataset();
        let targets = vec!["a".to_string(), "b".to_string()];
        let m = TreeDisaggregator::fit_tree(&ds, &targets, 1, &CartParams::default(), 0).unwrap();
        let pred = m.predict(ds.aggregate()).unwrap();
        assert_eq!(pred[0].values(), ds.appliance("a").unwrap().values());
        assert_eq!(pred[1].values(), ds.appliance("b").unwrap().values());
        assert_eq!(m.family(), Family::Dt);
    }

    #[test]
    fn forest_outputs_targets_only() {
        let ds = dataset();
        let m = TreeDisaggregator::fit_forest(&ds, &["b".to_string()], DEFAULT_LAG, &ForestParams::default(), 1)
            .unwrap();
        let pred = m.predict(ds.aggregate()).unwrap();
        assert_eq!(pred.len(), 1);
        assert_eq!(pred[0].label(), "b");
        assert!(pred[0].values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn unknown_target() {
        assert!(TreeDisaggregator::fit_tree(&dataset(), &["c".to_string()], 1, &CartParams::default(), 0).is_err());
    }
}
