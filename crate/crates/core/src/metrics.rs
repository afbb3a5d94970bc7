//! Mean absolute error and on/off classification accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PowerSeries;

/// Default on-power threshold in watts.
pub const DEFAULT_THRESHOLD_W: f64 = 10.0;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// `(1/N) * sum |truth - pred|`.
pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth.len(), pred.len())?;
    let total: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(total / truth.len() as f64)
}

/// A reading is "on" when strictly above the threshold.
pub fn on_off_states(series: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    Ok(series.iter().map(|&v| v > threshold).collect())
}

/// `(TP + TN) / (P + N)`.
pub fn classification_accuracy(truth: &[bool], pred: &[bool]) -> Result<f64> {
    check_lengths(truth.len(), pred.len())?;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    Ok(correct as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceMetrics {
    pub label: String,
    pub mae: f64,
    pub accuracy: f64,
    pub threshold_watts: f64,
}

/// Per-appliance and overall (mean) scores on one evaluation range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub appliances: Vec<ApplianceMetrics>,
    pub mae: f64,
    pub accuracy: f64,
    pub n_samples: usize,
}

impl MetricReport {
    /// Scores predictions against ground truth, pairing channels by label.
    /// `threshold` gives the on-power for each label.
    pub fn evaluate(
        truth: &[&PowerSeries],
        pred: &[PowerSeries],
        threshold: impl Fn(&str) -> f64,
    ) -> Result<Self> {
        check_lengths(truth.len(), pred.len())?;
        let n_samples = truth[0].len();
        let mut appliances = Vec::with_capacity(truth.len());
        for t in truth {
            let p = pred
                .iter()
                .find(|p| p.label() == t.label())
                .ok_or_else(|| Error::InvalidDataset(format!("no prediction for `{}`", t.label())))?;
            if t.len() != n_samples {
                return Err(Error::LengthMismatch(n_samples, t.len()));
            }
            let th = threshold(t.label());
            appliances.push(ApplianceMetrics {
                label: t.label().to_string(),
                mae: mae(t.values(), p.values())?,
                accuracy: classification_accuracy(
                    &on_off_states(t.values(), th)?,
                    &on_off_states(p.values(), th)?,
                )?,
                threshold_watts: th,
            });
        }
        let k = appliances.len() as f64;
        Ok(Self {
            mae: appliances.iter().map(|a| a.mae).sum::<f64>() / k,
            accuracy: appliances.iter().map(|a| a.accuracy).sum::<f64>() / k,
            appliances,
            n_samples,
        })
    }

    /// Flat key-value form: `mae`, `accuracy`, `n_samples`, then
    /// `mae.<label>`, `accuracy.<label>`, `threshold.<label>`.
    pub fn to_flat(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert("mae".to_string(), self.mae);
        out.insert("accuracy".to_string(), self.accuracy);
        out.insert("n_samples".to_string(), self.n_samples as f64);
        for a in &self.appliances {
            out.insert(format!("mae.{}", a.label), a.mae);
            out.insert(format!("accuracy.{}", a.label), a.accuracy);
            out.insert(format!("threshold.{}", a.label), a.threshold_watts);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_fixtures() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let m = mae(&[0.0, 100.0, 100.0], &[0.0, 90.0, 110.0]).unwrap();
        assert_eq!(m, 20.0 / 3.0);
        assert_eq!(mae(&[3.0, 5.0], &[0.0, 0.0]).unwrap(), 4.0);
        assert_eq!(mae(&[1.0], &[]).unwrap_err(), Error::LengthMismatch(1, 0));
        assert_eq!(mae(&[], &[]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn thresholding() {
        assert_eq!(on_off_states(&[0.0, 5.0, 15.0], 10.0).unwrap(), vec![false, false, true]);
        assert_eq!(on_off_states(&[0.0, 0.0], 0.0).unwrap(), vec![false, false]);
        assert_eq!(on_off_states(&[10.0], 10.0).unwrap(), vec![false]);
        assert!(on_off_states(&[1.0], -1.0).is_err());
    }

    #[test]
    fn accuracy_fixtures() {
        let t = [true, true, false, false, true];
        let p = [true, false, false, true, true];
        assert_eq!(classification_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(classification_accuracy(&t, &p).unwrap(), 0.6);
        let not: Vec<bool> = t.iter().map(|b| !b).collect();
        assert_eq!(classification_accuracy(&t, &not).unwrap(), 0.0);
    }

    #[test]
    fn report_flat() {
        let t = PowerSeries::new("kettle", 0, 60, vec![0.0, 100.0]).unwrap();
        let p = PowerSeries::new("kettle", 0, 60, vec![0.0, 80.0]).unwrap();
        let r = MetricReport::evaluate(&[&t], &[p], |_| DEFAULT_THRESHOLD_W).unwrap();
        assert_eq!(r.mae, 10.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.n_samples, 2);
        let flat = r.to_flat();
        assert_eq!(flat["mae.kettle"], 10.0);
        assert_eq!(flat["threshold.kettle"], 10.0);
    }
}
