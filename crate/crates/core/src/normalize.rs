//! Zero-mean / unit-variance scaling for network inputs and targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{is_gap, PowerSeries};

/// Standard deviations below this (watts) are treated as a constant channel.
pub const STD_FLOOR: f64 = 1e-6;

/// Affine map `x -> (x - mean) / std` with its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    /// Population mean and standard deviation over non-gap values.
    pub fn fit(values: &[f64]) -> Result<Self> {
        let valid: Vec<f64> = values.iter().copied().filter(|v| !is_gap(*v)).collect();
        if valid.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: valid.len() });
        }
        let n = valid.len() as f64;
        let mean = valid.iter().sum::<f64>() / n;
        let var = valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Ok(Self {
            mean,
            std: if std < STD_FLOOR { 1.0 } else { std },
        })
    }

    #[inline]
    pub fn transform(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn transform_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.transform(v)).collect()
    }

    pub fn inverse_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.inverse(v)).collect()
    }
}

/// Standardizes a series; gaps stay gaps. Returns the normalized values and
/// the scaler needed to undo it.
pub fn standardize(series: &PowerSeries) -> Result<(Vec<f64>, Scaler)> {
    let scaler = Scaler::fit(series.values())?;
    Ok((scaler.transform_all(series.values()), scaler))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_series() {
        let s = PowerSeries::new("x", 0, 1, vec![0.0, 10.0]).unwrap();
        let (z, sc) = standardize(&s).unwrap();
        assert_eq!((sc.mean, sc.std), (5.0, 5.0));
        assert_eq!(z, vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_guard() {
        let s = PowerSeries::new("x", 0, 1, vec![7.0; 3]).unwrap();
        let (z, sc) = standardize(&s).unwrap();
        assert_eq!(sc.std, 1.0);
        assert_eq!(z, vec![0.0; 3]);
    }

    #[test]
    fn too_few() {
        let s = PowerSeries::new("x", 0, 1, vec![1.0, crate::GAP]).unwrap();
        assert_eq!(standardize(&s).unwrap_err(), Error::TooFewSamples { needed: 2, got: 1 });
    }
}
