//! Synthetic houses: independent two-state appliances plus Gaussian meter
//! noise.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use nilm_core::dataset::parse_date;
use nilm_core::{AlignedDataset, PowerSeries};

use crate::kv;
use crate::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAppliance {
    pub label: String,
    pub on_power: f64,
    /// `P(on at t+1 | on at t)`.
    pub stay_on: f64,
    /// `P(off at t+1 | off at t)`.
    pub stay_off: f64,
}

impl SyntheticAppliance {
    /// Long-run fraction of time spent on.
    pub fn on_fraction(&self) -> f64 {
        (1.0 - self.stay_off) / ((1.0 - self.stay_on) + (1.0 - self.stay_off))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHouseSpec {
    pub appliances: Vec<SyntheticAppliance>,
    pub noise_std: f64,
    pub start: i64,
    pub samples: usize,
    pub period: i64,
    pub seed: u64,
}

impl SyntheticHouseSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.appliances.is_empty() {
            return bad("synthetic house needs at least one appliance".into());
        }
        for a in &self.appliances {
            let p = |x: f64| x > 0.0 && x < 1.0;
            if !p(a.stay_on) || !p(a.stay_off) {
                return bad(format!("`{}`: dwell probabilities must be in (0, 1)", a.label));
            }
            if !(a.on_power.is_finite() && a.on_power > 0.0) {
                return bad(format!("`{}`: on_power must be positive", a.label));
            }
            if a.label == "aggregate" || a.label.is_empty() {
                return bad(format!("invalid appliance label `{}`", a.label));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be >= 0".into());
        }
        if self.samples == 0 || self.period <= 0 {
            return bad("duration and period must be positive".into());
        }
        Ok(())
    }

    /// Reads keys `start`, `days`, `period`, `noise_std`, `seed` and
    /// `appliance.<label>.{on_power,stay_on,stay_off}`. Appliances are
    /// ordered by label.
    pub fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let period: i64 = kv::take(&mut map, "period", 60)?;
        let days: f64 = kv::take(&mut map, "days", 7.0)?;
        let noise_std = kv::take(&mut map, "noise_std", 0.0)?;
        let seed = kv::take(&mut map, "seed", 0)?;
        let start = match map.remove("start") {
            Some(s) => parse_date(&s).map_err(|e| RunnerError::Config(e.to_string()))?,
            None => 0,
        };
        let mut labels: Vec<String> = Vec::new();
        for k in map.keys() {
            if let Some(rest) = k.strip_prefix("appliance.") {
                if let Some((label, _)) = rest.rsplit_once('.') {
                    if !labels.iter().any(|l| l == label) {
                        labels.push(label.to_string());
                    }
                }
            }
        }
        let mut appliances = Vec::new();
        for label in labels {
            let mut field = |name: &str| -> Result<f64> {
                let key = format!("appliance.{label}.{name}");
                let v = map
                    .remove(&key)
                    .ok_or_else(|| RunnerError::Config(format!("missing `{key}`")))?;
                v.parse().map_err(|_| RunnerError::Config(format!("`{key}` = `{v}` is not a number")))
            };
            appliances.push(SyntheticAppliance {
                on_power: field("on_power")?,
                stay_on: field("stay_on")?,
                stay_off: field("stay_off")?,
                label,
            });
        }
        kv::reject_unknown(&map)?;
        let samples = (days * 86_400.0 / period as f64).round();
        if !(samples >= 1.0) {
            return Err(RunnerError::Config("days must be positive".into()));
        }
        let spec = Self {
            appliances,
            noise_std,
            start,
            samples: samples as usize,
            period,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(kv::parse(text)?)
    }
}

/// Simulates every appliance as a two-state Markov chain started from its
/// stationary distribution, emitting 0 W off and `on_power` on. The
/// aggregate is the channel sum plus `N(0, noise_std)`, clamped at zero.
pub fn generate_synthetic(spec: &SyntheticHouseSpec) -> Result<AlignedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.samples;
    let mut total = vec![0.0; n];
    let mut channels = Vec::with_capacity(spec.appliances.len());
    for a in &spec.appliances {
        let mut on = rng.random::<f64>() < a.on_fraction();
        let mut values = Vec::with_capacity(n);
        for t in 0..n {
            if t > 0 {
                let stay = if on { a.stay_on } else { a.stay_off };
                if rng.random::<f64>() >= stay {
                    on = !on;
                }
            }
            let v = if on { a.on_power } else { 0.0 };
            total[t] += v;
            values.push(v);
        }
        channels.push(PowerSeries::new(a.label.clone(), spec.start, spec.period, values)?);
    }
    if spec.noise_std > 0.0 {
        let noise = Normal::new(0.0, spec.noise_std).map_err(|e| RunnerError::Config(e.to_string()))?;
        for v in &mut total {
            *v = (*v + noise.sample(&mut rng)).max(0.0);
        }
    }
    let aggregate = PowerSeries::new("aggregate", spec.start, spec.period, total)?;
    Ok(AlignedDataset::new(aggregate, channels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(stay_on: f64, stay_off: f64, samples: usize, noise_std: f64) -> SyntheticHouseSpec {
        SyntheticHouseSpec {
            appliances: vec![SyntheticAppliance {
                label: "kettle".into(),
                on_power: 2000.0,
                stay_on,
                stay_off,
            }],
            noise_std,
            start: 0,
            samples,
            period: 60,
            seed: 3,
        }
    }

    #[test]
    fn noise_free_single_appliance_is_the_aggregate() {
        let ds = generate_synthetic(&one(0.9, 0.95, 5000, 0.0)).unwrap();
        assert_eq!(ds.aggregate().values(), ds.appliances()[0].values());
    }

    #[test]
    fn stationary_on_fraction() {
        let ds = generate_synthetic(&one(0.9, 0.9, 100_000, 0.0)).unwrap();
        let on = ds.appliances()[0].values().iter().filter(|v| **v > 0.0).count() as f64 / 100_000.0;
        assert!((on - 0.5).abs() < 0.03, "{on}");
    }

    #[test]
    fn seeded() {
        let s = one(0.8, 0.99, 2000, 25.0);
        assert_eq!(generate_synthetic(&s).unwrap(), generate_synthetic(&s).unwrap());
        assert!(generate_synthetic(&s).unwrap().aggregate().values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn parse_spec_file() {
        let text = "days = 2\nnoise_std = 5\nseed = 9\nappliance.kettle.on_power = 2000\n\
                    appliance.kettle.stay_on = 0.9\nappliance.kettle.stay_off = 0.99\n";
        let s = SyntheticHouseSpec::parse(text).unwrap();
        assert_eq!(s.samples, 2880);
        assert_eq!(s.appliances[0].label, "kettle");
        let bad = SyntheticHouseSpec::parse("appliance.k.on_power = 1\nappliance.k.stay_on = 1.0\nappliance.k.stay_off = 0.5");
        assert!(bad.is_err());
        assert!(SyntheticHouseSpec::parse("colour = red").is_err());
    }
}
