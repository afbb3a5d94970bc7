//! Factorial HMM: independent appliance chains whose emissions add up.

use std::f64::consts::PI;

use nilm_core::series::is_gap;
use nilm_core::{AlignedDataset, PowerSeries};

use crate::co::levels_to_series;
use crate::joint::JointStateIndex;
use crate::states::{assign_states, learn_states, ApplianceStateModel, HmmParams};
use crate::{ClassicError, Result};

pub const DEFAULT_VITERBI_CAP: usize = 1024;
/// Lower bound on per-level emission standard deviation, in watts.
pub const EMISSION_STD_FLOOR: f64 = 10.0;

/// Fits one chain per appliance channel of `train`: levels from k-means,
/// transitions from Laplace-smoothed state bigram counts, emission spread
/// from within-level standard deviation and the initial distribution from
/// state frequencies. `ks[i]` is the state count of appliance `i`.
pub fn fit_fhmm(train: &AlignedDataset, ks: &[usize], seed: u64) -> Result<Vec<ApplianceStateModel>> {
    if ks.len() != train.appliances().len() {
        return Err(ClassicError::InvalidModel(format!(
            "{} state counts for {} appliances",
            ks.len(),
            train.appliances().len()
        )));
    }
    train
        .appliances()
        .iter()
        .zip(ks)
        .enumerate()
        .map(|(i, (series, &k))| {
            let model = learn_states(series, k, seed.wrapping_add(i as u64))?;
            let hmm = estimate_hmm(series.values(), model.levels());
            model.with_hmm(hmm)
        })
        .collect()
}

fn estimate_hmm(values: &[f64], levels: &[f64]) -> HmmParams {
    let k = levels.len();
    let states = assign_states(values, levels);

    let mut counts = vec![vec![1.0; k]; k];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    let transition = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.into_iter().map(|c| c / total).collect()
        })
        .collect();

    let mut n = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for (&v, &s) in values.iter().zip(&states) {
        n[s] += 1.0;
        sq[s] += (v - levels[s]).powi(2);
    }
    let emission_std = (0..k)
        .map(|s| {
            let std = if n[s] > 0.0 { (sq[s] / n[s]).sqrt() } else { 0.0 };
            std.max(EMISSION_STD_FLOOR)
        })
        .collect();
    let total: f64 = n.iter().sum();
    let initial = n.iter().map(|c| c / total).collect();

    HmmParams {
        transition,
        emission_std,
        initial,
    }
}

struct JointChain {
    index: JointStateIndex,
    log_init: Vec<f64>,
    /// `log_trans[i * len + j]`: log P(j | i).
    log_trans: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl JointChain {
    fn new(models: &[ApplianceStateModel], cap: usize) -> Result<Self> {
        let hmms: Vec<&HmmParams> = models
            .iter()
            .map(|m| {
                m.hmm()
                    .ok_or_else(|| ClassicError::InvalidModel(format!("`{}` has no HMM parameters", m.label())))
            })
            .collect::<Result<_>>()?;
        let sizes: Vec<usize> = models.iter().map(|m| m.k()).collect();
        let index = JointStateIndex::new(&sizes, cap)?;
        let n = models.len();
        let s = index.len();
        let table = index.table();
        let tuple = |f: usize| &table[f * n..(f + 1) * n];

        let mut log_init = vec![0.0; s];
        let mut mean = vec![0.0; s];
        let mut var = vec![0.0; s];
        for f in 0..s {
            for (a, &st) in tuple(f).iter().enumerate() {
                log_init[f] += hmms[a].initial[st].ln();
                mean[f] += models[a].levels()[st];
                var[f] += hmms[a].emission_std[st].powi(2);
            }
        }
        let mut log_trans = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..s {
                log_trans[i * s + j] = tuple(i)
                    .iter()
                    .zip(tuple(j))
                    .enumerate()
                    .map(|(a, (&si, &sj))| hmms[a].transition[si][sj].ln())
                    .sum();
            }
        }
        Ok(Self {
            index,
            log_init,
            log_trans,
            mean,
            var,
        })
    }

    #[inline]
    fn log_emit(&self, f: usize, y: f64) -> f64 {
        let v = self.var[f];
        -0.5 * (2.0 * PI * v).ln() - (y - self.mean[f]).powi(2) / (2.0 * v)
    }
}

/// Exact Viterbi decoding of the joint chain. Returns the flat joint-state
/// path and its log-probability.
pub fn fhmm_decode(aggregate: &[f64], models: &[ApplianceStateModel], cap: usize) -> Result<(Vec<usize>, f64)> {
    let chain = JointChain::new(models, cap)?;
    let s = chain.index.len();
    let t_len = aggregate.len();
    if t_len == 0 {
        return Err(ClassicError::Core(nilm_core::Error::EmptyInput));
    }
    if aggregate.iter().any(|v| is_gap(*v)) {
        return Err(ClassicError::Gaps);
    }

    let mut delta: Vec<f64> = (0..s).map(|f| chain.log_init[f] + chain.log_emit(f, aggregate[0])).collect();
    let mut back = vec![0u32; t_len * s];
    let mut next = vec![0.0; s];
    for t in 1..t_len {
        let y = aggregate[t];
        for j in 0..s {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..s {
                let score = delta[i] + chain.log_trans[i * s + j];
                if score > best {
                    best = score;
                    arg = i;
                }
            }
            back[t * s + j] = arg as u32;
            next[j] = best + chain.log_emit(j, y);
        }
        std::mem::swap(&mut delta, &mut next);
        if delta.iter().all(|d| !d.is_finite()) {
            return Err(ClassicError::NonFinite(t));
        }
    }

    let (mut state, &log_prob) = delta
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    if !log_prob.is_finite() {
        return Err(ClassicError::NonFinite(t_len - 1));
    }
    let mut path = vec![0; t_len];
    for t in (0..t_len).rev() {
        path[t] = state;
        state = back[t * s + state] as usize;
    }
    Ok((path, log_prob))
}

/// Log-probability of a joint path (flat indices) under the model.
pub fn path_log_prob(aggregate: &[f64], models: &[ApplianceStateModel], path: &[usize]) -> Result<f64> {
    let chain = JointChain::new(models, usize::MAX)?;
    let s = chain.index.len();
    let mut lp = 0.0;
    for (t, (&f, &y)) in path.iter().zip(aggregate).enumerate() {
        lp += if t == 0 {
            chain.log_init[f]
        } else {
            chain.log_trans[path[t - 1] * s + f]
        };
        lp += chain.log_emit(f, y);
    }
    Ok(lp)
}

/// Decodes the aggregate and returns each appliance's level sequence.
pub fn fhmm_disaggregate(aggregate: &PowerSeries, models: &[ApplianceStateModel], cap: usize) -> Result<Vec<PowerSeries>> {
    let (path, _) = fhmm_decode(aggregate.values(), models, cap)?;
    let sizes: Vec<usize> = models.iter().map(|m| m.k()).collect();
    let index = JointStateIndex::new(&sizes, cap)?;
    levels_to_series(aggregate, models, &index, &path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(appliances: Vec<(&str, Vec<f64>)>) -> AlignedDataset {
        let n = appliances[0].1.len();
        let mut agg = vec![0.0; n];
        let chans = appliances
            .into_iter()
            .map(|(l, v)| {
                for (a, x) in agg.iter_mut().zip(&v) {
                    *a += x;
                }
                PowerSeries::new(l, 0, 60, v).unwrap()
            })
            .collect();
        AlignedDataset::new(PowerSeries::new("aggregate", 0, 60, agg).unwrap(), chans).unwrap()
    }

    #[test]
    fn alternating_bigram_counts() {
        let ds = dataset(vec![("a", vec![0.0, 100.0, 0.0, 100.0, 0.0, 100.0])]);
        let m = fit_fhmm(&ds, &[2], 0).unwrap();
        let hmm = m[0].hmm().unwrap();
        // 0->1 seen 3 times, 1->0 twice; plus one pseudo-count each.
        assert_eq!(hmm.transition[0], vec![1.0 / 5.0, 4.0 / 5.0]);
        assert_eq!(hmm.transition[1], vec![3.0 / 4.0, 1.0 / 4.0]);
        assert_eq!(hmm.initial, vec![0.5, 0.5]);
        assert_eq!(hmm.emission_std, vec![EMISSION_STD_FLOOR; 2]);
    }

    #[test]
    fn mostly_off_appliance() {
        let mut v = vec![0.0; 40];
        v[20] = 50.0;
        let ds = dataset(vec![("a", v)]);
        let hmm = fit_fhmm(&ds, &[2], 0).unwrap()[0].hmm().unwrap().clone();
        assert!(hmm.transition[0][0] > 0.9);
        for row in &hmm.transition {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn factorial_structure() {
        let ds = dataset(vec![
            ("a", vec![0.0, 100.0, 100.0, 0.0, 0.0, 100.0]),
            ("b", vec![0.0, 0.0, 30.0, 30.0, 30.0, 0.0]),
        ]);
        let ms = fit_fhmm(&ds, &[2, 2], 1).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].levels(), &[0.0, 100.0]);
        assert_eq!(ms[1].levels(), &[0.0, 30.0]);
        let single = fit_fhmm(&ds.select(&["b"]).unwrap(), &[2], 2).unwrap();
        assert_eq!(single[0].hmm(), ms[1].hmm());
    }

    #[test]
    fn dominant_likelihood_recovers_states() {
        let a = vec![0.0, 1000.0, 1000.0, 0.0, 0.0, 1000.0, 0.0, 0.0];
        let b = vec![0.0, 0.0, 300.0, 300.0, 0.0, 300.0, 300.0, 0.0];
        let ds = dataset(vec![("a", a.clone()), ("b", b.clone())]);
        let ms = fit_fhmm(&ds, &[2, 2], 0).unwrap();
        let out = fhmm_disaggregate(ds.aggregate(), &ms, DEFAULT_VITERBI_CAP).unwrap();
        assert_eq!(out[0].values(), a.as_slice());
        assert_eq!(out[1].values(), b.as_slice());
    }

    #[test]
    fn requires_hmm_parameters() {
        let m = ApplianceStateModel::new("a", vec![0.0, 1.0]).unwrap();
        assert!(matches!(fhmm_decode(&[1.0], &[m], 16), Err(ClassicError::InvalidModel(_))));
    }
}
