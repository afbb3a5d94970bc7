//! Appliance power levels learned by 1-D k-means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use nilm_core::series::is_gap;
use nilm_core::PowerSeries;

use crate::{ClassicError, Result};

const MAX_ITERATIONS: usize = 100;
/// Extra restarts seeded at evenly spaced quantiles of the data.
const QUANTILE_RESTARTS: usize = 7;

/// Markov parameters of one appliance chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    /// Row-stochastic `k x k`, `transition[i][j] = P(next = j | current = i)`.
    pub transition: Vec<Vec<f64>>,
    pub emission_std: Vec<f64>,
    pub initial: Vec<f64>,
}

/// Sorted power levels of one appliance (level 0 is "off"), optionally with
/// the HMM parameters used by the factorial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceStateModel {
    label: String,
    levels: Vec<f64>,
    hmm: Option<HmmParams>,
}

impl ApplianceStateModel {
    pub fn new(label: impl Into<String>, levels: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if levels.len() < 2 {
            return Err(ClassicError::InvalidModel(format!("`{label}` needs at least 2 levels")));
        }
        if levels.iter().any(|l| !l.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ClassicError::InvalidModel(format!(
                "`{label}` levels must be finite and strictly increasing"
            )));
        }
        Ok(Self {
            label,
            levels,
            hmm: None,
        })
    }

    pub fn with_hmm(mut self, hmm: HmmParams) -> Result<Self> {
        let k = self.levels.len();
        let stochastic = |v: &[f64]| {
            v.len() == k && v.iter().all(|p| (0.0..=1.0).contains(p)) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if hmm.transition.len() != k || !hmm.transition.iter().all(|r| stochastic(r)) {
            return Err(ClassicError::InvalidModel("transition rows must be stochastic".into()));
        }
        if !stochastic(&hmm.initial) {
            return Err(ClassicError::InvalidModel("initial distribution must sum to 1".into()));
        }
        if hmm.emission_std.len() != k || hmm.emission_std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(ClassicError::InvalidModel("emission std must be positive".into()));
        }
        self.hmm = Some(hmm);
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn hmm(&self) -> Option<&HmmParams> {
        self.hmm.as_ref()
    }
}

/// Index of the nearest level for every value (ties go to the lower level).
pub fn assign_states(values: &[f64], levels: &[f64]) -> Vec<usize> {
    values.iter().map(|&v| nearest(v, levels)).collect()
}

fn nearest(v: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Learns `k` power levels from a channel with 1-D k-means.
///
/// Each run starts from farthest-point initialization; the first centre is
/// drawn from `seed` and additional runs start from data quantiles. The run
/// with the lowest within-cluster sum of squares wins. Lloyd iterations stop
/// when assignments are stable or after 100 rounds; an emptied cluster is
/// re-seeded at the point farthest from its current centre.
pub fn learn_states(series: &PowerSeries, k: usize, seed: u64) -> Result<ApplianceStateModel> {
    if k < 2 {
        return Err(ClassicError::InvalidK(k));
    }
    let mut sorted: Vec<f64> = series.values().iter().copied().filter(|v| !is_gap(*v)).collect();
    sorted.sort_by(f64::total_cmp);
    // Distinct values with multiplicities.
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &v in &sorted {
        match points.last_mut() {
            Some((p, w)) if *p == v => *w += 1.0,
            _ => points.push((v, 1.0)),
        }
    }
    if points.len() < k {
        return Err(ClassicError::FewerDistinct {
            label: series.label().to_string(),
            distinct: points.len(),
            k,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![sorted[rng.random_range(0..sorted.len())]];
    for i in 0..QUANTILE_RESTARTS {
        let q = (i as f64 + 0.5) / QUANTILE_RESTARTS as f64;
        starts.push(sorted[((q * sorted.len() as f64) as usize).min(sorted.len() - 1)]);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for first in starts {
        if let Some((sse, centers)) = lloyd(&points, farthest_point_init(&points, first, k)) {
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((sse, centers));
            }
        }
    }
    let (_, mut levels) = best.ok_or_else(|| ClassicError::InvalidModel("k-means did not converge".into()))?;
    levels.sort_by(f64::total_cmp);
    ApplianceStateModel::new(series.label(), levels)
}

fn farthest_point_init(points: &[(f64, f64)], first: f64, k: usize) -> Vec<f64> {
    let mut centers = vec![first];
    while centers.len() < k {
        let mut pick = points[0].0;
        let mut pick_d = -1.0;
        for &(x, _) in points {
            let d = centers.iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
            if d > pick_d {
                pick = x;
                pick_d = d;
            }
        }
        centers.push(pick);
    }
    centers
}

/// Weighted Lloyd iterations. Returns `(sse, centers)`, or `None` if a
/// cluster is still empty when the iteration budget runs out.
fn lloyd(points: &[(f64, f64)], mut centers: Vec<f64>) -> Option<(f64, Vec<f64>)> {
    let k = centers.len();
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERATIONS {
        let next: Vec<usize> = points.iter().map(|&(x, _)| nearest(x, &centers)).collect();
        let stable = next == assign;
        assign = next;
        let mut sums = vec![0.0; k];
        let mut weights = vec![0.0; k];
        for (&(x, w), &a) in points.iter().zip(&assign) {
            sums[a] += x * w;
            weights[a] += w;
        }
        if let Some(empty) = weights.iter().position(|&w| w == 0.0) {
            let (far, _) = points
                .iter()
                .zip(&assign)
                .map(|(&(x, _), &a)| (x, (x - centers[a]).abs()))
                .fold((points[0].0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            centers[empty] = far;
            continue;
        }
        for c in 0..k {
            centers[c] = sums[c] / weights[c];
        }
        if stable {
            let sse = points
                .iter()
                .zip(&assign)
                .map(|(&(x, w), &a)| w * (x - centers[a]).powi(2))
                .sum();
            return Some((sse, centers));
        }
    }
    // Budget exhausted: accept the current centres if no cluster is empty.
    let assign: Vec<usize> = points.iter().map(|&(x, _)| nearest(x, &centers)).collect();
    if (0..k).any(|c| !assign.contains(&c)) {
        return None;
    }
    let sse = points
        .iter()
        .zip(&assign)
        .map(|(&(x, w), &a)| w * (x - centers[a]).powi(2))
        .sum();
    Some((sse, centers))
}
