//! Parzen density estimators over single parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::space::ParamSpec;
use crate::{HpoError, Result};

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mixture of Gaussians truncated to `[lo, hi]` (one per observation, equal
/// weights) plus a uniform prior component of weight `pw / (n + pw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousParzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Truncation mass of each component inside `[lo, hi]`.
    masses: Vec<f64>,
    prior_frac: f64,
}

impl ContinuousParzen {
    /// The bandwidth of each observation is the larger distance to its
    /// neighbours in sorted order (the full range for a single
    /// observation), clipped to `clip` fractions of `hi - lo`.
    pub fn fit(observations: &[f64], lo: f64, hi: f64, prior_weight: f64, clip: (f64, f64)) -> Self {
        let range = hi - lo;
        let mut mus: Vec<f64> = observations.iter().map(|x| x.clamp(lo, hi)).collect();
        mus.sort_by(f64::total_cmp);
        let n = mus.len();
        let sigmas: Vec<f64> = (0..n)
            .map(|i| {
                let left = (i > 0).then(|| mus[i] - mus[i - 1]);
                let right = (i + 1 < n).then(|| mus[i + 1] - mus[i]);
                let raw = match (left, right) {
                    (None, None) => range,
                    (l, r) => l.unwrap_or(0.0).max(r.unwrap_or(0.0)),
                };
                raw.clamp(clip.0 * range, clip.1 * range)
            })
            .collect();
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| std_normal_cdf((hi - m) / s) - std_normal_cdf((lo - m) / s))
            .collect();
        Self {
            lo,
            hi,
            mus,
            sigmas,
            masses,
            prior_frac: prior_weight / (n as f64 + prior_weight),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(self.lo..=self.hi).contains(&x) {
            return Err(HpoError::OutOfDomain {
                key: "parzen".into(),
                value: x.to_string(),
            });
        }
        Ok(self.pdf_unchecked(x))
    }

    fn pdf_unchecked(&self, x: f64) -> f64 {
        let n = self.mus.len();
        let w = if n == 0 { 0.0 } else { (1.0 - self.prior_frac) / n as f64 };
        let mixture: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.masses)
            .map(|((m, s), z)| std_normal_pdf((x - m) / s) / (s * z))
            .sum();
        self.prior_frac / (self.hi - self.lo) + w * mixture
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let n = self.mus.len();
        let u: f64 = rng.random();
        if n == 0 || u < self.prior_frac {
            return rng.random_range(self.lo..=self.hi);
        }
        let i = rng.random_range(0..n);
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.mus[i] + self.sigmas[i] * z;
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
    }
}

/// Categorical estimate `P(i) ∝ count_i + prior_weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalParzen {
    probs: Vec<f64>,
}

impl CategoricalParzen {
    pub fn fit(observations: &[usize], n_options: usize, prior_weight: f64) -> Self {
        let mut counts = vec![prior_weight; n_options];
        for &o in observations {
            counts[o] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Self {
            probs: counts.into_iter().map(|c| c / total).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        sample_index(&self.probs, rng)
    }
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Density over one parameter, in "coordinates": option index for a
/// choice, the numeric value otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Parzen {
    Continuous(ContinuousParzen),
    /// The continuous mixture renormalized over the quantization lattice.
    Quantized { lattice: Vec<f64>, pmf: Vec<f64> },
    Categorical(CategoricalParzen),
}

impl Parzen {
    pub fn fit(spec: &ParamSpec, observations: &[f64], prior_weight: f64, clip: (f64, f64)) -> Self {
        match spec {
            ParamSpec::Choice { options, .. } => {
                let idx: Vec<usize> = observations.iter().map(|&x| x as usize).collect();
                Self::Categorical(CategoricalParzen::fit(&idx, options.len(), prior_weight))
            }
            ParamSpec::Uniform { lo, hi, .. } => {
                Self::Continuous(ContinuousParzen::fit(observations, *lo, *hi, prior_weight, clip))
            }
            ParamSpec::QUniform { lo, hi, .. } => {
                let mixture = ContinuousParzen::fit(observations, *lo, *hi, prior_weight, clip);
                let lattice = spec.lattice();
                let weights: Vec<f64> = lattice.iter().map(|&x| mixture.pdf_unchecked(x)).collect();
                let total: f64 = weights.iter().sum();
                Self::Quantized {
                    lattice,
                    pmf: weights.into_iter().map(|w| w / total).collect(),
                }
            }
        }
    }

    /// Density (continuous) or probability (choice, lattice) at `x`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let outside = || HpoError::OutOfDomain {
            key: "parzen".into(),
            value: x.to_string(),
        };
        match self {
            Self::Continuous(c) => c.pdf(x),
            Self::Quantized { lattice, pmf } => lattice.iter().position(|&l| l == x).map(|i| pmf[i]).ok_or_else(outside),
            Self::Categorical(c) => {
                if x.fract() != 0.0 || x < 0.0 {
                    return Err(outside());
                }
                c.probs.get(x as usize).copied().ok_or_else(outside)
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Continuous(c) => c.sample(rng),
            Self::Quantized { lattice, pmf } => lattice[sample_index(pmf, rng)],
            Self::Categorical(c) => c.sample(rng) as f64,
        }
    }
}
