//! Tree-structured Parzen estimator suggestions.

use rand::Rng;

use crate::parzen::Parzen;
use crate::space::{Configuration, ParamSpec, SearchSpace, Value};
use crate::trials::{Trial, TrialStatus};
use crate::{HpoError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeConfig {
    /// Fraction of completed trials treated as "good".
    pub gamma: f64,
    /// Completed trials needed before densities replace random sampling.
    pub n_startup: usize,
    pub n_candidates: usize,
    pub prior_weight: f64,
    /// Bandwidth bounds as fractions of the parameter range.
    pub bandwidth_clip: (f64, f64),
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            prior_weight: 1.0,
            bandwidth_clip: (0.01, 1.0),
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HpoError::InvalidSetting(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if self.n_startup < 1 || self.n_candidates < 1 {
            return bad("n_startup and n_candidates must be >= 1");
        }
        if !(self.prior_weight > 0.0 && self.prior_weight.is_finite()) {
            return bad("prior_weight must be positive");
        }
        let (a, b) = self.bandwidth_clip;
        if !(a > 0.0 && a <= b) {
            return bad("bandwidth clip must satisfy 0 < low <= high");
        }
        Ok(())
    }
}

/// Sorts completed trials by loss (ties by id) and returns the first
/// `max(1, ceil(gamma n))` as good, the rest as bad.
pub fn split_good_bad(history: &[Trial], gamma: f64) -> Result<(Vec<&Trial>, Vec<&Trial>)> {
    let mut ok: Vec<&Trial> = history.iter().filter(|t| t.status == TrialStatus::Ok).collect();
    if ok.is_empty() {
        return Err(HpoError::EmptyHistory);
    }
    ok.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.id.cmp(&b.id)));
    let n_good = ((gamma * ok.len() as f64).ceil() as usize).clamp(1, ok.len());
    let bad = ok.split_off(n_good);
    Ok((ok, bad))
}

fn coordinate(spec: &ParamSpec, v: &Value) -> Option<f64> {
    match spec {
        ParamSpec::Choice { options, .. } => options.iter().position(|o| &o.value == v).map(|i| i as f64),
        _ => v.as_f64(),
    }
}

/// Proposes the next configuration. With fewer than `n_startup` completed
/// trials this is a random draw; otherwise each active parameter takes the
/// candidate (drawn from the good density `l`) maximizing `l / g`.
pub fn tpe_suggest(space: &SearchSpace, history: &[Trial], cfg: &TpeConfig, rng: &mut impl Rng) -> Result<Configuration> {
    cfg.validate()?;
    let n_ok = history.iter().filter(|t| t.status == TrialStatus::Ok).count();
    if n_ok < cfg.n_startup {
        return Ok(space.sample_random(rng));
    }
    let (good, bad) = split_good_bad(history, cfg.gamma)?;
    let mut out = Configuration::new();
    walk(&space.params, "", &good, &bad, cfg, rng, &mut out)?;
    Ok(out)
}

fn walk(
    params: &[ParamSpec],
    prefix: &str,
    good: &[&Trial],
    bad: &[&Trial],
    cfg: &TpeConfig,
    rng: &mut impl Rng,
    out: &mut Configuration,
) -> Result<()> {
    for p in params {
        let key = format!("{prefix}{}", p.name());
        let observed = |trials: &[&Trial]| -> Vec<f64> {
            trials
                .iter()
                .filter_map(|t| t.config.get(&key))
                .filter_map(|v| coordinate(p, v))
                .collect()
        };
        let l = Parzen::fit(p, &observed(good), cfg.prior_weight, cfg.bandwidth_clip);
        let g = Parzen::fit(p, &observed(bad), cfg.prior_weight, cfg.bandwidth_clip);
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for _ in 0..cfg.n_candidates {
            let c = l.sample(rng);
            let score = l.density(c)?.ln() - g.density(c)?.ln();
            if score > best.0 || best.1.is_nan() {
                best = (score, c);
            }
        }
        let c = best.1;
        match p {
            ParamSpec::Choice { options, .. } => {
                let o = &options[c as usize];
                out.insert(key, o.value.clone());
                walk(&o.subspace, &format!("{prefix}{}.", o.label()), good, bad, cfg, rng, out)?;
            }
            ParamSpec::Uniform { .. } => {
                out.insert(key, Value::Float(c));
            }
            ParamSpec::QUniform { .. } => {
                out.insert(key, p.quantize(c));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn trial(id: usize, loss: f64, opt: &str) -> Trial {
        Trial {
            id,
            config: [("optimizer".to_string(), Value::from(opt))].into(),
            loss,
            aux: BTreeMap::new(),
            status: TrialStatus::Ok,
            seed: id as u64,
            error: None,
        }
    }

    #[test]
    fn split_sizes() {
        let h: Vec<Trial> = (0..20).map(|i| trial(i, i as f64, "adam")).collect();
        let (g, b) = split_good_bad(&h, 0.25).unwrap();
        assert_eq!((g.len(), b.len()), (5, 15));
        let (g, b) = split_good_bad(&h[..1], 0.25).unwrap();
        assert_eq!((g.len(), b.len()), (1, 0));
        assert_eq!(split_good_bad(&[], 0.25).unwrap_err(), HpoError::EmptyHistory);
    }

    #[test]
    fn equal_losses_keep_lowest_ids() {
        let h: Vec<Trial> = (0..8).rev().map(|i| trial(i, 1.0, "adam")).collect();
        let (g, _) = split_good_bad(&h, 0.25).unwrap();
        assert_eq!(g.iter().map(|t| t.id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn good_optimizer_preferred() {
        let space = SearchSpace::new(vec![ParamSpec::choice_of("optimizer", ["adam", "nadam"])]).unwrap();
        // 20 trials: the 5 best all nadam, the rest balanced.
        let mut h: Vec<Trial> = (0..5).map(|i| trial(i, i as f64, "nadam")).collect();
        h.extend((5..20).map(|i| trial(i, 10.0 + i as f64, if i % 2 == 0 { "adam" } else { "nadam" })));
        let cfg = TpeConfig::default();
        let (good, _) = split_good_bad(&h, cfg.gamma).unwrap();
        assert!(good.iter().all(|t| t.config["optimizer"] == Value::from("nadam")));
        // l = (1, 6)/7; bad holds 8 adam, 7 nadam -> g = (9, 8)/17.
        let ratio = |l: f64, g: f64| l / g;
        assert!(ratio(6.0 / 7.0, 8.0 / 17.0) > ratio(1.0 / 7.0, 9.0 / 17.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let c = tpe_suggest(&space, &h, &cfg, &mut rng).unwrap();
            assert_eq!(c["optimizer"], Value::from("nadam"));
        }
    }

    #[test]
    fn startup_is_random_sampling() {
        let space = SearchSpace::new(vec![ParamSpec::uniform("x", 0.0, 1.0)]).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let c = tpe_suggest(&space, &[], &TpeConfig::default(), &mut a).unwrap();
        assert_eq!(c, space.sample_random(&mut b));
    }
}
