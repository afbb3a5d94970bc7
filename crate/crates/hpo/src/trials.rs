//! Trial records and the optimization loop.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::space::{Configuration, SearchSpace};
use crate::tpe::{tpe_suggest, TpeConfig};
use crate::{HpoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Failed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: usize,
    pub config: Configuration,
    /// Objective value; `+inf` for failed trials.
    pub loss: f64,
    pub aux: BTreeMap<String, f64>,
    pub status: TrialStatus,
    pub seed: u64,
    pub error: Option<String>,
}

/// What the objective reports for one configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub loss: f64,
    pub aux: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Tpe(TpeConfig),
    Random,
}

/// Lowest-loss completed trial; ties go to the lower id.
pub fn best_trial(history: &[Trial]) -> Result<&Trial> {
    history
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .min_by(|a, b| a.loss.total_cmp(&b.loss).then(a.id.cmp(&b.id)))
        .ok_or(HpoError::EmptyHistory)
}

/// Runs exactly `max_evals` sequential trials. Suggestions draw from one
/// generator seeded with `seed`; trial `i` is evaluated with seed
/// `seed ^ i`. Objective errors and non-finite losses mark the trial
/// failed (excluded from density fitting). `observer` sees each trial as
/// soon as it completes; an observer error stops the run.
pub fn run_optimization<F, O>(
    space: &SearchSpace,
    algorithm: Algorithm,
    max_evals: usize,
    seed: u64,
    mut objective: F,
    mut observer: O,
) -> Result<(Vec<Trial>, Trial)>
where
    F: FnMut(&Configuration, u64) -> std::result::Result<Outcome, String>,
    O: FnMut(&Trial) -> std::result::Result<(), String>,
{
    if max_evals < 1 {
        return Err(HpoError::InvalidSetting("max_evals must be >= 1".into()));
    }
    space.validate()?;
    if let Algorithm::Tpe(cfg) = &algorithm {
        cfg.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<Trial> = Vec::with_capacity(max_evals);
    for id in 0..max_evals {
        let config = match &algorithm {
            Algorithm::Tpe(cfg) => tpe_suggest(space, &history, cfg, &mut rng)?,
            Algorithm::Random => space.sample_random(&mut rng),
        };
        let trial_seed = seed ^ id as u64;
        let (status, loss, aux, error) = match objective(&config, trial_seed) {
            Ok(o) if o.loss.is_finite() => (TrialStatus::Ok, o.loss, o.aux, None),
            Ok(o) => (TrialStatus::Failed, f64::INFINITY, o.aux, Some(format!("non-finite loss {}", o.loss))),
            Err(e) => (TrialStatus::Failed, f64::INFINITY, BTreeMap::new(), Some(e)),
        };
        let trial = Trial {
            id,
            config,
            loss,
            aux,
            status,
            seed: trial_seed,
            error,
        };
        observer(&trial).map_err(HpoError::InvalidSetting)?;
        history.push(trial);
    }
    let best = best_trial(&history).map_err(|_| HpoError::AllTrialsFailed(max_evals))?.clone();
    Ok((history, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ParamSpec, Value};

    fn space() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::uniform("x", -1.0, 1.0)]).unwrap()
    }

    fn with_loss(id: usize, loss: f64) -> Trial {
        Trial {
            id,
            config: Configuration::new(),
            loss,
            aux: BTreeMap::new(),
            status: TrialStatus::Ok,
            seed: 0,
            error: None,
        }
    }

    #[test]
    fn best_trial_rules() {
        let h = vec![with_loss(0, 9.2), with_loss(1, 7.12), with_loss(2, 8.31)];
        assert_eq!(best_trial(&h).unwrap().id, 1);
        let tied = vec![with_loss(0, 1.0), with_loss(1, 1.0)];
        assert_eq!(best_trial(&tied).unwrap().id, 0);
        assert_eq!(best_trial(&h[..1]).unwrap().id, 0);
        assert!(best_trial(&[]).is_err());
    }

    #[test]
    fn runs_exactly_max_evals() {
        let mut seen = 0;
        let (h, best) = run_optimization(
            &space(),
            Algorithm::Tpe(TpeConfig::default()),
            30,
            7,
            |c, _| Ok(Outcome { loss: c["x"].as_f64().unwrap().powi(2), ..Default::default() }),
            |_| {
                seen += 1;
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(h.len(), 30);
        assert_eq!(seen, 30);
        assert!(best.loss <= h.iter().map(|t| t.loss).fold(f64::INFINITY, f64::min));
        assert!(h.iter().enumerate().all(|(i, t)| t.seed == 7 ^ i as u64));
    }

    #[test]
    fn constant_objective_picks_first() {
        let (_, best) = run_optimization(&space(), Algorithm::Random, 5, 1, |_, _| Ok(Outcome::default()), |_| Ok(())).unwrap();
        assert_eq!(best.id, 0);
    }

    #[test]
    fn failures_recorded_and_all_failed_is_error() {
        let (h, best) = run_optimization(
            &space(),
            Algorithm::Tpe(TpeConfig::default()),
            12,
            0,
            |_, s| match s {
                3 => Ok(Outcome { loss: 1.0, ..Default::default() }),
                s if s % 2 == 0 => Err("boom".into()),
                _ => Ok(Outcome { loss: f64::NAN, ..Default::default() }),
            },
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(h.len(), 12);
        assert_eq!(best.seed, 3);
        assert!(h.iter().filter(|t| t.status == TrialStatus::Failed).all(|t| t.loss.is_infinite()));
        let err = run_optimization(&space(), Algorithm::Random, 3, 0, |_, _| Err("x".into()), |_| Ok(())).unwrap_err();
        assert_eq!(err, HpoError::AllTrialsFailed(3));
    }

    #[test]
    fn deterministic_history() {
        let run = || {
            run_optimization(
                &space(),
                Algorithm::Tpe(TpeConfig::default()),
                20,
                5,
                |c, _| Ok(Outcome { loss: (c["x"].as_f64().unwrap() - 0.3).abs(), ..Default::default() }),
                |_| Ok(()),
            )
            .unwrap()
            .0
        };
        assert_eq!(run(), run());
        let _ = Value::Int(0);
    }
}
