use std::f64::consts::PI;

use nilm_classic::{
    co_states, fhmm_decode, fhmm_disaggregate, fit_fhmm, path_log_prob, ApplianceStateModel, HmmParams,
};
use nilm_core::{AlignedDataset, PowerSeries};
use proptest::prelude::*;

fn stochastic(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Strictly increasing levels starting at 0.
fn levels(steps: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for s in steps {
        out.push(out.last().unwrap() + s);
    }
    out
}

fn model_strategy(k: usize) -> impl Strategy<Value = ApplianceStateModel> {
    (
        prop::collection::vec(20.0f64..800.0, k - 1),
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, k), k),
        prop::collection::vec(10.0f64..120.0, k),
        prop::collection::vec(0.05f64..1.0, k),
    )
        .prop_map(move |(steps, trans, std, init)| {
            ApplianceStateModel::new("a", levels(&steps))
                .unwrap()
                .with_hmm(HmmParams {
                    transition: trans.iter().map(|r| stochastic(r)).collect(),
                    emission_std: std,
                    initial: stochastic(&init),
                })
                .unwrap()
        })
}

/// One to three appliances with at most 9 joint states.
fn models_strategy() -> impl Strategy<Value = Vec<ApplianceStateModel>> {
    prop_oneof![
        (2usize..=4).prop_flat_map(|k| model_strategy(k).prop_map(|m| vec![m])),
        (2usize..=3, 2usize..=3).prop_flat_map(|(a, b)| (model_strategy(a), model_strategy(b)).prop_map(|(x, y)| vec![x, y])),
    ]
}

/// Every per-appliance state tuple, first appliance varying fastest.
fn tuples(models: &[ApplianceStateModel]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for m in models {
        out = (0..m.k())
            .flat_map(|s| out.iter().map(move |t| {
                let mut t = t.clone();
                t.push(s);
                t
            }))
            .collect();
    }
    // Reorder so the first appliance varies fastest.
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

/// Log-probability of a path of state tuples, written directly from the
/// model definition: independent chains, Gaussian emission with mean equal
/// to the level sum and variance equal to the summed variances.
fn oracle_log_prob(y: &[f64], models: &[ApplianceStateModel], path: &[&Vec<usize>]) -> f64 {
    let mut lp = 0.0;
    for (t, states) in path.iter().enumerate() {
        let mut prob = 1.0;
        let (mut mean, mut var) = (0.0, 0.0);
        for (a, m) in models.iter().enumerate() {
            let h = m.hmm().unwrap();
            prob *= if t == 0 { h.initial[states[a]] } else { h.transition[path[t - 1][a]][states[a]] };
            mean += m.levels()[states[a]];
            var += h.emission_std[states[a]].powi(2);
        }
        lp += prob.ln() - (y[t] - mean).powi(2) / (2.0 * var) - 0.5 * (2.0 * PI * var).ln();
    }
    lp
}

fn brute_force_best(y: &[f64], models: &[ApplianceStateModel]) -> f64 {
    let all = tuples(models);
    let s = all.len();
    let mut best = f64::NEG_INFINITY;
    let mut digits = vec![0usize; y.len()];
    loop {
        let path: Vec<&Vec<usize>> = digits.iter().map(|&d| &all[d]).collect();
        best = best.max(oracle_log_prob(y, models, &path));
        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] < s {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            return best;
        }
    }
}

fn joint_len(models: &[ApplianceStateModel]) -> usize {
    models.iter().map(|m| m.k()).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn viterbi_matches_brute_force(
        models in models_strategy(),
        raw in prop::collection::vec(0.0f64..2500.0, 8),
        t_len in 1usize..=8,
    ) {
        let s = joint_len(&models);
        // Keep enumeration below ~1e5 paths.
        let t_len = (1..=t_len).take_while(|&t| s.pow(t as u32) <= 100_000).last().unwrap_or(1);
        let y = &raw[..t_len];
        let (path, lp) = fhmm_decode(y, &models, 1024).unwrap();
        let best = brute_force_best(y, &models);
        prop_assert!(best.is_finite());
        prop_assert!((lp - best).abs() <= 1e-9 * best.abs().max(1.0), "viterbi {lp} brute force {best}");

        let all = tuples(&models);
        let chosen: Vec<&Vec<usize>> = path.iter().map(|&f| &all[f]).collect();
        let direct = oracle_log_prob(y, &models, &chosen);
        prop_assert!((direct - best).abs() <= 1e-9 * best.abs().max(1.0));
        prop_assert!((path_log_prob(y, &models, &path).unwrap() - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn co_matches_exhaustive_search(
        steps in prop::collection::vec(prop::collection::vec(1u32..500, 1..4), 1..5),
        y in prop::collection::vec(0u32..3000, 1..40),
    ) {
        let models: Vec<ApplianceStateModel> = steps
            .iter()
            .map(|s| ApplianceStateModel::new("a", levels(&s.iter().map(|&v| v as f64).collect::<Vec<_>>())).unwrap())
            .collect();
        prop_assume!(joint_len(&models) <= 256);
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let (index, chosen) = co_states(&y, &models, 4096).unwrap();
        let all = tuples(&models);
        for (t, &f) in chosen.iter().enumerate() {
            let sum = |tuple: &Vec<usize>| -> f64 { tuple.iter().zip(&models).map(|(&s, m)| m.levels()[s]).sum() };
            let dist: Vec<f64> = all.iter().map(|tu| (y[t] - sum(tu)).abs()).collect();
            let min = dist.iter().cloned().fold(f64::INFINITY, f64::min);
            let first = dist.iter().position(|&d| d == min).unwrap();
            prop_assert_eq!(f, first);
            prop_assert_eq!(&index.unflatten(f), &all[f]);
        }
    }

    #[test]
    fn outputs_stay_on_grid_and_in_level_sets(
        models in models_strategy(),
        y in prop::collection::vec(0.0f64..2500.0, 1..30),
        start in 0i64..1000,
    ) {
        let models: Vec<ApplianceStateModel> = models
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                let hmm = m.hmm().unwrap().clone();
                ApplianceStateModel::new(format!("app{i}"), m.levels().to_vec()).unwrap().with_hmm(hmm).unwrap()
            })
            .collect();
        let agg = PowerSeries::new("aggregate", start * 60, 60, y.clone()).unwrap();
        let out = fhmm_disaggregate(&agg, &models, 1024).unwrap();
        prop_assert_eq!(out.len(), models.len());
        for (series, m) in out.iter().zip(&models) {
            prop_assert_eq!(series.label(), m.label());
            prop_assert_eq!(series.start_time(), agg.start_time());
            prop_assert_eq!(series.period(), agg.period());
            prop_assert_eq!(series.len(), agg.len());
            for v in series.values() {
                prop_assert!(m.levels().contains(v));
            }
        }
    }

    #[test]
    fn fitted_chains_are_valid(
        on in prop::collection::vec(any::<bool>(), 20..200),
        power in 50.0f64..3000.0,
        noise in prop::collection::vec(0.0f64..20.0, 200),
        seed in 0u64..100,
    ) {
        let values: Vec<f64> = on.iter().zip(&noise).map(|(&b, n)| if b { power + n } else { *n }).collect();
        prop_assume!(on.iter().any(|&b| b) && on.iter().any(|&b| !b));
        let app = PowerSeries::new("fridge", 0, 60, values.clone()).unwrap();
        let ds = AlignedDataset::new(PowerSeries::new("aggregate", 0, 60, values).unwrap(), vec![app]).unwrap();
        let models = fit_fhmm(&ds, &[2], seed).unwrap();
        let m = &models[0];
        let h = m.hmm().unwrap();
        prop_assert!(m.levels().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(m.levels()[0] < 20.0 && (m.levels()[1] - power).abs() < 20.0);
        for row in &h.transition {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| p > 0.0));
        }
        prop_assert!((h.initial.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(h.emission_std.iter().all(|&s| s >= nilm_classic::EMISSION_STD_FLOOR));
    }
}

#[test]
fn saved_model_round_trips() {
    let m = ApplianceStateModel::new("kettle", vec![0.0, 2000.0])
        .unwrap()
        .with_hmm(HmmParams {
            transition: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            emission_std: vec![10.0, 40.0],
            initial: vec![0.7, 0.3],
        })
        .unwrap();
    let text = serde_json::to_string(&m).unwrap();
    let back: ApplianceStateModel = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
}
