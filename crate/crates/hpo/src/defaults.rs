//! The built-in search space over every model family.

use nilm_core::Family;

use crate::space::{ChoiceOption, Configuration, ParamSpec, SearchSpace, Value};

pub const LEARNING_RATES: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn neural_common() -> Vec<ParamSpec> {
    vec![
        ParamSpec::choice_of("optimizer", ["adam", "nadam"]),
        ParamSpec::choice_of("learning_rate", LEARNING_RATES),
        ParamSpec::choice_of("loss", ["mse", "mae"]),
    ]
}

fn family_params(family: Family) -> Vec<ParamSpec> {
    let tree = || {
        vec![
            ParamSpec::choice_of("criterion", ["squared_error", "friedman_mse"]),
            ParamSpec::quniform("min_samples_split", 10.0, 20.0, 1.0),
        ]
    };
    let dropout = || ParamSpec::uniform("dropout", 0.1, 0.3);
    match family {
        Family::Dt => tree(),
        Family::Rf => {
            let mut p = tree();
            p.push(ParamSpec::quniform("n_estimators", 10.0, 30.0, 1.0));
            p
        }
        Family::Fcnn | Family::Dae => {
            let mut p = neural_common();
            p.push(ParamSpec::quniform("num_layers", 5.0, 7.0, 1.0));
            p.push(dropout());
            p
        }
        Family::RnnGru | Family::Lstm => {
            let mut p = neural_common();
            p.push(ParamSpec::choice_of("sequence_length", [10i64, 20, 50]));
            p.push(dropout());
            p
        }
        Family::WindowGru | Family::Seq2point | Family::Seq2seq => {
            let mut p = neural_common();
            p.push(ParamSpec::choice_of("window_size", [20i64, 50, 100]));
            p.push(dropout());
            p
        }
        Family::Fhmm | Family::Co => vec![ParamSpec::choice_of("k", [2i64, 3])],
    }
}

/// Root `model` choice over all eleven families, each carrying its own
/// hyperparameters (keys such as `rf.n_estimators`).
pub fn default_space() -> SearchSpace {
    let options = Family::ALL
        .iter()
        .map(|&f| ChoiceOption {
            value: Value::from(f.name()),
            subspace: family_params(f),
        })
        .collect();
    SearchSpace::new(vec![ParamSpec::choice("model", options)]).expect("built-in space is valid")
}

/// The default space with `model` limited to the neural families.
pub fn neural_space() -> SearchSpace {
    let mut space = default_space();
    let neural: Vec<Value> = Family::ALL
        .iter()
        .filter(|f| f.is_neural())
        .map(|f| Value::from(f.name()))
        .collect();
    space.restrict("model", &neural).expect("neural families are in the default space");
    space
}

/// Deterministic stand-in objective over [`neural_space`] configurations:
/// `(log10 lr + 3)^2 + [nadam] 0.5 + 0.1 |window - 50| / 30`, where the
/// window is the family's `window_size` or `sequence_length` (50 for
/// families with neither).
pub fn benchmark_loss(config: &Configuration) -> f64 {
    let model = config.get("model").and_then(Value::as_str).unwrap_or("");
    let get = |name: &str| config.get(&format!("{model}.{name}"));
    let lr = get("learning_rate").and_then(Value::as_f64).unwrap_or(1e-3);
    let optimizer = get("optimizer").and_then(Value::as_str).unwrap_or("adam");
    let window = get("window_size")
        .or_else(|| get("sequence_length"))
        .and_then(Value::as_f64)
        .unwrap_or(50.0);
    let offset = if optimizer == "nadam" { 0.5 } else { 0.0 };
    (lr.log10() + 3.0).powi(2) + offset + 0.1 * (window - 50.0).abs() / 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_per_family() {
        let keys: Vec<String> = default_space().keys().into_iter().map(|(k, _)| k).collect();
        assert!(keys.contains(&"model".to_string()));
        assert!(keys.contains(&"rf.n_estimators".to_string()));
        assert!(keys.contains(&"lstm.sequence_length".to_string()));
        assert!(keys.contains(&"seq2seq.window_size".to_string()));
        assert!(keys.contains(&"co.k".to_string()));
        assert!(!keys.contains(&"dt.n_estimators".to_string()));
        assert_eq!(keys.iter().filter(|k| k.ends_with(".learning_rate")).count(), 7);
    }

    #[test]
    fn benchmark_minimum() {
        let c: Configuration = [
            ("model".to_string(), Value::from("seq2point")),
            ("seq2point.learning_rate".to_string(), Value::from(1e-3)),
            ("seq2point.optimizer".to_string(), Value::from("adam")),
            ("seq2point.window_size".to_string(), Value::from(50i64)),
        ]
        .into();
        assert_eq!(benchmark_loss(&c), 0.0);
        let mut worse = c.clone();
        worse.insert("seq2point.optimizer".into(), Value::from("nadam"));
        worse.insert("seq2point.window_size".into(), Value::from(20i64));
        assert!((benchmark_loss(&worse) - 0.6).abs() < 1e-12);
    }
}
