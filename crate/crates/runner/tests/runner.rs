use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use nilm_core::{Family, SplitSpec};
use nilm_hpo::{best_trial, Value};
use nilm_runner::config::{DataSource, ExperimentConfig, Mode};
use nilm_runner::log::TrialLog;
use nilm_runner::{
    emit_report, generate_synthetic, history_from_records, replay_log, run_automl, run_single, ReplayError,
    SyntheticAppliance, SyntheticHouseSpec, TrialLogRecord,
};

const DAY: i64 = 86_400;

fn house(noise_std: f64) -> SyntheticHouseSpec {
    let app = |label: &str, on_power, stay_on, stay_off| SyntheticAppliance {
        label: label.into(),
        on_power,
        stay_on,
        stay_off,
    };
    SyntheticHouseSpec {
        appliances: vec![app("fridge", 150.0, 0.9, 0.9), app("kettle", 2000.0, 0.8, 0.97)],
        noise_std,
        start: 0,
        samples: 3 * 1440,
        period: 60,
        seed: 3,
    }
}

fn config(dir: &Path, mode: Mode, noise_std: f64) -> ExperimentConfig {
    let split = SplitSpec::new(0, DAY, 2 * DAY, 3 * DAY).unwrap();
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic(house(noise_std)), split, mode, dir.to_path_buf());
    cfg.training.epochs = 1;
    cfg.training.hidden = 8;
    cfg.training.train_stride = 20;
    cfg
}

/// Synthetic channels are exactly two-valued, so three states cannot be fit.
fn classic_space(cfg: &mut ExperimentConfig) {
    cfg.space = vec![
        ("model".into(), vec![Value::from("co"), Value::from("fhmm")]),
        ("co.k".into(), vec![Value::from(2i64)]),
        ("fhmm.k".into(), vec![Value::from(2i64)]),
    ];
}

#[test]
fn config_file_with_relative_synthetic_spec() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("house.synth"),
        "days = 3\nseed = 3\nappliance.kettle.on_power = 2000\nappliance.kettle.stay_on = 0.8\nappliance.kettle.stay_off = 0.97\n",
    )
    .unwrap();
    let text = "synthetic = house.synth\n\
                split.train_start = 1970-01-01\nsplit.train_end = 1970-01-02\n\
                split.val_end = 1970-01-03\nsplit.test_end = 1970-01-04\n\
                mode = automl\nspace.model = co, fhmm\nspace.co.k = 2\nmax_evals = 4\n\
                threshold.kettle = 100\noutput = out\n";
    let cfg = ExperimentConfig::parse(text, dir.path()).unwrap();
    assert_eq!(cfg.output, dir.path().join("out"));
    assert_eq!(cfg.split.val_end, 2 * DAY);
    assert_eq!(cfg.threshold_for("kettle"), 100.0);
    assert_eq!(cfg.threshold_for("fridge"), 10.0);
    assert_eq!(cfg.space[0], ("co.k".to_string(), vec![Value::from(2i64)]));
    let DataSource::Synthetic(spec) = &cfg.data else { panic!("expected synthetic data") };
    assert_eq!(spec.samples, 3 * 1440);
    assert_eq!(spec.appliances[0].label, "kettle");
}

#[test]
fn noise_free_house_is_solved_by_classic_models() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Mode::Single, 0.0);
    cfg.family = Some(Family::Co);
    let co = run_single(&cfg).unwrap();
    assert_eq!(co.test.mae, 0.0);
    assert_eq!(co.test_accesses, vec!["single-run evaluation".to_string()]);
    assert!(dir.path().join("report.json").exists());

    cfg.family = Some(Family::Fhmm);
    let fhmm = run_single(&cfg).unwrap();
    assert_eq!(fhmm.test.accuracy, 1.0);
}

#[test]
fn single_trial_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Mode::Automl, 20.0);
    classic_space(&mut cfg);
    cfg.max_evals = 1;
    let out = run_automl(&cfg).unwrap();
    assert_eq!(out.history.len(), 1);
    assert_eq!(out.best.id, 0);
    assert_eq!(out.test_accesses_before_final, 0);
    assert_eq!(replay_log(&dir.path().join("trials.jsonl")).unwrap().len(), 1);
    let fin: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("final.json")).unwrap()).unwrap();
    assert_eq!(fin["best_trial_id"], 0);
    assert_eq!(fin["test_accesses_before_final"], 0);
}

#[test]
fn classic_search_on_noise_free_house_reaches_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Mode::Automl, 0.0);
    classic_space(&mut cfg);
    cfg.max_evals = 6;
    let out = run_automl(&cfg).unwrap();
    assert_eq!(out.best.loss, 0.0);
    assert_eq!(out.test.mae, 0.0);
    assert!(out.records.iter().all(|r| r.test_mae.is_none()));
}

#[test]
fn replayed_log_reconstructs_best_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Mode::Automl, 40.0);
    cfg.space = vec![("model".into(), vec![Value::from("co"), Value::from("fhmm"), Value::from("dt")])];
    cfg.max_evals = 8;
    let out = run_automl(&cfg).unwrap();
    let records = replay_log(&dir.path().join("trials.jsonl")).unwrap();
    assert_eq!(records, out.records);
    let history = history_from_records(&records).unwrap();
    let best = best_trial(&history).unwrap();
    assert_eq!(best.id, out.best.id);
    assert_eq!(best.loss, out.best.loss);
    assert_eq!(best.config, out.best.config);
    assert_eq!(best.seed, out.best.seed);
}

fn record(id: usize, loss: f64) -> TrialLogRecord {
    TrialLogRecord {
        trial_id: id,
        family: "co".into(),
        params: BTreeMap::from([("model".to_string(), Value::from("co")), ("co.k".to_string(), Value::from(2i64))]),
        val_mae: Some(loss),
        test_mae: None,
        accuracy: Some(0.9),
        wall_time_s: 0.01,
        status: "ok".into(),
        seed: id as u64,
        error: None,
    }
}

#[test]
fn log_replay_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.jsonl");
    let mut log = TrialLog::create(&path).unwrap();
    let records: Vec<TrialLogRecord> = (0..30).map(|i| record(i, 100.0 - i as f64 * 0.5)).collect();
    for r in &records {
        log.append(r).unwrap();
    }
    drop(log);
    assert_eq!(replay_log(&path).unwrap(), records);
    let history = history_from_records(&records).unwrap();
    assert_eq!(best_trial(&history).unwrap().id, 29);

    // Truncate mid-way through the last line.
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() - 20]).unwrap();
    match replay_log(&path) {
        Err(ReplayError::Corrupt { line, parsed, .. }) => {
            assert_eq!(line, 30);
            assert_eq!(parsed, records[..29]);
        }
        other => panic!("expected a corrupt-line error, got {other:?}"),
    }

    fs::write(&path, "").unwrap();
    assert!(replay_log(&path).unwrap().is_empty());
}

#[test]
fn fully_fixed_space_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Mode::Automl, 40.0);
    cfg.seed = 9;
    cfg.max_evals = 1;
    cfg.space = vec![
        ("model".into(), vec![Value::from("dt")]),
        ("dt.criterion".into(), vec![Value::from("friedman_mse")]),
        ("dt.min_samples_split".into(), vec![Value::from(12i64)]),
    ];
    let auto = run_automl(&cfg).unwrap();

    let single_dir = tempfile::tempdir().unwrap();
    let mut single = config(single_dir.path(), Mode::Single, 40.0);
    single.seed = 9;
    single.family = Some(Family::Dt);
    single.params = BTreeMap::from([
        ("criterion".to_string(), Value::from("friedman_mse")),
        ("min_samples_split".to_string(), Value::from(12i64)),
    ]);
    let one = run_single(&single).unwrap();
    assert_eq!(auto.test, one.test);
}

#[test]
fn report_is_deterministic() {
    let records: Vec<TrialLogRecord> = (0..12).map(|i| record(i, ((i * 7) % 5) as f64)).collect();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = emit_report(&records, a.path()).unwrap();
    let pb = emit_report(&records, b.path()).unwrap();
    assert_eq!(pa.len(), pb.len());
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn synthetic_house_matches_spec_file() {
    let spec = house(0.0);
    let ds = generate_synthetic(&spec).unwrap();
    assert_eq!(ds.len(), spec.samples);
    assert_eq!(ds.appliances().len(), 2);
    for i in 0..ds.len() {
        let sum: f64 = ds.appliances().iter().map(|a| a.values()[i]).sum();
        assert_eq!(ds.aggregate().values()[i], sum);
    }
}

fn nilm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nilm")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "dataset = d.csv\nmode = single\nfamily = co\nepocks = 3\n").unwrap();
    let out = nilm(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let missing = nilm(&["automl", dir.path().join("nope.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(nilm(&["frobnicate"]).status.code(), Some(1));

    let synth = dir.path().join("house.synth");
    fs::write(&synth, "days = 3\nappliance.kettle.on_power = 2000\nappliance.kettle.stay_on = 0.8\nappliance.kettle.stay_off = 0.97\n").unwrap();
    let good = dir.path().join("good.cfg");
    fs::write(
        &good,
        "synthetic = house.synth\nsplit.train_start = 0\nsplit.train_end = 86400\nsplit.val_end = 172800\n\
         split.test_end = 259200\nmode = single\nfamily = co\noutput = out\n",
    )
    .unwrap();
    let ok = nilm(&["run", good.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("out/report.json").exists());

    // A split past the end of the data is a config error; a model that
    // cannot be fit is a runtime error.
    let text = fs::read_to_string(&good).unwrap();
    fs::write(&good, text.replace("259200", "2592000")).unwrap();
    assert_eq!(nilm(&["run", good.to_str().unwrap()]).status.code(), Some(1));
    fs::write(&good, text + "params.k = 3\n").unwrap();
    let failed = nilm(&["run", good.to_str().unwrap()]);
    assert_eq!(failed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("fewer distinct values"));
}
