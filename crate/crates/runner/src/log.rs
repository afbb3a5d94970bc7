//! The JSON-lines trial log: one object per trial, appended as trials
//! complete.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nilm_hpo::{Trial, TrialStatus, Value};

use crate::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLogRecord {
    pub trial_id: usize,
    pub family: String,
    /// The full configuration, keyed as in the search space.
    pub params: BTreeMap<String, Value>,
    /// `null` for failed trials.
    pub val_mae: Option<f64>,
    /// Only set on the final evaluation of the best configuration.
    pub test_mae: Option<f64>,
    /// Validation on/off accuracy.
    pub accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub status: String,
    pub seed: u64,
    pub error: Option<String>,
}

impl TrialLogRecord {
    pub fn from_trial(trial: &Trial, wall_time_s: f64) -> Self {
        let ok = trial.status == TrialStatus::Ok;
        Self {
            trial_id: trial.id,
            family: trial
                .config
                .get("model")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            params: trial.config.clone(),
            val_mae: ok.then_some(trial.loss),
            test_mae: None,
            accuracy: trial.aux.get("accuracy").copied(),
            wall_time_s,
            status: trial.status.as_str().to_string(),
            seed: trial.seed,
            error: trial.error.clone(),
        }
    }

    pub fn to_trial(&self) -> Result<Trial> {
        let status = match self.status.as_str() {
            "ok" => TrialStatus::Ok,
            "failed" => TrialStatus::Failed,
            s => return Err(RunnerError::Runtime(format!("trial {}: unknown status `{s}`", self.trial_id))),
        };
        let loss = match (status, self.val_mae) {
            (TrialStatus::Ok, Some(l)) => l,
            (TrialStatus::Ok, None) => {
                return Err(RunnerError::Runtime(format!("trial {}: ok without val_mae", self.trial_id)))
            }
            (TrialStatus::Failed, _) => f64::INFINITY,
        };
        Ok(Trial {
            id: self.trial_id,
            config: self.params.clone(),
            loss,
            aux: self.accuracy.map(|a| ("accuracy".to_string(), a)).into_iter().collect(),
            status,
            seed: self.seed,
            error: self.error.clone(),
        })
    }
}

/// Append-only writer; every record is flushed before `append` returns.
pub struct TrialLog {
    path: PathBuf,
    file: File,
}

impl TrialLog {
    /// Creates (or truncates) the log at `path`.
    pub fn create(path: &Path) -> Result<Self> {
        File::create(path).map_err(RunnerError::io(path))?;
        let file = OpenOptions::new().append(true).open(path).map_err(RunnerError::io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, record: &TrialLogRecord) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| RunnerError::Runtime(e.to_string()))?;
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(RunnerError::io(&self.path))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot read trial log: {0}")]
    Io(#[from] std::io::Error),

    /// A corrupt line, with the records read before it.
    #[error("trial log line {line}: {reason}")]
    Corrupt {
        line: usize,
        reason: String,
        parsed: Vec<TrialLogRecord>,
    },
}

impl From<ReplayError> for RunnerError {
    fn from(e: ReplayError) -> Self {
        RunnerError::Runtime(e.to_string())
    }
}

/// Reads every record in file order. Blank lines are skipped.
pub fn replay_log(path: &Path) -> Result<Vec<TrialLogRecord>, ReplayError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialLogRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => {
                return Err(ReplayError::Corrupt {
                    line: i + 1,
                    reason: e.to_string(),
                    parsed: out,
                })
            }
        }
    }
    Ok(out)
}

/// The optimizer's view of a replayed log, sorted by trial id.
pub fn history_from_records(records: &[TrialLogRecord]) -> Result<Vec<Trial>> {
    let mut trials = records.iter().map(TrialLogRecord::to_trial).collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| t.id);
    Ok(trials)
}
