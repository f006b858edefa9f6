//! Executes a run: optimization loop, `trials.csv`, `report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gpbo::{optimize_with, Experiment, GenerationStrategy, OptimizeError, ParamValue, TrialStatus};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Objective, RunConfig};
use crate::evaluator::CommandEvaluator;
use crate::triallog::{write_trial_log, LogError};

pub const TRIALS_FILE: &str = "trials.csv";
pub const REPORT_FILE: &str = "report.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_COMPLETED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub best_arm: BTreeMap<String, ParamValue>,
    pub observed_objective: f64,
    pub predicted_mean: f64,
    pub predicted_sd: f64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub seed: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("no trial completed ({n_failed} of {n_trials} failed)")]
    NoCompletedTrials { n_trials: usize, n_failed: usize },
    #[error("cannot create output directory {}: {source}", path.display())]
    OutDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Engine(#[from] gpbo::SmboError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Engine(gpbo::SmboError::InvalidSpace(_)) => EXIT_CONFIG,
            _ => EXIT_NO_COMPLETED,
        }
    }
}

/// Runs the loop and returns the experiment without touching the disk.
pub fn run_in_memory(cfg: &RunConfig) -> Result<(Option<gpbo::BestResult>, Experiment), RunError> {
    let strategy = GenerationStrategy::with_total_trials(cfg.total_trials);
    let result = match &cfg.objective {
        Objective::Builtin(b) => optimize_with(
            cfg.space.clone(),
            b.clone(),
            cfg.minimize,
            cfg.seed,
            &strategy,
        ),
        Objective::Command(spec) => optimize_with(
            cfg.space.clone(),
            CommandEvaluator { spec: spec.clone() },
            cfg.minimize,
            cfg.seed,
            &strategy,
        ),
    };
    match result {
        Ok((best, exp)) => Ok((Some(best), exp)),
        Err(OptimizeError::NoCompletedTrials { experiment }) => Ok((None, *experiment)),
        Err(OptimizeError::Smbo(e)) => Err(e.into()),
    }
}

/// Runs `cfg`, writing `trials.csv` (always) and `report.json` (when at
/// least one trial completed) under `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let (best, experiment) = run_in_memory(cfg)?;

    fs::create_dir_all(&cfg.out_dir).map_err(|source| RunError::OutDir {
        path: cfg.out_dir.clone(),
        source,
    })?;
    write_trial_log(&experiment, &cfg.out_dir.join(TRIALS_FILE))?;

    let n_trials = experiment.trials().len();
    let n_failed = experiment
        .trials()
        .iter()
        .filter(|t| t.status() == TrialStatus::Failed)
        .count();
    let best = best.ok_or(RunError::NoCompletedTrials { n_trials, n_failed })?;
    let report = RunReport {
        best_arm: best.arm.values,
        observed_objective: best.observed_objective,
        predicted_mean: best.predicted_mean,
        predicted_sd: best.predicted_sd,
        n_trials,
        n_failed,
        seed: cfg.seed,
        wall_ms: u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX),
    };
    write_report(&report, &cfg.out_dir.join(REPORT_FILE))?;
    Ok(report)
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| RunError::Write {
        path: path.to_path_buf(),
        source,
    })
}
