//! Sequential model-based optimization: experiment bookkeeping, the
//! Sobol-then-GP+EI generation strategy, and the [`optimize`] driver.
//!
//! The engine minimizes internally. For maximization the objective is
//! negated before it reaches the surrogate and every reported value is
//! mapped back to raw units.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acq::{incumbent_value, AcqError, AcquisitionSpec};
use crate::acqopt::{maximize_acquisition, AcqOptConfig, AcqOptError};
use crate::gp::{fit, FitConfig, GpError, GpModel, TrainingData};
use crate::linalg::Matrix;
use crate::qmc::{QmcError, SobolEngine};
use crate::space::{Arm, Observation, SearchSpace, SpaceError, Standardizer, ValidationReport};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Proposals closer than this (∞-norm, encoded) to an existing arm are
/// replaced by the next Sobol point.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

/// Every trial evaluates exactly one arm.
pub const ARMS_PER_TRIAL: usize = 1;

/// Metadata key holding the JSON-encoded hyperparameters of the latest fit.
pub const THETA_KEY: &str = "model.theta";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmboError {
    #[error("invalid search space: {0}")]
    InvalidSpace(ValidationReport),
    #[error("invalid generation strategy: {0}")]
    InvalidStrategy(String),
    #[error("trial budget of {0} exhausted")]
    BudgetExhausted(usize),
    #[error("trial {0} is still pending")]
    PendingTrial(usize),
    #[error("no trial with index {0}")]
    UnknownTrial(usize),
    #[error("trial {index} is already {status}")]
    TerminalTrial { index: usize, status: TrialStatus },
    #[error("no completed trials")]
    NoCompletedTrials,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Qmc(#[from] QmcError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Acq(#[from] AcqError),
    #[error(transparent)]
    AcqOpt(#[from] AcqOptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrialStatus {
    Candidate,
    Running,
    Completed,
    Failed,
}

impl TrialStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TrialStatus::Completed | TrialStatus::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Candidate => "CANDIDATE",
            TrialStatus::Running => "RUNNING",
            TrialStatus::Completed => "COMPLETED",
            TrialStatus::Failed => "FAILED",
        }
    }
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Generator {
    Sobol,
    Gpei,
    Manual,
}

impl Generator {
    pub fn as_str(self) -> &'static str {
        match self {
            Generator::Sobol => "SOBOL",
            Generator::Gpei => "GPEI",
            Generator::Manual => "MANUAL",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    index: usize,
    arm: Arm,
    status: TrialStatus,
    generator: Generator,
    observation: Option<Observation>,
    elapsed_ms: u64,
}

impl Trial {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn arm(&self) -> &Arm {
        &self.arm
    }

    pub fn status(&self) -> TrialStatus {
        self.status
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn observation(&self) -> Option<&Observation> {
        self.observation.as_ref()
    }

    /// Evaluator wall time, when the evaluator reports it; otherwise 0.
    pub fn elapsed_ms(&self) -> u64 {
        self.elapsed_ms
    }
}

/// How many initialization arms to draw and the total budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStrategy {
    pub init_arms: usize,
    pub total_trials: usize,
    pub fit: FitConfig,
    pub acqopt: AcqOptConfig,
}

impl Default for GenerationStrategy {
    fn default() -> Self {
        Self {
            init_arms: 5,
            total_trials: 20,
            fit: FitConfig::default(),
            acqopt: AcqOptConfig::default(),
        }
    }
}

impl GenerationStrategy {
    /// Default strategy with a different budget. Budgets below the default
    /// initialization size are spent entirely on Sobol arms.
    pub fn with_total_trials(total_trials: usize) -> Self {
        let base = Self::default();
        Self {
            total_trials,
            init_arms: base.init_arms.min(total_trials),
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), SmboError> {
        if self.total_trials == 0 {
            return Err(SmboError::InvalidStrategy(
                "total_trials must be >= 1".into(),
            ));
        }
        if self.init_arms > self.total_trials {
            return Err(SmboError::InvalidStrategy(
                "init_arms exceeds total_trials".into(),
            ));
        }
        self.acqopt.validate()?;
        Ok(())
    }
}

/// Why an evaluation produced no observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{kind}: {message}")]
pub struct EvalFault {
    /// Short machine-readable tag, e.g. `timeout` or `malformed_output`.
    pub kind: String,
    pub message: String,
}

impl EvalFault {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }
}

/// Something that scores arms.
pub trait Evaluator {
    fn evaluate(&mut self, arm: &Arm) -> Result<Observation, EvalFault>;

    /// Whether the loop should record the evaluation's wall time. Off by
    /// default so in-process objectives leave bit-reproducible logs.
    fn records_elapsed(&self) -> bool {
        false
    }
}

impl<F> Evaluator for F
where
    F: FnMut(&Arm) -> Result<Observation, EvalFault>,
{
    fn evaluate(&mut self, arm: &Arm) -> Result<Observation, EvalFault> {
        self(arm)
    }
}

/// The incumbent configuration and the surrogate's view of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResult {
    pub trial_index: usize,
    pub arm: Arm,
    /// Raw observed objective.
    pub observed_objective: f64,
    /// Surrogate mean at the arm, raw units.
    pub predicted_mean: f64,
    /// Surrogate standard deviation at the arm, raw units.
    pub predicted_sd: f64,
}

/// A fitted GP together with the output transform it was trained under.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub model: GpModel<f64>,
    pub standardizer: Standardizer<f64>,
    /// +1 when minimizing, −1 when maximizing.
    pub sign: f64,
}

impl Surrogate {
    /// Mean and sd at an encoded point, in raw objective units.
    pub fn predict_raw(&self, u: &[f64]) -> (f64, f64) {
        let (m, v) = self.model.predict_point(u);
        (
            self.sign * self.standardizer.invert(m),
            self.standardizer.invert_spread(v.sqrt()),
        )
    }
}

/// The full optimization history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    space: SearchSpace,
    minimize: bool,
    trials: Vec<Trial>,
    standardizer: Option<Standardizer<f64>>,
    seed: u64,
    metadata: BTreeMap<String, String>,
    sobol_cursor: u64,
}

impl Experiment {
    pub fn new(space: SearchSpace, minimize: bool, seed: u64) -> Result<Self, SmboError> {
        let report = space.validate();
        if !report.is_ok() {
            return Err(SmboError::InvalidSpace(report));
        }
        let mut metadata = BTreeMap::new();
        metadata.insert("engine_version".to_string(), ENGINE_VERSION.to_string());
        metadata.insert("seed".to_string(), seed.to_string());
        for (i, w) in report.warnings.iter().enumerate() {
            metadata.insert(format!("space.warning.{i}"), w.clone());
        }
        Ok(Self {
            space,
            minimize,
            trials: Vec::new(),
            standardizer: None,
            seed,
            metadata,
            sobol_cursor: 0,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn minimize(&self) -> bool {
        self.minimize
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn trial(&self, index: usize) -> Option<&Trial> {
        self.trials.get(index)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Standardizer used by the most recent model fit.
    pub fn standardizer(&self) -> Option<&Standardizer<f64>> {
        self.standardizer.as_ref()
    }

    fn sign(&self) -> f64 {
        if self.minimize {
            1.0
        } else {
            -1.0
        }
    }

    fn count(&self, status: TrialStatus) -> usize {
        self.trials.iter().filter(|t| t.status == status).count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &Trial> {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
    }

    fn next_sobol(&mut self) -> Result<Vec<f64>, SmboError> {
        let mut engine = SobolEngine::with_skip(self.space.dim(), self.sobol_cursor)?;
        self.sobol_cursor += 1;
        Ok(engine.next_point()?)
    }

    fn push_trial(&mut self, arm: Arm, generator: Generator) -> &Trial {
        let index = self.trials.len();
        self.trials.push(Trial {
            index,
            arm,
            status: TrialStatus::Candidate,
            generator,
            observation: None,
            elapsed_ms: 0,
        });
        &self.trials[index]
    }

    fn ensure_idle(&self) -> Result<(), SmboError> {
        match self.trials.iter().find(|t| !t.status.is_terminal()) {
            Some(t) => Err(SmboError::PendingTrial(t.index)),
            None => Ok(()),
        }
    }

    /// Proposes the next trial (status CANDIDATE).
    pub fn suggest(&mut self, strategy: &GenerationStrategy) -> Result<&Trial, SmboError> {
        strategy.validate()?;
        self.ensure_idle()?;
        let started = self.trials.len() - self.count(TrialStatus::Failed);
        if started >= strategy.total_trials {
            return Err(SmboError::BudgetExhausted(strategy.total_trials));
        }
        let index = self.trials.len();
        let name = format!("trial_{index}");
        let completed = self.count(TrialStatus::Completed);
        let running = self.count(TrialStatus::Running);

        if completed + running >= strategy.init_arms && completed > 0 {
            match self.propose_gpei(strategy, index) {
                Ok(Some(u)) => {
                    let arm = self.space.decode(&u, name)?;
                    return Ok(self.push_trial(arm, Generator::Gpei));
                }
                Ok(None) => {
                    log::info!(
                        "trial {index}: GPEI proposal duplicates an existing arm, using Sobol"
                    );
                }
                Err(e) => {
                    log::warn!("trial {index}: model-based proposal failed ({e}), using Sobol");
                    self.metadata
                        .insert(format!("trial_{index}.fallback"), e.to_string());
                }
            }
        }
        let u = self.next_sobol()?;
        let arm = self.space.decode(&u, name)?;
        Ok(self.push_trial(arm, Generator::Sobol))
    }

    /// Fits the surrogate to all completed trials.
    pub fn fit_surrogate(&self, fit_cfg: &FitConfig) -> Result<Surrogate, SmboError> {
        let done: Vec<&Trial> = self.completed().collect();
        if done.is_empty() {
            return Err(SmboError::NoCompletedTrials);
        }
        let sign = self.sign();
        let rows = done
            .iter()
            .map(|t| self.space.encode(&t.arm).map(|u| u.into_inner()))
            .collect::<Result<Vec<_>, _>>()?;
        let obs: Vec<&Observation> = done.iter().filter_map(|t| t.observation.as_ref()).collect();
        let ys: Vec<f64> = obs.iter().map(|o| sign * o.objective).collect();
        let standardizer = Standardizer::fit(&ys)?;
        let zs = ys.iter().map(|&y| standardizer.apply(y)).collect();
        let mut data = TrainingData::new(Matrix::from_rows(&rows), zs)?;
        if obs.iter().all(|o| o.sem.is_some()) {
            let scale = standardizer.scale();
            let noise = obs
                .iter()
                .map(|o| (o.sem.unwrap_or(0.0) / scale).powi(2))
                .collect();
            data = data.with_fixed_noise(noise)?;
        }
        let model = fit(data, fit_cfg)?;
        Ok(Surrogate {
            model,
            standardizer,
            sign,
        })
    }

    fn fit_seed(&self, tag: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tag as u64)
    }

    /// Fits the GP and maximizes plug-in EI. `Ok(None)` means the proposal
    /// duplicated an existing arm.
    fn propose_gpei(
        &mut self,
        strategy: &GenerationStrategy,
        index: usize,
    ) -> Result<Option<Vec<f64>>, SmboError> {
        let fit_cfg = FitConfig {
            seed: self.fit_seed(index),
            ..strategy.fit.clone()
        };
        let surrogate = self.fit_surrogate(&fit_cfg)?;
        self.standardizer = Some(surrogate.standardizer);
        let theta = serde_json::to_string(surrogate.model.theta()).unwrap_or_default();
        self.metadata.insert(THETA_KEY.to_string(), theta);

        let incumbent = incumbent_value(&surrogate.model)?;
        let spec = AcquisitionSpec::Ei { incumbent };
        let acq_cfg = AcqOptConfig {
            seed: self.seed,
            ..strategy.acqopt.clone()
        };
        let (u, _) = maximize_acquisition(&surrogate.model, &spec, self.space.dim(), &acq_cfg)?;

        let candidate = self.space.decode(&u, "probe")?;
        let encoded = self.space.encode(&candidate)?;
        for t in &self.trials {
            let existing = self.space.encode(&t.arm)?;
            if encoded.max_abs_diff(existing.as_slice()) <= DUPLICATE_TOLERANCE {
                return Ok(None);
            }
        }
        Ok(Some(u))
    }

    /// Adds a hand-specified arm as a CANDIDATE trial.
    pub fn add_manual_trial(&mut self, mut arm: Arm) -> Result<&Trial, SmboError> {
        self.ensure_idle()?;
        self.space.encode(&arm)?;
        arm.name = format!("trial_{}", self.trials.len());
        Ok(self.push_trial(arm, Generator::Manual))
    }

    fn open_trial(&mut self, index: usize) -> Result<&mut Trial, SmboError> {
        let trial = self
            .trials
            .get_mut(index)
            .ok_or(SmboError::UnknownTrial(index))?;
        if trial.status.is_terminal() {
            return Err(SmboError::TerminalTrial {
                index,
                status: trial.status,
            });
        }
        Ok(trial)
    }

    /// CANDIDATE → RUNNING.
    pub fn start_trial(&mut self, index: usize) -> Result<(), SmboError> {
        let trial = self.open_trial(index)?;
        trial.status = TrialStatus::Running;
        Ok(())
    }

    /// Stores an observation. A non-finite objective (or invalid sem) marks
    /// the trial FAILED instead and records the fault in metadata.
    pub fn complete_trial(
        &mut self,
        index: usize,
        observation: Observation,
    ) -> Result<&Trial, SmboError> {
        self.open_trial(index)?;
        if !observation.is_valid() {
            let fault = EvalFault::new(
                "invalid_observation",
                format!(
                    "objective {} sem {:?}",
                    observation.objective, observation.sem
                ),
            );
            return self.fail_trial(index, &fault);
        }
        let trial = self.open_trial(index)?;
        trial.status = TrialStatus::Completed;
        trial.observation = Some(observation);
        Ok(&self.trials[index])
    }

    /// Marks a trial FAILED, recording why.
    pub fn fail_trial(&mut self, index: usize, fault: &EvalFault) -> Result<&Trial, SmboError> {
        let trial = self.open_trial(index)?;
        trial.status = TrialStatus::Failed;
        trial.observation = None;
        self.metadata
            .insert(format!("trial_{index}.fault"), fault.to_string());
        Ok(&self.trials[index])
    }

    fn set_elapsed(&mut self, index: usize, ms: u64) {
        if let Some(t) = self.trials.get_mut(index) {
            t.elapsed_ms = ms;
        }
    }

    /// The best completed arm.
    ///
    /// With noise-free history (no positive sem anywhere) this is the best
    /// raw observation; otherwise it is the completed arm with the best
    /// posterior mean under a freshly fitted model.
    pub fn best_result(&self) -> Result<BestResult, SmboError> {
        self.best_result_with(&FitConfig::default())
    }

    pub fn best_result_with(&self, fit_cfg: &FitConfig) -> Result<BestResult, SmboError> {
        let done: Vec<&Trial> = self.completed().collect();
        if done.is_empty() {
            return Err(SmboError::NoCompletedTrials);
        }
        let sign = self.sign();
        let noisy = done
            .iter()
            .any(|t| t.observation.as_ref().is_some_and(Observation::is_noisy));
        let fit_cfg = FitConfig {
            seed: self.fit_seed(self.trials.len()),
            ..fit_cfg.clone()
        };
        let surrogate = match self.fit_surrogate(&fit_cfg) {
            Ok(s) => Some(s),
            Err(e) if !noisy => {
                log::warn!("could not fit final model ({e}); reporting raw observations only");
                None
            }
            Err(e) => return Err(e),
        };

        let objective = |t: &Trial| t.observation.as_ref().map_or(f64::NAN, |o| o.objective);
        let encoded = |t: &Trial| self.space.encode(&t.arm).map(|u| u.into_inner());

        let mut best: Option<(&Trial, f64)> = None;
        for t in &done {
            let key = match (&surrogate, noisy) {
                (Some(s), true) => sign * s.predict_raw(&encoded(t)?).0,
                _ => sign * objective(t),
            };
            if best.is_none_or(|(_, k)| key < k) {
                best = Some((t, key));
            }
        }
        let (trial, _) = best.ok_or(SmboError::NoCompletedTrials)?;
        let observed = objective(trial);
        let (predicted_mean, predicted_sd) = match &surrogate {
            Some(s) => s.predict_raw(&encoded(trial)?),
            None => (observed, 0.0),
        };
        Ok(BestResult {
            trial_index: trial.index,
            arm: trial.arm.clone(),
            observed_objective: observed,
            predicted_mean,
            predicted_sd,
        })
    }

    /// Runs one suggest → evaluate → complete cycle.
    pub fn step<E: Evaluator + ?Sized>(
        &mut self,
        strategy: &GenerationStrategy,
        evaluator: &mut E,
    ) -> Result<&Trial, SmboError> {
        let index = self.suggest(strategy)?.index;
        self.start_trial(index)?;
        let arm = self.trials[index].arm.clone();
        let started = Instant::now();
        let outcome = evaluator.evaluate(&arm);
        if evaluator.records_elapsed() {
            let ms = u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX);
            self.set_elapsed(index, ms);
        }
        match outcome {
            Ok(obs) => self.complete_trial(index, obs),
            Err(fault) => {
                log::warn!("trial {index} failed: {fault}");
                self.fail_trial(index, &fault)
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("no completed trials")]
    NoCompletedTrials { experiment: Box<Experiment> },
    #[error(transparent)]
    Smbo(#[from] SmboError),
}

/// Runs the full loop with the default strategy and `total_trials` budget.
pub fn optimize<E: Evaluator>(
    space: SearchSpace,
    evaluator: E,
    minimize: bool,
    total_trials: usize,
    seed: u64,
) -> Result<(BestResult, Experiment), OptimizeError> {
    optimize_with(
        space,
        evaluator,
        minimize,
        seed,
        &GenerationStrategy::with_total_trials(total_trials),
    )
}

/// Runs `strategy.total_trials` trials. Failed evaluations consume budget.
pub fn optimize_with<E: Evaluator>(
    space: SearchSpace,
    mut evaluator: E,
    minimize: bool,
    seed: u64,
    strategy: &GenerationStrategy,
) -> Result<(BestResult, Experiment), OptimizeError> {
    strategy.validate()?;
    let mut experiment = Experiment::new(space, minimize, seed)?;
    for _ in 0..strategy.total_trials {
        experiment.step(strategy, &mut evaluator)?;
    }
    if experiment.count(TrialStatus::Completed) == 0 {
        return Err(OptimizeError::NoCompletedTrials {
            experiment: Box::new(experiment),
        });
    }
    let best = experiment.best_result_with(&strategy.fit)?;
    Ok((best, experiment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParameterSpec;

    fn unit_space(d: usize) -> SearchSpace {
        SearchSpace::new(
            (0..d)
                .map(|i| ParameterSpec::range_float(format!("x{i}"), 0.0, 1.0))
                .collect(),
        )
    }

    #[test]
    fn new_experiment_is_empty_and_stamped() {
        let e = Experiment::new(unit_space(3), true, 7).unwrap();
        assert!(e.trials().is_empty());
        assert_eq!(e.metadata()["seed"], "7");
        assert_eq!(e.metadata()["engine_version"], ENGINE_VERSION);
        let again = Experiment::new(unit_space(3), true, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn invalid_space_is_rejected() {
        let bad = SearchSpace::new(vec![ParameterSpec::range_float("x", 1.0, 0.0)]);
        match Experiment::new(bad, true, 0) {
            Err(SmboError::InvalidSpace(r)) => assert_eq!(r.violations.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
        let fixed = SearchSpace::new(vec![ParameterSpec::fixed("k", 1.0)]);
        assert!(matches!(
            Experiment::new(fixed, true, 0),
            Err(SmboError::InvalidSpace(_))
        ));
    }

    #[test]
    fn first_suggestion_is_sobol_center() {
        let mut e = Experiment::new(unit_space(2), true, 0).unwrap();
        let t = e.suggest(&GenerationStrategy::default()).unwrap();
        assert_eq!(t.status(), TrialStatus::Candidate);
        assert_eq!(t.generator(), Generator::Sobol);
        assert_eq!(t.arm().name, "trial_0");
        assert_eq!(t.arm().get_f64("x0"), Some(0.5));
        assert_eq!(t.arm().get_f64("x1"), Some(0.5));
        // a second suggestion while one is pending is refused
        assert_eq!(
            e.suggest(&GenerationStrategy::default()).unwrap_err(),
            SmboError::PendingTrial(0)
        );
    }

    #[test]
    fn sixth_trial_is_model_based() {
        let strategy = GenerationStrategy::default();
        let mut e = Experiment::new(unit_space(2), true, 0).unwrap();
        for i in 0..5 {
            let t = e.suggest(&strategy).unwrap();
            assert_eq!(t.generator(), Generator::Sobol);
            let x = t.arm().get_f64("x0").unwrap();
            e.complete_trial(i, Observation::new((x - 0.2).powi(2)))
                .unwrap();
        }
        assert_eq!(e.suggest(&strategy).unwrap().generator(), Generator::Gpei);
        assert!(e.metadata().contains_key(THETA_KEY));
    }

    #[test]
    fn completion_transitions() {
        let strategy = GenerationStrategy::default();
        let mut e = Experiment::new(unit_space(1), true, 0).unwrap();
        e.suggest(&strategy).unwrap();
        assert_eq!(
            e.complete_trial(0, Observation::new(1.0)).unwrap().status(),
            TrialStatus::Completed
        );
        assert!(matches!(
            e.complete_trial(0, Observation::new(1.0)),
            Err(SmboError::TerminalTrial { index: 0, .. })
        ));
        assert_eq!(
            e.complete_trial(5, Observation::new(1.0)).unwrap_err(),
            SmboError::UnknownTrial(5)
        );
        e.suggest(&strategy).unwrap();
        e.start_trial(1).unwrap();
        let t = e.complete_trial(1, Observation::new(f64::NAN)).unwrap();
        assert_eq!(t.status(), TrialStatus::Failed);
        assert!(t.observation().is_none());
        assert!(e.metadata()["trial_1.fault"].starts_with("invalid_observation"));
    }

    #[test]
    fn budget_counts_non_failed_trials() {
        let strategy = GenerationStrategy {
            init_arms: 1,
            total_trials: 2,
            ..GenerationStrategy::default()
        };
        let mut e = Experiment::new(unit_space(1), true, 0).unwrap();
        e.suggest(&strategy).unwrap();
        e.fail_trial(0, &EvalFault::new("boom", "x")).unwrap();
        e.suggest(&strategy).unwrap();
        e.complete_trial(1, Observation::new(1.0)).unwrap();
        e.suggest(&strategy).unwrap();
        e.complete_trial(2, Observation::new(2.0)).unwrap();
        assert_eq!(
            e.suggest(&strategy).unwrap_err(),
            SmboError::BudgetExhausted(2)
        );
    }

    #[test]
    fn best_result_noise_free() {
        let strategy = GenerationStrategy::default();
        let mut e = Experiment::new(unit_space(1), true, 0).unwrap();
        assert_eq!(e.best_result().unwrap_err(), SmboError::NoCompletedTrials);
        e.suggest(&strategy).unwrap();
        e.complete_trial(0, Observation::new(3.0)).unwrap();
        assert_eq!(e.best_result().unwrap().trial_index, 0);
        e.suggest(&strategy).unwrap();
        e.complete_trial(1, Observation::new(1.0)).unwrap();
        let best = e.best_result().unwrap();
        assert_eq!(best.trial_index, 1);
        assert_eq!(best.observed_objective, 1.0);
        assert!(best.predicted_sd >= 0.0);
    }

    #[test]
    fn failing_evaluator_reports_no_completed_trials() {
        let always_fail = |_: &Arm| Err(EvalFault::new("crash", "nope"));
        match optimize(unit_space(2), always_fail, true, 20, 0) {
            Err(OptimizeError::NoCompletedTrials { experiment }) => {
                assert_eq!(experiment.trials().len(), 20);
                assert!(experiment
                    .trials()
                    .iter()
                    .all(|t| t.status() == TrialStatus::Failed));
            }
            other => panic!("unexpected {:?}", other.map(|r| r.0)),
        }
    }

    #[test]
    fn manual_trial_is_validated() {
        let mut e = Experiment::new(unit_space(1), true, 0).unwrap();
        assert!(e.add_manual_trial(Arm::new("x", [("x0", 2.0)])).is_err());
        let t = e
            .add_manual_trial(Arm::new("mine", [("x0", 0.25)]))
            .unwrap();
        assert_eq!(t.generator(), Generator::Manual);
        assert_eq!(t.arm().name, "trial_0");
    }
}
