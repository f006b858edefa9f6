//! Run configuration: a strict JSON schema.
//!
//! ```json
//! {
//!   "space": [
//!     {"type": "range", "name": "w_FG", "bounds": [0.0, 1.0]},
//!     {"type": "range", "name": "layers", "bounds": [1, 4], "value_type": "int"},
//!     {"type": "range", "name": "lr", "bounds": [1e-4, 1e-1], "log_scale": true},
//!     {"type": "choice", "name": "act", "values": ["relu", "tanh"]},
//!     {"type": "fixed", "name": "epochs", "value": 10}
//!   ],
//!   "objective": {"builtin": {"name": "groupweights3d", "params": {"noise_sd": 0.01}}},
//!   "minimize": true,
//!   "total_trials": 20,
//!   "seed": 0,
//!   "out_dir": "out"
//! }
//! ```
//!
//! `objective` holds exactly one of `builtin` or
//! `command: {"program": "...", "args": [...], "timeout_s": 60}`.
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use gpbo::{ParamValue, ParameterSpec, RangeType, SearchSpace, ValidationReport};
use serde::Deserialize;
use serde_json::error::Category;
use thiserror::Error;

use crate::bench::Builtin;
use crate::evaluator::CommandSpec;

pub const DEFAULT_TOTAL_TRIALS: usize = 20;
pub const DEFAULT_TIMEOUT_S: f64 = 600.0;
pub const DEFAULT_OUT_DIR: &str = "gpbo-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("invalid search space: {0}")]
    InvalidSpace(ValidationReport),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Builtin(Builtin),
    Command(CommandSpec),
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub space: SearchSpace,
    pub objective: Objective,
    pub minimize: bool,
    pub total_trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub total_trials: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    space: Vec<RawParam>,
    objective: RawObjective,
    #[serde(default = "default_true")]
    minimize: bool,
    total_trials: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_value_type() -> RangeType {
    RangeType::Float
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawParam {
    Range {
        name: String,
        bounds: [f64; 2],
        #[serde(default = "default_value_type")]
        value_type: RangeType,
        #[serde(default)]
        log_scale: bool,
    },
    Choice {
        name: String,
        values: Vec<ParamValue>,
    },
    Fixed {
        name: String,
        value: ParamValue,
    },
}

impl From<RawParam> for ParameterSpec {
    fn from(p: RawParam) -> Self {
        match p {
            RawParam::Range {
                name,
                bounds,
                value_type,
                log_scale,
            } => ParameterSpec::range(name, value_type, bounds[0], bounds[1], log_scale),
            RawParam::Choice { name, values } => ParameterSpec::choice(name, values),
            RawParam::Fixed { name, value } => ParameterSpec::fixed(name, value),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    builtin: Option<RawBuiltin>,
    command: Option<RawCommand>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuiltin {
    name: String,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommand {
    program: String,
    #[serde(default)]
    args: Vec<String>,
    timeout_s: Option<f64>,
}

/// Reads and validates a config file, applying `overrides`.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ConfigError::NotFound(path.to_path_buf()))
        }
        Err(source) => {
            return Err(ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    parse_config_str(&text, path, overrides)
}

/// Parses config text; `path` is used only in error messages.
pub fn parse_config_str(
    text: &str,
    path: &Path,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        Category::Data => ConfigError::Schema(e.to_string()),
        _ => ConfigError::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let total_trials = overrides
        .total_trials
        .or(raw.total_trials)
        .unwrap_or(DEFAULT_TOTAL_TRIALS);
    if total_trials == 0 {
        return Err(ConfigError::Schema(
            "total_trials must be at least 1".into(),
        ));
    }
    let seed = overrides.seed.or(raw.seed).unwrap_or(0);
    let space = SearchSpace::new(raw.space.into_iter().map(ParameterSpec::from).collect());
    let report = space.validate();
    if !report.is_ok() {
        return Err(ConfigError::InvalidSpace(report));
    }

    let objective = match (raw.objective.builtin, raw.objective.command) {
        (Some(b), None) => {
            let builtin = Builtin::from_config(&b.name, b.params.as_ref(), seed)?;
            builtin.check_space(&space)?;
            Objective::Builtin(builtin)
        }
        (None, Some(c)) => {
            let timeout_s = c.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S);
            if !(timeout_s > 0.0 && timeout_s.is_finite()) {
                return Err(ConfigError::Schema("timeout_s must be positive".into()));
            }
            if c.program.trim().is_empty() {
                return Err(ConfigError::Schema("command program is empty".into()));
            }
            Objective::Command(CommandSpec {
                program: c.program,
                args: c.args,
                timeout: Duration::from_secs_f64(timeout_s),
            })
        }
        (Some(_), Some(_)) => {
            return Err(ConfigError::Schema(
                "objective must set exactly one of `builtin` or `command`, not both".into(),
            ))
        }
        (None, None) => {
            return Err(ConfigError::Schema(
                "objective must set one of `builtin` or `command`".into(),
            ))
        }
    };

    Ok(RunConfig {
        space,
        objective,
        minimize: raw.minimize,
        total_trials,
        seed,
        out_dir: overrides
            .out_dir
            .clone()
            .or(raw.out_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    })
}
