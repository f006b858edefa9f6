//! Search spaces, arms, and the transforms between raw hyperparameter
//! values and the unit cube the surrogate works in.
//!
//! Every non-fixed parameter contributes one coordinate. Range parameters map
//! affinely (after a natural log when `log_scale` is set); choice parameters
//! are embedded ordinally as `index / (k - 1)`. Fixed parameters never reach
//! the unit cube and are re-injected on decode.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmc::MAX_DIMENSION;
use crate::scalar::Scalar;

/// Dimension at and above which validation attaches a warning.
pub const HIGH_DIMENSION_WARNING: usize = 20;

const DECODE_SLACK: f64 = 1e-12;
const CONSTANT_DATA_SD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("arm has no value for parameter `{0}`")]
    MissingParameter(String),
    #[error("arm sets `{0}`, which is not in the search space")]
    UnknownParameter(String),
    #[error("parameter `{name}` expects {expected}, got {got}")]
    WrongType {
        name: String,
        expected: &'static str,
        got: ParamValue,
    },
    #[error("value {value} is outside the domain of parameter `{name}`")]
    OutOfDomain { name: String, value: ParamValue },
    #[error("expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unit-cube coordinate {index} is {value}, outside [0, 1]")]
    CoordinateOutOfRange { index: usize, value: f64 },
    #[error("cannot fit a standardizer to an empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
}

/// A literal parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(x) => Some(x),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Float(x)
    }
}

impl From<i64> for ParamValue {
    fn from(i: i64) -> Self {
        ParamValue::Int(i)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Str(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeType {
    Float,
    Int,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    Range {
        value_type: RangeType,
        lower: f64,
        upper: f64,
        log_scale: bool,
    },
    Choice {
        options: Vec<ParamValue>,
    },
    Fixed {
        value: ParamValue,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParameterKind,
}

impl ParameterSpec {
    pub fn range_float(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::range(name, RangeType::Float, lower, upper, false)
    }

    pub fn log_range(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::range(name, RangeType::Float, lower, upper, true)
    }

    pub fn range_int(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self::range(name, RangeType::Int, lower as f64, upper as f64, false)
    }

    pub fn range(
        name: impl Into<String>,
        value_type: RangeType,
        lower: f64,
        upper: f64,
        log_scale: bool,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Range {
                value_type,
                lower,
                upper,
                log_scale,
            },
        }
    }

    pub fn choice(name: impl Into<String>, options: Vec<ParamValue>) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Choice { options },
        }
    }

    pub fn fixed(name: impl Into<String>, value: impl Into<ParamValue>) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Fixed {
                value: value.into(),
            },
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.kind, ParameterKind::Fixed { .. })
    }

    /// Checks that `value` lies in this parameter's domain.
    pub fn check_value(&self, value: &ParamValue) -> Result<(), SpaceError> {
        let wrong = |expected| SpaceError::WrongType {
            name: self.name.clone(),
            expected,
            got: value.clone(),
        };
        let outside = || SpaceError::OutOfDomain {
            name: self.name.clone(),
            value: value.clone(),
        };
        match &self.kind {
            ParameterKind::Range {
                value_type: RangeType::Float,
                lower,
                upper,
                ..
            } => {
                let x = value.as_f64().ok_or_else(|| wrong("a number"))?;
                if x.is_finite() && *lower <= x && x <= *upper {
                    Ok(())
                } else {
                    Err(outside())
                }
            }
            ParameterKind::Range {
                value_type: RangeType::Int,
                lower,
                upper,
                ..
            } => match value {
                ParamValue::Int(i) if *lower <= *i as f64 && (*i as f64) <= *upper => Ok(()),
                ParamValue::Int(_) => Err(outside()),
                _ => Err(wrong("an integer")),
            },
            ParameterKind::Choice { options } => {
                if options.contains(value) {
                    Ok(())
                } else {
                    Err(outside())
                }
            }
            ParameterKind::Fixed { value: fixed } => {
                if fixed == value {
                    Ok(())
                } else {
                    Err(outside())
                }
            }
        }
    }
}

/// One invariant violation found by [`SearchSpace::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending parameter, or `None` for space-level problems.
    pub parameter: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.parameter {
            Some(p) => write!(f, "{p}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, parameter: Option<&str>, message: impl Into<String>) {
        self.violations.push(Violation {
            parameter: parameter.map(str::to_string),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            f.write_str("ok")?;
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            write!(f, "{}", msgs.join("; "))?;
        }
        for w in &self.warnings {
            write!(f, " (warning: {w})")?;
        }
        Ok(())
    }
}

/// Ordered list of parameters defining the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    params: Vec<ParameterSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Number of non-fixed parameters, i.e. the unit-cube dimension.
    pub fn dim(&self) -> usize {
        self.free_params().count()
    }

    fn free_params(&self) -> impl Iterator<Item = &ParameterSpec> {
        self.params.iter().filter(|p| !p.is_fixed())
    }

    /// Collects every invariant violation. Never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = BTreeSet::new();
        for p in &self.params {
            let name = Some(p.name.as_str());
            if p.name.trim().is_empty() {
                report.violation(name, "name must be nonempty");
            } else if !seen.insert(p.name.as_str()) {
                report.violation(name, "name must be unique within the space");
            }
            match &p.kind {
                ParameterKind::Range {
                    value_type,
                    lower,
                    upper,
                    log_scale,
                } => {
                    if !lower.is_finite() || !upper.is_finite() {
                        report.violation(name, "bounds must be finite");
                    } else if lower >= upper {
                        report.violation(name, "lower < upper");
                    }
                    if *value_type == RangeType::Int {
                        if lower.fract() != 0.0 || upper.fract() != 0.0 {
                            report.violation(name, "integer range bounds must be integers");
                        }
                        if *log_scale {
                            report.violation(name, "log_scale applies to float ranges only");
                        }
                    }
                    if *log_scale && !(*lower > 0.0) {
                        report.violation(name, "log_scale requires lower > 0");
                    }
                }
                ParameterKind::Choice { options } => {
                    let distinct = options
                        .iter()
                        .enumerate()
                        .all(|(i, o)| !options[..i].contains(o));
                    if options.len() < 2 {
                        report.violation(name, "choice needs at least 2 options");
                    } else if !distinct {
                        report.violation(name, "choice options must be distinct");
                    }
                    if options
                        .iter()
                        .any(|o| matches!(o, ParamValue::Float(x) if !x.is_finite()))
                    {
                        report.violation(name, "choice options must be finite");
                    }
                }
                ParameterKind::Fixed { value } => {
                    if matches!(value, ParamValue::Float(x) if !x.is_finite()) {
                        report.violation(name, "fixed value must be finite");
                    }
                }
            }
        }
        let d = self.dim();
        if d == 0 {
            report.violation(None, "at least one non-fixed parameter is required");
        }
        if d > MAX_DIMENSION {
            report.violation(
                None,
                format!("at most {MAX_DIMENSION} non-fixed parameters are supported, got {d}"),
            );
        }
        if d >= HIGH_DIMENSION_WARNING {
            report.warnings.push(format!(
                "{d} tunable parameters; Gaussian-process search is most reliable below {HIGH_DIMENSION_WARNING}"
            ));
        }
        report
    }

    /// Maps a valid arm into `[0,1]^d`.
    pub fn encode(&self, arm: &Arm) -> Result<UnitVector, SpaceError> {
        if let Some(extra) = arm.values.keys().find(|k| self.param(k).is_none()) {
            return Err(SpaceError::UnknownParameter(extra.clone()));
        }
        let mut coords = Vec::with_capacity(self.dim());
        for p in &self.params {
            let value = arm
                .values
                .get(&p.name)
                .ok_or_else(|| SpaceError::MissingParameter(p.name.clone()))?;
            p.check_value(value)?;
            match &p.kind {
                ParameterKind::Range {
                    lower,
                    upper,
                    log_scale,
                    ..
                } => {
                    // check_value guarantees a number here
                    let x = value.as_f64().unwrap_or(*lower);
                    let u = if *log_scale {
                        (x.ln() - lower.ln()) / (upper.ln() - lower.ln())
                    } else {
                        (x - lower) / (upper - lower)
                    };
                    coords.push(u.clamp(0.0, 1.0));
                }
                ParameterKind::Choice { options } => {
                    let idx = options.iter().position(|o| o == value).unwrap_or(0);
                    coords.push(idx as f64 / (options.len() - 1) as f64);
                }
                ParameterKind::Fixed { .. } => {}
            }
        }
        Ok(UnitVector(coords))
    }

    /// Inverse of [`SearchSpace::encode`], snapping integer and choice
    /// coordinates to the nearest admissible value.
    pub fn decode(&self, u: &[f64], name: impl Into<String>) -> Result<Arm, SpaceError> {
        let d = self.dim();
        if u.len() != d {
            return Err(SpaceError::DimensionMismatch {
                expected: d,
                got: u.len(),
            });
        }
        for (index, &value) in u.iter().enumerate() {
            if !(-DECODE_SLACK..=1.0 + DECODE_SLACK).contains(&value) {
                return Err(SpaceError::CoordinateOutOfRange { index, value });
            }
        }
        let mut coords = u.iter().map(|x| x.clamp(0.0, 1.0));
        let mut values = BTreeMap::new();
        for p in &self.params {
            let value = match &p.kind {
                ParameterKind::Fixed { value } => value.clone(),
                ParameterKind::Range {
                    value_type,
                    lower,
                    upper,
                    log_scale,
                } => {
                    let t = coords.next().unwrap_or(0.0);
                    let x = if t == 0.0 {
                        *lower
                    } else if t == 1.0 {
                        *upper
                    } else if *log_scale {
                        (lower.ln() + t * (upper.ln() - lower.ln())).exp()
                    } else {
                        lower + t * (upper - lower)
                    };
                    match value_type {
                        RangeType::Float => ParamValue::Float(x.clamp(*lower, *upper)),
                        RangeType::Int => ParamValue::Int(x.round().clamp(*lower, *upper) as i64),
                    }
                }
                ParameterKind::Choice { options } => {
                    let t = coords.next().unwrap_or(0.0);
                    let idx = (t * (options.len() - 1) as f64).round() as usize;
                    options[idx.min(options.len() - 1)].clone()
                }
            };
            values.insert(p.name.clone(), value);
        }
        Ok(Arm {
            name: name.into(),
            values,
        })
    }
}

/// A named hyperparameter configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    pub values: BTreeMap<String, ParamValue>,
}

impl Arm {
    pub fn new<K, V>(name: impl Into<String>, values: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<ParamValue>,
    {
        Self {
            name: name.into(),
            values: values
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn get(&self, param: &str) -> Option<&ParamValue> {
        self.values.get(param)
    }

    /// Numeric value of a parameter, if present and numeric.
    pub fn get_f64(&self, param: &str) -> Option<f64> {
        self.values.get(param).and_then(ParamValue::as_f64)
    }
}

/// A point of the unit cube `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        for (index, &value) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SpaceError::CoordinateOutOfRange { index, value });
            }
        }
        Ok(Self(coords))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// ∞-norm distance.
    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A raw score, with an optional standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sem: Option<f64>,
}

impl Observation {
    pub fn new(objective: f64) -> Self {
        Self {
            objective,
            sem: None,
        }
    }

    pub fn with_sem(objective: f64, sem: f64) -> Self {
        Self {
            objective,
            sem: Some(sem),
        }
    }

    /// Finite objective and, when present, a finite nonnegative sem.
    pub fn is_valid(&self) -> bool {
        self.objective.is_finite() && self.sem.is_none_or(|s| s.is_finite() && s >= 0.0)
    }

    /// True when the observation carries a positive standard error.
    pub fn is_noisy(&self) -> bool {
        self.sem.is_some_and(|s| s > 0.0)
    }
}

/// Affine output normalization `z = (y - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    mean: T,
    scale: T,
}

impl<T: Scalar> Standardizer<T> {
    /// Fits mean and population standard deviation. Near-constant samples
    /// (sd below 1e-12) get scale 1.
    pub fn fit(ys: &[T]) -> Result<Self, SpaceError> {
        if ys.is_empty() {
            return Err(SpaceError::EmptySample);
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(SpaceError::NonFiniteSample);
        }
        let n = T::from_usize(ys.len()).unwrap_or_else(T::one);
        let mean = ys.iter().copied().sum::<T>() / n;
        let var = ys.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        let scale = if sd < T::lit(CONSTANT_DATA_SD) {
            T::one()
        } else {
            sd
        };
        Ok(Self { mean, scale })
    }

    pub fn identity() -> Self {
        Self {
            mean: T::zero(),
            scale: T::one(),
        }
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn apply(&self, y: T) -> T {
        (y - self.mean) / self.scale
    }

    pub fn invert(&self, z: T) -> T {
        z * self.scale + self.mean
    }

    /// Rescales a standardized spread (sd or sem) back to raw units.
    pub fn invert_spread(&self, s: T) -> T {
        s * self.scale
    }
}
