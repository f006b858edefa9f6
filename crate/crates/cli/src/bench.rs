//! Built-in objectives for demos and regression runs.

use gpbo::{Arm, EvalFault, Evaluator, Observation, ParameterSpec, SearchSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::config::ConfigError;

pub const BRANIN_MINIMUM: f64 = 0.397_887_357_729_738;

pub const BUILTIN_NAMES: [&str; 3] = ["quadratic1d", "branin2d", "groupweights3d"];

/// Noisy separable quadratic in three group weights with a small
/// interaction term between the first two.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupWeights {
    pub targets: [f64; 3],
    pub curvature: [f64; 3],
    pub interaction: f64,
    pub noise_sd: f64,
    /// Seeds the observation noise. Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for GroupWeights {
    fn default() -> Self {
        Self {
            targets: [0.86, 0.89, 0.31],
            curvature: [1.0, 1.0, 1.0],
            interaction: 0.1,
            noise_sd: 0.01,
            seed: None,
        }
    }
}

impl GroupWeights {
    pub const PARAMS: [&'static str; 3] = ["w_FG", "w_RG", "w_CCG"];

    /// The objective without noise.
    pub fn mean(&self, w: [f64; 3]) -> f64 {
        let quad: f64 = (0..3)
            .map(|k| self.curvature[k] * (w[k] - self.targets[k]).powi(2))
            .sum();
        quad + self.interaction * w[0] * w[1]
    }

    /// Noise is a pure function of the seed and the arm, so repeated
    /// evaluations of the same arm agree.
    pub fn noise(&self, w: [f64; 3]) -> f64 {
        if self.noise_sd == 0.0 {
            return 0.0;
        }
        let mut h = splitmix64(self.seed.unwrap_or(0));
        for x in w {
            h = splitmix64(h ^ x.to_bits());
        }
        let z: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(h));
        self.noise_sd * z
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Branin on `[-5, 10] x [0, 15]`.
pub fn branin(x1: f64, x2: f64) -> f64 {
    use std::f64::consts::PI;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `(x - 0.3)^2` on `x`.
    Quadratic1d,
    /// Branin on `x1`, `x2`.
    Branin2d,
    GroupWeights3d(GroupWeights),
}

impl Builtin {
    /// Looks up a builtin by name. `run_seed` becomes the noise seed when
    /// the params leave it unset.
    pub fn from_config(
        name: &str,
        params: Option<&serde_json::Value>,
        run_seed: u64,
    ) -> Result<Self, ConfigError> {
        let no_params = |b: Builtin| match params {
            None => Ok(b),
            Some(v) if v.as_object().is_some_and(|m| m.is_empty()) => Ok(b),
            Some(_) => Err(ConfigError::Schema(format!(
                "builtin `{name}` takes no params"
            ))),
        };
        match name {
            "quadratic1d" => no_params(Builtin::Quadratic1d),
            "branin2d" => no_params(Builtin::Branin2d),
            "groupweights3d" => {
                let mut gw: GroupWeights = match params {
                    None => GroupWeights::default(),
                    Some(v) => GroupWeights::deserialize(v)
                        .map_err(|e| ConfigError::Schema(format!("groupweights3d params: {e}")))?,
                };
                if !(gw.noise_sd >= 0.0 && gw.noise_sd.is_finite()) {
                    return Err(ConfigError::Schema("noise_sd must be non-negative".into()));
                }
                gw.seed.get_or_insert(run_seed);
                Ok(Builtin::GroupWeights3d(gw))
            }
            other => Err(ConfigError::Schema(format!(
                "unknown builtin objective `{other}` (expected one of {})",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Quadratic1d => "quadratic1d",
            Builtin::Branin2d => "branin2d",
            Builtin::GroupWeights3d(_) => "groupweights3d",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Builtin::Quadratic1d => &["x"],
            Builtin::Branin2d => &["x1", "x2"],
            Builtin::GroupWeights3d(_) => &GroupWeights::PARAMS,
        }
    }

    /// The space the builtin is meant to be searched over.
    pub fn default_space(&self) -> SearchSpace {
        let params = match self {
            Builtin::Quadratic1d => vec![ParameterSpec::range_float("x", 0.0, 1.0)],
            Builtin::Branin2d => vec![
                ParameterSpec::range_float("x1", -5.0, 10.0),
                ParameterSpec::range_float("x2", 0.0, 15.0),
            ],
            Builtin::GroupWeights3d(_) => GroupWeights::PARAMS
                .iter()
                .map(|&n| ParameterSpec::range_float(n, 0.0, 1.0))
                .collect(),
        };
        SearchSpace::new(params)
    }

    /// Every input the builtin reads must be a parameter of `space`.
    pub fn check_space(&self, space: &SearchSpace) -> Result<(), ConfigError> {
        for name in self.param_names() {
            if space.param(name).is_none() {
                return Err(ConfigError::Schema(format!(
                    "builtin `{}` needs a numeric parameter `{name}`",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, arm: &Arm) -> Result<Observation, EvalFault> {
        let get = |name: &str| {
            arm.get_f64(name).ok_or_else(|| {
                EvalFault::new(
                    "bad_arm",
                    format!("parameter `{name}` missing or not numeric"),
                )
            })
        };
        let y = match self {
            Builtin::Quadratic1d => (get("x")? - 0.3).powi(2),
            Builtin::Branin2d => branin(get("x1")?, get("x2")?),
            Builtin::GroupWeights3d(gw) => {
                let w = [get("w_FG")?, get("w_RG")?, get("w_CCG")?];
                gw.mean(w) + gw.noise(w)
            }
        };
        Ok(Observation::new(y))
    }
}

impl Evaluator for Builtin {
    fn evaluate(&mut self, arm: &Arm) -> Result<Observation, EvalFault> {
        Builtin::evaluate(self, arm)
    }
}

/// Scores `arm` with the builtin called `name`.
pub fn builtin_objective(
    name: &str,
    params: Option<&serde_json::Value>,
    arm: &Arm,
) -> Result<Observation, EvalFault> {
    let b = Builtin::from_config(name, params, 0)
        .map_err(|e| EvalFault::new("unknown_builtin", e.to_string()))?;
    b.evaluate(arm)
}
