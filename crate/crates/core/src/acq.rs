//! Acquisition functions over posterior summaries.
//!
//! Everything here assumes minimization of a standardized objective: the
//! improvement at a point is `max(incumbent − f(x), 0)` and every function
//! returns a score to be maximized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{rsample, GpError, GpModel, PosteriorSummary};
use crate::linalg::Matrix;
use crate::scalar::{dot, Scalar};

/// Posterior standard deviations below this are treated as exactly zero.
pub const DEGENERATE_SD: f64 = 1e-12;

/// Default exploration weight for [`ucb`].
pub const DEFAULT_UCB_BETA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcqError {
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("no incumbent: the model has no observations")]
    NoIncumbent,
    #[error("length mismatch: {0} weights for {1} outputs")]
    LengthMismatch(usize, usize),
    #[error("invalid acquisition spec: {0}")]
    InvalidSpec(String),
}

/// Standard normal density.
pub fn std_normal_pdf<T: Scalar>(z: T) -> T {
    (-T::lit(0.5) * z * z).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Standard normal distribution function.
///
/// Uses the everywhere-positive series
/// `erf(x) = 2/√π · e^{−x²} · Σ (2x²)ⁿ x / (2n+1)!!` below `x = 2.5` and a
/// Lentz-evaluated continued fraction for `erfc` above it.
pub fn std_normal_cdf<T: Scalar>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    let half = T::lit(0.5);
    let x = z.abs() / T::SQRT_2();
    if x < T::lit(2.5) {
        let e = erf_series(x);
        if z >= T::zero() {
            half * (T::one() + e)
        } else {
            half * (T::one() - e)
        }
    } else {
        let tail = half * erfc_continued_fraction(x);
        if z >= T::zero() {
            T::one() - tail
        } else {
            tail
        }
    }
}

fn erf_series<T: Scalar>(x: T) -> T {
    let two_x2 = T::lit(2.0) * x * x;
    let mut term = x;
    let mut sum = x;
    let eps = T::epsilon();
    for n in 1..500 {
        term = term * two_x2 / T::lit((2 * n + 1) as f64);
        sum += term;
        if term <= eps * sum {
            break;
        }
    }
    T::lit(2.0) / T::PI().sqrt() * (-x * x).exp() * sum
}

/// `erfc(x)` for `x ≥ 2.5` from
/// `√π e^{x²} erfc(x) = 1 / (x + ½ / (x + 1 / (x + 3/2 / (x + …))))`.
fn erfc_continued_fraction<T: Scalar>(x: T) -> T {
    let tiny = T::min_positive_value().sqrt();
    let eps = T::epsilon();
    let mut f = x;
    let mut c = f;
    let mut d = T::zero();
    for k in 1..500 {
        let a = T::lit(k as f64 * 0.5);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = d.recip();
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() <= eps {
            break;
        }
    }
    (-x * x).exp() / (T::PI().sqrt() * f)
}

fn gamma<T: Scalar>(mean: T, sd: T, incumbent: T) -> T {
    (incumbent - mean) / sd
}

/// Closed-form expected improvement at a single point.
pub fn ei_point<T: Scalar>(mean: T, variance: T, incumbent: T) -> T {
    let sd = variance.max(T::zero()).sqrt();
    if sd < T::lit(DEGENERATE_SD) {
        return (incumbent - mean).max(T::zero());
    }
    let g = gamma(mean, sd, incumbent);
    (sd * (g * std_normal_cdf(g) + std_normal_pdf(g))).max(T::zero())
}

/// Expected improvement `σ (γ Φ(γ) + φ(γ))`, `γ = (incumbent − μ) / σ`.
pub fn ei<T: Scalar>(summary: &PosteriorSummary<T>, incumbent: T) -> Vec<T> {
    summary
        .means()
        .iter()
        .zip(summary.variances())
        .map(|(&m, &v)| ei_point(m, v, incumbent))
        .collect()
}

/// Probability of improvement `Φ(γ)`.
pub fn pi<T: Scalar>(summary: &PosteriorSummary<T>, incumbent: T) -> Vec<T> {
    summary
        .means()
        .iter()
        .zip(summary.variances())
        .map(|(&m, &v)| {
            let sd = v.sqrt();
            if sd < T::lit(DEGENERATE_SD) {
                if m < incumbent {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                std_normal_cdf(gamma(m, sd, incumbent))
            }
        })
        .collect()
}

/// Lower confidence bound, negated so that larger is better: `−(μ − βσ)`.
pub fn ucb<T: Scalar>(summary: &PosteriorSummary<T>, beta: T) -> Vec<T> {
    summary
        .means()
        .iter()
        .zip(summary.variances())
        .map(|(&m, &v)| -(m - beta * v.sqrt()))
        .collect()
}

/// Monte-Carlo improvement estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T> {
    pub mean: T,
    /// Sample standard deviation of the per-draw improvements.
    pub sample_sd: T,
}

impl<T: Scalar> McEstimate<T> {
    /// `sample_sd / √n`.
    pub fn std_error(&self, n: usize) -> T {
        self.sample_sd / T::lit(n as f64).sqrt()
    }
}

/// Sample-average expected improvement from `n` seeded posterior draws.
pub fn mc_ei_summary<T: Scalar>(
    summary: &PosteriorSummary<T>,
    incumbent: T,
    n: usize,
    seed: u64,
) -> Vec<McEstimate<T>> {
    let n = n.max(1);
    let batch = rsample(summary, n, seed);
    let count = T::lit(n as f64);
    (0..summary.len())
        .map(|q| {
            if summary.variances()[q] == T::zero() {
                // every draw equals the mean
                return McEstimate {
                    mean: (incumbent - summary.means()[q]).max(T::zero()),
                    sample_sd: T::zero(),
                };
            }
            let improvement = |draw: T| (incumbent - draw).max(T::zero());
            let mean = batch.column(q).map(improvement).sum::<T>() / count;
            let var = if n > 1 {
                batch
                    .column(q)
                    .map(|draw| {
                        let e = improvement(draw) - mean;
                        e * e
                    })
                    .sum::<T>()
                    / (count - T::one())
            } else {
                T::zero()
            };
            McEstimate {
                mean,
                sample_sd: var.sqrt(),
            }
        })
        .collect()
}

/// Monte-Carlo expected improvement at each row of `points`.
pub fn mc_ei<T: Scalar>(
    model: &GpModel<T>,
    points: &Matrix<T>,
    incumbent: T,
    n: usize,
    seed: u64,
) -> Result<Vec<T>, AcqError> {
    let summary = model.posterior(points)?;
    Ok(mc_ei_summary(&summary, incumbent, n, seed)
        .into_iter()
        .map(|e| e.mean)
        .collect())
}

/// Plug-in incumbent: the smallest posterior mean over the training inputs.
pub fn incumbent_value<T: Scalar>(model: &GpModel<T>) -> Result<T, AcqError> {
    if model.is_empty() {
        return Err(AcqError::NoIncumbent);
    }
    let s = model.posterior(model.data().x())?;
    Ok(s.means().iter().copied().fold(T::infinity(), T::min))
}

/// Linear scalarization of a multi-output observation.
pub fn scalarize<T: Scalar>(weights: &[T], outputs: &[T]) -> Result<T, AcqError> {
    if weights.len() != outputs.len() || weights.is_empty() {
        return Err(AcqError::LengthMismatch(weights.len(), outputs.len()));
    }
    Ok(dot(weights, outputs))
}

/// Which acquisition to optimize, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "snake_case")]
pub enum AcquisitionSpec<T> {
    Ei {
        incumbent: T,
    },
    McEi {
        incumbent: T,
        mc_samples: usize,
        seed: u64,
    },
    Pi {
        incumbent: T,
    },
    Ucb {
        beta: T,
    },
}

impl<T: Scalar> AcquisitionSpec<T> {
    pub fn validate(&self) -> Result<(), AcqError> {
        match *self {
            AcquisitionSpec::Ei { incumbent } | AcquisitionSpec::Pi { incumbent }
                if !incumbent.is_finite() =>
            {
                Err(AcqError::InvalidSpec("incumbent must be finite".into()))
            }
            AcquisitionSpec::McEi {
                incumbent,
                mc_samples,
                ..
            } if !incumbent.is_finite() || mc_samples == 0 => Err(AcqError::InvalidSpec(
                "mc_ei needs a finite incumbent and mc_samples >= 1".into(),
            )),
            AcquisitionSpec::Ucb { beta } if !(beta > T::zero() && beta.is_finite()) => {
                Err(AcqError::InvalidSpec("beta must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Scores every point of a posterior summary.
    pub fn score_summary(&self, summary: &PosteriorSummary<T>) -> Vec<T> {
        match *self {
            AcquisitionSpec::Ei { incumbent } => ei(summary, incumbent),
            AcquisitionSpec::Pi { incumbent } => pi(summary, incumbent),
            AcquisitionSpec::Ucb { beta } => ucb(summary, beta),
            AcquisitionSpec::McEi {
                incumbent,
                mc_samples,
                seed,
            } => mc_ei_summary(summary, incumbent, mc_samples, seed)
                .into_iter()
                .map(|e| e.mean)
                .collect(),
        }
    }

    /// Scores each row of `points` under `model`.
    pub fn score(&self, model: &GpModel<T>, points: &Matrix<T>) -> Result<Vec<T>, AcqError> {
        Ok(self.score_summary(&model.posterior(points)?))
    }

    /// Score of a single point.
    pub fn score_point(&self, model: &GpModel<T>, x: &[T]) -> T {
        let (m, v) = model.predict_point(x);
        self.score_summary(&PosteriorSummary::new(vec![m], vec![v]))[0]
    }
}
