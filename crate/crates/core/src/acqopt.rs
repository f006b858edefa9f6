//! Inner maximization of an acquisition function over `[0,1]^d`.
//!
//! Candidates come from a Sobol scatter; the best few are polished by a
//! coordinate-wise search that fits a parabola through three nearby values
//! along each axis and jumps to its vertex when concave. Every iterate is
//! clamped into the cube and only strict improvements are accepted, so the
//! result is never worse than the best candidate.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acq::{AcqError, AcquisitionSpec};
use crate::gp::GpModel;
use crate::qmc::{QmcError, SobolEngine};
use crate::scalar::Scalar;

const MAX_RADIUS: f64 = 0.25;
const START_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcqOptError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("model has dimension {model}, optimizer asked for {requested}")]
    DimensionMismatch { model: usize, requested: usize },
    #[error("acquisition is non-finite at every candidate")]
    NonFinite,
    #[error(transparent)]
    Qmc(#[from] QmcError),
    #[error(transparent)]
    Acq(#[from] AcqError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcqOptConfig {
    pub candidate_count: usize,
    pub refine_count: usize,
    pub max_local_iters: usize,
    pub tol: f64,
    /// Zero uses the raw Sobol scatter; any other value applies a seeded
    /// random shift (mod 1) to every candidate.
    pub seed: u64,
}

impl Default for AcqOptConfig {
    fn default() -> Self {
        Self {
            candidate_count: 256,
            refine_count: 8,
            max_local_iters: 100,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl AcqOptConfig {
    pub fn validate(&self) -> Result<(), AcqOptError> {
        let bad = |m: &str| Err(AcqOptError::InvalidConfig(m.to_string()));
        if self.candidate_count == 0 || self.refine_count == 0 || self.max_local_iters == 0 {
            return bad("counts must be at least 1");
        }
        if self.refine_count > self.candidate_count {
            return bad("refine_count exceeds candidate_count");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol must be positive");
        }
        Ok(())
    }
}

/// Candidate points for a given dimension and config.
pub fn candidates<T: Scalar>(d: usize, cfg: &AcqOptConfig) -> Result<Vec<Vec<T>>, AcqOptError> {
    let mut engine = SobolEngine::new(d)?;
    let raw: Vec<Vec<f64>> = engine.draw(cfg.candidate_count)?;
    if cfg.seed == 0 {
        return Ok(raw
            .into_iter()
            .map(|p| p.into_iter().map(T::lit).collect())
            .collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    Ok(raw
        .into_iter()
        .map(|p| {
            p.iter()
                .zip(&shift)
                .map(|(&u, &s)| T::lit((u + s).fract()))
                .collect()
        })
        .collect())
}

/// `argmax` of the acquisition described by `spec` under `model`.
pub fn maximize_acquisition<T: Scalar>(
    model: &GpModel<T>,
    spec: &AcquisitionSpec<T>,
    d: usize,
    cfg: &AcqOptConfig,
) -> Result<(Vec<T>, T), AcqOptError> {
    spec.validate()?;
    if d != model.dim() {
        return Err(AcqOptError::DimensionMismatch {
            model: model.dim(),
            requested: d,
        });
    }
    maximize_fn(|x| spec.score_point(model, x), d, cfg)
}

/// Same search for an arbitrary objective on `[0,1]^d`.
pub fn maximize_fn<T, F>(f: F, d: usize, cfg: &AcqOptConfig) -> Result<(Vec<T>, T), AcqOptError>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    cfg.validate()?;
    let score = |x: &[T]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::neg_infinity()
        }
    };
    let cands = candidates::<T>(d, cfg)?;
    let values: Vec<T> = cands.par_iter().map(|x| score(x)).collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Err(AcqOptError::NonFinite);
    }

    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(cfg.refine_count);
    order.retain(|&i| values[i].is_finite());

    let refined: Vec<(usize, Vec<T>, T)> = order
        .par_iter()
        .map(|&i| {
            let (x, v) = refine(&score, cands[i].clone(), values[i], cfg);
            (i, x, v)
        })
        .collect();

    let mut best = &refined[0];
    for r in &refined[1..] {
        if r.2 > best.2 || (r.2 == best.2 && r.0 < best.0) {
            best = r;
        }
    }
    Ok((best.1.clone(), best.2))
}

/// Three distinct abscissae around `c` inside `[0,1]`, with `c` among them.
fn stencil<T: Scalar>(c: T, r: T) -> [T; 3] {
    let two = T::lit(2.0);
    if c - r < T::zero() {
        [c, c + r, c + two * r]
    } else if c + r > T::one() {
        [c - two * r, c - r, c]
    } else {
        [c - r, c, c + r]
    }
}

/// Vertex of the parabola through three points, if it opens downward.
fn concave_vertex<T: Scalar>(p: [T; 3], v: [T; 3]) -> Option<T> {
    let d1 = (v[1] - v[0]) / (p[1] - p[0]);
    let d2 = (v[2] - v[1]) / (p[2] - p[1]);
    let curvature = (d2 - d1) / (p[2] - p[0]);
    if !(curvature < T::zero()) {
        return None;
    }
    // derivative of the interpolant vanishes at the vertex
    let vertex = T::lit(0.5) * (p[0] + p[1]) - d1 / (T::lit(2.0) * curvature);
    vertex.is_finite().then_some(vertex)
}

fn refine<T, F>(score: &F, mut x: Vec<T>, mut value: T, cfg: &AcqOptConfig) -> (Vec<T>, T)
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let d = x.len();
    let tol = T::lit(cfg.tol);
    let mut radius = vec![T::lit(START_RADIUS); d];
    let mut probe = x.clone();
    for _ in 0..cfg.max_local_iters {
        if radius.iter().all(|&r| r < tol) {
            break;
        }
        for j in 0..d {
            let r = radius[j];
            if r < tol {
                continue;
            }
            let c = x[j];
            let pts = stencil(c, r);
            let mut vals = [value; 3];
            for (k, &p) in pts.iter().enumerate() {
                if p != c {
                    probe[j] = p;
                    vals[k] = score(&probe);
                }
            }
            let mut best_p = c;
            let mut best_v = value;
            for (&p, &v) in pts.iter().zip(&vals) {
                if v > best_v {
                    best_p = p;
                    best_v = v;
                }
            }
            if vals.iter().all(|v| v.is_finite()) {
                if let Some(vertex) = concave_vertex(pts, vals) {
                    let lo = (c - T::lit(2.0) * r).max(T::zero());
                    let hi = (c + T::lit(2.0) * r).min(T::one());
                    let vertex = vertex.max(lo).min(hi);
                    if !pts.contains(&vertex) {
                        probe[j] = vertex;
                        let vv = score(&probe);
                        if vv > best_v {
                            best_p = vertex;
                            best_v = vv;
                        }
                    }
                }
            }
            if best_v > value {
                let moved = (best_p - c).abs();
                x[j] = best_p;
                value = best_v;
                radius[j] = (T::lit(2.0) * moved).min(T::lit(MAX_RADIUS));
            } else {
                radius[j] = r * T::lit(0.25);
            }
            probe[j] = x[j];
        }
    }
    (x, value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_objective_returns_first_candidate() {
        let cfg = AcqOptConfig::default();
        let (x, v) = maximize_fn(|_: &[f64]| 1.0, 3, &cfg).unwrap();
        assert_eq!(x, vec![0.5, 0.5, 0.5]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn ascent_toward_the_boundary_is_clamped() {
        let cfg = AcqOptConfig::default();
        let (x, v) = maximize_fn(|x: &[f64]| x[0] - 3.0 * x[1], 2, &cfg).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn finds_interior_peak() {
        let cfg = AcqOptConfig::default();
        let f = |x: &[f64]| -(x[0] - 0.3141).powi(2) - 2.0 * (x[1] - 0.7777).powi(2);
        let (x, v) = maximize_fn(f, 2, &cfg).unwrap();
        assert!(
            (x[0] - 0.3141).abs() < 1e-6 && (x[1] - 0.7777).abs() < 1e-6,
            "{x:?}"
        );
        assert!(v > -1e-12);
    }

    #[test]
    fn non_finite_everywhere_is_an_error() {
        let cfg = AcqOptConfig::default();
        assert_eq!(
            maximize_fn(|_: &[f64]| f64::NAN, 1, &cfg).unwrap_err(),
            AcqOptError::NonFinite
        );
    }

    #[test]
    fn config_validation() {
        let cfg = AcqOptConfig {
            refine_count: 300,
            ..AcqOptConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AcqOptConfig {
            tol: 0.0,
            ..AcqOptConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seeded_candidates_stay_in_cube() {
        let cfg = AcqOptConfig {
            seed: 99,
            ..AcqOptConfig::default()
        };
        let c = candidates::<f64>(4, &cfg).unwrap();
        assert_eq!(c.len(), 256);
        assert!(c.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
        assert_ne!(c[0], vec![0.5; 4]);
    }
}
