//! Exact Gaussian-process regression on the unit cube.
//!
//! A model is a constant mean plus a stationary ARD kernel (Matérn-5/2 or
//! RBF), conditioned on observations through a dense Cholesky factor of
//! `K + σ²I`. Hyperparameters are fitted by maximizing the log marginal
//! likelihood over log-parameters with multi-start projected BFGS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve, solve_lower, Matrix};
use crate::optim::{minimize_box, BoxOptions};
use crate::qmc::{SobolEngine, MAX_DIMENSION};
use crate::scalar::{dot, Scalar};

/// Jitter multipliers (relative to the signal variance) tried after a plain
/// factorization fails.
pub const JITTER_LADDER: [f64; 7] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

/// Computed variances below `-NEGATIVE_VARIANCE_ALARM` are reported before
/// being clamped to zero.
pub const NEGATIVE_VARIANCE_ALARM: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} input rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("training data contains non-finite values")]
    NonFiniteData,
    #[error("operation needs at least one observation")]
    EmptyData,
    #[error(
        "covariance of size {size} is not positive definite even with jitter {max_jitter:e} \
         (diagonal range [{min_diagonal:e}, {max_diagonal:e}], ratio {diagonal_ratio:e})"
    )]
    NotPositiveDefinite {
        size: usize,
        max_jitter: f64,
        min_diagonal: f64,
        max_diagonal: f64,
        diagonal_ratio: f64,
    },
    #[error("all {0} hyperparameter restarts failed numerically")]
    AllRestartsFailed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Matern52,
    Rbf,
}

/// Stationary ARD kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub lengthscales: Vec<T>,
    pub signal_variance: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(
        family: KernelFamily,
        lengthscales: Vec<T>,
        signal_variance: T,
    ) -> Result<Self, GpError> {
        let spec = Self {
            family,
            lengthscales,
            signal_variance,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check(&self) -> Result<(), GpError> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(GpError::InvalidHyperparameter(
                "lengthscales must be positive and finite".into(),
            ));
        }
        if !positive(self.signal_variance) {
            return Err(GpError::InvalidHyperparameter(
                "signal variance must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Scaled squared distance `Σ ((u_j − v_j) / ℓ_j)²`.
    fn scaled_sq_dist(&self, u: &[T], v: &[T]) -> T {
        u.iter()
            .zip(v)
            .zip(&self.lengthscales)
            .fold(T::zero(), |acc, ((&a, &b), &l)| {
                let t = (a - b) / l;
                acc + t * t
            })
    }

    fn eval_sq_dist(&self, r2: T) -> T {
        let s2 = self.signal_variance;
        match self.family {
            KernelFamily::Rbf => s2 * (-T::lit(0.5) * r2).exp(),
            KernelFamily::Matern52 => {
                let sr = (T::lit(5.0) * r2).sqrt();
                s2 * (T::one() + sr + T::lit(5.0 / 3.0) * r2) * (-sr).exp()
            }
        }
    }

    /// `−2 · ∂k/∂(r²)`, the common factor of every lengthscale derivative:
    /// `∂k/∂ln ℓ_j = lengthscale_factor · (Δ_j / ℓ_j)²`.
    fn lengthscale_factor(&self, r2: T) -> T {
        let s2 = self.signal_variance;
        match self.family {
            KernelFamily::Rbf => s2 * (-T::lit(0.5) * r2).exp(),
            KernelFamily::Matern52 => {
                let sr = (T::lit(5.0) * r2).sqrt();
                T::lit(5.0 / 3.0) * s2 * (T::one() + sr) * (-sr).exp()
            }
        }
    }

    fn eval_unchecked(&self, u: &[T], v: &[T]) -> T {
        self.eval_sq_dist(self.scaled_sq_dist(u, v))
    }
}

/// `k(u, v)`.
pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, u: &[T], v: &[T]) -> Result<T, GpError> {
    for len in [u.len(), v.len()] {
        if len != spec.dim() {
            return Err(GpError::DimensionMismatch {
                expected: spec.dim(),
                got: len,
            });
        }
    }
    Ok(spec.eval_unchecked(u, v))
}

/// Gram matrix `K[i][j] = k(x_i, x_j)` over the rows of `x`.
pub fn kernel_matrix<T: Scalar>(spec: &KernelSpec<T>, x: &Matrix<T>) -> Result<Matrix<T>, GpError> {
    check_cols(spec.dim(), x)?;
    let n = x.nrows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.signal_variance;
        for j in 0..i {
            let v = spec.eval_unchecked(x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn check_cols<T: Scalar>(expected: usize, x: &Matrix<T>) -> Result<(), GpError> {
    if x.ncols() != expected && x.nrows() > 0 {
        return Err(GpError::DimensionMismatch {
            expected,
            got: x.ncols(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeanSpec<T> {
    pub constant: T,
}

/// Kernel, mean and homoscedastic noise variance (standardized units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GpHyperparams<T> {
    pub kernel: KernelSpec<T>,
    pub mean: MeanSpec<T>,
    pub noise_variance: T,
}

impl<T: Scalar> GpHyperparams<T> {
    /// Starting point for fitting: ℓ = 0.5, s² = 1, σ² = 1e-3, m = 0.
    pub fn default_for(dim: usize, family: KernelFamily) -> Self {
        Self {
            kernel: KernelSpec {
                family,
                lengthscales: vec![T::lit(0.5); dim],
                signal_variance: T::one(),
            },
            mean: MeanSpec {
                constant: T::zero(),
            },
            noise_variance: T::lit(1e-3),
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn check(&self) -> Result<(), GpError> {
        self.kernel.check()?;
        if !(self.noise_variance.is_finite() && self.noise_variance >= T::zero()) {
            return Err(GpError::InvalidHyperparameter(
                "noise variance must be finite and nonnegative".into(),
            ));
        }
        if !self.mean.constant.is_finite() {
            return Err(GpError::InvalidHyperparameter("mean must be finite".into()));
        }
        Ok(())
    }

    /// `[ln ℓ_1 … ln ℓ_d, ln s², ln σ², m]`.
    pub fn to_log_params(&self) -> Vec<T> {
        let mut p: Vec<T> = self.kernel.lengthscales.iter().map(|l| l.ln()).collect();
        p.push(self.kernel.signal_variance.ln());
        p.push(self.noise_variance.ln());
        p.push(self.mean.constant);
        p
    }

    pub fn from_log_params(family: KernelFamily, p: &[T]) -> Self {
        let d = p.len() - 3;
        Self {
            kernel: KernelSpec {
                family,
                lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
                signal_variance: p[d].exp(),
            },
            mean: MeanSpec { constant: p[d + 2] },
            noise_variance: p[d + 1].exp(),
        }
    }
}

/// Inputs, standardized targets, and optionally a fixed per-observation
/// noise variance that replaces the homoscedastic `σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainingData<T> {
    x: Matrix<T>,
    y: Vec<T>,
    fixed_noise: Option<Vec<T>>,
}

impl<T: Scalar> TrainingData<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self, GpError> {
        if x.nrows() != y.len() {
            return Err(GpError::LengthMismatch {
                rows: x.nrows(),
                targets: y.len(),
            });
        }
        if !x.as_slice().iter().chain(&y).all(|v| v.is_finite()) {
            return Err(GpError::NonFiniteData);
        }
        Ok(Self {
            x,
            y,
            fixed_noise: None,
        })
    }

    /// Attaches known noise variances, one per observation.
    pub fn with_fixed_noise(mut self, noise: Vec<T>) -> Result<Self, GpError> {
        if noise.len() != self.y.len() {
            return Err(GpError::LengthMismatch {
                rows: self.y.len(),
                targets: noise.len(),
            });
        }
        if !noise.iter().all(|v| v.is_finite() && *v >= T::zero()) {
            return Err(GpError::NonFiniteData);
        }
        self.fixed_noise = Some(noise);
        Ok(self)
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn fixed_noise(&self) -> Option<&[T]> {
        self.fixed_noise.as_deref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn noise_diagonal(&self, theta: &GpHyperparams<T>) -> Vec<T> {
        match &self.fixed_noise {
            Some(v) => v.clone(),
            None => vec![theta.noise_variance; self.len()],
        }
    }
}

/// Lower Cholesky factor of `K + diag(noise) + jitter·I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Factorization<T> {
    pub chol: Matrix<T>,
    pub jitter_used: T,
}

/// Factorizes `K + noise_variance·I`, escalating jitter on failure.
pub fn factorize<T: Scalar>(k: &Matrix<T>, noise_variance: T) -> Result<Factorization<T>, GpError> {
    factorize_with_diagonal(k, &vec![noise_variance; k.nrows()])
}

/// Factorizes `K + diag(noise)`. Tries without jitter first, then each rung
/// of [`JITTER_LADDER`] scaled by the largest diagonal entry of `K`.
pub fn factorize_with_diagonal<T: Scalar>(
    k: &Matrix<T>,
    noise: &[T],
) -> Result<Factorization<T>, GpError> {
    let n = k.nrows();
    let diag = k.diagonal();
    let max_diag = diag.iter().fold(T::zero(), |m, &v| m.max(v));
    let signal = if max_diag > T::zero() {
        max_diag
    } else {
        T::one()
    };
    let mut a = k.clone();
    a.add_diagonal(noise);
    let rungs = std::iter::once(0.0).chain(JITTER_LADDER);
    for rung in rungs {
        let jitter = T::lit(rung) * signal;
        let attempt = if rung == 0.0 {
            cholesky(&a)
        } else {
            let mut aj = a.clone();
            aj.add_diagonal(&vec![jitter; n]);
            cholesky(&aj)
        };
        if let Some(chol) = attempt {
            return Ok(Factorization {
                chol,
                jitter_used: jitter,
            });
        }
    }
    let full = a.diagonal();
    let min_d = full
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.to_f64_lossy()));
    let max_d = full
        .iter()
        .fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64_lossy()));
    Err(GpError::NotPositiveDefinite {
        size: n,
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * signal.to_f64_lossy(),
        min_diagonal: min_d,
        max_diagonal: max_d,
        diagonal_ratio: max_d / min_d,
    })
}

/// Solves `(K + diag(noise) + jitter·I) α = r`, then applies one step of
/// iterative refinement so that near-singular systems still reproduce `r`.
fn refined_solve<T: Scalar>(
    k: &Matrix<T>,
    noise: &[T],
    fact: &Factorization<T>,
    r: &[T],
) -> Vec<T> {
    let mut alpha = cholesky_solve(&fact.chol, r);
    let resid: Vec<T> = (0..r.len())
        .map(|i| {
            let ka = dot(k.row(i), &alpha) + (noise[i] + fact.jitter_used) * alpha[i];
            r[i] - ka
        })
        .collect();
    let step = cholesky_solve(&fact.chol, &resid);
    for (a, s) in alpha.iter_mut().zip(step) {
        *a += s;
    }
    alpha
}

fn half_log_two_pi<T: Scalar>() -> T {
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
}

fn residuals<T: Scalar>(theta: &GpHyperparams<T>, data: &TrainingData<T>) -> Vec<T> {
    data.y.iter().map(|&y| y - theta.mean.constant).collect()
}

fn validate_inputs<T: Scalar>(
    theta: &GpHyperparams<T>,
    data: &TrainingData<T>,
) -> Result<(), GpError> {
    theta.check()?;
    if data.is_empty() {
        return Err(GpError::EmptyData);
    }
    check_cols(theta.dim(), &data.x)
}

/// Log marginal likelihood `log p(y | X, θ)`.
pub fn mll<T: Scalar>(theta: &GpHyperparams<T>, data: &TrainingData<T>) -> Result<T, GpError> {
    validate_inputs(theta, data)?;
    let k = kernel_matrix(&theta.kernel, &data.x)?;
    let fact = factorize_with_diagonal(&k, &data.noise_diagonal(theta))?;
    let r = residuals(theta, data);
    let alpha = cholesky_solve(&fact.chol, &r);
    Ok(mll_from_parts(&fact.chol, &r, &alpha))
}

fn mll_from_parts<T: Scalar>(chol: &Matrix<T>, r: &[T], alpha: &[T]) -> T {
    let n = T::from_usize(r.len()).unwrap_or_else(T::zero);
    let log_det_half = chol.diagonal().iter().map(|v| v.ln()).sum::<T>();
    -T::lit(0.5) * dot(r, alpha) - log_det_half - n * half_log_two_pi::<T>()
}

/// Gradient of [`mll`] with respect to `[ln ℓ_1 … ln ℓ_d, ln s², ln σ², m]`.
/// The `ln σ²` entry is zero when the data carry fixed noise.
pub fn mll_grad<T: Scalar>(
    theta: &GpHyperparams<T>,
    data: &TrainingData<T>,
) -> Result<Vec<T>, GpError> {
    mll_and_grad(theta, data).map(|(_, g)| g)
}

/// Value and gradient in one factorization.
pub fn mll_and_grad<T: Scalar>(
    theta: &GpHyperparams<T>,
    data: &TrainingData<T>,
) -> Result<(T, Vec<T>), GpError> {
    validate_inputs(theta, data)?;
    let kernel = &theta.kernel;
    let d = kernel.dim();
    let n = data.len();
    let k = kernel_matrix(kernel, &data.x)?;
    let fact = factorize_with_diagonal(&k, &data.noise_diagonal(theta))?;
    let r = residuals(theta, data);
    let alpha = cholesky_solve(&fact.chol, &r);
    let value = mll_from_parts(&fact.chol, &r, &alpha);

    // ∂mll/∂p = ½ tr(W ∂K_y/∂p) with W = ααᵀ − K_y⁻¹.
    let kinv = cholesky_inverse(&fact.chol);
    let half = T::lit(0.5);
    let mut grad = vec![T::zero(); d + 3];
    for i in 0..n {
        let w_ii = alpha[i] * alpha[i] - kinv[(i, i)];
        grad[d] += half * w_ii * k[(i, i)];
        if data.fixed_noise.is_none() {
            grad[d + 1] += half * w_ii * theta.noise_variance;
        }
        for j in 0..i {
            // off-diagonal pairs appear twice in the trace
            let w_ij = alpha[i] * alpha[j] - kinv[(i, j)];
            grad[d] += w_ij * k[(i, j)];
            let xi = data.x.row(i);
            let xj = data.x.row(j);
            let r2 = kernel.scaled_sq_dist(xi, xj);
            let factor = w_ij * kernel.lengthscale_factor(r2);
            for (c, ((&a, &b), &l)) in xi.iter().zip(xj).zip(&kernel.lengthscales).enumerate() {
                let t = (a - b) / l;
                grad[c] += factor * t * t;
            }
        }
    }
    grad[d + 2] = alpha.iter().copied().sum();
    Ok((value, grad))
}

/// Box on the fitted parameters, in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
    pub mean: (f64, f64),
    /// Sub-interval of `mean` that start points are drawn from.
    pub mean_start: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            lengthscale: (1e-3, 1e3),
            signal_variance: (1e-4, 1e4),
            noise_variance: (1e-8, 1.0),
            mean: (-5.0, 5.0),
            mean_start: (-1.0, 1.0),
        }
    }
}

impl HyperBounds {
    /// Lower and upper log-parameter vectors.
    fn log_box<T: Scalar>(&self, d: usize) -> (Vec<T>, Vec<T>) {
        let mut lo = vec![T::lit(self.lengthscale.0.ln()); d];
        let mut hi = vec![T::lit(self.lengthscale.1.ln()); d];
        lo.push(T::lit(self.signal_variance.0.ln()));
        hi.push(T::lit(self.signal_variance.1.ln()));
        lo.push(T::lit(self.noise_variance.0.ln()));
        hi.push(T::lit(self.noise_variance.1.ln()));
        lo.push(T::lit(self.mean.0));
        hi.push(T::lit(self.mean.1));
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub family: KernelFamily,
    /// Number of local searches; the first always starts at the default θ.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub bounds: HyperBounds,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern52,
            restarts: 10,
            seed: 0,
            max_iters: 200,
            grad_tol: 1e-6,
            bounds: HyperBounds::default(),
        }
    }
}

/// Deterministic start points in log-parameter space.
///
/// Start 0 is the default θ clamped into the box. The rest come from a Sobol
/// sequence over the box (the mean coordinate over `mean_start`); a nonzero
/// seed applies a seeded Cranley–Patterson shift. Coordinates beyond the
/// Sobol table's dimension are drawn uniformly from the seeded generator.
fn start_points<T: Scalar>(dim: usize, cfg: &FitConfig) -> Vec<Vec<T>> {
    let p = dim + 3;
    let (lo, hi) = cfg.bounds.log_box::<T>(dim);
    let mut lo_s = lo.clone();
    let mut hi_s = hi.clone();
    lo_s[p - 1] = T::lit(cfg.bounds.mean_start.0);
    hi_s[p - 1] = T::lit(cfg.bounds.mean_start.1);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shift: Vec<f64> = (0..p)
        .map(|_| {
            if cfg.seed == 0 {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let sobol_dim = p.min(MAX_DIMENSION);
    let mut engine = SobolEngine::new(sobol_dim).expect("dimension within table");

    let mut starts = Vec::with_capacity(cfg.restarts.max(1));
    let mut first = GpHyperparams::<T>::default_for(dim, cfg.family).to_log_params();
    for ((v, &l), &h) in first.iter_mut().zip(&lo).zip(&hi) {
        *v = v.max(l).min(h);
    }
    starts.push(first);
    for _ in 1..cfg.restarts.max(1) {
        let mut unit: Vec<f64> = engine.next_point().expect("sobol stream not exhausted");
        unit.extend((sobol_dim..p).map(|_| rng.random::<f64>()));
        let point = unit
            .iter()
            .zip(&shift)
            .enumerate()
            .map(|(j, (&u, &s))| {
                let t = (u + s).fract();
                lo_s[j] + T::lit(t) * (hi_s[j] - lo_s[j])
            })
            .collect();
        starts.push(point);
    }
    starts
}

/// Fits θ by multi-start marginal-likelihood maximization and returns the
/// conditioned model. Restarts run in parallel; the winner is the highest
/// final mll, ties going to the lowest restart index.
pub fn fit<T: Scalar>(data: TrainingData<T>, cfg: &FitConfig) -> Result<GpModel<T>, GpError> {
    if data.is_empty() {
        return Err(GpError::EmptyData);
    }
    let dim = data.x.ncols();
    let (lo, mut hi) = cfg.bounds.log_box::<T>(dim);
    let mut lo = lo;
    let fixed_noise = data.fixed_noise.is_some();
    let starts = start_points::<T>(dim, cfg);
    if fixed_noise {
        // σ² does not enter the likelihood; pin its coordinate.
        let i = dim + 1;
        lo[i] = starts[0][i];
        hi[i] = starts[0][i];
    }
    let opts = BoxOptions {
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
    };
    let family = cfg.family;

    let results: Vec<Option<(T, Vec<T>)>> = starts
        .par_iter()
        .map(|start| {
            let objective = |p: &[T]| {
                let theta = GpHyperparams::from_log_params(family, p);
                mll_and_grad(&theta, &data)
                    .ok()
                    .map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()))
            };
            minimize_box(objective, start, &lo, &hi, opts).map(|r| {
                log::trace!("restart finished after {} iterations", r.iterations);
                (-r.value, r.x)
            })
        })
        .collect();

    let mut best: Option<(T, &Vec<T>)> = None;
    for (value, params) in results.iter().flatten() {
        if best.is_none_or(|(b, _)| *value > b) {
            best = Some((*value, params));
        }
    }
    let (_, params) = best.ok_or(GpError::AllRestartsFailed(starts.len()))?;
    let theta = GpHyperparams::from_log_params(family, params);
    GpModel::new(data, theta)
}

/// A GP conditioned on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GpModel<T> {
    data: TrainingData<T>,
    theta: GpHyperparams<T>,
    chol: Matrix<T>,
    alpha: Vec<T>,
    jitter_used: T,
    log_marginal_likelihood: T,
}

impl<T: Scalar> GpModel<T> {
    /// Conditions the GP with hyperparameters `theta` on `data`.
    pub fn new(data: TrainingData<T>, theta: GpHyperparams<T>) -> Result<Self, GpError> {
        theta.check()?;
        check_cols(theta.dim(), &data.x)?;
        if data.is_empty() {
            return Ok(Self::prior_with(data, theta));
        }
        let k = kernel_matrix(&theta.kernel, &data.x)?;
        let noise = data.noise_diagonal(&theta);
        let fact = factorize_with_diagonal(&k, &noise)?;
        let r = residuals(&theta, &data);
        let alpha = refined_solve(&k, &noise, &fact, &r);
        let lml = mll_from_parts(&fact.chol, &r, &alpha);
        Ok(Self {
            data,
            theta,
            chol: fact.chol,
            alpha,
            jitter_used: fact.jitter_used,
            log_marginal_likelihood: lml,
        })
    }

    /// A model with no observations.
    pub fn prior(theta: GpHyperparams<T>) -> Result<Self, GpError> {
        theta.check()?;
        let data = TrainingData {
            x: Matrix::zeros(0, theta.dim()),
            y: Vec::new(),
            fixed_noise: None,
        };
        Ok(Self::prior_with(data, theta))
    }

    fn prior_with(data: TrainingData<T>, theta: GpHyperparams<T>) -> Self {
        Self {
            data,
            theta,
            chol: Matrix::zeros(0, 0),
            alpha: Vec::new(),
            jitter_used: T::zero(),
            log_marginal_likelihood: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &TrainingData<T> {
        &self.data
    }

    pub fn theta(&self) -> &GpHyperparams<T> {
        &self.theta
    }

    pub fn chol(&self) -> &Matrix<T> {
        &self.chol
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn jitter_used(&self) -> T {
        self.jitter_used
    }

    /// Log marginal likelihood of the training data (0 for an empty model).
    pub fn log_marginal_likelihood(&self) -> T {
        self.log_marginal_likelihood
    }

    /// Predictive mean and latent variance at each row of `xq`.
    pub fn posterior(&self, xq: &Matrix<T>) -> Result<PosteriorSummary<T>, GpError> {
        check_cols(self.dim(), xq)?;
        let mut means = Vec::with_capacity(xq.nrows());
        let mut variances = Vec::with_capacity(xq.nrows());
        for q in xq.rows_iter() {
            let (m, v) = self.predict_point(q);
            means.push(m);
            variances.push(v);
        }
        Ok(PosteriorSummary { means, variances })
    }

    /// Posterior at a single point; `q` must have `dim()` entries.
    pub fn predict_point(&self, q: &[T]) -> (T, T) {
        let kernel = &self.theta.kernel;
        let prior_var = kernel.signal_variance;
        let m = self.theta.mean.constant;
        if self.is_empty() {
            return (m, prior_var);
        }
        let kstar: Vec<T> = self
            .data
            .x
            .rows_iter()
            .map(|xi| kernel.eval_unchecked(q, xi))
            .collect();
        let mean = m + dot(&kstar, &self.alpha);
        let v = solve_lower(&self.chol, &kstar);
        let mut var = prior_var - dot(&v, &v);
        if var < T::zero() {
            if var < -T::lit(NEGATIVE_VARIANCE_ALARM) {
                log::warn!("posterior variance {var} clamped to zero");
            }
            var = T::zero();
        }
        (mean, var)
    }
}

/// Predictive means and variances at a set of query points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PosteriorSummary<T> {
    means: Vec<T>,
    variances: Vec<T>,
}

impl<T: Scalar> PosteriorSummary<T> {
    /// Panics when the lengths differ or a variance is negative or
    /// non-finite.
    pub fn new(means: Vec<T>, variances: Vec<T>) -> Self {
        assert_eq!(means.len(), variances.len(), "means/variances length");
        assert!(
            variances.iter().all(|v| v.is_finite() && *v >= T::zero()),
            "variances must be finite and nonnegative"
        );
        Self { means, variances }
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn sd(&self, i: usize) -> T {
        self.variances[i].sqrt()
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// `n` posterior draws at each of `Q` points, stored row-major as `n × Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MCSampleBatch<T> {
    n: usize,
    q: usize,
    samples: Vec<T>,
}

impl<T: Scalar> MCSampleBatch<T> {
    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn num_points(&self) -> usize {
        self.q
    }

    pub fn get(&self, sample: usize, point: usize) -> T {
        self.samples[sample * self.q + point]
    }

    /// All draws at one query point.
    pub fn column(&self, point: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(move |i| self.get(i, point))
    }
}

/// Independent draws `μ + σ·z` with `z` standard normal from a generator
/// seeded by `seed`. Draw order is sample-major, then point order.
pub fn rsample<T: Scalar>(summary: &PosteriorSummary<T>, n: usize, seed: u64) -> MCSampleBatch<T> {
    let q = summary.len();
    let sds: Vec<T> = (0..q).map(|i| summary.sd(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n * q);
    for _ in 0..n {
        for (mean, &sd) in summary.means.iter().zip(&sds) {
            let z: f64 = StandardNormal.sample(&mut rng);
            samples.push(*mean + sd * T::lit(z));
        }
    }
    MCSampleBatch { n, q, samples }
}
