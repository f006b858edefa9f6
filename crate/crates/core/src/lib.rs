//! Bayesian hyperparameter optimization with an exact Gaussian-process
//! surrogate.
//!
//! The numerical core ([`gp`], [`acq`], [`acqopt`], [`linalg`]) is generic
//! over [`Scalar`] (`f32` or `f64`); the aliases below fix the common
//! double-precision instantiations. The experiment layer ([`space`],
//! [`smbo`]) works in `f64`.
//!
//! ```no_run
//! use gpbo::{optimize, Arm, Observation, ParameterSpec, SearchSpace, EvalFault};
//!
//! let space = SearchSpace::new(vec![ParameterSpec::range_float("x", 0.0, 1.0)]);
//! let f = |arm: &Arm| -> Result<Observation, EvalFault> {
//!     let x = arm.get_f64("x").unwrap();
//!     Ok(Observation::new((x - 0.3).powi(2)))
//! };
//! let (best, _experiment) = optimize(space, f, true, 20, 0).unwrap();
//! println!("best x = {:?}", best.arm.get_f64("x"));
//! ```

pub mod acq;
pub mod acqopt;
pub mod gp;
pub mod linalg;
mod optim;
pub mod qmc;
pub mod scalar;
pub mod smbo;
pub mod space;

pub use acq::{AcqError, AcquisitionSpec};
pub use acqopt::{maximize_acquisition, AcqOptConfig, AcqOptError};
pub use gp::{FitConfig, GpError, KernelFamily, TrainingData};
pub use qmc::{QmcError, SobolEngine};
pub use scalar::Scalar;
pub use smbo::{
    optimize, optimize_with, BestResult, EvalFault, Evaluator, Experiment, GenerationStrategy,
    Generator, OptimizeError, SmboError, Trial, TrialStatus,
};
pub use space::{
    Arm, Observation, ParamValue, ParameterKind, ParameterSpec, RangeType, SearchSpace, SpaceError,
    UnitVector, ValidationReport,
};

pub type Matrix = linalg::Matrix<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type GpModelF32 = gp::GpModel<f32>;
pub type GpHyperparams = gp::GpHyperparams<f64>;
pub type KernelSpec = gp::KernelSpec<f64>;
pub type MeanSpec = gp::MeanSpec<f64>;
pub type PosteriorSummary = gp::PosteriorSummary<f64>;
pub type MCSampleBatch = gp::MCSampleBatch<f64>;
pub type Standardizer = space::Standardizer<f64>;
