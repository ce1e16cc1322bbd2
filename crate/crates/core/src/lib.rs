//! Goal-oriented sensitivity analysis.
//!
//! A contrast `psi(y; theta)` characterizes a feature of the output law (mean,
//! quantile, exceedance probability, density, likelihood parameter). The
//! index of a variable subset measures how much knowing those inputs lowers
//! the expected contrast at its optimum, normalized to `[0, 1]`. With the
//! quadratic mean contrast the index is the first-order Sobol index.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod contrast;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod sampling;
pub mod scalar;

pub use contrast::{ContrastSpec, FamilyKind, FeatureValue, LikelihoodFamily};
pub use error::{GosaError, Result};
pub use estimator::{
    estimate_index, estimate_index_sweep, pick_freeze_sobol, EstimatorConfig, IndexEstimate, InnerMode,
};
pub use grid::Grid;
pub use model::{MarginalSpec, ModelSpec};
pub use oracle::OracleResult;
pub use sampling::{draw_marginal, sample_matrix, uniform_at, StreamKey};
pub use scalar::Real;

pub type ContrastSpec64 = ContrastSpec<f64>;
pub type FeatureValue64 = FeatureValue<f64>;
pub type LikelihoodFamily64 = LikelihoodFamily<f64>;
pub type Grid64 = Grid<f64>;
pub type MarginalSpec64 = MarginalSpec<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type IndexEstimate64 = IndexEstimate<f64>;
pub type OracleResult64 = OracleResult<f64>;

pub type ContrastSpec32 = ContrastSpec<f32>;
pub type ModelSpec32 = ModelSpec<f32>;
pub type IndexEstimate32 = IndexEstimate<f32>;
