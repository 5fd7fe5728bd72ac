//! Covariant (Jeffreys) priors from the Fisher-information metric,
//! marginal likelihoods, model posteriors and model averaging, plus
//! closed-form treatments of classic prior paradoxes. Every closed form is
//! paired with an independent quadrature or Monte-Carlo oracle.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::manual_is_multiple_of,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod casestudies;
pub mod fixture;
pub mod geometry;
pub mod inference;
pub mod linalg;
pub mod oracle;
pub mod real;
pub mod specfun;

pub use linalg::Matrix;
pub use real::Real;

/// f64 instantiations of the generic types.
pub type Matrix64 = Matrix<f64>;
pub type IntegrationSpec64 = oracle::IntegrationSpec<f64>;
pub type OracleEstimate64 = oracle::OracleEstimate<f64>;
pub type Model64 = geometry::LogDensityModel<f64>;
pub type Prior64 = inference::Prior<f64>;
pub type Evidence64 = inference::Evidence<f64>;
pub type FisherMatrix64 = geometry::FisherMatrix<f64>;
pub type GriddedPosterior64 = inference::GriddedPosterior<f64>;
