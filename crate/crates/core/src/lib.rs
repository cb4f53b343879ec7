//! Simulation and numerical verification of general-β Jacobi (MANOVA) ensembles.
//!
//! The ensemble is sampled through its bidiagonal factor `B`, with `A = B Bᵀ`
//! carrying the Jacobi eigenvalue law. Around the sampler sit the limiting
//! objects needed to check the asymptotics: the equilibrium density and its
//! `1/n` correction, shifted Chebyshev bases, the limiting covariance of
//! linear statistics, exact rational expected traces, and a few concentration
//! bounds.

// `!(x > 0.0)` is used on purpose so NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod concentration;
pub mod covariance;
pub mod eig;
pub mod error;
pub mod experiments;
pub mod model;
pub mod params;
pub mod paths;
pub mod quadrature;
pub mod spectral;


pub use eig::Spectrum;
pub use covariance::{BasisChange, CovarianceMatrix};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, RunResult};

pub use model::{BetaSpec, SymTridiagonal, TridiagonalFactor};
pub use params::{AsymptoticParams, EnsembleParams, SupportInterval};
pub use paths::{AlternatingBridge, BridgeSet, ExactRational, WeightPolynomial};
pub use spectral::{ChebyshevCoefficients, TestFunction};



/// Library version embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
