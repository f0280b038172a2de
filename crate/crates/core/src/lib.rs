//! Monte Carlo wavelet frames built from kernel integral operators.
//!
//! Samples `x_1, …, x_N` drawn from a measure `ρ` define an empirical integral
//! operator `T̂` whose spectral filters `G_j(T̂)` turn the kernel sections
//! `K_{x_i}` into a Parseval frame for the empirical measure. As `N` grows the
//! frame approaches the continuous wavelet frame of the operator `T` of `ρ`.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: domains, points and reproducing kernels.
//! - [`filters`]: spectral filter families and the frame filters `G_j`.
//! - [`operator`]: samples, kernel matrices, eigensystems, Nyström extension.
//! - [`reference`]: the operator `T` of the sampling measure itself.
//! - [`frame`]: wavelets, coefficients, frame operators, reconstruction.
//! - [`signals`]: source-condition test signals and RKHS residual norms.
//! - [`experiments`]: seeded Monte Carlo runs and rate fits.
//! - [`config`]: the TOML experiment schema.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod frame;
pub mod kernels;
mod linalg;
pub mod operator;
pub mod reference;
pub mod rng;
pub mod signals;

pub use config::{ExperimentConfig, TauRule};
pub use error::{Error, Result};
pub use experiments::{fit_rate, ExperimentKind, ExperimentReport, RateFit, SCHEMA_VERSION};
pub use filters::{FilterFamily, Method, Qualification};
pub use frame::{default_tau, CoefficientTable, ParsevalReport, WaveletFrame};
pub use kernels::{CircleKernel, Domain, FourierProfile, Graph, Kernel, Point};
pub use operator::{
    apply_empirical, draw_samples, eigendecompose, hilbert_norm, hs_distance, kernel_matrix,
    nystrom_extend, EigenSystem, HsDistance, SampleSet, WeightedOperator,
};
pub use reference::{reference_operator, ReferenceOperator};
pub use signals::{
    approximation_error, evaluate_signal, make_sobolev_signal, reconstruction_error, SignalSpec,
};

pub use faer::Mat;
