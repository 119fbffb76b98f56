//! Quantitative Gaussian approximation for function-valued Wiener chaos.
//!
//! The crate simulates multiple Wiener-Itô integrals built from finite-rank
//! symmetric kernels, decomposes their carré du champ into contraction
//! integrals, and assembles every distance bound into an auditable
//! [`bounds::BoundCertificate`]. Empirical bounded-Lipschitz (flat-metric)
//! distances between path samples are computed by exact truncated-cost
//! optimal transport.
//!
//! Layout:
//! - [`kernels`]: sparse symmetric tensor kernels, contraction calculus, norms
//! - [`chaos`]: pathwise chaos sampling, Hermite polynomials, product formula
//! - [`gamma`]: carré du champ decomposition and deviation bounds
//! - [`regularization`]: ε-smoothing of paths and Hölder/GRR constants
//! - [`bounds`]: distance-bound certificates
//! - [`flatmetric`]: empirical flat-metric via exact transport
//! - [`hermite`]: the Gaussian-subordinated Hermite model and its rate experiment

pub mod bounds;
pub mod chaos;
mod error;
pub mod flatmetric;
pub mod gamma;
pub mod hermite;
pub mod kernels;
pub mod mc;
pub mod regularization;

pub use error::{Error, Result};
