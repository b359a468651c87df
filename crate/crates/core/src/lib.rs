//! Exact symbolic-numeric engine for spectral distributions of self-adjoint
//! matrix polynomials in freely independent random variables.
//!
//! The crate computes exact rational moments under the canonical trace,
//! reconstructs a bivariate annihilating polynomial for the Cauchy transform
//! of the spectral measure, inverts it to a density profile with atom
//! detection and lattice snapping, and cross-checks everything against
//! independent combinatorial and Monte Carlo oracles.
//!
//! Module layout:
//! - [`scalar`]: exact Gaussian-rational coefficients.
//! - [`ncpoly`]: noncommutative *-polynomials, matrix polynomials, difference
//!   quotients.
//! - [`moments`]: trace oracles and exact moment sequences.
//! - [`series`]: formal power series, the semicircular word series and its
//!   defining system, annihilator reconstruction.
//! - [`cauchy`]: branch-tracked Cauchy transform evaluation, densities,
//!   atoms, support components, spectral diagnostics.
//! - [`commutative`]: exact multivariate polynomial matrices over product
//!   measures and expected kernel traces.
//! - [`rmt`]: random matrix sampling and empirical comparisons.
//! - [`cli`]: problem-spec parsing and the report pipeline.

pub mod cauchy;
pub mod cli;
pub mod commutative;
pub mod moments;
pub mod ncpoly;
pub mod rmt;
pub mod scalar;
pub mod series;
