//! Grid-based variational solver and diagnostics for nonlinear
//! Schrödinger-Poisson systems  -Δu + λu + ρ(x) φ_u u = μ u_+^p  with the
//! nonlocal Newtonian potential φ_u of the charge ρu².
//!
//! The crate provides the discrete calculus (grid, spectral operators,
//! free-space Coulomb solver), the energy functionals and their identities,
//! critical-point solvers with radial oracles, closed-form bound
//! diagnostics, and the semiclassical concentration toolkit.

pub mod charge;
pub mod coulomb;
pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod grid;
pub mod semiclassical;
pub mod solvers;
pub mod spectral;

pub use charge::{ChargeDensity, RhoVariant};
pub use error::{CoreError, Result};
pub use grid::{Grid, ScalarField};
