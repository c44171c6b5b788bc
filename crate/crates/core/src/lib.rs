//! Linear quantum stabilization of the Rayleigh-Taylor problem in a slab.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`profiles`]: equilibrium density profiles with derivatives to order 8,
//!   condition flags and the hydrostatic pressure.
//! * [`slabgrid`]: collocation grids on `(0, h)`, differentiation and quadrature.
//! * [`energetics`]: potential-energy functionals, the `r / rho'` identity,
//!   quantum stress decomposition and Rayleigh quotients.
//! * [`spectra`]: the critical scaled Planck constant, the single-mode
//!   linearized operator and dispersion scans.
//! * [`evolve`]: trapezoidal time stepping of a single horizontal mode with
//!   energy bookkeeping.
//! * [`exponents`]: the decay-exponent parameter algebra.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod jet;
mod linalg;

pub mod energetics;
pub mod evolve;
pub mod exponents;
pub mod profiles;
pub mod slabgrid;
pub mod spectra;

pub use error::{Error, Result};
pub use jet::Jet;

pub use num_complex::Complex64;
