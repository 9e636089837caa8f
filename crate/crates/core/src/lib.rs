//! Desk-scale simulation of a gravimeter built from ultracold atoms in
//! gravitationally tilted, spin-dependent optical lattices.
//!
//! The pipeline is split the same way the measurement is:
//!
//! - [`params`]: physical configuration and the quantities derived from it.
//! - [`phasebook`]: every phase accumulated through shift, pulse and hold.
//! - [`dicke`]: permutation-symmetric N-atom spin states (coherent and
//!   one-axis-twisted inputs).
//! - [`analytic`]: closed-form spin-population moments of the final state.
//! - [`oracle`]: brute-force bosonic Fock-space simulation of the whole
//!   sequence, plus a first-quantized second route.
//! - [`sensitivity`]: gravity uncertainty, scaling fits, fringes and
//!   robustness against lattice dislocation.
//! - [`cli`]: config-driven batch front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod analytic;
pub mod cli;
pub mod dicke;
mod error;
pub mod io;
pub mod oracle;
pub mod par;
pub mod params;
pub mod phasebook;
pub mod sensitivity;

pub use error::{Error, Result};

/// Reduced Planck constant in J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;

pub use num_complex::Complex64 as C64;
