//! Resonance poles of a delayed linear Kuramoto-type evolution equation with
//! a Gaussian frequency density.
//!
//! The model is `du/dt = iM u(t) + (k/2) P u(t - tau)` on `L^2(R, g(w) dw)`,
//! where `M` multiplies by the frequency, `P` projects onto the constants and
//! `g` is the Gaussian density with mean `omega0` and concentration `h`.
//! Its resonance poles are the zeros of the continued characteristic function
//! `F(lambda) = 1 - (k/2) e^{-lambda tau} <A(lambda) 1 | 1>`.
//!
//! Modules, bottom-up:
//!
//! - [`specialfn`]: Lambert W, Faddeeva, complex Gaussian density
//! - [`dispersion`]: characteristic functions and the continued pairings
//! - [`poles`]: argument-principle pole search with Newton refinement
//! - [`stability`]: stability criteria and the stability chart
//! - [`evolution`]: time-domain simulation and the residue expansion

pub mod dispersion;
pub mod error;
pub mod evolution;
pub mod poles;
pub mod quadrature;
pub mod specialfn;
pub mod stability;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Fixed CSV number format: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
