//! Pseudo-spectral solver for the fractional Navier-Stokes-Voigt and
//! fractional Euler-Voigt equations on the unit torus `[0,1]^3`.
//!
//! The state is advanced in the functional form
//!
//! ```text
//! (I + alpha^{2r} A^r) du/dt + B(u, u) + nu A u = f
//! ```
//!
//! with `A` the Stokes operator and `B(u, v) = P((u.grad) v)`. Setting
//! `alpha = 0` recovers Navier-Stokes (or Euler for `nu = 0`).

pub mod diagnostics;
pub mod io;
pub mod nonlinear;
pub mod oracle;
pub mod solver;
pub mod spectral;
pub mod study;
pub mod transform;

pub use rustfft::num_complex::Complex64;
