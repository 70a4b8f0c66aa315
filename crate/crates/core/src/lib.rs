//! Grand-canonical thermodynamics of a perfect charged Fermi gas in a
//! constant magnetic field.
//!
//! Units: `ħ = m = k_B = 1`, with the charge absorbed so that the field
//! enters only through the Larmor frequency `ω`. The one-particle operator
//! is `H(ω) = ½(-i∇ - ω a)²` with the symmetric gauge `a(x) = ½ e₃ ∧ x`.
//!
//! * [`fermi`]: Fermi functions `f_α` on the cut plane and their Taylor jets.
//! * [`bulk`]: infinite-volume pressure, density and field derivatives.
//! * [`mehler`]: the whole-space magnetic heat kernel and its phase/flux
//!   combinatorics.
//! * [`finite_box`]: discretized Dirichlet box, spectra and finite-volume
//!   observables.
//! * [`output`]: JSON with 17-significant-digit floats.
//! * [`harness`]: thermodynamic-limit convergence studies.

extern crate openblas_src;

pub mod bulk;
pub mod error;
pub mod fermi;
pub mod finite_box;
pub mod finite_diff;
pub mod harness;
pub mod jet;
pub mod mehler;
pub mod output;
pub mod quadrature;

pub use error::{Error, Result};
