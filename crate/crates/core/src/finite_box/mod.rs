//! Finite Dirichlet box `[-L/2, L/2]³`: lattice Hamiltonian, spectra and
//! finite-volume observables.
//!
//! The field has no third component, so `H_L(ω)` splits into the transverse
//! lattice problem, solved numerically, plus the exact longitudinal Dirichlet
//! levels `π²k²/(2L²)`.

pub mod eigen;
pub mod hamiltonian;
pub mod kernel;
pub mod observables;
pub mod spectrum;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::{EigenBasis, LanczosPolicy, SolverChoice};
pub use hamiltonian::{DiscreteHamiltonian2D, Gauge};
pub use kernel::{eigen_basis, hellmann_feynman_magnetization, reconstruct_kernel, GridPoint};
pub use observables::{
    density_box, pressure_box, pressure_box_series, susceptibility_box, trace_heat, weyl_tail_bound,
};
pub use spectrum::{
    read_spectrum_cache, spectrum_3d, spectrum_3d_in_gauge, spectrum_3d_with, write_spectrum_cache, SpectralResult, SpectrumMeta, SpectrumStore,
};

/// Largest accepted transverse grid spacing.
pub const MAX_SPACING: f64 = 0.25;
/// Smallest accepted transverse grid size.
pub const MIN_N_PERP: usize = 16;
/// Relative weight below which discarded levels are ignored when choosing
/// `e_max`.
pub const TAIL_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    side_l: f64,
    n_perp: usize,
    e_max: f64,
    longitudinal_mode_cap: usize,
}

impl BoxSpec {
    /// `cap = None` keeps every longitudinal mode below `e_max`.
    pub fn new(side_l: f64, n_perp: usize, e_max: f64, cap: Option<usize>) -> Result<Self> {
        if !(side_l >= 1.0 && side_l.is_finite()) {
            return Err(Error::domain(format!("box side must be >= 1, got {side_l}")));
        }
        if n_perp < MIN_N_PERP {
            return Err(Error::domain(format!("n_perp must be >= {MIN_N_PERP}, got {n_perp}")));
        }
        if !(e_max > 0.0 && e_max.is_finite()) {
            return Err(Error::domain(format!("e_max must be positive, got {e_max}")));
        }
        let h = side_l / (n_perp + 1) as f64;
        if h > MAX_SPACING {
            return Err(Error::Resolution(format!(
                "grid spacing {h} exceeds {MAX_SPACING} (L = {side_l}, n_perp = {n_perp})"
            )));
        }
        let natural = (side_l * (2.0 * e_max).sqrt() / PI).floor().max(1.0) as usize;
        let cap = cap.unwrap_or(natural);
        if cap == 0 {
            return Err(Error::domain("longitudinal_mode_cap must be >= 1"));
        }
        Ok(Self {
            side_l,
            n_perp,
            e_max,
            longitudinal_mode_cap: cap,
        })
    }

    /// Spec with transverse spacing exactly `h`: `n_perp = L/h - 1` must be
    /// an integer to within `1e-9`.
    pub fn with_spacing(side_l: f64, h: f64, e_max: f64) -> Result<Self> {
        let cells = side_l / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells || rounded < 2.0 {
            return Err(Error::Resolution(format!(
                "box side {side_l} is not a whole number of cells of width {h}"
            )));
        }
        Self::new(side_l, rounded as usize - 1, e_max, None)
    }

    pub fn side(&self) -> f64 {
        self.side_l
    }

    pub fn n_perp(&self) -> usize {
        self.n_perp
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn longitudinal_mode_cap(&self) -> usize {
        self.longitudinal_mode_cap
    }

    pub fn spacing(&self) -> f64 {
        self.side_l / (self.n_perp + 1) as f64
    }

    pub fn volume(&self) -> f64 {
        self.side_l.powi(3)
    }

    /// `π²k²/(2L²)`.
    pub fn longitudinal_level(&self, k: usize) -> f64 {
        let q = PI * k as f64 / self.side_l;
        0.5 * q * q
    }

    /// Discretization slack `C h²` used by the spectral lower bounds, with
    /// `C` from the leading lattice-dispersion error at energy `e_max`.
    pub fn discretization_tolerance(&self) -> f64 {
        let h = self.spacing();
        h * h * (1.0 + self.e_max * self.e_max / 6.0)
    }
}

/// `e_max = ω/2 + (ln(|z|/ε) + 1)/β` with `ε = 1e-12`, but never below the
/// tail guard `ω/2 + 10/β`.
pub fn truncation_energy(beta: f64, omega: f64, z_abs_max: f64) -> f64 {
    let guard = 0.5 * omega + 10.0 / beta;
    let chosen = 0.5 * omega + ((z_abs_max.max(TAIL_EPSILON) / TAIL_EPSILON).ln() + 1.0) / beta;
    chosen.max(guard)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(BoxSpec::new(6.0, 59, 30.0, None).is_ok());
        assert!(matches!(BoxSpec::new(6.0, 16, 30.0, None), Err(Error::Resolution(_))));
        assert!(matches!(BoxSpec::new(2.0, 15, 30.0, None), Err(Error::Domain(_))));
        assert!(BoxSpec::new(0.5, 20, 30.0, None).is_err());
        assert!(BoxSpec::new(2.0, 20, 0.0, None).is_err());
    }

    #[test]
    fn spacing_is_exact() {
        let s = BoxSpec::with_spacing(6.0, 0.1, 30.0).unwrap();
        assert_eq!(s.n_perp(), 59);
        assert!((s.spacing() - 0.1).abs() < 1e-15);
        assert!(BoxSpec::with_spacing(6.05, 0.1, 30.0).is_err());
    }

    #[test]
    fn longitudinal_cap_covers_e_max() {
        let s = BoxSpec::new(6.0, 59, 30.0, None).unwrap();
        let cap = s.longitudinal_mode_cap();
        assert!(s.longitudinal_level(cap) <= 30.0);
        assert!(s.longitudinal_level(cap + 1) > 30.0);
    }

    #[test]
    fn truncation_energy_examples() {
        let e = truncation_energy(1.0, 1.0, 0.5);
        assert!((e - (0.5 + (0.5e12f64).ln() + 1.0)).abs() < 1e-12);
        assert_eq!(truncation_energy(1.0, 0.0, 1e-20), 10.0);
    }
}
