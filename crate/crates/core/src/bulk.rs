//! Infinite-volume observables.
//!
//! For `ω > 0` the pressure is the Landau-level sum
//! `P∞ = ω (2πβ)^{-3/2} Σ_k f_{3/2}(z e^{-(k+½)βω})`; at zero field it is
//! `β^{-1} (2πβ)^{-3/2} f_{5/2}(z)`. Below a small field threshold the level
//! sum is replaced by the even Taylor expansion of the heat-kernel series
//! `P∞ = β^{-1} Σ_n (-1)^{n+1} z^n/n · G∞diag(nβ, ω)`, whose `ω^{2k}`
//! coefficients are `a_k (β/2)^{2k} f_{5/2-2k}(z)` with `a_k` the Taylor
//! coefficients of `x / sinh x`.
//!
//! Field derivatives are carried as [`TaylorJet`]s in `ω`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermi::{fermi_any_order, fermi_f_jet, CutPlaneFugacity};
use crate::jet::{factorial, TaylorJet};
use crate::mehler::diagonal_kernel;

/// Highest field derivative offered by [`susceptibility_bulk`].
pub const MAX_SUSCEPTIBILITY_ORDER: usize = 8;

/// An evaluation point `(β, z, ω)` with `z` off the cut `(-∞, -e^{βω/2}]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThermoPoint", into = "RawThermoPoint")]
pub struct ThermoPoint {
    beta: f64,
    z: Complex64,
    omega: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct RawThermoPoint {
    beta: f64,
    z: Complex64,
    omega: f64,
}

impl TryFrom<RawThermoPoint> for ThermoPoint {
    type Error = Error;
    fn try_from(raw: RawThermoPoint) -> Result<Self> {
        ThermoPoint::new(raw.beta, raw.z, raw.omega)
    }
}

impl From<ThermoPoint> for RawThermoPoint {
    fn from(tp: ThermoPoint) -> Self {
        RawThermoPoint {
            beta: tp.beta,
            z: tp.z,
            omega: tp.omega,
        }
    }
}

impl ThermoPoint {
    pub fn new(beta: f64, z: Complex64, omega: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be > 0, got {beta}")));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::domain(format!("omega must be >= 0, got {omega}")));
        }
        CutPlaneFugacity::new(z, cut_end(beta, omega))?;
        Ok(Self { beta, z, omega })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn fugacity(&self) -> CutPlaneFugacity {
        CutPlaneFugacity::new(self.z, cut_end(self.beta, self.omega))
            .expect("validated at construction")
    }

    /// Same `(β, z)` at another field strength.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.beta, self.z, omega)
    }

    pub fn with_z(&self, z: Complex64) -> Result<Self> {
        Self::new(self.beta, z, self.omega)
    }
}

/// `e^{βω/2}`, where the excluded ray of fugacities begins.
pub fn cut_end(beta: f64, omega: f64) -> f64 {
    (0.5 * beta * omega).exp()
}

/// Truncation controls for the Landau-level sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauSumPolicy {
    /// Maximum number of Landau levels summed.
    pub level_cap: usize,
    /// Relative bound on the discarded tail.
    pub tail_tol: f64,
    /// Dimensionless switch point: the small-field expansion is used when
    /// `βω ≤ small_omega_threshold`.
    pub small_omega_threshold: f64,
}

impl Default for LandauSumPolicy {
    fn default() -> Self {
        Self {
            level_cap: 200_000,
            tail_tol: 1e-14,
            small_omega_threshold: 5e-2,
        }
    }
}

impl LandauSumPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.level_cap < 16 {
            return Err(Error::domain("level_cap must be at least 16"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= 1e-6) {
            return Err(Error::domain("tail_tol must lie in (0, 1e-6]"));
        }
        if !(self.small_omega_threshold > 0.0) {
            return Err(Error::domain("small_omega_threshold must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Observable {
    Pressure,
    Density,
}

impl Observable {
    /// Order of the Fermi function inside the Landau sum.
    fn landau_order(self) -> f64 {
        match self {
            Observable::Pressure => 1.5,
            Observable::Density => 0.5,
        }
    }
}

const MAX_SMALL_FIELD_TERMS: usize = 13;

/// Taylor coefficients `a_k` of `x / sinh x = Σ a_k x^{2k}`.
fn x_over_sinh_coefficients(count: usize) -> Vec<f64> {
    // Bernoulli numbers B_{2k}, k = 0..=12.
    const BERNOULLI_EVEN: [f64; 13] = [
        1.0,
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
        -174611.0 / 330.0,
        854513.0 / 138.0,
        -236364091.0 / 2730.0,
    ];
    (0..count)
        .map(|k| (2.0 - 4f64.powi(k as i32)) * BERNOULLI_EVEN[k] / factorial(2 * k))
        .collect()
}

fn thermal_prefactor(beta: f64) -> f64 {
    (2.0 * PI * beta).powf(-1.5)
}

fn uses_small_field(tp: &ThermoPoint, policy: &LandauSumPolicy) -> bool {
    tp.beta * tp.omega <= policy.small_omega_threshold
}

/// Jet of the even small-field expansion. At least `min_terms` powers
/// `ω^0..ω^{2(min_terms-1)}` are kept; further terms are added until they
/// drop below roundoff or the Fermi function of the next order is out of reach.
fn small_field_jet(
    tp: &ThermoPoint,
    order: usize,
    min_terms: usize,
    observable: Observable,
) -> Result<TaylorJet> {
    let beta = tp.beta;
    let (top_order, prefactor) = match observable {
        Observable::Pressure => (2.5, thermal_prefactor(beta) / beta),
        Observable::Density => (1.5, thermal_prefactor(beta)),
    };
    let omega = TaylorJet::variable(tp.omega, order)?;
    let omega_sq = &omega * &omega;
    let a = x_over_sinh_coefficients(MAX_SMALL_FIELD_TERMS);
    let mut acc = TaylorJet::constant(Complex64::new(0.0, 0.0), order, tp.omega)?;
    let mut power = TaylorJet::constant(Complex64::new(1.0, 0.0), order, tp.omega)?;
    for (k, ak) in a.iter().enumerate() {
        let f = match fermi_any_order(top_order - 2.0 * k as f64, tp.z) {
            Ok(f) => f,
            Err(_) if k >= min_terms => break,
            Err(e) => return Err(e),
        };
        let term = power.scale(f * (ak * (0.5 * beta).powi(2 * k as i32)));
        acc = &acc + &term;
        if k + 1 >= min_terms {
            let scale0 = acc.coeff(0).norm();
            let negligible = (0..=order).all(|j| {
                term.coeff(j).norm() <= f64::EPSILON * (acc.coeff(j).norm() + scale0 * beta.powi(j as i32))
            });
            if negligible {
                break;
            }
        }
        power = &power * &omega_sq;
    }
    Ok(acc.scale(Complex64::new(prefactor, 0.0)))
}

/// Jet of `ω Σ_k f_α(z e^{-(k+½)βω})` around `tp.omega > 0`.
fn landau_jet(
    tp: &ThermoPoint,
    order: usize,
    alpha: f64,
    policy: &LandauSumPolicy,
) -> Result<TaylorJet> {
    let (beta, omega0, z) = (tp.beta, tp.omega, tp.z);
    let zero = Complex64::new(0.0, 0.0);
    let mut sum = TaylorJet::constant(zero, order, omega0)?;
    if z.norm() == 0.0 {
        return Ok(sum);
    }
    let ratio = (-beta * omega0).exp();
    for k in 0..policy.level_cap {
        let c = (k as f64 + 0.5) * beta;
        let w0 = z * (-c * omega0).exp();
        // argument jet z e^{-cω} around ω0
        let coeffs = (0..=order)
            .map(|j| w0 * ((-c).powi(j as i32) / factorial(j)))
            .collect();
        let arg = TaylorJet::from_coefficients(coeffs, omega0)?;
        let term = fermi_f_jet(alpha, &arg)?;
        sum = &sum + &term;

        // Remainder bound: |f_{α-j}(w)| ≤ j! |w| / (1-|w|)^{j+1} for |w| < 1,
        // and consecutive levels shrink by at least r = ((k+2.5)/(k+1.5))^N e^{-βω}.
        let next = w0.norm() * ratio;
        if next < 0.5 {
            let c_next = c + beta;
            let growth = ((k as f64 + 2.5) / (k as f64 + 1.5)).powi(order as i32) * ratio;
            if growth < 1.0 {
                let scale0 = sum.coeff(0).norm();
                let done = (0..=order).all(|j| {
                    // coefficient j of a level is f_{α-j}(w) (-c)^j / j!
                    let t = c_next.powi(j as i32) * next / (1.0 - next).powi(j as i32 + 1);
                    let remainder = t / (1.0 - growth);
                    let scale = sum.coeff(j).norm() + scale0 * beta.powi(j as i32);
                    remainder <= policy.tail_tol * scale
                });
                if done {
                    let omega = TaylorJet::variable(omega0, order)?;
                    return Ok(&omega * &sum);
                }
            }
        }
    }
    Err(Error::Truncation(format!(
        "Landau sum not converged after {} levels (beta={beta}, omega={omega0}, z={z})",
        policy.level_cap
    )))
}

fn bulk_jet(
    tp: &ThermoPoint,
    order: usize,
    observable: Observable,
    policy: &LandauSumPolicy,
) -> Result<TaylorJet> {
    policy.validate()?;
    if uses_small_field(tp, policy) {
        let min_terms = (order / 2 + 3).min(MAX_SMALL_FIELD_TERMS);
        return small_field_jet(tp, order, min_terms, observable);
    }
    let jet = landau_jet(tp, order, observable.landau_order(), policy)?;
    let beta = tp.beta;
    let prefactor = match observable {
        Observable::Pressure => thermal_prefactor(beta),
        Observable::Density => beta * thermal_prefactor(beta),
    };
    Ok(jet.scale(Complex64::new(prefactor, 0.0)))
}

/// Taylor jet of `P∞(β, z, ·)` around `tp.omega`.
pub fn pressure_bulk_jet(
    tp: &ThermoPoint,
    order: usize,
    policy: &LandauSumPolicy,
) -> Result<TaylorJet> {
    bulk_jet(tp, order, Observable::Pressure, policy)
}

/// Taylor jet of `ρ∞(β, z, ·)` around `tp.omega`.
pub fn density_bulk_jet(
    tp: &ThermoPoint,
    order: usize,
    policy: &LandauSumPolicy,
) -> Result<TaylorJet> {
    bulk_jet(tp, order, Observable::Density, policy)
}

/// Bulk pressure `P∞(β, z, ω)`.
pub fn pressure_bulk(tp: &ThermoPoint, policy: &LandauSumPolicy) -> Result<Complex64> {
    Ok(pressure_bulk_jet(tp, 0, policy)?.value())
}

/// Bulk density `ρ∞ = β z ∂_z P∞`.
pub fn density_bulk(tp: &ThermoPoint, policy: &LandauSumPolicy) -> Result<Complex64> {
    Ok(density_bulk_jet(tp, 0, policy)?.value())
}

/// Generalized susceptibility `χ∞^N = ∂^N P∞ / ∂ω^N`.
pub fn susceptibility_bulk(
    tp: &ThermoPoint,
    n: usize,
    policy: &LandauSumPolicy,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::domain("susceptibility order must be >= 1"));
    }
    if n > MAX_SUSCEPTIBILITY_ORDER {
        return Err(Error::Order {
            requested: n,
            max: MAX_SUSCEPTIBILITY_ORDER,
        });
    }
    Ok(pressure_bulk_jet(tp, n, policy)?.derivative(n))
}

/// Partial sum of the heat-kernel series
/// `β^{-1} Σ_{n=1}^{n_max} (-1)^{n+1} z^n/n · G∞diag(nβ, ω)`; needs `|z| < 1`.
pub fn pressure_series_smallz(tp: &ThermoPoint, n_max: usize) -> Result<Complex64> {
    let z = tp.z;
    if z.norm() >= 1.0 {
        return Err(Error::domain(format!("series needs |z| < 1, got |z| = {}", z.norm())));
    }
    if n_max == 0 {
        return Err(Error::domain("n_max must be >= 1"));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for n in 1..=n_max {
        power *= z;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sum += power * (sign / n as f64 * diagonal_kernel(n as f64 * tp.beta, tp.omega));
    }
    Ok(sum / tp.beta)
}

/// Bound on the error of [`pressure_series_smallz`]:
/// `|z|^{n_max+1}/(1-|z|) · G∞diag((n_max+1)β, ω) / β`.
pub fn pressure_series_smallz_bound(tp: &ThermoPoint, n_max: usize) -> f64 {
    let r = tp.z.norm();
    r.powi(n_max as i32 + 1) / (1.0 - r) * diagonal_kernel((n_max + 1) as f64 * tp.beta, tp.omega)
        / tp.beta
}
