//! Finite-volume pressure, density, heat trace and field derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use super::spectrum::{SpectralResult, SpectrumStore};
use super::BoxSpec;
use crate::bulk::ThermoPoint;
use crate::error::{Error, Result};
use crate::finite_diff::{check_tolerance, richardson_from_samples, Derivative, StencilPolicy};
use crate::quadrature::{pairwise_sum, pairwise_sum_real};

/// Highest field derivative available from the stencils.
pub const MAX_BOX_SUSCEPTIBILITY_ORDER: usize = 4;
/// Accepted Weyl tail weight relative to the retained log-sum.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Upper incomplete gamma `Γ(3/2, x) = √x e^{-x} + (√π/2) erfc(√x)`.
fn upper_gamma_three_halves(x: f64) -> f64 {
    let r = x.sqrt();
    r * (-x).exp() + 0.5 * PI.sqrt() * erfc(r)
}

/// Weyl estimate of `Σ_{E > e_max} |z| e^{-βE}`, using the free density of
/// states `L³ √(2E) / (2π²)`.
pub fn weyl_tail_bound(side: f64, beta: f64, z_abs: f64, e_max: f64) -> f64 {
    z_abs * side.powi(3) * 2f64.sqrt() / (2.0 * PI * PI) * beta.powf(-1.5)
        * upper_gamma_three_halves(beta * e_max)
}

fn check_point(sr: &SpectralResult, tp: &ThermoPoint) -> Result<()> {
    if sr.meta.omega != tp.omega().abs() {
        return Err(Error::domain(format!(
            "spectrum was computed at omega = {}, evaluation point has omega = {}",
            sr.meta.omega,
            tp.omega()
        )));
    }
    let guard = 0.5 * tp.omega().abs() + 10.0 / tp.beta();
    if sr.meta.spec.e_max() < guard {
        return Err(Error::Truncation(format!(
            "e_max = {} is below the tail guard omega/2 + 10/beta = {guard}",
            sr.meta.spec.e_max()
        )));
    }
    Ok(())
}

/// `w_j = z e^{-βE_j}`, rejecting points where `1 + w_j` reaches the
/// negative real axis (a pole or branch point of the log-sum).
fn boltzmann_weights(sr: &SpectralResult, tp: &ThermoPoint) -> Result<Vec<Complex64>> {
    let z = tp.z();
    let beta = tp.beta();
    sr.eigenvalues
        .iter()
        .map(|&e| {
            let w = z * (-beta * e).exp();
            let one_plus = w + 1.0;
            if one_plus.re <= 0.0 && one_plus.im.abs() < 1e-12 {
                return Err(Error::domain(format!(
                    "z = {z} is within 1e-12 of the finite-volume pole at -e^(beta E) with E = {e}"
                )));
            }
            if (z + (beta * e).exp()).norm() < 1e-6 {
                return Err(Error::domain(format!(
                    "z = {z} is within 1e-6 of the pole -e^(beta E), E = {e}"
                )));
            }
            Ok(w)
        })
        .collect()
}

/// `P_L = (1/(βL³)) Σ_j ln(1 + z e^{-βE_j})`, principal branch.
pub fn pressure_box(spec: &BoxSpec, sr: &SpectralResult, tp: &ThermoPoint) -> Result<Complex64> {
    check_point(sr, tp)?;
    if tp.z().norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let weights = boltzmann_weights(sr, tp)?;
    let terms: Vec<Complex64> = weights.iter().map(|w| (w + 1.0).ln()).collect();
    let log_sum = pairwise_sum(&terms);
    let tail = weyl_tail_bound(spec.side(), tp.beta(), tp.z().norm(), sr.meta.spec.e_max());
    if tail > TAIL_TOLERANCE * log_sum.norm() {
        return Err(Error::Truncation(format!(
            "Weyl tail {tail:e} exceeds {TAIL_TOLERANCE:e} of the log-sum {:e}",
            log_sum.norm()
        )));
    }
    Ok(log_sum / (tp.beta() * spec.volume()))
}

/// `ρ_L = (1/L³) Σ_j w_j / (1 + w_j) = β z ∂_z P_L`.
pub fn density_box(spec: &BoxSpec, sr: &SpectralResult, tp: &ThermoPoint) -> Result<Complex64> {
    check_point(sr, tp)?;
    if tp.z().norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let weights = boltzmann_weights(sr, tp)?;
    let terms: Vec<Complex64> = weights.iter().map(|w| w / (w + 1.0)).collect();
    Ok(pairwise_sum(&terms) / spec.volume())
}

/// `Tr W_L(β) = Σ_j e^{-βE_j}` over the retained levels.
pub fn trace_heat(sr: &SpectralResult, beta: f64) -> f64 {
    let terms: Vec<f64> = sr.eigenvalues.iter().map(|e| (-beta * e).exp()).collect();
    pairwise_sum_real(&terms)
}

/// `(1/(βL³)) Σ_{n ≤ n_max} (-1)^{n+1} zⁿ/n · Tr W_L(nβ)` for `|z| < 1`.
pub fn pressure_box_series(
    spec: &BoxSpec,
    sr: &SpectralResult,
    tp: &ThermoPoint,
    n_max: usize,
) -> Result<Complex64> {
    let z = tp.z();
    if z.norm() >= 1.0 {
        return Err(Error::domain(format!("series needs |z| < 1, got |z| = {}", z.norm())));
    }
    if n_max == 0 {
        return Err(Error::domain("n_max must be at least 1"));
    }
    check_point(sr, tp)?;
    let mut terms = Vec::with_capacity(n_max);
    let mut power = z;
    for n in 1..=n_max {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        terms.push(power * (sign / n as f64) * trace_heat(sr, n as f64 * tp.beta()));
        power *= z;
    }
    Ok(pairwise_sum(&terms) / (tp.beta() * spec.volume()))
}

/// `∂^N P_L/∂ω^N` at `tp.omega()` by Richardson-extrapolated central
/// differences over spectra from `store`. Stencil nodes below zero use
/// `|ω|`, since the spectrum is even in `ω`.
pub fn susceptibility_box(
    spec: &BoxSpec,
    tp: &ThermoPoint,
    order: usize,
    policy: &StencilPolicy,
    store: &SpectrumStore,
) -> Result<Derivative> {
    let samples = susceptibility_samples(spec, tp, order, policy, store)?;
    let d = richardson_from_samples(policy, order, &samples)?;
    check_tolerance(policy, &d)?;
    Ok(d)
}

/// Pressure values at every stencil node, aligned with
/// [`StencilPolicy::offsets`].
pub fn susceptibility_samples(
    spec: &BoxSpec,
    tp: &ThermoPoint,
    order: usize,
    policy: &StencilPolicy,
    store: &SpectrumStore,
) -> Result<Vec<Complex64>> {
    if order == 0 || order > MAX_BOX_SUSCEPTIBILITY_ORDER {
        return Err(Error::Order {
            requested: order,
            max: MAX_BOX_SUSCEPTIBILITY_ORDER,
        });
    }
    policy.validate(order)?;
    policy
        .offsets()
        .iter()
        .map(|o| {
            let omega = (tp.omega() + o).abs();
            let sr = store.get(spec, omega)?;
            pressure_box(spec, &sr, &tp.with_omega(omega)?)
        })
        .collect()
}
