//! Eigenvector-based quantities: Hellmann–Feynman magnetization and the
//! reconstructed finite-volume heat kernel.

use num_complex::Complex64;

use super::eigen::{dense_eigenpairs, lanczos_eigenpairs, EigenBasis, LanczosPolicy, SolverChoice};
use super::hamiltonian::{DiscreteHamiltonian2D, Gauge};
use super::BoxSpec;
use crate::bulk::ThermoPoint;
use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;

/// Transverse Hamiltonian at `omega` (symmetric gauge) with its eigenpairs
/// below `e_max - π²/(2L²)`.
pub fn eigen_basis(
    spec: &BoxSpec,
    omega: f64,
    solver: SolverChoice,
) -> Result<(DiscreteHamiltonian2D, EigenBasis)> {
    let h = DiscreteHamiltonian2D::new(spec, omega, Gauge::Symmetric);
    let upper = spec.e_max() - spec.longitudinal_level(1);
    let basis = match solver.resolve(spec.n_perp()) {
        SolverChoice::Lanczos => lanczos_eigenpairs(&h, upper, &LanczosPolicy::default())?,
        _ => dense_eigenpairs(&h, upper)?,
    };
    Ok((h, basis))
}

/// `∂P_L/∂ω = -(1/L³) Σ_{j,k} ⟨ψ_j|∂H/∂ω|ψ_j⟩ w_{jk}/(1 + w_{jk})` with
/// `w_{jk} = z e^{-β(E_j + π²k²/(2L²))}`.
pub fn hellmann_feynman_magnetization(
    spec: &BoxSpec,
    h: &DiscreteHamiltonian2D,
    basis: &EigenBasis,
    tp: &ThermoPoint,
) -> Result<Complex64> {
    if h.omega() != tp.omega() {
        return Err(Error::domain(format!(
            "Hamiltonian built at omega = {}, evaluation point has omega = {}",
            h.omega(),
            tp.omega()
        )));
    }
    let mut dv = vec![Complex64::new(0.0, 0.0); basis.dim];
    let mut terms = Vec::new();
    for (j, &e) in basis.values.iter().enumerate() {
        let v = basis.vector(j);
        h.omega_derivative_matvec(v, &mut dv);
        let slope: f64 = v.iter().zip(&dv).map(|(a, b)| (a.conj() * b).re).sum();
        for k in 1..=spec.longitudinal_mode_cap() {
            let total = e + spec.longitudinal_level(k);
            if total > spec.e_max() {
                break;
            }
            let w = tp.z() * (-tp.beta() * total).exp();
            terms.push(w / (w + 1.0) * slope);
        }
    }
    Ok(-pairwise_sum(&terms) / spec.volume())
}

/// Lattice site `(i₁, i₂)` with a longitudinal coordinate `x₃ ∈ (-L/2, L/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub i1: usize,
    pub i2: usize,
    pub x3: f64,
}

impl GridPoint {
    pub fn position(&self, spec: &BoxSpec) -> [f64; 3] {
        let h = spec.spacing();
        let c = |i: usize| -0.5 * spec.side() + (i + 1) as f64 * h;
        [c(self.i1), c(self.i2), self.x3]
    }
}

/// `G_L(x, x', β) = Σ_{j,k} e^{-β(E_j + ε_k)} ψ_j(x⊥) ψ̄_j(x'⊥) φ_k(x₃) φ_k(x'₃)`
/// with lattice eigenvectors scaled to continuum normalization `ψ = v/h`
/// and `φ_k(t) = √(2/L) sin(kπ(t + L/2)/L)`.
pub fn reconstruct_kernel(
    spec: &BoxSpec,
    basis: &EigenBasis,
    beta: f64,
    x: &GridPoint,
    xp: &GridPoint,
) -> Complex64 {
    let n = spec.n_perp();
    let h = spec.spacing();
    let l = spec.side();
    let (p, q) = (x.i2 * n + x.i1, xp.i2 * n + xp.i1);
    let longitudinal: Vec<f64> = (1..=spec.longitudinal_mode_cap())
        .map(|k| {
            let arg = |t: f64| (k as f64 * std::f64::consts::PI * (t + 0.5 * l) / l).sin();
            2.0 / l * arg(x.x3) * arg(xp.x3)
        })
        .collect();
    let mut terms = Vec::new();
    for (j, &e) in basis.values.iter().enumerate() {
        let v = basis.vector(j);
        let transverse = v[p] * v[q].conj() / (h * h);
        for (k, phi) in longitudinal.iter().enumerate() {
            let total = e + spec.longitudinal_level(k + 1);
            if total > spec.e_max() {
                break;
            }
            terms.push(transverse * ((-beta * total).exp() * phi));
        }
    }
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mehler::free_kernel;

    #[test]
    fn zero_field_magnetization_vanishes() {
        let spec = BoxSpec::new(2.0, 16, 40.0, None).unwrap();
        let (h, basis) = eigen_basis(&spec, 0.0, SolverChoice::Direct).unwrap();
        let tp = ThermoPoint::new(1.0, Complex64::new(0.5, 0.0), 0.0).unwrap();
        let m = hellmann_feynman_magnetization(&spec, &h, &basis, &tp).unwrap();
        assert!(m.norm() < 1e-14, "{m}");
    }

    #[test]
    fn kernel_is_hermitian_and_below_envelope() {
        let spec = BoxSpec::new(2.0, 20, 80.0, None).unwrap();
        let (_, basis) = eigen_basis(&spec, 1.0, SolverChoice::Direct).unwrap();
        let a = GridPoint { i1: 9, i2: 10, x3: 0.1 };
        let b = GridPoint { i1: 11, i2: 8, x3: -0.2 };
        let gab = reconstruct_kernel(&spec, &basis, 0.5, &a, &b);
        let gba = reconstruct_kernel(&spec, &basis, 0.5, &b, &a);
        assert!((gab - gba.conj()).norm() < 1e-14);
        let (pa, pb) = (a.position(&spec), b.position(&spec));
        let r2: f64 = pa.iter().zip(&pb).map(|(u, v)| (u - v) * (u - v)).sum();
        assert!(gab.norm() <= free_kernel(r2, 0.5) + spec.spacing());
    }
}
