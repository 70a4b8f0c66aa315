//! Whole-space magnetic heat kernel in the symmetric gauge.
//!
//! `G∞(x, x', β, ω) = e^{iωφ(x,x')} (2πβ)^{-1/2} e^{-(x₃-x₃')²/2β}
//!   · ω / (4π sinh(ωβ/2)) · exp(-(ω/4) coth(ωβ/2) |x⊥ - x⊥'|²)`
//!
//! with the magnetic phase `φ(x, y) = ½ e₃·(y ∧ x)`. The phase is the line
//! integral of `a` along the segment from `x'` to `x`; composing two kernels
//! produces the triangle flux `fl`, which is what the semigroup check
//! exercises.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_legendre, pairwise_sum, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x1: 0.0,
        x2: 0.0,
        x3: 0.0,
    };

    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn sub(&self, other: &Point3) -> Point3 {
        Point3::new(self.x1 - other.x1, self.x2 - other.x2, self.x3 - other.x3)
    }

    pub fn add(&self, other: &Point3) -> Point3 {
        Point3::new(self.x1 + other.x1, self.x2 + other.x2, self.x3 + other.x3)
    }

    pub fn norm_sq(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `|x₁|² + |x₂|²`, the part transverse to the field.
    pub fn perp_norm_sq(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }
}

/// Symmetric-gauge vector potential `a(x) = ½ e₃ ∧ x = (-x₂/2, x₁/2, 0)`.
pub fn vector_potential(x: &Point3) -> [f64; 3] {
    [-0.5 * x.x2, 0.5 * x.x1, 0.0]
}

/// Magnetic phase `φ(x, y) = ½ e₃·(y ∧ x)`.
pub fn phase_phi(x: &Point3, y: &Point3) -> f64 {
    0.5 * (y.x1 * x.x2 - y.x2 * x.x1)
}

/// Triangle flux `fl(x, y, z) = φ(x,y) + φ(y,z) + φ(z,x)`.
pub fn flux_fl(x: &Point3, y: &Point3, z: &Point3) -> f64 {
    phase_phi(x, y) + phase_phi(y, z) + phase_phi(z, x)
}

/// Polyline flux `Fl_n(x, y₁..y_n)`: zero for `n = 1`, otherwise
/// `Σ_{k=1}^{n-1} fl(x, y_k, y_{k+1})`.
pub fn flux_polyline(x: &Point3, ys: &[Point3], n: usize) -> Result<f64> {
    if n == 0 || ys.len() != n {
        return Err(Error::Arity {
            expected: n,
            got: ys.len(),
        });
    }
    Ok(ys.windows(2).map(|w| flux_fl(x, &w[0], &w[1])).sum())
}

/// `c_n^N(i₁..i_n)`: 1 when the entries (each 1 or 2) sum to `n_total`.
pub fn composition_coeff(n_total: usize, tuple: &[u8]) -> u8 {
    assert!(!tuple.is_empty(), "composition tuple must be nonempty");
    let sum: usize = tuple.iter().map(|&i| i as usize).sum();
    u8::from(sum == n_total)
}

/// Number of `(n, (i₁..i_n))`, `1 ≤ n ≤ N`, `i_k ∈ {1, 2}`, with
/// `c_n^N = 1`, by exhaustive enumeration.
pub fn count_accepted_tuples(n_total: usize) -> u64 {
    let mut count = 0u64;
    let mut tuple = Vec::with_capacity(n_total);
    for n in 1..=n_total {
        for mask in 0u64..(1u64 << n) {
            tuple.clear();
            tuple.extend((0..n).map(|k| if mask >> k & 1 == 1 { 2u8 } else { 1u8 }));
            count += composition_coeff(n_total, &tuple) as u64;
        }
    }
    count
}

/// A kernel value together with its free Gaussian bound
/// `(2πβ)^{-3/2} e^{-|x-x'|²/(2β)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub value: Complex64,
    pub envelope: f64,
}

/// `s / sinh s`, stable for small and large `s`.
fn s_over_sinh(s: f64) -> f64 {
    let s = s.abs();
    if s < 1e-4 {
        let s2 = s * s;
        1.0 - s2 / 6.0 + 7.0 * s2 * s2 / 360.0
    } else if s > 20.0 {
        2.0 * s * (-s).exp() / (1.0 - (-2.0 * s).exp())
    } else {
        s / s.sinh()
    }
}

/// `s coth s`, stable for small `s`.
fn s_coth(s: f64) -> f64 {
    let s = s.abs();
    if s < 1e-4 {
        let s2 = s * s;
        1.0 + s2 / 3.0 - s2 * s2 / 45.0
    } else {
        s / s.tanh()
    }
}

/// Free Gaussian heat kernel `(2πβ)^{-3/2} e^{-r²/(2β)}`.
pub fn free_kernel(r_sq: f64, beta: f64) -> f64 {
    (2.0 * PI * beta).powf(-1.5) * (-r_sq / (2.0 * beta)).exp()
}

/// Diagonal `G∞(x, x, β, ω) = (2πβ)^{-3/2} (ωβ/2) / sinh(ωβ/2)`.
pub fn diagonal_kernel(beta: f64, omega: f64) -> f64 {
    (2.0 * PI * beta).powf(-1.5) * s_over_sinh(0.5 * omega * beta)
}

/// `∂_ω` of the diagonal:
/// `(2πβ)^{-3/2} (β/2) (sinh s - s cosh s) / sinh² s` with `s = ωβ/2`.
pub fn diagonal_kernel_omega_derivative(beta: f64, omega: f64) -> f64 {
    let s = 0.5 * omega * beta;
    let shape = if s.abs() < 1e-3 {
        // d/ds (s/sinh s) = -s/3 + 7 s³/90 - ...
        -s / 3.0 + 7.0 * s.powi(3) / 90.0
    } else {
        (s.sinh() - s * s.cosh()) / (s.sinh() * s.sinh())
    };
    (2.0 * PI * beta).powf(-1.5) * 0.5 * beta * shape
}

/// Transverse Gaussian rate `κ(β, ω) = (ω/4) coth(ωβ/2)`.
fn transverse_rate(beta: f64, omega: f64) -> f64 {
    s_coth(0.5 * omega * beta) / (2.0 * beta)
}

/// The Mehler kernel `G∞(x, x', β, ω)`.
pub fn mehler(x: &Point3, xp: &Point3, beta: f64, omega: f64) -> KernelSample {
    let d = x.sub(xp);
    let longitudinal = (2.0 * PI * beta).powf(-0.5) * (-d.x3 * d.x3 / (2.0 * beta)).exp();
    let transverse = s_over_sinh(0.5 * omega * beta) / (2.0 * PI * beta)
        * (-transverse_rate(beta, omega) * d.perp_norm_sq()).exp();
    let phase = Complex64::from_polar(1.0, omega * phase_phi(x, xp));
    KernelSample {
        value: phase * (longitudinal * transverse),
        envelope: free_kernel(d.norm_sq(), beta),
    }
}

/// `∇_y G∞(y, x, τ, ω)` in closed form.
pub fn mehler_gradient(y: &Point3, x: &Point3, tau: f64, omega: f64) -> [Complex64; 3] {
    let g = mehler(y, x, tau, omega).value;
    let d = y.sub(x);
    let kappa = transverse_rate(tau, omega);
    // ∇_y φ(y, x) = a(x)
    let ax = vector_potential(x);
    let grad_exponent = [
        Complex64::new(-2.0 * kappa * d.x1, omega * ax[0]),
        Complex64::new(-2.0 * kappa * d.x2, omega * ax[1]),
        Complex64::new(-d.x3 / tau, omega * ax[2]),
    ];
    grad_exponent.map(|c| c * g)
}

/// The kernels `R₁ = a(y-x)·(i∇_y + ω a(y)) G∞(y, x, τ, ω)` and
/// `R₂ = ½ a(y-x)² G∞(y, x, τ, ω)`.
pub fn mehler_grad_kernels(y: &Point3, x: &Point3, tau: f64, omega: f64) -> (Complex64, Complex64) {
    let g = mehler(y, x, tau, omega).value;
    let grad = mehler_gradient(y, x, tau, omega);
    let a_rel = vector_potential(&y.sub(x));
    let a_y = vector_potential(y);
    let i = Complex64::new(0.0, 1.0);
    let r1 = (0..3)
        .map(|k| a_rel[k] * (i * grad[k] + g * (omega * a_y[k])))
        .sum::<Complex64>();
    let a_sq: f64 = a_rel.iter().map(|c| c * c).sum();
    (r1, g * (0.5 * a_sq))
}

/// Node counts and tolerance for [`first_order_term_verify`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePolicy {
    /// Gauss–Legendre nodes in `u`, with `τ = β u²`.
    pub tau_nodes: usize,
    /// Gauss–Hermite nodes per spatial direction.
    pub hermite_nodes: usize,
    /// Accepted relative quadrature error estimate.
    pub tolerance: f64,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        Self {
            tau_nodes: 32,
            hermite_nodes: 12,
            tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderReport {
    pub analytic: f64,
    pub quadrature: Complex64,
    pub rel_error: f64,
    pub error_estimate: f64,
    pub nodes: usize,
}

/// Gauss–Hermite rule rescaled to `∫ f(c + u/√k) du/√k`, with the weight
/// `e^{-u²}` folded back into the weights.
struct ScaledHermite {
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl ScaledHermite {
    fn new(rule: &Rule, center: f64, rate: f64) -> Self {
        let scale = rate.sqrt();
        Self {
            offsets: rule.nodes.iter().map(|u| center + u / scale).collect(),
            weights: rule
                .weights
                .iter()
                .zip(&rule.nodes)
                .map(|(w, u)| w * (u * u).exp() / scale)
                .collect(),
        }
    }
}

fn tensor_integrate(
    axes: [&ScaledHermite; 3],
    f: impl Fn(&Point3) -> Complex64,
) -> Complex64 {
    let mut terms = Vec::with_capacity(axes[0].offsets.len().pow(3));
    for (a, wa) in axes[0].offsets.iter().zip(&axes[0].weights) {
        for (b, wb) in axes[1].offsets.iter().zip(&axes[1].weights) {
            for (c, wc) in axes[2].offsets.iter().zip(&axes[2].weights) {
                terms.push(f(&Point3::new(*a, *b, *c)) * (wa * wb * wc));
            }
        }
    }
    pairwise_sum(&terms)
}

fn first_order_quadrature(omega0: f64, beta: f64, tau_nodes: usize, hermite_nodes: usize) -> Complex64 {
    let x = Point3::ORIGIN;
    let legendre = gauss_legendre(tau_nodes);
    let hermite = gauss_hermite(hermite_nodes);
    let contributions: Vec<Complex64> = legendre
        .nodes
        .par_iter()
        .zip(legendre.weights.par_iter())
        .map(|(&t, &wt)| {
            // u ∈ (0, 1), τ = β u², dτ = 2β u du
            let u = 0.5 * (t + 1.0);
            let tau = beta * u * u;
            let jac = 0.5 * wt * 2.0 * beta * u;
            let perp = transverse_rate(beta - tau, omega0) + transverse_rate(tau, omega0);
            let long = 0.5 / (beta - tau) + 0.5 / tau;
            let hp = ScaledHermite::new(&hermite, 0.0, perp);
            let hl = ScaledHermite::new(&hermite, 0.0, long);
            let inner = tensor_integrate([&hp, &hp, &hl], |y| {
                let g = mehler(&x, y, beta - tau, omega0).value;
                let (r1, _) = mehler_grad_kernels(y, &x, tau, omega0);
                g * r1
            });
            inner * jac
        })
        .collect();
    -pairwise_sum(&contributions)
}

/// Evaluates the first-order (`N = n = j = 1`) term of the Duhamel expansion
/// of `∂_ω G∞(x, x, β, ω₀)` at `x = 0`,
/// `-∫₀^β dτ ∫ dy G∞(x, y, β-τ, ω₀) R₁(y, x, τ, ω₀)`,
/// by quadrature and compares it with the closed-form derivative of the
/// diagonal.
pub fn first_order_term_verify(
    omega0: f64,
    beta: f64,
    policy: &QuadraturePolicy,
) -> Result<FirstOrderReport> {
    if !(beta > 0.0 && beta <= 4.0) {
        return Err(Error::domain(format!("beta must lie in (0, 4], got {beta}")));
    }
    if !(0.0..=4.0).contains(&omega0) {
        return Err(Error::domain(format!("omega0 must lie in [0, 4], got {omega0}")));
    }
    if policy.tau_nodes < 2 || policy.hermite_nodes < 2 {
        return Err(Error::domain("quadrature needs at least two nodes per axis"));
    }
    let coarse = first_order_quadrature(omega0, beta, policy.tau_nodes, policy.hermite_nodes);
    let fine_tau = policy.tau_nodes + policy.tau_nodes / 2;
    let fine_gh = policy.hermite_nodes + 4;
    let fine = first_order_quadrature(omega0, beta, fine_tau, fine_gh);
    let estimate = (fine - coarse).norm();
    let analytic = diagonal_kernel_omega_derivative(beta, omega0);
    let scale = fine.norm().max(1e-12 * diagonal_kernel(beta, omega0));
    if estimate > policy.tolerance * scale {
        return Err(Error::Quadrature {
            estimate: estimate / scale,
            tolerance: policy.tolerance,
        });
    }
    let diff = (fine - analytic).norm();
    let rel_error = if analytic != 0.0 { diff / analytic.abs() } else { diff };
    Ok(FirstOrderReport {
        analytic,
        quadrature: fine,
        rel_error,
        error_estimate: estimate,
        nodes: fine_tau * fine_gh.pow(3),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupCheck {
    pub composed: Complex64,
    pub direct: Complex64,
    pub residual: f64,
}

/// Compares `∫ G∞(x, y, s) G∞(y, z, t) dy` (tensor Gauss–Hermite matched to
/// the Gaussian factors) with `G∞(x, z, s + t)`; `residual` is relative.
pub fn semigroup_check(
    x: &Point3,
    z: &Point3,
    s: f64,
    t: f64,
    omega: f64,
    hermite_nodes: usize,
) -> SemigroupCheck {
    let rule = gauss_hermite(hermite_nodes);
    let (ks, kt) = (transverse_rate(s, omega), transverse_rate(t, omega));
    let kp = ks + kt;
    let (ls, lt) = (0.5 / s, 0.5 / t);
    let kl = ls + lt;
    let h1 = ScaledHermite::new(&rule, (ks * x.x1 + kt * z.x1) / kp, kp);
    let h2 = ScaledHermite::new(&rule, (ks * x.x2 + kt * z.x2) / kp, kp);
    let h3 = ScaledHermite::new(&rule, (ls * x.x3 + lt * z.x3) / kl, kl);
    let composed = tensor_integrate([&h1, &h2, &h3], |y| {
        mehler(x, y, s, omega).value * mehler(y, z, t, omega).value
    });
    let direct = mehler(x, z, s + t, omega).value;
    SemigroupCheck {
        composed,
        direct,
        residual: (composed - direct).norm() / direct.norm(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiamagneticReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `|G∞| / envelope` seen.
    pub max_ratio: f64,
}

/// Samples `|G∞(x, x', β, ω)| ≤ (2πβ)^{-3/2} e^{-|x-x'|²/(2β)}` at random
/// `x, x' ∈ [-2, 2]³`, `β ∈ [0.1, 4]`, `ω ∈ [0, 4]`, counting violations
/// beyond relative slack `tolerance`.
pub fn diamagnetic_check(samples: usize, seed: u64, tolerance: f64) -> DiamagneticReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..samples {
        let mut point = || {
            Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            )
        };
        let (x, xp) = (point(), point());
        let beta = rng.random_range(0.1..4.0);
        let omega = rng.random_range(0.0..4.0);
        let k = mehler(&x, &xp, beta, omega);
        let ratio = k.value.norm() / k.envelope;
        max_ratio = max_ratio.max(ratio);
        if ratio > 1.0 + tolerance {
            violations += 1;
        }
    }
    DiamagneticReport {
        samples,
        violations,
        max_ratio,
    }
}
