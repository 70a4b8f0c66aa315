//! Fermi functions `f_α(z) = Σ_{n≥1} (-1)^{n+1} z^n / n^α` on the cut plane
//! `C \ (-∞, -1]`.
//!
//! Three evaluation routes:
//!
//! * `|z| ≤ 0.5` and `α > 0`: the defining alternating series.
//! * elsewhere: the integral representation
//!   `f_α(z) = Γ(α)^{-1} ∫_0^∞ t^{α-1} z e^{-t} / (1 + z e^{-t}) dt`,
//!   integrated adaptively after `t = u²`.
//! * orders `α ≤ 1/2` are reached from a base order `α₀ = α + m ∈ [1/2, 3/2)`
//!   by applying `(z ∂_z)^m` under the integral. With `s = w/(1+w)` the
//!   operator `w ∂_w` acts as `s(1-s) ∂_s`, so the integrand becomes a
//!   polynomial in `s`. Integer orders `α = -m` are exactly that polynomial.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::jet::{factorial, TaylorJet, MAX_JET_ORDER};
use crate::quadrature::integrate_adaptive;

/// Minimum distance from the branch cut accepted for an evaluation point.
pub const NEAR_CUT: f64 = 1e-6;

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERM_CUTOFF: f64 = 1e-17;
const INTEGRAL_REL_TOL: f64 = 1e-13;
const MAX_SEGMENTS: usize = 20_000;

/// A complex fugacity known to lie off the cut `(-∞, -cut_end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutPlaneFugacity {
    value: Complex64,
    cut_end: f64,
}

impl CutPlaneFugacity {
    pub fn new(value: Complex64, cut_end: f64) -> Result<Self> {
        if !(cut_end > 0.0 && cut_end.is_finite()) {
            return Err(Error::domain(format!("cut end must be positive, got {cut_end}")));
        }
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::domain(format!("fugacity {value} is not finite")));
        }
        let d = distance_to_cut(value, cut_end);
        if d < NEAR_CUT {
            return Err(Error::domain(format!(
                "fugacity {value} lies within {d:e} of the cut (-inf, -{cut_end}]"
            )));
        }
        Ok(Self { value, cut_end })
    }

    /// Fugacity for a bare Fermi-function call (cut starting at -1).
    pub fn unit(value: Complex64) -> Result<Self> {
        Self::new(value, 1.0)
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn cut_end(&self) -> f64 {
        self.cut_end
    }
}

/// Euclidean distance from `z` to the ray `(-∞, -cut_end]`.
pub fn distance_to_cut(z: Complex64, cut_end: f64) -> f64 {
    if z.re <= -cut_end {
        z.im.abs()
    } else {
        (z + cut_end).norm()
    }
}

/// `f_α(z)` for `α > 0`.
pub fn fermi_f(alpha: f64, z: CutPlaneFugacity) -> Result<Complex64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("Fermi function order must be > 0, got {alpha}")));
    }
    fermi_any_order(alpha, z.value)
}

/// `f_α(z)` for any real order. Orders `≤ 0` come from repeated application
/// of `z ∂_z` to `f_{α+m}`. The argument must be off the unit cut.
pub fn fermi_any_order(alpha: f64, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if distance_to_cut(z, 1.0) < NEAR_CUT {
        return Err(Error::domain(format!("argument {z} is on the cut (-inf, -1]")));
    }
    if alpha == 1.0 {
        return Ok((Complex64::new(1.0, 0.0) + z).ln());
    }
    if alpha <= 0.0 && alpha.fract() == 0.0 {
        let m = (-alpha) as usize;
        let poly = euler_polynomial(m);
        return Ok(horner(&poly, z / (z + 1.0)));
    }
    if alpha > 0.0 && z.norm() <= SERIES_RADIUS {
        return fermi_series(alpha, z);
    }
    fermi_integral(alpha, z)
}

/// The alternating series; valid for `|z| < 1`, used for `|z| ≤ 0.5`.
pub fn fermi_series(alpha: f64, z: Complex64) -> Result<Complex64> {
    if z.norm() >= 1.0 {
        return Err(Error::domain(format!("series needs |z| < 1, got |z| = {}", z.norm())));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = z;
    let mut sign = 1.0;
    for n in 1..100_000u32 {
        let term = power * (sign / (n as f64).powf(alpha));
        sum += term;
        if term.norm() < SERIES_TERM_CUTOFF * sum.norm().max(f64::MIN_POSITIVE) && n > 2 {
            return Ok(sum);
        }
        power *= z;
        sign = -sign;
    }
    Err(Error::Convergence(format!("Fermi series at z = {z} did not reach its cutoff")))
}

/// The integral representation, valid on the whole cut plane.
pub fn fermi_integral(alpha: f64, z: Complex64) -> Result<Complex64> {
    let m = if alpha >= 0.5 {
        0
    } else {
        (0.5 - alpha).ceil() as usize
    };
    let base = alpha + m as f64;
    let poly = euler_polynomial(m);
    let log_mod = z.norm().ln().max(0.0);
    // Beyond u² = ln|z| + 50 the integrand is below e^{-50} |u|^{2α₀-1}.
    let upper = (log_mod + 50.0 + 2.0 * base).sqrt();
    let mut breaks = vec![0.0];
    if log_mod > 0.0 {
        let knee = log_mod.sqrt();
        breaks.push(0.5 * knee);
        breaks.push(knee);
        breaks.push((log_mod + 2.0).sqrt());
    } else {
        breaks.push(1.0);
    }
    breaks.push(upper);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let exponent = 2.0 * base - 1.0;
    // For Re z < -1 the pole of 1/(1 + z e^{-t}) sits within |Im z|/|z| of
    // the real t axis. The contour t = u² + iσ(1 - e^{-u²}) is moved away
    // from it, into the half plane opposite the pole; the other poles are
    // at distance ≥ π.
    let sigma = if z.re < -1.0 { z.im.signum() } else { 0.0 };
    let integrand = |u: f64| {
        if u <= 0.0 && exponent > 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = u * u;
        let (t, jac, ratio) = if sigma == 0.0 {
            let one = Complex64::new(1.0, 0.0);
            (Complex64::new(x, 0.0), one, one)
        } else {
            let lift = -(-x).exp_m1();
            let shape = if x > 0.0 { lift / x } else { 1.0 };
            (
                Complex64::new(x, sigma * lift),
                Complex64::new(1.0, sigma * (-x).exp()),
                Complex64::new(1.0, sigma * shape),
            )
        };
        let w = z * (-t).exp();
        let s = w / (w + 1.0);
        horner(&poly, s) * jac * ratio.powf(base - 1.0) * u.powf(exponent)
    };
    let res = integrate_adaptive(integrand, &breaks, 1e-300, INTEGRAL_REL_TOL, MAX_SEGMENTS)?;
    Ok(res.value * (2.0 / gamma(base)))
}

/// Coefficients (ascending powers of `s`) of `P_m(s) = (s(1-s) d/ds)^m s`.
fn euler_polynomial(m: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..m {
        // derivative
        let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        // multiply by s - s²
        let mut next = vec![0.0; dp.len() + 2];
        for (k, c) in dp.iter().enumerate() {
            next[k + 1] += c;
            next[k + 2] -= c;
        }
        p = next;
    }
    p
}

fn horner(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

/// Taylor jet of `f_α ∘ q` where `q` is the argument jet.
///
/// For `q₀ ≠ 0` the composition goes through `δ = ln q - ln q₀`, along which
/// the derivatives of `f_α(q₀ e^δ)` are `f_{α-j}(q₀)`. For `q₀ = 0` the
/// defining series is applied to the jet directly (only `n ≤ N` terms
/// survive truncation).
pub fn fermi_f_jet(alpha: f64, argument: &TaylorJet) -> Result<TaylorJet> {
    let order = argument.order();
    if order > MAX_JET_ORDER {
        return Err(Error::Order {
            requested: order,
            max: MAX_JET_ORDER,
        });
    }
    let q0 = argument.value();
    if q0.norm() == 0.0 {
        let mut out = TaylorJet::constant(Complex64::new(0.0, 0.0), order, argument.base())?;
        let mut power = argument.clone();
        for n in 1..=order {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            out = &out + &power.scale(Complex64::new(sign / (n as f64).powf(alpha), 0.0));
            power = &power * argument;
        }
        return Ok(out);
    }
    CutPlaneFugacity::unit(q0)?;
    let delta = argument.log_increment()?;
    let weights = (0..=order)
        .map(|j| Ok(fermi_any_order(alpha - j as f64, q0)? / factorial(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(delta.compose_series(&weights))
}
