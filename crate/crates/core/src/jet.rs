//! Truncated Taylor series in the field variable.
//!
//! A [`TaylorJet`] of order `N` around `base` stores `c_k = (1/k!) d^k q/dω^k`
//! for `k = 0..=N`. Products are Cauchy convolutions truncated at `N`, which
//! makes derivative propagation through sums, products and compositions exact
//! up to floating point.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported jet order.
pub const MAX_JET_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorJet {
    coefficients: Vec<Complex64>,
    base: f64,
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_JET_ORDER {
        return Err(Error::Order {
            requested: order,
            max: MAX_JET_ORDER,
        });
    }
    Ok(())
}

impl TaylorJet {
    /// Builds a jet from raw coefficients. At least one coefficient is required.
    pub fn from_coefficients(coefficients: Vec<Complex64>, base: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::domain("a jet needs at least one coefficient"));
        }
        check_order(coefficients.len() - 1)?;
        Ok(Self { coefficients, base })
    }

    pub fn constant(value: Complex64, order: usize, base: f64) -> Result<Self> {
        check_order(order)?;
        let mut coefficients = vec![Complex64::new(0.0, 0.0); order + 1];
        coefficients[0] = value;
        Ok(Self { coefficients, base })
    }

    /// The identity jet `ω ↦ ω` around `base`.
    pub fn variable(base: f64, order: usize) -> Result<Self> {
        let mut jet = Self::constant(Complex64::new(base, 0.0), order, base)?;
        if order >= 1 {
            jet.coefficients[1] = Complex64::new(1.0, 0.0);
        }
        Ok(jet)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn value(&self) -> Complex64 {
        self.coefficients[0]
    }

    /// Coefficient `k`, zero beyond the stored order.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coefficients
            .get(k)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// `d^k/dω^k` at the base point, i.e. `k! c_k`.
    pub fn derivative(&self, k: usize) -> Complex64 {
        self.coeff(k) * factorial(k)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            base: self.base,
        }
    }

    /// Same jet with the constant term removed.
    pub fn without_constant(&self) -> Self {
        let mut out = self.clone();
        out.coefficients[0] = Complex64::new(0.0, 0.0);
        out
    }

    /// Jet of `ln q - ln q(base)`; the constant term of `self` must be nonzero.
    pub fn log_increment(&self) -> Result<Self> {
        let q0 = self.coefficients[0];
        if q0.norm() == 0.0 {
            return Err(Error::domain("logarithm of a jet with zero constant term"));
        }
        let n = self.order();
        let mut l = vec![Complex64::new(0.0, 0.0); n + 1];
        for k in 1..=n {
            let mut acc = self.coefficients[k];
            for j in 1..k {
                acc -= l[j] * self.coefficients[k - j] * (j as f64 / k as f64);
            }
            l[k] = acc / q0;
        }
        Ok(Self {
            coefficients: l,
            base: self.base,
        })
    }

    /// Integer power by repeated truncated multiplication.
    pub fn powi(&self, exponent: usize) -> Self {
        let mut out = Self {
            coefficients: vec![Complex64::new(0.0, 0.0); self.coefficients.len()],
            base: self.base,
        };
        out.coefficients[0] = Complex64::new(1.0, 0.0);
        for _ in 0..exponent {
            out = &out * self;
        }
        out
    }

    /// `Σ_j weights[j] · self^j`, evaluated Horner style. Used to compose an
    /// outer Taylor series with an inner jet that has zero constant term.
    pub fn compose_series(&self, weights: &[Complex64]) -> Self {
        let mut out = Self {
            coefficients: vec![Complex64::new(0.0, 0.0); self.coefficients.len()],
            base: self.base,
        };
        for w in weights.iter().rev() {
            out = &out * self;
            out.coefficients[0] += w;
        }
        out
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let n = self.coefficients.len().min(rhs.coefficients.len());
        Self {
            coefficients: (0..n)
                .map(|k| f(self.coefficients[k], rhs.coefficients[k]))
                .collect(),
            base: self.base,
        }
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Add for &TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: &TaylorJet) -> TaylorJet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: &TaylorJet) -> TaylorJet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: &TaylorJet) -> TaylorJet {
        let n = self.coefficients.len().min(rhs.coefficients.len());
        let mut coefficients = vec![Complex64::new(0.0, 0.0); n];
        for (k, slot) in coefficients.iter_mut().enumerate() {
            for j in 0..=k {
                *slot += self.coefficients[j] * rhs.coefficients[k - j];
            }
        }
        TaylorJet {
            coefficients,
            base: self.base,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn product_rule_on_polynomials() {
        // (1 + 2t) (3 - t + t^2) = 3 + 5t - t^2 + 2t^3
        let a = TaylorJet::from_coefficients(vec![c(1.0), c(2.0), c(0.0), c(0.0)], 0.0).unwrap();
        let b = TaylorJet::from_coefficients(vec![c(3.0), c(-1.0), c(1.0), c(0.0)], 0.0).unwrap();
        let p = &a * &b;
        let expect = [3.0, 5.0, -1.0, 2.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((p.coeff(k) - c(*e)).norm() < 1e-15);
        }
    }

    #[test]
    fn log_increment_of_exponential_is_linear() {
        // q = 2 e^{3t}: ln q - ln 2 = 3t
        let coeffs = (0..=6)
            .map(|k| c(2.0 * 3f64.powi(k as i32) / factorial(k)))
            .collect();
        let q = TaylorJet::from_coefficients(coeffs, 0.0).unwrap();
        let l = q.log_increment().unwrap();
        assert!((l.coeff(1) - c(3.0)).norm() < 1e-14);
        for k in 2..=6 {
            assert!(l.coeff(k).norm() < 1e-12, "k={k}: {}", l.coeff(k));
        }
    }

    #[test]
    fn compose_series_matches_powers() {
        let d = TaylorJet::from_coefficients(vec![c(0.0), c(1.0), c(0.5), c(0.0)], 0.0).unwrap();
        let w = [c(1.0), c(2.0), c(3.0)];
        let direct = &(&TaylorJet::constant(c(1.0), 3, 0.0).unwrap() + &d.scale(c(2.0)))
            + &d.powi(2).scale(c(3.0));
        let horner = d.compose_series(&w);
        for k in 0..=3 {
            assert!((direct.coeff(k) - horner.coeff(k)).norm() < 1e-14);
        }
    }

    #[test]
    fn order_cap_is_enforced() {
        assert!(matches!(
            TaylorJet::variable(0.0, MAX_JET_ORDER + 1),
            Err(Error::Order { .. })
        ));
        assert!(TaylorJet::from_coefficients(vec![], 0.0).is_err());
    }

    #[test]
    fn derivative_is_factorial_times_coefficient() {
        let j = TaylorJet::from_coefficients(vec![c(0.0), c(0.0), c(0.0), c(0.5)], 1.0).unwrap();
        assert_eq!(j.derivative(3), c(3.0));
        assert_eq!(j.derivative(7), c(0.0));
    }
}
