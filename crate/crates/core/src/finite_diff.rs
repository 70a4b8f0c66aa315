//! Central finite differences with two-scale Richardson extrapolation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fornberg weights for the `order`-th derivative at `x0` from `nodes`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    // c[k][j]: weight of node j for derivative k
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(order)
}

/// Symmetric stencil `x0 + m h`, `|m| ≤ half_width`, and its accuracy
/// exponent for derivative `order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilPolicy {
    /// Base step `h`; the coarse scale uses `2h`.
    pub step: f64,
    /// Nodes on each side of the center.
    pub half_width: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl StencilPolicy {
    /// Step `max(1e-2, (1e-13)^{1/(N+2)})`, half width `⌊(N+1)/2⌋ + 1`.
    pub fn for_order(order: usize) -> Self {
        Self {
            step: 1e-2f64.max(1e-13f64.powf(1.0 / (order as f64 + 2.0))),
            half_width: (order + 1) / 2 + 1,
            abs_tol: 1e-9,
            rel_tol: 1e-3,
        }
    }

    pub fn width(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Leading error exponent `p` of the base stencil, `D_h = D + O(h^p)`.
    pub fn accuracy(&self, order: usize) -> u32 {
        let raw = self.width() - order;
        (raw + raw % 2) as u32
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if order == 0 {
            return Err(Error::domain("derivative order must be at least 1"));
        }
        if self.width() < order + 2 {
            return Err(Error::domain(format!(
                "stencil of width {} cannot resolve derivative {order}",
                self.width()
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::domain(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }

    /// All distinct offsets (fine and coarse scale) in ascending order.
    pub fn offsets(&self) -> Vec<f64> {
        let m = self.half_width as i64;
        let mut out: Vec<i64> = (-m..=m).chain((-m..=m).map(|k| 2 * k)).collect();
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(|k| k as f64 * self.step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub value: Complex64,
    /// `|D_h - D_{2h}| / (2^p - 1)`.
    pub error: f64,
}

/// `d^order f / dx^order` at `x0` from samples at `x0 + offsets()`.
/// `samples` must be aligned with [`StencilPolicy::offsets`].
pub fn richardson_from_samples(
    policy: &StencilPolicy,
    order: usize,
    samples: &[Complex64],
) -> Result<Derivative> {
    policy.validate(order)?;
    let offsets = policy.offsets();
    if samples.len() != offsets.len() {
        return Err(Error::Arity {
            expected: offsets.len(),
            got: samples.len(),
        });
    }
    let m = policy.half_width as i64;
    let at = |k: i64| {
        let idx = offsets
            .iter()
            .position(|o| (o / policy.step).round() as i64 == k)
            .expect("offset is on the stencil");
        samples[idx]
    };
    let units: Vec<f64> = (-m..=m).map(|k| k as f64).collect();
    let w = fornberg_weights(0.0, &units, order);
    let scale = |factor: i64| {
        let hn = (factor as f64 * policy.step).powi(order as i32);
        (-m..=m)
            .zip(&w)
            .map(|(k, wk)| at(factor * k) * *wk)
            .sum::<Complex64>()
            / hn
    };
    let fine = scale(1);
    let coarse = scale(2);
    let gain = 2f64.powi(policy.accuracy(order) as i32);
    let value = (fine * gain - coarse) / (gain - 1.0);
    let error = (fine - coarse).norm() / (gain - 1.0);
    Ok(Derivative { value, error })
}

/// Richardson-extrapolated derivative of `f` at `x0`; fails with
/// [`Error::Stencil`] when the two-scale estimate exceeds the policy
/// tolerance.
pub fn richardson_derivative<F>(f: F, x0: f64, order: usize, policy: &StencilPolicy) -> Result<Derivative>
where
    F: Fn(f64) -> Result<Complex64>,
{
    policy.validate(order)?;
    let samples = policy
        .offsets()
        .iter()
        .map(|o| f(x0 + o))
        .collect::<Result<Vec<_>>>()?;
    let d = richardson_from_samples(policy, order, &samples)?;
    check_tolerance(policy, &d)?;
    Ok(d)
}

pub fn check_tolerance(policy: &StencilPolicy, d: &Derivative) -> Result<()> {
    let tolerance = policy.abs_tol.max(policy.rel_tol * d.value.norm());
    if d.error > tolerance {
        return Err(Error::Stencil {
            estimate: d.error,
            tolerance,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_weights() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_of_exponential() {
        for order in 1..=4 {
            let policy = StencilPolicy::for_order(order);
            let d = richardson_derivative(
                |x| Ok(Complex64::new((0.7 * x).exp(), 0.0)),
                0.3,
                order,
                &policy,
            )
            .unwrap();
            let exact = 0.7f64.powi(order as i32) * 0.21f64.exp();
            let tol = if order < 4 { 1e-8 } else { 1e-6 };
            assert!((d.value.re - exact).abs() < tol, "N={order}: {} vs {exact}", d.value.re);
            assert!(d.error < 1e-6);
        }
    }

    #[test]
    fn too_narrow_stencil_is_rejected() {
        let mut p = StencilPolicy::for_order(3);
        p.half_width = 1;
        assert!(p.validate(3).is_err());
    }

    #[test]
    fn stencil_error_reported() {
        let mut p = StencilPolicy::for_order(1);
        p.step = 0.5;
        p.rel_tol = 1e-12;
        p.abs_tol = 0.0;
        let r = richardson_derivative(|x| Ok(Complex64::new((5.0 * x).sin(), 0.0)), 0.0, 1, &p);
        assert!(matches!(r, Err(Error::Stencil { .. })));
    }
}
