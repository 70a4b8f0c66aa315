//! Transverse lattice Hamiltonian with Peierls link phases.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BoxSpec;
use crate::mehler::{phase_phi, Point3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `a = ½ e₃ ∧ x`.
    Symmetric,
    /// `a = (-x₂, 0, 0)`; same field, used to test gauge covariance.
    Landau,
}

/// `½(-i∇⊥ - ω a⊥)²` on the `n × n` interior grid of `[-L/2, L/2]²` with
/// Dirichlet walls. Site `(i₁, i₂)` has index `i₂ n + i₁`.
///
/// The hop from `x'` to `x` carries `-1/(2h²) e^{iωθ(x,x')}` with
/// `θ = ∫_{x'}^{x} a·dl` along the bond; for the symmetric gauge
/// `θ = φ(x, x')`, the phase of the continuum kernel.
#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian2D {
    n: usize,
    spacing: f64,
    side: f64,
    omega: f64,
    gauge: Gauge,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
    /// Bond line integrals `θ`, aligned with `values` (zero on the diagonal).
    angles: Vec<f64>,
}

impl DiscreteHamiltonian2D {
    pub fn new(spec: &BoxSpec, omega: f64, gauge: Gauge) -> Self {
        let n = spec.n_perp();
        let h = spec.spacing();
        let side = spec.side();
        let coord = |i: usize| -0.5 * side + (i + 1) as f64 * h;
        let hop = -0.5 / (h * h);
        let diag = 2.0 / (h * h);
        let angle = |p: (usize, usize), q: (usize, usize)| -> f64 {
            let x = Point3::new(coord(p.0), coord(p.1), 0.0);
            let y = Point3::new(coord(q.0), coord(q.1), 0.0);
            match gauge {
                Gauge::Symmetric => phase_phi(&x, &y),
                // a(mid)·(x - y) with a = (-x₂, 0, 0)
                Gauge::Landau => -0.5 * (x.x2 + y.x2) * (x.x1 - y.x1),
            }
        };
        let dim = n * n;
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(5 * dim);
        let mut values = Vec::with_capacity(5 * dim);
        let mut angles = Vec::with_capacity(5 * dim);
        row_ptr.push(0);
        for i2 in 0..n {
            for i1 in 0..n {
                let p = (i1, i2);
                // neighbours in ascending column order
                let mut neighbours = Vec::with_capacity(4);
                if i2 > 0 {
                    neighbours.push((i1, i2 - 1));
                }
                if i1 > 0 {
                    neighbours.push((i1 - 1, i2));
                }
                let before = neighbours.len();
                if i1 + 1 < n {
                    neighbours.push((i1 + 1, i2));
                }
                if i2 + 1 < n {
                    neighbours.push((i1, i2 + 1));
                }
                for (k, q) in neighbours.iter().enumerate() {
                    if k == before {
                        cols.push(i2 * n + i1);
                        values.push(Complex64::new(diag, 0.0));
                        angles.push(0.0);
                    }
                    let theta = angle(p, *q);
                    cols.push(q.1 * n + q.0);
                    values.push(Complex64::from_polar(hop, omega * theta));
                    angles.push(theta);
                }
                if before == neighbours.len() {
                    cols.push(i2 * n + i1);
                    values.push(Complex64::new(diag, 0.0));
                    angles.push(0.0);
                }
                row_ptr.push(cols.len());
            }
        }
        let mut out = Self {
            n,
            spacing: h,
            side,
            omega,
            gauge,
            row_ptr,
            cols,
            values,
            angles,
        };
        out.enforce_exact_hermiticity();
        out
    }

    /// Overwrites each lower-triangle entry with the conjugate of its mirror
    /// so the stored matrix is Hermitian bit for bit.
    fn enforce_exact_hermiticity(&mut self) {
        for row in 0..self.dim() {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[idx];
                if col < row {
                    let mirror = self.find(col, row).expect("stencil is structurally symmetric");
                    self.values[idx] = self.values[mirror].conj();
                    self.angles[idx] = -self.angles[mirror];
                }
            }
        }
    }

    fn find(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn n_perp(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// Matrix entry `H[row, col]` (zero off the stencil).
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.find(row, col)
            .map(|k| self.values[k])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// `(row, col, value)` for every stored entry.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |row| {
            (self.row_ptr[row]..self.row_ptr[row + 1]).map(move |k| (row, self.cols[k], self.values[k]))
        })
    }

    /// Half bandwidth of the stored matrix, `n`.
    pub fn bandwidth(&self) -> usize {
        self.n
    }

    /// Gershgorin bound on the spectrum, `4/h²`.
    pub fn norm_bound(&self) -> f64 {
        4.0 / (self.spacing * self.spacing)
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let row = |(r, out): (usize, &mut Complex64)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        };
        if self.dim() >= 4096 {
            y.par_iter_mut().enumerate().for_each(row);
        } else {
            y.iter_mut().enumerate().for_each(row);
        }
    }

    /// `(∂H/∂ω) x`: each hop picks up the factor `iθ`.
    pub fn omega_derivative_matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += Complex64::new(0.0, self.angles[k]) * self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let dim = self.dim();
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (r, c, v) in self.triplets() {
            a[c * dim + r] = v;
        }
        a
    }

    /// Upper band storage for LAPACK (`uplo = 'U'`, `kd = n`): entry
    /// `(i, j)`, `j - kd ≤ i ≤ j`, goes to `ab[(kd + i - j) + j (kd + 1)]`.
    pub fn to_band_upper(&self) -> Vec<Complex64> {
        let kd = self.bandwidth();
        let ldab = kd + 1;
        let mut ab = vec![Complex64::new(0.0, 0.0); ldab * self.dim()];
        for (r, c, v) in self.triplets() {
            if r <= c {
                ab[kd + r - c + c * ldab] = v;
            }
        }
        ab
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: f64, n: usize) -> BoxSpec {
        BoxSpec::new(l, n, 20.0, None).unwrap()
    }

    #[test]
    fn zero_field_is_half_the_real_laplacian() {
        let h = DiscreteHamiltonian2D::new(&spec(2.0, 16), 0.0, Gauge::Symmetric);
        let s = h.spacing();
        for (r, c, v) in h.triplets() {
            assert_eq!(v.im, 0.0);
            let expect = if r == c { 2.0 / (s * s) } else { -0.5 / (s * s) };
            assert_eq!(v.re, expect);
        }
        assert_eq!(h.triplets().count(), 5 * 256 - 4 * 16);
    }

    #[test]
    fn hermitian_in_both_gauges() {
        for gauge in [Gauge::Symmetric, Gauge::Landau] {
            let h = DiscreteHamiltonian2D::new(&spec(3.0, 20), 1.3, gauge);
            for (r, c, v) in h.triplets() {
                assert_eq!(h.entry(c, r), v.conj());
            }
            // row sums of |H| match column sums
            let dim = h.dim();
            let mut rows = vec![0.0; dim];
            let mut cols = vec![0.0; dim];
            for (r, c, v) in h.triplets() {
                rows[r] += v.norm();
                cols[c] += v.norm();
            }
            let asym = rows.iter().zip(&cols).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(asym < 1e-14);
        }
    }

    #[test]
    fn band_storage_roundtrip() {
        let h = DiscreteHamiltonian2D::new(&spec(2.0, 16), 0.7, Gauge::Symmetric);
        let ab = h.to_band_upper();
        let kd = h.bandwidth();
        for (r, c, v) in h.triplets() {
            if r <= c {
                assert_eq!(ab[kd + r - c + c * (kd + 1)], v);
            }
        }
    }

    #[test]
    fn derivative_matvec_matches_finite_difference() {
        let s = spec(2.5, 16);
        let (w, dw) = (0.8, 1e-6);
        let hp = DiscreteHamiltonian2D::new(&s, w + dw, Gauge::Symmetric);
        let hm = DiscreteHamiltonian2D::new(&s, w - dw, Gauge::Symmetric);
        let h0 = DiscreteHamiltonian2D::new(&s, w, Gauge::Symmetric);
        let x: Vec<Complex64> = (0..h0.dim())
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let (mut yp, mut ym, mut yd) = (vec![Complex64::default(); h0.dim()], vec![Complex64::default(); h0.dim()], vec![Complex64::default(); h0.dim()]);
        hp.matvec(&x, &mut yp);
        hm.matvec(&x, &mut ym);
        h0.omega_derivative_matvec(&x, &mut yd);
        for k in 0..h0.dim() {
            let fd = (yp[k] - ym[k]) / (2.0 * dw);
            assert!((fd - yd[k]).norm() < 1e-5, "{k}: {fd} vs {}", yd[k]);
        }
    }
}
