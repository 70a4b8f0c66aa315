//! Quadrature rules shared by the special functions and the kernel checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the weight `e^{-x²}` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1, "gauss_hermite needs at least one node");
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence.
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        // The middle root is exactly zero; Newton leaves ~1e-17 residue.
        nodes[n / 2] = 0.0;
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    Rule { nodes, weights }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_segment<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.norm() * WGK[7];
    let mut fv = [Complex64::new(0.0, 0.0); 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += (f1 + f2) * WGK[j];
        abs_sum += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = (fc - mean).norm() * WGK[7];
    for j in 0..7 {
        asc += ((fv[2 * j] - mean).norm() + (fv[2 * j + 1] - mean).norm()) * WGK[j];
    }
    let value = kronrod * half;
    let resasc = asc * half.abs();
    let resabs = abs_sum * half.abs();
    let mut error = ((kronrod - gauss) * half).norm();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Segment {
        a,
        b,
        value,
        error,
        resabs,
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss–Kronrod (7/15) integration of a complex integrand over the
/// partition given by `breakpoints` (sorted, at least two entries).
///
/// Stops when the summed error estimate falls below
/// `max(abs_tol, rel_tol·|I|, 100 ε ∫|f|)`; fails with [`Error::Convergence`] after
/// `max_segments` bisections.
pub fn integrate_adaptive<F: Fn(f64) -> Complex64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Integral> {
    assert!(breakpoints.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod_segment(&f, w[0], w[1]));
            evaluations += 15;
        }
    }
    loop {
        let (value, error, resabs) = heap.iter().fold(
            (Complex64::new(0.0, 0.0), 0.0, 0.0),
            |(v, e, r), s| (v + s.value, e + s.error, r + s.resabs),
        );
        // Nothing below the roundoff level of ∫|f| is attainable.
        let floor = 100.0 * f64::EPSILON * resabs;
        let target = abs_tol.max(rel_tol * value.norm()).max(floor);
        if error <= target {
            return Ok(Integral {
                value: sum_segments(&heap),
                error,
                evaluations,
            });
        }
        if heap.len() >= max_segments {
            return Err(Error::Convergence(format!(
                "adaptive quadrature stalled at error {error:e} (target {target:e}) after {} segments",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Convergence(
                "adaptive quadrature reached machine resolution".into(),
            ));
        }
        heap.push(kronrod_segment(&f, worst.a, mid));
        heap.push(kronrod_segment(&f, mid, worst.b));
        evaluations += 30;
    }
}

/// Sums the segment contributions in a fixed order (by left endpoint) so the
/// result does not depend on heap layout.
fn sum_segments(heap: &BinaryHeap<Segment>) -> Complex64 {
    let mut segs: Vec<(f64, Complex64)> = heap.iter().map(|s| (s.a, s.value)).collect();
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values: Vec<Complex64> = segs.into_iter().map(|(_, v)| v).collect();
    pairwise_sum(&values)
}

/// Pairwise (cascade) summation with a fixed split, deterministic for a
/// given input order.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Real version of [`pairwise_sum`].
pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_real(&values[..mid]) + pairwise_sum_real(&values[mid..])
}
