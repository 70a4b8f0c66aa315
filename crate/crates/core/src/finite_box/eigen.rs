//! Eigensolvers for the transverse Hamiltonian.
//!
//! * banded LAPACK `zhbevx` for eigenvalues only (the stencil has half
//!   bandwidth `n`, so reduction costs `O(n⁴)` instead of `O(n⁶)`);
//! * dense LAPACK `zheevr` when eigenvectors are needed;
//! * Lanczos with full reorthogonalization and deflated restarts for grids
//!   too large for the direct paths.

use std::os::raw::{c_char, c_int};

use lapack_sys::__BindgenComplex;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::DiscreteHamiltonian2D;
use crate::error::{Error, Result};

/// Largest `n_perp` handled by the direct (LAPACK) path under
/// [`SolverChoice::Auto`].
pub const DIRECT_SOLVER_MAX_N: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Auto,
    Direct,
    Lanczos,
}

impl SolverChoice {
    pub fn resolve(self, n_perp: usize) -> SolverChoice {
        match self {
            SolverChoice::Auto if n_perp <= DIRECT_SOLVER_MAX_N => SolverChoice::Direct,
            SolverChoice::Auto => SolverChoice::Lanczos,
            other => other,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SolverChoice::Auto => "auto",
            SolverChoice::Direct => "lapack",
            SolverChoice::Lanczos => "lanczos",
        }
    }
}

/// Eigenvalues below `upper`, ascending, with one residual per value.
#[derive(Clone, Debug)]
pub struct Eigenvalues {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Eigenpairs below `upper`; `vectors` is column-major `dim × values.len()`
/// with unit-norm columns.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    pub vectors: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub dim: usize,
}

impl EigenBasis {
    pub fn vector(&self, j: usize) -> &[Complex64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }
}

fn as_lapack(p: *mut Complex64) -> *mut __BindgenComplex<f64> {
    p.cast()
}

fn safe_min() -> f64 {
    f64::MIN_POSITIVE / f64::EPSILON
}

fn to_int(n: usize) -> Result<c_int> {
    c_int::try_from(n).map_err(|_| Error::Solver(format!("dimension {n} exceeds LAPACK integer range")))
}

/// Eigenvalues of `h` in `(-∞, upper]` by banded reduction.
///
/// Residuals are not computed per vector on this path; each entry is the
/// backward-error bound `c n ε ‖H‖` of the Householder band reduction.
pub fn banded_eigenvalues(h: &DiscreteHamiltonian2D, upper: f64) -> Result<Eigenvalues> {
    let n = h.dim();
    let kd = h.bandwidth();
    let mut ab = h.to_band_upper();
    let (jobz, range, uplo) = (b'N' as c_char, b'V' as c_char, b'U' as c_char);
    let (n_i, kd_i, ldab) = (to_int(n)?, to_int(kd)?, to_int(kd + 1)?);
    let vl = -1.0;
    let vu = upper;
    let (il, iu) = (0, 0);
    let abstol = 2.0 * safe_min();
    let mut m: c_int = 0;
    let mut w = vec![0.0; n];
    let mut q = [Complex64::new(0.0, 0.0)];
    let mut z = [Complex64::new(0.0, 0.0)];
    let one: c_int = 1;
    let mut work = vec![Complex64::new(0.0, 0.0); n];
    let mut rwork = vec![0.0; 7 * n];
    let mut iwork = vec![0 as c_int; 5 * n];
    let mut ifail = vec![0 as c_int; n];
    let mut info: c_int = 0;
    // SAFETY: every buffer has the size zhbevx documents for jobz = 'N'.
    unsafe {
        lapack_sys::zhbevx_(
            &jobz,
            &range,
            &uplo,
            &n_i,
            &kd_i,
            as_lapack(ab.as_mut_ptr()),
            &ldab,
            as_lapack(q.as_mut_ptr()),
            &one,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m,
            w.as_mut_ptr(),
            as_lapack(z.as_mut_ptr()),
            &one,
            as_lapack(work.as_mut_ptr()),
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            ifail.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Solver(format!("zhbevx failed with info = {info}")));
    }
    w.truncate(m as usize);
    let bound = 8.0 * (kd as f64) * f64::EPSILON * h.norm_bound();
    let residuals = vec![bound; w.len()];
    Ok(Eigenvalues {
        values: w,
        residuals,
    })
}

/// Eigenpairs of `h` in `(-∞, upper]` by dense `zheevr`, with true
/// residuals `‖Hv - λv‖`.
pub fn dense_eigenpairs(h: &DiscreteHamiltonian2D, upper: f64) -> Result<EigenBasis> {
    let n = h.dim();
    let mut a = h.to_dense();
    let (jobz, range, uplo) = (b'V' as c_char, b'V' as c_char, b'U' as c_char);
    let n_i = to_int(n)?;
    let lda = n_i;
    let vl = -1.0;
    let vu = upper;
    let (il, iu) = (0, 0);
    let abstol = 2.0 * safe_min();
    let mut m: c_int = 0;
    let mut w = vec![0.0; n];
    let mut isuppz = vec![0 as c_int; 2 * n.max(1)];
    let mut info: c_int = 0;
    let mut lwork: c_int = -1;
    let mut lrwork: c_int = -1;
    let mut liwork: c_int = -1;
    let mut work_q = [Complex64::new(0.0, 0.0)];
    let mut rwork_q = [0.0];
    let mut iwork_q = [0 as c_int];
    let mut zq = [Complex64::new(0.0, 0.0)];
    // Workspace query.
    // SAFETY: query mode only writes the optimal sizes into the 1-element buffers.
    unsafe {
        lapack_sys::zheevr_(
            &jobz,
            &range,
            &uplo,
            &n_i,
            as_lapack(a.as_mut_ptr()),
            &lda,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m,
            w.as_mut_ptr(),
            as_lapack(zq.as_mut_ptr()),
            &n_i,
            isuppz.as_mut_ptr(),
            as_lapack(work_q.as_mut_ptr()),
            &lwork,
            rwork_q.as_mut_ptr(),
            &lrwork,
            iwork_q.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Solver(format!("zheevr workspace query failed with info = {info}")));
    }
    lwork = work_q[0].re as c_int;
    lrwork = rwork_q[0] as c_int;
    liwork = iwork_q[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0; lrwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    let mut z = vec![Complex64::new(0.0, 0.0); n * n];
    // SAFETY: buffers sized by the workspace query; z holds n columns.
    unsafe {
        lapack_sys::zheevr_(
            &jobz,
            &range,
            &uplo,
            &n_i,
            as_lapack(a.as_mut_ptr()),
            &lda,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m,
            w.as_mut_ptr(),
            as_lapack(z.as_mut_ptr()),
            &n_i,
            isuppz.as_mut_ptr(),
            as_lapack(work.as_mut_ptr()),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Solver(format!("zheevr failed with info = {info}")));
    }
    let m = m as usize;
    w.truncate(m);
    z.truncate(n * m);
    let mut basis = EigenBasis {
        values: w,
        vectors: z,
        residuals: Vec::new(),
        dim: n,
    };
    basis.residuals = residual_norms(h, &basis);
    Ok(basis)
}

fn residual_norms(h: &DiscreteHamiltonian2D, basis: &EigenBasis) -> Vec<f64> {
    let mut hv = vec![Complex64::new(0.0, 0.0); basis.dim];
    (0..basis.values.len())
        .map(|j| {
            let v = basis.vector(j);
            h.matvec(v, &mut hv);
            hv.iter()
                .zip(v)
                .map(|(a, b)| (a - b * basis.values[j]).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Controls for [`lanczos_eigenpairs`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosPolicy {
    /// Accepted residual, relative to `‖H‖`.
    pub tolerance: f64,
    /// Upper limit on Krylov dimension per restart.
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosPolicy {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_krylov: 6000,
            max_restarts: 64,
            seed: 0x5eed,
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Two passes of classical Gram–Schmidt against every set in `sets`.
fn orthogonalize(v: &mut [Complex64], sets: &[&[Vec<Complex64>]]) {
    for _ in 0..2 {
        for q in sets.iter().flat_map(|s| s.iter()) {
            let c = dot(q, v);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

/// Eigenvalues (and vectors) of the real symmetric tridiagonal matrix with
/// diagonal `alpha` and off-diagonal `beta`, via `dstev`.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = beta[..m.saturating_sub(1)].to_vec();
    e.push(0.0);
    let mut z = vec![0.0; m * m];
    let mut work = vec![0.0; (2 * m).saturating_sub(2).max(1)];
    let jobz = b'V' as c_char;
    let (n_i, ldz) = (to_int(m)?, to_int(m)?);
    let mut info: c_int = 0;
    // SAFETY: dstev with jobz = 'V' needs z of m×m and work of 2m-2.
    unsafe {
        lapack_sys::dstev_(&jobz, &n_i, d.as_mut_ptr(), e.as_mut_ptr(), z.as_mut_ptr(), &ldz, work.as_mut_ptr(), &mut info);
    }
    if info != 0 {
        return Err(Error::Solver(format!("dstev failed with info = {info}")));
    }
    Ok((d, z))
}

/// One Lanczos run from a random start, orthogonal to `locked`, returning
/// newly converged Ritz pairs below `upper`.
fn lanczos_run(
    h: &DiscreteHamiltonian2D,
    upper: f64,
    locked: &[Vec<Complex64>],
    policy: &LanczosPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, Vec<Complex64>, f64)>> {
    let dim = h.dim();
    let scale = h.norm_bound();
    let tol = policy.tolerance * scale;
    let krylov_cap = policy.max_krylov.min(dim.saturating_sub(locked.len()));
    if krylov_cap == 0 {
        return Ok(Vec::new());
    }
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    orthogonalize(&mut v, &[locked]);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<Complex64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let check_every = 25;
    loop {
        let j = basis.len() - 1;
        h.matvec(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        orthogonalize(&mut w, &[locked, &basis]);
        let b = norm(&w);
        let m = alpha.len();

        let exhausted = b <= 1e-12 * scale || m >= krylov_cap;
        if m % check_every == 0 || exhausted {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
            let last_row = |i: usize| s[i * m + m - 1].abs();
            let below: Vec<usize> = (0..m).filter(|&i| theta[i] <= upper).collect();
            let converged = below.iter().all(|&i| b * last_row(i) <= tol);
            // The lowest unconverged Ritz value must sit above `upper`, so no
            // eigenvalue below it is still on its way down.
            let settled = (0..m)
                .filter(|&i| b * last_row(i) > tol)
                .all(|i| theta[i] - b * last_row(i) > upper);
            if (converged && settled) || exhausted {
                if !converged {
                    return Err(Error::Solver(format!(
                        "Lanczos exhausted its Krylov budget ({m}) before converging below {upper}"
                    )));
                }
                let mut out = Vec::with_capacity(below.len());
                for &i in &below {
                    let mut x = vec![Complex64::new(0.0, 0.0); dim];
                    for (k, q) in basis.iter().enumerate() {
                        let c = s[i * m + k];
                        for (xi, qi) in x.iter_mut().zip(q) {
                            *xi += qi * c;
                        }
                    }
                    let nx = norm(&x);
                    x.iter_mut().for_each(|c| *c /= nx);
                    out.push((theta[i], x, b * last_row(i)));
                }
                return Ok(out);
            }
        }
        beta.push(b);
        let next: Vec<Complex64> = w.iter().map(|c| c / b).collect();
        basis.push(next);
    }
}

/// Eigenpairs of `h` in `(-∞, upper]` by Lanczos with full
/// reorthogonalization. Restarts from fresh random vectors orthogonal to
/// everything found so far until a run finds nothing new, which recovers
/// multiplicities a single Krylov space cannot see.
pub fn lanczos_eigenpairs(h: &DiscreteHamiltonian2D, upper: f64, policy: &LanczosPolicy) -> Result<EigenBasis> {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    for _ in 0..policy.max_restarts {
        let found = lanczos_run(h, upper, &locked, policy, &mut rng)?;
        if found.is_empty() {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| f64::total_cmp(&values[a], &values[b]));
            let dim = h.dim();
            let mut vectors = Vec::with_capacity(dim * order.len());
            for &k in &order {
                vectors.extend_from_slice(&locked[k]);
            }
            let mut basis = EigenBasis {
                values: order.iter().map(|&k| values[k]).collect(),
                vectors,
                residuals: order.iter().map(|&k| residuals[k]).collect(),
                dim,
            };
            basis.residuals = residual_norms(h, &basis);
            return Ok(basis);
        }
        for (value, vector, residual) in found {
            values.push(value);
            residuals.push(residual);
            locked.push(vector);
        }
    }
    Err(Error::Solver(format!(
        "Lanczos still finding new eigenvalues after {} restarts",
        policy.max_restarts
    )))
}
