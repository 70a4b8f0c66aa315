//! Three-dimensional spectra, their binary cache, and a shared store.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::eigen::{banded_eigenvalues, lanczos_eigenpairs, LanczosPolicy, SolverChoice};
use super::hamiltonian::{DiscreteHamiltonian2D, Gauge};
use super::BoxSpec;
use crate::error::{Error, Result};

const MAGIC: &[u8; 7] = b"MGSPEC1";
const HEADER_LEN: usize = 7 + 8 + 4 + 8 + 8 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub spec: BoxSpec,
    pub omega: f64,
    pub solver: String,
}

/// Eigenvalues of `H_L(ω)` below `e_max`, ascending.
///
/// `transverse` and `residuals` describe the lattice solve (one residual per
/// transverse eigenvalue); both are empty for spectra read from the cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub transverse: Vec<f64>,
    pub residuals: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl SpectralResult {
    pub fn lowest(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }
}

/// Combines transverse levels with `π²k²/(2L²)`, keeping sums `≤ e_max`.
pub fn combine_levels(spec: &BoxSpec, transverse: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for &e in transverse {
        for k in 1..=spec.longitudinal_mode_cap() {
            let total = e + spec.longitudinal_level(k);
            if total > spec.e_max() {
                break;
            }
            out.push(total);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Spectrum of the box Hamiltonian at field `omega` (symmetric gauge).
/// Negative `omega` uses `|ω|`: `H(-ω)` is the complex conjugate of `H(ω)`.
pub fn spectrum_3d(spec: &BoxSpec, omega: f64, solver: SolverChoice) -> Result<SpectralResult> {
    spectrum_3d_in_gauge(spec, omega, solver, Gauge::Symmetric)
}

pub fn spectrum_3d_in_gauge(
    spec: &BoxSpec,
    omega: f64,
    solver: SolverChoice,
    gauge: Gauge,
) -> Result<SpectralResult> {
    spectrum_3d_with(spec, omega, solver, gauge, &LanczosPolicy::default())
}

/// As [`spectrum_3d_in_gauge`], with explicit Lanczos settings (used only
/// when `solver` resolves to Lanczos).
pub fn spectrum_3d_with(
    spec: &BoxSpec,
    omega: f64,
    solver: SolverChoice,
    gauge: Gauge,
    lanczos: &LanczosPolicy,
) -> Result<SpectralResult> {
    if !omega.is_finite() {
        return Err(Error::domain(format!("omega must be finite, got {omega}")));
    }
    let omega = omega.abs();
    let h = DiscreteHamiltonian2D::new(spec, omega, gauge);
    let upper = spec.e_max() - spec.longitudinal_level(1);
    let resolved = solver.resolve(spec.n_perp());
    let (transverse, residuals) = if upper < 0.0 {
        (Vec::new(), Vec::new())
    } else {
        match resolved {
            SolverChoice::Lanczos => {
                let b = lanczos_eigenpairs(&h, upper, lanczos)?;
                (b.values, b.residuals)
            }
            _ => {
                let e = banded_eigenvalues(&h, upper)?;
                (e.values, e.residuals)
            }
        }
    };
    let scale = h.norm_bound();
    if let Some(bad) = residuals.iter().find(|r| **r > 1e-8 * scale) {
        return Err(Error::Solver(format!(
            "eigen-residual {bad:e} exceeds 1e-8 of the spectral scale {scale}"
        )));
    }
    Ok(SpectralResult {
        eigenvalues: combine_levels(spec, &transverse),
        transverse,
        residuals,
        meta: SpectrumMeta {
            spec: *spec,
            omega,
            solver: resolved.tag().to_string(),
        },
    })
}

/// Writes the 3D eigenvalues as `MGSPEC1` (little-endian header `L: f64,
/// n_perp: u32, omega: f64, e_max: f64, count: u64`, then `count` f64).
pub fn write_spectrum_cache(path: &Path, sr: &SpectralResult) -> Result<()> {
    let spec = &sr.meta.spec;
    let n_perp = u32::try_from(spec.n_perp()).map_err(|_| Error::Schema("n_perp does not fit in u32".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * sr.eigenvalues.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&spec.side().to_le_bytes());
    buf.extend_from_slice(&n_perp.to_le_bytes());
    buf.extend_from_slice(&sr.meta.omega.to_le_bytes());
    buf.extend_from_slice(&spec.e_max().to_le_bytes());
    buf.extend_from_slice(&(sr.eigenvalues.len() as u64).to_le_bytes());
    for e in &sr.eigenvalues {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Header fields of a cache file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheHeader {
    pub side_l: f64,
    pub n_perp: u32,
    pub omega: f64,
    pub e_max: f64,
    pub count: u64,
}

pub fn read_spectrum_cache(path: &Path) -> Result<(CacheHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..7] != MAGIC {
        return Err(Error::Schema(format!("{} is not an MGSPEC1 file", path.display())));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let header = CacheHeader {
        side_l: f64_at(7),
        n_perp: u32::from_le_bytes(bytes[15..19].try_into().expect("4 bytes")),
        omega: f64_at(19),
        e_max: f64_at(27),
        count: u64::from_le_bytes(bytes[35..43].try_into().expect("8 bytes")),
    };
    let expected = HEADER_LEN as u64 + 8 * header.count;
    if bytes.len() as u64 != expected {
        return Err(Error::Schema(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let values = (0..header.count as usize).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
    Ok((header, values))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct StoreKey {
    side: u64,
    n_perp: usize,
    e_max: u64,
    cap: usize,
    omega: u64,
}

impl StoreKey {
    fn new(spec: &BoxSpec, omega: f64) -> Self {
        Self {
            side: spec.side().to_bits(),
            n_perp: spec.n_perp(),
            e_max: spec.e_max().to_bits(),
            cap: spec.longitudinal_mode_cap(),
            omega: omega.abs().to_bits(),
        }
    }

    fn file_name(&self) -> String {
        format!(
            "L{:016x}_n{}_e{:016x}_k{}_w{:016x}.mgspec",
            self.side, self.n_perp, self.e_max, self.cap, self.omega
        )
    }
}

/// Memoizes spectra by `(spec, |ω|)`, optionally backed by a cache
/// directory. Safe to share across threads.
#[derive(Debug, Default)]
pub struct SpectrumStore {
    dir: Option<PathBuf>,
    solver: SolverChoice,
    lanczos: LanczosPolicy,
    memory: Mutex<HashMap<StoreKey, Arc<SpectralResult>>>,
}

impl SpectrumStore {
    pub fn new(dir: Option<PathBuf>, solver: SolverChoice) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(Self {
            dir,
            solver,
            lanczos: LanczosPolicy::default(),
            memory: Mutex::new(HashMap::new()),
        })
    }

    /// Seeds the Lanczos starting vectors.
    pub fn with_lanczos_seed(mut self, seed: u64) -> Self {
        self.lanczos.seed = seed;
        self
    }

    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, spec: &BoxSpec, omega: f64) -> Result<Arc<SpectralResult>> {
        let key = StoreKey::new(spec, omega);
        if let Some(hit) = self.memory.lock().expect("store lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let result = Arc::new(self.load_or_compute(&key, spec, omega)?);
        let mut memory = self.memory.lock().expect("store lock");
        Ok(Arc::clone(memory.entry(key).or_insert(result)))
    }

    fn load_or_compute(&self, key: &StoreKey, spec: &BoxSpec, omega: f64) -> Result<SpectralResult> {
        let path = self.dir.as_ref().map(|d| d.join(key.file_name()));
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            let (header, values) = read_spectrum_cache(p)?;
            let matches = header.side_l == spec.side()
                && header.n_perp as usize == spec.n_perp()
                && header.omega == omega.abs()
                && header.e_max == spec.e_max();
            if matches {
                log::debug!("spectrum cache hit {}", p.display());
                return Ok(SpectralResult {
                    eigenvalues: values,
                    transverse: Vec::new(),
                    residuals: Vec::new(),
                    meta: SpectrumMeta {
                        spec: *spec,
                        omega: omega.abs(),
                        solver: "cache".into(),
                    },
                });
            }
            log::warn!("ignoring mismatched cache file {}", p.display());
        }
        log::debug!(
            "solving L = {}, n_perp = {}, omega = {}",
            spec.side(),
            spec.n_perp(),
            omega
        );
        let sr = spectrum_3d_with(spec, omega, self.solver, Gauge::Symmetric, &self.lanczos)?;
        if let Some(p) = path {
            write_spectrum_cache(&p, &sr)?;
        }
        Ok(sr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_cube_levels() {
        // L = π: transverse lattice levels (1 - cos(n h))/h² per direction,
        // exact longitudinal n₃²/2.
        let spec = BoxSpec::new(PI, 40, 4.0, None).unwrap();
        let sr = spectrum_3d(&spec, 0.0, SolverChoice::Auto).unwrap();
        let h = spec.spacing();
        let lattice = |n: f64| (1.0 - (n * h).cos()) / (h * h);
        let mut expect = Vec::new();
        for n1 in 1..=3 {
            for n2 in 1..=3 {
                for n3 in 1..=3 {
                    let e = lattice(n1 as f64) + lattice(n2 as f64) + 0.5 * (n3 * n3) as f64;
                    if e <= 4.0 {
                        expect.push(e);
                    }
                }
            }
        }
        expect.sort_by(f64::total_cmp);
        assert_eq!(sr.eigenvalues.len(), expect.len());
        for (a, b) in sr.eigenvalues.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((sr.eigenvalues[0] - 1.5).abs() < 2e-3);
    }

    #[test]
    fn cache_roundtrip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let spec = BoxSpec::new(2.0, 16, 20.0, None).unwrap();
        let sr = spectrum_3d(&spec, 1.0, SolverChoice::Direct).unwrap();
        let path = dir.path().join("s.mgspec");
        write_spectrum_cache(&path, &sr).unwrap();
        let (header, values) = read_spectrum_cache(&path).unwrap();
        assert_eq!(header.n_perp, 16);
        assert_eq!(header.count as usize, sr.eigenvalues.len());
        assert_eq!(values, sr.eigenvalues);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..7], b"MGSPEC1");
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_spectrum_cache(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn store_reuses_disk_cache() {
        let dir = tempfile::tempdir().unwrap();
        let spec = BoxSpec::new(2.0, 16, 20.0, None).unwrap();
        let first = SpectrumStore::new(Some(dir.path().to_path_buf()), SolverChoice::Auto).unwrap();
        let a = first.get(&spec, 0.5).unwrap();
        let b = first.get(&spec, -0.5).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let second = SpectrumStore::new(Some(dir.path().to_path_buf()), SolverChoice::Auto).unwrap();
        let c = second.get(&spec, 0.5).unwrap();
        assert_eq!(c.meta.solver, "cache");
        assert_eq!(c.eigenvalues, a.eigenvalues);
    }
}
