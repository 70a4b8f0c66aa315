//! Thermodynamic-limit studies: finite-box observables against their bulk
//! values over a fugacity grid and a sequence of box sides, with a log-log
//! rate fit of the worst-case gap.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bulk::{density_bulk, pressure_bulk, susceptibility_bulk, LandauSumPolicy, ThermoPoint};
use crate::error::{Error, Result};
use crate::finite_box::observables::MAX_BOX_SUSCEPTIBILITY_ORDER;
use crate::finite_box::{
    density_box, pressure_box, truncation_energy, BoxSpec, SolverChoice, SpectralResult, SpectrumStore,
};
use crate::finite_diff::{check_tolerance, richardson_from_samples, StencilPolicy};
use crate::output::{format_f64, to_json_pretty};

/// Version tag written into every report.
pub const SCHEMA_VERSION: u32 = 1;
/// Default bound on `|grid| × |box_sides| × stencil width`.
pub const DEFAULT_TASK_CAP: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    Pressure,
    Density,
    Chi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    /// Transverse lattice spacing, held fixed across box sides.
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceStudy {
    pub observable: ObservableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_order: Option<usize>,
    pub beta: f64,
    pub omega: f64,
    /// Points `[re, im]` standing in for a compact set of fugacities.
    pub fugacity_grid: Vec<Complex64>,
    pub box_sides: Vec<f64>,
    pub grid_policy: GridPolicy,
    pub seed: u64,
}

impl ConvergenceStudy {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::domain(format!("omega must be >= 0, got {}", self.omega)));
        }
        match (self.observable, self.chi_order) {
            (ObservableKind::Chi, None) => return Err(Error::domain("observable chi needs chi_order")),
            (ObservableKind::Chi, Some(n)) if n == 0 || n > MAX_BOX_SUSCEPTIBILITY_ORDER => {
                return Err(Error::Order {
                    requested: n,
                    max: MAX_BOX_SUSCEPTIBILITY_ORDER,
                })
            }
            (ObservableKind::Pressure | ObservableKind::Density, Some(_)) => {
                return Err(Error::domain("chi_order is only meaningful for observable chi"))
            }
            _ => {}
        }
        if self.fugacity_grid.is_empty() {
            return Err(Error::domain("fugacity_grid is empty"));
        }
        for z in &self.fugacity_grid {
            ThermoPoint::new(self.beta, *z, self.omega)?;
        }
        if self.box_sides.len() < 3 {
            return Err(Error::domain(format!(
                "box_sides needs at least 3 entries, got {}",
                self.box_sides.len()
            )));
        }
        if self.box_sides.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("box_sides must be ascending"));
        }
        for &l in &self.box_sides {
            BoxSpec::with_spacing(l, self.grid_policy.spacing, 1.0)?;
        }
        Ok(())
    }

    fn stencil(&self) -> Option<StencilPolicy> {
        self.chi_order.map(StencilPolicy::for_order)
    }

    /// `|grid| × |box_sides| × stencil width`.
    pub fn task_count(&self) -> usize {
        let width = self.stencil().map_or(1, |s| s.width());
        self.fugacity_grid.len() * self.box_sides.len() * width
    }

    /// Field values at which spectra are needed.
    fn field_nodes(&self) -> Vec<f64> {
        match self.stencil() {
            Some(s) => s.offsets().iter().map(|o| (self.omega + o).abs()).collect(),
            None => vec![self.omega],
        }
    }

    /// Shared truncation energy: covers the largest `|z|` and the largest
    /// field node.
    fn e_max(&self) -> f64 {
        let z_max = self.fugacity_grid.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let w_max = self.field_nodes().into_iter().fold(0.0, f64::max);
        truncation_energy(self.beta, w_max, z_max)
    }
}

/// `n` points filling the closed disk `|z - center| ≤ radius` on a sunflower
/// spiral; the first is the center, the last lies on the boundary.
pub fn disk_grid(center: Complex64, radius: f64, n: usize) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let r = if n > 1 {
                radius * (k as f64 / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            center + Complex64::from_polar(r, golden * k as f64)
        })
        .collect()
}

/// Execution settings that do not change the result.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub task_cap: usize,
    pub cache_dir: Option<PathBuf>,
    pub solver: SolverChoice,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            task_cap: DEFAULT_TASK_CAP,
            cache_dir: None,
            solver: SolverChoice::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// `"finite"` or `"bulk"`.
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl FailureRecord {
    fn new(stage: &str, e: &Error) -> Self {
        Self {
            stage: stage.into(),
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub z: Complex64,
    pub finite_value: Option<Complex64>,
    pub bulk_value: Option<Complex64>,
    pub abs_diff: Option<f64>,
    /// Two-scale finite-difference error estimate (chi only).
    pub stencil_error: Option<f64>,
    pub failure: Option<FailureRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideRecord {
    #[serde(rename = "L")]
    pub side: f64,
    pub n_perp: usize,
    /// Largest `|finite - bulk|` over the points that evaluated.
    pub sup_diff: Option<f64>,
    /// Grid index attaining `sup_diff`.
    pub argmax: Option<usize>,
    pub failed_points: usize,
    pub points: Vec<PointRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `p` in `sup_diff ≈ C L^{-p}`.
    pub exponent: f64,
    pub prefactor: f64,
    /// `max |C L^{-p} / sup_diff - 1|`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub study: ConvergenceStudy,
    pub code_version: String,
    pub e_max: f64,
    pub stencil: Option<StencilPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    /// One entry per `box_sides` entry, sorted by `L`.
    #[serde(rename = "per_L")]
    pub per_l: Vec<SideRecord>,
    pub fitted_rate: f64,
    pub fit_prefactor: f64,
    pub fit_residual: f64,
    pub provenance: Provenance,
}

/// Least-squares line through `(ln L, ln d)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((l, d)) = points
        .iter()
        .find(|(l, d)| !(*l > 0.0 && *d > 0.0 && l.is_finite() && d.is_finite()))
    {
        return Err(Error::Fit(format!("non-positive point (L = {l}, d = {d})")));
    }
    let distinct: BTreeSet<u64> = points.iter().map(|(l, _)| l.to_bits()).collect();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct box sides, got {}",
            distinct.len()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(l, _)| l.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, d)| d.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let prefactor = (ym - slope * xm).exp();
    let residual = points
        .iter()
        .map(|(l, d)| (prefactor * l.powf(slope) / d - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        exponent: -slope,
        prefactor,
        residual,
    })
}

type SpectrumOutcome = std::result::Result<Arc<SpectralResult>, FailureRecord>;

/// Evaluates every `(L, z)` point without fitting. The returned records are
/// sorted by `L` (stable for repeated sides).
pub fn evaluate_study(study: &ConvergenceStudy, options: &RunOptions) -> Result<(Vec<SideRecord>, f64)> {
    study.validate()?;
    let tasks = study.task_count();
    if tasks > options.task_cap {
        return Err(Error::domain(format!(
            "study needs {tasks} tasks, above the cap {}",
            options.task_cap
        )));
    }
    let e_max = study.e_max();
    let specs = study
        .box_sides
        .iter()
        .map(|&l| BoxSpec::with_spacing(l, study.grid_policy.spacing, e_max))
        .collect::<Result<Vec<_>>>()?;
    let store = SpectrumStore::new(options.cache_dir.clone(), options.solver)?.with_lanczos_seed(study.seed);

    // every distinct (L, |ω|) spectrum, solved in parallel
    let nodes = study.field_nodes();
    let keys: BTreeSet<(u64, u64)> = specs
        .iter()
        .flat_map(|s| nodes.iter().map(move |w| (s.side().to_bits(), w.to_bits())))
        .collect();
    let keys: Vec<(u64, u64)> = keys.into_iter().collect();
    let solved: Vec<SpectrumOutcome> = keys
        .par_iter()
        .map(|&(l, w)| {
            let spec = specs.iter().find(|s| s.side().to_bits() == l).expect("spec for side");
            store
                .get(spec, f64::from_bits(w))
                .map_err(|e| FailureRecord::new("finite", &e))
        })
        .collect();
    let spectra: BTreeMap<(u64, u64), SpectrumOutcome> = keys.into_iter().zip(solved).collect();

    let policy = LandauSumPolicy::default();
    let bulk: Vec<std::result::Result<Complex64, FailureRecord>> = study
        .fugacity_grid
        .par_iter()
        .map(|&z| {
            let tp = ThermoPoint::new(study.beta, z, study.omega)?;
            match (study.observable, study.chi_order) {
                (ObservableKind::Pressure, _) => pressure_bulk(&tp, &policy),
                (ObservableKind::Density, _) => density_bulk(&tp, &policy),
                (ObservableKind::Chi, n) => susceptibility_bulk(&tp, n.expect("validated"), &policy),
            }
        })
        .map(|r| r.map_err(|e| FailureRecord::new("bulk", &e)))
        .collect();

    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by(|&a, &b| f64::total_cmp(&study.box_sides[a], &study.box_sides[b]));
    let records = order
        .into_iter()
        .map(|i| {
            let spec = &specs[i];
            let points: Vec<PointRecord> = study
                .fugacity_grid
                .par_iter()
                .zip(&bulk)
                .map(|(&z, b)| evaluate_point(study, spec, z, b, &spectra))
                .collect();
            side_record(spec, points)
        })
        .collect();
    Ok((records, e_max))
}

fn evaluate_point(
    study: &ConvergenceStudy,
    spec: &BoxSpec,
    z: Complex64,
    bulk: &std::result::Result<Complex64, FailureRecord>,
    spectra: &BTreeMap<(u64, u64), SpectrumOutcome>,
) -> PointRecord {
    let spectrum = |omega: f64| -> std::result::Result<Arc<SpectralResult>, FailureRecord> {
        spectra
            .get(&(spec.side().to_bits(), omega.to_bits()))
            .expect("spectrum was scheduled")
            .clone()
    };
    let finite = || -> std::result::Result<(Complex64, Option<f64>), FailureRecord> {
        let wrap = |e: Error| FailureRecord::new("finite", &e);
        let at = |omega: f64| -> std::result::Result<Complex64, FailureRecord> {
            let sr = spectrum(omega)?;
            let tp = ThermoPoint::new(study.beta, z, omega).map_err(wrap)?;
            match study.observable {
                ObservableKind::Density => density_box(spec, &sr, &tp).map_err(wrap),
                _ => pressure_box(spec, &sr, &tp).map_err(wrap),
            }
        };
        match study.stencil() {
            None => Ok((at(study.omega)?, None)),
            Some(stencil) => {
                let order = study.chi_order.expect("validated");
                let samples = stencil
                    .offsets()
                    .iter()
                    .map(|o| at((study.omega + o).abs()))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let d = richardson_from_samples(&stencil, order, &samples).map_err(wrap)?;
                check_tolerance(&stencil, &d).map_err(wrap)?;
                Ok((d.value, Some(d.error)))
            }
        }
    };
    let mut record = PointRecord {
        z,
        finite_value: None,
        bulk_value: bulk.as_ref().ok().copied(),
        abs_diff: None,
        stencil_error: None,
        failure: bulk.as_ref().err().cloned(),
    };
    match finite() {
        Ok((value, error)) => {
            record.finite_value = Some(value);
            record.stencil_error = error;
            if let Some(b) = record.bulk_value {
                record.abs_diff = Some((value - b).norm());
            }
        }
        Err(f) => {
            if record.failure.is_none() {
                record.failure = Some(f);
            }
        }
    }
    record
}

fn side_record(spec: &BoxSpec, points: Vec<PointRecord>) -> SideRecord {
    let mut sup: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(d) = p.abs_diff {
            if sup.is_none_or(|(_, s)| d > s) {
                sup = Some((i, d));
            }
        }
    }
    SideRecord {
        side: spec.side(),
        n_perp: spec.n_perp(),
        sup_diff: sup.map(|(_, d)| d),
        argmax: sup.map(|(i, _)| i),
        failed_points: points.iter().filter(|p| p.abs_diff.is_none()).count(),
        points,
    }
}

/// Runs the study and fits `sup_diff ≈ C L^{-p}` over the sides with a
/// positive sup-difference.
pub fn run_convergence(study: &ConvergenceStudy, options: &RunOptions) -> Result<ConvergenceReport> {
    let (per_l, e_max) = evaluate_study(study, options)?;
    let points: Vec<(f64, f64)> = per_l
        .iter()
        .filter_map(|r| r.sup_diff.filter(|d| *d > 0.0).map(|d| (r.side, d)))
        .collect();
    let fit = fit_rate(&points)?;
    Ok(ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        per_l,
        fitted_rate: fit.exponent,
        fit_prefactor: fit.prefactor,
        fit_residual: fit.residual,
        provenance: Provenance {
            study: study.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            e_max,
            stencil: study.stencil(),
        },
    })
}

pub fn load_study(path: &Path) -> Result<ConvergenceStudy> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let study: ConvergenceStudy =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    study.validate()?;
    Ok(study)
}

pub fn report_to_json(report: &ConvergenceReport) -> Result<String> {
    Ok(to_json_pretty(report)? + "\n")
}

pub fn persist_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_json(report)?).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: &Path) -> Result<ConvergenceReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        other => {
            return Err(Error::Schema(format!(
                "expected schema_version {SCHEMA_VERSION}, found {other:?}"
            )))
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Point table: `L, z_re, z_im, finite_value_re, finite_value_im,
/// bulk_value_re, bulk_value_im, abs_diff`; failed values are empty.
pub fn write_points_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "L",
        "z_re",
        "z_im",
        "finite_value_re",
        "finite_value_im",
        "bulk_value_re",
        "bulk_value_im",
        "abs_diff",
    ])
    .map_err(|e| csv_error(path, e))?;
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    for side in &report.per_l {
        for p in &side.points {
            w.write_record([
                format_f64(side.side),
                format_f64(p.z.re),
                format_f64(p.z.im),
                opt(p.finite_value.map(|c| c.re)),
                opt(p.finite_value.map(|c| c.im)),
                opt(p.bulk_value.map(|c| c.re)),
                opt(p.bulk_value.map(|c| c.im)),
                opt(p.abs_diff),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plot table: `L, sup_diff, fitted`.
pub fn write_rate_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["L", "sup_diff", "fitted"]).map_err(|e| csv_error(path, e))?;
    for side in &report.per_l {
        let fitted = report.fit_prefactor * side.side.powf(-report.fitted_rate);
        w.write_record([
            format_f64(side.side),
            side.sup_diff.map(format_f64).unwrap_or_default(),
            format_f64(fitted),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn study(observable: ObservableKind, chi_order: Option<usize>, omega: f64) -> ConvergenceStudy {
        ConvergenceStudy {
            observable,
            chi_order,
            beta: 1.0,
            omega,
            fugacity_grid: vec![Complex64::new(0.3, 0.0), Complex64::new(0.5, 0.0)],
            box_sides: vec![2.0, 2.5, 3.0],
            grid_policy: GridPolicy { spacing: 0.1 },
            seed: 7,
        }
    }

    #[test]
    fn exact_power_laws() {
        let one: Vec<(f64, f64)> = [4.0, 6.0, 8.0].iter().map(|&l| (l, 1.0 / l)).collect();
        let f = fit_rate(&one).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-12);
        assert!((f.prefactor - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let two: Vec<(f64, f64)> = [4.0, 6.0, 8.0].iter().map(|&l| (l, 3.0 / (l * l))).collect();
        assert!((fit_rate(&two).unwrap().exponent - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_inverse_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let pts: Vec<(f64, f64)> = [4.0, 6.0, 8.0]
            .iter()
            .map(|&l| (l, (1.0 + 0.05 * rng.random_range(-1.0..=1.0)) / l))
            .collect();
        let p = fit_rate(&pts).unwrap().exponent;
        assert!((0.8..=1.2).contains(&p), "{p}");
    }

    #[test]
    fn degenerate_fits_fail() {
        assert!(matches!(fit_rate(&[(6.0, 0.1); 3]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&[(4.0, 0.1), (6.0, 0.0), (8.0, 0.1)]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&[(4.0, 0.1), (6.0, 0.1)]), Err(Error::Fit(_))));
    }

    #[test]
    fn disk_grid_stays_inside() {
        let c = Complex64::new(0.3, 0.0);
        let g = disk_grid(c, 0.6, 12);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], c);
        assert!(g.iter().all(|z| (z - c).norm() <= 0.6 + 1e-15));
        assert!(((g[11] - c).norm() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let mut s = study(ObservableKind::Pressure, None, 1.0);
        assert!(s.validate().is_ok());
        s.box_sides = vec![2.0, 3.0];
        assert!(s.validate().is_err());
        s.box_sides = vec![3.0, 2.0, 4.0];
        assert!(s.validate().is_err());
        let mut s = study(ObservableKind::Chi, None, 1.0);
        assert!(s.validate().is_err());
        s.chi_order = Some(9);
        assert!(matches!(s.validate(), Err(Error::Order { .. })));
        let mut s = study(ObservableKind::Pressure, None, 1.0);
        s.fugacity_grid.push(Complex64::new(-3.0, 0.0));
        assert!(s.validate().is_err());
        let s = study(ObservableKind::Chi, Some(2), 1.0);
        let opts = RunOptions {
            task_cap: 10,
            ..RunOptions::default()
        };
        assert!(matches!(run_convergence(&s, &opts), Err(Error::Domain(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"observable":"pressure","beta":1.0,"omega":1.0,"fugacity_grid":[[0.3,0.0]],
            "box_sides":[2,3,4],"grid_policy":{"spacing":0.1},"seed":1,"extra":0}"#;
        assert!(serde_json::from_str::<ConvergenceStudy>(text).is_err());
        let ok = text.replace(r#","extra":0"#, "");
        let s: ConvergenceStudy = serde_json::from_str(&ok).unwrap();
        assert_eq!(s.fugacity_grid, vec![Complex64::new(0.3, 0.0)]);
    }

    #[test]
    fn repeated_sides_give_fit_error() {
        let mut s = study(ObservableKind::Pressure, None, 1.0);
        s.box_sides = vec![2.0, 2.0, 2.0];
        assert!(matches!(run_convergence(&s, &RunOptions::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn odd_derivative_at_zero_field() {
        let s = study(ObservableKind::Chi, Some(1), 0.0);
        let (records, _) = evaluate_study(&s, &RunOptions::default()).unwrap();
        for r in &records {
            for p in &r.points {
                assert_eq!(p.bulk_value.unwrap().norm(), 0.0);
                assert!(p.abs_diff.unwrap() <= p.stencil_error.unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn report_roundtrip_with_failure() {
        let dir = tempfile::tempdir().unwrap();
        let s = study(ObservableKind::Pressure, None, 1.0);
        let mut report = run_convergence(&s, &RunOptions::default()).unwrap();
        report.per_l[1].points[0].finite_value = None;
        report.per_l[1].points[0].abs_diff = None;
        report.per_l[1].points[0].failure = Some(FailureRecord {
            stage: "finite".into(),
            kind: "solver".into(),
            message: "synthetic".into(),
        });
        let path = dir.path().join("r.json");
        persist_report(&report, &path).unwrap();
        assert_eq!(load_report(&path).unwrap(), report);

        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_report(&path), Err(Error::Schema(_))));
        fs::write(&path, text.replace("\"schema_version\": 1", "\"schema_version\": 99")).unwrap();
        assert!(matches!(load_report(&path), Err(Error::Schema(_))));
        assert!(matches!(load_report(&dir.path().join("none.json")), Err(Error::Io { .. })));

        let csv_path = dir.path().join("r.csv");
        write_points_csv(&report, &csv_path).unwrap();
        let rows = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(rows.lines().count(), 1 + 3 * 2);
        assert!(rows.starts_with("L,z_re,z_im,finite_value_re"));
    }
}
