//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any FAIL.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fermigas::bulk::{pressure_bulk, susceptibility_bulk, LandauSumPolicy, ThermoPoint};
use fermigas::fermi::{fermi_any_order, fermi_integral, fermi_series};
use fermigas::finite_box::{
    eigen_basis, hellmann_feynman_magnetization, pressure_box, pressure_box_series, reconstruct_kernel,
    spectrum_3d, susceptibility_box, trace_heat, truncation_energy, weyl_tail_bound, BoxSpec, GridPoint,
    SolverChoice, SpectrumStore,
};
use fermigas::finite_diff::{richardson_derivative, StencilPolicy};
use fermigas::harness::{
    disk_grid, report_to_json, run_convergence, ConvergenceStudy, GridPolicy, ObservableKind, RunOptions,
};
use fermigas::mehler::{
    count_accepted_tuples, diamagnetic_check, first_order_term_verify, flux_fl, free_kernel, mehler,
    semigroup_check, Point3, QuadraturePolicy,
};
use fermigas::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn special_functions() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.5, 2.5] {
        for k in 0..=8 {
            let r = 0.3 + 0.05 * k as f64;
            for j in 0..16 {
                let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / 16.0 + 0.1);
                worst = worst.max((fermi_series(alpha, z)? - fermi_integral(alpha, z)?).norm());
            }
        }
    }
    let ln2 = (fermi_any_order(1.0, c(1.0, 0.0))? - LN_2).norm();
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && ln2 <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max |series - integral| = {worst:.2e} (tol 1e-10), |f_1(1) - ln 2| = {ln2:.2e} (tol 1e-12), {elapsed:.2?} (< 1 s)"),
    )
}

fn bulk_zero_field() -> Result<Outcome> {
    let start = Instant::now();
    let policy = LandauSumPolicy::default();
    let mut chi1: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0] {
        for z in [0.3, 0.9] {
            let tp = ThermoPoint::new(beta, c(z, 0.0), 0.0)?;
            chi1 = chi1.max(susceptibility_bulk(&tp, 1, &policy)?.norm());
        }
    }
    let closed = -(2.0 * PI).powf(-1.5) * fermi_any_order(0.5, c(1.0, 0.0))?.re / 12.0;
    let tp = ThermoPoint::new(1.0, c(1.0, 0.0), 0.0)?;
    let jet = susceptibility_bulk(&tp, 2, &policy)?;
    let fd = richardson_derivative(
        |w| pressure_bulk(&tp.with_omega(w.abs())?, &policy),
        0.0,
        2,
        &StencilPolicy::for_order(2),
    )?;
    let (e_jet, e_fd) = ((jet - closed).norm(), (fd.value - closed).norm());
    let elapsed = start.elapsed();
    outcome(
        chi1 <= 1e-10 && e_jet <= 1e-6 && e_fd <= 1e-6 && elapsed < Duration::from_secs(1),
        format!(
            "max |chi1| = {chi1:.2e} (tol 1e-10); chi2 = {:.10} vs -(2pi)^-1.5 f_1/2(1)/12 = {closed:.10}: jet {e_jet:.2e}, finite difference {e_fd:.2e} (tol 1e-6); {elapsed:.2?} (< 1 s)",
            jet.re
        ),
    )
}

fn mehler_diagonal() -> Result<Outcome> {
    let x = Point3::new(0.3, -0.7, 0.2);
    let mut worst: f64 = 0.0;
    for beta in [0.25, 0.5, 1.0, 2.0, 4.0] {
        for omega in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let s: f64 = 0.5 * omega * beta;
            let ratio = if s == 0.0 { 1.0 } else { s / s.sinh() };
            let expect = (2.0 * PI * beta).powf(-1.5) * ratio;
            worst = worst.max((mehler(&x, &x, beta, omega).value - expect).norm() / expect);
        }
    }
    let xp = Point3::new(-0.4, 0.5, 0.9);
    let mut limit: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0] {
        let free = free_kernel(x.sub(&xp).norm_sq(), beta);
        for omega in [0.0, 1e-11] {
            limit = limit.max((mehler(&x, &xp, beta, omega).value - free).norm() / free);
        }
    }
    outcome(
        worst <= 1e-12 && limit <= 1e-10,
        format!("5x5 (beta, omega) grid max rel err {worst:.2e} (tol 1e-12); omega -> 0 vs free Gaussian {limit:.2e} (tol 1e-10)"),
    )
}

fn diamagnetic() -> Result<Outcome> {
    let report = diamagnetic_check(10_000, 11, 1e-12);
    let beta = 1.0;
    let spec = BoxSpec::new(3.0, 40, 60.0, None)?;
    let (_, basis) = eigen_basis(&spec, 1.0, SolverChoice::Direct)?;
    let h = spec.spacing();
    let slack = h * (2.0 * PI * beta).powf(-1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut box_violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let pairs = 300;
    for _ in 0..pairs {
        let mut point = || GridPoint {
            i1: rng.random_range(0..40),
            i2: rng.random_range(0..40),
            x3: rng.random_range(-1.4..1.4),
        };
        let (a, b) = (point(), point());
        let g = reconstruct_kernel(&spec, &basis, beta, &a, &b).norm();
        let (pa, pb) = (a.position(&spec), b.position(&spec));
        let r2: f64 = pa.iter().zip(&pb).map(|(u, v)| (u - v) * (u - v)).sum();
        let excess = g - free_kernel(r2, beta);
        max_excess = max_excess.max(excess);
        if excess > slack {
            box_violations += 1;
        }
    }
    outcome(
        report.violations == 0 && box_violations == 0,
        format!(
            "analytic: {} violations in {} samples (max ratio {:.6}); box L=3 n_perp=40: {box_violations} of {pairs} pairs exceed C h = {slack:.3e} (max excess {max_excess:.3e})",
            report.violations, report.samples, report.max_ratio
        ),
    )
}

fn flux_and_fibonacci() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut violations = 0;
    for _ in 0..100_000 {
        let mut point = || {
            Point3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            )
        };
        let (x, y, z) = (point(), point(), point());
        if flux_fl(&x, &y, &z).abs() > x.sub(&y).norm() * y.sub(&z).norm() {
            violations += 1;
        }
    }
    let (mut a, mut b) = (1u64, 1u64);
    let mut mismatches = Vec::new();
    for n in 1..=12 {
        // b = F(n + 1)
        if count_accepted_tuples(n) != b {
            mismatches.push(n);
        }
        (a, b) = (b, a + b);
    }
    outcome(
        violations == 0 && mismatches.is_empty(),
        format!("{violations} flux violations in 1e5 triples; Fibonacci mismatches at N = {mismatches:?} (N <= 12)"),
    )
}

fn semigroup() -> Result<Outcome> {
    let pairs = [
        (Point3::new(0.2, -0.4, 0.1), Point3::new(-0.3, 0.5, 0.6)),
        (Point3::new(1.0, 0.5, -0.5), Point3::new(0.0, -1.0, 0.3)),
    ];
    let mut worst: f64 = 0.0;
    for omega in [0.0, 1.0] {
        for (x, z) in &pairs {
            worst = worst.max(semigroup_check(x, z, 0.5, 0.5, omega, 24).residual);
        }
    }
    outcome(worst <= 1e-6, format!("max relative residual {worst:.2e} at s = t = 0.5, omega in {{0, 1}} (tol 1e-6)"))
}

fn first_order_verifier() -> Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (beta, omega) in [(1.0, 1.0), (0.5, 1.0)] {
        let r = first_order_term_verify(omega, beta, &QuadraturePolicy::default())?;
        pass &= r.rel_error <= 1e-2;
        parts.push(format!(
            "(beta={beta}, omega={omega}): quadrature {:.7} vs analytic {:.7}, rel {:.2e}",
            r.quadrature.re, r.analytic, r.rel_error
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    outcome(pass, format!("{} (tol 1e-2); {elapsed:.2?} (< 5 min)", parts.join("; ")))
}

fn trace_bound() -> Result<Outcome> {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (side, n_perp) in [(3.0, 40), (6.0, 59)] {
        for beta in [0.5, 1.0] {
            for omega in [0.0, 1.0] {
                let e_max = 0.5 * omega + 30.0 / beta;
                let spec = BoxSpec::new(side, n_perp, e_max, None)?;
                let sr = spectrum_3d(&spec, omega, SolverChoice::Auto)?;
                let trace = trace_heat(&sr, beta) + weyl_tail_bound(side, beta, 1.0, e_max);
                let bound = spec.volume() * (2.0 * PI * beta).powf(-1.5);
                let ratio = trace / bound;
                worst = worst.max(ratio);
                pass &= ratio <= 1.05;
            }
        }
    }
    outcome(pass, format!("max Tr W_L / (L^3 (2 pi beta)^-1.5) = {worst:.6} (bound 1.05)"))
}

fn series_identity() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for omega in [0.0, 1.0] {
        let spec = BoxSpec::with_spacing(6.0, 0.1, truncation_energy(1.0, omega, 0.5))?;
        let sr = spectrum_3d(&spec, omega, SolverChoice::Auto)?;
        let tp = ThermoPoint::new(1.0, c(0.5, 0.0), omega)?;
        let direct = pressure_box(&spec, &sr, &tp)?;
        let series = pressure_box_series(&spec, &sr, &tp, 60)?;
        worst = worst.max((direct - series).norm() / direct.norm());
    }
    outcome(worst <= 1e-8, format!("max relative gap {worst:.2e} at L=6, z=0.5, n_max=60 (tol 1e-8)"))
}

fn limit_study(observable: ObservableKind, chi_order: Option<usize>) -> ConvergenceStudy {
    ConvergenceStudy {
        observable,
        chi_order,
        beta: 1.0,
        omega: 1.0,
        fugacity_grid: disk_grid(c(0.3, 0.0), 0.6, 12),
        box_sides: vec![4.0, 6.0, 8.0],
        grid_policy: GridPolicy { spacing: 0.1 },
        seed: 1,
    }
}

const LIMIT_STUDIES: [(ObservableKind, Option<usize>, &str); 3] = [
    (ObservableKind::Pressure, None, "pressure"),
    (ObservableKind::Chi, Some(1), "chi1"),
    (ObservableKind::Chi, Some(2), "chi2"),
];

fn run_limit_studies(cache: &std::path::Path) -> Result<Vec<String>> {
    let options = RunOptions {
        cache_dir: Some(cache.to_path_buf()),
        ..RunOptions::default()
    };
    LIMIT_STUDIES
        .iter()
        .map(|(obs, n, _)| report_to_json(&run_convergence(&limit_study(*obs, *n), &options)?))
        .collect()
}

fn thermodynamic_limit(reports: &[String], elapsed: Duration) -> Result<Outcome> {
    let mut pass = elapsed < Duration::from_secs(3600);
    let mut parts = Vec::new();
    for (text, (_, _, name)) in reports.iter().zip(LIMIT_STUDIES) {
        let report: fermigas::harness::ConvergenceReport =
            serde_json::from_str(text).map_err(|e| fermigas::Error::Schema(e.to_string()))?;
        let sups: Vec<f64> = report.per_l.iter().map(|r| r.sup_diff.unwrap_or(f64::NAN)).collect();
        let failed: usize = report.per_l.iter().map(|r| r.failed_points).sum();
        let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
        let in_window = (0.5..=1.5).contains(&report.fitted_rate);
        pass &= decreasing && in_window && failed == 0;
        parts.push(format!(
            "{name}: sup {:?} p = {:.3} failed {failed}",
            sups.iter().map(|s| format!("{s:.4e}")).collect::<Vec<_>>(),
            report.fitted_rate
        ));
    }
    outcome(
        pass,
        format!("{} (strictly decreasing, p in [0.5, 1.5]); {elapsed:.1?} (<= 1 h)", parts.join("; ")),
    )
}

fn cross_derivative() -> Result<Outcome> {
    let order = 1;
    let policy = StencilPolicy::for_order(order);
    let top = policy.offsets().into_iter().fold(0.0, f64::max);
    let spec = BoxSpec::new(6.0, 60, truncation_energy(1.0, 1.0 + top, 0.5), None)?;
    let tp = ThermoPoint::new(1.0, c(0.5, 0.0), 1.0)?;
    let store = SpectrumStore::in_memory();
    let fd = susceptibility_box(&spec, &tp, order, &policy, &store)?;
    let (h, basis) = eigen_basis(&spec, 1.0, SolverChoice::Direct)?;
    let hf = hellmann_feynman_magnetization(&spec, &h, &basis, &tp)?;
    let rel = (fd.value - hf).norm() / hf.norm();
    outcome(
        rel <= 1e-4,
        format!(
            "finite difference {:.10e} vs Hellmann-Feynman {:.10e}: rel {rel:.2e} (tol 1e-4)",
            fd.value.re, hf.re
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, result: Result<Outcome>| {
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    report(1, "special-function consistency", special_functions());
    report(2, "bulk zero-field magnetization", bulk_zero_field());
    report(3, "Mehler diagonal", mehler_diagonal());
    report(4, "diamagnetic inequality", diamagnetic());
    report(5, "flux bound and composition counts", flux_and_fibonacci());
    report(6, "semigroup composition", semigroup());
    report(7, "first-order Duhamel term", first_order_verifier());
    report(8, "trace bound", trace_bound());
    report(9, "series identity", series_identity());

    let first = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let reports = run_limit_studies(first.path());
    let elapsed = start.elapsed();
    let limit = match &reports {
        Ok(r) => thermodynamic_limit(r, elapsed),
        Err(e) => outcome(false, format!("error: {e}")),
    };
    report(10, "thermodynamic limit", limit);
    report(11, "finite-difference vs Hellmann-Feynman", cross_derivative());
    let second = tempfile::tempdir().expect("temp dir");
    let determinism = match (&reports, run_limit_studies(second.path())) {
        (Ok(a), Ok(b)) => {
            let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
            outcome(
                same == a.len(),
                format!("{same} of {} reports byte-identical across runs with fresh spectrum caches", a.len()),
            )
        }
        (Err(e), _) => outcome(false, format!("error: {e}")),
        (_, Err(e)) => outcome(false, format!("error: {e}")),
    };
    report(12, "determinism", determinism);

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
