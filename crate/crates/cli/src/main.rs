use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fermigas::bulk::{density_bulk, pressure_bulk, susceptibility_bulk, LandauSumPolicy, ThermoPoint};
use fermigas::fermi::fermi_any_order;
use fermigas::finite_box::{
    density_box, pressure_box, susceptibility_box, truncation_energy, BoxSpec, SolverChoice, SpectrumStore,
};
use fermigas::finite_diff::StencilPolicy;
use fermigas::harness::{
    load_study, persist_report, run_convergence, write_points_csv, write_rate_csv, RunOptions, DEFAULT_TASK_CAP,
};
use fermigas::mehler::{first_order_term_verify, QuadraturePolicy};
use fermigas::output::to_json;
use fermigas::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Perfect Fermi gas in a constant magnetic field: special functions, bulk
/// and finite-box thermodynamics, kernel checks and convergence studies.
#[derive(Parser, Debug)]
#[command(name = "fermigas", version)]
struct Cli {
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for cached spectra.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fermi function f_alpha(z).
    Special(SpecialArgs),
    /// Bulk pressure, density and N-th field derivative.
    Bulk(BulkArgs),
    /// Dirichlet-box pressure, density and field derivative.
    Box(BoxArgs),
    /// First-order Duhamel term against the analytic field derivative of
    /// the heat-kernel diagonal.
    KernelVerify(KernelArgs),
    /// Thermodynamic-limit study from a JSON config.
    Converge(ConvergeArgs),
}

/// `RE,IM` or a bare real number.
fn parse_complex(text: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let number = |s: &str| s.parse::<f64>().map_err(|e| format!("cannot parse '{s}': {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(number(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(number(re)?, number(im)?)),
        _ => Err(format!("expected RE,IM, got '{text}'")),
    }
}

#[derive(Args, Debug)]
struct SpecialArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Argument as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z: Complex64,
}

#[derive(Args, Debug)]
struct BulkArgs {
    #[arg(long)]
    beta: f64,
    /// Fugacity as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z: Complex64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega: f64,
    /// Order of the field derivative reported as chi.
    #[arg(long, default_value_t = 1)]
    n: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Auto,
    Direct,
    Lanczos,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Direct => SolverChoice::Direct,
            SolverArg::Lanczos => SolverChoice::Lanczos,
        }
    }
}

#[derive(Args, Debug)]
struct BoxArgs {
    /// Box side.
    #[arg(long = "L")]
    side: f64,
    /// Interior grid points per transverse direction.
    #[arg(long)]
    n_perp: usize,
    #[arg(long)]
    beta: f64,
    /// Fugacity as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z: Complex64,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    #[arg(long, default_value_t = 1)]
    chi_order: usize,
    /// Spectral cutoff; chosen from (beta, omega, |z|) when omitted.
    #[arg(long)]
    e_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    solver: SolverArg,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long)]
    omega: f64,
    #[arg(long)]
    beta: f64,
    /// Accepted relative quadrature error estimate.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    /// Study config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Report path; the point table goes next to it as `.csv` and the
    /// L-versus-sup table as `.rate.csv`. Prints the report when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Upper bound on grid points × box sides × stencil width.
    #[arg(long, default_value_t = DEFAULT_TASK_CAP)]
    task_cap: usize,
}

#[derive(Serialize)]
struct SpecialRecord {
    alpha: f64,
    z: Complex64,
    value: Complex64,
}

#[derive(Serialize)]
struct BulkRecord {
    beta: f64,
    z: Complex64,
    omega: f64,
    #[serde(rename = "N")]
    n: usize,
    pressure: Complex64,
    density: Complex64,
    chi: Complex64,
}

#[derive(Serialize)]
struct BoxRecord {
    #[serde(rename = "L")]
    side: f64,
    h: f64,
    n_perp: usize,
    e_max: f64,
    n_eigs: usize,
    pressure: Complex64,
    density: Complex64,
    chi_order: usize,
    chi: Complex64,
    /// Two-scale estimate for chi.
    error_estimate: f64,
}

#[derive(Serialize)]
struct KernelRecord {
    analytic: f64,
    quadrature: Complex64,
    rel_error: f64,
    error_estimate: f64,
    nodes: usize,
}

#[derive(Serialize)]
struct ConvergeSummary {
    report: PathBuf,
    points_csv: PathBuf,
    rate_csv: PathBuf,
    fitted_rate: f64,
    fit_prefactor: f64,
    fit_residual: f64,
    sup_diff: Vec<(f64, Option<f64>)>,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: &'a str,
    message: String,
}

fn special(args: &SpecialArgs) -> Result<String> {
    let value = fermi_any_order(args.alpha, args.z)?;
    to_json(&SpecialRecord {
        alpha: args.alpha,
        z: args.z,
        value,
    })
}

fn bulk(args: &BulkArgs) -> Result<String> {
    let tp = ThermoPoint::new(args.beta, args.z, args.omega)?;
    let policy = LandauSumPolicy::default();
    to_json(&BulkRecord {
        beta: args.beta,
        z: args.z,
        omega: args.omega,
        n: args.n,
        pressure: pressure_bulk(&tp, &policy)?,
        density: density_bulk(&tp, &policy)?,
        chi: susceptibility_bulk(&tp, args.n, &policy)?,
    })
}

fn finite_box(args: &BoxArgs, store: &SpectrumStore) -> Result<String> {
    let tp = ThermoPoint::new(args.beta, args.z, args.omega)?;
    let stencil = StencilPolicy::for_order(args.chi_order);
    let top = stencil.offsets().into_iter().fold(0.0, f64::max);
    let e_max = args
        .e_max
        .unwrap_or_else(|| truncation_energy(args.beta, args.omega.abs() + top, args.z.norm()));
    let spec = BoxSpec::new(args.side, args.n_perp, e_max, None)?;
    let sr = store.get(&spec, args.omega)?;
    let chi = susceptibility_box(&spec, &tp, args.chi_order, &stencil, store)?;
    to_json(&BoxRecord {
        side: spec.side(),
        h: spec.spacing(),
        n_perp: spec.n_perp(),
        e_max,
        n_eigs: sr.eigenvalues.len(),
        pressure: pressure_box(&spec, &sr, &tp)?,
        density: density_box(&spec, &sr, &tp)?,
        chi_order: args.chi_order,
        chi: chi.value,
        error_estimate: chi.error,
    })
}

fn kernel_verify(args: &KernelArgs) -> Result<String> {
    let policy = QuadraturePolicy {
        tolerance: args.tol,
        ..QuadraturePolicy::default()
    };
    let r = first_order_term_verify(args.omega, args.beta, &policy)?;
    to_json(&KernelRecord {
        analytic: r.analytic,
        quadrature: r.quadrature,
        rel_error: r.rel_error,
        error_estimate: r.error_estimate,
        nodes: r.nodes,
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn converge(args: &ConvergeArgs, cache_dir: Option<PathBuf>) -> Result<String> {
    let study = load_study(&args.config)?;
    let options = RunOptions {
        task_cap: args.task_cap,
        cache_dir,
        ..RunOptions::default()
    };
    let report = run_convergence(&study, &options)?;
    let Some(out) = &args.out else {
        return to_json(&report);
    };
    let points_csv = sibling(out, ".csv");
    let rate_csv = sibling(out, ".rate.csv");
    persist_report(&report, out)?;
    write_points_csv(&report, &points_csv)?;
    write_rate_csv(&report, &rate_csv)?;
    to_json(&ConvergeSummary {
        report: out.clone(),
        points_csv,
        rate_csv,
        fitted_rate: report.fitted_rate,
        fit_prefactor: report.fit_prefactor,
        fit_residual: report.fit_residual,
        sup_diff: report.per_l.iter().map(|r| (r.side, r.sup_diff)).collect(),
    })
}

fn run(cli: &Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Domain(format!("cannot build a pool of {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Special(a) => special(a),
        Command::Bulk(a) => bulk(a),
        Command::Box(a) => {
            let store = SpectrumStore::new(cli.cache_dir.clone(), a.solver.into())?;
            finite_box(a, &store)
        }
        Command::KernelVerify(a) => kernel_verify(a),
        Command::Converge(a) => converge(a, cli.cache_dir.clone()),
    }
}

fn emit_error(kind: &str, message: String) {
    let record = ErrorRecord { kind, message };
    let text = to_json(&record).unwrap_or_else(|_| format!("{{\"kind\":\"{kind}\"}}"));
    eprintln!("{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error("usage", e.to_string().trim_end().to_string());
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level.filter())
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::debug!("{e:?}");
            emit_error(e.kind(), e.to_string());
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
