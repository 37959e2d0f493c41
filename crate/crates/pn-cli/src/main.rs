//! `pnreal`: verify Poisson–Nijenhuis structure data on a coordinate patch
//! and certify the symplectic realization built from the geodesic spray.
//!
//! Exit codes: 0 all checks pass, 1 at least one check fails, 2 usage or
//! input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pn_core::catalog;
use pn_core::problem::{problem_from_catalog, ConnectionMode, ProblemFile};
use pn_core::report::Report;
use pn_core::suite;

#[derive(Parser)]
#[command(
    name = "pnreal",
    about = "Poisson-Nijenhuis structure checks and symplectic realization certification",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Overrides applied on top of the problem file's numerics block.
#[derive(Args, Clone)]
struct Overrides {
    /// RK4 step count for flow integration
    #[arg(long)]
    steps: Option<usize>,
    /// covector box radius around the zero section
    #[arg(long)]
    ymax: Option<f64>,
    /// tolerance for pointwise algebraic identities
    #[arg(long)]
    tol_algebra: Option<f64>,
    /// tolerance for flow/quadrature identities
    #[arg(long)]
    tol_flow: Option<f64>,
    /// tolerance for finite differences of quadrature quantities
    #[arg(long)]
    tol_fd: Option<f64>,
    /// number of sample points
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed for sampling
    #[arg(long)]
    seed: Option<u64>,
    /// write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// also write a flat CSV residual table here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pointwise structure checks (Jacobi, torsion, concomitant,
    /// intertwining, hierarchy, connection residuals)
    Check {
        file: PathBuf,
        /// extend hierarchy antisymmetry checks to |k| <= 2
        #[arg(long)]
        hierarchy: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Full realization certification (spray, flow, integrated forms,
    /// closedness, nondegeneracy, recursion operator, projection)
    Realize {
        file: PathBuf,
        /// extend Poisson-map checks to |k| <= 2
        #[arg(long)]
        hierarchy: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Empirical covector-radius sweep of form nondegeneracy
    Sweep {
        file: PathBuf,
        /// comma-separated y_max values to probe
        #[arg(long, value_delimiter = ',', required = true)]
        ymax_list: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Exploratory pencil study of two structures on a shared patch
    Pencil {
        file0: PathBuf,
        file1: PathBuf,
        /// comma-separated interpolation parameters in [0, 1]
        #[arg(long, value_delimiter = ',', required = true)]
        s_list: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List built-in instances, or emit one as a problem file
    Catalog {
        name: Option<String>,
        /// write the problem file here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, ov: &Overrides) -> Result<ProblemFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
    let mut pf = ProblemFile::from_json(&text)
        .map_err(|e| format!("{}: {}", path.display(), e))?;
    if let Some(v) = ov.steps {
        pf.numerics.rk4_steps = v;
    }
    if let Some(v) = ov.ymax {
        pf.numerics.y_max = v;
    }
    if let Some(v) = ov.tol_algebra {
        pf.numerics.tol_algebra = v;
    }
    if let Some(v) = ov.tol_flow {
        pf.numerics.tol_flow = v;
    }
    if let Some(v) = ov.tol_fd {
        pf.numerics.tol_fd = v;
    }
    if let Some(v) = ov.samples {
        pf.numerics.samples = v;
    }
    if let Some(v) = ov.seed {
        pf.numerics.seed = v;
    }
    Ok(pf)
}

fn emit(report: &Report, ov: &Overrides) -> Result<(), String> {
    let json = report.to_json();
    match &ov.out {
        Some(path) => std::fs::write(path, json.as_bytes())
            .map_err(|e| format!("cannot write {}: {}", path.display(), e))?,
        None => println!("{}", json),
    }
    if let Some(path) = &ov.csv {
        std::fs::write(path, report.to_csv().as_bytes())
            .map_err(|e| format!("cannot write {}: {}", path.display(), e))?;
    }
    Ok(())
}

fn verdict_code(report: &Report) -> ExitCode {
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run() -> Result<ExitCode, String> {
    match Cli::parse().cmd {
        Cmd::Check {
            file,
            hierarchy,
            overrides,
        } => {
            let pf = load(&file, &overrides)?;
            let (bundle, mode) = pf.to_bundle().map_err(|e| e.to_string())?;
            let report = suite::run_check_suite(&bundle, mode, &pf.numerics, hierarchy)
                .map_err(|e| e.to_string())?;
            emit(&report, &overrides)?;
            Ok(verdict_code(&report))
        }
        Cmd::Realize {
            file,
            hierarchy,
            overrides,
        } => {
            let pf = load(&file, &overrides)?;
            let (bundle, mode) = pf.to_bundle().map_err(|e| e.to_string())?;
            match mode {
                ConnectionMode::Explicit | ConnectionMode::Zero => {}
                ConnectionMode::Solve => {
                    return Err(
                        "realization needs an explicit connection: the pointwise solve does not \
                         produce a smooth connection field; run `check` to validate solvability, \
                         then supply the entries with mode \"explicit\""
                            .into(),
                    )
                }
                ConnectionMode::Absent => {
                    return Err("realization needs a connection block (mode \"explicit\" or \"zero\")".into())
                }
            }
            let report = suite::run_realize_suite(&bundle, &pf.numerics, hierarchy)
                .map_err(|e| e.to_string())?;
            emit(&report, &overrides)?;
            Ok(verdict_code(&report))
        }
        Cmd::Sweep {
            file,
            ymax_list,
            overrides,
        } => {
            let pf = load(&file, &overrides)?;
            let (bundle, mode) = pf.to_bundle().map_err(|e| e.to_string())?;
            if !matches!(mode, ConnectionMode::Explicit | ConnectionMode::Zero) {
                return Err("sweep needs an explicit connection".into());
            }
            let report = suite::run_sweep(&bundle, &pf.numerics, &ymax_list)
                .map_err(|e| e.to_string())?;
            emit(&report, &overrides)?;
            Ok(verdict_code(&report))
        }
        Cmd::Pencil {
            file0,
            file1,
            s_list,
            overrides,
        } => {
            if s_list.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err("pencil parameters must lie in [0, 1]".into());
            }
            let pf0 = load(&file0, &overrides)?;
            let pf1 = load(&file1, &overrides)?;
            let (b0, _) = pf0.to_bundle().map_err(|e| e.to_string())?;
            let (b1, _) = pf1.to_bundle().map_err(|e| e.to_string())?;
            let report = suite::run_pencil(&b0, &b1, &pf0.numerics, &s_list)
                .map_err(|e| e.to_string())?;
            emit(&report, &overrides)?;
            Ok(verdict_code(&report))
        }
        Cmd::Catalog { name, out } => {
            match name {
                None => {
                    for n in catalog::NAMES {
                        println!("{}", n);
                    }
                }
                Some(n) => {
                    let entry = catalog::by_name(&n).map_err(|e| e.to_string())?;
                    let pf = problem_from_catalog(&entry);
                    let json = pf.to_json();
                    match out {
                        Some(path) => std::fs::write(&path, json.as_bytes())
                            .map_err(|e| format!("cannot write {}: {}", path.display(), e))?,
                        None => println!("{}", json),
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {}", msg);
            ExitCode::from(2)
        }
    }
}
