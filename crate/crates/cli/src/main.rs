//! `ldl`: command-line front end for building and checking low-density-limit
//! generators.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 failed
//! identity suite, 64 usage error.

// Negated comparisons are deliberate: NaN inputs must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ldl_core::bath::Channel;
use ldl_core::dynamics::{evolve_master, unravel_jump, write_trajectory_csv};
use ldl_core::generator::{build_generator, check_grid_coverage, drift, drift_from_t};
use ldl_core::io::{matrix_from_rows, matrix_to_rows, vector_from_pairs, MatrixRows};
use ldl_core::linalg::{frobenius, zeros, CMat};
use ldl_core::tmatrix::{series_term, t_operator_components, Pair};
use ldl_core::verification::{run_identity_suite, run_limit_suite, SuiteReport};
use ldl_core::{Error, Model, ModelSpec};

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_SUITE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "ldl", version, about = "Low-density-limit quantum Markov generators")]
struct Cli {
    /// Maximum number of worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the reservoir function γ_ε(E) as CSV.
    Gamma {
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        epsilon: u8,
        #[arg(long, allow_negative_numbers = true)]
        emin: f64,
        #[arg(long, allow_negative_numbers = true)]
        emax: f64,
        #[arg(long)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The four blocks t^{εε′}(E) and their perturbative partial sums.
    Tmatrix {
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        energy: f64,
        #[arg(long, default_value_t = 6)]
        orders: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drift Γ computed directly and from the T-operator.
    Drift {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drift, Hamiltonian and Kraus family of the generator.
    Generator {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the master equation from a density matrix.
    Evolve {
        model: PathBuf,
        #[arg(long)]
        rho0: PathBuf,
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average quantum-jump trajectories from a pure state.
    Unravel {
        model: PathBuf,
        #[arg(long)]
        psi0: PathBuf,
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        trajectories: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the identity and/or limit checks.
    Check {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Identities,
    Limits,
    All,
}

/// Why a command stopped.
enum Failure {
    Core(Error),
    SuiteFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load(path: &Path) -> Result<ModelSpec, Error> {
    ldl_core::io::parse_model(&read_text(path)?)
}

fn emit(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Error> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w).map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    emit(out, |w| writeln!(w, "{text}"))
}

#[derive(Serialize)]
struct ValidationReport {
    valid: bool,
    dim: usize,
    bohr_set: Vec<f64>,
    rotating_wave: bool,
    supports: [(f64, f64); 2],
    support_gap: f64,
}

fn validate(model: &Path, out: &Option<PathBuf>) -> Outcome {
    let m = Model::new(load(model)?)?;
    check_grid_coverage(&m)?;
    emit_json(
        out,
        &ValidationReport {
            valid: true,
            dim: m.dim(),
            bohr_set: m.spectral.bohr_set.clone(),
            rotating_wave: m.spectral.is_rwa(),
            supports: m.bath_report.supports,
            support_gap: m.bath_report.support_gap,
        },
    )?;
    Ok(())
}

fn gamma(model: &Path, epsilon: u8, emin: f64, emax: f64, points: usize, out: &Option<PathBuf>) -> Outcome {
    if points < 2 || !(emin < emax) {
        return Err(Error::argument("need --emin < --emax and --points >= 2").into());
    }
    let m = Model::new(load(model)?)?;
    let ch = Channel::from_index(epsilon as usize)?;
    let h = (emax - emin) / (points - 1) as f64;
    let rows = (0..points)
        .map(|k| {
            let e = if k + 1 == points { emax } else { emin + k as f64 * h };
            m.bath.gamma(ch, e).map(|g| (e, g))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    emit(out, |w| {
        writeln!(w, "E,re_gamma,im_gamma")?;
        for (e, g) in &rows {
            writeln!(w, "{e},{},{}", g.re, g.im)?;
        }
        Ok(())
    })?;
    Ok(())
}

#[derive(Serialize)]
struct PartialSum {
    order: usize,
    partial_sum: MatrixRows,
}

#[derive(Serialize)]
struct PairEntry {
    pair: &'static str,
    t: MatrixRows,
    series: Vec<PartialSum>,
}

#[derive(Serialize)]
struct TmatrixReport {
    energy: f64,
    blocks: Vec<PairEntry>,
}

fn tmatrix(model: &Path, energy: f64, orders: usize, out: &Option<PathBuf>) -> Outcome {
    let m = Model::new(load(model)?)?;
    let t = t_operator_components(&m, energy)?;
    let mut blocks = Vec::new();
    for (pair, tp) in Pair::ALL.into_iter().zip(&t) {
        let mut acc: CMat = zeros(m.dim());
        let mut series = Vec::new();
        for k in 1..=orders {
            let allowed = if pair.is_diagonal() { k % 2 == 0 } else { k % 2 == 1 };
            if !allowed {
                continue;
            }
            acc += series_term(&m, pair, k, energy)?;
            series.push(PartialSum { order: k, partial_sum: matrix_to_rows(&acc) });
        }
        blocks.push(PairEntry { pair: pair.label(), t: matrix_to_rows(tp), series });
    }
    emit_json(out, &TmatrixReport { energy, blocks })?;
    Ok(())
}

#[derive(Serialize)]
struct DriftReport {
    drift_direct: MatrixRows,
    drift_via_t: MatrixRows,
    frobenius_discrepancy: f64,
}

fn drift_cmd(model: &Path, out: &Option<PathBuf>) -> Outcome {
    let m = Model::new(load(model)?)?;
    let a = drift(&m)?;
    let b = drift_from_t(&m)?;
    emit_json(
        out,
        &DriftReport {
            frobenius_discrepancy: frobenius(&(&a - &b)),
            drift_direct: matrix_to_rows(&a),
            drift_via_t: matrix_to_rows(&b),
        },
    )?;
    Ok(())
}

fn generator(model: &Path, out: &Option<PathBuf>) -> Outcome {
    let m = Model::new(load(model)?)?;
    let gen = build_generator(&m)?;
    let text = gen.to_json();
    emit(out, |w| writeln!(w, "{text}"))?;
    Ok(())
}

fn evolve(model: &Path, rho0: &Path, tmax: f64, dt: f64, out: &Option<PathBuf>) -> Outcome {
    let m = Model::new(load(model)?)?;
    let rows: MatrixRows = serde_json::from_str(&read_text(rho0)?).map_err(Error::from)?;
    let rho = matrix_from_rows(&rows, "rho0")?;
    let gen = build_generator(&m)?;
    let traj = evolve_master(&gen, &rho, tmax, dt)?;
    emit(out, |w| write_trajectory_csv(w, &traj.times, &traj.states))?;
    Ok(())
}

fn unravel(
    model: &Path,
    psi0: &Path,
    tmax: f64,
    dt: f64,
    trajectories: usize,
    seed: u64,
    out: &Option<PathBuf>,
) -> Outcome {
    let m = Model::new(load(model)?)?;
    let pairs: Vec<[f64; 2]> = serde_json::from_str(&read_text(psi0)?).map_err(Error::from)?;
    let psi = vector_from_pairs(&pairs);
    let gen = build_generator(&m)?;
    let ens = unravel_jump(&gen, &psi, tmax, dt, trajectories, seed)?;
    emit(out, |w| write_trajectory_csv(w, &ens.times, &ens.mean_states))?;
    Ok(())
}

fn check(model: &Path, suite: Suite, out: &Option<PathBuf>) -> Outcome {
    let spec = load(model)?;
    let report = match suite {
        Suite::Identities => run_identity_suite(&spec)?,
        Suite::Limits => {
            Model::new(spec)?;
            run_limit_suite()?
        }
        Suite::All => run_identity_suite(&spec)?.merge(run_limit_suite()?),
    };
    emit(out, |w| writeln!(w, "{}", report.to_json()))?;
    report_failures(&report)
}

fn report_failures(report: &SuiteReport) -> Outcome {
    if report.pass {
        return Ok(());
    }
    for c in report.failures() {
        eprintln!("check {} failed: residual {:e} > tolerance {:e}", c.check, c.residual, c.tolerance);
    }
    Err(Failure::SuiteFailed)
}

fn dispatch(cmd: &Command) -> Outcome {
    match cmd {
        Command::Validate { model, out } => validate(model, out),
        Command::Gamma { model, epsilon, emin, emax, points, out } => gamma(model, *epsilon, *emin, *emax, *points, out),
        Command::Tmatrix { model, energy, orders, out } => tmatrix(model, *energy, *orders, out),
        Command::Drift { model, out } => drift_cmd(model, out),
        Command::Generator { model, out } => generator(model, out),
        Command::Evolve { model, rho0, tmax, dt, out } => evolve(model, rho0, *tmax, *dt, out),
        Command::Unravel { model, psi0, tmax, dt, trajectories, seed, out } => {
            unravel(model, psi0, *tmax, *dt, *trajectories, *seed, out)
        }
        Command::Check { model, suite, out } => check(model, *suite, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure thread pool: {err}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::SuiteFailed) => ExitCode::from(EXIT_SUITE),
        Err(Failure::Core(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Argument(_) => EXIT_USAGE,
                Error::Numeric(_) => EXIT_NUMERIC,
                _ => EXIT_INPUT,
            })
        }
    }
}
