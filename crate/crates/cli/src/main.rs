//! `fvgt`: runs, regularization studies and cross-checks from a TOML config.
//!
//! Exit codes: 0 ok, 1 invalid config or usage, 2 numerical instability
//! (or a failed oracle comparison), 3 IO.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fvgt_core::io::config::ConfigError;
use fvgt_core::io::runner::{self, RuntimeError};
use fvgt_core::io::{load_config_with, RunConfig};
use fvgt_core::oracle::equivalence_suite;
use fvgt_core::solver::SolverError;
use fvgt_core::study::{StudyError, StudyOutput};
use log::warn;

#[derive(Parser, Debug)]
#[command(
    name = "fvgt",
    version,
    about = "Fractional Navier-Stokes-Voigt / Euler-Voigt solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a config entry, e.g. `alpha=0.05` or `ic.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to `output.dir` of the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Pool {
    /// Worker threads for ladder runs [default: available parallelism].
    #[arg(long, value_name = "K")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint written into the same output directory.
        #[arg(long, value_name = "CKPT")]
        resume: Option<PathBuf>,
    },
    /// Alpha ladder against the alpha = 0 reference.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pool: Pool,
    },
    /// Viscosity ladder against the inviscid reference.
    ViscosityLimit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pool: Pool,
    },
    /// Blow-up monitor scan over an alpha ladder.
    Blowup {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pool: Pool,
    },
    /// Compare the solver against the brute-force oracle at N = 4 and 8.
    OracleCheck,
    /// Validate a config and print it with its well-posedness regime.
    Info {
        #[command(flatten)]
        common: Common,
    },
}

macro_rules! outln {
    ($buf:expr, $($arg:tt)*) => {{
        let _ = writeln!($buf, $($arg)*);
    }};
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_INSTABILITY: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(err: &RuntimeError) -> u8 {
    match err {
        RuntimeError::Config(ConfigError::Missing(_) | ConfigError::Io { .. }) => EXIT_IO,
        RuntimeError::Config(_) | RuntimeError::Usage(_) => EXIT_VALIDATION,
        RuntimeError::Diverged { .. } => EXIT_INSTABILITY,
        RuntimeError::Solver(SolverError::Diverged { .. }) => EXIT_INSTABILITY,
        RuntimeError::Solver(_) => EXIT_VALIDATION,
        RuntimeError::Study(StudyError::RunFailed { .. }) => EXIT_INSTABILITY,
        RuntimeError::Study(StudyError::Pool(_)) => EXIT_IO,
        RuntimeError::Study(_) => EXIT_VALIDATION,
        RuntimeError::Io { .. }
        | RuntimeError::Timeseries(_)
        | RuntimeError::Checkpoint(_)
        | RuntimeError::Manifest(_)
        | RuntimeError::Json(_) => EXIT_IO,
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), RuntimeError> {
    let cfg = load_config_with(&common.config, &common.overrides)?;
    for w in &cfg.warnings {
        warn!("{w}");
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn workers(pool: &Pool) -> Option<usize> {
    pool.workers
        .or_else(|| std::thread::available_parallelism().map(|n| n.get()).ok())
}

fn print_study(buf: &mut String, out: &Path, study: &StudyOutput) {
    let res = &study.result;
    outln!(
        buf,
        "{} ladder ({}), reference {}",
        res.parameter,
        res.mode,
        res.reference_id
    );
    outln!(
        buf,
        "{:>12} {:>14} {:>14} {:>14} {:>14}",
        res.parameter,
        "error_L2",
        "error_mod",
        "error_Hr",
        "error_L2H1"
    );
    for e in &res.ladder {
        outln!(
            buf,
            "{:>12.4e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            e.value,
            e.error_l2,
            e.error_modified,
            e.error_hr,
            e.error_l2h1
        );
    }
    match res.fitted_rate {
        Some(r) => outln!(buf, "fitted rate: {r:.4}"),
        None => outln!(
            buf,
            "fitted rate: undefined (fewer than two positive rungs)"
        ),
    }
    outln!(buf, "monotone: {}", res.monotone);
    outln!(buf, "outputs in {}", out.display());
}

fn dispatch(cli: Cli, buf: &mut String) -> Result<u8, RuntimeError> {
    match cli.command {
        Command::Run { common, resume } => {
            let (cfg, out) = load(&common)?;
            let summary = runner::execute_run(&cfg, &out, resume.as_deref())?;
            outln!(buf, "run ok: outputs in {}", summary.out_dir.display());
        }
        Command::Convergence { common, pool } => {
            let (cfg, out) = load(&common)?;
            let (_, study) = runner::execute_convergence(&cfg, &out, workers(&pool))?;
            print_study(buf, &out, &study);
        }
        Command::ViscosityLimit { common, pool } => {
            let (cfg, out) = load(&common)?;
            let (_, study) = runner::execute_viscosity_limit(&cfg, &out, workers(&pool))?;
            print_study(buf, &out, &study);
        }
        Command::Blowup { common, pool } => {
            let (cfg, out) = load(&common)?;
            let (_, report) = runner::execute_blowup(&cfg, &out, workers(&pool))?;
            outln!(buf, "{:>12} {:>16}  status", "alpha", "monitor_sup");
            for ((a, m), d) in report
                .alphas
                .iter()
                .zip(&report.monitor_sup)
                .zip(&report.diverged)
            {
                let status = d.as_deref().unwrap_or("completed");
                outln!(buf, "{a:>12.4e} {m:>16.8e}  {status}");
            }
            outln!(
                buf,
                "verdict: {} (heuristic evidence, not proof)",
                report.verdict
            );
        }
        Command::OracleCheck => {
            let rows = equivalence_suite().map_err(|e| RuntimeError::Usage(e.to_string()))?;
            let mut failed = 0;
            for row in &rows {
                let tag = if row.pass { "PASS" } else { "FAIL" };
                outln!(
                    buf,
                    "{tag}  N={}  {:<52} {:.3e} (tol {:.0e})",
                    row.n,
                    row.name,
                    row.measured,
                    row.tolerance
                );
                failed += usize::from(!row.pass);
            }
            outln!(
                buf,
                "{} of {} comparisons passed",
                rows.len() - failed,
                rows.len()
            );
            if failed > 0 {
                return Ok(EXIT_INSTABILITY);
            }
        }
        Command::Info { common } => {
            let (cfg, _) = load(&common)?;
            let info = runner::describe(&cfg);
            outln!(buf, "{}", serde_json::to_string_pretty(&info)?);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FVGT_LOG", "warn")).init();
    let cli = Cli::parse();
    let mut buf = String::new();
    let result = dispatch(cli, &mut buf);
    // a closed pipe downstream is not an error of the run
    let _ = std::io::stdout().lock().write_all(buf.as_bytes());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
