//! End-to-end jobs: build the run from a config, execute it and persist
//! every output with a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use log::{info, warn};
use serde_json::json;
use thiserror::Error;

use super::checkpoint::{read_checkpoint, write_checkpoint, CheckpointError};
use super::config::{ConfigError, RunConfig, StudyKind};
use super::manifest::{
    write_manifest, CompletionStatus, ManifestError, RunManifest, MANIFEST_FILE,
};
use super::timeseries::{read_timeseries, write_timeseries, TimeseriesError};
use crate::diagnostics::TimeSeries;
use crate::solver::{RunStatus, Simulation, SolverError};
use crate::spectral::{wavenumber_grid, SpectralField};
use crate::study::{
    alpha_convergence_study, blowup_scan, viscosity_limit_study, BlowupScanReport, BlowupVerdict,
    StudyError, StudyOptions, StudyOutput,
};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const CHECKPOINT_FILE: &str = "final.ckpt";
pub const CONVERGENCE_FILE: &str = "convergence.json";
pub const BLOWUP_FILE: &str = "blowup.json";

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("run diverged at t={t} (step {step}): {reason}")]
    Diverged { t: f64, step: u64, reason: String },
    #[error("cannot write to {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// What a finished job left behind.
#[derive(Debug, Clone)]
pub struct JobSummary {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

fn ensure_dir(dir: &Path) -> Result<(), RuntimeError> {
    fs::create_dir_all(dir).map_err(|source| RuntimeError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_json(value: &impl serde::Serialize, path: &Path) -> Result<(), RuntimeError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|source| RuntimeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Config echo for the manifest. The output directory is left out: the
/// manifest lives in it.
fn manifest_config(cfg: &RunConfig) -> serde_json::Value {
    let mut echo = cfg.echo();
    if let Some(out) = echo.get_mut("output").and_then(|o| o.as_object_mut()) {
        out.remove("dir");
    }
    echo
}

fn new_manifest(command: &str, cfg: &RunConfig, started: SystemTime) -> RunManifest {
    let mut m = RunManifest::new(command, manifest_config(cfg), started);
    m.warnings = cfg.warnings.clone();
    m
}

fn finish(
    mut manifest: RunManifest,
    out: &Path,
    started: SystemTime,
) -> Result<JobSummary, RuntimeError> {
    manifest.wall_clock = super::manifest::WallClock::since(started);
    write_manifest(&manifest, &out.join(MANIFEST_FILE))?;
    Ok(JobSummary {
        out_dir: out.to_path_buf(),
        manifest,
    })
}

/// Initial data of `cfg` on its grid.
pub fn initial_field(cfg: &RunConfig) -> Result<SpectralField, RuntimeError> {
    let grid = wavenumber_grid(cfg.solver.n).map_err(SolverError::from)?;
    Ok(cfg.ic.build(&grid))
}

/// Integrates one run, writing `timeseries.csv`, `final.ckpt` and the
/// manifest to `out`. With `resume`, continues from a checkpoint whose time
/// matches a row of the existing time series in `out`.
///
/// A diverged run still writes its partial series and a manifest flagged
/// `diverged`, then returns [`RuntimeError::Diverged`].
pub fn execute_run(
    cfg: &RunConfig,
    out: &Path,
    resume: Option<&Path>,
) -> Result<JobSummary, RuntimeError> {
    let started = SystemTime::now();
    ensure_dir(out)?;
    let p = cfg.solver.clone();
    let (mut sim, mut series) = match resume {
        None => (
            Simulation::new(p.clone(), initial_field(cfg)?)?,
            TimeSeries::default(),
        ),
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            if ckpt.state.u.grid().n() != p.n
                || ckpt.r != p.r
                || ckpt.alpha != p.alpha
                || ckpt.nu != p.nu
            {
                return Err(RuntimeError::Usage(format!(
                    "checkpoint {} was written with N={}, r={}, alpha={}, nu={}, which differs from the config",
                    path.display(),
                    ckpt.state.u.grid().n(),
                    ckpt.r,
                    ckpt.alpha,
                    ckpt.nu
                )));
            }
            let mut prior = read_timeseries(&out.join(TIMESERIES_FILE))?;
            let keep = prior
                .iter()
                .position(|r| r.t == ckpt.state.t)
                .ok_or_else(|| {
                    RuntimeError::Usage(format!(
                        "no time series row at checkpoint time t={}",
                        ckpt.state.t
                    ))
                })?;
            let dissipation = prior[keep].dissipation_cum;
            // a final sample off the stride is not part of the uninterrupted series
            let step = ckpt.state.step_index;
            let on_stride = step % cfg.output.sample_every.max(1) == 0 || step >= p.total_steps();
            prior.truncate(if on_stride { keep + 1 } else { keep });
            (
                Simulation::resume(p.clone(), ckpt.state, dissipation)?,
                prior,
            )
        }
    };
    let skip_first = !series.is_empty();
    let mut first = true;
    let status = sim.run_with(cfg.output.sample_every, |rep, _| {
        if !(first && skip_first) {
            series.push(*rep);
        }
        first = false;
    });

    write_timeseries(&series, &out.join(TIMESERIES_FILE))?;
    write_checkpoint(sim.state(), &p, &out.join(CHECKPOINT_FILE))?;
    let mut manifest = new_manifest("run", cfg, started);
    manifest.add_output(out, TIMESERIES_FILE)?;
    manifest.add_output(out, CHECKPOINT_FILE)?;
    match status {
        RunStatus::Completed => {
            info!(
                "run completed: {} samples in {}",
                series.len(),
                out.display()
            );
            finish(manifest, out, started)
        }
        RunStatus::Diverged { t, step, reason } => {
            manifest.status = CompletionStatus::Diverged;
            manifest.detail = Some(format!("t={t} step={step}: {reason}"));
            finish(manifest, out, started)?;
            Err(RuntimeError::Diverged { t, step, reason })
        }
    }
}

fn study_failed(
    command: &str,
    cfg: &RunConfig,
    out: &Path,
    started: SystemTime,
    err: StudyError,
) -> RuntimeError {
    let mut manifest = new_manifest(command, cfg, started);
    let diverged = matches!(
        &err,
        StudyError::RunFailed {
            source: SolverError::Diverged { .. },
            ..
        }
    );
    manifest.status = if diverged {
        CompletionStatus::Diverged
    } else {
        CompletionStatus::Aborted
    };
    manifest.detail = Some(err.to_string());
    if let Err(e) = finish(manifest, out, started) {
        warn!("could not write manifest after failure: {e}");
    }
    match err {
        StudyError::RunFailed {
            source: SolverError::Diverged { t, step, reason },
            parameter,
            value,
        } => RuntimeError::Diverged {
            t,
            step,
            reason: format!("{parameter} = {value}: {reason}"),
        },
        other => RuntimeError::Study(other),
    }
}

fn write_study(
    command: &str,
    cfg: &RunConfig,
    out: &Path,
    started: SystemTime,
    study: &StudyOutput,
) -> Result<JobSummary, RuntimeError> {
    let mut manifest = new_manifest(command, cfg, started);
    write_json(&study.result, &out.join(CONVERGENCE_FILE))?;
    manifest.add_output(out, CONVERGENCE_FILE)?;
    write_timeseries(&study.reference_series, &out.join("reference.csv"))?;
    manifest.add_output(out, "reference.csv")?;
    for (i, (value, series)) in study.rung_series.iter().enumerate() {
        let name = format!("rung_{i}_{}_{value:e}.csv", study.result.parameter);
        write_timeseries(series, &out.join(&name))?;
        manifest.add_output(out, &name)?;
    }
    if !study.result.monotone {
        manifest
            .warnings
            .push("errors do not decrease strictly along the ladder".into());
    }
    finish(manifest, out, started)
}

/// `alpha` ladder from `[study]` (parameter `alpha`).
pub fn execute_convergence(
    cfg: &RunConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<(JobSummary, StudyOutput), RuntimeError> {
    let started = SystemTime::now();
    let Some(study) = &cfg.study else {
        return Err(RuntimeError::Usage(
            "convergence needs a [study] section".into(),
        ));
    };
    let StudyKind::Alpha(mode) = study.kind else {
        return Err(RuntimeError::Usage(
            "convergence needs study.parameter = \"alpha\"".into(),
        ));
    };
    ensure_dir(out)?;
    let u0 = initial_field(cfg)?;
    let opts = StudyOptions {
        workers,
        sample_every: cfg.output.sample_every,
    };
    let res = alpha_convergence_study(&cfg.solver, &study.values, &u0, mode, opts)
        .map_err(|e| study_failed("convergence", cfg, out, started, e))?;
    let summary = write_study("convergence", cfg, out, started, &res)?;
    Ok((summary, res))
}

/// `nu` ladder from `[study]` (parameter `nu`).
pub fn execute_viscosity_limit(
    cfg: &RunConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<(JobSummary, StudyOutput), RuntimeError> {
    let started = SystemTime::now();
    let Some(study) = &cfg.study else {
        return Err(RuntimeError::Usage(
            "viscosity-limit needs a [study] section".into(),
        ));
    };
    let StudyKind::Viscosity(mode) = study.kind else {
        return Err(RuntimeError::Usage(
            "viscosity-limit needs study.parameter = \"nu\"".into(),
        ));
    };
    ensure_dir(out)?;
    let u0 = initial_field(cfg)?;
    let opts = StudyOptions {
        workers,
        sample_every: cfg.output.sample_every,
    };
    let res = viscosity_limit_study(&cfg.solver, &study.values, &u0, mode, opts)
        .map_err(|e| study_failed("viscosity-limit", cfg, out, started, e))?;
    let summary = write_study("viscosity-limit", cfg, out, started, &res)?;
    Ok((summary, res))
}

/// Blow-up monitor scan over the `alpha` values of `[study]`, up to `solver.t_end`.
pub fn execute_blowup(
    cfg: &RunConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<(JobSummary, BlowupScanReport), RuntimeError> {
    let started = SystemTime::now();
    let Some(study) = &cfg.study else {
        return Err(RuntimeError::Usage(
            "blowup needs a [study] section with alpha values".into(),
        ));
    };
    if !matches!(study.kind, StudyKind::Alpha(_)) {
        return Err(RuntimeError::Usage(
            "blowup needs study.parameter = \"alpha\"".into(),
        ));
    }
    ensure_dir(out)?;
    let u0 = initial_field(cfg)?;
    let opts = StudyOptions {
        workers,
        sample_every: cfg.output.sample_every,
    };
    let report = blowup_scan(&cfg.solver, &study.values, &u0, cfg.solver.t_end, opts)
        .map_err(|e| study_failed("blowup", cfg, out, started, e))?;
    let mut manifest = new_manifest("blowup", cfg, started);
    write_json(&report, &out.join(BLOWUP_FILE))?;
    manifest.add_output(out, BLOWUP_FILE)?;
    if report.diverged.iter().any(Option::is_some) {
        manifest.detail = Some("one or more rungs diverged".into());
    }
    if report.verdict == BlowupVerdict::MonitorNotVanishing {
        manifest.warnings.push(
            "blow-up monitor does not vanish along the ladder (heuristic evidence only)".into(),
        );
    }
    let summary = finish(manifest, out, started)?;
    Ok((summary, report))
}

/// Short description of the active regime and warnings, for `info`.
pub fn describe(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "config": cfg.echo(),
        "regime": cfg.solver.regime().to_string(),
        "warnings": cfg.warnings,
    })
}
