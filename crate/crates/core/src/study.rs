//! Multi-run experiments: regularization ladders against a reference run,
//! and blow-up monitor scans along an `alpha` ladder.

use std::fmt;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::{voigt_weight, TimeSeries};
use crate::solver::{SimState, Simulation, SolverError, SolverParams};
use crate::spectral::{sobolev_norm_sq, SpectralField};

/// Fraction of the first rung the last rung must fall below for a scan to
/// count as consistent with regularity.
pub const BLOWUP_THRESHOLD: f64 = 0.1;

/// Minimum ladder length for a blow-up scan.
pub const MIN_SCAN_RUNGS: usize = 4;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("ladder is empty")]
    EmptyLadder,
    #[error("blow-up scan needs at least {MIN_SCAN_RUNGS} rungs, got {0}")]
    LadderTooShort(usize),
    #[error("ladder value {0} is not finite and non-negative")]
    BadValue(f64),
    #[error("{0}")]
    Setup(String),
    #[error("run at {parameter} = {value} failed: {source}")]
    RunFailed {
        parameter: &'static str,
        value: f64,
        #[source]
        source: SolverError,
    },
    #[error("rate fit needs at least two points with positive parameter and error, got {0}")]
    TooFewPoints(usize),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Limit taken by an `alpha` ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `nu = 0`: Euler-Voigt towards Euler.
    ToEuler,
    /// `nu > 0`: Navier-Stokes-Voigt towards Navier-Stokes.
    ToNse,
}

/// How a `nu` ladder treats `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViscosityMode {
    /// `alpha` fixed; reference is the inviscid Voigt run.
    FixedAlpha,
    /// `alpha = nu^{1/(2r)}` on each rung; reference is Euler.
    Joint,
}

/// Execution options shared by every study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Sampling stride of the per-rung time series.
    pub sample_every: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            workers: None,
            sample_every: 10,
        }
    }
}

/// Errors of one rung against the reference, over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    /// Regularization value (`alpha` or `nu`) of the rung.
    pub value: f64,
    /// `alpha` used on the rung.
    pub alpha: f64,
    /// `nu` used on the rung.
    pub nu: f64,
    /// `max_t |du|`.
    pub error_l2: f64,
    /// `max_t (|du|^2 + alpha^{2r} |A^{r/2} du|^2)^{1/2}`.
    pub error_modified: f64,
    /// `max_t |A^{r/2} du|`.
    pub error_hr: f64,
    /// `int_0^T |A^{1/2} du|^2 dt`.
    pub error_l2h1: f64,
    /// `|du|` at `t = 0`.
    pub error_initial: f64,
}

/// Least-squares slopes of each error against the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedRates {
    pub l2: Option<f64>,
    pub modified: Option<f64>,
    pub modified_squared: Option<f64>,
    pub hr: Option<f64>,
    pub l2h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    /// `"alpha"` or `"nu"`.
    pub parameter: String,
    pub mode: String,
    /// Sorted by descending parameter value.
    pub ladder: Vec<LadderEntry>,
    /// Headline rate: the `L^2` slope for `alpha` ladders, the squared
    /// modified-norm slope for `nu` ladders. `None` with fewer than two
    /// positive rungs.
    pub fitted_rate: Option<f64>,
    pub rates: FittedRates,
    /// True when the headline error decreases strictly along the ladder.
    pub monotone: bool,
    /// Digest of the reference parameters and initial data.
    pub reference_id: String,
}

/// Study result together with the sampled series of every run.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub result: ConvergenceResult,
    pub reference_series: TimeSeries,
    /// `(value, series)` in ladder order.
    pub rung_series: Vec<(f64, TimeSeries)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupVerdict {
    ConsistentWithRegularity,
    MonitorNotVanishing,
}

impl fmt::Display for BlowupVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowupVerdict::ConsistentWithRegularity => "consistent_with_regularity",
            BlowupVerdict::MonitorNotVanishing => "monitor_not_vanishing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupScanReport {
    /// Descending.
    pub alphas: Vec<f64>,
    /// Per-rung `sup_t alpha^{2r} |A^{r/2} u(t)|^2` over the steps reached.
    pub monitor_sup: Vec<f64>,
    /// Per-rung divergence message, if the rung did not complete.
    pub diverged: Vec<Option<String>>,
    pub threshold: f64,
    /// Heuristic evidence only.
    pub verdict: BlowupVerdict,
}

/// Slope of `log error` against `log value` by least squares, over the
/// pairs where both are positive.
pub fn fit_rate(values: &[f64], errors: &[f64]) -> Result<f64, StudyError> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .zip(errors)
        .filter(|(v, e)| **v > 0.0 && **e > 0.0 && v.is_finite() && e.is_finite())
        .map(|(v, e)| (v.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(StudyError::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(StudyError::TooFewPoints(1));
    }
    Ok(sxy / sxx)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Short hex digest identifying a run by its parameters and initial data.
pub fn run_identity(p: &SolverParams, u0: &SpectralField) -> String {
    let mut h = Sha256::new();
    h.update(
        format!(
            "nu={:e};alpha={:e};r={:e};N={};dt={:e};t_end={:e};dealias={:?};forced={}",
            p.nu,
            p.alpha,
            p.r,
            p.n,
            p.dt,
            p.t_end,
            p.dealias,
            p.forcing.is_some()
        )
        .as_bytes(),
    );
    for c in u0.components() {
        for z in c {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
    }
    hex::encode(&h.finalize()[..8])
}

fn sorted_ladder(values: &[f64]) -> Result<Vec<f64>, StudyError> {
    if values.is_empty() {
        return Err(StudyError::EmptyLadder);
    }
    if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(StudyError::BadValue(v));
    }
    let mut out = values.to_vec();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

fn with_pool<T: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, StudyError> {
    match workers {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| StudyError::Pool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

struct Rung {
    value: f64,
    sim: Simulation,
    series: TimeSeries,
    // running error measures
    sup_l2: f64,
    sup_modified: f64,
    sup_hr: f64,
    l2h1: f64,
    last_h1: Option<(f64, f64)>,
    initial: f64,
}

impl Rung {
    fn measure(&mut self, reference: &SimState) {
        let p = self.sim.params();
        let mut du = self.sim.state().u.clone();
        du.axpy(-1.0, &reference.u);
        let l2sq = sobolev_norm_sq(&du, 0.0);
        let hrsq = sobolev_norm_sq(&du, p.r);
        let h1sq = sobolev_norm_sq(&du, 1.0);
        let modified = (l2sq + voigt_weight(p.alpha, p.r) * hrsq).sqrt();
        self.sup_l2 = self.sup_l2.max(l2sq.sqrt());
        self.sup_modified = self.sup_modified.max(modified);
        self.sup_hr = self.sup_hr.max(hrsq.sqrt());
        let t = reference.t;
        match self.last_h1 {
            None => self.initial = l2sq.sqrt(),
            Some((t0, h0)) => self.l2h1 += 0.5 * (t - t0) * (h0 + h1sq),
        }
        self.last_h1 = Some((t, h1sq));
    }

    fn entry(&self) -> LadderEntry {
        let p = self.sim.params();
        LadderEntry {
            value: self.value,
            alpha: p.alpha,
            nu: p.nu,
            error_l2: self.sup_l2,
            error_modified: self.sup_modified,
            error_hr: self.sup_hr,
            error_l2h1: self.l2h1,
            error_initial: self.initial,
        }
    }
}

fn sample(sim: &mut Simulation, series: &mut TimeSeries, every: u64) {
    let step = sim.state().step_index;
    if step.is_multiple_of(every) || sim.is_finished() {
        let rep = sim.report();
        series.push(rep);
    }
}

/// Runs `reference` and every rung in lockstep, measuring errors after
/// each step.
fn lockstep(
    parameter: &'static str,
    reference: SolverParams,
    rungs: Vec<(f64, SolverParams)>,
    u0: &SpectralField,
    opts: StudyOptions,
) -> Result<(TimeSeries, Vec<Rung>), StudyError> {
    let every = opts.sample_every.max(1);
    let fail = |value: f64| {
        move |source: SolverError| StudyError::RunFailed {
            parameter,
            value,
            source,
        }
    };
    for (_, p) in &rungs {
        if p.n != reference.n || p.dt != reference.dt || p.t_end != reference.t_end {
            return Err(StudyError::Setup(
                "reference and rungs must share N, dt and t_end".into(),
            ));
        }
    }
    if u0.grid().n() != reference.n {
        return Err(StudyError::Setup(format!(
            "initial data on N={}, study on N={}",
            u0.grid().n(),
            reference.n
        )));
    }
    let mut ref_sim = Simulation::new(reference, u0.clone()).map_err(fail(f64::NAN))?;
    let mut ladder = Vec::with_capacity(rungs.len());
    for (value, p) in rungs {
        for w in p.validate().unwrap_or_default() {
            info!("{parameter} = {value}: {w}");
        }
        let sim = Simulation::new(p, u0.clone()).map_err(fail(value))?;
        ladder.push(Rung {
            value,
            sim,
            series: TimeSeries::default(),
            sup_l2: 0.0,
            sup_modified: 0.0,
            sup_hr: 0.0,
            l2h1: 0.0,
            last_h1: None,
            initial: 0.0,
        });
    }

    let mut ref_series = TimeSeries::default();
    sample(&mut ref_sim, &mut ref_series, every);
    for rung in ladder.iter_mut() {
        sample(&mut rung.sim, &mut rung.series, every);
        rung.measure(ref_sim.state());
    }
    while !ref_sim.is_finished() {
        let (ref_step, rung_steps) = rayon::join(
            || ref_sim.advance(),
            || {
                ladder
                    .par_iter_mut()
                    .map(|r| r.sim.advance().map_err(fail(r.value)))
                    .collect::<Vec<_>>()
            },
        );
        ref_step.map_err(|source| StudyError::RunFailed {
            parameter: "reference",
            value: f64::NAN,
            source,
        })?;
        for res in rung_steps {
            res?;
        }
        sample(&mut ref_sim, &mut ref_series, every);
        let reference = ref_sim.state();
        for rung in ladder.iter_mut() {
            sample(&mut rung.sim, &mut rung.series, every);
            rung.measure(reference);
        }
    }
    Ok((ref_series, ladder))
}

fn assemble(
    parameter: &str,
    mode: String,
    headline: impl Fn(&FittedRates) -> Option<f64>,
    headline_error: impl Fn(&LadderEntry) -> f64,
    reference_id: String,
    ref_series: TimeSeries,
    rungs: Vec<Rung>,
) -> Result<StudyOutput, StudyError> {
    let ladder: Vec<LadderEntry> = rungs.iter().map(Rung::entry).collect();
    let values: Vec<f64> = ladder.iter().map(|e| e.value).collect();
    let fit = |f: &dyn Fn(&LadderEntry) -> f64| -> Option<f64> {
        let errs: Vec<f64> = ladder.iter().map(f).collect();
        fit_rate(&values, &errs).ok()
    };
    let rates = FittedRates {
        l2: fit(&|e| e.error_l2),
        modified: fit(&|e| e.error_modified),
        modified_squared: fit(&|e| e.error_modified * e.error_modified),
        hr: fit(&|e| e.error_hr),
        l2h1: fit(&|e| e.error_l2h1),
    };
    let fitted_rate = headline(&rates);
    let errs: Vec<f64> = ladder.iter().map(&headline_error).collect();
    let monotone = strictly_decreasing(&errs);
    if !monotone {
        warn!("{parameter} study: errors do not decrease strictly along the ladder: {errs:?}");
    }
    Ok(StudyOutput {
        result: ConvergenceResult {
            parameter: parameter.to_string(),
            mode,
            ladder,
            fitted_rate,
            rates,
            monotone,
            reference_id,
        },
        reference_series: ref_series,
        rung_series: rungs.into_iter().map(|r| (r.value, r.series)).collect(),
    })
}

/// Compares Voigt runs at each `alpha` with the `alpha = 0` run from the
/// same data. `ToEuler` requires `base.nu == 0`, `ToNse` requires `base.nu > 0`.
pub fn alpha_convergence_study(
    base: &SolverParams,
    alphas: &[f64],
    u0: &SpectralField,
    mode: AlphaMode,
    opts: StudyOptions,
) -> Result<StudyOutput, StudyError> {
    match mode {
        AlphaMode::ToEuler if base.nu != 0.0 => {
            return Err(StudyError::Setup("to_euler requires nu = 0".into()))
        }
        AlphaMode::ToNse if base.nu <= 0.0 => {
            return Err(StudyError::Setup("to_nse requires nu > 0".into()))
        }
        _ => {}
    }
    let alphas = sorted_ladder(alphas)?;
    let reference = base.with_alpha(0.0);
    let reference_id = run_identity(&reference, u0);
    let rungs = alphas.iter().map(|&a| (a, base.with_alpha(a))).collect();
    let (ref_series, rungs) = with_pool(opts.workers, || {
        lockstep("alpha", reference, rungs, u0, opts)
    })??;
    let mode_name = match mode {
        AlphaMode::ToEuler => "to_euler",
        AlphaMode::ToNse => "to_nse",
    };
    assemble(
        "alpha",
        mode_name.into(),
        |r| r.l2,
        |e| e.error_l2,
        reference_id,
        ref_series,
        rungs,
    )
}

/// Compares runs at each `nu` with an inviscid reference.
pub fn viscosity_limit_study(
    base: &SolverParams,
    nus: &[f64],
    u0: &SpectralField,
    mode: ViscosityMode,
    opts: StudyOptions,
) -> Result<StudyOutput, StudyError> {
    let nus = sorted_ladder(nus)?;
    let (reference, rungs): (SolverParams, Vec<(f64, SolverParams)>) = match mode {
        ViscosityMode::FixedAlpha => (
            base.with_nu(0.0),
            nus.iter().map(|&nu| (nu, base.with_nu(nu))).collect(),
        ),
        ViscosityMode::Joint => (
            base.with_nu(0.0).with_alpha(0.0),
            nus.iter()
                .map(|&nu| {
                    let alpha = if nu == 0.0 {
                        0.0
                    } else {
                        nu.powf(1.0 / (2.0 * base.r))
                    };
                    (nu, base.with_nu(nu).with_alpha(alpha))
                })
                .collect(),
        ),
    };
    let reference_id = run_identity(&reference, u0);
    let (ref_series, rungs) =
        with_pool(opts.workers, || lockstep("nu", reference, rungs, u0, opts))??;
    let mode_name = match mode {
        ViscosityMode::FixedAlpha => "fixed_alpha",
        ViscosityMode::Joint => "joint",
    };
    assemble(
        "nu",
        mode_name.into(),
        |r| r.modified_squared,
        |e| e.error_modified,
        reference_id,
        ref_series,
        rungs,
    )
}

/// Verdict rule: every rung strictly below the previous one (a zero rung may
/// only be followed by zero) and the last rung at most `threshold` times the
/// first. Any diverged rung gives `MonitorNotVanishing`.
pub fn blowup_verdict(monitor_sup: &[f64], any_diverged: bool, threshold: f64) -> BlowupVerdict {
    let decreasing = monitor_sup
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    let vanishing = match (monitor_sup.first(), monitor_sup.last()) {
        (Some(&first), Some(&last)) => last <= threshold * first,
        _ => false,
    };
    if !any_diverged && decreasing && vanishing {
        BlowupVerdict::ConsistentWithRegularity
    } else {
        BlowupVerdict::MonitorNotVanishing
    }
}

fn scan_rung(p: SolverParams, u0: &SpectralField) -> (f64, Option<String>) {
    let mut sim = match Simulation::new(p.clone(), u0.clone()) {
        Ok(s) => s,
        Err(e) => return (0.0, Some(e.to_string())),
    };
    let weight = voigt_weight(p.alpha, p.r);
    let monitor = |s: &Simulation| weight * sobolev_norm_sq(&s.state().u, p.r);
    let mut sup = monitor(&sim);
    while !sim.is_finished() {
        if let Err(e) = sim.advance() {
            return (sup, Some(e.to_string()));
        }
        sup = sup.max(monitor(&sim));
    }
    (sup, None)
}

/// Sup over `[0, t_end]` of the blow-up monitor on each rung of an `alpha`
/// ladder, with a heuristic verdict on whether it vanishes as `alpha -> 0`.
pub fn blowup_scan(
    base: &SolverParams,
    alphas: &[f64],
    u0: &SpectralField,
    t_end: f64,
    opts: StudyOptions,
) -> Result<BlowupScanReport, StudyError> {
    if alphas.len() < MIN_SCAN_RUNGS {
        return Err(StudyError::LadderTooShort(alphas.len()));
    }
    let alphas = sorted_ladder(alphas)?;
    if u0.grid().n() != base.n {
        return Err(StudyError::Setup(format!(
            "initial data on N={}, scan on N={}",
            u0.grid().n(),
            base.n
        )));
    }
    let params: Vec<SolverParams> = alphas
        .iter()
        .map(|&a| base.with_alpha(a).with_t_end(t_end))
        .collect();
    let rungs: Vec<(f64, Option<String>)> = with_pool(opts.workers, || {
        params.into_par_iter().map(|p| scan_rung(p, u0)).collect()
    })?;
    let (monitor_sup, diverged): (Vec<f64>, Vec<Option<String>>) = rungs.into_iter().unzip();
    for (a, d) in alphas.iter().zip(&diverged) {
        if let Some(msg) = d {
            warn!("blow-up scan rung alpha = {a} diverged: {msg}");
        }
    }
    let verdict = blowup_verdict(
        &monitor_sup,
        diverged.iter().any(Option::is_some),
        BLOWUP_THRESHOLD,
    );
    Ok(BlowupScanReport {
        alphas,
        monitor_sup,
        diverged,
        threshold: BLOWUP_THRESHOLD,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{initial_condition, InitialCondition};
    use crate::spectral::wavenumber_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn smooth(n: usize) -> SpectralField {
        let g = wavenumber_grid(n).unwrap();
        initial_condition(
            &InitialCondition::RandomSmooth {
                seed: 5,
                decay_s: 4.0,
            },
            &g,
        )
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let values = [0.2, 0.1, 0.05, 0.025];
        let errors: Vec<f64> = values.iter().map(|a: &f64| 3.0 * a.powf(0.9)).collect();
        assert!((fit_rate(&values, &errors).unwrap() - 0.9).abs() < 1e-10);
        assert!(matches!(
            fit_rate(&[0.1, 0.0], &[1.0, 1.0]),
            Err(StudyError::TooFewPoints(1))
        ));
    }

    proptest! {
        #[test]
        fn fit_recovers_any_slope(r in 0.1f64..3.0, c in -5.0f64..5.0) {
            let values = [0.3, 0.11, 0.07, 0.02, 0.004];
            let errors: Vec<f64> = values.iter().map(|a: &f64| (r * a.ln() + c).exp()).collect();
            prop_assert!((fit_rate(&values, &errors).unwrap() - r).abs() < 1e-10);
        }
    }

    #[test]
    fn verdict_rule() {
        use BlowupVerdict::*;
        assert_eq!(
            blowup_verdict(&[1.0, 0.5, 0.2, 0.05], false, 0.1),
            ConsistentWithRegularity
        );
        assert_eq!(
            blowup_verdict(&[1.0, 0.5, 0.2, 0.15], false, 0.1),
            MonitorNotVanishing
        );
        assert_eq!(
            blowup_verdict(&[1.0, 1.2, 0.2, 0.05], false, 0.1),
            MonitorNotVanishing
        );
        assert_eq!(
            blowup_verdict(&[1.0, 0.5, 0.2, 0.05], true, 0.1),
            MonitorNotVanishing
        );
        assert_eq!(
            blowup_verdict(&[0.0; 4], false, 0.1),
            ConsistentWithRegularity
        );
    }

    #[test]
    fn ladder_is_sorted_descending() {
        assert_eq!(
            sorted_ladder(&[0.05, 0.2, 0.1]).unwrap(),
            vec![0.2, 0.1, 0.05]
        );
        assert!(matches!(sorted_ladder(&[]), Err(StudyError::EmptyLadder)));
        assert!(matches!(
            sorted_ladder(&[-1.0]),
            Err(StudyError::BadValue(_))
        ));
    }

    #[test]
    fn small_alpha_study_shrinks_errors() {
        let base = SolverParams::new(0.0, 0.0, 1.0, 8, 2e-3, 0.1);
        let u0 = smooth(8);
        let out = alpha_convergence_study(
            &base,
            &[0.025, 0.1, 0.05],
            &u0,
            AlphaMode::ToEuler,
            StudyOptions::default(),
        )
        .unwrap();
        let res = &out.result;
        assert_eq!(res.parameter, "alpha");
        let values: Vec<f64> = res.ladder.iter().map(|e| e.value).collect();
        assert_eq!(values, vec![0.1, 0.05, 0.025]);
        for e in &res.ladder {
            assert_eq!(e.error_initial, 0.0);
            assert!(e.error_l2 >= 0.0 && e.error_l2h1 >= 0.0);
        }
        assert!(res.monotone);
        let rate = res.fitted_rate.unwrap();
        assert!(rate > 0.8, "{rate}");
        assert_eq!(out.rung_series.len(), 3);
        assert_eq!(out.reference_series.len(), 6);
    }

    #[test]
    fn studies_reject_mismatched_modes() {
        let u0 = smooth(8);
        let viscous = SolverParams::new(0.01, 0.0, 1.0, 8, 2e-3, 0.01);
        assert!(matches!(
            alpha_convergence_study(
                &viscous,
                &[0.1],
                &u0,
                AlphaMode::ToEuler,
                StudyOptions::default()
            ),
            Err(StudyError::Setup(_))
        ));
        let other = SolverParams::new(0.0, 0.0, 1.0, 4, 2e-3, 0.01);
        assert!(matches!(
            alpha_convergence_study(
                &other,
                &[0.1],
                &u0,
                AlphaMode::ToEuler,
                StudyOptions::default()
            ),
            Err(StudyError::Setup(_))
        ));
    }

    #[test]
    fn zero_nu_rung_matches_reference() {
        let base = SolverParams::new(0.0, 0.1, 1.0, 8, 2e-3, 0.02);
        let out = viscosity_limit_study(
            &base,
            &[0.1, 0.0],
            &smooth(8),
            ViscosityMode::FixedAlpha,
            StudyOptions {
                workers: Some(2),
                sample_every: 5,
            },
        )
        .unwrap();
        let last = out.result.ladder.last().unwrap();
        assert_eq!(last.value, 0.0);
        assert_eq!(last.error_modified, 0.0);
        assert!(out.result.ladder[0].error_modified > 0.0);
        assert_eq!(out.result.fitted_rate, None);
    }

    #[test]
    fn study_is_reproducible() {
        let base = SolverParams::new(0.01, 0.0, 0.5, 8, 2e-3, 0.02);
        let run = || {
            alpha_convergence_study(
                &base,
                &[0.2, 0.1],
                &smooth(8),
                AlphaMode::ToNse,
                StudyOptions::default(),
            )
            .unwrap()
            .result
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn beltrami_scan_matches_closed_form() {
        let g = wavenumber_grid(8).unwrap();
        let u0 = initial_condition(
            &InitialCondition::Abc {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            &g,
        );
        let r = 0.9;
        let base = SolverParams::new(0.0, 0.0, r, 8, 1e-2, 0.1);
        let alphas = [0.4, 0.2, 0.1, 0.05];
        let rep = blowup_scan(&base, &alphas, &u0, 0.1, StudyOptions::default()).unwrap();
        for (a, m) in rep.alphas.iter().zip(&rep.monitor_sup) {
            let want = a.powf(2.0 * r) * (4.0 * PI * PI).powf(r) * 3.0;
            assert!((m - want).abs() <= 1e-8 * want, "{m} vs {want}");
        }
        assert_eq!(rep.verdict, BlowupVerdict::ConsistentWithRegularity);
    }

    #[test]
    fn zero_data_scan_is_all_zero() {
        let g = wavenumber_grid(4).unwrap();
        let base = SolverParams::new(0.0, 0.0, 1.0, 4, 1e-2, 0.05);
        let rep = blowup_scan(
            &base,
            &[0.4, 0.3, 0.2, 0.1],
            &SpectralField::zeros(&g),
            0.05,
            StudyOptions::default(),
        )
        .unwrap();
        assert!(rep.monitor_sup.iter().all(|&m| m == 0.0));
        assert!(matches!(
            blowup_scan(
                &base,
                &[0.1, 0.2],
                &SpectralField::zeros(&g),
                0.05,
                StudyOptions::default()
            ),
            Err(StudyError::LadderTooShort(2))
        ));
    }
}
