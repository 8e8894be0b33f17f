//! Fixed-step RK4 integration of
//! `(I + alpha^{2r} A^r) du/dt + B(u, u) + nu A u = f`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{energy_report, DissipationAccumulator, EnergyReport, TimeSeries};
use crate::nonlinear::{BilinearOperator, DealiasScheme, NonlinearError};
use crate::spectral::{
    leray_project_in_place, sobolev_norm_sq, voigt_factor, wavenumber_grid, GridError,
    SpectralField, WaveGrid,
};
use crate::transform::{RustFftPlan, SpectralTransform};
use crate::Complex64;

/// Upper end of the admissible window for `r`.
pub const R_MAX: f64 = 1.5;
/// Inviscid well-posedness needs `r` strictly above this.
pub const R_INVISCID_MIN: f64 = 5.0 / 6.0;
/// Viscous well-posedness needs `r` at or above this.
pub const R_VISCOUS_MIN: f64 = 0.5;

/// A run is declared unstable once the kinetic energy exceeds the initial
/// modified energy by this factor (unforced runs only).
const GROWTH_LIMIT: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver parameters: {}", join_issues(.0))]
    InvalidParams(Vec<ParamIssue>),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nonlinear(#[from] NonlinearError),
    #[error("initial field has N={found}, solver expects N={expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error("numerical instability at t={t} (step {step}): {reason}")]
    Diverged { t: f64, step: u64, reason: String },
}

fn join_issues(issues: &[ParamIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A rejected parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamIssue {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Which analytic guarantees cover a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `nu > 0, alpha > 0, r >= 1/2`.
    FnsvProtected,
    /// `nu = 0, alpha > 0, r > 5/6`.
    FevProtected,
    /// `alpha > 0` with `r` outside the proved window.
    Experimental,
    /// `alpha = 0`: plain Navier-Stokes or Euler.
    Unprotected,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::FnsvProtected => "fNSV (nu > 0, r >= 1/2): globally well-posed",
            Regime::FevProtected => "fEV (nu = 0, r > 5/6): globally well-posed",
            Regime::Experimental => "experimental: r outside the well-posedness window",
            Regime::Unprotected => "unprotected: alpha = 0, no Voigt regularization",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolverParams {
    pub nu: f64,
    pub alpha: f64,
    pub r: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: DealiasScheme,
    /// Static spectral forcing; absent by default.
    pub forcing: Option<SpectralField>,
}

impl SolverParams {
    /// Two-thirds dealiasing, no forcing.
    pub fn new(nu: f64, alpha: f64, r: f64, n: usize, dt: f64, t_end: f64) -> Self {
        Self {
            nu,
            alpha,
            r,
            n,
            dt,
            t_end,
            dealias: DealiasScheme::TwoThirds,
            forcing: None,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Self { nu, ..self.clone() }
    }

    pub fn with_t_end(&self, t_end: f64) -> Self {
        Self {
            t_end,
            ..self.clone()
        }
    }

    /// Collects every invalid field. On success returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>, Vec<ParamIssue>> {
        let mut issues = Vec::new();
        let mut bad =
            |field: &'static str, message: String| issues.push(ParamIssue { field, message });
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            bad("nu", format!("must be finite and >= 0, got {}", self.nu));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            bad(
                "alpha",
                format!("must be finite and >= 0, got {}", self.alpha),
            );
        }
        if !(self.r > 0.0 && self.r <= R_MAX) {
            bad(
                "r",
                format!("must lie in the admissible window (0, 3/2], got {}", self.r),
            );
        }
        if self.n < 4 || !self.n.is_multiple_of(2) {
            bad("N", format!("must be an even integer >= 4, got {}", self.n));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            bad("dt", format!("must be finite and > 0, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            bad(
                "t_end",
                format!("must be finite and >= 0, got {}", self.t_end),
            );
        }
        if let Some(f) = &self.forcing {
            if f.grid().n() != self.n {
                bad(
                    "forcing",
                    format!("defined on N={}, expected N={}", f.grid().n(), self.n),
                );
            }
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        Ok(self.warnings())
    }

    fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha == 0.0 {
            out.push(
                "alpha = 0: un-regularized limit, not covered by the Voigt well-posedness theory"
                    .to_string(),
            );
        } else if self.nu == 0.0 && self.r <= R_INVISCID_MIN {
            out.push(format!(
                "r = {} is outside the inviscid well-posedness window r > 5/6; results are experimental",
                self.r
            ));
        } else if self.nu > 0.0 && self.r < R_VISCOUS_MIN {
            out.push(format!(
                "r = {} is outside the viscous well-posedness window r >= 1/2; results are experimental",
                self.r
            ));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            out.push(format!(
                "t_end = {} is not a multiple of dt = {}; the run stops at {}",
                self.t_end,
                self.dt,
                self.total_steps() as f64 * self.dt
            ));
        }
        out
    }

    pub fn regime(&self) -> Regime {
        if self.alpha == 0.0 {
            Regime::Unprotected
        } else if self.nu == 0.0 {
            if self.r > R_INVISCID_MIN {
                Regime::FevProtected
            } else {
                Regime::Experimental
            }
        } else if self.r >= R_VISCOUS_MIN {
            Regime::FnsvProtected
        } else {
            Regime::Experimental
        }
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Solution snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: SpectralField,
    pub step_index: u64,
}

impl SimState {
    pub fn new(u: SpectralField) -> Self {
        Self {
            t: 0.0,
            u,
            step_index: 0,
        }
    }
}

/// Initial data families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Arnold-Beltrami-Childress flow, `curl u = 2 pi u`.
    Abc { a: f64, b: f64, c: f64 },
    /// `(sin X cos Y cos Z, -cos X sin Y cos Z, 0)` with `X = 2 pi x`.
    TaylorGreen,
    /// Random phases with `|u_k| ~ (1 + lambda_k)^{-(decay_s + 1)/2}`,
    /// normalized to unit `L^2` norm.
    RandomSmooth { seed: u64, decay_s: f64 },
}

pub fn initial_condition(kind: &InitialCondition, grid: &Arc<WaveGrid>) -> SpectralField {
    let mut u = SpectralField::zeros(grid);
    let z = Complex64::new(0.0, 0.0);
    let re = |x: f64| Complex64::new(x, 0.0);
    // sin(2 pi q) has coefficient -i/2 at +1
    let sin = |x: f64| Complex64::new(0.0, -0.5 * x);
    match *kind {
        InitialCondition::Abc { a, b, c } => {
            u.set_pair([0, 0, 1], [sin(a), re(0.5 * a), z]);
            u.set_pair([0, 1, 0], [re(0.5 * c), z, sin(c)]);
            u.set_pair([1, 0, 0], [z, sin(b), re(0.5 * b)]);
        }
        InitialCondition::TaylorGreen => {
            let n = grid.n();
            let plan = RustFftPlan::new(n);
            let h = 1.0 / n as f64;
            let mut ux = Vec::with_capacity(grid.len());
            let mut uy = Vec::with_capacity(grid.len());
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        let (x, y, zc) = (
                            2.0 * PI * ix as f64 * h,
                            2.0 * PI * iy as f64 * h,
                            2.0 * PI * iz as f64 * h,
                        );
                        ux.push(re(x.sin() * y.cos() * zc.cos()));
                        uy.push(re(-x.cos() * y.sin() * zc.cos()));
                    }
                }
            }
            plan.forward(&mut ux);
            plan.forward(&mut uy);
            u = SpectralField::from_components(grid, [ux, uy, vec![z; grid.len()]]);
            u.symmetrize();
        }
        InitialCondition::RandomSmooth { seed, decay_s } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for idx in 1..grid.len() {
                let Some(neg) = grid.negated(idx) else {
                    continue;
                };
                if neg < idx {
                    continue;
                }
                let mut v = [z; 3];
                for c in v.iter_mut() {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    *c = Complex64::new(a, b);
                }
                let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                let amp = (1.0 + grid.lambda(idx)).powf(-(decay_s + 1.0) / 2.0);
                let k = grid.wavevector(idx);
                u.set_pair(k, v.map(|c| c * (amp / norm)));
            }
        }
    }
    leray_project_in_place(&mut u);
    if let InitialCondition::RandomSmooth { .. } = kind {
        let norm = u.l2_norm();
        if norm > 0.0 {
            u.scale(1.0 / norm);
        }
    }
    u
}

/// Planned right-hand side and stepper for one parameter set.
#[derive(Clone)]
pub struct VoigtSolver {
    params: SolverParams,
    grid: Arc<WaveGrid>,
    plan: Arc<dyn SpectralTransform>,
    bilinear: BilinearOperator,
    inverse_voigt: Option<Vec<f64>>,
    viscous: Option<Vec<f64>>,
}

impl fmt::Debug for VoigtSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VoigtSolver")
            .field("params", &self.params)
            .finish()
    }
}

impl VoigtSolver {
    pub fn new(params: SolverParams) -> Result<Self, SolverError> {
        params.validate().map_err(SolverError::InvalidParams)?;
        let grid = wavenumber_grid(params.n)?;
        let plan: Arc<dyn SpectralTransform> = Arc::new(RustFftPlan::new(params.n));
        let bilinear = BilinearOperator::with_transform(&grid, params.dealias, Arc::clone(&plan));
        // alpha = 0 skips the multiplier entirely, so that path is the plain NSE/Euler one
        let inverse_voigt = (params.alpha != 0.0).then(|| {
            grid.lambdas()
                .iter()
                .map(|&l| 1.0 / voigt_factor(params.alpha, params.r, l))
                .collect()
        });
        let viscous =
            (params.nu != 0.0).then(|| grid.lambdas().iter().map(|&l| params.nu * l).collect());
        Ok(Self {
            params,
            grid,
            plan,
            bilinear,
            inverse_voigt,
            viscous,
        })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    pub fn bilinear(&self) -> &BilinearOperator {
        &self.bilinear
    }

    fn check(&self, u: &SpectralField) -> Result<(), SolverError> {
        if u.grid().n() != self.params.n {
            return Err(SolverError::GridMismatch {
                expected: self.params.n,
                found: u.grid().n(),
            });
        }
        Ok(())
    }

    /// `(I + alpha^{2r} A^r)^{-1} (f - B(u, u) - nu A u)`.
    pub fn tendency(&self, u: &SpectralField) -> Result<SpectralField, SolverError> {
        self.check(u)?;
        let mut out = self.bilinear.apply(u, u)?;
        out.scale(-1.0);
        for c in 0..3 {
            let dst = out.component_mut(c);
            if let Some(visc) = &self.viscous {
                for ((d, s), &v) in dst.iter_mut().zip(u.component(c)).zip(visc) {
                    *d -= s * v;
                }
            }
            if let Some(f) = &self.params.forcing {
                for (d, s) in dst.iter_mut().zip(f.component(c)) {
                    *d += s;
                }
            }
            if let Some(inv) = &self.inverse_voigt {
                for (d, &m) in dst.iter_mut().zip(inv) {
                    *d *= m;
                }
            }
        }
        Ok(out)
    }

    /// One classical RK4 step.
    pub fn step(&self, state: &SimState) -> Result<SimState, SolverError> {
        self.check(&state.u)?;
        let dt = self.params.dt;
        let u = &state.u;
        let k1 = self.tendency(u)?;
        let mut stage = u.clone();
        stage.axpy(0.5 * dt, &k1);
        let k2 = self.tendency(&stage)?;
        stage = u.clone();
        stage.axpy(0.5 * dt, &k2);
        let k3 = self.tendency(&stage)?;
        stage = u.clone();
        stage.axpy(dt, &k3);
        let k4 = self.tendency(&stage)?;

        let mut next = u.clone();
        next.axpy(dt / 6.0, &k1);
        next.axpy(dt / 3.0, &k2);
        next.axpy(dt / 3.0, &k3);
        next.axpy(dt / 6.0, &k4);

        let step = state.step_index + 1;
        let t = step as f64 * dt;
        if !next.is_finite() {
            return Err(SolverError::Diverged {
                t,
                step,
                reason: "non-finite Fourier coefficients".into(),
            });
        }
        debug_assert!(next.hermitian_defect() == 0.0);
        Ok(SimState {
            t,
            u: next,
            step_index: step,
        })
    }

    /// `max_x |u(x)|` sampled on the collocation grid.
    pub fn max_speed(&self, u: &SpectralField) -> f64 {
        let mut speed2 = vec![0.0; self.grid.len()];
        for c in 0..3 {
            let mut buf = u.component(c).to_vec();
            self.plan.inverse(&mut buf);
            for (s, z) in speed2.iter_mut().zip(&buf) {
                *s += z.re * z.re;
            }
        }
        speed2.into_iter().fold(0.0, f64::max).sqrt()
    }

    /// Largest step satisfying `dt <= 0.5 dx / max|u|`.
    pub fn cfl_limit(&self, u: &SpectralField) -> f64 {
        let dx = 1.0 / self.params.n as f64;
        0.5 * dx / self.max_speed(u).max(f64::MIN_POSITIVE)
    }
}

/// Tendency `du/dt` at `state`.
pub fn rhs(state: &SimState, p: &SolverParams) -> Result<SpectralField, SolverError> {
    VoigtSolver::new(p.clone())?.tendency(&state.u)
}

/// Advances `state` by one RK4 step of size `p.dt`.
pub fn step_rk4(state: &SimState, p: &SolverParams) -> Result<SimState, SolverError> {
    VoigtSolver::new(p.clone())?.step(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { t: f64, step: u64, reason: String },
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub final_state: SimState,
    pub status: RunStatus,
}

/// A run in progress: solver, current state and dissipation accumulator.
#[derive(Debug, Clone)]
pub struct Simulation {
    solver: VoigtSolver,
    state: SimState,
    dissipation: DissipationAccumulator,
    initial_modified: f64,
}

impl Simulation {
    pub fn new(params: SolverParams, u0: SpectralField) -> Result<Self, SolverError> {
        Self::resume(params, SimState::new(u0), 0.0)
    }

    /// Continues from `state`, with `dissipation_cum` already accumulated.
    pub fn resume(
        params: SolverParams,
        state: SimState,
        dissipation_cum: f64,
    ) -> Result<Self, SolverError> {
        let solver = VoigtSolver::new(params)?;
        solver.check(&state.u)?;
        let p = solver.params();
        let mut dissipation = DissipationAccumulator::starting_at(p.nu, dissipation_cum);
        let initial_modified = energy_report(&state, p, &mut dissipation).modified;
        Ok(Self {
            solver,
            state,
            dissipation,
            initial_modified,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn solver(&self) -> &VoigtSolver {
        &self.solver
    }

    pub fn params(&self) -> &SolverParams {
        self.solver.params()
    }

    pub fn is_finished(&self) -> bool {
        self.state.step_index >= self.params().total_steps()
    }

    /// Current report; also advances the accumulator to the current time.
    pub fn report(&mut self) -> EnergyReport {
        energy_report(&self.state, self.solver.params(), &mut self.dissipation)
    }

    /// One step, with the dissipation integral advanced at step resolution.
    pub fn advance(&mut self) -> Result<(), SolverError> {
        let next = self.solver.step(&self.state)?;
        let enstrophy = sobolev_norm_sq(&next.u, 1.0);
        if self.params().forcing.is_none() {
            let kinetic = next.u.energy();
            if kinetic > GROWTH_LIMIT * self.initial_modified.max(f64::MIN_POSITIVE) {
                return Err(SolverError::Diverged {
                    t: next.t,
                    step: next.step_index,
                    reason: format!(
                        "kinetic energy {kinetic:e} exceeds {GROWTH_LIMIT:e} x initial modified energy"
                    ),
                });
            }
        }
        self.dissipation.record(next.t, enstrophy);
        self.state = next;
        Ok(())
    }

    fn check_cfl(&self) {
        let limit = self.solver.cfl_limit(&self.state.u);
        if self.params().dt > limit {
            warn!(
                "dt = {} exceeds the CFL guidance {:.3e} at t = {}",
                self.params().dt,
                limit,
                self.state.t
            );
        }
    }

    /// Integrates to `t_end`, handing a report to `on_sample` at the start,
    /// every `sample_every` steps and at the final step.
    pub fn run_with(
        &mut self,
        sample_every: u64,
        mut on_sample: impl FnMut(&EnergyReport, &SimState),
    ) -> RunStatus {
        let every = sample_every.max(1);
        self.check_cfl();
        let first = self.report();
        on_sample(&first, &self.state);
        while !self.is_finished() {
            if let Err(e) = self.advance() {
                return match e {
                    SolverError::Diverged { t, step, reason } => {
                        RunStatus::Diverged { t, step, reason }
                    }
                    other => RunStatus::Diverged {
                        t: self.state.t,
                        step: self.state.step_index,
                        reason: other.to_string(),
                    },
                };
            }
            if self.state.step_index.is_multiple_of(every) || self.is_finished() {
                self.check_cfl();
                let rep = self.report();
                on_sample(&rep, &self.state);
            }
        }
        RunStatus::Completed
    }

    pub fn into_state(self) -> SimState {
        self.state
    }
}

/// Integrates `u0` to `p.t_end`, sampling every `sample_every` steps.
/// Instability ends the run early with a partial series and a diverged status.
pub fn run(
    p: &SolverParams,
    u0: SpectralField,
    sample_every: u64,
) -> Result<RunOutput, SolverError> {
    let mut sim = Simulation::new(p.clone(), u0)?;
    let mut series = TimeSeries::default();
    let status = sim.run_with(sample_every, |rep, _| series.push(*rep));
    if let RunStatus::Diverged { t, reason, .. } = &status {
        warn!("run diverged at t = {t}: {reason}");
    }
    Ok(RunOutput {
        series,
        final_state: sim.into_state(),
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{
        energy_balance_residual, is_modified_energy_monotone, modified_energy_drift,
    };
    use crate::spectral::sobolev_norm;

    fn abc(n: usize) -> SpectralField {
        let g = wavenumber_grid(n).unwrap();
        initial_condition(
            &InitialCondition::Abc {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            &g,
        )
    }

    #[test]
    fn abc_is_beltrami() {
        let u = abc(8);
        let w = u.curl();
        let mut diff = w.clone();
        diff.axpy(-2.0 * PI, &u);
        assert!(diff.l2_norm() <= 1e-12 * u.l2_norm());
        assert!((u.energy() - 3.0).abs() < 1e-14);
        assert_eq!(u.max_divergence(), 0.0);
        let nonzero = (0..u.grid().len())
            .filter(|&i| u.mode(i).iter().any(|z| z.norm() > 0.0))
            .count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let g = wavenumber_grid(8).unwrap();
        let u = initial_condition(&InitialCondition::TaylorGreen, &g);
        assert!(u.max_divergence() <= 1e-14);
        // 8 modes of amplitude 1/8 in each of two components
        assert!((u.energy() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn random_smooth_is_reproducible() {
        let g = wavenumber_grid(16).unwrap();
        let kind = InitialCondition::RandomSmooth {
            seed: 1,
            decay_s: 4.0,
        };
        let a = initial_condition(&kind, &g);
        let b = initial_condition(&kind, &g);
        assert_eq!(a, b);
        assert!(sobolev_norm(&a, 4.0).is_finite());
        assert!((a.l2_norm() - 1.0).abs() < 1e-14);
        assert!(a.satisfies_invariants(1e-12));
        let c = initial_condition(
            &InitialCondition::RandomSmooth {
                seed: 2,
                decay_s: 4.0,
            },
            &g,
        );
        assert_ne!(a, c);
    }

    #[test]
    fn beltrami_inviscid_tendency_vanishes() {
        let u = abc(8);
        for alpha in [0.0, 0.1, 1.0] {
            let p = SolverParams::new(0.0, alpha, 1.0, 8, 1e-3, 1.0);
            let t = rhs(&SimState::new(u.clone()), &p).unwrap();
            assert!(t.l2_norm() <= 1e-10 * u.energy());
        }
    }

    #[test]
    fn beltrami_viscous_tendency_is_scalar_decay() {
        let u = abc(8);
        let (nu, alpha, r): (f64, f64, f64) = (0.02, 0.3, 0.75);
        let p = SolverParams::new(nu, alpha, r, 8, 1e-3, 1.0);
        let t = rhs(&SimState::new(u.clone()), &p).unwrap();
        let lam = 4.0 * PI * PI;
        let rate = -lam * nu / (1.0 + alpha.powf(2.0 * r) * lam.powf(r));
        assert!(t.sub(&u.scaled(rate)).l2_norm() <= 1e-12 * u.l2_norm());
    }

    #[test]
    fn zero_alpha_matches_plain_path() {
        let g = wavenumber_grid(8).unwrap();
        let u = initial_condition(
            &InitialCondition::RandomSmooth {
                seed: 4,
                decay_s: 2.0,
            },
            &g,
        );
        let a = rhs(
            &SimState::new(u.clone()),
            &SolverParams::new(0.01, 0.0, 0.6, 8, 1e-3, 1.0),
        )
        .unwrap();
        let b = rhs(
            &SimState::new(u.clone()),
            &SolverParams::new(0.01, 0.0, 1.4, 8, 1e-3, 1.0),
        )
        .unwrap();
        assert_eq!(a, b);
        // hand-built NSE tendency: -B(u,u) - nu A u
        let op = BilinearOperator::new(&g, DealiasScheme::TwoThirds);
        let mut nse = op.apply(&u, &u).unwrap().scaled(-1.0);
        let au =
            crate::spectral::apply_multiplier(&u, crate::spectral::Multiplier::StokesPower(1.0))
                .unwrap();
        nse.axpy(-0.01, &au);
        assert!(a.sub(&nse).l2_norm() <= 1e-14 * nse.l2_norm());
    }

    #[test]
    fn zero_field_is_fixed() {
        let g = wavenumber_grid(8).unwrap();
        let p = SolverParams::new(0.01, 0.1, 1.0, 8, 1e-2, 0.1);
        let s = step_rk4(&SimState::new(SpectralField::zeros(&g)), &p).unwrap();
        assert_eq!(s.u.l2_norm(), 0.0);
        assert_eq!(s.step_index, 1);
        assert_eq!(s.t, 1e-2);
    }

    #[test]
    fn beltrami_decay_is_fourth_order() {
        let (nu, alpha, r, t_end): (f64, f64, f64, f64) = (0.5, 0.1, 1.0, 0.1);
        let lam = 4.0 * PI * PI;
        let rate = lam * nu / (1.0 + alpha.powf(2.0 * r) * lam.powf(r));
        let u0 = abc(8);
        let exact = u0.scaled((-rate * t_end).exp());
        let err = |dt: f64| {
            let p = SolverParams::new(nu, alpha, r, 8, dt, t_end);
            let out = run(&p, u0.clone(), 1000).unwrap();
            out.final_state.u.max_abs_diff(&exact)
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        let ratio = e1 / e2;
        assert!(
            (12.0..20.0).contains(&ratio),
            "ratio {ratio} ({e1:e}, {e2:e})"
        );
    }

    #[test]
    fn fev_conserves_and_fnsv_dissipates() {
        let g = wavenumber_grid(8).unwrap();
        let u0 = initial_condition(
            &InitialCondition::RandomSmooth {
                seed: 3,
                decay_s: 2.0,
            },
            &g,
        );
        let p = SolverParams::new(0.0, 0.2, 1.0, 8, 2e-3, 0.2);
        let out = run(&p, u0.clone(), 10).unwrap();
        assert_eq!(out.status, RunStatus::Completed);
        assert!(modified_energy_drift(&out.series).unwrap() < 1e-8);

        let p = SolverParams::new(0.05, 0.2, 1.0, 8, 2e-3, 0.2);
        let out = run(&p, u0, 1).unwrap();
        assert!(is_modified_energy_monotone(&out.series));
        assert!(energy_balance_residual(&out.series).unwrap() < 1e-6);
    }

    #[test]
    fn oversized_step_is_reported_as_instability() {
        let g = wavenumber_grid(8).unwrap();
        let u0 = initial_condition(
            &InitialCondition::RandomSmooth {
                seed: 1,
                decay_s: 1.0,
            },
            &g,
        );
        let p = SolverParams::new(1.0, 0.0, 1.0, 8, 0.5, 50.0);
        let out = run(&p, u0, 1).unwrap();
        assert!(
            matches!(out.status, RunStatus::Diverged { .. }),
            "{:?}",
            out.status
        );
        assert!(out.series.iter().all(|r| r.kinetic.is_finite()));
    }

    #[test]
    fn validation_and_regimes() {
        let p = SolverParams::new(0.0, 0.1, 0.0, 8, 1e-3, 1.0);
        let issues = p.validate().unwrap_err();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].field, "r");
        assert!(issues[0].message.contains("(0, 3/2]"));

        let mut bad = SolverParams::new(-1.0, -0.1, 2.0, 7, 0.0, -1.0);
        bad.dealias = DealiasScheme::None;
        assert_eq!(bad.validate().unwrap_err().len(), 6);

        assert_eq!(
            SolverParams::new(0.0, 0.1, 0.9, 8, 1e-3, 1.0).regime(),
            Regime::FevProtected
        );
        assert_eq!(
            SolverParams::new(0.0, 0.1, 5.0 / 6.0, 8, 1e-3, 1.0).regime(),
            Regime::Experimental
        );
        assert_eq!(
            SolverParams::new(0.1, 0.1, 0.5, 8, 1e-3, 1.0).regime(),
            Regime::FnsvProtected
        );
        assert_eq!(
            SolverParams::new(0.1, 0.1, 0.49, 8, 1e-3, 1.0).regime(),
            Regime::Experimental
        );
        assert_eq!(
            SolverParams::new(0.1, 0.0, 0.49, 8, 1e-3, 1.0).regime(),
            Regime::Unprotected
        );

        let w = SolverParams::new(0.0, 0.1, 0.7, 8, 1e-3, 1.0)
            .validate()
            .unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("5/6"));
        assert!(SolverParams::new(0.0, 0.1, 0.9, 8, 1e-3, 1.0)
            .validate()
            .unwrap()
            .is_empty());
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let u = abc(8);
        let p = SolverParams::new(0.0, 0.1, 1.0, 16, 1e-3, 1.0);
        assert_eq!(
            rhs(&SimState::new(u), &p).unwrap_err(),
            SolverError::GridMismatch {
                expected: 16,
                found: 8
            }
        );
    }
}
