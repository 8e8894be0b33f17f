//! Energy functionals, the energy-balance residual and the blow-up monitor.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{SimState, SolverParams};
use crate::spectral::sobolev_norm_sq;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("energy balance requested on an empty time series")]
    EmptySeries,
}

/// Energy functionals sampled at one instant.
///
/// `modified = kinetic + voigt` where `voigt = alpha^{2r} |A^{r/2} u|^2`;
/// `blowup_monitor` carries the same quantity as `voigt` and is kept as a
/// separate column for scans. `dissipation_cum` is the trapezoidal estimate
/// of `2 nu int_0^t |A^{1/2} u|^2 ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub voigt: f64,
    pub modified: f64,
    pub dissipation_cum: f64,
    pub blowup_monitor: f64,
    pub enstrophy: f64,
    pub max_div: f64,
}

/// Ordered sequence of reports from one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries(pub Vec<EnergyReport>);

impl Deref for TimeSeries {
    type Target = Vec<EnergyReport>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for TimeSeries {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl From<Vec<EnergyReport>> for TimeSeries {
    fn from(v: Vec<EnergyReport>) -> Self {
        Self(v)
    }
}

/// Running trapezoidal integral of the dissipation rate `2 nu |A^{1/2} u|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationAccumulator {
    nu: f64,
    last: Option<(f64, f64)>,
    total: f64,
}

impl DissipationAccumulator {
    pub fn new(nu: f64) -> Self {
        Self::starting_at(nu, 0.0)
    }

    /// Continues from an already accumulated total (used on resume).
    pub fn starting_at(nu: f64, total: f64) -> Self {
        Self {
            nu,
            last: None,
            total,
        }
    }

    /// Adds the trapezoid from the previous sample to `(t, enstrophy)`.
    /// Repeated calls at the same `t` do not add anything.
    pub fn record(&mut self, t: f64, enstrophy: f64) {
        let rate = 2.0 * self.nu * enstrophy;
        if let Some((t0, r0)) = self.last {
            if t > t0 {
                self.total += 0.5 * (t - t0) * (r0 + rate);
            }
        }
        self.last = Some((t, rate));
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// `alpha^{2r}`, exactly zero when `alpha = 0`.
pub fn voigt_weight(alpha: f64, r: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        alpha.powf(2.0 * r)
    }
}

/// Evaluates every functional of `state` and advances the accumulator to `state.t`.
pub fn energy_report(
    state: &SimState,
    p: &SolverParams,
    dissipation: &mut DissipationAccumulator,
) -> EnergyReport {
    let u = &state.u;
    let kinetic = sobolev_norm_sq(u, 0.0);
    let voigt = voigt_weight(p.alpha, p.r) * sobolev_norm_sq(u, p.r);
    let enstrophy = sobolev_norm_sq(u, 1.0);
    dissipation.record(state.t, enstrophy);
    EnergyReport {
        t: state.t,
        kinetic,
        voigt,
        modified: kinetic + voigt,
        dissipation_cum: dissipation.total(),
        blowup_monitor: voigt,
        enstrophy,
        max_div: u.max_divergence(),
    }
}

/// `max_t |modified(t) + dissipation_cum(t) - modified(0)| / modified(0)`.
/// Zero data gives zero.
pub fn energy_balance_residual(series: &TimeSeries) -> Result<f64, DiagnosticsError> {
    let first = series.first().ok_or(DiagnosticsError::EmptySeries)?;
    let e0 = first.modified;
    let worst = series
        .iter()
        .map(|r| (r.modified + r.dissipation_cum - e0).abs())
        .fold(0.0, f64::max);
    if e0 == 0.0 {
        return Ok(worst);
    }
    Ok(worst / e0)
}

/// `max_t |modified(t) - modified(0)| / modified(0)`.
pub fn modified_energy_drift(series: &TimeSeries) -> Result<f64, DiagnosticsError> {
    let first = series.first().ok_or(DiagnosticsError::EmptySeries)?;
    let e0 = first.modified;
    let worst = series
        .iter()
        .map(|r| (r.modified - e0).abs())
        .fold(0.0, f64::max);
    Ok(if e0 == 0.0 { worst } else { worst / e0 })
}

/// True when `modified` never increases from one sample to the next.
pub fn is_modified_energy_monotone(series: &TimeSeries) -> bool {
    series.windows(2).all(|w| w[1].modified <= w[0].modified)
}

/// Checks the per-sample invariants: finite, non-negative entries, the
/// modified-energy split, a monitor bounded by the initial modified energy
/// (up to `rel_tol`), and non-decreasing cumulative dissipation.
pub fn check_series_invariants(series: &TimeSeries, rel_tol: f64) -> Result<(), String> {
    let Some(first) = series.first() else {
        return Ok(());
    };
    let e0 = first.modified;
    let mut prev_diss = 0.0;
    for r in series.iter() {
        let fields = [
            r.t,
            r.kinetic,
            r.voigt,
            r.modified,
            r.dissipation_cum,
            r.blowup_monitor,
            r.enstrophy,
            r.max_div,
        ];
        if fields.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(format!("non-finite or negative entry at t={}", r.t));
        }
        if r.modified != r.kinetic + r.voigt {
            return Err(format!("modified != kinetic + voigt at t={}", r.t));
        }
        if r.blowup_monitor > e0 * (1.0 + rel_tol) {
            return Err(format!(
                "monitor {} exceeds initial modified energy {} at t={}",
                r.blowup_monitor, e0, r.t
            ));
        }
        if r.dissipation_cum < prev_diss {
            return Err(format!("dissipation decreased at t={}", r.t));
        }
        prev_diss = r.dissipation_cum;
    }
    Ok(())
}
