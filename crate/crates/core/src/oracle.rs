//! Brute-force reference implementations used to cross-check the
//! pseudo-spectral path.
//!
//! The reference implementations never call into the transform, nonlinear,
//! spectral or solver code; only the lattice bookkeeping of [`WaveGrid`] and
//! the plain data containers are shared. The comparison functions
//! ([`bilinear_equivalence`], [`trajectory_gap`], [`equivalence_suite`])
//! drive both sides.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::{EnergyReport, TimeSeries};
use crate::nonlinear::DealiasScheme;
use crate::solver::SolverParams;
use crate::spectral::{SpectralField, WaveGrid, Wavevector};

/// Largest grid the oracle accepts; the convolution is `O(N^6)`.
pub const MAX_ORACLE_N: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle limited to N <= {MAX_ORACLE_N}, got N={0}")]
    TooLarge(usize),
    #[error("grid mismatch: expected N={expected}, found N={found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("dense Galerkin run became non-finite at t={t} (step {step})")]
    Diverged { t: f64, step: u64 },
}

type Mode = [Complex64; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn lambda_of(k: Wavevector) -> f64 {
    4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

fn project_mode(k: Wavevector, u: Mode) -> Mode {
    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    if k2 == 0.0 {
        return [ZERO; 3];
    }
    let kf = k.map(|c| c as f64);
    let dot = u[0] * kf[0] + u[1] * kf[1] + u[2] * kf[2];
    let mut out = u;
    for c in 0..3 {
        out[c] -= dot * kf[c] / k2;
    }
    out
}

fn read_mode(f: &SpectralField, idx: usize) -> Mode {
    [
        f.component(0)[idx],
        f.component(1)[idx],
        f.component(2)[idx],
    ]
}

/// Largest retained `|k_i|` for a scheme, counted directly: under the
/// two-thirds rule the largest `c` with `3c < N`.
pub fn retained_cutoff(n: usize, scheme: DealiasScheme) -> i64 {
    let n = n as i64;
    match scheme {
        DealiasScheme::TwoThirds => {
            let mut c = 0;
            while 3 * (c + 1) < n {
                c += 1;
            }
            c
        }
        DealiasScheme::None => n / 2 - 1,
    }
}

fn within(k: Wavevector, cutoff: i64) -> bool {
    k.iter().all(|c| c.abs() <= cutoff)
}

/// Nonzero wavevectors with every `|k_i| <= cutoff`, in lexicographic order.
pub fn cube_modes(cutoff: i64) -> Vec<Wavevector> {
    let mut out = Vec::new();
    for kx in -cutoff..=cutoff {
        for ky in -cutoff..=cutoff {
            for kz in -cutoff..=cutoff {
                if (kx, ky, kz) != (0, 0, 0) {
                    out.push([kx, ky, kz]);
                }
            }
        }
    }
    out
}

fn guard(grid: &WaveGrid) -> Result<(), OracleError> {
    if grid.n() > MAX_ORACLE_N {
        return Err(OracleError::TooLarge(grid.n()));
    }
    Ok(())
}

/// `P sum_{p+q=k} i 2 pi (u_p . q) v_q` over every lattice pair, with no
/// wrap-around. Output modes outside the lattice or on the Nyquist rows
/// are dropped.
pub fn convolution_bilinear(
    u: &SpectralField,
    v: &SpectralField,
) -> Result<SpectralField, OracleError> {
    let grid = u.grid();
    guard(grid)?;
    if v.grid().n() != grid.n() {
        return Err(OracleError::GridMismatch {
            expected: grid.n(),
            found: v.grid().n(),
        });
    }
    let support = |f: &SpectralField| -> Vec<(Wavevector, Mode)> {
        (0..grid.len())
            .filter_map(|idx| {
                let m = read_mode(f, idx);
                (m.iter().any(|z| *z != ZERO)).then(|| (grid.wavevector(idx), m))
            })
            .collect()
    };
    let us = support(u);
    let vs = support(v);
    let mut acc: HashMap<Wavevector, Mode> = HashMap::new();
    for &(p, up) in &us {
        for &(q, vq) in &vs {
            let k = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
            let Some(idx) = grid.index_of(k) else {
                continue;
            };
            if grid.is_nyquist(idx) {
                continue;
            }
            let coef = (up[0] * q[0] as f64 + up[1] * q[1] as f64 + up[2] * q[2] as f64)
                * Complex64::new(0.0, 2.0 * PI);
            let slot = acc.entry(k).or_insert([ZERO; 3]);
            for c in 0..3 {
                slot[c] += coef * vq[c];
            }
        }
    }
    let mut coeffs: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; grid.len()]);
    for (k, m) in acc {
        let idx = grid.index_of(k).expect("accumulated on lattice");
        let m = project_mode(k, m);
        for c in 0..3 {
            coeffs[c][idx] = m[c];
        }
    }
    Ok(SpectralField::from_components(grid, coeffs))
}

/// Copy of `f` keeping only modes with every `|k_i| <= cutoff` (and not the mean).
pub fn restrict_to_cube(f: &SpectralField, cutoff: i64) -> SpectralField {
    let grid = f.grid();
    let coeffs = std::array::from_fn(|c| {
        f.component(c)
            .iter()
            .enumerate()
            .map(|(idx, &z)| {
                let k = grid.wavevector(idx);
                if idx != 0 && within(k, cutoff) {
                    z
                } else {
                    ZERO
                }
            })
            .collect()
    });
    SpectralField::from_components(grid, coeffs)
}

/// Sum of `Re(f_k conj(g_k))` over the lattice.
pub fn plain_inner(f: &SpectralField, g: &SpectralField) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        for (a, b) in f.component(c).iter().zip(g.component(c)) {
            s += (a * b.conj()).re;
        }
    }
    s
}

/// `sum_k |f_k - g_k|^2`, square-rooted.
pub fn plain_distance(f: &SpectralField, g: &SpectralField) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        for (a, b) in f.component(c).iter().zip(g.component(c)) {
            s += (a - b).norm_sqr();
        }
    }
    s.sqrt()
}

/// Random real, mean-free, divergence-free field supported on `|k_i| <= cutoff`
/// with unit-scale Gaussian coefficients.
pub fn random_solenoidal(grid: &Arc<WaveGrid>, cutoff: i64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; grid.len()]);
    for k in cube_modes(cutoff) {
        let neg = [-k[0], -k[1], -k[2]];
        // fill one representative of each +-k pair
        if neg > k {
            continue;
        }
        let mut m = [ZERO; 3];
        for z in m.iter_mut() {
            *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let m = project_mode(k, m);
        let (Some(i), Some(j)) = (grid.index_of(k), grid.index_of(neg)) else {
            continue;
        };
        for c in 0..3 {
            coeffs[c][i] = m[c];
            coeffs[c][j] = m[c].conj();
        }
    }
    SpectralField::from_components(grid, coeffs)
}

/// Galerkin ODE system on an explicit list of modes, integrated with its
/// own RK4 and its own multipliers.
#[derive(Debug, Clone)]
pub struct DenseGalerkinSystem {
    params: SolverParams,
    grid: Arc<WaveGrid>,
    modes: Vec<Wavevector>,
    state: Vec<Mode>,
    /// `(k, p, q)` positions with `p + q = k`, all inside the mode list.
    triads: Vec<(usize, usize, usize)>,
    lambda: Vec<f64>,
    inverse_voigt: Vec<f64>,
    t: f64,
    step: u64,
    dissipation: f64,
}

impl DenseGalerkinSystem {
    /// Projects `u0` onto the dealiased cube of `params.dealias` at `params.n`.
    pub fn new(params: SolverParams, u0: &SpectralField) -> Result<Self, OracleError> {
        let grid = Arc::clone(u0.grid());
        guard(&grid)?;
        if grid.n() != params.n {
            return Err(OracleError::GridMismatch {
                expected: params.n,
                found: grid.n(),
            });
        }
        let modes = cube_modes(retained_cutoff(params.n, params.dealias));
        let position: HashMap<Wavevector, usize> =
            modes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut triads = Vec::new();
        for (ki, k) in modes.iter().enumerate() {
            for (pi, p) in modes.iter().enumerate() {
                let q = [k[0] - p[0], k[1] - p[1], k[2] - p[2]];
                if let Some(&qi) = position.get(&q) {
                    triads.push((ki, pi, qi));
                }
            }
        }
        let lambda: Vec<f64> = modes.iter().map(|&k| lambda_of(k)).collect();
        let weight = if params.alpha == 0.0 {
            0.0
        } else {
            params.alpha.powf(2.0 * params.r)
        };
        let inverse_voigt = lambda
            .iter()
            .map(|&l| 1.0 / (1.0 + weight * l.powf(params.r)))
            .collect();
        let state = modes
            .iter()
            .map(|&k| grid.index_of(k).map_or([ZERO; 3], |idx| read_mode(u0, idx)))
            .collect();
        Ok(Self {
            params,
            grid,
            modes,
            state,
            triads,
            lambda,
            inverse_voigt,
            t: 0.0,
            step: 0,
            dissipation: 0.0,
        })
    }

    pub fn modes(&self) -> &[Wavevector] {
        &self.modes
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn amplitudes(&self) -> &[[Complex64; 3]] {
        &self.state
    }

    /// Writes the state back onto the lattice.
    pub fn to_field(&self) -> SpectralField {
        let mut coeffs: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; self.grid.len()]);
        for (k, m) in self.modes.iter().zip(&self.state) {
            if let Some(idx) = self.grid.index_of(*k) {
                for c in 0..3 {
                    coeffs[c][idx] = m[c];
                }
            }
        }
        SpectralField::from_components(&self.grid, coeffs)
    }

    fn tendency(&self, u: &[Mode]) -> Vec<Mode> {
        let mut adv = vec![[ZERO; 3]; u.len()];
        let i2pi = Complex64::new(0.0, 2.0 * PI);
        for &(ki, pi, qi) in &self.triads {
            let q = self.modes[qi];
            let up = u[pi];
            let coef = (up[0] * q[0] as f64 + up[1] * q[1] as f64 + up[2] * q[2] as f64) * i2pi;
            let uq = u[qi];
            for c in 0..3 {
                adv[ki][c] += coef * uq[c];
            }
        }
        let forcing = self.params.forcing.as_ref();
        adv.iter()
            .enumerate()
            .map(|(i, a)| {
                let k = self.modes[i];
                let b = project_mode(k, *a);
                let f = forcing
                    .and_then(|f| self.grid.index_of(k).map(|idx| read_mode(f, idx)))
                    .unwrap_or([ZERO; 3]);
                let mut out = [ZERO; 3];
                for c in 0..3 {
                    out[c] = (f[c] - b[c] - u[i][c] * (self.params.nu * self.lambda[i]))
                        * self.inverse_voigt[i];
                }
                out
            })
            .collect()
    }

    fn combine(base: &[Mode], h: f64, k: &[Mode]) -> Vec<Mode> {
        base.iter()
            .zip(k)
            .map(|(b, d)| std::array::from_fn(|c| b[c] + d[c] * h))
            .collect()
    }

    fn enstrophy(&self) -> f64 {
        self.state
            .iter()
            .zip(&self.lambda)
            .map(|(m, l)| l * m.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// One RK4 step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<(), OracleError> {
        let u = &self.state;
        let k1 = self.tendency(u);
        let k2 = self.tendency(&Self::combine(u, 0.5 * dt, &k1));
        let k3 = self.tendency(&Self::combine(u, 0.5 * dt, &k2));
        let k4 = self.tendency(&Self::combine(u, dt, &k3));
        let rate_before = 2.0 * self.params.nu * self.enstrophy();
        let next: Vec<Mode> = (0..u.len())
            .map(|i| {
                std::array::from_fn(|c| {
                    u[i][c] + (k1[i][c] + k2[i][c] * 2.0 + k3[i][c] * 2.0 + k4[i][c]) * (dt / 6.0)
                })
            })
            .collect();
        self.step += 1;
        self.t = self.step as f64 * dt;
        if next
            .iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(OracleError::Diverged {
                t: self.t,
                step: self.step,
            });
        }
        self.state = next;
        let rate_after = 2.0 * self.params.nu * self.enstrophy();
        self.dissipation += 0.5 * dt * (rate_before + rate_after);
        Ok(())
    }

    /// Functionals of the current state computed from the mode list.
    pub fn report(&self) -> EnergyReport {
        let r = self.params.r;
        let weight = if self.params.alpha == 0.0 {
            0.0
        } else {
            self.params.alpha.powf(2.0 * r)
        };
        let mut kinetic = 0.0;
        let mut voigt = 0.0;
        let mut max_div: f64 = 0.0;
        for ((k, m), l) in self.modes.iter().zip(&self.state).zip(&self.lambda) {
            let e: f64 = m.iter().map(|z| z.norm_sqr()).sum();
            kinetic += e;
            voigt += l.powf(r) * e;
            let div = m[0] * k[0] as f64 + m[1] * k[1] as f64 + m[2] * k[2] as f64;
            max_div = max_div.max(div.norm());
        }
        voigt *= weight;
        EnergyReport {
            t: self.t,
            kinetic,
            voigt,
            modified: kinetic + voigt,
            dissipation_cum: self.dissipation,
            blowup_monitor: voigt,
            enstrophy: self.enstrophy(),
            max_div,
        }
    }
}

/// Trajectory of a dense run, sampled at every step.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    pub series: TimeSeries,
    pub states: Vec<SpectralField>,
}

/// Integrates `sys` to `t_end` with fixed step `dt`, recording every step.
pub fn dense_galerkin_run(
    sys: &mut DenseGalerkinSystem,
    dt: f64,
    t_end: f64,
) -> Result<DenseTrajectory, OracleError> {
    let steps = (t_end / dt).round() as u64;
    let mut series = vec![sys.report()];
    let mut states = vec![sys.to_field()];
    for _ in 0..steps {
        sys.step(dt)?;
        series.push(sys.report());
        states.push(sys.to_field());
    }
    Ok(DenseTrajectory {
        series: series.into(),
        states,
    })
}

/// One line of the equivalence suite.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub n: usize,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn new(name: impl Into<String>, n: usize, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            n,
            measured,
            tolerance,
            pass: measured.is_finite() && measured <= tolerance,
        }
    }
}

/// Worst relative gap between the pseudo-spectral bilinear term and the
/// convolution over `seeds` random dealiased pairs at size `n`.
pub fn bilinear_equivalence(n: usize, seeds: u64) -> Result<f64, OracleError> {
    let grid = crate::spectral::wavenumber_grid(n).map_err(|_| OracleError::TooLarge(n))?;
    let c = retained_cutoff(n, DealiasScheme::TwoThirds);
    let zero = SpectralField::zeros(&grid);
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let u = random_solenoidal(&grid, c, 2 * seed);
        let v = random_solenoidal(&grid, c, 2 * seed + 1);
        let slow = restrict_to_cube(&convolution_bilinear(&u, &v)?, c);
        let fast =
            crate::nonlinear::bilinear_term(&u, &v, DealiasScheme::TwoThirds).map_err(|_| {
                OracleError::GridMismatch {
                    expected: n,
                    found: n,
                }
            })?;
        let scale = plain_distance(&slow, &zero).max(f64::MIN_POSITIVE);
        worst = worst.max(plain_distance(&fast, &slow) / scale);
    }
    Ok(worst)
}

/// Worst `L^2` gap, relative to the initial norm, between a dense Galerkin
/// trajectory and the pseudo-spectral solver, compared at every step.
pub fn trajectory_gap(params: &SolverParams, u0: &SpectralField) -> Result<f64, OracleError> {
    let mut sys = DenseGalerkinSystem::new(params.clone(), u0)?;
    let start = sys.to_field();
    let dense = dense_galerkin_run(&mut sys, params.dt, params.t_end)?;
    let mut sim = crate::solver::Simulation::new(params.clone(), start.clone()).map_err(|_| {
        OracleError::GridMismatch {
            expected: params.n,
            found: u0.grid().n(),
        }
    })?;
    let scale = plain_distance(&start, &SpectralField::zeros(start.grid())).max(f64::MIN_POSITIVE);
    let mut worst = plain_distance(&dense.states[0], &sim.state().u) / scale;
    for state in &dense.states[1..] {
        sim.advance().map_err(|_| OracleError::Diverged {
            t: sim.state().t,
            step: sim.state().step_index,
        })?;
        worst = worst.max(plain_distance(state, &sim.state().u) / scale);
    }
    Ok(worst)
}

/// The cross-checks behind `oracle-check`, at `N` in `{4, 8}`.
pub fn equivalence_suite() -> Result<Vec<OracleCheck>, OracleError> {
    use crate::solver::{initial_condition, InitialCondition};
    let mut out = Vec::new();
    for n in [4, 8] {
        out.push(OracleCheck::new(
            "bilinear term vs convolution (20 seeds)",
            n,
            bilinear_equivalence(n, 20)?,
            1e-12,
        ));

        let grid = crate::spectral::wavenumber_grid(n).map_err(|_| OracleError::TooLarge(n))?;
        let c = retained_cutoff(n, DealiasScheme::TwoThirds);
        let mut skew: f64 = 0.0;
        for seed in 0..20 {
            let u = random_solenoidal(&grid, c, 1000 + seed);
            let v = random_solenoidal(&grid, c, 2000 + seed);
            let b = convolution_bilinear(&u, &v)?;
            let h1 = |f: &SpectralField| -> f64 {
                (0..grid.len())
                    .map(|i| {
                        (1.0 + lambda_of(grid.wavevector(i)))
                            * read_mode(f, i).iter().map(|z| z.norm_sqr()).sum::<f64>()
                    })
                    .sum()
            };
            let ul2 = plain_inner(&u, &u).sqrt();
            skew = skew.max(plain_inner(&b, &v).abs() / (ul2 * h1(&v)));
        }
        out.push(OracleCheck::new(
            "convolution skew-symmetry (20 seeds)",
            n,
            skew,
            1e-12,
        ));

        let abc = initial_condition(
            &InitialCondition::Abc {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            &grid,
        );
        let perturbed = {
            let mut u = abc.clone();
            let noise = random_solenoidal(&grid, c, 77);
            let norm = plain_inner(&noise, &noise).sqrt();
            for k in 0..3 {
                for (a, b) in u.component_mut(k).iter_mut().zip(noise.component(k)) {
                    *a += b * (0.5 / norm);
                }
            }
            u
        };
        let cases = [
            (
                "ABC, fEV alpha=0.1 r=1",
                SolverParams::new(0.0, 0.1, 1.0, n, 1e-3, 0.1),
                &abc,
            ),
            (
                "ABC+noise, fEV alpha=0.1 r=1",
                SolverParams::new(0.0, 0.1, 1.0, n, 1e-3, 0.1),
                &perturbed,
            ),
            (
                "ABC+noise, fEV alpha=0.2 r=0.9",
                SolverParams::new(0.0, 0.2, 0.9, n, 1e-3, 0.1),
                &perturbed,
            ),
            (
                "ABC+noise, fNSV nu=0.01 alpha=0.1 r=0.5",
                SolverParams::new(0.01, 0.1, 0.5, n, 1e-3, 0.1),
                &perturbed,
            ),
            (
                "ABC+noise, Euler alpha=0",
                SolverParams::new(0.0, 0.0, 1.0, n, 1e-3, 0.1),
                &perturbed,
            ),
        ];
        for (name, p, u0) in cases {
            out.push(OracleCheck::new(
                format!("dense Galerkin vs solver, {name}"),
                n,
                trajectory_gap(&p, u0)?,
                1e-10,
            ));
        }

        let p = SolverParams::new(0.0, 0.1, 1.0, n, 1e-3, 0.1);
        let mut sys = DenseGalerkinSystem::new(p, &perturbed)?;
        let traj = dense_galerkin_run(&mut sys, 1e-3, 0.1)?;
        let e0 = traj.series[0].modified;
        let drift = traj
            .series
            .iter()
            .map(|r| (r.modified - e0).abs() / e0)
            .fold(0.0, f64::max);
        out.push(OracleCheck::new(
            "dense fEV modified-energy drift",
            n,
            drift,
            1e-8,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::bilinear_term;
    use crate::solver::{initial_condition, InitialCondition};
    use crate::spectral::wavenumber_grid;

    fn rel_err(a: &SpectralField, b: &SpectralField) -> f64 {
        let scale = plain_distance(b, &SpectralField::zeros(b.grid())).max(1e-300);
        plain_distance(a, b) / scale
    }

    #[test]
    fn cutoff_is_counted_not_computed() {
        assert_eq!(retained_cutoff(4, DealiasScheme::TwoThirds), 1);
        assert_eq!(retained_cutoff(6, DealiasScheme::TwoThirds), 1);
        assert_eq!(retained_cutoff(8, DealiasScheme::TwoThirds), 2);
        assert_eq!(retained_cutoff(12, DealiasScheme::TwoThirds), 3);
        assert_eq!(retained_cutoff(8, DealiasScheme::None), 3);
        assert_eq!(cube_modes(1).len(), 26);
    }

    #[test]
    fn guard_rejects_large_grids() {
        let g = wavenumber_grid(14).unwrap();
        let u = SpectralField::zeros(&g);
        assert_eq!(
            convolution_bilinear(&u, &u).unwrap_err(),
            OracleError::TooLarge(14)
        );
        let p = SolverParams::new(0.0, 0.1, 1.0, 14, 1e-3, 0.1);
        assert!(DenseGalerkinSystem::new(p, &u).is_err());
    }

    #[test]
    fn single_triad_closed_form() {
        // u = e_y at p = (1,0,0), v = e_z at q = (0,1,0):
        // (u_p . q) = 1, so the raw term at k = (1,1,0) is i 2 pi e_z,
        // already orthogonal to k.
        let g = wavenumber_grid(8).unwrap();
        let mut u = SpectralField::zeros(&g);
        let mut v = SpectralField::zeros(&g);
        let one = Complex64::new(1.0, 0.0);
        u.component_mut(1)[g.index_of([1, 0, 0]).unwrap()] = one;
        v.component_mut(2)[g.index_of([0, 1, 0]).unwrap()] = one;
        let b = convolution_bilinear(&u, &v).unwrap();
        let idx = g.index_of([1, 1, 0]).unwrap();
        assert!((b.component(2)[idx] - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-14);
        let total: f64 = (0..3)
            .map(|c| b.component(c).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        assert!((total - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn skew_symmetric_to_round_off() {
        let g = wavenumber_grid(8).unwrap();
        for seed in 0..4 {
            let u = random_solenoidal(&g, 3, seed);
            let v = random_solenoidal(&g, 3, seed + 100);
            let b = convolution_bilinear(&u, &v).unwrap();
            let s = plain_inner(&b, &v);
            assert!(s.abs() < 1e-10, "seed {seed}: {s}");
        }
    }

    #[test]
    fn matches_pseudo_spectral_term() {
        for n in [4, 8] {
            let g = wavenumber_grid(n).unwrap();
            let c = retained_cutoff(n, DealiasScheme::TwoThirds);
            for seed in 0..5 {
                let u = random_solenoidal(&g, c, seed);
                let v = random_solenoidal(&g, c, seed + 50);
                let fast = bilinear_term(&u, &v, DealiasScheme::TwoThirds).unwrap();
                let slow = restrict_to_cube(&convolution_bilinear(&u, &v).unwrap(), c);
                let e = rel_err(&fast, &slow);
                assert!(e < 1e-12, "N={n} seed {seed}: {e}");
            }
        }
    }

    #[test]
    fn random_fields_are_real_and_solenoidal() {
        let g = wavenumber_grid(8).unwrap();
        let u = random_solenoidal(&g, 2, 7);
        assert!(u.hermitian_defect() < 1e-15);
        assert!(u.max_divergence() < 1e-14);
        assert_eq!(read_mode(&u, 0), [ZERO; 3]);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = wavenumber_grid(4).unwrap();
        let p = SolverParams::new(0.01, 0.1, 1.0, 4, 1e-2, 0.05);
        let mut sys = DenseGalerkinSystem::new(p, &SpectralField::zeros(&g)).unwrap();
        let traj = dense_galerkin_run(&mut sys, 1e-2, 0.05).unwrap();
        assert_eq!(traj.states.len(), 6);
        assert!(traj
            .states
            .iter()
            .all(|s| plain_distance(s, &SpectralField::zeros(&g)) == 0.0));
    }

    #[test]
    fn dense_fev_conserves_modified_energy() {
        let g = wavenumber_grid(8).unwrap();
        let u0 = random_solenoidal(&g, 2, 3);
        let p = SolverParams::new(0.0, 0.1, 1.0, 8, 1e-3, 0.05);
        let mut sys = DenseGalerkinSystem::new(p, &u0).unwrap();
        let traj = dense_galerkin_run(&mut sys, 1e-3, 0.05).unwrap();
        let e0 = traj.series[0].modified;
        let drift = traj
            .series
            .iter()
            .map(|r| (r.modified - e0).abs() / e0)
            .fold(0.0, f64::max);
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn equivalence_suite_passes() {
        let rows = equivalence_suite().unwrap();
        assert_eq!(rows.len(), 16);
        for row in &rows {
            assert!(row.pass, "{row:?}");
        }
    }

    #[test]
    fn abc_modes_stay_on_the_cube() {
        let g = wavenumber_grid(8).unwrap();
        let u0 = initial_condition(
            &InitialCondition::Abc {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            &g,
        );
        let p = SolverParams::new(0.0, 0.1, 1.0, 8, 1e-3, 0.01);
        let sys = DenseGalerkinSystem::new(p, &u0).unwrap();
        assert!(plain_distance(&sys.to_field(), &u0) < 1e-15);
    }
}
