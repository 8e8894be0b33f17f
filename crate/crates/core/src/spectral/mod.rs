//! Operator algebra on the periodic lattice: Leray projection, fractional
//! Stokes multipliers, Sobolev norms and Galerkin truncation.
//!
//! Every operation here acts mode by mode, so Hermitian symmetry, the zero
//! mean and the divergence-free constraint carry through unchanged.

mod field;
mod grid;

pub use field::SpectralField;
pub use grid::{eigenvalue, wavenumber_grid, GridError, WaveGrid, Wavevector};

use rustfft::num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error("fractional exponent r={0} must be positive")]
    NonPositiveExponent(f64),
    #[error("regularization length alpha={0} must be non-negative")]
    NegativeAlpha(f64),
}

/// Diagonal Fourier multipliers built from the Stokes operator `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    /// `A^s`.
    StokesPower(f64),
    /// `(I + alpha^{2r} A^r)^{-1}`.
    HelmholtzInverse { alpha: f64, r: f64 },
    /// `I + alpha^{2r} A^r`.
    Helmholtz { alpha: f64, r: f64 },
}

impl Multiplier {
    pub fn helmholtz_inverse(alpha: f64, r: f64) -> Result<Self, MultiplierError> {
        check_voigt(alpha, r)?;
        Ok(Self::HelmholtzInverse { alpha, r })
    }

    pub fn helmholtz(alpha: f64, r: f64) -> Result<Self, MultiplierError> {
        check_voigt(alpha, r)?;
        Ok(Self::Helmholtz { alpha, r })
    }

    /// Symbol at eigenvalue `lambda`. `A^s` with `s < 0` maps the zero mode to zero.
    pub fn symbol(&self, lambda: f64) -> f64 {
        match *self {
            Self::StokesPower(s) => stokes_power(lambda, s),
            Self::HelmholtzInverse { alpha, r } => 1.0 / voigt_factor(alpha, r, lambda),
            Self::Helmholtz { alpha, r } => voigt_factor(alpha, r, lambda),
        }
    }

    fn validate(&self) -> Result<(), MultiplierError> {
        match *self {
            Self::StokesPower(_) => Ok(()),
            Self::HelmholtzInverse { alpha, r } | Self::Helmholtz { alpha, r } => {
                check_voigt(alpha, r)
            }
        }
    }
}

fn check_voigt(alpha: f64, r: f64) -> Result<(), MultiplierError> {
    if r.is_nan() || r <= 0.0 {
        return Err(MultiplierError::NonPositiveExponent(r));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(MultiplierError::NegativeAlpha(alpha));
    }
    Ok(())
}

/// `1 + alpha^{2r} lambda^r`.
pub fn voigt_factor(alpha: f64, r: f64, lambda: f64) -> f64 {
    1.0 + alpha.powf(2.0 * r) * lambda.powf(r)
}

/// `lambda^s` with the conventions used by the Sobolev scale: `0^0 = 1`,
/// `0^s = 0` for `s > 0`, and the zero mode dropped for `s < 0`.
pub fn stokes_power(lambda: f64, s: f64) -> f64 {
    if lambda == 0.0 {
        if s == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if s == 0.0 {
        1.0
    } else {
        lambda.powf(s)
    }
}

/// Leray-Helmholtz projection `u_k - k (k.u_k)/|k|^2`, identity at `k = 0`.
pub fn leray_project(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    leray_project_in_place(&mut out);
    out
}

pub fn leray_project_in_place(f: &mut SpectralField) {
    let grid = f.grid().clone();
    for idx in 1..grid.len() {
        let k = grid.wavevector(idx).map(|c| c as f64);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let u = f.mode(idx);
        let kdotu = u[0] * k[0] + u[1] * k[1] + u[2] * k[2];
        let s = kdotu / k2;
        f.set_mode(idx, [u[0] - s * k[0], u[1] - s * k[1], u[2] - s * k[2]]);
    }
}

/// Scales each mode by the multiplier symbol at its eigenvalue.
pub fn apply_multiplier(
    f: &SpectralField,
    kind: Multiplier,
) -> Result<SpectralField, MultiplierError> {
    kind.validate()?;
    let mut out = f.clone();
    let grid = f.grid().clone();
    if let Multiplier::HelmholtzInverse { alpha, .. } | Multiplier::Helmholtz { alpha, .. } = kind {
        if alpha == 0.0 {
            return Ok(out);
        }
    }
    for c in 0..3 {
        for (z, &lambda) in out.component_mut(c).iter_mut().zip(grid.lambdas()) {
            *z *= kind.symbol(lambda);
        }
    }
    Ok(out)
}

/// `(sum_k lambda_k^s |u_k|^2)^{1/2}`. For `s < 0` the zero mode is skipped.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    sobolev_norm_sq(f, s).sqrt()
}

/// Squared Sobolev norm, accumulated in flat-index order.
pub fn sobolev_norm_sq(f: &SpectralField, s: f64) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for (idx, &lambda) in grid.lambdas().iter().enumerate() {
        let w = stokes_power(lambda, s);
        if w == 0.0 {
            continue;
        }
        let u = f.mode(idx);
        acc += w * (u[0].norm_sqr() + u[1].norm_sqr() + u[2].norm_sqr());
    }
    acc
}

/// Eigenvalue of rank `m` in the ordering of [`WaveGrid::modes_by_eigenvalue`]
/// (1-based). `None` for `m = 0` or past the end of the lattice.
pub fn rank_eigenvalue(grid: &WaveGrid, m: usize) -> Option<f64> {
    if m == 0 {
        return None;
    }
    grid.modes_by_eigenvalue()
        .get(m - 1)
        .map(|&idx| grid.lambda(idx))
}

/// Galerkin truncation `P_M`: keeps every mode whose eigenvalue does not
/// exceed the eigenvalue of rank `M`. Whole shells are kept so the result
/// stays real. `M = 0` gives the zero field; `M` at or past the lattice rank
/// is the identity on non-Nyquist modes.
pub fn truncate(f: &SpectralField, m: usize) -> SpectralField {
    let grid = f.grid().clone();
    let total = grid.modes_by_eigenvalue().len();
    let mut out = f.clone();
    if m >= total {
        return out;
    }
    let cutoff = rank_eigenvalue(&grid, m).unwrap_or(-1.0);
    for idx in 1..grid.len() {
        if grid.lambda(idx) > cutoff {
            out.set_mode(idx, [Complex64::new(0.0, 0.0); 3]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Real, mean-free random field (not projected).
    fn random_field(n: usize, seed: u64) -> SpectralField {
        let g = wavenumber_grid(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(&g);
        for idx in 0..g.len() {
            let v = [0; 3].map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            f.set_mode(idx, v);
        }
        f.symmetrize();
        f
    }

    fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
        a.sub(b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
    }

    /// Dense 3x3 projector `I - k k^T / |k|^2` applied as a matrix product.
    fn dense_project(f: &SpectralField) -> SpectralField {
        let g = f.grid().clone();
        let mut out = SpectralField::zeros(&g);
        for idx in 0..g.len() {
            let k = g.wavevector(idx).map(|x| x as f64);
            let k2: f64 = k.iter().map(|x| x * x).sum();
            let u = f.mode(idx);
            let mut p = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    p[i][j] = if k2 == 0.0 {
                        delta
                    } else {
                        delta - k[i] * k[j] / k2
                    };
                }
            }
            let mut v = [c(0.0, 0.0); 3];
            for i in 0..3 {
                for j in 0..3 {
                    v[i] += u[j] * p[i][j];
                }
            }
            out.set_mode(idx, v);
        }
        out
    }

    #[test]
    fn projection_of_single_mode() {
        let g = wavenumber_grid(4).unwrap();
        let mut f = SpectralField::zeros(&g);
        f.set_pair([1, 1, 0], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let p = leray_project(&f);
        let m = p.at([1, 1, 0]);
        assert!((m[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((m[1] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!(m[2].norm() < 1e-15);
        assert!(rel(&p, &dense_project(&f)) < 1e-15);
    }

    #[test]
    fn projection_matches_dense_projector() {
        let f = random_field(8, 3);
        assert!(rel(&leray_project(&f), &dense_project(&f)) < 1e-14);
    }

    #[test]
    fn projection_annihilates_gradients() {
        let g = wavenumber_grid(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut f = SpectralField::zeros(&g);
        for idx in 1..g.len() {
            let k = g.wavevector(idx).map(|x| x as f64);
            let phi = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let ig = phi * c(0.0, 2.0 * PI);
            f.set_mode(idx, [ig * k[0], ig * k[1], ig * k[2]]);
        }
        f.symmetrize();
        let p = leray_project(&f);
        assert!(p.l2_norm() <= 1e-14 * f.l2_norm());
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint() {
        let f = random_field(8, 11);
        let g = random_field(8, 12);
        let pf = leray_project(&f);
        assert!(pf.max_divergence() <= 1e-12 * pf.max_abs());
        let ppf = leray_project(&pf);
        assert!(rel(&ppf, &pf) < 1e-14);
        let lhs = pf.inner(&g);
        let rhs = f.inner(&leray_project(&g));
        assert!((lhs - rhs).abs() <= 1e-12 * f.l2_norm() * g.l2_norm());
    }

    #[test]
    fn stokes_power_on_single_mode() {
        let g = wavenumber_grid(4).unwrap();
        let mut f = SpectralField::zeros(&g);
        f.set_pair([1, 0, 0], [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let a = apply_multiplier(&f, Multiplier::StokesPower(1.0)).unwrap();
        assert!((a.at([1, 0, 0])[1] - c(4.0 * PI * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn helmholtz_inverse_values() {
        let f = leray_project(&random_field(8, 5));
        let id = apply_multiplier(&f, Multiplier::helmholtz_inverse(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(id, f);

        let m = Multiplier::helmholtz_inverse(1.0, 1.0).unwrap();
        let s = m.symbol(4.0 * PI * PI);
        assert!((s - 1.0 / (1.0 + 4.0 * PI * PI)).abs() < 1e-15);
        assert!((s - 0.02470).abs() < 1e-5);
        for &lambda in wavenumber_grid(8).unwrap().lambdas() {
            let v = Multiplier::helmholtz_inverse(0.3, 0.7)
                .unwrap()
                .symbol(lambda);
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn multiplier_rejects_bad_parameters() {
        assert_eq!(
            Multiplier::helmholtz_inverse(0.1, 0.0).unwrap_err(),
            MultiplierError::NonPositiveExponent(0.0)
        );
        assert_eq!(
            Multiplier::helmholtz_inverse(-0.1, 1.0).unwrap_err(),
            MultiplierError::NegativeAlpha(-0.1)
        );
        let f = random_field(4, 1);
        let bad = Multiplier::HelmholtzInverse {
            alpha: 0.1,
            r: -1.0,
        };
        assert!(apply_multiplier(&f, bad).is_err());
    }

    #[test]
    fn sobolev_norm_single_mode() {
        let g = wavenumber_grid(4).unwrap();
        let mut f = SpectralField::zeros(&g);
        f.set_pair([1, 0, 0], [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((sobolev_norm(&f, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((sobolev_norm(&f, 1.0) - 2f64.sqrt() * 2.0 * PI).abs() < 1e-13);
        assert!((sobolev_norm(&f, 0.0) - f.l2_norm()).abs() < 1e-15);
    }

    #[test]
    fn poincare_inequality_on_mean_free_fields() {
        for seed in 0..10 {
            let f = random_field(8, seed);
            // brute force over modes
            let mut h0 = 0.0;
            let mut h1 = 0.0;
            for idx in 0..f.grid().len() {
                let k = f.grid().wavevector(idx);
                let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                let a: f64 = f.mode(idx).iter().map(|z| z.norm_sqr()).sum();
                h0 += a;
                h1 += 4.0 * PI * PI * k2 * a;
            }
            let n0 = sobolev_norm(&f, 0.0);
            let n1 = sobolev_norm(&f, 1.0);
            assert!((n0 * n0 - h0).abs() <= 1e-12 * h0);
            assert!((n1 * n1 - h1).abs() <= 1e-12 * h1);
            assert!(n1 * n1 >= 4.0 * PI * PI * n0 * n0);
        }
    }

    #[test]
    fn truncation_basics() {
        let f = leray_project(&random_field(8, 9));
        let total = f.grid().modes_by_eigenvalue().len();
        assert_eq!(truncate(&f, total), f);
        assert_eq!(truncate(&f, 0).l2_norm(), 0.0);
        let t = truncate(&f, 40);
        assert_eq!(truncate(&t, 40), t);
        assert_eq!(t.hermitian_defect(), 0.0);

        let g = f.grid().clone();
        let mut single = SpectralField::zeros(&g);
        single.set_pair([1, 0, 0], [c(0.0, 0.0), c(0.25, -0.5), c(0.0, 0.0)]);
        assert_eq!(truncate(&single, 6), single);
    }

    #[test]
    fn projection_estimate_h2_to_l2() {
        let g = wavenumber_grid(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut f = SpectralField::zeros(&g);
        // smooth: amplitudes decay like (1 + lambda)^{-2}
        for idx in 0..g.len() {
            let a = (1.0 + g.lambda(idx)).powf(-2.0);
            let v = [0; 3].map(|_| c(rng.random_range(-a..a), rng.random_range(-a..a)));
            f.set_mode(idx, v);
        }
        f.symmetrize();
        let f = leray_project(&f);
        for m in [6, 18, 50, 120] {
            let lm = rank_eigenvalue(&g, m).unwrap();
            let tail = f.sub(&truncate(&f, m));
            // brute-force both sides
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for idx in 0..g.len() {
                let a: f64 = tail.mode(idx).iter().map(|z| z.norm_sqr()).sum();
                lhs += a;
                let b: f64 = f.mode(idx).iter().map(|z| z.norm_sqr()).sum();
                rhs += g.lambda(idx).powi(2) * b;
            }
            assert!(lhs.sqrt() <= rhs.sqrt() / lm);
            assert!(tail.l2_norm() <= sobolev_norm(&f, 2.0) / lm);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn powers_compose(seed in 0u64..1000, s1 in -2.0f64..2.0, s2 in -2.0f64..2.0) {
            let f = random_field(4, seed);
            let a = apply_multiplier(&apply_multiplier(&f, Multiplier::StokesPower(s1)).unwrap(),
                Multiplier::StokesPower(s2)).unwrap();
            let b = apply_multiplier(&f, Multiplier::StokesPower(s1 + s2)).unwrap();
            prop_assert!(rel(&a, &b) <= 1e-12);
        }

        #[test]
        fn helmholtz_inverse_undoes_helmholtz(seed in 0u64..1000, alpha in 0.0f64..1.0, r in 0.05f64..1.5) {
            let f = random_field(4, seed);
            let h = apply_multiplier(&f, Multiplier::helmholtz(alpha, r).unwrap()).unwrap();
            let back = apply_multiplier(&h, Multiplier::helmholtz_inverse(alpha, r).unwrap()).unwrap();
            prop_assert!(rel(&back, &f) <= 1e-12);
        }

        #[test]
        fn multipliers_preserve_structure(seed in 0u64..1000, s in -1.0f64..2.0) {
            let f = leray_project(&random_field(4, seed));
            let a = apply_multiplier(&f, Multiplier::StokesPower(s)).unwrap();
            prop_assert_eq!(a.hermitian_defect(), 0.0);
            prop_assert!(a.max_divergence() <= 1e-12 * a.max_abs());
        }

        #[test]
        fn projection_estimate_holds(seed in 0u64..1000, s1 in 0.0f64..1.5, gap in 0.1f64..2.0, m in 1usize..26) {
            let f = leray_project(&random_field(4, seed));
            let s2 = s1 + gap;
            let lm = rank_eigenvalue(f.grid(), m).unwrap();
            let tail = f.sub(&truncate(&f, m));
            let lhs = sobolev_norm_sq(&tail, s1);
            let rhs = lm.powf(-(s2 - s1)) * sobolev_norm_sq(&f, s2);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
