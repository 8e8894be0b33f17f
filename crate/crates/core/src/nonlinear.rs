//! Dealiased pseudo-spectral evaluation of `B(u, v) = P((u.grad) v)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{leray_project_in_place, SpectralField, WaveGrid, Wavevector};
use crate::transform::{RustFftPlan, SpectralTransform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearError {
    #[error("grid mismatch: operator planned for N={expected}, field has N={found}")]
    GridMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealiasScheme {
    TwoThirds,
    None,
}

/// Which modes enter and leave the physical-space products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DealiasRule {
    pub scheme: DealiasScheme,
    /// Largest retained `|k_i|`.
    pub cutoff: i64,
}

impl DealiasRule {
    pub fn new(scheme: DealiasScheme, n: usize) -> Self {
        match scheme {
            DealiasScheme::TwoThirds => Self::two_thirds(n),
            DealiasScheme::None => Self::none(n),
        }
    }

    /// Keeps `|k_i| <= c` with `c` the largest integer satisfying `3c < N`
    /// (equal to `floor(N/3)` unless `3 | N`), so that no product of two
    /// retained modes aliases back onto a retained mode.
    pub fn two_thirds(n: usize) -> Self {
        Self {
            scheme: DealiasScheme::TwoThirds,
            cutoff: ((n as i64) - 1) / 3,
        }
    }

    pub fn none(n: usize) -> Self {
        Self {
            scheme: DealiasScheme::None,
            cutoff: (n / 2) as i64 - 1,
        }
    }

    pub fn keeps(&self, k: Wavevector) -> bool {
        k.iter().all(|&c| c.abs() <= self.cutoff)
    }

    /// Zeros every mode the rule discards.
    pub fn apply(&self, f: &mut SpectralField) {
        let rule = *self;
        f.retain_modes(|k| rule.keeps(k));
    }
}

/// Planned bilinear operator for one grid and dealiasing rule.
///
/// The plan is immutable and cheap to clone; each call allocates its own
/// buffers, so one operator may serve several threads.
#[derive(Clone)]
pub struct BilinearOperator {
    grid: Arc<WaveGrid>,
    plan: Arc<dyn SpectralTransform>,
    rule: DealiasRule,
    keep: Arc<Vec<bool>>,
}

impl std::fmt::Debug for BilinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BilinearOperator")
            .field("n", &self.grid.n())
            .field("rule", &self.rule)
            .finish()
    }
}

impl BilinearOperator {
    pub fn new(grid: &Arc<WaveGrid>, scheme: DealiasScheme) -> Self {
        Self::with_transform(grid, scheme, Arc::new(RustFftPlan::new(grid.n())))
    }

    pub fn with_transform(
        grid: &Arc<WaveGrid>,
        scheme: DealiasScheme,
        plan: Arc<dyn SpectralTransform>,
    ) -> Self {
        assert_eq!(plan.size(), grid.n(), "transform planned for another size");
        let rule = DealiasRule::new(scheme, grid.n());
        let keep = (0..grid.len())
            .map(|idx| idx != 0 && !grid.is_nyquist(idx) && rule.keeps(grid.wavevector(idx)))
            .collect();
        Self {
            grid: Arc::clone(grid),
            plan,
            rule,
            keep: Arc::new(keep),
        }
    }

    pub fn rule(&self) -> DealiasRule {
        self.rule
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    fn check(&self, f: &SpectralField) -> Result<(), NonlinearError> {
        if f.grid().n() != self.grid.n() {
            return Err(NonlinearError::GridMismatch {
                expected: self.grid.n(),
                found: f.grid().n(),
            });
        }
        Ok(())
    }

    /// `B(u, v) = P((u.grad) v)` with inputs and output restricted by the rule.
    pub fn apply(
        &self,
        u: &SpectralField,
        v: &SpectralField,
    ) -> Result<SpectralField, NonlinearError> {
        self.check(u)?;
        self.check(v)?;
        let grid = &self.grid;
        let len = grid.len();
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);

        // Twelve real physical fields: u_0..u_2 followed by d_l v_j (j-major).
        // Two real fields share one complex transform as a + i b.
        let two_pi = 2.0 * PI;
        let vectors = grid.wavevectors();
        let mut packed: Vec<Vec<Complex64>> = (0..6).map(|_| vec![zero; len]).collect();
        for idx in 0..len {
            if !self.keep[idx] {
                continue;
            }
            let k = vectors[idx];
            let mut slots = [zero; 12];
            for (c, slot) in slots.iter_mut().take(3).enumerate() {
                *slot = u.component(c)[idx];
            }
            for j in 0..3 {
                // i 2 pi k_l v_j
                let z = v.component(j)[idx] * Complex64::new(0.0, two_pi);
                for l in 0..3 {
                    slots[3 + 3 * j + l] = z * k[l] as f64;
                }
            }
            for (pair, buf) in packed.iter_mut().enumerate() {
                buf[idx] = slots[2 * pair] + i * slots[2 * pair + 1];
            }
        }
        for buf in packed.iter_mut() {
            self.plan.inverse(buf);
        }

        // (u.grad) v_j in physical space; components 0 and 1 share a buffer.
        let mut prod01 = vec![zero; len];
        let mut prod2 = vec![zero; len];
        for x in 0..len {
            let mut re = [0.0; 12];
            for (pair, buf) in packed.iter().enumerate() {
                re[2 * pair] = buf[x].re;
                re[2 * pair + 1] = buf[x].im;
            }
            let mut p = [0.0; 3];
            for (j, pj) in p.iter_mut().enumerate() {
                for l in 0..3 {
                    *pj += re[l] * re[3 + 3 * j + l];
                }
            }
            prod01[x] = Complex64::new(p[0], p[1]);
            prod2[x] = Complex64::new(p[2], 0.0);
        }
        self.plan.forward(&mut prod01);
        self.plan.forward(&mut prod2);

        // Split the packed spectra; the averaging makes the output exactly Hermitian.
        let mut out = SpectralField::zeros(grid);
        for idx in 0..len {
            if !self.keep[idx] {
                continue;
            }
            let neg = grid.negated(idx).expect("retained modes have partners");
            let a = prod01[idx];
            let b = prod01[neg].conj();
            let c = prod2[idx];
            let d = prod2[neg].conj();
            out.set_mode(
                idx,
                [
                    (a + b) * 0.5,
                    (a - b) * Complex64::new(0.0, -0.5),
                    (c + d) * 0.5,
                ],
            );
        }
        leray_project_in_place(&mut out);
        Ok(out)
    }

    /// `<B(u, v), w>`.
    pub fn trilinear(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        w: &SpectralField,
    ) -> Result<f64, NonlinearError> {
        self.check(w)?;
        Ok(self.apply(u, v)?.inner(w))
    }
}

/// One-shot `B(u, v)`; plans a transform on every call.
pub fn bilinear_term(
    u: &SpectralField,
    v: &SpectralField,
    scheme: DealiasScheme,
) -> Result<SpectralField, NonlinearError> {
    if !u.same_grid(v) {
        return Err(NonlinearError::GridMismatch {
            expected: u.grid().n(),
            found: v.grid().n(),
        });
    }
    BilinearOperator::new(u.grid(), scheme).apply(u, v)
}

/// One-shot `<B(u, v), w>` under two-thirds dealiasing.
pub fn trilinear_form(
    u: &SpectralField,
    v: &SpectralField,
    w: &SpectralField,
) -> Result<f64, NonlinearError> {
    BilinearOperator::new(u.grid(), DealiasScheme::TwoThirds).trilinear(u, v, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{leray_project, sobolev_norm, wavenumber_grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_div_free(n: usize, seed: u64, rule: Option<DealiasRule>) -> SpectralField {
        let g = wavenumber_grid(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(&g);
        for idx in 0..g.len() {
            let v = [0; 3].map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            f.set_mode(idx, v);
        }
        f.symmetrize();
        if let Some(rule) = rule {
            rule.apply(&mut f);
        }
        leray_project(&f)
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(DealiasRule::two_thirds(4).cutoff, 1);
        assert_eq!(DealiasRule::two_thirds(8).cutoff, 2);
        assert_eq!(DealiasRule::two_thirds(16).cutoff, 5);
        assert_eq!(DealiasRule::two_thirds(32).cutoff, 10);
        // 3 | N: strict inequality keeps the product band clear of retained modes
        assert_eq!(DealiasRule::two_thirds(12).cutoff, 3);
    }

    #[test]
    fn gradient_free_input_gives_zero() {
        let g = wavenumber_grid(8).unwrap();
        let u = random_div_free(8, 1, None);
        let mut v = SpectralField::zeros(&g);
        v.set_mode(0, [c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        let b = bilinear_term(&u, &v, DealiasScheme::TwoThirds).unwrap();
        // packed transforms leave round-off cross-talk only
        assert!(b.l2_norm() <= 1e-14 * u.l2_norm());
    }

    #[test]
    fn single_triad() {
        // u = (0, 0, cos 2 pi x), v = (0, sin 2 pi z, 0)
        // (u.grad) v = (0, 2 pi cos 2 pi x cos 2 pi z, 0), already divergence-free
        let g = wavenumber_grid(8).unwrap();
        let mut u = SpectralField::zeros(&g);
        u.set_pair([1, 0, 0], [c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        let mut v = SpectralField::zeros(&g);
        v.set_pair([0, 0, 1], [c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.0)]);
        let b = bilinear_term(&u, &v, DealiasScheme::TwoThirds).unwrap();
        for k in [[1, 0, 1], [1, 0, -1], [-1, 0, 1], [-1, 0, -1]] {
            let m = b.at(k);
            assert!((m[1] - c(PI / 2.0, 0.0)).norm() < 1e-13, "{k:?} {m:?}");
            assert!(m[0].norm() < 1e-14 && m[2].norm() < 1e-14);
        }
        assert!((b.energy() - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn skew_symmetry_under_two_thirds() {
        let rule = DealiasRule::two_thirds(16);
        for seed in 0..4 {
            let u = random_div_free(16, seed, Some(rule));
            let v = random_div_free(16, seed + 100, Some(rule));
            let w = random_div_free(16, seed + 200, Some(rule));
            let op = BilinearOperator::new(u.grid(), DealiasScheme::TwoThirds);
            let h1 = sobolev_norm(&v, 1.0);
            let bound = 1e-12 * u.l2_norm() * h1 * h1;
            assert!(op.trilinear(&u, &v, &v).unwrap().abs() <= bound);
            let s = op.trilinear(&u, &v, &w).unwrap() + op.trilinear(&u, &w, &v).unwrap();
            let scale = op.trilinear(&u, &v, &w).unwrap().abs().max(1.0);
            assert!(s.abs() <= 1e-12 * scale * h1 * h1);
        }
    }

    #[test]
    fn skew_symmetry_fails_without_dealiasing() {
        // documents aliasing: full-lattice inputs break <B(u,v),v> = 0
        let u = random_div_free(8, 5, None);
        let v = random_div_free(8, 6, None);
        let op = BilinearOperator::new(u.grid(), DealiasScheme::None);
        let h1 = sobolev_norm(&v, 1.0);
        let t = op.trilinear(&u, &v, &v).unwrap();
        assert!(
            t.abs() > 1e-8 * u.l2_norm() * h1 * h1,
            "aliasing residue {t}"
        );
    }

    #[test]
    fn bilinear_in_first_argument() {
        let rule = DealiasRule::two_thirds(8);
        let u1 = random_div_free(8, 1, Some(rule));
        let u2 = random_div_free(8, 2, Some(rule));
        let v = random_div_free(8, 3, Some(rule));
        let op = BilinearOperator::new(v.grid(), DealiasScheme::TwoThirds);
        let mut combo = u1.scaled(0.7);
        combo.axpy(-1.3, &u2);
        let lhs = op.apply(&combo, &v).unwrap();
        let mut rhs = op.apply(&u1, &v).unwrap().scaled(0.7);
        rhs.axpy(-1.3, &op.apply(&u2, &v).unwrap());
        assert!(lhs.sub(&rhs).l2_norm() <= 1e-12 * rhs.l2_norm());
    }

    #[test]
    fn output_is_real_mean_free_divergence_free() {
        let u = random_div_free(8, 9, None);
        let v = random_div_free(8, 10, None);
        let b = bilinear_term(&u, &v, DealiasScheme::TwoThirds).unwrap();
        assert_eq!(b.hermitian_defect(), 0.0);
        assert_eq!(b.mean(), [c(0.0, 0.0); 3]);
        assert!(b.max_divergence() <= 1e-12 * b.max_abs());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let u = random_div_free(8, 1, None);
        let v = random_div_free(4, 1, None);
        assert_eq!(
            bilinear_term(&u, &v, DealiasScheme::TwoThirds).unwrap_err(),
            NonlinearError::GridMismatch {
                expected: 8,
                found: 4
            }
        );
    }
}
