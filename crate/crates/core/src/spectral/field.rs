use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::grid::{WaveGrid, Wavevector};

/// Real velocity field on the torus, stored as three components of complex
/// Fourier coefficients with `u(x) = sum_k u_k exp(2 pi i k.x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Arc<WaveGrid>,
    coeffs: [Vec<Complex64>; 3],
}

impl SpectralField {
    pub fn zeros(grid: &Arc<WaveGrid>) -> Self {
        let len = grid.len();
        Self {
            grid: Arc::clone(grid),
            coeffs: [
                vec![Complex64::new(0.0, 0.0); len],
                vec![Complex64::new(0.0, 0.0); len],
                vec![Complex64::new(0.0, 0.0); len],
            ],
        }
    }

    /// Wraps raw component arrays. Panics if a component has the wrong length.
    pub fn from_components(grid: &Arc<WaveGrid>, coeffs: [Vec<Complex64>; 3]) -> Self {
        for c in &coeffs {
            assert_eq!(c.len(), grid.len(), "component length does not match grid");
        }
        Self {
            grid: Arc::clone(grid),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    pub fn same_grid(&self, other: &SpectralField) -> bool {
        self.grid.n() == other.grid.n()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.coeffs[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>; 3] {
        &self.coeffs
    }

    pub fn into_components(self) -> [Vec<Complex64>; 3] {
        self.coeffs
    }

    pub fn mode(&self, idx: usize) -> [Complex64; 3] {
        [
            self.coeffs[0][idx],
            self.coeffs[1][idx],
            self.coeffs[2][idx],
        ]
    }

    pub fn set_mode(&mut self, idx: usize, value: [Complex64; 3]) {
        for (c, v) in value.into_iter().enumerate() {
            self.coeffs[c][idx] = v;
        }
    }

    /// Mode at wavevector `k`. Panics if `k` is off-lattice.
    pub fn at(&self, k: Wavevector) -> [Complex64; 3] {
        let idx = self.grid.index_of(k).expect("wavevector outside lattice");
        self.mode(idx)
    }

    /// Sets `k` and its conjugate partner `-k`, keeping the field real.
    pub fn set_pair(&mut self, k: Wavevector, value: [Complex64; 3]) {
        let idx = self.grid.index_of(k).expect("wavevector outside lattice");
        let neg = self
            .grid
            .index_of([-k[0], -k[1], -k[2]])
            .expect("wavevector has no conjugate partner");
        self.set_mode(idx, value);
        self.set_mode(neg, value.map(|z| z.conj()));
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            for z in c.iter_mut() {
                *z *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert!(self.same_grid(other));
        for (dst, src) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s * a;
            }
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Real `L^2` inner product `sum_k Re(f_k . conj(g_k))`, summed in index order.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert!(self.same_grid(other));
        let mut acc = 0.0;
        for (a, b) in self.coeffs.iter().zip(other.coeffs.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                acc += x.re * y.re + x.im * y.im;
            }
        }
        acc
    }

    pub fn energy(&self) -> f64 {
        self.inner(self)
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        let mut m: f64 = 0.0;
        for (a, b) in self.coeffs.iter().zip(other.coeffs.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                m = m.max((x - y).norm());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max_k |k . u_k|` with integer `k`.
    pub fn max_divergence(&self) -> f64 {
        let mut m: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let u = self.mode(idx);
            let d = u[0] * k[0] as f64 + u[1] * k[1] as f64 + u[2] * k[2] as f64;
            m = m.max(d.norm());
        }
        m
    }

    /// Largest violation of `u_{-k} = conj(u_k)` over matched pairs, plus any
    /// content left on Nyquist modes.
    pub fn hermitian_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let u = self.mode(idx);
            match self.grid.negated(idx) {
                Some(neg) => {
                    let v = self.mode(neg);
                    for c in 0..3 {
                        m = m.max((u[c] - v[c].conj()).norm());
                    }
                }
                None => {
                    for z in u {
                        m = m.max(z.norm());
                    }
                }
            }
        }
        m
    }

    pub fn mean(&self) -> [Complex64; 3] {
        self.mode(0)
    }

    /// Checks the real, mean-free, divergence-free invariants to a relative tolerance.
    pub fn satisfies_invariants(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mean = self.mean();
        self.is_finite()
            && self.hermitian_defect() <= rel_tol * scale
            && mean.iter().all(|z| z.norm() <= rel_tol * scale)
            && self.max_divergence() <= rel_tol * scale * self.grid.n() as f64
    }

    /// Zeros Nyquist modes and the mean.
    pub fn zero_unmatched(&mut self) {
        for idx in 0..self.grid.len() {
            if idx == 0 || self.grid.is_nyquist(idx) {
                self.set_mode(idx, [Complex64::new(0.0, 0.0); 3]);
            }
        }
    }

    /// Replaces each pair by its Hermitian average so the field is exactly real.
    pub fn symmetrize(&mut self) {
        for idx in 0..self.grid.len() {
            if let Some(neg) = self.grid.negated(idx) {
                if neg < idx {
                    continue;
                }
                for c in 0..3 {
                    let a = self.coeffs[c][idx];
                    let b = self.coeffs[c][neg];
                    let avg = (a + b.conj()) * 0.5;
                    self.coeffs[c][idx] = avg;
                    self.coeffs[c][neg] = avg.conj();
                }
            }
        }
        self.zero_unmatched();
    }

    /// Keeps modes for which `keep(k)` is true; zeros the rest.
    pub fn retain_modes(&mut self, keep: impl Fn(Wavevector) -> bool) {
        for idx in 0..self.grid.len() {
            if !keep(self.grid.wavevector(idx)) {
                self.set_mode(idx, [Complex64::new(0.0, 0.0); 3]);
            }
        }
    }

    /// Curl `i 2 pi k x u_k`.
    pub fn curl(&self) -> SpectralField {
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let mut out = SpectralField::zeros(&self.grid);
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx).map(|c| c as f64);
            let u = self.mode(idx);
            let w = [
                (u[2] * k[1] - u[1] * k[2]) * two_pi_i,
                (u[0] * k[2] - u[2] * k[0]) * two_pi_i,
                (u[1] * k[0] - u[0] * k[1]) * two_pi_i,
            ];
            out.set_mode(idx, w);
        }
        out
    }
}
