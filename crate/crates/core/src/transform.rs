//! Three-dimensional discrete Fourier transforms behind a small planning interface.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// A planned transform on `N^3` complex samples in flat `(x, y, z)` layout.
///
/// `inverse` evaluates `u(x_j) = sum_k u_k exp(2 pi i k.x_j)` on the grid
/// `x_j = j/N`; `forward` is its exact inverse, normalized by `1/N^3`.
pub trait SpectralTransform: Send + Sync {
    fn size(&self) -> usize;
    fn forward(&self, data: &mut [Complex64]);
    fn inverse(&self, data: &mut [Complex64]);
}

/// [`SpectralTransform`] backed by `rustfft`. Cloning shares the plans.
#[derive(Clone)]
pub struct RustFftPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RustFftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RustFftPlan").field("n", &self.n).finish()
    }
}

impl RustFftPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match plan size");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];

        // z is contiguous
        fft.process_with_scratch(data, &mut scratch);

        // y: transpose each x-plane so y becomes the fast axis
        for plane in data.chunks_exact_mut(n * n) {
            let tmp = &mut buf[..n * n];
            transpose(plane, tmp, n, n);
            fft.process_with_scratch(tmp, &mut scratch);
            transpose(tmp, plane, n, n);
        }

        // x: view as N x N^2 and transpose
        transpose(data, &mut buf, n, n * n);
        fft.process_with_scratch(&mut buf, &mut scratch);
        transpose(&buf, data, n * n, n);
    }
}

impl SpectralTransform for RustFftPlan {
    fn size(&self) -> usize {
        self.n
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
        let norm = 1.0 / (self.n * self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= norm;
        }
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }
}

/// Row-major `rows x cols` into `cols x rows`, in cache-sized tiles.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 16;
    for r0 in (0..rows).step_by(TILE) {
        let r1 = (r0 + TILE).min(rows);
        for c0 in (0..cols).step_by(TILE) {
            let c1 = (c0 + TILE).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
