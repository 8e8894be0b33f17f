use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size N={0} is invalid: N must be even and at least 4")]
    InvalidSize(usize),
}

/// Integer wavevector `(kx, ky, kz)`.
pub type Wavevector = [i64; 3];

/// Truncated Fourier lattice on the unit torus `[0,1]^3`.
///
/// Storage follows the usual FFT layout: along each axis, index `i` holds
/// wavenumber `i` for `i <= N/2` and `i - N` above. The flat index of
/// `(ix, iy, iz)` is `(ix * N + iy) * N + iz`. The Stokes eigenvalue of a
/// mode is `4 pi^2 |k|^2`.
#[derive(Debug, Clone)]
pub struct WaveGrid {
    n: usize,
    wavenumbers: Vec<i64>,
    lambda: Vec<f64>,
    vectors: Vec<Wavevector>,
    negated: Vec<Option<usize>>,
}

impl PartialEq for WaveGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

/// Builds the lattice with `N` modes per dimension.
pub fn wavenumber_grid(n: usize) -> Result<Arc<WaveGrid>, GridError> {
    WaveGrid::new(n).map(Arc::new)
}

impl WaveGrid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(GridError::InvalidSize(n));
        }
        let half = (n / 2) as i64;
        let wavenumbers: Vec<i64> = (0..n as i64)
            .map(|i| if i <= half { i } else { i - n as i64 })
            .collect();
        let mut lambda = Vec::with_capacity(n * n * n);
        let mut vectors = Vec::with_capacity(n * n * n);
        for &kx in &wavenumbers {
            for &ky in &wavenumbers {
                for &kz in &wavenumbers {
                    lambda.push(eigenvalue([kx, ky, kz]));
                    vectors.push([kx, ky, kz]);
                }
            }
        }
        let mut grid = Self {
            n,
            wavenumbers,
            lambda,
            vectors,
            negated: Vec::new(),
        };
        grid.negated = grid
            .vectors
            .iter()
            .map(|k| grid.index_of([-k[0], -k[1], -k[2]]))
            .collect();
        Ok(grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of lattice points, `N^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumber stored at axis index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        self.wavenumbers[i]
    }

    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    pub fn wavevector(&self, idx: usize) -> Wavevector {
        self.vectors[idx]
    }

    /// Wavevectors in flat-index order.
    pub fn wavevectors(&self) -> &[Wavevector] {
        &self.vectors
    }

    /// Flat index of `k`, if it lies on the lattice.
    pub fn index_of(&self, k: Wavevector) -> Option<usize> {
        let n = self.n as i64;
        let half = n / 2;
        let mut axis = [0usize; 3];
        for (slot, &c) in axis.iter_mut().zip(k.iter()) {
            if c <= -half || c > half {
                return None;
            }
            *slot = if c >= 0 { c as usize } else { (c + n) as usize };
        }
        Some(self.flat(axis[0], axis[1], axis[2]))
    }

    /// Stokes eigenvalue `4 pi^2 |k|^2` at a flat index.
    pub fn lambda(&self, idx: usize) -> f64 {
        self.lambda[idx]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// True when some component of `k` sits on the unmatched Nyquist row `N/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        self.negated[idx].is_none()
    }

    /// Flat index of `-k`; `None` for Nyquist modes, whose negation is off-lattice.
    pub fn negated(&self, idx: usize) -> Option<usize> {
        self.negated[idx]
    }

    /// Smallest nonzero eigenvalue, `4 pi^2`.
    pub fn lambda_min(&self) -> f64 {
        4.0 * PI * PI
    }

    /// Nonzero, non-Nyquist modes sorted by eigenvalue, ties broken by
    /// lexicographic order on `k`.
    pub fn modes_by_eigenvalue(&self) -> Vec<usize> {
        let mut modes: Vec<usize> = (0..self.len())
            .filter(|&i| i != 0 && !self.is_nyquist(i))
            .collect();
        modes.sort_by(|&a, &b| {
            self.lambda[a]
                .total_cmp(&self.lambda[b])
                .then_with(|| self.wavevector(a).cmp(&self.wavevector(b)))
        });
        modes
    }

    /// Flat indices in lexicographic order of the signed wavevector,
    /// `kx` slowest, each component ascending from `-N/2+1` to `N/2`.
    pub fn lexicographic_order(&self) -> Vec<usize> {
        let n = self.n;
        let half = n / 2;
        // axis indices sorted by signed wavenumber
        let axis: Vec<usize> = (half + 1..n).chain(0..=half).collect();
        let mut out = Vec::with_capacity(self.len());
        for &ix in &axis {
            for &iy in &axis {
                for &iz in &axis {
                    out.push(self.flat(ix, iy, iz));
                }
            }
        }
        out
    }
}

/// `4 pi^2 |k|^2` for an integer wavevector.
pub fn eigenvalue(k: Wavevector) -> f64 {
    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    4.0 * PI * PI * k2
}
