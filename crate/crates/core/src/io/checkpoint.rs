//! Binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `FVGT` |
//! | 4 | format version, `u32` |
//! | 4 | `N`, `u32` |
//! | 8 x 4 | `r`, `alpha`, `nu`, `t` as `f64` |
//! | 8 | step index, `u64` |
//! | 48 N^3 | for each `k` in lexicographic order (`kx` slowest, each component ascending from `-N/2+1` to `N/2`), the three components as `(re, im)` `f64` pairs |

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::solver::{SimState, SolverParams};
use crate::spectral::{wavenumber_grid, GridError, SpectralField};
use crate::Complex64;

pub const MAGIC: &[u8; 4] = b"FVGT";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 * 4 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint IO on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint: bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error(
        "unsupported checkpoint format version {0} (this build reads {CHECKPOINT_FORMAT_VERSION})"
    )]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Contents of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub r: f64,
    pub alpha: f64,
    pub nu: f64,
    pub state: SimState,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes `state` with the physical parameters of `p`.
pub fn encode_checkpoint(state: &SimState, p: &SolverParams) -> Vec<u8> {
    let grid = state.u.grid();
    let n = grid.n();
    let mut buf = Vec::with_capacity(HEADER_LEN + 48 * grid.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for x in [p.r, p.alpha, p.nu, state.t] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&state.step_index.to_le_bytes());
    for idx in grid.lexicographic_order() {
        for c in 0..3 {
            let z = state.u.component(c)[idx];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    buf
}

/// Writes atomically: a temporary sibling file is renamed into place.
pub fn write_checkpoint(
    state: &SimState,
    p: &SolverParams,
    path: &Path,
) -> Result<(), CheckpointError> {
    let bytes = encode_checkpoint(state, p);
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(&bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn take<const K: usize>(bytes: &[u8], at: &mut usize) -> [u8; K] {
    let out = bytes[*at..*at + K].try_into().expect("length checked");
    *at += K;
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 8 {
        return Err(CheckpointError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut at = 0;
    let magic: [u8; 4] = take(bytes, &mut at);
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(take(bytes, &mut at));
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let n = u32::from_le_bytes(take(bytes, &mut at)) as usize;
    let mut f = || f64::from_le_bytes(take(bytes, &mut at));
    let (r, alpha, nu, t) = (f(), f(), f(), f());
    let step_index = u64::from_le_bytes(take(bytes, &mut at));
    let grid = wavenumber_grid(n)?;
    let expected = HEADER_LEN + 48 * grid.len();
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::TrailingBytes(bytes.len() - expected));
    }
    let mut u = SpectralField::zeros(&grid);
    for idx in grid.lexicographic_order() {
        for c in 0..3 {
            let re = f64::from_le_bytes(take(bytes, &mut at));
            let im = f64::from_le_bytes(take(bytes, &mut at));
            u.component_mut(c)[idx] = Complex64::new(re, im);
        }
    }
    Ok(Checkpoint {
        r,
        alpha,
        nu,
        state: SimState { t, u, step_index },
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_checkpoint(&bytes)
}
