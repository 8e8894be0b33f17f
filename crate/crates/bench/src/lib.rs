//! Benchmark fixtures shared by the criterion targets.

use std::sync::Arc;

use fvgt_core::solver::{initial_condition, InitialCondition, SimState, SolverParams, VoigtSolver};
use fvgt_core::spectral::{wavenumber_grid, SpectralField, WaveGrid};

/// Smooth divergence-free data on an `n`-point grid.
pub fn smooth_field(n: usize, seed: u64) -> (Arc<WaveGrid>, SpectralField) {
    let grid = wavenumber_grid(n).expect("valid grid size");
    let u = initial_condition(
        &InitialCondition::RandomSmooth { seed, decay_s: 2.0 },
        &grid,
    );
    (grid, u)
}

/// A planned fEV solver and a starting state.
pub fn stepper(n: usize) -> (VoigtSolver, SimState) {
    let params = SolverParams::new(0.0, 0.1, 1.0, n, 1e-3, 1.0);
    let solver = VoigtSolver::new(params).expect("valid parameters");
    let (_, u) = smooth_field(n, 7);
    (solver, SimState::new(u))
}
