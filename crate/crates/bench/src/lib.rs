//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;
use surfwave_core::{make_initial_data, Grid, GridSpec, InitialData, InitialVelocity, SurfaceField, TensionLaw};

pub fn grid(n: usize, nz: usize) -> Arc<Grid> {
    Grid::new(GridSpec::new(2.0 * PI, 2.0 * PI, 1.0, n, n, nz)).expect("benchmark grid is valid")
}

/// The small-wave initial state on `grid`.
pub fn small_wave(grid: &Arc<Grid>) -> InitialData {
    let eta = SurfaceField::from_fn(grid, |x, _| 1e-2 * x.cos());
    let c = SurfaceField::constant(grid, 1.0);
    make_initial_data(&eta, &c, TensionLaw::default(), 0.5, InitialVelocity::Zero).expect("small-wave data is valid")
}
