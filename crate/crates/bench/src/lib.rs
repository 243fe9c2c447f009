//! Fixtures shared by the benchmarks.

use hyperfield::evolve::Model;
use hyperfield::geometry::HyperboloidSlice;
use hyperfield::grid::{ChannelGrid, Grid3};
use hyperfield::models::CouplingParams;
use hyperfield::state::FieldState;
use hyperfield::suite::random_compact_slice;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn u1_model() -> Model {
    Model::u1(CouplingParams::new(0.5, 0.2, 0.125, 1.0).expect("valid couplings"))
}

/// Every channel filled with a small Gaussian so all couplings do work.
pub fn gaussian_state(n: usize, dx: f64) -> FieldState {
    let grid = Grid3::new(n, dx).expect("grid");
    let mut y = FieldState::zeros(grid, 3.0);
    for c in 0..y.fields.nch {
        let w = 1.0 + 0.05 * c as f64;
        y.fields.fill(c, |x| 0.01 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / w).exp());
    }
    y
}

/// Compact Yukawa-type right-hand side for the elliptic solver.
pub fn helmholtz_source(n: usize, dx: f64) -> ChannelGrid {
    let grid = Grid3::new(n, dx).expect("grid");
    let mut f = ChannelGrid::zeros(grid, 1);
    f.fill(0, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 < 4.0 { (1.0 - r2 / 4.0).powi(4) } else { 0.0 }
    });
    f
}

pub fn slice(points: usize) -> HyperboloidSlice {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    random_compact_slice(&mut rng, 4.0, 3.0, points)
}
