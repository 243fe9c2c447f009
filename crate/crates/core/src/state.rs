//! Full-grid field state on a constant-`t` slice.

use crate::clifford::{Spinor, C64};
use crate::grid::{ChannelGrid, Grid3};

/// Channel layout of [`FieldState`].
pub mod ch {
    /// `A^ν` lives at `A + ν`.
    pub const A: usize = 0;
    /// `∂_t A^ν` at `ADOT + ν`.
    pub const ADOT: usize = 4;
    /// `Re χ`, `Im χ`.
    pub const CHI: usize = 8;
    pub const CHIDOT: usize = 10;
    /// Spinor component `k` at `PSI + 2k` (real) and `PSI + 2k + 1` (imaginary).
    pub const PSI: usize = 12;
    pub const N: usize = 20;
    /// `∂_t ψ`, carried only by history snapshots.
    pub const PSI_T: usize = 20;
    pub const N_SNAPSHOT: usize = 28;

    pub const fn psi_re(k: usize) -> usize {
        PSI + 2 * k
    }

    pub const fn psi_im(k: usize) -> usize {
        PSI + 2 * k + 1
    }
}

/// Which channels a model evolves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveChannels {
    pub gauge: bool,
    pub scalar: bool,
    pub spinor: bool,
}

impl ActiveChannels {
    pub fn contains(&self, c: usize) -> bool {
        match c {
            0..=7 => self.gauge,
            8..=11 => self.scalar,
            12..=19 => self.spinor,
            _ => false,
        }
    }
}

/// `(A^ν, ∂_tA^ν, χ, ∂_tχ, ψ)` on every grid point at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub fields: ChannelGrid,
}

impl FieldState {
    pub fn zeros(grid: Grid3, t: f64) -> Self {
        FieldState { t, fields: ChannelGrid::zeros(grid, ch::N) }
    }

    pub fn grid(&self) -> Grid3 {
        self.fields.grid
    }

    #[inline]
    pub fn psi_at(&self, i: usize, j: usize, k: usize) -> Spinor {
        read_spinor(&self.fields, ch::PSI, i, j, k)
    }

    pub fn set_psi(&mut self, i: usize, j: usize, k: usize, psi: &Spinor) {
        for c in 0..4 {
            self.fields.set(ch::psi_re(c), i, j, k, psi.0[c].re);
            self.fields.set(ch::psi_im(c), i, j, k, psi.0[c].im);
        }
    }

    #[inline]
    pub fn chi_at(&self, i: usize, j: usize, k: usize) -> C64 {
        C64::new(self.fields.at(ch::CHI, i, j, k), self.fields.at(ch::CHI + 1, i, j, k))
    }

    #[inline]
    pub fn chidot_at(&self, i: usize, j: usize, k: usize) -> C64 {
        C64::new(self.fields.at(ch::CHIDOT, i, j, k), self.fields.at(ch::CHIDOT + 1, i, j, k))
    }

    #[inline]
    pub fn a_at(&self, i: usize, j: usize, k: usize) -> [f64; 4] {
        std::array::from_fn(|nu| self.fields.at(ch::A + nu, i, j, k))
    }

    #[inline]
    pub fn adot_at(&self, i: usize, j: usize, k: usize) -> [f64; 4] {
        std::array::from_fn(|nu| self.fields.at(ch::ADOT + nu, i, j, k))
    }
}

/// Spinor stored as four re/im channel pairs starting at `base`.
#[inline]
pub fn read_spinor(f: &ChannelGrid, base: usize, i: usize, j: usize, k: usize) -> Spinor {
    Spinor(std::array::from_fn(|c| C64::new(f.at(base + 2 * c, i, j, k), f.at(base + 2 * c + 1, i, j, k))))
}
