//! Periodic Cartesian grid and multi-channel grid storage.
//!
//! Storage is slab-major: for each `i` all channels of the `(j, k)` plane are
//! contiguous, so a slab of every channel can be handed to one worker.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::Stencil;

/// Cubic periodic grid with `n` points per axis, centred on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub n: usize,
    pub dx: f64,
}

impl Grid3 {
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::Invalid(format!("grid needs at least 8 points per axis, got {n}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Invalid(format!("grid spacing must be positive, got {dx}")));
        }
        Ok(Grid3 { n, dx })
    }

    pub fn npts(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Coordinate of index `i` along any axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.dx
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Distance from the origin to the nearest box face.
    pub fn half_width(&self) -> f64 {
        (self.n / 2) as f64 * self.dx
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dx * self.dx
    }

    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// `table[i + pad]` is the periodic image of `i` for `i` in `-pad..n+pad`.
    pub fn wrap_table(&self, pad: usize) -> Vec<usize> {
        (0..self.n + 2 * pad).map(|i| self.wrap(i as isize - pad as isize)).collect()
    }
}

/// `nch` real channels on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGrid {
    pub grid: Grid3,
    pub nch: usize,
    pub data: Vec<f64>,
}

impl ChannelGrid {
    pub fn zeros(grid: Grid3, nch: usize) -> Self {
        ChannelGrid { grid, nch, data: vec![0.0; nch * grid.npts()] }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.grid.n * self.grid.n
    }

    #[inline]
    pub fn slab_len(&self) -> usize {
        self.nch * self.plane()
    }

    #[inline]
    pub fn offset(&self, c: usize, i: usize, j: usize, k: usize) -> usize {
        let n = self.grid.n;
        ((i * self.nch + c) * n + j) * n + k
    }

    #[inline]
    pub fn at(&self, c: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(c, i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(c, i, j, k);
        self.data[o] = v;
    }

    /// Row `(i, c, j, ·)` of length `n`.
    #[inline]
    pub fn row(&self, c: usize, i: usize, j: usize) -> &[f64] {
        let o = self.offset(c, i, j, 0);
        &self.data[o..o + self.grid.n]
    }

    /// Fill channel `c` from a coordinate function.
    pub fn fill<F>(&mut self, c: usize, f: F)
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        let g = self.grid;
        let (n, nch) = (g.n, self.nch);
        self.data.par_chunks_mut(nch * n * n).enumerate().for_each(|(i, slab)| {
            for j in 0..n {
                for k in 0..n {
                    slab[(c * n + j) * n + k] = f(g.point(i, j, k));
                }
            }
        });
    }

    /// Copy of channel `c` as a one-channel grid.
    pub fn channel(&self, c: usize) -> ChannelGrid {
        let mut out = ChannelGrid::zeros(self.grid, 1);
        let p = self.plane();
        for i in 0..self.grid.n {
            let src = self.offset(c, i, 0, 0);
            out.data[i * p..(i + 1) * p].copy_from_slice(&self.data[src..src + p]);
        }
        out
    }

    /// Overwrite channel `c` from a one-channel grid.
    pub fn set_channel(&mut self, c: usize, src: &ChannelGrid) {
        assert_eq!(src.nch, 1);
        let p = self.plane();
        for i in 0..self.grid.n {
            let dst = self.offset(c, i, 0, 0);
            self.data[dst..dst + p].copy_from_slice(&src.data[i * p..(i + 1) * p]);
        }
    }

    /// First index of a non-finite entry, as `(channel, [i, j, k])`.
    pub fn find_non_finite(&self) -> Option<(usize, [usize; 3])> {
        // x * 0 is NaN exactly for non-finite x, so one cheap pass rules out the common case
        let probe: f64 = self.data.par_chunks(1 << 16).map(|c| c.iter().fold(0.0, |a, x| a + x * 0.0)).sum();
        if probe == 0.0 {
            return None;
        }
        let pos = self.data.iter().position(|x| !x.is_finite())?;
        let n = self.grid.n;
        let k = pos % n;
        let j = (pos / n) % n;
        let c = (pos / (n * n)) % self.nch;
        let i = pos / (n * n * self.nch);
        Some((c, [i, j, k]))
    }
}

/// Centered first derivative of channel `c` along `axis` at `(i, j, k)`.
pub fn d1(f: &ChannelGrid, st: &Stencil, c: usize, axis: usize, i: usize, j: usize, k: usize) -> f64 {
    let g = &f.grid;
    let mut acc = 0.0;
    for (m, w) in st.d1.iter().enumerate() {
        let m = (m + 1) as isize;
        let (p, q) = shifted(g, axis, [i, j, k], m);
        acc += w * (f.at(c, p[0], p[1], p[2]) - f.at(c, q[0], q[1], q[2]));
    }
    acc
}

/// Centered second derivative along `axis`.
pub fn d2(f: &ChannelGrid, st: &Stencil, c: usize, axis: usize, i: usize, j: usize, k: usize) -> f64 {
    let g = &f.grid;
    let mut acc = st.d2[0] * f.at(c, i, j, k);
    for m in 1..st.d2.len() {
        let (p, q) = shifted(g, axis, [i, j, k], m as isize);
        acc += st.d2[m] * (f.at(c, p[0], p[1], p[2]) + f.at(c, q[0], q[1], q[2]));
    }
    acc
}

pub fn laplacian_at(f: &ChannelGrid, st: &Stencil, c: usize, i: usize, j: usize, k: usize) -> f64 {
    (0..3).map(|a| d2(f, st, c, a, i, j, k)).sum()
}

#[inline]
fn shifted(g: &Grid3, axis: usize, idx: [usize; 3], m: isize) -> ([usize; 3], [usize; 3]) {
    let mut p = idx;
    let mut q = idx;
    p[axis] = g.wrap(idx[axis] as isize + m);
    q[axis] = g.wrap(idx[axis] as isize - m);
    (p, q)
}

/// Apply `Δ_h` to every point of one channel, writing into `out` (one channel).
pub fn laplacian(f: &ChannelGrid, c: usize, st: &Stencil, out: &mut ChannelGrid) {
    assert_eq!(out.nch, 1);
    let g = f.grid;
    let n = g.n;
    let h = st.h;
    let wrap = g.wrap_table(h);
    out.data.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        for j in 0..n {
            let row0 = f.row(c, i, j);
            let o = &mut slab[j * n..(j + 1) * n];
            for k in 0..n {
                o[k] = 3.0 * st.d2[0] * row0[k];
            }
            for m in 1..=h {
                let w = st.d2[m];
                let (ip, im) = (wrap[i + h + m], wrap[i + h - m]);
                let (jp, jm) = (wrap[j + h + m], wrap[j + h - m]);
                let (xp, xm) = (f.row(c, ip, j), f.row(c, im, j));
                let (yp, ym) = (f.row(c, i, jp), f.row(c, i, jm));
                for k in 0..n {
                    let zp = row0[wrap[k + h + m]];
                    let zm = row0[wrap[k + h - m]];
                    o[k] += w * (xp[k] + xm[k] + yp[k] + ym[k] + zp + zm);
                }
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::StencilOrder;

    #[test]
    fn offsets_are_slab_major() {
        let g = Grid3::new(8, 0.5).unwrap();
        let f = ChannelGrid::zeros(g, 3);
        assert_eq!(f.offset(0, 1, 0, 0), 3 * 64);
        assert_eq!(f.offset(2, 0, 1, 3), 2 * 64 + 8 + 3);
        assert_eq!(g.coord(4), 0.0);
        assert_eq!(g.half_width(), 2.0);
    }

    #[test]
    fn laplacian_of_periodic_mode_converges() {
        // sin(2πx/L): Δ = -(2π/L)^2 sin
        let mut errs = vec![];
        for &n in &[16usize, 32] {
            let len = 8.0;
            let g = Grid3::new(n, len / n as f64).unwrap();
            let kx = 2.0 * std::f64::consts::PI / len;
            let mut f = ChannelGrid::zeros(g, 1);
            f.fill(0, |x| (kx * x[0]).sin() * (kx * x[2]).cos());
            let st = Stencil::new(StencilOrder::Fourth, g.dx);
            let mut out = ChannelGrid::zeros(g, 1);
            laplacian(&f, 0, &st, &mut out);
            let mut e: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let x = g.point(i, j, k);
                        let exact = -2.0 * kx * kx * (kx * x[0]).sin() * (kx * x[2]).cos();
                        e = e.max((out.at(0, i, j, k) - exact).abs());
                        let pointwise = laplacian_at(&f, &st, 0, i, j, k);
                        assert!((pointwise - out.at(0, i, j, k)).abs() < 1e-12);
                    }
                }
            }
            errs.push(e);
        }
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn non_finite_located() {
        let g = Grid3::new(8, 1.0).unwrap();
        let mut f = ChannelGrid::zeros(g, 2);
        f.set(1, 3, 4, 5, f64::NAN);
        assert_eq!(f.find_non_finite(), Some((1, [3, 4, 5])));
    }
}
