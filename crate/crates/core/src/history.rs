//! Ring buffer of recent constant-`t` snapshots, with interpolation and
//! differentiation in time at arbitrary instants inside the buffered window.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, Grid3};
use crate::jets::{alpha, jet_len, spatial_alpha, spatial_len, spatial_slot, Jet, SpinorJet, SPATIAL_LEN};
use crate::stencil::{coefficients, fornberg, StencilOrder};

/// Levels used for every time interpolation.
pub const WINDOW: usize = 6;

/// One stored time level.
#[derive(Clone, Debug)]
pub struct Level {
    pub t: f64,
    pub data: Arc<ChannelGrid>,
}

/// Time weights for one target instant: `w[d][m]` multiplies level `first + m`
/// for the `d`-th time derivative.
#[derive(Clone, Debug)]
pub struct TimeWeights {
    pub tau: f64,
    pub first: usize,
    pub w: Vec<Vec<f64>>,
}

/// Mixed spatial derivative stencils as sparse 1D tables.
#[derive(Clone, Debug)]
pub struct SpatialStencils {
    pub order: StencilOrder,
    /// `taps[d]` = nonzero `(offset, weight / dx^d)` pairs of the `d`-th derivative.
    pub taps: [Vec<(isize, f64)>; 4],
}

impl SpatialStencils {
    pub fn new(order: StencilOrder, dx: f64) -> Self {
        let taps = std::array::from_fn(|d| {
            let c = coefficients(d, order);
            let h = (c.len() / 2) as isize;
            c.iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(m, w)| (m as isize - h, w / dx.powi(d as i32)))
                .collect()
        });
        SpatialStencils { order, taps }
    }

    /// Widest reach of any stencil up to derivative order `order`.
    pub fn reach(&self, order: usize) -> usize {
        (0..=order).map(|d| self.order.half_width(d.max(1))).max().unwrap_or(0)
    }

    /// `∂^β f` at a grid point for every spatial `|β| ≤ order`.
    pub fn derivs(&self, f: &ChannelGrid, c: usize, idx: [usize; 3], order: usize) -> [f64; SPATIAL_LEN] {
        let g = &f.grid;
        let mut out = [0.0; SPATIAL_LEN];
        for (l, o) in out.iter_mut().enumerate().take(spatial_len(order)) {
            let b = spatial_alpha(l);
            let mut acc = 0.0;
            for &(oi, wi) in &self.taps[b[0] as usize] {
                let i = g.wrap(idx[0] as isize + oi);
                for &(oj, wj) in &self.taps[b[1] as usize] {
                    let j = g.wrap(idx[1] as isize + oj);
                    let row = f.row(c, i, j);
                    let wij = wi * wj;
                    for &(ok, wk) in &self.taps[b[2] as usize] {
                        acc += wij * wk * row[g.wrap(idx[2] as isize + ok)];
                    }
                }
            }
            *o = acc;
        }
        out
    }
}

/// Ring of the most recent levels.
#[derive(Clone, Debug)]
pub struct History {
    capacity: usize,
    levels: VecDeque<Level>,
    dropped: bool,
    complete: bool,
    stencils: SpatialStencils,
}

impl History {
    pub fn new(capacity: usize, grid: Grid3, order: StencilOrder) -> Self {
        History {
            capacity: capacity.max(1),
            levels: VecDeque::new(),
            dropped: false,
            complete: false,
            stencils: SpatialStencils::new(order, grid.dx),
        }
    }

    pub fn stencils(&self) -> &SpatialStencils {
        &self.stencils
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, m: usize) -> &Level {
        &self.levels[m]
    }

    pub fn latest(&self) -> Option<&Level> {
        self.levels.back()
    }

    /// Times of the oldest and newest buffered level.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.levels.front()?.t, self.levels.back()?.t))
    }

    /// Append a level; times must increase.
    pub fn push(&mut self, t: f64, data: Arc<ChannelGrid>) -> Result<()> {
        if let Some(last) = self.levels.back() {
            if !(t > last.t) {
                return Err(Error::Invalid(format!("history level at t={t} does not follow t={}", last.t)));
            }
        }
        if self.complete {
            return Err(Error::Invalid("history already marked complete".into()));
        }
        if self.levels.len() == self.capacity {
            self.levels.pop_front();
            self.dropped = true;
        }
        self.levels.push_back(Level { t, data });
        Ok(())
    }

    /// No further levels will arrive; windows may become one-sided at the end.
    pub fn finish(&mut self) {
        self.complete = true;
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    fn stale(&self, tau: f64, width: usize) -> Error {
        let (lo, hi) = self.span().unwrap_or((f64::NAN, f64::NAN));
        let dt = if self.levels.len() > 1 { (hi - lo) / (self.levels.len() - 1) as f64 } else { 0.0 };
        let half = (width / 2) as f64 * dt;
        Error::Stale { need_lo: tau - half, need_hi: tau + half, have_lo: lo, have_hi: hi }
    }

    /// Weights of the `width` levels around `tau` for derivatives up to `max_deriv`.
    ///
    /// The window is centred on `tau`; it is allowed to be one-sided only at the
    /// very first level of a run and after [`History::finish`].
    pub fn time_weights(&self, tau: f64, width: usize, max_deriv: usize) -> Result<TimeWeights> {
        let n = self.levels.len();
        if n == 0 || !tau.is_finite() {
            return Err(self.stale(tau, width));
        }
        let (lo, hi) = self.span().unwrap();
        let tol = 1e-9 * (1.0 + hi.abs());
        if tau < lo - tol || tau > hi + tol {
            return Err(self.stale(tau, width));
        }
        let below = self.levels.partition_point(|l| l.t <= tau + tol) as isize;
        let mut first = below - (width / 2) as isize;
        let width = if n < width {
            if !(self.complete && !self.dropped) {
                return Err(self.stale(tau, width));
            }
            first = 0;
            n
        } else {
            if first < 0 {
                if self.dropped {
                    return Err(self.stale(tau, width));
                }
                first = 0;
            }
            if first as usize + width > n {
                if !self.complete {
                    return Err(self.stale(tau, width));
                }
                first = (n - width) as isize;
            }
            width
        };
        let first = first as usize;
        let nodes: Vec<f64> = (first..first + width).map(|m| self.levels[m].t).collect();
        let w = fornberg(tau, &nodes, max_deriv);
        Ok(TimeWeights { tau, first, w })
    }

    /// Whether a centred window around `tau` is available now.
    pub fn covers(&self, tau: f64) -> bool {
        self.time_weights(tau, WINDOW, 0).is_ok()
    }

    /// Jet of channel `c` at grid point `idx` and time `tw.tau`.
    ///
    /// When `dt_channel` holds `∂_t` of the field, time derivatives of order
    /// `k ≥ 1` use its `(k-1)`-th time derivative instead of differencing values.
    pub fn jet(&self, tw: &TimeWeights, c: usize, dt_channel: Option<usize>, idx: [usize; 3], order: usize) -> Jet {
        let st = &self.stencils;
        let width = tw.w[0].len();
        let mut vals = [[0.0; SPATIAL_LEN]; crate::history::WINDOW];
        let mut dts = [[0.0; SPATIAL_LEN]; crate::history::WINDOW];
        for m in 0..width {
            let f = &self.levels[tw.first + m].data;
            vals[m] = st.derivs(f, c, idx, order);
            if let (Some(dc), true) = (dt_channel, order > 0) {
                dts[m] = st.derivs(f, dc, idx, order - 1);
            }
        }
        let mut jet = Jet::zero(order);
        for l in 0..jet_len(order) {
            let a = alpha(l);
            let s = spatial_slot([a[1], a[2], a[3]]).unwrap();
            let k = a[0] as usize;
            let (src, d) = match (k, dt_channel) {
                (0, _) => (&vals, 0),
                (_, Some(_)) => (&dts, k - 1),
                (_, None) => (&vals, k),
            };
            jet.c[l] = match tw.w.get(d) {
                Some(wd) => (0..width).map(|m| wd[m] * src[m][s]).sum(),
                None => 0.0,
            };
        }
        jet
    }

    /// Jets of a spinor stored as re/im pairs from `base`, with `∂_tψ` from `dt_base`.
    pub fn spinor_jet(&self, tw: &TimeWeights, base: usize, dt_base: Option<usize>, idx: [usize; 3], order: usize) -> SpinorJet {
        SpinorJet(std::array::from_fn(|l| self.jet(tw, base + l, dt_base.map(|d| d + l), idx, order)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(grid: Grid3, t: f64, f: impl Fn(f64, [f64; 3]) -> f64 + Sync) -> Arc<ChannelGrid> {
        let mut g = ChannelGrid::zeros(grid, 1);
        g.fill(0, |x| f(t, x));
        Arc::new(g)
    }

    #[test]
    fn windows_respect_run_edges() {
        let grid = Grid3::new(8, 0.5).unwrap();
        let mut h = History::new(WINDOW, grid, StencilOrder::Fourth);
        for k in 0..10 {
            h.push(k as f64 * 0.1, level(grid, 0.0, |_, _| 0.0)).unwrap();
        }
        // levels 0.4..0.9 retained
        assert!(h.time_weights(0.65, WINDOW, 1).is_ok());
        assert!(matches!(h.time_weights(0.85, WINDOW, 1), Err(Error::Stale { .. })));
        assert!(matches!(h.time_weights(0.35, WINDOW, 1), Err(Error::Stale { .. })));
        h.finish();
        assert_eq!(h.time_weights(0.85, WINDOW, 1).unwrap().first, 0);
        assert!(h.push(2.0, level(grid, 0.0, |_, _| 0.0)).is_err());
    }

    #[test]
    fn single_level_interpolates_only_its_own_time() {
        let grid = Grid3::new(8, 0.5).unwrap();
        let mut h = History::new(WINDOW, grid, StencilOrder::Fourth);
        h.push(2.0, level(grid, 2.0, |_, x| x[0])).unwrap();
        assert!(h.time_weights(2.0, WINDOW, 0).is_err());
        h.finish();
        let tw = h.time_weights(2.0, WINDOW, 0).unwrap();
        assert_eq!(h.jet(&tw, 0, None, [5, 4, 4], 0).value(), 0.5);
        assert!(h.time_weights(2.1, WINDOW, 0).is_err());
    }

    #[test]
    fn jet_of_polynomial_is_exact() {
        // cubic in every variable: 4th-order stencils and 6-level weights are exact
        let grid = Grid3::new(16, 0.25).unwrap();
        let f = |t: f64, x: [f64; 3]| t * t * x[0] + x[1] * x[2] - t.powi(3) + x[0].powi(3) - 0.5 * x[2] * x[2] * t;
        let mut h = History::new(WINDOW, grid, StencilOrder::Fourth);
        for k in 0..WINDOW {
            h.push(1.0 + 0.1 * k as f64, level(grid, 1.0 + 0.1 * k as f64, f)).unwrap();
        }
        let tau = 1.23;
        let tw = h.time_weights(tau, WINDOW, 3).unwrap();
        let idx = [9, 7, 10];
        let x = grid.point(idx[0], idx[1], idx[2]);
        let jet = h.jet(&tw, 0, None, idx, 3);
        assert!((jet.value() - f(tau, x)).abs() < 1e-12);
        assert!((jet.get([1, 0, 0, 0]) - (2.0 * tau * x[0] - 3.0 * tau * tau - 0.5 * x[2] * x[2])).abs() < 1e-10);
        assert!((jet.get([0, 1, 0, 0]) - (tau * tau + 3.0 * x[0] * x[0])).abs() < 1e-10);
        assert!((jet.get([0, 0, 1, 1]) - 1.0).abs() < 1e-10);
        assert!((jet.get([2, 1, 0, 0]) - 2.0).abs() < 1e-8);
        assert!((jet.get([3, 0, 0, 0]) + 6.0).abs() < 1e-7);
        assert!((jet.get([0, 3, 0, 0]) - 6.0).abs() < 1e-9);
        assert!((jet.get([1, 0, 0, 2]) + 1.0).abs() < 1e-8);
    }

    #[test]
    fn reach_covers_third_derivatives() {
        let st = SpatialStencils::new(StencilOrder::Fourth, 1.0);
        assert_eq!(st.reach(1), 2);
        assert_eq!(st.reach(3), 3);
    }
}
