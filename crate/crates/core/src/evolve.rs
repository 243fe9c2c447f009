//! Method-of-lines right-hand sides and the RK4 stepper.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::clifford::{alpha_apply, Spinor, C64, I};
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, Grid3};
use crate::models::{chi_pm, dp_sources, q_a_all, q_chi, q_psi, CouplingParams, DpParams, PointState};
use crate::state::{ch, ActiveChannels, FieldState};
use crate::stencil::{Stencil, StencilOrder};

/// Additive per-point forcing of the first-order system, indexed like [`ch`].
pub type ChannelForcing = Arc<dyn Fn(f64, [f64; 3], &mut [f64; ch::N]) + Send + Sync>;

/// Source `F(t, x)` of `-iγ^μ∂_μψ + Mψ = F`.
pub type SpinorSource = Arc<dyn Fn(f64, [f64; 3]) -> Spinor + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// `-iγ^μ∂_μψ + Mψ = 0`.
    FreeDirac { mass: f64 },
    /// `(□ - m²)χ = 0` on the scalar channels.
    FreeKg { mass: f64 },
    DiracProca(DpParams),
    U1(CouplingParams),
}

/// A model together with an optional external forcing.
#[derive(Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub forcing: Option<ChannelForcing>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model").field("kind", &self.kind).field("forced", &self.forcing.is_some()).finish()
    }
}

impl Model {
    pub fn new(kind: ModelKind) -> Self {
        Model { kind, forcing: None }
    }

    pub fn free_dirac(mass: f64) -> Self {
        Self::new(ModelKind::FreeDirac { mass })
    }

    pub fn free_kg(mass: f64) -> Self {
        Self::new(ModelKind::FreeKg { mass })
    }

    pub fn dirac_proca(p: DpParams) -> Self {
        Self::new(ModelKind::DiracProca(p))
    }

    pub fn u1(p: CouplingParams) -> Self {
        Self::new(ModelKind::U1(p))
    }

    pub fn with_forcing(mut self, f: ChannelForcing) -> Self {
        self.forcing = Some(f);
        self
    }

    /// Drive the Dirac equation as `-iγ^μ∂_μψ + Mψ = F`, i.e. `∂_tψ += iγ⁰F`.
    pub fn with_dirac_source(self, source: SpinorSource) -> Self {
        self.with_forcing(Arc::new(move |t, x, out: &mut [f64; ch::N]| {
            let f = source(t, x);
            let g = [f.0[0], f.0[1], -f.0[2], -f.0[3]];
            for k in 0..4 {
                let z = I * g[k];
                out[ch::psi_re(k)] += z.re;
                out[ch::psi_im(k)] += z.im;
            }
        }))
    }

    pub fn active(&self) -> ActiveChannels {
        match self.kind {
            ModelKind::FreeDirac { .. } => ActiveChannels { gauge: false, scalar: false, spinor: true },
            ModelKind::FreeKg { .. } => ActiveChannels { gauge: false, scalar: true, spinor: false },
            ModelKind::DiracProca(_) => ActiveChannels { gauge: true, scalar: false, spinor: true },
            ModelKind::U1(_) => ActiveChannels { gauge: true, scalar: true, spinor: true },
        }
    }

    /// Mass in the first-order Dirac equation.
    pub fn dirac_mass(&self) -> f64 {
        match &self.kind {
            ModelKind::FreeDirac { mass } => *mass,
            ModelKind::FreeKg { .. } => 0.0,
            ModelKind::DiracProca(p) => p.big_m,
            ModelKind::U1(p) => p.m_g(),
        }
    }
}

/// `dt = courant · dx`.
pub fn cfl_dt(grid: &Grid3, courant: f64) -> Result<f64> {
    if !(courant > 0.0 && courant <= 1.0) {
        return Err(Error::Invalid(format!("courant factor {courant} outside (0, 1]")));
    }
    Ok(courant * grid.dx)
}

pub const DEFAULT_COURANT: f64 = 0.25;

struct RowScratch {
    gx: Vec<Vec<f64>>,
    gy: Vec<Vec<f64>>,
    gz: Vec<Vec<f64>>,
    lap: Vec<Vec<f64>>,
}

impl RowScratch {
    fn new(n: usize) -> Self {
        let mk = || (0..ch::N).map(|_| vec![0.0; n]).collect::<Vec<_>>();
        RowScratch { gx: mk(), gy: mk(), gz: mk(), lap: mk() }
    }
}

/// Gradient rows of channel `c` along the row `(i, j, ·)`.
fn grad_row(y: &ChannelGrid, st: &Stencil, wrap: &[usize], c: usize, i: usize, j: usize, s: &mut RowScratch) {
    let n = y.grid.n;
    let h = st.h;
    let row0 = y.row(c, i, j);
    let (gx, gy, gz) = (&mut s.gx[c], &mut s.gy[c], &mut s.gz[c]);
    gx.iter_mut().for_each(|v| *v = 0.0);
    gy.iter_mut().for_each(|v| *v = 0.0);
    for (mm, &w) in st.d1.iter().enumerate() {
        let m = mm + 1;
        let (xp, xm) = (y.row(c, wrap[i + h + m], j), y.row(c, wrap[i + h - m], j));
        let (yp, ym) = (y.row(c, i, wrap[j + h + m]), y.row(c, i, wrap[j + h - m]));
        for k in 0..n {
            gx[k] += w * (xp[k] - xm[k]);
            gy[k] += w * (yp[k] - ym[k]);
        }
    }
    for k in 0..n {
        let mut acc = 0.0;
        for (mm, &w) in st.d1.iter().enumerate() {
            let m = mm + 1;
            acc += w * (row0[wrap[k + h + m]] - row0[wrap[k + h - m]]);
        }
        gz[k] = acc;
    }
}

fn lap_row(y: &ChannelGrid, st: &Stencil, wrap: &[usize], c: usize, i: usize, j: usize, s: &mut RowScratch) {
    let n = y.grid.n;
    let h = st.h;
    let row0 = y.row(c, i, j);
    let out = &mut s.lap[c];
    for k in 0..n {
        out[k] = 3.0 * st.d2[0] * row0[k];
    }
    for m in 1..=h {
        let w = st.d2[m];
        let (xp, xm) = (y.row(c, wrap[i + h + m], j), y.row(c, wrap[i + h - m], j));
        let (yp, ym) = (y.row(c, i, wrap[j + h + m]), y.row(c, i, wrap[j + h - m]));
        for k in 0..n {
            out[k] += w * (xp[k] + xm[k] + yp[k] + ym[k] + row0[wrap[k + h + m]] + row0[wrap[k + h - m]]);
        }
    }
}

#[inline]
fn spinor_from(vals: &[f64; ch::N], base: usize) -> Spinor {
    Spinor(std::array::from_fn(|c| C64::new(vals[base + 2 * c], vals[base + 2 * c + 1])))
}

#[inline]
fn spinor_grad(s: &RowScratch, k: usize) -> [Spinor; 3] {
    let pick = |g: &Vec<Vec<f64>>| Spinor(std::array::from_fn(|c| C64::new(g[ch::psi_re(c)][k], g[ch::psi_im(c)][k])));
    [pick(&s.gx), pick(&s.gy), pick(&s.gz)]
}

/// `-γ⁰γ^j ∂_jψ - iγ⁰ X`.
#[inline]
fn dirac_dt(dpsi: &[Spinor; 3], x: &Spinor) -> Spinor {
    let mut out = -(alpha_apply(1, &dpsi[0]) + alpha_apply(2, &dpsi[1]) + alpha_apply(3, &dpsi[2]));
    let g = Spinor([x.0[0], x.0[1], -x.0[2], -x.0[3]]);
    out -= g * I;
    out
}

#[inline]
fn put_spinor(out: &mut [f64; ch::N], base: usize, s: &Spinor) {
    for k in 0..4 {
        out[base + 2 * k] = s.0[k].re;
        out[base + 2 * k + 1] = s.0[k].im;
    }
}

/// Time derivative of the first-order system: `out = F(t, y)`.
pub fn rhs(model: &Model, st: &Stencil, y: &ChannelGrid, t: f64, out: &mut ChannelGrid) {
    assert_eq!(y.nch, ch::N);
    assert_eq!(out.nch, ch::N);
    let grid = y.grid;
    let n = grid.n;
    let wrap = grid.wrap_table(st.h);
    let active = model.active();
    let plane = n * n;

    out.data.par_chunks_mut(ch::N * plane).enumerate().for_each_init(
        || RowScratch::new(n),
        |scratch, (i, slab)| {
            for j in 0..n {
                if active.spinor {
                    for c in ch::PSI..ch::PSI + 8 {
                        grad_row(y, st, &wrap, c, i, j, scratch);
                    }
                }
                if active.gauge {
                    for nu in 0..4 {
                        lap_row(y, st, &wrap, ch::A + nu, i, j, scratch);
                    }
                }
                if active.scalar {
                    for c in ch::CHI..ch::CHI + 2 {
                        lap_row(y, st, &wrap, c, i, j, scratch);
                        if matches!(model.kind, ModelKind::U1(_)) {
                            grad_row(y, st, &wrap, c, i, j, scratch);
                        }
                    }
                }
                let rows: Vec<&[f64]> = (0..ch::N).map(|c| y.row(c, i, j)).collect();
                for k in 0..n {
                    let mut vals = [0.0; ch::N];
                    for (c, v) in vals.iter_mut().enumerate() {
                        if active.contains(c) {
                            *v = rows[c][k];
                        }
                    }
                    let mut o = [0.0; ch::N];
                    point_rhs(model, &vals, scratch, k, &mut o);
                    if let Some(f) = &model.forcing {
                        f(t, grid.point(i, j, k), &mut o);
                    }
                    for (c, v) in o.iter().enumerate() {
                        slab[(c * n + j) * n + k] = *v;
                    }
                }
            }
        },
    );
}

fn point_rhs(model: &Model, v: &[f64; ch::N], s: &RowScratch, k: usize, o: &mut [f64; ch::N]) {
    match &model.kind {
        ModelKind::FreeDirac { mass } => {
            let psi = spinor_from(v, ch::PSI);
            let dt = dirac_dt(&spinor_grad(s, k), &(psi * *mass));
            put_spinor(o, ch::PSI, &dt);
        }
        ModelKind::FreeKg { mass } => {
            let m2 = mass * mass;
            for r in 0..2 {
                o[ch::CHI + r] = v[ch::CHIDOT + r];
                o[ch::CHIDOT + r] = s.lap[ch::CHI + r][k] - m2 * v[ch::CHI + r];
            }
        }
        ModelKind::DiracProca(p) => {
            let psi = spinor_from(v, ch::PSI);
            let a = [v[0], v[1], v[2], v[3]];
            let pst = PointState { a, psi, ..Default::default() };
            let (a_src, psi_src) = dp_sources(&pst);
            let dt = dirac_dt(&spinor_grad(s, k), &(psi * p.big_m - psi_src));
            put_spinor(o, ch::PSI, &dt);
            let m2 = p.m * p.m;
            for nu in 0..4 {
                o[ch::A + nu] = v[ch::ADOT + nu];
                o[ch::ADOT + nu] = s.lap[ch::A + nu][k] - m2 * a[nu] - a_src[nu];
            }
        }
        ModelKind::U1(p) => {
            let psi = spinor_from(v, ch::PSI);
            let a = [v[0], v[1], v[2], v[3]];
            let chi = C64::new(v[ch::CHI], v[ch::CHI + 1]);
            let dchi = [
                C64::new(v[ch::CHIDOT], v[ch::CHIDOT + 1]),
                C64::new(s.gx[ch::CHI][k], s.gx[ch::CHI + 1][k]),
                C64::new(s.gy[ch::CHI][k], s.gy[ch::CHI + 1][k]),
                C64::new(s.gz[ch::CHI][k], s.gz[ch::CHI + 1][k]),
            ];
            let pst = PointState { a, chi, dchi, psi, ..Default::default() };
            let qa = q_a_all(&pst, p);
            let qc = q_chi(&pst, p);
            let qp = q_psi(&pst, p);
            let dt = dirac_dt(&spinor_grad(s, k), &(psi * p.m_g() + qp));
            put_spinor(o, ch::PSI, &dt);
            let mq2 = p.m_q() * p.m_q();
            for nu in 0..4 {
                o[ch::A + nu] = v[ch::ADOT + nu];
                o[ch::ADOT + nu] = s.lap[ch::A + nu][k] - mq2 * a[nu] - qa[nu];
            }
            let v2 = p.v * p.v;
            let (chi_p, chi_m) = chi_pm(chi, p);
            let lin = p.phi0 * chi_m * (mq2 / (2.0 * v2)) + p.phi0 * chi_p * (p.m_lambda().powi(2) / (2.0 * v2));
            let lap = C64::new(s.lap[ch::CHI][k], s.lap[ch::CHI + 1][k]);
            let acc = lap - lin - qc;
            o[ch::CHI] = v[ch::CHIDOT];
            o[ch::CHI + 1] = v[ch::CHIDOT + 1];
            o[ch::CHIDOT] = acc.re;
            o[ch::CHIDOT + 1] = acc.im;
        }
    }
}

/// Classical four-stage Runge-Kutta over the first-order system, with the
/// three work registers it needs kept between steps.
pub struct Stepper {
    pub model: Model,
    pub stencil: Stencil,
    k: ChannelGrid,
    stage: ChannelGrid,
    acc: ChannelGrid,
}

impl Stepper {
    pub fn new(model: Model, order: StencilOrder, grid: Grid3) -> Self {
        Stepper {
            model,
            stencil: Stencil::new(order, grid.dx),
            k: ChannelGrid::zeros(grid, ch::N),
            stage: ChannelGrid::zeros(grid, ch::N),
            acc: ChannelGrid::zeros(grid, ch::N),
        }
    }

    /// Evaluate the right-hand side at `y` into a fresh grid.
    pub fn eval(&self, y: &FieldState) -> ChannelGrid {
        let mut out = ChannelGrid::zeros(y.grid(), ch::N);
        rhs(&self.model, &self.stencil, &y.fields, y.t, &mut out);
        out
    }

    pub fn step(&mut self, y: &mut FieldState, dt: f64) -> Result<()> {
        self.step_with(y, dt, |_, _| {})
    }

    /// One step; `on_k1` sees the state and its first-stage derivative before
    /// the state is advanced.
    pub fn step_with<F>(&mut self, y: &mut FieldState, dt: f64, on_k1: F) -> Result<()>
    where
        F: FnOnce(&FieldState, &ChannelGrid),
    {
        let t = y.t;
        let (m, st) = (&self.model, &self.stencil);
        rhs(m, st, &y.fields, t, &mut self.k);
        on_k1(y, &self.k);
        combine(&mut self.acc.data, &mut self.stage.data, &y.fields.data, &self.k.data, dt / 6.0, dt / 2.0, false);
        rhs(m, st, &self.stage, t + 0.5 * dt, &mut self.k);
        combine(&mut self.acc.data, &mut self.stage.data, &y.fields.data, &self.k.data, dt / 3.0, dt / 2.0, true);
        rhs(m, st, &self.stage, t + 0.5 * dt, &mut self.k);
        combine(&mut self.acc.data, &mut self.stage.data, &y.fields.data, &self.k.data, dt / 3.0, dt, true);
        rhs(m, st, &self.stage, t + dt, &mut self.k);
        let (acc, k) = (&self.acc.data, &self.k.data);
        y.fields.data.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, out)| {
            let base = ci * CHUNK;
            for (l, o) in out.iter_mut().enumerate() {
                *o = acc[base + l] + dt / 6.0 * k[base + l];
            }
        });
        y.t = t + dt;
        if let Some((c, index)) = y.fields.find_non_finite() {
            return Err(Error::NonFinite { what: format!("channel {c}"), index, t: y.t });
        }
        Ok(())
    }
}

const CHUNK: usize = 1 << 14;

/// `acc (= or +=) y + a·k` on the first stage, `acc += a·k` afterwards; `stage = y + b·k`.
fn combine(acc: &mut [f64], stage: &mut [f64], y: &[f64], k: &[f64], a: f64, b: f64, accumulate: bool) {
    acc.par_chunks_mut(CHUNK).zip(stage.par_chunks_mut(CHUNK)).enumerate().for_each(|(ci, (ac, sc))| {
        let base = ci * CHUNK;
        for l in 0..ac.len() {
            let (yy, kk) = (y[base + l], k[base + l]);
            if accumulate {
                ac[l] += a * kk;
            } else {
                ac[l] = yy + a * kk;
            }
            sc[l] = yy + b * kk;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfl_examples() {
        let g = Grid3::new(16, 0.5).unwrap();
        assert_eq!(cfl_dt(&g, DEFAULT_COURANT).unwrap(), 0.125);
        let h = Grid3::new(16, 0.25).unwrap();
        assert_eq!(cfl_dt(&h, 0.25).unwrap(), 0.0625);
        assert!(cfl_dt(&g, 1.5).is_err());
        assert!(cfl_dt(&g, 0.0).is_err());
    }

    #[test]
    fn zero_state_stays_zero_bitwise() {
        let g = Grid3::new(12, 0.5).unwrap();
        let p = CouplingParams::new(1.0, 0.3, 0.25, 1.0).unwrap();
        let mut y = FieldState::zeros(g, 2.0);
        let mut s = Stepper::new(Model::u1(p), StencilOrder::Fourth, g);
        for _ in 0..3 {
            s.step(&mut y, 0.1).unwrap();
        }
        assert!(y.fields.data.iter().all(|x| x.to_bits() == 0));
    }

    #[test]
    fn massless_constant_spinor_is_static() {
        let g = Grid3::new(8, 0.5).unwrap();
        let mut y = FieldState::zeros(g, 0.0);
        let psi = Spinor::from_real([0.3, -0.2, 0.5, 1.0]);
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    y.set_psi(i, j, k, &psi);
                }
            }
        }
        let s = Stepper::new(Model::free_dirac(0.0), StencilOrder::Fourth, g);
        let k = s.eval(&y);
        assert!(k.data.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn nan_is_reported_with_location() {
        let g = Grid3::new(8, 0.5).unwrap();
        let mut y = FieldState::zeros(g, 0.0);
        y.fields.set(ch::psi_re(0), 1, 2, 3, f64::NAN);
        let mut s = Stepper::new(Model::free_dirac(1.0), StencilOrder::Second, g);
        match s.step(&mut y, 0.1) {
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
