//! Compactly supported free data and the elliptic solves that make it
//! compatible with the Lorenz-type gauge constraints.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{dirac, Spinor, C64};
use crate::error::{Error, Result};
use crate::grid::{d1, laplacian, ChannelGrid, Grid3};
use crate::models::{chi_pm, CouplingParams, DpParams};
use crate::reduce::{slab_max, slab_sum, Kahan};
use crate::state::{ch, read_spinor, FieldState};
use crate::stencil::{Stencil, StencilOrder};

/// Radial profile of a bump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// `exp(1 - 1/(1 - ρ²))`, smooth with all derivatives vanishing at the edge.
    Bump,
    /// `(1 - ρ²)^4`.
    Polynomial,
    /// `exp(-4ρ²)(1 - ρ²)^3`.
    Gaussian,
    /// One everywhere; only meaningful on a periodic box with the free Dirac field.
    Constant,
}

impl Shape {
    /// Value at `ρ = r/radius`; zero for `ρ ≥ 1`, one at the centre.
    pub fn eval(self, rho: f64) -> f64 {
        if self == Shape::Constant {
            return 1.0;
        }
        if rho >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - rho * rho;
        match self {
            Shape::Bump => (1.0 - 1.0 / u).exp(),
            Shape::Polynomial => u.powi(4),
            Shape::Gaussian => (-4.0 * rho * rho).exp() * u.powi(3),
            Shape::Constant => unreachable!(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Bump => "bump",
            Shape::Polynomial => "polynomial",
            Shape::Gaussian => "gaussian",
            Shape::Constant => "constant",
        }
    }

    pub fn parse(s: &str) -> Option<Shape> {
        match s {
            "bump" => Some(Shape::Bump),
            "polynomial" => Some(Shape::Polynomial),
            "gaussian" => Some(Shape::Gaussian),
            "constant" => Some(Shape::Constant),
            _ => None,
        }
    }
}

/// One compactly supported bump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub amplitude: C64,
    pub center: [f64; 3],
    pub radius: f64,
    pub shape: Shape,
}

impl Profile {
    pub fn centered(amplitude: f64, radius: f64, shape: Shape) -> Self {
        Profile { amplitude: C64::new(amplitude, 0.0), center: [0.0; 3], radius, shape }
    }

    pub fn eval(&self, x: [f64; 3]) -> C64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        self.amplitude * self.shape.eval(r / self.radius)
    }

    fn reach(&self) -> f64 {
        let c = self.center;
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() + self.radius
    }
}

/// Free data: `A^j` and `∂_tA^j` (`j = 1..3`), `χ`, `∂_tχ`, `ψ`, each a sum of
/// bumps, all multiplied by `epsilon`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeDataSpec {
    pub epsilon: f64,
    pub r0: f64,
    pub a0: [Vec<Profile>; 3],
    pub a1: [Vec<Profile>; 3],
    pub chi0: Vec<Profile>,
    pub chi1: Vec<Profile>,
    pub psi0: [Vec<Profile>; 4],
}

impl FreeDataSpec {
    fn all_profiles(&self) -> impl Iterator<Item = &Profile> {
        self.a0
            .iter()
            .chain(self.a1.iter())
            .flatten()
            .chain(self.chi0.iter())
            .chain(self.chi1.iter())
            .chain(self.psi0.iter().flatten())
    }

    /// Every profile must vanish outside `r0`, and `r0 < t0 - 1`.
    pub fn validate(&self, t0: f64) -> Result<()> {
        if !(self.r0 > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Invalid(format!("support radius {} must be positive", self.r0)));
        }
        if !(self.r0 < t0 - 1.0) {
            return Err(Error::Invalid(format!("support radius {} must satisfy r0 < t0 - 1 = {}", self.r0, t0 - 1.0)));
        }
        for p in self.all_profiles() {
            if !(p.radius > 0.0) {
                return Err(Error::Invalid("profile radius must be positive".into()));
            }
            if p.reach() > self.r0 * (1.0 + 1e-12) {
                return Err(Error::Invalid(format!("profile reaches r = {} beyond r0 = {}", p.reach(), self.r0)));
            }
        }
        let real_fields = self.a0.iter().chain(self.a1.iter()).flatten();
        if real_fields.into_iter().any(|p| p.amplitude.im != 0.0) {
            return Err(Error::Invalid("gauge-field profiles must have real amplitudes".into()));
        }
        Ok(())
    }

    /// The same spec with every amplitude multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.epsilon *= alpha;
        out
    }
}

fn sum_profiles(ps: &[Profile], x: [f64; 3]) -> C64 {
    ps.iter().map(|p| p.eval(x)).sum()
}

/// Render the free data on a grid at time `t0`; `A^0` and `∂_tA^0` are left zero.
pub fn render_free_data(spec: &FreeDataSpec, grid: Grid3, t0: f64) -> FieldState {
    let mut st = FieldState::zeros(grid, t0);
    let e = spec.epsilon;
    let f = &mut st.fields;
    for j in 0..3 {
        if !spec.a0[j].is_empty() {
            f.fill(ch::A + 1 + j, |x| e * sum_profiles(&spec.a0[j], x).re);
        }
        if !spec.a1[j].is_empty() {
            f.fill(ch::ADOT + 1 + j, |x| e * sum_profiles(&spec.a1[j], x).re);
        }
    }
    if !spec.chi0.is_empty() {
        f.fill(ch::CHI, |x| e * sum_profiles(&spec.chi0, x).re);
        f.fill(ch::CHI + 1, |x| e * sum_profiles(&spec.chi0, x).im);
    }
    if !spec.chi1.is_empty() {
        f.fill(ch::CHIDOT, |x| e * sum_profiles(&spec.chi1, x).re);
        f.fill(ch::CHIDOT + 1, |x| e * sum_profiles(&spec.chi1, x).im);
    }
    for k in 0..4 {
        if !spec.psi0[k].is_empty() {
            f.fill(ch::psi_re(k), |x| e * sum_profiles(&spec.psi0[k], x).re);
            f.fill(ch::psi_im(k), |x| e * sum_profiles(&spec.psi0[k], x).im);
        }
    }
    st
}

/// Elliptic solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `‖La - f‖₂ / ‖f‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    /// `|A⁰| below this is set to zero after the solve.
    pub tail_cutoff: f64,
    pub order: StencilOrder,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 20_000, tail_cutoff: 1e-14, order: StencilOrder::Fourth }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64], plane: usize) -> f64 {
    slab_sum(a.len() / plane, |i| {
        let mut k = Kahan::new();
        for l in i * plane..(i + 1) * plane {
            k.add(a[l] * b[l]);
        }
        k.value()
    })
}

/// `out = -(Δ_h a - m2·a + c·a)`.
fn apply_neg(a: &ChannelGrid, m2: f64, c: Option<&ChannelGrid>, st: &Stencil, out: &mut ChannelGrid) {
    laplacian(a, 0, st, out);
    let src = &a.data;
    match c {
        Some(c) => out.data.par_iter_mut().enumerate().for_each(|(l, o)| *o = -*o + (m2 - c.data[l]) * src[l]),
        None => out.data.par_iter_mut().enumerate().for_each(|(l, o)| *o = -*o + m2 * src[l]),
    }
}

/// Solve `(Δ_h - m2 + c) a = f` on the periodic grid by conjugate gradients.
pub fn solve_helmholtz(
    f: &ChannelGrid,
    m2: f64,
    c: Option<&ChannelGrid>,
    opts: &SolverOptions,
) -> Result<(ChannelGrid, SolveReport)> {
    assert_eq!(f.nch, 1);
    let grid = f.grid;
    let plane = grid.n * grid.n;
    if !(m2 >= 0.0) {
        return Err(Error::Indefinite(format!("mass term {m2} is negative")));
    }
    if let Some(c) = c {
        let cmax = c.data.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        if !(cmax < m2) {
            return Err(Error::Indefinite(format!("max of variable coefficient {cmax} reaches m2 = {m2}")));
        }
    } else if m2 == 0.0 {
        return Err(Error::Indefinite("zero mass leaves the periodic Laplacian singular".into()));
    }
    let st = Stencil::new(opts.order, grid.dx);
    let mut x = ChannelGrid::zeros(grid, 1);
    let bnorm = dot(&f.data, &f.data, plane).sqrt();
    if bnorm == 0.0 {
        return Ok((x, SolveReport::default()));
    }
    // the negated operator is symmetric positive definite
    let b: Vec<f64> = f.data.iter().map(|v| -v).collect();
    let mut r = b.clone();
    let mut p = ChannelGrid { grid, nch: 1, data: r.clone() };
    let mut ap = ChannelGrid::zeros(grid, 1);
    let mut rs = dot(&r, &r, plane);
    let mut history = Vec::new();
    let mut it = 0;
    loop {
        let rel = rs.sqrt() / bnorm;
        history.push(rel);
        if rel < 0.25 * opts.tol {
            // confirm with the true residual, restart from it if rounding drifted
            apply_neg(&x, m2, c, &st, &mut ap);
            r.par_iter_mut().enumerate().for_each(|(l, v)| *v = b[l] - ap.data[l]);
            let true_rel = dot(&r, &r, plane).sqrt() / bnorm;
            if true_rel < opts.tol {
                return Ok((x, SolveReport { iterations: it, relative_residual: true_rel }));
            }
            p.data.copy_from_slice(&r);
            rs = dot(&r, &r, plane);
        }
        if it >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: rel, history });
        }
        apply_neg(&p, m2, c, &st, &mut ap);
        let pap = dot(&p.data, &ap.data, plane);
        if !(pap > 0.0) {
            return Err(Error::Indefinite(format!("non-positive curvature {pap} at iteration {it}")));
        }
        let alpha = rs / pap;
        x.data.par_iter_mut().zip(p.data.par_iter()).for_each(|(xv, pv)| *xv += alpha * pv);
        r.par_iter_mut().zip(ap.data.par_iter()).for_each(|(rv, av)| *rv -= alpha * av);
        let rs_new = dot(&r, &r, plane);
        let beta = rs_new / rs;
        p.data.par_iter_mut().zip(r.par_iter()).for_each(|(pv, rv)| *pv = rv + beta * *pv);
        rs = rs_new;
        it += 1;
    }
}

/// Outcome of a constraint assembly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DataReport {
    pub solve: SolveReport,
    /// Max-norm of the algebraic (first) constraint.
    pub first_constraint_max: f64,
    /// `‖elliptic residual‖₂ / ‖source‖₂` after tail truncation.
    pub second_constraint_rel: f64,
    /// Same measure before truncation.
    pub second_constraint_rel_untruncated: f64,
    /// Points of `A⁰` zeroed by the truncation.
    pub truncated_points: usize,
}

fn divergence(fields: &ChannelGrid, base: usize, st: &Stencil) -> ChannelGrid {
    let g = fields.grid;
    let n = g.n;
    let mut out = ChannelGrid::zeros(g, 1);
    out.data.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        for j in 0..n {
            for k in 0..n {
                slab[j * n + k] = (0..3).map(|a| d1(fields, st, base + a, a, i, j, k)).sum();
            }
        }
    });
    out
}

fn map_points<F>(grid: Grid3, f: F) -> ChannelGrid
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    let n = grid.n;
    let mut out = ChannelGrid::zeros(grid, 1);
    out.data.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        for j in 0..n {
            for k in 0..n {
                slab[j * n + k] = f(i, j, k);
            }
        }
    });
    out
}

fn rel_residual(a: &ChannelGrid, m2: f64, c: Option<&ChannelGrid>, f: &ChannelGrid, st: &Stencil) -> f64 {
    let plane = a.grid.n * a.grid.n;
    let mut la = ChannelGrid::zeros(a.grid, 1);
    apply_neg(a, m2, c, st, &mut la);
    let diff: Vec<f64> = la.data.iter().zip(&f.data).map(|(l, fv)| -l - fv).collect();
    let fnorm = dot(&f.data, &f.data, plane).sqrt();
    if fnorm == 0.0 {
        return dot(&diff, &diff, plane).sqrt();
    }
    dot(&diff, &diff, plane).sqrt() / fnorm
}

fn truncate_tail(a: &mut ChannelGrid, cutoff: f64) -> usize {
    let mut count = 0;
    for v in a.data.iter_mut() {
        if *v != 0.0 && v.abs() < cutoff {
            *v = 0.0;
            count += 1;
        }
    }
    count
}

/// Complete Dirac-Proca data: `b⁰ = -∂_j a^j`, then `(Δ - m²)a⁰ = -ψ₀*P_Lψ₀ - ∂_j b^j`.
pub fn make_lorenz_compatible_dp(state: &mut FieldState, p: &DpParams, opts: &SolverOptions) -> Result<DataReport> {
    let grid = state.grid();
    let st = Stencil::new(opts.order, grid.dx);
    let b0 = divergence(&state.fields, ch::A + 1, &st);
    let div_b = divergence(&state.fields, ch::ADOT + 1, &st);
    let pl = dirac().p_left;
    let fields = &state.fields;
    let src = map_points(grid, |i, j, k| {
        let psi = read_spinor(fields, ch::PSI, i, j, k);
        -pl.bilinear(&psi, &psi).re - div_b.at(0, i, j, k)
    });
    let (mut a0, solve) = solve_helmholtz(&src, p.m * p.m, None, opts)?;
    let untruncated = rel_residual(&a0, p.m * p.m, None, &src, &st);
    let truncated_points = truncate_tail(&mut a0, opts.tail_cutoff);
    let second = rel_residual(&a0, p.m * p.m, None, &src, &st);
    state.fields.set_channel(ch::A, &a0);
    let neg_b0 = ChannelGrid { grid, nch: 1, data: b0.data.iter().map(|v| -v).collect() };
    state.fields.set_channel(ch::ADOT, &neg_b0);
    // b⁰ + ∂_j a^j holds by construction; recompute to report it honestly
    let div_a = divergence(&state.fields, ch::A + 1, &st);
    let first = slab_max(grid.n, |i| {
        let n = grid.n;
        (0..n * n).map(|l| (state.fields.at(ch::ADOT, i, l / n, l % n) + div_a.data[i * n * n + l]).abs()).fold(0.0, f64::max)
    });
    Ok(DataReport {
        solve,
        first_constraint_max: first,
        second_constraint_rel: second,
        second_constraint_rel_untruncated: untruncated,
        truncated_points,
    })
}

/// Complete U(1) data:
/// `A⁰₁ = -∂_aA^a₀ - iq(φ₀*χ₀ - χ₀*φ₀)` and
/// `(Δ - m_q² - 2q²(χ₊₀ + |χ₀|²))A⁰₀ = -∂_jA^j₁ - iq(φ₀*χ₁ - χ₁*φ₀) - iq(χ₀*χ₁ - χ₁*χ₀) + qψ₀*ψ₀`.
pub fn make_lorenz_compatible_u1(
    state: &mut FieldState,
    p: &CouplingParams,
    opts: &SolverOptions,
) -> Result<DataReport> {
    let grid = state.grid();
    let st = Stencil::new(opts.order, grid.dx);
    let q = p.q;
    let div_a = divergence(&state.fields, ch::A + 1, &st);
    let div_b = divergence(&state.fields, ch::ADOT + 1, &st);
    let fields = &state.fields;
    let chi0 = |i, j, k| C64::new(fields.at(ch::CHI, i, j, k), fields.at(ch::CHI + 1, i, j, k));
    let chi1 = |i, j, k| C64::new(fields.at(ch::CHIDOT, i, j, k), fields.at(ch::CHIDOT + 1, i, j, k));
    // -iq(z - z̄) = 2q Im z
    let a01 = map_points(grid, |i, j, k| -div_a.at(0, i, j, k) + 2.0 * q * (p.phi0.conj() * chi0(i, j, k)).im);
    let coef = map_points(grid, |i, j, k| {
        let c0 = chi0(i, j, k);
        -2.0 * q * q * (chi_pm(c0, p).0.re + c0.norm_sqr())
    });
    let src = map_points(grid, |i, j, k| {
        let (c0, c1) = (chi0(i, j, k), chi1(i, j, k));
        let psi: Spinor = read_spinor(fields, ch::PSI, i, j, k);
        -div_b.at(0, i, j, k) + 2.0 * q * (p.phi0.conj() * c1).im + 2.0 * q * (c0.conj() * c1).im + q * psi.norm_sqr()
    });
    let m2 = p.m_q() * p.m_q();
    let (mut a00, solve) = solve_helmholtz(&src, m2, Some(&coef), opts)?;
    let untruncated = rel_residual(&a00, m2, Some(&coef), &src, &st);
    let truncated_points = truncate_tail(&mut a00, opts.tail_cutoff);
    let second = rel_residual(&a00, m2, Some(&coef), &src, &st);
    state.fields.set_channel(ch::A, &a00);
    state.fields.set_channel(ch::ADOT, &a01);
    let first = slab_max(grid.n, |i| {
        let n = grid.n;
        let mut m: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                let chi = state.chi_at(i, j, k);
                let r = state.fields.at(ch::ADOT, i, j, k) + div_a.at(0, i, j, k) - 2.0 * q * (p.phi0.conj() * chi).im;
                m = m.max(r.abs());
            }
        }
        m
    });
    Ok(DataReport {
        solve,
        first_constraint_max: first,
        second_constraint_rel: second,
        second_constraint_rel_untruncated: untruncated,
        truncated_points,
    })
}

const MAGIC: &[u8; 8] = b"HYPFLD01";

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    grid: Grid3,
    t: f64,
    nch: usize,
    params: serde_json::Value,
}

/// Write a grid snapshot: magic, header length, JSON header, little-endian data.
pub fn dump_state(path: &Path, state: &FieldState, params: serde_json::Value) -> Result<()> {
    let header = serde_json::to_vec(&DumpHeader { grid: state.grid(), t: state.t, nch: state.fields.nch, params })?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    for v in &state.fields.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a snapshot written by [`dump_state`], returning the state and parameter block.
pub fn restore_state(path: &Path) -> Result<(FieldState, serde_json::Value)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Invalid(format!("{} is not a snapshot file", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut header)?;
    let h: DumpHeader = serde_json::from_slice(&header)?;
    if h.nch != ch::N {
        return Err(Error::Invalid(format!("snapshot has {} channels, expected {}", h.nch, ch::N)));
    }
    let mut fields = ChannelGrid::zeros(h.grid, h.nch);
    let mut buf = [0u8; 8];
    for v in fields.data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok((FieldState { t: h.t, fields }, h.params))
}
