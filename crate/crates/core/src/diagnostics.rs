//! Constraint monitors, residuals of the transformed and second-order
//! equations, decay fits, slice probes for Sobolev and bootstrap quantities,
//! the boost commutator check and convergence orders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::clifford::{boost_matrix_with_sign, dirac, slash_apply, BoostSign, Matrix4C, Spinor, C64, I};
use crate::error::{Error, Result};
use crate::geometry::{ProbeInput, Reduction, SliceProbe};
use crate::grid::{d1, laplacian, ChannelGrid, Grid3};
use crate::history::{History, WINDOW};
use crate::jets::{Jet, SpinorJet};
use crate::models::{
    chi_pm, current, dp_sources, dq_psi, q_a, q_chi_plus, q_psi, q_tilde_a, q_tilde_chi_plus, scalar_density,
    CouplingParams, DpParams, PointState,
};
use crate::reduce::{slab_max, slab_sum, Kahan};
use crate::state::{ch, read_spinor, FieldState};
use crate::stencil::{fornberg, Stencil};

/// Max- and L²-norm of a grid quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub max: f64,
    pub l2: f64,
}

/// Per-slab `(max, Σv²)` partials of `K` quantities combined deterministically.
fn norms_multi<const K: usize, F>(grid: Grid3, f: F) -> [Norms; K]
where
    F: Fn(usize, usize, usize) -> [f64; K] + Sync,
{
    let n = grid.n;
    let parts: Vec<([f64; K], [f64; K])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut m = [0.0f64; K];
            let mut acc = [Kahan::new(); K];
            for j in 0..n {
                for l in 0..n {
                    let v = f(i, j, l);
                    for q in 0..K {
                        m[q] = if v[q].is_nan() || m[q].is_nan() { f64::NAN } else { m[q].max(v[q].abs()) };
                        acc[q].add(v[q] * v[q]);
                    }
                }
            }
            (m, acc.map(|a| a.value()))
        })
        .collect();
    std::array::from_fn(|q| {
        let max = parts.iter().fold(0.0f64, |a, p| if p.0[q].is_nan() || a.is_nan() { f64::NAN } else { a.max(p.0[q]) });
        let sums: Vec<f64> = parts.iter().map(|p| p.1[q]).collect();
        Norms { max, l2: (crate::reduce::pairwise(&sums) * grid.cell_volume()).sqrt() }
    })
}

fn norms_over<F>(grid: Grid3, f: F) -> Norms
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    norms_multi(grid, |i, j, k| [f(i, j, k)])[0]
}

/// Gauge residual norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintNorms {
    pub max: f64,
    pub l2: f64,
    /// Largest pointwise difference between the residuals built with the two
    /// equivalent coupling coefficients `q` and `m_q/(v√2)`.
    pub coefficient_mismatch: f64,
}

/// `∂_μA^μ + iq(φ₀*χ - χ*φ₀)`; for the Dirac-Proca system pass `p = None`
/// and the residual is the plain Lorenz condition.
pub fn constraint_monitor(state: &FieldState, p: Option<&CouplingParams>, st: &Stencil) -> ConstraintNorms {
    let f = &state.fields;
    let grid = f.grid;
    let div = |i, j, k| f.at(ch::ADOT, i, j, k) + (0..3).map(|a| d1(f, st, ch::A + 1 + a, a, i, j, k)).sum::<f64>();
    // -iq(z - z̄)... the residual term is iq(φ̄χ - χ̄φ) = -2q Im(φ̄χ)
    let coupling = |coef: f64, i, j, k| match p {
        Some(p) => -2.0 * coef * (p.phi0.conj() * state.chi_at(i, j, k)).im,
        None => 0.0,
    };
    let q = p.map(|p| p.q).unwrap_or(0.0);
    let alt = p.map(|p| p.m_q() / (p.v * 2f64.sqrt())).unwrap_or(0.0);
    let norms = norms_over(grid, |i, j, k| div(i, j, k) + coupling(q, i, j, k));
    let mismatch = slab_max(grid.n, |i| {
        let mut m: f64 = 0.0;
        for j in 0..grid.n {
            for k in 0..grid.n {
                m = m.max((coupling(q, i, j, k) - coupling(alt, i, j, k)).abs());
            }
        }
        m
    });
    ConstraintNorms { max: norms.max, l2: norms.l2, coefficient_mismatch: mismatch }
}

/// Max- and L²-norms of `|A|`, `|χ|`, `|ψ|` over the flat slice inside the cone `r < t - 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupNorms {
    pub t: f64,
    pub a: f64,
    pub chi: f64,
    pub psi: f64,
    pub a_l2: f64,
    pub chi_l2: f64,
    pub psi_l2: f64,
}

pub fn sup_norms(state: &FieldState) -> SupNorms {
    let g = state.grid();
    let t = state.t;
    let r = norms_multi(g, |i, j, k| {
        let x = g.point(i, j, k);
        if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() >= t - 1.0 {
            return [0.0; 3];
        }
        let a: f64 = state.a_at(i, j, k).iter().map(|v| v * v).sum();
        [a.sqrt(), state.chi_at(i, j, k).norm(), state.psi_at(i, j, k).norm()]
    });
    SupNorms { t, a: r[0].max, chi: r[1].max, psi: r[2].max, a_l2: r[0].l2, chi_l2: r[1].l2, psi_l2: r[2].l2 }
}

/// Least-squares power law `value ≈ C t^slope`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub name: String,
    pub slope: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub half_width: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Samples in the window dropped for being non-positive.
    pub excluded: usize,
}

/// Fit `log(value)` against `log(t)` over `window`.
pub fn decay_fit(name: &str, series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for &(t, v) in series.iter().filter(|(t, _)| *t >= window.0 && *t <= window.1) {
        if v > 0.0 && v.is_finite() && t > 0.0 {
            xs.push(t.ln());
            ys.push(v.ln());
        } else {
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("{name}: {excluded} non-positive samples excluded from the fit");
    }
    let n = xs.len();
    if n < 6 {
        return Err(Error::Invalid(format!("{name}: fit window {window:?} holds {n} usable samples, need at least 6")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Invalid(format!("{name}: fit window has no spread in t")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, nf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN);
    if !slope.is_finite() {
        return Err(Error::Invalid(format!("{name}: slope is not finite")));
    }
    Ok(DecayFit { name: name.to_string(), slope, half_width: tq * se, intercept, window, samples: n, excluded })
}

/// Residual norms of the transformed equations at one time level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TildeResidual {
    pub t: f64,
    /// `(□ - m_q²)Ã^ν - Q_Ã^ν`, per `ν`.
    pub a_tilde: [Norms; 4],
    /// `(□ - m_λ²)χ̃₊ - Q_χ̃₊`.
    pub chi_tilde: Norms,
    /// Untransformed `(□ - m_q²)A^ν - Q_A^ν`.
    pub a_plain: [Norms; 4],
    /// Untransformed `(□ - m_λ²)χ₊ - Q_χ₊`.
    pub chi_plain: Norms,
}

impl TildeResidual {
    pub fn a_tilde_max(&self) -> f64 {
        self.a_tilde.iter().map(|n| n.max).fold(0.0, f64::max)
    }
}

/// Options for [`residual_tilde`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TildeOptions {
    /// Constant added to every `Ã^ν` and `χ̃₊` before the operator is applied;
    /// used to confirm the monitor responds to a known defect.
    pub defect: f64,
}

/// The history level at time `t` and the weights of `∂_t` there.
fn centre(h: &History, t: f64) -> Result<(usize, Vec<f64>, usize)> {
    let tw = h.time_weights(t, WINDOW, 1)?;
    let m = (0..h.len())
        .find(|&m| (h.level(m).t - t).abs() <= 1e-9 * (1.0 + t.abs()))
        .ok_or_else(|| Error::Invalid(format!("no history level at t={t}")))?;
    Ok((m, tw.w[1].clone(), tw.first))
}

/// Point state at a stored level; time derivatives come from the stored rate channels.
pub fn point_state(f: &ChannelGrid, st: &Stencil, i: usize, j: usize, k: usize) -> PointState {
    let mut ps = PointState {
        a: std::array::from_fn(|nu| f.at(ch::A + nu, i, j, k)),
        chi: C64::new(f.at(ch::CHI, i, j, k), f.at(ch::CHI + 1, i, j, k)),
        psi: read_spinor(f, ch::PSI, i, j, k),
        ..Default::default()
    };
    for nu in 0..4 {
        ps.da[0][nu] = f.at(ch::ADOT + nu, i, j, k);
    }
    ps.dchi[0] = C64::new(f.at(ch::CHIDOT, i, j, k), f.at(ch::CHIDOT + 1, i, j, k));
    if f.nch > ch::PSI_T {
        ps.dpsi[0] = read_spinor(f, ch::PSI_T, i, j, k);
    }
    for a in 0..3 {
        for nu in 0..4 {
            ps.da[a + 1][nu] = d1(f, st, ch::A + nu, a, i, j, k);
        }
        ps.dchi[a + 1] = C64::new(d1(f, st, ch::CHI, a, i, j, k), d1(f, st, ch::CHI + 1, a, i, j, k));
        ps.dpsi[a + 1] = Spinor(std::array::from_fn(|c| {
            C64::new(d1(f, st, ch::psi_re(c), a, i, j, k), d1(f, st, ch::psi_im(c), a, i, j, k))
        }));
    }
    ps
}

/// `∂_t` of a stored rate channel at a point, from the level window.
fn rate_dt(h: &History, w: &[f64], first: usize, c: usize, i: usize, j: usize, k: usize) -> f64 {
    w.iter().enumerate().map(|(m, wm)| wm * h.level(first + m).data.at(c, i, j, k)).sum()
}

fn spinor_dt(h: &History, w: &[f64], first: usize, base: usize, i: usize, j: usize, k: usize) -> Spinor {
    Spinor(std::array::from_fn(|c| {
        C64::new(rate_dt(h, w, first, base + 2 * c, i, j, k), rate_dt(h, w, first, base + 2 * c + 1, i, j, k))
    }))
}

fn grid_of<F>(grid: Grid3, f: F) -> ChannelGrid
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

fn lap(f: &ChannelGrid, c: usize, st: &Stencil) -> ChannelGrid {
    let mut out = ChannelGrid::zeros(f.grid, 1);
    laplacian(f, c, st, &mut out);
    out
}

/// Residuals of `(□ - m_q²)Ã^ν = Q_Ã^ν` and `(□ - m_λ²)χ̃₊ = Q_χ̃₊` at the
/// stored level `t`; second time derivatives come from the history.
pub fn residual_tilde(h: &History, t: f64, p: &CouplingParams, opts: &TildeOptions) -> Result<TildeResidual> {
    let (m, w, first) = centre(h, t)?;
    let f = h.level(m).data.clone();
    if f.nch < ch::N_SNAPSHOT {
        return Err(Error::Invalid("history levels lack the spinor rate channels".into()));
    }
    let grid = f.grid;
    let st = Stencil::new(h.stencils().order, grid.dx);
    let mq2 = p.m_q() * p.m_q();
    let ml2 = p.m_lambda() * p.m_lambda();
    let mg = p.m_g();
    let kq = p.q / mq2;
    let kc = 2.0 * mg / ml2;
    let d = dirac();
    let psi_at = |i, j, k| read_spinor(&f, ch::PSI, i, j, k);
    let lap_a: Vec<ChannelGrid> = (0..4).map(|nu| lap(&f, ch::A + nu, &st)).collect();
    let lap_j: Vec<ChannelGrid> =
        (0..4).map(|nu| lap(&grid_of(grid, |i, j, k| current(&psi_at(i, j, k), nu)), 0, &st)).collect();
    let lap_chi = [lap(&f, ch::CHI, &st), lap(&f, ch::CHI + 1, &st)];
    let lap_k = lap(&grid_of(grid, |i, j, k| scalar_density(&psi_at(i, j, k))), 0, &st);

    let eval = |i: usize, j: usize, k: usize| -> [f64; 10] {
        let ps = point_state(&f, &st, i, j, k);
        let psi_tt = spinor_dt(h, &w, first, ch::PSI_T, i, j, k);
        let psi_t = ps.dpsi[0];
        let mut at = [0.0; 4];
        let mut ap = [0.0; 4];
        for nu in 0..4 {
            let mat = d.g0g[nu];
            let a_tt = rate_dt(h, &w, first, ch::ADOT + nu, i, j, k);
            let j_tt = 2.0 * mat.bilinear(&ps.psi, &psi_tt).re + 2.0 * mat.bilinear(&psi_t, &psi_t).re;
            let lap_an = lap_a[nu].at(0, i, j, k);
            let tilde = ps.a[nu] + kq * current(&ps.psi, nu) + opts.defect;
            let box_tilde = -(a_tt + kq * j_tt) + lap_an + kq * lap_j[nu].at(0, i, j, k);
            at[nu] = box_tilde - mq2 * tilde - q_tilde_a(&ps, nu, p).unwrap_or(f64::NAN);
            ap[nu] = -a_tt + lap_an - mq2 * ps.a[nu] - q_a(&ps, nu, p);
        }
        let chi_tt = C64::new(rate_dt(h, &w, first, ch::CHIDOT, i, j, k), rate_dt(h, &w, first, ch::CHIDOT + 1, i, j, k));
        let lap_c = C64::new(lap_chi[0].at(0, i, j, k), lap_chi[1].at(0, i, j, k));
        let plus = |z: C64| p.phi0.conj() * z + z.conj() * p.phi0;
        let k_tt = 2.0 * d.set.gamma[0].bilinear(&ps.psi, &psi_tt).re + 2.0 * d.set.gamma[0].bilinear(&psi_t, &psi_t).re;
        let chi_p = chi_pm(ps.chi, p).0;
        let tilde = chi_p - kc * scalar_density(&ps.psi) + opts.defect;
        let box_p = -plus(chi_tt) + plus(lap_c);
        let box_tilde = box_p + kc * k_tt - kc * lap_k.at(0, i, j, k);
        let ct = box_tilde - ml2 * tilde - q_tilde_chi_plus(&ps, p).unwrap_or(C64::new(f64::NAN, 0.0));
        let cp = box_p - ml2 * chi_p - q_chi_plus(&ps, p);
        [at[0], at[1], at[2], at[3], ct.norm(), ap[0], ap[1], ap[2], ap[3], cp.norm()]
    };
    let r = norms_multi(grid, eval);
    let a_tilde = [r[0], r[1], r[2], r[3]];
    let chi_tilde = r[4];
    let a_plain = [r[5], r[6], r[7], r[8]];
    let chi_plain = r[9];
    Ok(TildeResidual { t, a_tilde, chi_tilde, a_plain, chi_plain })
}

/// The spinor source `F` of `-iγ^μ∂_μψ + Mψ = F` and its derivatives `∂_μF`.
#[derive(Clone, Copy, Debug)]
pub enum DiracCoupling<'a> {
    Free,
    U1(&'a CouplingParams),
    DiracProca(&'a DpParams),
}

fn source_and_derivs(ps: &PointState, c: DiracCoupling) -> (Spinor, [Spinor; 4]) {
    match c {
        DiracCoupling::Free => (Spinor::zero(), [Spinor::zero(); 4]),
        DiracCoupling::U1(p) => {
            let dq = dq_psi(ps, p);
            (q_psi(ps, p) * -1.0, dq.map(|s| s * -1.0))
        }
        DiracCoupling::DiracProca(_) => {
            let pl = dirac().p_left;
            let left = pl * ps.psi;
            let f = dp_sources(ps).1;
            let df = std::array::from_fn(|mu| -slash_apply(ps.da[mu], &left) - slash_apply(ps.a, &(pl * ps.dpsi[mu])));
            (f, df)
        }
    }
}

/// Residual of `□ψ - M²ψ = -MF - iγ^ν∂_νF` at the stored level `t`.
pub fn second_order_residual(h: &History, t: f64, big_m: f64, coupling: DiracCoupling) -> Result<Norms> {
    let (m, w, first) = centre(h, t)?;
    let f = h.level(m).data.clone();
    if f.nch < ch::N_SNAPSHOT {
        return Err(Error::Invalid("history levels lack the spinor rate channels".into()));
    }
    let grid = f.grid;
    let st = Stencil::new(h.stencils().order, grid.dx);
    let laps: Vec<ChannelGrid> = (0..8).map(|c| lap(&f, ch::PSI + c, &st)).collect();
    let g = &dirac().set.gamma;
    Ok(norms_over(grid, |i, j, k| {
        let ps = point_state(&f, &st, i, j, k);
        let psi_tt = spinor_dt(h, &w, first, ch::PSI_T, i, j, k);
        let lap_psi = Spinor(std::array::from_fn(|c| C64::new(laps[2 * c].at(0, i, j, k), laps[2 * c + 1].at(0, i, j, k))));
        let (src, dsrc) = source_and_derivs(&ps, coupling);
        let mut r = lap_psi - psi_tt - ps.psi * (big_m * big_m) + src * big_m;
        for nu in 0..4 {
            r += (g[nu] * dsrc[nu]) * I;
        }
        r.norm()
    }))
}

/// Sobolev-type ratio `sup t^{3/2}|u| / Σ_{|J|≤2} ‖L^J u‖_{L²_f(H_s)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevRatio {
    pub s: f64,
    pub sup: f64,
    pub denominator: f64,
    /// `None` when the denominator vanishes.
    pub ratio: Option<f64>,
}

/// Boost sequences with at most two factors, rightmost applied first.
fn boost_words() -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for a in 1..=3 {
        out.push(vec![a]);
    }
    for a in 1..=3 {
        for b in 1..=3 {
            out.push(vec![a, b]);
        }
    }
    out
}

/// Slice probe for the Sobolev ratio of the map formed by slice channels.
pub struct SobolevProbe {
    pub name: String,
    pub channels: Vec<usize>,
}

impl SobolevProbe {
    pub fn ratio(values: &[f64], s: f64) -> SobolevRatio {
        let sup = values[0];
        let denominator: f64 = values[1..].iter().map(|v| v.sqrt()).sum();
        let ratio = if denominator > 0.0 { Some(sup / denominator) } else { None };
        SobolevRatio { s, sup, denominator, ratio }
    }
}

impl SliceProbe for SobolevProbe {
    fn name(&self) -> &str {
        &self.name
    }
    fn channels(&self) -> Vec<usize> {
        self.channels.clone()
    }
    fn jet_order(&self) -> usize {
        2
    }
    fn reductions(&self) -> Vec<Reduction> {
        let mut r = vec![Reduction::Max];
        r.extend(std::iter::repeat(Reduction::Integral).take(boost_words().len()));
        r
    }
    fn eval(&self, input: &ProbeInput, out: &mut [f64]) {
        let p = input.point.coords();
        let norm2: f64 = input.jets.iter().map(|j| j.value() * j.value()).sum();
        out[0] = input.point.t.powf(1.5) * norm2.sqrt();
        for (w, word) in boost_words().iter().enumerate() {
            out[1 + w] = input
                .jets
                .iter()
                .map(|j| {
                    let mut jet = *j;
                    for &a in word.iter().rev() {
                        jet = jet.boost(a, p).expect("jet order covers two boosts");
                    }
                    jet.value() * jet.value()
                })
                .sum();
        }
    }
}

/// One factor of a bootstrap operator `∂^I L^J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    D(usize),
    L(usize),
}

/// All `∂^I L^J` with `|I| + |J| ≤ 2`, rightmost applied first; boosts act before derivatives.
fn bootstrap_words() -> Vec<Vec<Op>> {
    let mut out = vec![vec![]];
    for mu in 0..4 {
        out.push(vec![Op::D(mu)]);
    }
    for a in 1..=3 {
        out.push(vec![Op::L(a)]);
    }
    for mu in 0..4 {
        for nu in mu..4 {
            out.push(vec![Op::D(mu), Op::D(nu)]);
        }
    }
    for mu in 0..4 {
        for a in 1..=3 {
            out.push(vec![Op::D(mu), Op::L(a)]);
        }
    }
    for a in 1..=3 {
        for b in 1..=3 {
            out.push(vec![Op::L(a), Op::L(b)]);
        }
    }
    out
}

/// Low-order analogues of the bootstrap energies `E_m(s, ∂^I L^J u)`.
pub struct BootstrapProbe {
    pub name: String,
    pub channels: Vec<usize>,
    pub mass: f64,
    /// Treat the eight channels as a spinor and use the modified boosts.
    pub spinor: bool,
}

/// Bootstrap energies reduced per derivative order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub s: f64,
    pub name: String,
    /// `Σ E_m(s, Z u)^{1/2}` over operators `Z` of order 0, 1, 2.
    pub per_order: [f64; 3],
    pub max_single: f64,
}

impl BootstrapRow {
    /// Reduce the per-operator integrals of a [`BootstrapProbe`].
    pub fn from_values(name: &str, values: &[f64], s: f64) -> BootstrapRow {
        let mut per_order = [0.0; 3];
        let mut max_single: f64 = 0.0;
        for (word, v) in bootstrap_words().iter().zip(values) {
            let e = v.max(0.0).sqrt();
            per_order[word.len()] += e;
            max_single = max_single.max(e);
        }
        BootstrapRow { s, name: name.to_string(), per_order, max_single }
    }
}

impl BootstrapProbe {

    fn apply_scalar(word: &[Op], jet: &Jet, p: [f64; 4]) -> Jet {
        let mut j = *jet;
        for op in word.iter().rev() {
            j = match op {
                Op::D(mu) => j.deriv(*mu),
                Op::L(a) => j.boost(*a, p),
            }
            .expect("jet order covers two operators");
        }
        j
    }

    fn apply_spinor(word: &[Op], jet: &SpinorJet, p: [f64; 4]) -> SpinorJet {
        let mut j = *jet;
        for op in word.iter().rev() {
            j = match op {
                Op::D(mu) => j.deriv(*mu),
                Op::L(a) => j.boost_with(*a, p, &crate::clifford::modified_boost_matrix(*a).unwrap()),
            }
            .expect("jet order covers two operators");
        }
        j
    }
}

fn energy_density_from_jets(jets: &[Jet], p: [f64; 4], m: f64) -> f64 {
    let t = p[0];
    let mut v = 0.0;
    for j in jets {
        let g = [j.c[1], j.c[2], j.c[3], j.c[4]];
        v += g.iter().map(|x| x * x).sum::<f64>() + m * m * j.c[0] * j.c[0];
        v += 2.0 * (0..3).map(|a| p[a + 1] / t * g[0] * g[a + 1]).sum::<f64>();
    }
    v
}

impl SliceProbe for BootstrapProbe {
    fn name(&self) -> &str {
        &self.name
    }
    fn channels(&self) -> Vec<usize> {
        self.channels.clone()
    }
    fn jet_order(&self) -> usize {
        3
    }
    fn reductions(&self) -> Vec<Reduction> {
        vec![Reduction::Integral; bootstrap_words().len()]
    }
    fn eval(&self, input: &ProbeInput, out: &mut [f64]) {
        let p = input.point.coords();
        for (w, word) in bootstrap_words().iter().enumerate() {
            out[w] = if self.spinor {
                let z = Self::apply_spinor(word, &input.spinor(0), p);
                energy_density_from_jets(&z.0, p, self.mass)
            } else {
                let z: Vec<Jet> = input.jets.iter().map(|j| Self::apply_scalar(word, j, p)).collect();
                energy_density_from_jets(&z, p, self.mass)
            };
        }
    }
}

/// Least-squares growth coefficient `c` in `value ≈ a + c log s`.
pub fn log_growth(series: &[(f64, f64)]) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|(s, _)| s.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = series.iter().map(|(_, v)| v).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(series).map(|(x, (_, v))| (x - mx) * (v - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Outcome of the boost commutator check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    /// Max-norm of `[L_a + B_a, iγ^ν∂_ν]ψ` with `B_a = -½γ⁰γ^a`, per direction.
    pub lowered: [f64; 3],
    /// Same with the opposite sign `B_a = +½γ⁰γ^a`.
    pub raised: [f64; 3],
    /// Max-norm of `[L_a, iγ^ν∂_ν]ψ`.
    pub unmodified: [f64; 3],
    /// Max difference between the unmodified commutator and `-i[B_a, γ^ν]∂_νψ`.
    pub unmodified_vs_matrix: [f64; 3],
    /// Sign whose commutator is smaller in every direction, if any.
    pub adopted: Option<String>,
}

type Stack = Vec<ChannelGrid>;

/// Time-derivative weights of a centred five-level stencil.
fn dt_weights(dt: f64) -> Vec<f64> {
    let nodes: Vec<f64> = (-2..=2).map(|m| m as f64 * dt).collect();
    fornberg(0.0, &nodes, 1)[1].clone()
}

fn spinor_of(f: &ChannelGrid, i: usize, j: usize, k: usize) -> Spinor {
    read_spinor(f, 0, i, j, k)
}

fn write_spinor(out: &mut ChannelGrid, i: usize, j: usize, k: usize, v: &Spinor) {
    for c in 0..4 {
        out.set(2 * c, i, j, k, v.0[c].re);
        out.set(2 * c + 1, i, j, k, v.0[c].im);
    }
}

/// Apply a first-order operator `Σ_μ M_μ(t, x) ∂_μ + B` level by level,
/// shrinking the stack by two levels at each end.
fn apply_first_order<F>(stack: &Stack, times: &[f64], st: &Stencil, w: &[f64], op: F) -> (Stack, Vec<f64>)
where
    F: Fn(f64, [f64; 3], &Spinor, &[Spinor; 4]) -> Spinor + Sync,
{
    let grid = stack[0].grid;
    let n = grid.n;
    let mut out = Vec::new();
    for m in 2..stack.len() - 2 {
        let f = &stack[m];
        let mut g = ChannelGrid::zeros(grid, 8);
        let rows: Vec<Vec<(usize, usize, usize, Spinor)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut v = Vec::with_capacity(n * n);
                for j in 0..n {
                    for k in 0..n {
                        let psi = spinor_of(f, i, j, k);
                        let mut d = [Spinor::zero(); 4];
                        d[0] = Spinor(std::array::from_fn(|c| {
                            let re: f64 = (0..5).map(|l| w[l] * stack[m + l - 2].at(2 * c, i, j, k)).sum();
                            let im: f64 = (0..5).map(|l| w[l] * stack[m + l - 2].at(2 * c + 1, i, j, k)).sum();
                            C64::new(re, im)
                        }));
                        for a in 0..3 {
                            d[a + 1] = Spinor(std::array::from_fn(|c| {
                                C64::new(d1(f, st, 2 * c, a, i, j, k), d1(f, st, 2 * c + 1, a, i, j, k))
                            }));
                        }
                        v.push((i, j, k, op(times[m], grid.point(i, j, k), &psi, &d)));
                    }
                }
                v
            })
            .collect();
        for row in rows {
            for (i, j, k, s) in row {
                write_spinor(&mut g, i, j, k, &s);
            }
        }
        out.push(g);
    }
    (out, times[2..times.len() - 2].to_vec())
}

fn dirac_op(_t: f64, _x: [f64; 3], _psi: &Spinor, d: &[Spinor; 4]) -> Spinor {
    let g = &dirac().set.gamma;
    let mut acc = Spinor::zero();
    for nu in 0..4 {
        acc += (g[nu] * d[nu]) * I;
    }
    acc
}

fn boost_op(a: usize, b: Option<Matrix4C>) -> impl Fn(f64, [f64; 3], &Spinor, &[Spinor; 4]) -> Spinor + Sync {
    move |t, x, psi, d| {
        let mut v = d[0] * x[a - 1] + d[a] * t;
        if let Some(b) = b {
            v += b * *psi;
        }
        v
    }
}

/// Evaluate `[L_a + B_a, iγ^ν∂_ν]` on a smooth spinor field by nested
/// differencing over nine time levels centred on `t_c`.
pub fn boost_commutator_check<F>(field: F, grid: Grid3, t_c: f64, dt: f64, st: &Stencil) -> Result<CommutatorReport>
where
    F: Fn(f64, [f64; 3]) -> Spinor + Sync,
{
    let times: Vec<f64> = (-4..=4).map(|m| t_c + m as f64 * dt).collect();
    let stack: Stack = times
        .iter()
        .map(|&t| {
            let mut g = ChannelGrid::zeros(grid, 8);
            for c in 0..4 {
                g.fill(2 * c, |x| field(t, x).0[c].re);
                g.fill(2 * c + 1, |x| field(t, x).0[c].im);
            }
            g
        })
        .collect();
    let w = dt_weights(dt);
    let (dpsi, dtimes) = apply_first_order(&stack, &times, st, &w, dirac_op);
    let centre_norm = |a: &ChannelGrid, b: &ChannelGrid| {
        let diff = ChannelGrid { grid, nch: 8, data: a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect() };
        slab_max(grid.n, |i| {
            let mut m: f64 = 0.0;
            for j in 0..grid.n {
                for k in 0..grid.n {
                    m = m.max(spinor_of(&diff, i, j, k).norm());
                }
            }
            m
        })
    };
    // [L̂, D]ψ = L̂(Dψ) - D(L̂ψ) at the centre level
    let commutator = |b: Option<Matrix4C>, a: usize| -> ChannelGrid {
        let (ld, _) = apply_first_order(&dpsi, &dtimes, st, &w, boost_op(a, b));
        let (lpsi, ltimes) = apply_first_order(&stack, &times, st, &w, boost_op(a, b));
        let (dl, _) = apply_first_order(&lpsi, &ltimes, st, &w, dirac_op);
        ChannelGrid { grid, nch: 8, data: ld[0].data.iter().zip(&dl[0].data).map(|(x, y)| x - y).collect() }
    };
    let zero = ChannelGrid::zeros(grid, 8);
    let mut rep = CommutatorReport {
        lowered: [0.0; 3],
        raised: [0.0; 3],
        unmodified: [0.0; 3],
        unmodified_vs_matrix: [0.0; 3],
        adopted: None,
    };
    let g = dirac().set.gamma;
    for a in 1..=3 {
        let lowered = boost_matrix_with_sign(a, BoostSign::Lowered)?;
        rep.lowered[a - 1] = centre_norm(&commutator(Some(lowered), a), &zero);
        rep.raised[a - 1] = centre_norm(&commutator(Some(boost_matrix_with_sign(a, BoostSign::Raised)?), a), &zero);
        let unmod = commutator(None, a);
        rep.unmodified[a - 1] = centre_norm(&unmod, &zero);
        let cs: [Matrix4C; 4] = std::array::from_fn(|nu| crate::clifford::commutator(&lowered, &g[nu]));
        let (pred, _) = apply_first_order(&stack, &times, st, &w, move |_, _, _, d| {
            let mut acc = Spinor::zero();
            for nu in 0..4 {
                acc -= (cs[nu] * d[nu]) * I;
            }
            acc
        });
        rep.unmodified_vs_matrix[a - 1] = centre_norm(&unmod, &pred[2]);
    }
    let lower_wins = (0..3).all(|a| rep.lowered[a] < rep.raised[a]);
    let raise_wins = (0..3).all(|a| rep.raised[a] < rep.lowered[a]);
    rep.adopted = if lower_wins {
        Some("-1/2 g0 g^a".into())
    } else if raise_wins {
        Some("+1/2 g0 g^a".into())
    } else {
        None
    };
    Ok(rep)
}

/// Richardson orders from errors at successively halved resolutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOrder {
    pub slopes: Vec<f64>,
    pub mean: f64,
    pub monotone: bool,
    pub raw: Vec<f64>,
}

/// `log₂(e_k / e_{k+1})` for errors at `dx, dx/2, dx/4, ...`.
pub fn convergence_order(errors: &[f64]) -> Result<ConvergenceOrder> {
    if errors.len() < 2 {
        return Err(Error::Invalid("convergence order needs at least two resolutions".into()));
    }
    let slopes: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    if !monotone {
        log::warn!("errors are not monotone under refinement: {errors:?}");
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    Ok(ConvergenceOrder { slopes, mean, monotone, raw: errors.to_vec() })
}

/// Richardson order from an observable at three resolutions with unknown exact value.
pub fn convergence_order_from_values(v: [f64; 3]) -> f64 {
    ((v[0] - v[1]) / (v[1] - v[2])).abs().log2()
}

/// `∫ψ*ψ` as a grid sum (used by drift checks).
pub fn spinor_mass(state: &FieldState) -> f64 {
    crate::energetics::e_flat(state)
}

/// Max of `|x|` restricted to grid points within `radius` of the origin.
pub fn max_outside(state: &FieldState, radius: f64) -> f64 {
    let g = state.grid();
    slab_max(g.n, |i| {
        let mut m: f64 = 0.0;
        for j in 0..g.n {
            for k in 0..g.n {
                let x = g.point(i, j, k);
                if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() > radius {
                    for c in 0..ch::N {
                        m = m.max(state.fields.at(c, i, j, k).abs());
                    }
                }
            }
        }
        m
    })
}

/// Sum of a per-point quantity times the cell volume.
pub fn grid_integral<F>(grid: Grid3, f: F) -> f64
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    slab_sum(grid.n, |i| {
        let mut k = Kahan::new();
        for j in 0..grid.n {
            for l in 0..grid.n {
                k.add(f(i, j, l));
            }
        }
        k.value()
    }) * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::StencilOrder;

    #[test]
    fn pure_power_law_fit_is_exact() {
        let series: Vec<(f64, f64)> = (0..50).map(|k| 6.0 + k as f64 * 0.4).map(|t| (t, t.powf(-1.5))).collect();
        let fit = decay_fit("pure", &series, (6.0, 24.0)).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!(fit.half_width < 1e-10);
    }

    #[test]
    fn oscillatory_and_log_corrected_fits() {
        let ts: Vec<f64> = (0..=900).map(|k| 10.0 + 0.1 * k as f64).collect();
        let osc: Vec<(f64, f64)> = ts.iter().map(|&t| (t, (2.0 + t.sin()) / t)).collect();
        let fit = decay_fit("osc", &osc, (10.0, 100.0)).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.1, "{}", fit.slope);
        let lg: Vec<(f64, f64)> = ts.iter().map(|&t| (t, t.ln() / t)).collect();
        let fit = decay_fit("log", &lg, (10.0, 100.0)).unwrap();
        // local log-log slope is 1/ln t - 1, monotone in t
        let (lo, hi) = (1.0 / 100f64.ln() - 1.0, 1.0 / 10f64.ln() - 1.0);
        assert!(fit.slope > lo && fit.slope < hi, "{}", fit.slope);
        assert!(fit.slope > -1.0);
    }

    #[test]
    fn fit_needs_six_positive_samples() {
        let mut s: Vec<(f64, f64)> = (0..6).map(|k| (10.0 + k as f64, 1.0 / (10.0 + k as f64))).collect();
        assert!(decay_fit("ok", &s, (0.0, 100.0)).is_ok());
        s[2].1 = 0.0;
        assert!(decay_fit("short", &s, (0.0, 100.0)).is_err());
    }

    #[test]
    fn convergence_examples() {
        let e = 0.3;
        assert!((convergence_order(&[e, e / 4.0, e / 16.0]).unwrap().mean - 2.0).abs() < 1e-12);
        assert!((convergence_order(&[e, e / 16.0, e / 256.0]).unwrap().mean - 4.0).abs() < 1e-12);
        assert!(!convergence_order(&[1.0, 2.0]).unwrap().monotone);
    }

    #[test]
    fn zero_state_has_zero_constraint() {
        let g = Grid3::new(8, 0.5).unwrap();
        let s = FieldState::zeros(g, 2.0);
        let st = Stencil::new(StencilOrder::Fourth, g.dx);
        let p = CouplingParams::new(1.0, 0.1, 0.5, 1.0).unwrap();
        let c = constraint_monitor(&s, Some(&p), &st);
        assert_eq!((c.max, c.l2, c.coefficient_mismatch), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_spinor_commutators_vanish() {
        let g = Grid3::new(8, 0.5).unwrap();
        let st = Stencil::new(StencilOrder::Fourth, g.dx);
        let psi = Spinor::from_real([1.0, -0.5, 0.25, 2.0]);
        let rep = boost_commutator_check(|_, _| psi, g, 3.0, 0.1, &st).unwrap();
        for a in 0..3 {
            assert!(rep.lowered[a] < 1e-12 && rep.raised[a] < 1e-12 && rep.unmodified[a] < 1e-12);
        }
    }

    fn wave_packet(t: f64, x: [f64; 3]) -> Spinor {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let env = (-r2 - (t - 3.0) * (t - 3.0)).exp();
        let ph = C64::new(0.0, 0.7 * x[0] - 0.4 * x[2] - 0.9 * t).exp() * env;
        Spinor::new(ph, ph * C64::new(0.3, -0.2), ph * x[1], ph * C64::new(-0.5, 0.1) * t)
    }

    #[test]
    fn lowered_boost_commutes_with_the_dirac_operator() {
        let st = |g: Grid3| Stencil::new(StencilOrder::Fourth, g.dx);
        let coarse = Grid3::new(24, 0.4).unwrap();
        let fine = Grid3::new(48, 0.2).unwrap();
        let rc = boost_commutator_check(wave_packet, coarse, 3.0, 0.16, &st(coarse)).unwrap();
        let rf = boost_commutator_check(wave_packet, fine, 3.0, 0.08, &st(fine)).unwrap();
        for a in 0..3 {
            assert!(rf.lowered[a] < 1e-2 * rf.raised[a], "{rf:?}");
            assert!((rc.lowered[a] / rf.lowered[a]).log2() > 3.5, "{rc:?} {rf:?}");
            assert!(rf.unmodified_vs_matrix[a] < 1e-2 * rf.unmodified[a], "{rf:?}");
        }
        assert_eq!(rf.adopted.as_deref(), Some("-1/2 g0 g^a"));
    }

    #[test]
    fn bootstrap_words_count() {
        assert_eq!(bootstrap_words().len(), 1 + 7 + 10 + 12 + 9);
        assert_eq!(boost_words().len(), 13);
    }
}
