//! Hyperboloidal foliation of the cone interior: points, frames, normals,
//! slices built from an evolution history, and flat-measure slice integrals.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{modified_boost_matrix, Spinor, C64};
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::history::{History, TimeWeights, WINDOW};
use crate::jets::{Jet, SpinorJet};
use crate::models::PointState;
use crate::reduce::{pairwise, Kahan};
use crate::state::ch;

/// A point of the interior cone `r < t - 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConePoint {
    pub t: f64,
    pub x: [f64; 3],
}

impl ConePoint {
    pub fn new(t: f64, x: [f64; 3]) -> Result<Self> {
        let p = ConePoint { t, x };
        let r = p.r();
        if !(r < t - 1.0) {
            return Err(Error::OutsideCone { t, r });
        }
        Ok(p)
    }

    /// The point of `H_s` above `x`.
    pub fn on_slice(s: f64, x: [f64; 3]) -> Result<Self> {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        ConePoint::new((s * s + r2).sqrt(), x)
    }

    pub fn r(&self) -> f64 {
        (self.x[0] * self.x[0] + self.x[1] * self.x[1] + self.x[2] * self.x[2]).sqrt()
    }

    pub fn s(&self) -> f64 {
        let r = self.r();
        ((self.t - r) * (self.t + r)).sqrt()
    }

    /// `x / t`.
    pub fn ratio(&self) -> [f64; 3] {
        self.x.map(|v| v / self.t)
    }

    /// `s / t`.
    pub fn sigma(&self) -> f64 {
        self.s() / self.t
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.t, self.x[0], self.x[1], self.x[2]]
    }
}

/// Transition matrices between the Cartesian and semi-hyperboloidal frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMatrices {
    pub phi: [[f64; 4]; 4],
    pub psi: [[f64; 4]; 4],
}

impl FrameMatrices {
    /// `phi · psi`.
    pub fn product(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                *o = (0..4).map(|k| self.phi[i][k] * self.psi[k][j]).sum();
            }
        }
        out
    }
}

pub fn frame(p: &ConePoint) -> FrameMatrices {
    let n = p.ratio();
    let mut phi = [[0.0; 4]; 4];
    let mut psi = [[0.0; 4]; 4];
    for a in 0..4 {
        phi[a][a] = 1.0;
        psi[a][a] = 1.0;
    }
    for a in 0..3 {
        phi[a + 1][0] = n[a];
        psi[a + 1][0] = -n[a];
    }
    FrameMatrices { phi, psi }
}

/// Unit normal `(t² + r²)^(-1/2) (t, -x)` and measure factor `(t² + r²)^(1/2) / t`.
pub fn normal_and_measure(p: &ConePoint) -> ([f64; 4], f64) {
    let r2 = p.x[0] * p.x[0] + p.x[1] * p.x[1] + p.x[2] * p.x[2];
    let norm = (p.t * p.t + r2).sqrt();
    ([p.t / norm, -p.x[0] / norm, -p.x[1] / norm, -p.x[2] / norm], norm / p.t)
}

/// Number of real field channels carried by slice samples.
pub const NS: usize = 14;

pub mod sc {
    //! Slice channel layout.
    pub const A: usize = 0;
    pub const CHI: usize = 4;
    pub const PSI: usize = 6;
}

/// Grid channel feeding slice channel `c`, and its time-derivative channel.
pub fn grid_channel(c: usize) -> (usize, usize) {
    match c {
        0..=3 => (ch::A + c, ch::ADOT + c),
        4..=5 => (ch::CHI + c - 4, ch::CHIDOT + c - 4),
        _ => (ch::PSI + c - 6, ch::PSI_T + c - 6),
    }
}

/// Fields and first derivatives at one point of a slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceSample {
    pub idx: [usize; 3],
    pub x: [f64; 3],
    pub t: f64,
    pub u: [f64; NS],
    /// `du[μ][c] = ∂_μ u_c`.
    pub du: [[f64; NS]; 4],
}

impl SliceSample {
    pub fn point(&self) -> ConePoint {
        ConePoint { t: self.t, x: self.x }
    }

    pub fn psi(&self) -> Spinor {
        spinor_at(&self.u, sc::PSI)
    }

    pub fn dpsi(&self, mu: usize) -> Spinor {
        spinor_at(&self.du[mu], sc::PSI)
    }

    pub fn chi(&self) -> C64 {
        C64::new(self.u[sc::CHI], self.u[sc::CHI + 1])
    }

    pub fn dchi(&self, mu: usize) -> C64 {
        C64::new(self.du[mu][sc::CHI], self.du[mu][sc::CHI + 1])
    }

    /// Value and gradient of one real channel.
    pub fn channel(&self, c: usize) -> (f64, [f64; 4]) {
        (self.u[c], std::array::from_fn(|mu| self.du[mu][c]))
    }

    pub fn set_psi(&mut self, psi: &Spinor, dpsi: &[Spinor; 4]) {
        put_spinor(&mut self.u, sc::PSI, psi);
        for mu in 0..4 {
            put_spinor(&mut self.du[mu], sc::PSI, &dpsi[mu]);
        }
    }

    pub fn to_point_state(&self) -> PointState {
        PointState {
            a: std::array::from_fn(|nu| self.u[sc::A + nu]),
            da: std::array::from_fn(|mu| std::array::from_fn(|nu| self.du[mu][sc::A + nu])),
            chi: self.chi(),
            dchi: std::array::from_fn(|mu| self.dchi(mu)),
            psi: self.psi(),
            dpsi: std::array::from_fn(|mu| self.dpsi(mu)),
        }
    }
}

fn spinor_at(v: &[f64; NS], base: usize) -> Spinor {
    Spinor(std::array::from_fn(|k| C64::new(v[base + 2 * k], v[base + 2 * k + 1])))
}

fn put_spinor(v: &mut [f64; NS], base: usize, psi: &Spinor) {
    for k in 0..4 {
        v[base + 2 * k] = psi.0[k].re;
        v[base + 2 * k + 1] = psi.0[k].im;
    }
}

/// Samples of the fields on `H_s` over the grid points of the support region.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperboloidSlice {
    pub s: f64,
    pub cell_volume: f64,
    pub samples: Vec<SliceSample>,
}

impl HyperboloidSlice {
    /// Sum of `f` over the samples times the cell volume, in a fixed order.
    pub fn integral<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&SliceSample) -> f64 + Sync,
    {
        slice_integral(self, f)
    }

    pub fn sup<F>(&self, f: F) -> f64
    where
        F: Fn(&SliceSample) -> f64,
    {
        self.samples.iter().map(f).fold(0.0, f64::max)
    }
}

const CHUNK: usize = 4096;

/// Flat-measure Riemann sum over a slice; deterministic for any thread count.
pub fn slice_integral<F>(slice: &HyperboloidSlice, f: F) -> Result<f64>
where
    F: Fn(&SliceSample) -> f64 + Sync,
{
    let parts: Vec<std::result::Result<f64, usize>> = slice
        .samples
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut k = Kahan::new();
            for (l, smp) in chunk.iter().enumerate() {
                let v = f(smp);
                if !v.is_finite() {
                    return Err(ci * CHUNK + l);
                }
                k.add(v);
            }
            Ok(k.value())
        })
        .collect();
    let mut sums = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            Ok(v) => sums.push(v),
            Err(l) => {
                let smp = &slice.samples[l];
                return Err(Error::NonFinite { what: format!("slice integrand on s={}", slice.s), index: smp.idx, t: smp.t });
            }
        }
    }
    Ok(pairwise(&sums) * slice.cell_volume)
}

/// Ball of radius `r0 + (t - t0)` outside which the evolved fields vanish.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBall {
    pub t0: f64,
    pub r0: f64,
}

impl SupportBall {
    pub fn radius(&self, t: f64) -> f64 {
        self.r0 + (t - self.t0)
    }

    /// Largest radius and time at which `H_s` meets the support.
    pub fn slice_extent(&self, s: f64) -> (f64, f64) {
        let c = self.t0 - self.r0;
        let r = 0.5 * (s * s / c - c);
        (r.max(0.0), (s * s + r.max(0.0) * r.max(0.0)).sqrt())
    }

    pub fn contains(&self, t: f64, r: f64) -> bool {
        r <= self.radius(t)
    }
}

/// Fill one slice sample from the history.
fn sample_at(h: &History, tw: &TimeWeights, idx: [usize; 3], x: [f64; 3]) -> SliceSample {
    let mut smp = SliceSample { idx, x, t: tw.tau, u: [0.0; NS], du: [[0.0; NS]; 4] };
    for c in 0..NS {
        let (gc, dc) = grid_channel(c);
        let jet = h.jet(tw, gc, Some(dc), idx, 1);
        smp.u[c] = jet.c[0];
        for mu in 0..4 {
            smp.du[mu][c] = jet.c[1 + mu];
        }
    }
    smp
}

/// How a probe quantity is reduced over the slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    /// Flat-measure integral.
    Integral,
    Max,
}

/// Per-point jets handed to a [`SliceProbe`].
pub struct ProbeInput<'a> {
    pub point: ConePoint,
    /// Jets of the requested channels, in request order.
    pub jets: &'a [Jet],
}

impl ProbeInput<'_> {
    /// Spinor jet from eight consecutive requested channels.
    pub fn spinor(&self, first: usize) -> SpinorJet {
        SpinorJet(std::array::from_fn(|l| self.jets[first + l]))
    }
}

/// A pointwise quantity needing higher jets than the stored samples carry;
/// it is reduced while the slice is filled.
pub trait SliceProbe: Send + Sync {
    fn name(&self) -> &str;
    /// Slice channels whose jets are needed.
    fn channels(&self) -> Vec<usize>;
    fn jet_order(&self) -> usize;
    fn reductions(&self) -> Vec<Reduction>;
    fn eval(&self, input: &ProbeInput, out: &mut [f64]);
}

/// Reduced probe values for one slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub s: f64,
    pub values: Vec<f64>,
}

struct ProbeState {
    sums: Vec<Kahan>,
    maxes: Vec<f64>,
}

struct SlicePlan {
    s: f64,
    /// Grid points in the support region, ordered by slice time.
    pending: Vec<(f64, [usize; 3])>,
    next: usize,
    samples: Vec<SliceSample>,
    probes: Vec<ProbeState>,
}

/// Fills slices point by point as the history advances.
pub struct SliceBuilder {
    grid: Grid3,
    plans: Vec<SlicePlan>,
    probes: Vec<std::sync::Arc<dyn SliceProbe>>,
}

/// A finished slice with its probe reductions.
pub struct CompletedSlice {
    pub slice: HyperboloidSlice,
    pub probes: Vec<ProbeResult>,
}

impl SliceBuilder {
    /// Plan slices at each `s`, restricted to the support ball; every `s` must
    /// be at least `t0` so the slice lies in the evolved region.
    pub fn new(grid: Grid3, support: SupportBall, s_list: &[f64], probes: Vec<std::sync::Arc<dyn SliceProbe>>) -> Result<Self> {
        let reach = 3.0 * grid.dx;
        let mut plans = Vec::new();
        for &s in s_list {
            if !(s >= support.t0) {
                return Err(Error::Invalid(format!("slice s={s} starts before the initial time {}", support.t0)));
            }
            let (rmax, _) = support.slice_extent(s);
            if rmax + reach > grid.half_width() {
                return Err(Error::SupportBoundary { radius: rmax, half_width: grid.half_width(), t: (s * s + rmax * rmax).sqrt() });
            }
            let n = grid.n;
            let mut pending = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let x = grid.point(i, j, k);
                        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                        let t = (s * s + r * r).sqrt();
                        if support.contains(t, r) {
                            pending.push((t, [i, j, k]));
                        }
                    }
                }
            }
            pending.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let probes = probes
                .iter()
                .map(|p| {
                    let n = p.reductions().len();
                    ProbeState { sums: vec![Kahan::new(); n], maxes: vec![0.0; n] }
                })
                .collect();
            plans.push(SlicePlan { s, pending, next: 0, samples: Vec::new(), probes });
        }
        Ok(SliceBuilder { grid, plans, probes })
    }

    /// Latest time any planned slice needs.
    pub fn t_needed(&self) -> f64 {
        self.plans.iter().filter_map(|p| p.pending.last().map(|x| x.0)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_done(&self) -> bool {
        self.plans.is_empty()
    }

    /// Fill every point whose time window is now available; returns the slices
    /// that became complete, in the order they were planned.
    pub fn advance(&mut self, h: &History) -> Result<Vec<CompletedSlice>> {
        let mut done = Vec::new();
        let mut keep = Vec::new();
        for mut plan in std::mem::take(&mut self.plans) {
            let start = plan.next;
            let mut end = start;
            while end < plan.pending.len() && h.covers(plan.pending[end].0) {
                end += 1;
            }
            if end > start {
                self.fill(&mut plan, h, start, end)?;
                plan.next = end;
            }
            if plan.next == plan.pending.len() {
                done.push(self.complete(plan));
            } else {
                keep.push(plan);
            }
        }
        self.plans = keep;
        Ok(done)
    }

    fn fill(&self, plan: &mut SlicePlan, h: &History, start: usize, end: usize) -> Result<()> {
        let grid = self.grid;
        let probes = &self.probes;
        let results: Vec<Result<(SliceSample, Vec<Vec<f64>>)>> = plan.pending[start..end]
            .par_iter()
            .map(|&(t, idx)| {
                let x = grid.point(idx[0], idx[1], idx[2]);
                let max_order = probes.iter().map(|p| p.jet_order()).max().unwrap_or(1).max(1);
                let tw = h.time_weights(t, WINDOW, max_order)?;
                let smp = sample_at(h, &tw, idx, x);
                let point = ConePoint { t, x };
                let mut outs = Vec::with_capacity(probes.len());
                for p in probes {
                    let jets: Vec<Jet> = p
                        .channels()
                        .into_iter()
                        .map(|c| {
                            let (gc, dc) = grid_channel(c);
                            h.jet(&tw, gc, Some(dc), idx, p.jet_order())
                        })
                        .collect();
                    let mut out = vec![0.0; p.reductions().len()];
                    p.eval(&ProbeInput { point, jets: &jets }, &mut out);
                    outs.push(out);
                }
                Ok((smp, outs))
            })
            .collect();
        for r in results {
            let (smp, outs) = r?;
            for (pi, out) in outs.iter().enumerate() {
                let red = self.probes[pi].reductions();
                let st = &mut plan.probes[pi];
                for (q, v) in out.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::NonFinite { what: format!("probe {}", self.probes[pi].name()), index: smp.idx, t: smp.t });
                    }
                    match red[q] {
                        Reduction::Integral => st.sums[q].add(*v),
                        Reduction::Max => st.maxes[q] = st.maxes[q].max(*v),
                    }
                }
            }
            plan.samples.push(smp);
        }
        Ok(())
    }

    fn complete(&self, plan: SlicePlan) -> CompletedSlice {
        let dv = self.grid.cell_volume();
        let probes = self
            .probes
            .iter()
            .zip(&plan.probes)
            .map(|(p, st)| {
                let values = p
                    .reductions()
                    .iter()
                    .enumerate()
                    .map(|(q, r)| match r {
                        Reduction::Integral => st.sums[q].value() * dv,
                        Reduction::Max => st.maxes[q],
                    })
                    .collect();
                ProbeResult { name: p.name().to_string(), s: plan.s, values }
            })
            .collect();
        let mut samples = plan.samples;
        samples.sort_by(|a, b| a.idx.cmp(&b.idx));
        CompletedSlice { slice: HyperboloidSlice { s: plan.s, cell_volume: dv, samples }, probes }
    }
}

/// Build a slice at once from a history that already spans it.
pub fn interpolate_to_slice(h: &History, support: SupportBall, s: f64) -> Result<HyperboloidSlice> {
    let grid = h.latest().ok_or_else(|| Error::Invalid("empty history".into()))?.data.grid;
    let mut b = SliceBuilder::new(grid, support, &[s], Vec::new())?;
    let plan = &b.plans[0];
    if let Some(&(t, _)) = plan.pending.iter().find(|(t, _)| !h.covers(*t)) {
        return Err(h.time_weights(t, WINDOW, 0).err().unwrap());
    }
    let mut done = b.advance(h)?;
    Ok(done.pop().map(|c| c.slice).unwrap_or(HyperboloidSlice { s, cell_volume: grid.cell_volume(), samples: Vec::new() }))
}

/// `∂̲_a f = (x^a/t) ∂_t f + ∂_a f` of grid channel `c` at grid point `idx`, time `tau`.
pub fn underline_derivative(h: &History, c: usize, dt_channel: Option<usize>, a: usize, idx: [usize; 3], tau: f64) -> Result<f64> {
    if !(1..=3).contains(&a) {
        return Err(Error::IndexOutOfRange { what: "frame direction", index: a });
    }
    let tw = h.time_weights(tau, WINDOW, 1)?;
    let jet = h.jet(&tw, c, dt_channel, idx, 1);
    let grid = h.level(0).data.grid;
    let x = grid.point(idx[0], idx[1], idx[2]);
    Ok(x[a - 1] / tau * jet.c[1] + jet.c[1 + a])
}

const BOOST_CAP: usize = 2;

/// `L_{J_1} ... L_{J_k} f` (rightmost applied first) for grid channel `c`.
pub fn boost_apply(h: &History, js: &[usize], c: usize, dt_channel: Option<usize>, idx: [usize; 3], tau: f64) -> Result<f64> {
    if js.len() > BOOST_CAP {
        return Err(Error::OrderCap(js.len()));
    }
    let tw = h.time_weights(tau, WINDOW, js.len())?;
    let grid = h.level(0).data.grid;
    let x = grid.point(idx[0], idx[1], idx[2]);
    let p = [tau, x[0], x[1], x[2]];
    let mut jet = h.jet(&tw, c, dt_channel, idx, js.len());
    for &a in js.iter().rev() {
        jet = jet.boost(a, p)?;
    }
    Ok(jet.value())
}

/// Boosts of a spinor stored as re/im pairs from `base`; `modified` adds the
/// constant matrix part of each boost.
pub fn boost_apply_spinor(
    h: &History,
    js: &[usize],
    base: usize,
    dt_base: Option<usize>,
    idx: [usize; 3],
    tau: f64,
    modified: bool,
) -> Result<Spinor> {
    if js.len() > BOOST_CAP {
        return Err(Error::OrderCap(js.len()));
    }
    let tw = h.time_weights(tau, WINDOW, js.len())?;
    let grid = h.level(0).data.grid;
    let x = grid.point(idx[0], idx[1], idx[2]);
    let p = [tau, x[0], x[1], x[2]];
    let mut jet = h.spinor_jet(&tw, base, dt_base, idx, js.len());
    for &a in js.iter().rev() {
        jet = if modified { jet.boost_with(a, p, &modified_boost_matrix(a)?)? } else { jet.boost(a, p)? };
    }
    Ok(jet.value())
}

const FIELD_IDS: [&str; 9] = ["A0", "A1", "A2", "A3", "chi", "psi0", "psi1", "psi2", "psi3"];

/// Write a slice as CSV: `s,i,j,k,t,field_id,re,im,weight`.
pub fn write_slice_csv(path: &Path, slice: &HyperboloidSlice) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "s,i,j,k,t,field_id,re,im,weight")?;
    for smp in &slice.samples {
        let [i, j, k] = smp.idx;
        for (f, id) in FIELD_IDS.iter().enumerate() {
            let (re, im) = match f {
                0..=3 => (smp.u[f], 0.0),
                4 => (smp.u[sc::CHI], smp.u[sc::CHI + 1]),
                _ => {
                    let c = sc::PSI + 2 * (f - 5);
                    (smp.u[c], smp.u[c + 1])
                }
            };
            writeln!(w, "{},{i},{j},{k},{},{id},{re:e},{im:e},{:e}", slice.s, smp.t, slice.cell_volume)?;
        }
    }
    w.flush()?;
    Ok(())
}
