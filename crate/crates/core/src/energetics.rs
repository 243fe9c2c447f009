//! Energy functionals on flat and hyperboloidal slices.

use serde::{Deserialize, Serialize};

use crate::clifford::{cholesky_p, dirac, weyl_split, Spinor, C64};
use crate::error::Result;
use crate::geometry::{sc, ConePoint, HyperboloidSlice, SliceSample};
use crate::reduce::{slab_sum, Kahan};
use crate::state::{ch, FieldState};

/// `∫ψ*ψ dx` over a constant-`t` grid.
pub fn e_flat(state: &FieldState) -> f64 {
    let f = &state.fields;
    let n = f.grid.n;
    slab_sum(n, |i| {
        let mut k = Kahan::new();
        for c in ch::PSI..ch::PSI + 8 {
            let o = f.offset(c, i, 0, 0);
            for v in &f.data[o..o + n * n] {
                k.add(v * v);
            }
        }
        k.value()
    }) * f.grid.cell_volume()
}

/// `ψ*ψ - (x_i/t) ψ*γ⁰γ^iψ`.
pub fn dirac_density(p: &ConePoint, psi: &Spinor) -> f64 {
    let d = dirac();
    let n = p.ratio();
    let mut v = psi.norm_sqr();
    for j in 0..3 {
        v -= n[j] * d.g0g[j + 1].bilinear(psi, psi).re;
    }
    v
}

/// `|ψ - (x_i/t)γ⁰γ^iψ|²`.
pub fn plus_density(p: &ConePoint, psi: &Spinor) -> f64 {
    let d = dirac();
    let n = p.ratio();
    let mut w = *psi;
    for j in 0..3 {
        w = w - (d.g0g[j + 1] * *psi).scale(C64::new(n[j], 0.0));
    }
    w.norm_sqr()
}

/// `|Pψ|²` with the lower-triangular factor of the density matrix.
pub fn cholesky_density(p: &ConePoint, psi: &Spinor) -> Result<f64> {
    let n = p.ratio().map(|v| -v);
    let m = cholesky_p(n, p.sigma())?;
    Ok((m * *psi).norm_sqr())
}

/// `(s/t)² ψ*ψ`.
pub fn lower_bound_density(p: &ConePoint, psi: &Spinor) -> f64 {
    let sig = p.sigma();
    sig * sig * psi.norm_sqr()
}

/// The three equal forms of the Klein-Gordon energy density of a real
/// vector-valued map with components `u[c]` and gradients `du[c][μ]`.
pub fn kg_densities(p: &ConePoint, u: &[f64], du: &[[f64; 4]], m: f64) -> [f64; 3] {
    let t = p.t;
    let x = p.x;
    let sig = p.sigma();
    let mut f = [0.0; 3];
    for (c, g) in du.iter().enumerate() {
        let mass = m * m * u[c] * u[c];
        let grad2 = g[1] * g[1] + g[2] * g[2] + g[3] * g[3];
        let cross: f64 = (0..3).map(|a| x[a] / t * g[0] * g[a + 1]).sum();
        f[0] += g[0] * g[0] + grad2 + 2.0 * cross + mass;
        let under: f64 = (0..3).map(|a| (x[a] / t * g[0] + g[a + 1]).powi(2)).sum();
        f[1] += (sig * g[0]).powi(2) + under + mass;
        let perp = g[0] + (0..3).map(|a| x[a] / t * g[a + 1]).sum::<f64>();
        let mut rot = 0.0;
        for a in 0..3 {
            for b in a + 1..3 {
                rot += ((x[a] * g[b + 1] - x[b] * g[a + 1]) / t).powi(2);
            }
        }
        f[2] += perp * perp + sig * sig * grad2 + rot + mass;
    }
    f
}

/// Second-order energy density of the spinor components with mass `big_m`.
pub fn second_order_density(p: &ConePoint, psi: &Spinor, dpsi: &[Spinor; 4], big_m: f64) -> f64 {
    let t = p.t;
    let mut v = dpsi[0].norm_sqr() + big_m * big_m * psi.norm_sqr();
    for i in 0..3 {
        v += dpsi[i + 1].norm_sqr();
        v += 2.0 * p.x[i] / t * dpsi[0].dot(&dpsi[i + 1]).re;
    }
    v
}

/// Which half of the Weyl split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeylHalf {
    U,
    V,
}

/// `w*w ± (x_j/t) w*σ^j w` for a two-component field.
pub fn weyl_density(p: &ConePoint, w: &[C64; 2], plus: bool) -> f64 {
    let n = p.ratio();
    let sgn = if plus { 1.0 } else { -1.0 };
    let norm = w[0].norm_sqr() + w[1].norm_sqr();
    // w*σ¹w = 2Re(w̄₀w₁), w*σ²w = 2Im(w̄₀w₁), w*σ³w = |w₀|² - |w₁|²
    let c = w[0].conj() * w[1];
    let s = [2.0 * c.re, 2.0 * c.im, w[0].norm_sqr() - w[1].norm_sqr()];
    norm + sgn * (n[0] * s[0] + n[1] * s[1] + n[2] * s[2])
}

pub fn e_hyper_dirac(slice: &HyperboloidSlice) -> Result<f64> {
    slice.integral(|s| dirac_density(&s.point(), &s.psi()))
}

pub fn e_plus(slice: &HyperboloidSlice) -> Result<f64> {
    slice.integral(|s| plus_density(&s.point(), &s.psi()))
}

pub fn e_cholesky(slice: &HyperboloidSlice) -> Result<f64> {
    // sigma is consistent by construction on slice samples
    slice.integral(|s| cholesky_density(&s.point(), &s.psi()).unwrap_or(f64::NAN))
}

/// `∫(s/t)²ψ*ψ dx`.
pub fn lower_bound(slice: &HyperboloidSlice) -> Result<f64> {
    slice.integral(|s| lower_bound_density(&s.point(), &s.psi()))
}

fn kg_at(s: &SliceSample, channels: &[usize], m: f64) -> [f64; 3] {
    let u: Vec<f64> = channels.iter().map(|&c| s.u[c]).collect();
    let du: Vec<[f64; 4]> = channels.iter().map(|&c| s.channel(c).1).collect();
    kg_densities(&s.point(), &u, &du, m)
}

/// The three forms of the Klein-Gordon energy of the map formed by slice channels `channels`.
pub fn e_kg(slice: &HyperboloidSlice, channels: &[usize], m: f64) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (f, o) in out.iter_mut().enumerate() {
        *o = slice.integral(|s| kg_at(s, channels, m)[f])?;
    }
    Ok(out)
}

/// Gauge-field channels of a slice.
pub const GAUGE_CHANNELS: [usize; 4] = [sc::A, sc::A + 1, sc::A + 2, sc::A + 3];
pub const SCALAR_CHANNELS: [usize; 2] = [sc::CHI, sc::CHI + 1];

pub fn e_second_order(slice: &HyperboloidSlice, big_m: f64) -> Result<f64> {
    slice.integral(|s| {
        let dpsi = std::array::from_fn(|mu| s.dpsi(mu));
        second_order_density(&s.point(), &s.psi(), &dpsi, big_m)
    })
}

/// Weyl energy of one half of the split spinor with sign `plus`.
pub fn e_weyl(slice: &HyperboloidSlice, half: WeylHalf, plus: bool) -> Result<f64> {
    slice.integral(|s| {
        let w = weyl_split(&s.psi());
        let part = match half {
            WeylHalf::U => w.u,
            WeylHalf::V => w.v,
        };
        weyl_density(&s.point(), &part, plus)
    })
}

/// One row of `energies.csv`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub s: f64,
    pub e_flat: f64,
    pub e_hyp: f64,
    pub e_plus: f64,
    pub e_chol: f64,
    pub e_second: f64,
    pub e_kg: [f64; 3],
    /// `E^σ₊(v)`, the plus-sign energy of the lower Weyl half.
    pub e_weyl_p: f64,
    /// `E^σ₋(u)`.
    pub e_weyl_m: f64,
    pub lower_bound: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str =
        "s,E_flat,E_hyp,E_plus,E_chol,E_second,E_kg_1,E_kg_2,E_kg_3,E_weyl_p,E_weyl_m,lower_bound";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.s,
            self.e_flat,
            self.e_hyp,
            self.e_plus,
            self.e_chol,
            self.e_second,
            self.e_kg[0],
            self.e_kg[1],
            self.e_kg[2],
            self.e_weyl_p,
            self.e_weyl_m,
            self.lower_bound
        )
    }
}

/// Evaluate every functional on a slice. `e_flat` comes from the flat slice
/// `t = s` and is passed in; `dirac_mass` enters the second-order energy and
/// `gauge_mass` the Klein-Gordon energy of `A`.
pub fn energy_report(slice: &HyperboloidSlice, e_flat: f64, dirac_mass: f64, gauge_mass: f64) -> Result<EnergyReport> {
    Ok(EnergyReport {
        s: slice.s,
        e_flat,
        e_hyp: e_hyper_dirac(slice)?,
        e_plus: e_plus(slice)?,
        e_chol: e_cholesky(slice)?,
        e_second: e_second_order(slice, dirac_mass)?,
        e_kg: e_kg(slice, &GAUGE_CHANNELS, gauge_mass)?,
        e_weyl_p: e_weyl(slice, WeylHalf::V, true)?,
        e_weyl_m: e_weyl(slice, WeylHalf::U, false)?,
        lower_bound: lower_bound(slice)?,
    })
}

/// One row of the energy-inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub s: f64,
    /// `E^H(s)^{1/2}`.
    pub lhs: f64,
    /// `E^H(s₀)^{1/2} + ∫_{s₀}^{s} ‖F‖_{L²_f(H_s')} ds'`.
    pub rhs: f64,
    pub margin: f64,
}

/// Check the first-order energy inequality along a sequence of slices with
/// `(s, E^H(s), ‖F‖_{L²_f(H_s)})`; the source integral uses the trapezoid rule.
pub fn energy_estimate_check(series: &[(f64, f64, f64)]) -> Vec<EstimateRow> {
    let mut rows = Vec::with_capacity(series.len());
    let Some(&(_, e0, _)) = series.first() else {
        return rows;
    };
    let base = e0.max(0.0).sqrt();
    let mut integral = 0.0;
    for (k, &(s, e, f)) in series.iter().enumerate() {
        if k > 0 {
            let (s_prev, _, f_prev) = series[k - 1];
            integral += 0.5 * (s - s_prev) * (f + f_prev);
        }
        let lhs = e.max(0.0).sqrt();
        let rhs = base + integral;
        rows.push(EstimateRow { s, lhs, rhs, margin: rhs - lhs });
    }
    rows
}

/// `‖F‖_{L²_f(H_s)}` for a source given as a function of `(t, x)`.
pub fn source_norm<F>(slice: &HyperboloidSlice, f: F) -> Result<f64>
where
    F: Fn(f64, [f64; 3]) -> Spinor + Sync,
{
    Ok(slice.integral(|s| f(s.t, s.x).norm_sqr())?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SliceSample, NS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_slice(rng: &mut ChaCha8Rng, s: f64, n: usize) -> HyperboloidSlice {
        let samples = (0..n)
            .map(|l| {
                let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let mut smp =
                    SliceSample { idx: [l, 0, 0], x, t: (s * s + r2).sqrt(), u: [0.0; NS], du: [[0.0; NS]; 4] };
                smp.u.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
                smp.du.iter_mut().flatten().for_each(|v| *v = rng.gen_range(-1.0..1.0));
                smp
            })
            .collect();
        HyperboloidSlice { s, cell_volume: 0.1, samples }
    }

    #[test]
    fn zero_slice_gives_zero_energies() {
        let slice = HyperboloidSlice { s: 3.0, cell_volume: 0.1, samples: vec![] };
        let r = energy_report(&slice, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(r, EnergyReport { s: 3.0, ..Default::default() });
    }

    #[test]
    fn identities_hold_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let slice = random_slice(&mut rng, 4.0, 500);
        let eh = e_hyper_dirac(&slice).unwrap();
        let ep = e_plus(&slice).unwrap();
        let lb = lower_bound(&slice).unwrap();
        assert!(((0.5 * ep + 0.5 * lb) - eh).abs() / eh < 1e-12);
        assert!((e_cholesky(&slice).unwrap() - eh).abs() / eh < 1e-12);
        let w = 2.0 * (e_weyl(&slice, WeylHalf::U, false).unwrap() + e_weyl(&slice, WeylHalf::V, true).unwrap());
        assert!((w - eh).abs() / eh < 1e-12);
        let kg = e_kg(&slice, &GAUGE_CHANNELS, 0.7).unwrap();
        assert!((kg[0] - kg[1]).abs() / kg[0] < 1e-12 && (kg[0] - kg[2]).abs() / kg[0] < 1e-12);
        let psi_channels: Vec<usize> = (sc::PSI..sc::PSI + 8).collect();
        let kg_psi = e_kg(&slice, &psi_channels, 1.3).unwrap()[0];
        assert!((kg_psi - e_second_order(&slice, 1.3).unwrap()).abs() / kg_psi < 1e-12);
        assert_eq!(e_second_order(&slice, 1.3).unwrap(), e_second_order(&slice, -1.3).unwrap());
    }

    #[test]
    fn estimate_with_constant_energy_has_zero_margin() {
        let rows = energy_estimate_check(&[(2.0, 4.0, 0.0), (3.0, 4.0, 0.0)]);
        assert_eq!(rows[1].margin, 0.0);
        let rows = energy_estimate_check(&[(2.0, 1.0, 1.0), (3.0, 1.0, 1.0)]);
        assert_eq!(rows[1].rhs, 2.0);
        assert!(energy_estimate_check(&[]).is_empty());
    }
}
