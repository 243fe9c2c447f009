//! Seeded suite of the pure algebraic invariants: Clifford relations,
//! projectors, the Cholesky factor and the slice-energy identities.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{
    anticommutator, cholesky_p, cholesky_p_gamma_form, commutator, weyl_split, GammaSet, Matrix4C, C64, ETA,
};
use crate::energetics::{
    e_cholesky, e_hyper_dirac, e_kg, e_plus, e_weyl, lower_bound, WeylHalf, GAUGE_CHANNELS, SCALAR_CHANNELS,
};
use crate::geometry::{HyperboloidSlice, SliceSample, NS};

/// Outcome of one invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Worst violation seen (absolute or relative, as the check defines).
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {:<44} worst={:.3e} tol={:.0e}", c.name, c.worst, c.tol);
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "seed {}: {} checks, {} failed", self.seed, self.checks.len(), failed);
        s
    }
}

struct Recorder(Vec<Check>);

impl Recorder {
    fn check(&mut self, name: impl Into<String>, worst: f64, tol: f64) {
        let passed = worst.is_finite() && worst <= tol;
        self.0.push(Check { name: name.into(), worst, tol, passed });
    }
}

const ALGEBRA_TOL: f64 = 1e-14;
const CHOLESKY_TOL: f64 = 1e-12;
const ENERGY_TOL: f64 = 1e-10;

/// Clifford and projector relations of one gamma set.
fn algebra(set: &GammaSet, r: &mut Recorder) {
    let g = &set.gamma;
    let id = Matrix4C::identity();
    for mu in 0..4 {
        for nu in 0..4 {
            let want = if mu == nu { id * (-2.0 * ETA[mu]) } else { Matrix4C::zero() };
            r.check(format!("anticommutator gamma{mu} gamma{nu}"), anticommutator(&g[mu], &g[nu]).max_abs_diff(&want), ALGEBRA_TOL);
        }
    }
    r.check("gamma0 hermitian", g[0].adjoint().max_abs_diff(&g[0]), ALGEBRA_TOL);
    for j in 1..4 {
        r.check(format!("gamma{j} antihermitian"), g[j].adjoint().max_abs_diff(&(-g[j])), ALGEBRA_TOL);
    }
    for mu in 0..4 {
        let conj = g[0] * g[mu] * g[0];
        r.check(format!("gamma0 gamma{mu} gamma0 = gamma{mu}*"), conj.max_abs_diff(&g[mu].adjoint()), ALGEBRA_TOL);
    }
    let g5 = set.gamma5();
    r.check("gamma5 squares to identity", (g5 * g5).max_abs_diff(&id), ALGEBRA_TOL);
    r.check("gamma5 hermitian", g5.adjoint().max_abs_diff(&g5), ALGEBRA_TOL);
    let want5 = Matrix4C::from_blocks(
        [[C64::new(0.0, 0.0); 2]; 2],
        [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]],
        [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]],
        [[C64::new(0.0, 0.0); 2]; 2],
    );
    r.check("gamma5 off-diagonal identity blocks", g5.max_abs_diff(&want5), ALGEBRA_TOL);
    for mu in 0..4 {
        r.check(format!("gamma5 anticommutes with gamma{mu}"), anticommutator(&g5, &g[mu]).max_abs(), ALGEBRA_TOL);
    }
    let (pl, pr) = set.projectors();
    r.check("P_L idempotent", (pl * pl).max_abs_diff(&pl), ALGEBRA_TOL);
    r.check("P_R idempotent", (pr * pr).max_abs_diff(&pr), ALGEBRA_TOL);
    r.check("P_L P_R = 0", (pl * pr).max_abs(), ALGEBRA_TOL);
    r.check("P_L + P_R = I", (pl + pr).max_abs_diff(&id), ALGEBRA_TOL);
    // -1/2 g0 g^a generates the boost on the gammas
    for a in 1..4 {
        let b = (g[0] * g[a]) * -0.5;
        let mut worst = commutator(&b, &g[0]).max_abs_diff(&g[a]);
        worst = worst.max(commutator(&b, &g[a]).max_abs_diff(&g[0]));
        for c in (1..4).filter(|c| *c != a) {
            worst = worst.max(commutator(&b, &g[c]).max_abs());
        }
        r.check(format!("boost generator {a} on gammas"), worst, ALGEBRA_TOL);
    }
}

fn random_cone_point(rng: &mut ChaCha8Rng) -> ([f64; 3], f64) {
    loop {
        let n = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let nn: f64 = n.iter().map(|v| v * v).sum();
        if nn < 0.98 {
            return (n, (1.0 - nn).sqrt());
        }
    }
}

fn cholesky(set: &GammaSet, rng: &mut ChaCha8Rng, r: &mut Recorder) {
    let mut factor = 0.0f64;
    let mut forms = 0.0f64;
    let mut triangular = true;
    for _ in 0..1000 {
        let (n, sigma) = random_cone_point(rng);
        let Ok(p) = cholesky_p(n, sigma) else {
            factor = f64::NAN;
            continue;
        };
        let mut want = Matrix4C::identity();
        for j in 0..3 {
            want = want + set.g0g(j + 1) * n[j];
        }
        factor = factor.max((p.adjoint() * p).max_abs_diff(&want));
        forms = forms.max(cholesky_p_gamma_form(n, sigma).map(|q| q.max_abs_diff(&p)).unwrap_or(f64::NAN));
        triangular &= p.is_lower_triangular(0.0);
    }
    r.check("cholesky P*P = I + n_j g0 g^j", factor, CHOLESKY_TOL);
    r.check("cholesky closed forms agree", forms, CHOLESKY_TOL);
    r.check("cholesky factor lower triangular", if triangular { 0.0 } else { 1.0 }, 0.0);
}

/// Random data with compact support inside radius `rmax` on `H_s`.
pub fn random_compact_slice(rng: &mut ChaCha8Rng, s: f64, rmax: f64, points: usize) -> HyperboloidSlice {
    let samples = (0..points)
        .map(|l| {
            let x = loop {
                let x = [rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax)];
                if x.iter().map(|v| v * v).sum::<f64>() < rmax * rmax {
                    break x;
                }
            };
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let rho2 = r2 / (rmax * rmax);
            let envelope = if rho2 < 1.0 { (1.0 - 1.0 / (1.0 - rho2)).exp() } else { 0.0 };
            let mut smp = SliceSample { idx: [l, 0, 0], x, t: (s * s + r2).sqrt(), u: [0.0; NS], du: [[0.0; NS]; 4] };
            smp.u.iter_mut().for_each(|v| *v = envelope * rng.gen_range(-1.0..1.0));
            smp.du.iter_mut().flatten().for_each(|v| *v = envelope * rng.gen_range(-1.0..1.0));
            smp
        })
        .collect();
    HyperboloidSlice { s, cell_volume: 0.05, samples }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn energies(rng: &mut ChaCha8Rng, r: &mut Recorder) {
    let mut decomposition = 0.0f64;
    let mut chol = 0.0f64;
    let mut kg_forms = 0.0f64;
    let mut positivity = 0.0f64;
    let mut weyl_pair = 0.0f64;
    let mut weyl_pos = 0.0f64;
    for _ in 0..100 {
        let s = rng.gen_range(2.0..8.0);
        let rmax = rng.gen_range(0.5..(s * 1.5));
        let slice = random_compact_slice(rng, s, rmax, 200);
        let (Ok(eh), Ok(ep), Ok(lb), Ok(ec)) = (e_hyper_dirac(&slice), e_plus(&slice), lower_bound(&slice), e_cholesky(&slice))
        else {
            decomposition = f64::NAN;
            continue;
        };
        decomposition = decomposition.max(rel(eh, 0.5 * ep + 0.5 * lb));
        chol = chol.max(rel(eh, ec));
        positivity = positivity.max((0.5 * lb - eh).max(0.0) / eh.max(f64::MIN_POSITIVE)).max((-lb).max(0.0));
        let m = rng.gen_range(0.0..2.0);
        for channels in [&GAUGE_CHANNELS[..], &SCALAR_CHANNELS[..]] {
            let f = e_kg(&slice, channels, m).unwrap_or([f64::NAN; 3]);
            kg_forms = kg_forms.max(rel(f[0], f[1])).max(rel(f[0], f[2]));
        }
        let wu = e_weyl(&slice, WeylHalf::U, false).unwrap_or(f64::NAN);
        let wv = e_weyl(&slice, WeylHalf::V, true).unwrap_or(f64::NAN);
        weyl_pair = weyl_pair.max(rel(eh, 2.0 * (wu + wv)));
        for (half, plus) in [(WeylHalf::U, true), (WeylHalf::U, false), (WeylHalf::V, true), (WeylHalf::V, false)] {
            let e = e_weyl(&slice, half, plus).unwrap_or(f64::NAN);
            let bound = slice
                .integral(|smp| {
                    let w = weyl_split(&smp.psi());
                    let part = if half == WeylHalf::U { w.u } else { w.v };
                    let sig = smp.point().sigma();
                    sig * sig * (part[0].norm_sqr() + part[1].norm_sqr())
                })
                .unwrap_or(f64::NAN);
            weyl_pos = weyl_pos.max((0.5 * bound - e).max(0.0) / e.abs().max(f64::MIN_POSITIVE));
        }
    }
    r.check("E^H = E^+/2 + lower bound/2", decomposition, ENERGY_TOL);
    r.check("E^H equals the Cholesky form", chol, ENERGY_TOL);
    r.check("three Klein-Gordon forms agree", kg_forms, ENERGY_TOL);
    r.check("E^H >= lower bound/2 >= 0", positivity, ENERGY_TOL);
    r.check("E^H = 2(E_weyl-(u) + E_weyl+(v))", weyl_pair, ENERGY_TOL);
    r.check("Weyl energies >= weighted norm/2", weyl_pos, ENERGY_TOL);
}

/// Run every invariant against the standard Dirac matrices.
pub fn identity_suite(seed: u64) -> SuiteReport {
    identity_suite_with(seed, &GammaSet::dirac())
}

/// Run the suite with the algebraic checks pointed at `set`; the energy
/// identities always use the standard matrices.
pub fn identity_suite_with(seed: u64, set: &GammaSet) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = Recorder(Vec::new());
    algebra(set, &mut r);
    cholesky(set, &mut rng, &mut r);
    energies(&mut rng, &mut r);
    SuiteReport { seed, checks: r.0 }
}

/// Only the Clifford and projector relations.
pub fn algebra_checks(set: &GammaSet) -> Vec<Check> {
    let mut r = Recorder(Vec::new());
    algebra(set, &mut r);
    r.0
}

/// Only the Cholesky checks, over 1000 seeded in-cone points.
pub fn cholesky_checks(seed: u64, set: &GammaSet) -> Vec<Check> {
    let mut r = Recorder(Vec::new());
    cholesky(set, &mut ChaCha8Rng::seed_from_u64(seed), &mut r);
    r.0
}

/// Only the slice-energy identities, over 100 seeded datasets.
pub fn energy_checks(seed: u64) -> Vec<Check> {
    let mut r = Recorder(Vec::new());
    energies(&mut ChaCha8Rng::seed_from_u64(seed), &mut r);
    r.0
}

/// The standard set with `γ³` perturbed by `delta` in one entry.
pub fn perturbed_gamma3(delta: f64) -> GammaSet {
    let mut set = GammaSet::dirac();
    set.gamma[3].0[0][2] += C64::new(delta, 0.0);
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_set_passes() {
        let rep = identity_suite(1);
        assert!(rep.all_passed(), "{}", rep.render());
    }

    #[test]
    fn perturbed_gamma3_names_the_broken_identity() {
        let rep = identity_suite_with(1, &perturbed_gamma3(1e-6));
        let failed: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"anticommutator gamma3 gamma3"), "{failed:?}");
        assert!(failed.contains(&"cholesky P*P = I + n_j g0 g^j"), "{failed:?}");
    }
}
