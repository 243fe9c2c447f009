//! Pointwise nonlinearities of the U(1) Higgs and Dirac-Proca systems and the
//! algebraic variable changes built on them.
//!
//! Every function here acts on one spacetime point. Indices follow
//! `η = diag(-1, 1, 1, 1)`; derivative arrays are lower-index `∂_μ` with
//! `μ = 0` the time derivative.

use serde::{Deserialize, Serialize};

use crate::clifford::{alpha_apply, dirac, gamma0_apply, slash_apply, Matrix4C, Spinor, C64, ETA, I, ZERO};
use crate::error::{Error, Result};

/// Couplings `(q, g, λ, v)` and the ground state `φ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub q: f64,
    pub g: f64,
    pub lambda: f64,
    pub v: f64,
    pub phi0: C64,
}

impl CouplingParams {
    pub fn new(q: f64, g: f64, lambda: f64, v: f64) -> Result<Self> {
        let p = CouplingParams { q, g, lambda, v, phi0: C64::new(v, 0.0) };
        p.validate()?;
        Ok(p)
    }

    /// Couplings that realise the requested masses at vacuum value `v`.
    pub fn from_masses(m_q: f64, m_lambda: f64, m_g: f64, v: f64) -> Result<Self> {
        if !(v > 0.0) {
            return Err(Error::Invalid(format!("vacuum value must be positive, got {v}")));
        }
        Self::new(m_q / (2.0f64.sqrt() * v), m_g / (v * v), m_lambda * m_lambda / (4.0 * v * v), v)
    }

    /// Replace the ground state; `|φ₀|` must equal `v`.
    pub fn with_phi0(mut self, phi0: C64) -> Result<Self> {
        if (phi0.norm() - self.v).abs() > 1e-12 * self.v.max(1.0) {
            return Err(Error::Invalid(format!("|phi0| = {} differs from v = {}", phi0.norm(), self.v)));
        }
        self.phi0 = phi0;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.q, self.g, self.lambda, self.v];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("couplings must be finite".into()));
        }
        if !(self.q > 0.0 && self.lambda > 0.0 && self.v > 0.0) {
            return Err(Error::Invalid("q, lambda and v must be positive (m_q, m_lambda > 0)".into()));
        }
        if self.g < 0.0 {
            return Err(Error::Invalid("g must be non-negative (m_g >= 0)".into()));
        }
        Ok(())
    }

    /// `m_q = √2 q v`.
    pub fn m_q(&self) -> f64 {
        2.0f64.sqrt() * self.q * self.v
    }

    /// `m_λ = 2 √λ v`.
    pub fn m_lambda(&self) -> f64 {
        2.0 * self.lambda.sqrt() * self.v
    }

    /// `m_g = g v²`.
    pub fn m_g(&self) -> f64 {
        self.g * self.v * self.v
    }

    /// Small-data theorem hypothesis `m_g ≤ min(m_q, m_λ)`.
    pub fn check_theorem_regime(&self) -> Result<()> {
        let cap = self.m_q().min(self.m_lambda());
        if self.m_g() > cap * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "theorem regime requires m_g <= min(m_q, m_lambda): m_g = {}, min = {cap}",
                self.m_g()
            )));
        }
        Ok(())
    }
}

/// Proca mass `m` and Dirac mass `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub m: f64,
    pub big_m: f64,
}

impl DpParams {
    pub fn new(m: f64, big_m: f64) -> Result<Self> {
        if !(m > 0.0) || !(big_m >= 0.0) || !m.is_finite() || !big_m.is_finite() {
            return Err(Error::Invalid(format!("Dirac-Proca masses need m > 0, M >= 0 (got {m}, {big_m})")));
        }
        Ok(DpParams { m, big_m })
    }
}

/// Field values and first derivatives at one point.
///
/// `da[μ][ν] = ∂_μ A^ν`, `dchi[μ] = ∂_μ χ`, `dpsi[μ] = ∂_μ ψ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointState {
    pub a: [f64; 4],
    pub da: [[f64; 4]; 4],
    pub chi: C64,
    pub dchi: [C64; 4],
    pub psi: Spinor,
    pub dpsi: [Spinor; 4],
}

impl PointState {
    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.da.iter().flatten()).all(|x| x.is_finite())
            && [self.chi].iter().chain(self.dchi.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
            && self.psi.is_finite()
            && self.dpsi.iter().all(Spinor::is_finite)
    }
}

/// `A^μ B_μ`.
#[inline]
pub fn minkowski_dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    ETA[0] * a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// `ψ* γ^0 γ^ν ψ` (real).
#[inline]
pub fn current(psi: &Spinor, nu: usize) -> f64 {
    if nu == 0 {
        psi.norm_sqr()
    } else {
        psi.dot(&alpha_apply(nu, psi)).re
    }
}

pub fn current_all(psi: &Spinor) -> [f64; 4] {
    [current(psi, 0), current(psi, 1), current(psi, 2), current(psi, 3)]
}

/// `ψ* γ^0 ψ` (real).
#[inline]
pub fn scalar_density(psi: &Spinor) -> f64 {
    psi.0[0].norm_sqr() + psi.0[1].norm_sqr() - psi.0[2].norm_sqr() - psi.0[3].norm_sqr()
}

/// `(χ₊, χ₋) = (φ₀* χ + χ* φ₀, φ₀* χ - χ* φ₀)`.
#[inline]
pub fn chi_pm(chi: C64, p: &CouplingParams) -> (C64, C64) {
    let a = p.phi0.conj() * chi;
    let b = chi.conj() * p.phi0;
    (a + b, a - b)
}

/// Full complex value of the gauge-field nonlinearity; its imaginary part
/// vanishes identically.
pub fn q_a_complex(st: &PointState, nu: usize, p: &CouplingParams) -> C64 {
    let q = p.q;
    let up = ETA[nu] * 1.0; // ∂^ν = η^{νν} ∂_ν
    let d = st.dchi[nu] * up;
    let (chi_p, _) = chi_pm(st.chi, p);
    let quartic = chi_p + st.chi.norm_sqr();
    I * q * (st.chi.conj() * d - d.conj() * st.chi)
        + quartic * (2.0 * q * q * st.a[nu])
        + C64::new(q * current(&st.psi, nu), 0.0)
}

/// `Q_{A^ν} = iq(χ*∂^νχ - ∂^νχ* χ) + 2q²A^ν(χ₊ + |χ|²) + q ψ*γ⁰γ^νψ`.
pub fn q_a(st: &PointState, nu: usize, p: &CouplingParams) -> f64 {
    q_a_complex(st, nu, p).re
}

pub fn q_a_all(st: &PointState, p: &CouplingParams) -> [f64; 4] {
    [q_a(st, 0, p), q_a(st, 1, p), q_a(st, 2, p), q_a(st, 3, p)]
}

/// Scalar nonlinearity
/// `2iq A_μ∂^μχ + q²χχ₋ + q²A^μA_μ(φ₀+χ) + 2λ|χ|²φ₀ + 2λχ(χ₊+|χ|²) - g(φ₀+χ)ψ*γ⁰ψ`.
pub fn q_chi(st: &PointState, p: &CouplingParams) -> C64 {
    let q = p.q;
    let (chi_p, chi_m) = chi_pm(st.chi, p);
    let mut a_dchi = ZERO;
    for mu in 0..4 {
        a_dchi += st.dchi[mu] * st.a[mu];
    }
    let aa = minkowski_dot(&st.a, &st.a);
    let full = p.phi0 + st.chi;
    let n2 = st.chi.norm_sqr();
    I * (2.0 * q) * a_dchi + st.chi * chi_m * (q * q) + full * (q * q * aa) + p.phi0 * (2.0 * p.lambda * n2)
        + st.chi * (chi_p + n2) * (2.0 * p.lambda)
        - full * (p.g * scalar_density(&st.psi))
}

/// `Q_ψ = g(χ₊ + |χ|²)ψ - q γ^μA_μ ψ`.
pub fn q_psi(st: &PointState, p: &CouplingParams) -> Spinor {
    let (chi_p, _) = chi_pm(st.chi, p);
    let s = chi_p.re + st.chi.norm_sqr();
    st.psi * (p.g * s) - slash_apply(st.a, &st.psi) * p.q
}

/// `∂_μ Q_ψ` by the product rule.
pub fn dq_psi(st: &PointState, p: &CouplingParams) -> [Spinor; 4] {
    let (chi_p, _) = chi_pm(st.chi, p);
    let s = chi_p.re + st.chi.norm_sqr();
    std::array::from_fn(|mu| {
        let dchi = st.dchi[mu];
        let ds = 2.0 * (p.phi0.conj() * dchi).re + 2.0 * (st.chi.conj() * dchi).re;
        st.psi * (p.g * ds) + st.dpsi[mu] * (p.g * s)
            - slash_apply(st.da[mu], &st.psi) * p.q
            - slash_apply(st.a, &st.dpsi[mu]) * p.q
    })
}

/// `G_ψ = -m_g Q_ψ - i γ^ν ∂_ν Q_ψ`, so that `□ψ - m_g²ψ = -G_ψ`.
pub fn g_psi(st: &PointState, p: &CouplingParams) -> Spinor {
    let g = &dirac().set.gamma;
    let dq = dq_psi(st, p);
    let mut acc = q_psi(st, p) * (-p.m_g());
    for nu in 0..4 {
        acc -= (g[nu] * dq[nu]) * I;
    }
    acc
}

/// `Q₀(Φ, Ψ) = (∂_tΦ)* ∂_tΨ - Σ (∂_iΦ)* ∂_iΨ`.
pub fn null_q0(d_phi: &[C64; 4], d_psi: &[C64; 4]) -> C64 {
    let mut acc = d_phi[0].conj() * d_psi[0];
    for i in 1..4 {
        acc -= d_phi[i].conj() * d_psi[i];
    }
    acc
}

/// `Q₀(ψ, Mψ)` for a constant matrix `M`, summed over spinor components.
pub fn null_q0_spinor(dpsi: &[Spinor; 4], m: &Matrix4C) -> C64 {
    let mut acc = m.bilinear(&dpsi[0], &dpsi[0]);
    for i in 1..4 {
        acc -= m.bilinear(&dpsi[i], &dpsi[i]);
    }
    acc
}

fn require_positive(m2: f64, name: &str) -> Result<()> {
    if !(m2 > 0.0) {
        return Err(Error::Invalid(format!("{name} must be positive for the transformation")));
    }
    Ok(())
}

/// `Ã^ν = A^ν + (q/m_q²) ψ*γ⁰γ^νψ`.
pub fn transform_a(st: &PointState, nu: usize, p: &CouplingParams) -> Result<f64> {
    let m2 = p.m_q() * p.m_q();
    require_positive(m2, "m_q")?;
    Ok(st.a[nu] + p.q / m2 * current(&st.psi, nu))
}

/// Source of `(□ - m_q²)Ã^ν`:
/// `Q_A - qJ - (2q/m_q²)Q₀(ψ, γ⁰γ^νψ) - (q/m_q²)(G*γ⁰γ^νψ + ψ*γ⁰γ^νG) + (2q m_g²/m_q²) J`
/// with `J = ψ*γ⁰γ^νψ`.
pub fn q_tilde_a(st: &PointState, nu: usize, p: &CouplingParams) -> Result<f64> {
    let m2 = p.m_q() * p.m_q();
    require_positive(m2, "m_q")?;
    let g = g_psi(st, p);
    Ok(q_tilde_a_with(st, nu, p, &g))
}

pub(crate) fn q_tilde_a_with(st: &PointState, nu: usize, p: &CouplingParams, g: &Spinor) -> f64 {
    let m2 = p.m_q() * p.m_q();
    let q = p.q;
    let mg = p.m_g();
    let mat = dirac().g0g[nu];
    let j = current(&st.psi, nu);
    let q0 = null_q0_spinor(&st.dpsi, &mat).re;
    let cross = mat.bilinear(g, &st.psi).re + mat.bilinear(&st.psi, g).re;
    q_a(st, nu, p) - q * j - 2.0 * q / m2 * q0 - q / m2 * cross + 2.0 * q * mg * mg / m2 * j
}

/// `χ̃₊ = χ₊ - (2m_g/m_λ²) ψ*γ⁰ψ`.
pub fn transform_chi_plus(chi: C64, psi: &Spinor, p: &CouplingParams) -> Result<C64> {
    let ml2 = p.m_lambda() * p.m_lambda();
    require_positive(ml2, "m_lambda")?;
    Ok(chi_pm(chi, p).0 - 2.0 * p.m_g() / ml2 * scalar_density(psi))
}

/// Source of `(□ - m_λ²)χ₊`, i.e. `φ₀* Q_χ + Q_χ* φ₀`.
pub fn q_chi_plus(st: &PointState, p: &CouplingParams) -> C64 {
    let qc = q_chi(st, p);
    p.phi0.conj() * qc + qc.conj() * p.phi0
}

/// Source of `(□ - m_q²)χ₋`, i.e. `φ₀* Q_χ - Q_χ* φ₀`.
pub fn q_chi_minus(st: &PointState, p: &CouplingParams) -> C64 {
    let qc = q_chi(st, p);
    p.phi0.conj() * qc - qc.conj() * p.phi0
}

/// The expanded `χ₊` source written for a real ground state `φ₀ = v`.
pub fn q_chi_plus_expanded(st: &PointState, p: &CouplingParams) -> C64 {
    let (q, l, v2) = (p.q, p.lambda, p.v * p.v);
    let (chi_p, chi_m) = chi_pm(st.chi, p);
    let mut dchi_m = [ZERO; 4];
    for (mu, d) in dchi_m.iter_mut().enumerate() {
        let a = p.phi0.conj() * st.dchi[mu];
        *d = a - a.conj();
    }
    let mut a_d = ZERO;
    for mu in 0..4 {
        a_d += dchi_m[mu] * st.a[mu];
    }
    let aa = minkowski_dot(&st.a, &st.a);
    let n2 = st.chi.norm_sqr();
    let k = scalar_density(&st.psi);
    I * (2.0 * q) * a_d + chi_m * chi_m * (q * q) + (chi_p + 2.0 * v2) * (q * q * aa) + C64::new(4.0 * l * v2 * n2, 0.0)
        + chi_p * chi_p * (2.0 * l)
        + chi_p * (2.0 * l * n2)
        - (chi_p + 2.0 * v2) * (p.g * k)
}

/// The expanded `χ₋` source written for a real ground state `φ₀ = v`.
pub fn q_chi_minus_expanded(st: &PointState, p: &CouplingParams) -> C64 {
    let (q, l) = (p.q, p.lambda);
    let (chi_p, chi_m) = chi_pm(st.chi, p);
    let mut a_d = ZERO;
    for mu in 0..4 {
        let a = p.phi0.conj() * st.dchi[mu];
        a_d += (a + a.conj()) * st.a[mu];
    }
    let aa = minkowski_dot(&st.a, &st.a);
    let n2 = st.chi.norm_sqr();
    I * (2.0 * q) * a_d + chi_m * chi_p * (q * q) + chi_m * (q * q * aa) + chi_m * chi_p * (2.0 * l)
        + chi_m * (2.0 * l * n2)
        - chi_m * (p.g * scalar_density(&st.psi))
}

/// Source of `(□ - m_λ²)χ̃₊`:
/// `Q_{χ₊} + 2m_g K - (4m_g³/m_λ²) K + (2m_g/m_λ²)(G*γ⁰ψ + ψ*γ⁰G) + (4m_g/m_λ²) Q₀(ψ, γ⁰ψ)`
/// with `K = ψ*γ⁰ψ`.
pub fn q_tilde_chi_plus(st: &PointState, p: &CouplingParams) -> Result<C64> {
    let ml2 = p.m_lambda() * p.m_lambda();
    require_positive(ml2, "m_lambda")?;
    let g = g_psi(st, p);
    Ok(q_tilde_chi_plus_with(st, p, &g))
}

pub(crate) fn q_tilde_chi_plus_with(st: &PointState, p: &CouplingParams, g: &Spinor) -> C64 {
    let ml2 = p.m_lambda() * p.m_lambda();
    let mg = p.m_g();
    let k = scalar_density(&st.psi);
    let g0 = dirac().set.gamma[0];
    let cross = g.dot(&gamma0_apply(&st.psi)).re + st.psi.dot(&gamma0_apply(g)).re;
    let q0 = null_q0_spinor(&st.dpsi, &g0).re;
    q_chi_plus(st, p) + 2.0 * mg * k - 4.0 * mg * mg * mg / ml2 * k + 2.0 * mg / ml2 * cross + 4.0 * mg / ml2 * q0
}

/// Dirac-Proca couplings: the right-hand sides of
/// `(□ - m²)A^ν = -ψ*γ⁰γ^ν P_Lψ` and `-iγ^μ∂_μψ + Mψ = -γ^μA_μ P_Lψ`.
pub fn dp_sources(st: &PointState) -> ([f64; 4], Spinor) {
    let pl = dirac().p_left;
    let left = pl * st.psi;
    let a_src = std::array::from_fn(|nu| -dirac().g0g[nu].bilinear(&st.psi, &left).re);
    let psi_src = -slash_apply(st.a, &left);
    (a_src, psi_src)
}

/// `|iψ*γ⁰Hψ - i(Hψ)*γ⁰ψ|` with `H = g(χ₊ + |χ|²) - qγ^μA_μ`.
pub fn coupling_hermiticity_defect(st: &PointState, p: &CouplingParams) -> f64 {
    let h_psi = q_psi(st, p);
    let a = st.psi.dot(&gamma0_apply(&h_psi));
    let b = h_psi.dot(&gamma0_apply(&st.psi));
    (I * a - I * b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{gamma, ONE};

    fn unit_params() -> CouplingParams {
        CouplingParams::new(1.0, 0.5, 0.25, 1.0).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn masses_follow_couplings() {
        let p = CouplingParams::new(0.5, 0.3, 0.2, 2.0).unwrap();
        assert!((p.m_q().powi(2) - 2.0 * 0.25 * 4.0).abs() < 1e-14);
        assert!((p.m_lambda().powi(2) - 4.0 * 0.2 * 4.0).abs() < 1e-14);
        assert!((p.m_g() - 1.2).abs() < 1e-14);
        let r = CouplingParams::from_masses(1.0, 1.5, 0.7, 1.3).unwrap();
        assert!((r.m_q() - 1.0).abs() < 1e-14 && (r.m_lambda() - 1.5).abs() < 1e-14 && (r.m_g() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn theorem_regime_guard() {
        assert!(CouplingParams::from_masses(1.0, 1.0, 1.0, 1.0).unwrap().check_theorem_regime().is_ok());
        assert!(CouplingParams::from_masses(1.0, 2.0, 1.5, 1.0).unwrap().check_theorem_regime().is_err());
        assert!(CouplingParams::new(0.0, 0.1, 0.1, 1.0).is_err());
        assert!(CouplingParams::new(1.0, 0.1, 0.1, 1.0).unwrap().with_phi0(c(0.0, 2.0)).is_err());
    }

    #[test]
    fn vacuum_sources_vanish() {
        let p = unit_params();
        let st = PointState::default();
        for nu in 0..4 {
            assert_eq!(q_a(&st, nu, &p), 0.0);
        }
        assert_eq!(q_chi(&st, &p), ZERO);
        assert_eq!(q_psi(&st, &p), Spinor::zero());
        assert_eq!(q_chi_plus(&st, &p), ZERO);
        assert_eq!(q_chi_minus(&st, &p), ZERO);
        assert_eq!(q_tilde_chi_plus(&st, &p).unwrap(), ZERO);
    }

    #[test]
    fn current_source_example() {
        let p = unit_params();
        let st = PointState { psi: Spinor::from_real([1.0, 0.0, 0.0, 0.0]), ..Default::default() };
        assert!((q_a(&st, 0, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn real_chi_gauge_source() {
        // φ₀ = v real, real χ, no derivatives, no spinor: only 2q²A^ν(2vχ + χ²)
        let p = CouplingParams::new(0.7, 0.2, 0.3, 1.5).unwrap();
        let x = 0.4;
        let st = PointState { a: [0.3, -0.2, 0.5, 0.1], chi: c(x, 0.0), ..Default::default() };
        for nu in 0..4 {
            let expect = 2.0 * p.q * p.q * st.a[nu] * (2.0 * p.v * x + x * x);
            assert!((q_a(&st, nu, &p) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn spinor_source_example() {
        let p = CouplingParams::new(1.0, 0.3, 0.25, 1.0).unwrap();
        let st = PointState { a: [1.0, 0.0, 0.0, 0.0], psi: Spinor::from_real([1.0, 0.0, 0.0, 0.0]), ..Default::default() };
        assert!(q_psi(&st, &p).max_abs_diff(&Spinor::from_real([1.0, 0.0, 0.0, 0.0])) < 1e-15);
        let decoupled = CouplingParams { g: 0.0, ..p };
        let st2 = PointState { chi: c(0.3, 0.1), psi: Spinor::from_real([1.0, 2.0, 0.0, 1.0]), ..Default::default() };
        assert_eq!(q_psi(&st2, &decoupled), Spinor::zero());
    }

    #[test]
    fn null_form_examples() {
        // plane wave e^{i(t - x)}: ∂_t = i, ∂_1 = -i
        let d = [I, -I, ZERO, ZERO];
        assert!(null_q0(&d, &d).norm() < 1e-15);
        let t = [ONE, ZERO, ZERO, ZERO];
        assert_eq!(null_q0(&t, &t), ONE);
    }

    #[test]
    fn transformed_variables_examples() {
        let p = CouplingParams::new(1.0, 0.2, 0.25, 1.0).unwrap();
        assert!((p.m_q().powi(2) - 2.0).abs() < 1e-14);
        let st = PointState { psi: Spinor::from_real([1.0, 0.0, 0.0, 0.0]), ..Default::default() };
        assert!((transform_a(&st, 0, &p).unwrap() - 0.5).abs() < 1e-15);
        let bare = PointState { a: [0.1, 0.2, 0.3, 0.4], chi: c(0.2, -0.1), ..Default::default() };
        for nu in 0..4 {
            assert_eq!(transform_a(&bare, nu, &p).unwrap(), bare.a[nu]);
            assert!((q_tilde_a(&bare, nu, &p).unwrap() - q_a(&bare, nu, &p)).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_pm_examples() {
        let p = CouplingParams::new(1.0, 0.2, 0.25, 1.5).unwrap();
        let (cp, cm) = chi_pm(c(0.3, -0.7), &p);
        assert!((cp - c(2.0 * 1.5 * 0.3, 0.0)).norm() < 1e-15);
        assert!((cm - c(0.0, 2.0 * 1.5 * -0.7)).norm() < 1e-15);
        assert_eq!(chi_pm(ZERO, &p), (ZERO, ZERO));
    }

    #[test]
    fn chi_plus_sources_isolated_terms() {
        let p = CouplingParams::new(0.8, 0.3, 0.2, 1.2).unwrap();
        let psi = Spinor::new(c(0.3, 0.1), c(-0.2, 0.4), c(0.5, 0.0), c(0.1, -0.3));
        let st = PointState { psi, ..Default::default() };
        let k = scalar_density(&psi);
        assert!((q_chi_plus(&st, &p) - c(-2.0 * p.g * p.v * p.v * k, 0.0)).norm() < 1e-14);
        let a = [0.4, 0.1, -0.3, 0.2];
        let st = PointState { a, ..Default::default() };
        let expect = p.q * p.q * minkowski_dot(&a, &a) * 2.0 * p.v * p.v;
        assert!((q_chi_plus(&st, &p) - c(expect, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn tilde_chi_plus_spinor_coefficient_is_cubic() {
        let psi = Spinor::new(c(0.3, 0.1), c(-0.2, 0.4), c(0.1, 0.0), c(0.1, -0.3));
        let st = PointState { psi, ..Default::default() };
        let k = scalar_density(&psi);
        for &mg in &[0.0, 0.1, 0.5, 0.9] {
            let p = CouplingParams::from_masses(1.0, 1.2, mg, 1.0).unwrap();
            let val = q_tilde_chi_plus(&st, &p).unwrap();
            let expect = -4.0 * mg.powi(3) / 1.44 * k;
            assert!((val - c(expect, 0.0)).norm() < 1e-14, "mg={mg}: {val} vs {expect}");
        }
    }

    #[test]
    fn dirac_proca_examples() {
        let st = PointState::default();
        let (a, s) = dp_sources(&st);
        assert_eq!(a, [0.0; 4]);
        assert_eq!(s, Spinor::zero());
        let right = PointState { psi: Spinor::from_real([1.0, 0.0, 1.0, 0.0]), a: [0.3, 0.1, 0.2, 0.4], ..Default::default() };
        let (a, s) = dp_sources(&right);
        assert!(a.iter().all(|x| x.abs() < 1e-15) && s.norm() < 1e-15);
        let left = PointState { psi: Spinor::from_real([1.0, 0.0, -1.0, 0.0]), ..Default::default() };
        let (a, _) = dp_sources(&left);
        assert!((a[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn g_psi_uses_full_dirac_operator() {
        // constant fields except ψ linear in x¹: G = -m_g Q - iγ¹ ∂₁Q
        let p = CouplingParams::new(0.9, 0.4, 0.3, 1.1).unwrap();
        let psi = Spinor::new(c(0.2, 0.1), c(0.0, 0.3), c(-0.1, 0.0), c(0.2, 0.2));
        let d1 = Spinor::new(c(0.5, 0.0), c(0.1, -0.2), c(0.0, 0.3), c(-0.4, 0.1));
        let mut st = PointState { psi, chi: c(0.1, 0.05), a: [0.2, 0.1, 0.0, -0.1], ..Default::default() };
        st.dpsi[1] = d1;
        let (cp, _) = chi_pm(st.chi, &p);
        let s = cp.re + st.chi.norm_sqr();
        let dq1 = d1 * (p.g * s) - slash(st.a) * d1 * p.q;
        let expect = q_psi(&st, &p) * (-p.m_g()) - (gamma(1).unwrap() * dq1) * I;
        assert!(g_psi(&st, &p).max_abs_diff(&expect) < 1e-14);
    }

    use crate::clifford::slash;
}
