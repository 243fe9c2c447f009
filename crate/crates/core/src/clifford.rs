//! Dirac-representation gamma matrices, chiral projectors, the Weyl split and
//! the lower-triangular factor of the hyperboloidal energy matrix.
//!
//! Signature is (-, +, +, +). With that choice the Clifford relation reads
//! `{γ^μ, γ^ν} = -2 η^{μν} I`, so `(γ^0)^2 = I` and `(γ^j)^2 = -I`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};
use std::sync::LazyLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Minkowski metric diagonal, `η = diag(-1, 1, 1, 1)`.
pub const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

/// Four complex amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Spinor(pub [C64; 4]);

impl Spinor {
    pub const fn zero() -> Self {
        Spinor([ZERO; 4])
    }

    pub fn new(c0: C64, c1: C64, c2: C64, c3: C64) -> Self {
        Spinor([c0, c1, c2, c3])
    }

    pub fn from_real(v: [f64; 4]) -> Self {
        Spinor(v.map(|x| C64::new(x, 0.0)))
    }

    /// `self* · other`, antilinear in `self`.
    #[inline]
    pub fn dot(&self, other: &Spinor) -> C64 {
        let mut acc = ZERO;
        for k in 0..4 {
            acc += self.0[k].conj() * other.0[k];
        }
        acc
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, z: C64) -> Spinor {
        Spinor(self.0.map(|c| c * z))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Spinor) -> f64 {
        (0..4).map(|k| (self.0[k] - other.0[k]).norm()).fold(0.0, f64::max)
    }
}

impl Index<usize> for Spinor {
    type Output = C64;
    fn index(&self, k: usize) -> &C64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for Spinor {
    fn index_mut(&mut self, k: usize) -> &mut C64 {
        &mut self.0[k]
    }
}

impl Add for Spinor {
    type Output = Spinor;
    #[inline]
    fn add(self, o: Spinor) -> Spinor {
        Spinor([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Sub for Spinor {
    type Output = Spinor;
    #[inline]
    fn sub(self, o: Spinor) -> Spinor {
        Spinor([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2], self.0[3] - o.0[3]])
    }
}

impl AddAssign for Spinor {
    fn add_assign(&mut self, o: Spinor) {
        *self = *self + o;
    }
}

impl SubAssign for Spinor {
    fn sub_assign(&mut self, o: Spinor) {
        *self = *self - o;
    }
}

impl Neg for Spinor {
    type Output = Spinor;
    fn neg(self) -> Spinor {
        Spinor(self.0.map(|z| -z))
    }
}

impl Mul<f64> for Spinor {
    type Output = Spinor;
    #[inline]
    fn mul(self, a: f64) -> Spinor {
        Spinor(self.0.map(|z| z * a))
    }
}

impl Mul<C64> for Spinor {
    type Output = Spinor;
    #[inline]
    fn mul(self, a: C64) -> Spinor {
        Spinor(self.0.map(|z| z * a))
    }
}

/// Dense 4x4 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix4C(pub [[C64; 4]; 4]);

impl Default for Matrix4C {
    fn default() -> Self {
        Self::zero()
    }
}

impl Matrix4C {
    pub const fn zero() -> Self {
        Matrix4C([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 4])
    }

    pub fn diag(d: [C64; 4]) -> Self {
        let mut m = Self::zero();
        for k in 0..4 {
            m.0[k][k] = d[k];
        }
        m
    }

    /// Assemble from 2x2 blocks `[[a, b], [c, d]]`.
    pub fn from_blocks(a: [[C64; 2]; 2], b: [[C64; 2]; 2], c: [[C64; 2]; 2], d: [[C64; 2]; 2]) -> Self {
        let mut m = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] = a[i][j];
                m.0[i][j + 2] = b[i][j];
                m.0[i + 2][j] = c[i][j];
                m.0[i + 2][j + 2] = d[i][j];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|k| self.0[k][k]).sum()
    }

    pub fn scale(&self, z: C64) -> Self {
        Matrix4C(self.0.map(|row| row.map(|e| e * z)))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix4C) -> f64 {
        let mut m = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                m = m.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_diff(&Self::zero())
    }

    pub fn is_lower_triangular(&self, tol: f64) -> bool {
        (0..4).all(|i| (i + 1..4).all(|j| self.0[i][j].norm() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `psi* · M · phi`.
    #[inline]
    pub fn bilinear(&self, psi: &Spinor, phi: &Spinor) -> C64 {
        psi.dot(&(*self * *phi))
    }
}

impl Mul for Matrix4C {
    type Output = Matrix4C;
    fn mul(self, o: Matrix4C) -> Matrix4C {
        let mut m = Matrix4C::zero();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = ZERO;
                for k in 0..4 {
                    acc += self.0[i][k] * o.0[k][j];
                }
                m.0[i][j] = acc;
            }
        }
        m
    }
}

impl Mul<Spinor> for Matrix4C {
    type Output = Spinor;
    #[inline]
    fn mul(self, v: Spinor) -> Spinor {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2] + self.0[i][3] * v.0[3];
        }
        Spinor(out)
    }
}

impl Mul<C64> for Matrix4C {
    type Output = Matrix4C;
    fn mul(self, z: C64) -> Matrix4C {
        self.scale(z)
    }
}

impl Mul<f64> for Matrix4C {
    type Output = Matrix4C;
    fn mul(self, a: f64) -> Matrix4C {
        self.scale(C64::new(a, 0.0))
    }
}

impl Add for Matrix4C {
    type Output = Matrix4C;
    fn add(self, o: Matrix4C) -> Matrix4C {
        let mut m = self;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] += o.0[i][j];
            }
        }
        m
    }
}

impl Sub for Matrix4C {
    type Output = Matrix4C;
    fn sub(self, o: Matrix4C) -> Matrix4C {
        self + o * -1.0
    }
}

impl Neg for Matrix4C {
    type Output = Matrix4C;
    fn neg(self) -> Matrix4C {
        self * -1.0
    }
}

pub fn commutator(a: &Matrix4C, b: &Matrix4C) -> Matrix4C {
    *a * *b - *b * *a
}

pub fn anticommutator(a: &Matrix4C, b: &Matrix4C) -> Matrix4C {
    *a * *b + *b * *a
}

/// Pauli matrix `σ^j`, `j` in 1..=3.
pub fn pauli(j: usize) -> Result<[[C64; 2]; 2]> {
    match j {
        1 => Ok([[ZERO, ONE], [ONE, ZERO]]),
        2 => Ok([[ZERO, -I], [I, ZERO]]),
        3 => Ok([[ONE, ZERO], [ZERO, -ONE]]),
        _ => Err(Error::IndexOutOfRange { what: "pauli", index: j }),
    }
}

fn neg2(m: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    m.map(|r| r.map(|z| -z))
}

const Z2: [[C64; 2]; 2] = [[ZERO; 2]; 2];
const I2: [[C64; 2]; 2] = [[ONE, ZERO], [ZERO, ONE]];

/// A full set of `γ^0..γ^3` together with the matrices derived from it.
///
/// The standard set is [`GammaSet::dirac`]; other sets exist only so the
/// identity suite can be pointed at a deliberately broken algebra.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSet {
    pub gamma: [Matrix4C; 4],
}

impl GammaSet {
    pub fn dirac() -> Self {
        let mut g = [Matrix4C::zero(); 4];
        g[0] = Matrix4C::from_blocks(I2, Z2, Z2, neg2(I2));
        for j in 1..4 {
            let s = pauli(j).expect("valid pauli index");
            g[j] = Matrix4C::from_blocks(Z2, s, neg2(s), Z2);
        }
        GammaSet { gamma: g }
    }

    /// `γ₅ = i γ^0 γ^1 γ^2 γ^3`.
    pub fn gamma5(&self) -> Matrix4C {
        (self.gamma[0] * self.gamma[1] * self.gamma[2] * self.gamma[3]).scale(I)
    }

    /// `(P_L, P_R) = (½(I - γ₅), ½(I + γ₅))`.
    pub fn projectors(&self) -> (Matrix4C, Matrix4C) {
        let g5 = self.gamma5();
        let id = Matrix4C::identity();
        ((id - g5) * 0.5, (id + g5) * 0.5)
    }

    /// `γ^0 γ^μ`, the matrix of the current `ψ* γ^0 γ^μ ψ`.
    pub fn g0g(&self, mu: usize) -> Matrix4C {
        self.gamma[0] * self.gamma[mu]
    }
}

static DIRAC: LazyLock<Dirac> = LazyLock::new(Dirac::build);

/// Cached standard matrices.
pub struct Dirac {
    pub set: GammaSet,
    pub gamma5: Matrix4C,
    pub p_left: Matrix4C,
    pub p_right: Matrix4C,
    /// `γ^0 γ^μ`.
    pub g0g: [Matrix4C; 4],
}

impl Dirac {
    fn build() -> Self {
        let set = GammaSet::dirac();
        let (p_left, p_right) = set.projectors();
        Dirac {
            set,
            gamma5: set.gamma5(),
            p_left,
            p_right,
            g0g: [set.g0g(0), set.g0g(1), set.g0g(2), set.g0g(3)],
        }
    }
}

/// The cached standard Dirac-representation matrices.
pub fn dirac() -> &'static Dirac {
    &DIRAC
}

pub fn gamma(mu: usize) -> Result<Matrix4C> {
    if mu > 3 {
        return Err(Error::IndexOutOfRange { what: "gamma", index: mu });
    }
    Ok(DIRAC.set.gamma[mu])
}

pub fn gamma5() -> Matrix4C {
    DIRAC.gamma5
}

pub fn projectors() -> (Matrix4C, Matrix4C) {
    (DIRAC.p_left, DIRAC.p_right)
}

/// `γ^μ A_μ` for a contravariant `a = A^μ`.
pub fn slash(a: [f64; 4]) -> Matrix4C {
    let g = &DIRAC.set.gamma;
    let mut m = Matrix4C::zero();
    for mu in 0..4 {
        m = m + g[mu] * (ETA[mu] * a[mu]);
    }
    m
}

/// Apply `γ^μ A_μ` to a spinor without forming the matrix.
#[inline]
pub fn slash_apply(a: [f64; 4], psi: &Spinor) -> Spinor {
    // γ^0 = diag(1,1,-1,-1); γ^j = [[0, σ^j], [-σ^j, 0]]
    let [p0, p1, p2, p3] = psi.0;
    let a0 = -a[0];
    let (a1, a2, a3) = (a[1], a[2], a[3]);
    // σ·a acting on lower and upper halves
    let sl0 = p2 * a3 + p3 * C64::new(a1, -a2);
    let sl1 = p2 * C64::new(a1, a2) - p3 * a3;
    let su0 = p0 * a3 + p1 * C64::new(a1, -a2);
    let su1 = p0 * C64::new(a1, a2) - p1 * a3;
    Spinor([p0 * a0 + sl0, p1 * a0 + sl1, -p2 * a0 - su0, -p3 * a0 - su1])
}

/// Apply `γ^0`.
#[inline]
pub fn gamma0_apply(psi: &Spinor) -> Spinor {
    Spinor([psi.0[0], psi.0[1], -psi.0[2], -psi.0[3]])
}

/// Apply `γ^0 γ^j`, which is `[[0, σ^j], [σ^j, 0]]`.
#[inline]
pub fn alpha_apply(j: usize, psi: &Spinor) -> Spinor {
    let [p0, p1, p2, p3] = psi.0;
    match j {
        1 => Spinor([p3, p2, p1, p0]),
        2 => Spinor([-I * p3, I * p2, -I * p1, I * p0]),
        3 => Spinor([p2, -p3, p0, -p1]),
        _ => panic!("alpha index {j} out of range"),
    }
}

/// The chiral split `ψ = (u + v, u - v)` with two-component `u`, `v`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeylPair {
    pub u: [C64; 2],
    pub v: [C64; 2],
}

pub fn weyl_split(psi: &Spinor) -> WeylPair {
    let p = psi.0;
    WeylPair {
        u: [(p[0] + p[2]) * 0.5, (p[1] + p[3]) * 0.5],
        v: [(p[0] - p[2]) * 0.5, (p[1] - p[3]) * 0.5],
    }
}

pub fn weyl_join(w: &WeylPair) -> Spinor {
    Spinor([w.u[0] + w.v[0], w.u[1] + w.v[1], w.u[0] - w.v[0], w.u[1] - w.v[1]])
}

fn sigma_dot(n: [f64; 3]) -> [[C64; 2]; 2] {
    [[C64::new(n[2], 0.0), C64::new(n[0], -n[1])], [C64::new(n[0], n[1]), C64::new(-n[2], 0.0)]]
}

fn check_ratio(n: [f64; 3], sigma: f64) -> Result<()> {
    let nn = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    if !(nn < 1.0) {
        return Err(Error::OutsideCone { t: 1.0, r: nn.sqrt() });
    }
    let expected = (1.0 - nn).sqrt();
    if (sigma - expected).abs() > 1e-12 {
        return Err(Error::SigmaMismatch { sigma, expected });
    }
    Ok(())
}

/// `I + n_j γ^0 γ^j` for `n = x/t`.
pub fn cone_matrix(n: [f64; 3]) -> Matrix4C {
    let mut a = Matrix4C::identity();
    for j in 0..3 {
        a = a + DIRAC.g0g[j + 1] * n[j];
    }
    a
}

/// Lower-triangular factor with `P* P = I + n_j γ^0 γ^j`, `n = x/t`, `sigma = s/t`.
///
/// Explicitly `P = [[σ I₂, 0], [n·σ⃗, I₂]]`.
pub fn cholesky_p(n: [f64; 3], sigma: f64) -> Result<Matrix4C> {
    check_ratio(n, sigma)?;
    let s = C64::new(sigma, 0.0);
    Ok(Matrix4C::from_blocks([[s, ZERO], [ZERO, s]], Z2, sigma_dot(n), I2))
}

/// The same factor written through gamma matrices:
/// `(σ+1)/2 I + (σ-1)/2 γ^0 + n_j ½(I - γ^0) γ^0 γ^j`.
pub fn cholesky_p_gamma_form(n: [f64; 3], sigma: f64) -> Result<Matrix4C> {
    check_ratio(n, sigma)?;
    let id = Matrix4C::identity();
    let g0 = DIRAC.set.gamma[0];
    let lower = (id - g0) * 0.5;
    let mut p = id * ((sigma + 1.0) / 2.0) + g0 * ((sigma - 1.0) / 2.0);
    for j in 0..3 {
        p = p + lower * DIRAC.g0g[j + 1] * n[j];
    }
    Ok(p)
}

/// `(σ+1)/2 I + (σ-1)/2 γ^0 + n_j γ^0 γ^j` without the lower projector.
///
/// Kept only to quantify how far it is from the triangular factor; it is
/// Hermitian, not lower triangular.
pub fn cholesky_p_unprojected_form(n: [f64; 3], sigma: f64) -> Result<Matrix4C> {
    check_ratio(n, sigma)?;
    let id = Matrix4C::identity();
    let g0 = DIRAC.set.gamma[0];
    let mut p = id * ((sigma + 1.0) / 2.0) + g0 * ((sigma - 1.0) / 2.0);
    for j in 0..3 {
        p = p + DIRAC.g0g[j + 1] * n[j];
    }
    Ok(p)
}

/// Which sign the constant part of the modified boost carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoostSign {
    /// `½ γ_0 γ_a = -½ γ^0 γ^a`, the one commuting with the Dirac operator.
    Lowered,
    /// `+½ γ^0 γ^a`.
    Raised,
}

/// Constant matrix part of the modified boost `L̂_a = L_a + ½ γ_0 γ_a`.
///
/// Lowering with `η` gives `γ_0 = -γ^0` and `γ_a = γ^a`, hence `-½ γ^0 γ^a`.
pub fn modified_boost_matrix(a: usize) -> Result<Matrix4C> {
    boost_matrix_with_sign(a, BoostSign::Lowered)
}

pub fn boost_matrix_with_sign(a: usize, sign: BoostSign) -> Result<Matrix4C> {
    if !(1..=3).contains(&a) {
        return Err(Error::IndexOutOfRange { what: "boost", index: a });
    }
    let f = match sign {
        BoostSign::Lowered => -0.5,
        BoostSign::Raised => 0.5,
    };
    Ok(DIRAC.g0g[a] * f)
}
