//! Small dense complex linear algebra for one- and two-qubit operators.
//!
//! Everything here works on fixed-size `N x N` matrices with `N` equal to 2
//! (one qubit) or 4 (charger and battery together). Two-qubit objects are
//! always ordered **charger ⊗ battery**, and within each qubit index 0 is the
//! excited state `|↑ᶻ⟩`, index 1 the ground state `|↓ᶻ⟩`. The labeled
//! constructors [`on_charger`], [`on_battery`] and [`Ket4::product`] are the
//! only places that encode this ordering.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Hermiticity tolerance, relative to `max(1, max |m_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as round-off and clamped.
const PSD_CLAMP: f64 = 1e-6;

/// Dense row-major complex matrix of fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize>(pub [[C64; N]; N]);

pub type Mat2 = CMat<2>;
pub type Mat4 = CMat<4>;

impl<const N: usize> Default for CMat<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> CMat<N> {
    pub const DIM: usize = N;

    pub const fn zeros() -> Self {
        CMat([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        Self::from_real_diag([1.0; N])
    }

    pub fn from_real_diag(d: [f64; N]) -> Self {
        let mut m = Self::zeros();
        for (i, &v) in d.iter().enumerate() {
            m.0[i][i] = C64::new(v, 0.0);
        }
        m
    }

    /// Builds a matrix from `N²` row-major entries.
    pub fn from_row_major(entries: &[C64]) -> Result<Self> {
        if entries.len() != N * N {
            return Err(Error::DimensionMismatch { expected: N * N, found: entries.len() });
        }
        let mut m = Self::zeros();
        for (k, &z) in entries.iter().enumerate() {
            m.0[k / N][k % N] = z;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        N
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    /// Elementwise complex conjugate (not the adjoint).
    pub fn conj(&self) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for z in row.iter_mut() {
                *z = z.conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for z in row.iter_mut() {
                *z *= factor;
            }
        }
        out
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for z in row.iter_mut() {
                *z *= factor;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// `max |m - m†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).max_abs_diff(&Self::identity()) <= tol
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_real(0.5)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// `self · m · self†`
    pub fn sandwich(&self, m: &Self) -> Self {
        *self * *m * self.adjoint()
    }

    fn check_hermitian(&self) -> Result<()> {
        let deviation = self.hermiticity_defect();
        if deviation > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }
}

impl<const N: usize> Index<(usize, usize)> for CMat<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMat<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for CMat<N> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Neg for CMat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_real(-1.0)
    }
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<const N: usize> Mul<C64> for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: C64) -> Self {
        self.scale(rhs)
    }
}

impl<const N: usize> Mul<f64> for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale_real(rhs)
    }
}

// Single-qubit operators in the (↑ᶻ, ↓ᶻ) basis.

pub const fn identity2() -> Mat2 {
    CMat([[ONE, ZERO], [ZERO, ONE]])
}

pub const fn sigma_x() -> Mat2 {
    CMat([[ZERO, ONE], [ONE, ZERO]])
}

pub const fn sigma_y() -> Mat2 {
    CMat([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]])
}

pub const fn sigma_z() -> Mat2 {
    CMat([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]])
}

/// Raising operator `σ⁺ = |↑⟩⟨↓|`.
pub const fn sigma_plus() -> Mat2 {
    CMat([[ZERO, ONE], [ZERO, ZERO]])
}

/// Lowering operator `σ⁻ = |↓⟩⟨↑|`.
pub const fn sigma_minus() -> Mat2 {
    CMat([[ZERO, ZERO], [ONE, ZERO]])
}

/// Tensor product `a ⊗ b`.
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    out
}

/// Dynamically sized front end to [`kron`] for callers holding row-major
/// buffers.
pub fn kron_dyn(a: &[C64], b: &[C64]) -> Result<Mat4> {
    let a = Mat2::from_row_major(a)?;
    let b = Mat2::from_row_major(b)?;
    Ok(kron(&a, &b))
}

/// `op ⊗ 𝟙`: a single-qubit operator acting on the charger.
pub fn on_charger(op: &Mat2) -> Mat4 {
    kron(op, &identity2())
}

/// `𝟙 ⊗ op`: a single-qubit operator acting on the battery.
pub fn on_battery(op: &Mat2) -> Mat4 {
    kron(&identity2(), op)
}

/// Result of [`hermitian_eigen`]: `m = V diag(values) V†`.
#[derive(Clone, Copy, Debug)]
pub struct HermitianEigen<const N: usize> {
    /// Sorted descending.
    pub values: [f64; N],
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: CMat<N>,
}

impl<const N: usize> HermitianEigen<N> {
    pub fn vector(&self, k: usize) -> [C64; N] {
        std::array::from_fn(|i| self.vectors.0[i][k])
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMat<N> {
        let v = &self.vectors.0;
        let fl: [C64; N] = std::array::from_fn(|k| f(self.values[k]));
        let mut out = CMat::<N>::zeros();
        for i in 0..N {
            for j in 0..N {
                let mut acc = ZERO;
                for k in 0..N {
                    acc += v[i][k] * fl[k] * v[j][k].conj();
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMat<N> {
        self.map(|l| C64::new(l, 0.0))
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
pub fn hermitian_eigen<const N: usize>(m: &CMat<N>) -> Result<HermitianEigen<N>> {
    m.check_hermitian()?;
    let mut a = m.hermitian_part();
    let mut v = CMat::<N>::identity();
    let scale = a.frobenius_norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.0[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a.0[j][j].re.total_cmp(&a.0[i][i].re));
    let values = std::array::from_fn(|k| a.0[order[k]][order[k]].re);
    let mut vectors = CMat::<N>::zeros();
    for (k, &src) in order.iter().enumerate() {
        for i in 0..N {
            vectors.0[i][k] = v.0[i][src];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// One two-sided rotation `a ← G† a G`, `v ← v G` annihilating `a[p][q]`.
fn jacobi_rotate<const N: usize>(a: &mut CMat<N>, v: &mut CMat<N>, p: usize, q: usize) {
    let apq = a.0[p][q];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    // Phase e^{-iφ} makes the (p, q) element real and positive, then a real
    // rotation finishes the 2x2 block.
    let phase = apq.conj() / b;
    let app = a.0[p][p].re;
    let aqq = a.0[q][q].re;
    let theta = (aqq - app) / (2.0 * b);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // G restricted to (p, q): [[c, s], [-s·phase, c·phase]].
    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = phase * (-s);
    let g_qq = phase * c;

    // a ← a G (columns p, q)
    for i in 0..N {
        let aip = a.0[i][p];
        let aiq = a.0[i][q];
        a.0[i][p] = aip * g_pp + aiq * g_qp;
        a.0[i][q] = aip * g_pq + aiq * g_qq;
    }
    // a ← G† a (rows p, q)
    for j in 0..N {
        let apj = a.0[p][j];
        let aqj = a.0[q][j];
        a.0[p][j] = g_pp.conj() * apj + g_qp.conj() * aqj;
        a.0[q][j] = g_pq.conj() * apj + g_qq.conj() * aqj;
    }
    a.0[p][q] = ZERO;
    a.0[q][p] = ZERO;
    a.0[p][p].im = 0.0;
    a.0[q][q].im = 0.0;

    for i in 0..N {
        let vip = v.0[i][p];
        let viq = v.0[i][q];
        v.0[i][p] = vip * g_pp + viq * g_qp;
        v.0[i][q] = vip * g_pq + viq * g_qq;
    }
}

/// `exp(factor · h)` for Hermitian `h`, via its eigendecomposition.
pub fn expm_hermitian_scaled<const N: usize>(h: &CMat<N>, factor: C64) -> Result<CMat<N>> {
    let eig = hermitian_eigen(h)?;
    Ok(eig.map(|l| (factor * l).exp()))
}

/// Principal square root of a positive-semidefinite Hermitian matrix.
pub fn psd_sqrt<const N: usize>(m: &CMat<N>) -> Result<CMat<N>> {
    let eig = hermitian_eigen(m)?;
    let min = eig.values[N - 1];
    if min < -PSD_CLAMP {
        return Err(Error::NegativeEigenvalue(min));
    }
    // eigenvalues at roundoff level are zero; their square roots are not small
    let floor = 1e-13 * eig.values[0].abs().max(f64::MIN_POSITIVE);
    Ok(eig.map(|l| C64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0)).hermitian_part())
}

/// Hermitian matrix with its negative eigenvalues set to zero.
pub fn psd_part<const N: usize>(m: &CMat<N>) -> Result<CMat<N>> {
    let eig = hermitian_eigen(m)?;
    Ok(eig.map(|l| C64::new(l.max(0.0), 0.0)).hermitian_part())
}

/// Reduced state of the battery, `Tr_A ρ`.
pub fn partial_trace_charger(rho: &Mat4) -> Mat2 {
    let mut out = Mat2::zeros();
    for j in 0..2 {
        for k in 0..2 {
            out.0[j][k] = rho.0[j][k] + rho.0[2 + j][2 + k];
        }
    }
    out
}

/// Reduced state of the charger, `Tr_B ρ`.
pub fn partial_trace_battery(rho: &Mat4) -> Mat2 {
    let mut out = Mat2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            out.0[a][b] = rho.0[2 * a][2 * b] + rho.0[2 * a + 1][2 * b + 1];
        }
    }
    out
}

/// Pure two-qubit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket4(pub [C64; 4]);

/// Single-qubit basis states, index 0 = `|↑ᶻ⟩`.
pub mod qubit {
    use super::{C64, ONE, ZERO};
    use std::f64::consts::FRAC_1_SQRT_2;

    pub const UP: [C64; 2] = [ONE, ZERO];
    pub const DOWN: [C64; 2] = [ZERO, ONE];
    pub const UP_X: [C64; 2] = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)];
    pub const DOWN_X: [C64; 2] = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0)];
    pub const UP_Y: [C64; 2] = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)];
    pub const DOWN_Y: [C64; 2] = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2)];
}

impl Ket4 {
    pub fn basis(k: usize) -> Self {
        let mut v = [ZERO; 4];
        v[k] = ONE;
        Ket4(v)
    }

    /// `|charger⟩ ⊗ |battery⟩`.
    pub fn product(charger: [C64; 2], battery: [C64; 2]) -> Self {
        Ket4(std::array::from_fn(|k| charger[k / 2] * battery[k % 2]))
    }

    /// `(|↑↓⟩ + |↓↑⟩)/√2`.
    pub fn bell_psi_plus() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Ket4([ZERO, h, h, ZERO])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Ket4(self.0.map(|z| z / n))
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|self⟩⟨self|` scaled by `weight`.
    pub fn projector(&self, weight: f64) -> Mat4 {
        let mut out = Mat4::zeros();
        for i in 0..4 {
            let wi = self.0[i] * weight;
            for j in 0..4 {
                out.0[i][j] = wi * self.0[j].conj();
            }
        }
        out
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Mul<Ket4> for Mat4 {
    type Output = Ket4;
    fn mul(self, rhs: Ket4) -> Ket4 {
        Ket4(std::array::from_fn(|i| (0..4).map(|j| self.0[i][j] * rhs.0[j]).sum()))
    }
}

impl Mul<&Ket4> for &Mat4 {
    type Output = Ket4;
    fn mul(self, rhs: &Ket4) -> Ket4 {
        *self * *rhs
    }
}

/// Two-qubit density matrix together with the weight its trace is expected
/// to carry (1 for a full state, the sum of trajectory weights for a
/// truncated reconstruction).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix4 {
    mat: Mat4,
    weight: f64,
}

impl DensityMatrix4 {
    /// Validates Hermiticity (1e-10) and unit trace (1e-8).
    pub fn new(mat: Mat4) -> Result<Self> {
        Self::with_weight(mat, 1.0)
    }

    pub fn with_weight(mat: Mat4, weight: f64) -> Result<Self> {
        mat.check_hermitian()?;
        let tr = mat.trace();
        if (tr.re - weight).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::invalid("rho", format!("trace {tr} differs from declared weight {weight}")));
        }
        Ok(DensityMatrix4 { mat: mat.hermitian_part(), weight })
    }

    /// Wraps a matrix without validation; the declared weight is its trace.
    pub fn from_matrix_unchecked(mat: Mat4) -> Self {
        DensityMatrix4 { weight: mat.trace().re, mat }
    }

    pub fn pure(psi: &Ket4) -> Self {
        let n = psi.norm();
        DensityMatrix4 { mat: psi.projector(1.0 / (n * n)), weight: 1.0 }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.mat
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// `Tr ρ − declared weight`.
    pub fn trace_deviation(&self) -> f64 {
        self.trace() - self.weight
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.mat.hermitian_part()).map(|e| e.values[3]).unwrap_or(f64::NAN)
    }

    pub fn expectation(&self, op: &Mat4) -> f64 {
        (self.mat * *op).trace().re
    }

    /// Divides by the trace, producing a unit-weight state.
    pub fn renormalized(&self) -> Self {
        let tr = self.trace();
        DensityMatrix4 { mat: self.mat.scale_real(1.0 / tr), weight: 1.0 }
    }

    pub fn battery(&self) -> Mat2 {
        partial_trace_charger(&self.mat)
    }
}
