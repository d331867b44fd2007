//! Small dense complex linear algebra for one and two spin-1/2 systems.
//!
//! Everything here is sized for Hilbert-space dimension 2 or 4 and lives on
//! the stack. ħ = 1 throughout, so Hamiltonian entries are angular
//! frequencies.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Hermiticity tolerance applied by [`Hermitian::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default tolerance for [`Unitary::new`].
pub const UNITARY_TOL: f64 = 1e-10;
/// Normalization tolerance for [`SpinState::new`].
pub const NORM_TOL: f64 = 1e-12;

/// Hilbert-space dimension: a single qubit or a pair of qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "4")]
    Four,
}

impl Dim {
    pub fn size(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Four => 4,
        }
    }

    pub fn from_size(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Dim::Two),
            4 => Ok(Dim::Four),
            other => Err(Error::UnsupportedDimension(other)),
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.size())
    }
}

/// Square complex matrix of dimension 2 or 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix {
    dim: Dim,
    data: [[C64; 4]; 4],
}

impl Matrix {
    pub fn zeros(dim: Dim) -> Self {
        Self {
            dim,
            data: [[ZERO; 4]; 4],
        }
    }

    pub fn identity(dim: Dim) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim.size() {
            m.data[k][k] = ONE;
        }
        m
    }

    pub fn from_fn(dim: Dim, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        let n = dim.size();
        for i in 0..n {
            for j in 0..n {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = Dim::from_size(rows.len())?;
        for row in rows {
            if row.len() != rows.len() {
                return Err(Error::DimensionMismatch {
                    left: rows.len(),
                    right: row.len(),
                });
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_2x2(m: [[C64; 2]; 2]) -> Self {
        Self::from_fn(Dim::Two, |i, j| m[i][j])
    }

    /// Block-diagonal operator `Σ_q A_q ⊗ |q⟩⟨q|`, conditioning the first
    /// factor on the computational state of the second.
    pub fn conditional(on_zero: &Matrix, on_one: &Matrix) -> Result<Self> {
        for m in [on_zero, on_one] {
            if m.dim != Dim::Two {
                return Err(Error::DimensionMismatch {
                    left: 2,
                    right: m.size(),
                });
            }
        }
        let mut out = Self::zeros(Dim::Four);
        for (q, block) in [on_zero, on_one].into_iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    out.data[2 * i + q][2 * j + q] = block.data[i][j];
                }
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.dim.size()
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        let n = self.size();
        (0..n).map(|i| self.data[i][..n].to_vec()).collect()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.data[j][i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.size()).map(|k| self.data[k][k]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(self.dim, |i, j| self.data[i][j] * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::from_fn(self.dim, |i, j| self.data[i][j] * s)
    }

    pub fn kron(&self, other: &Matrix) -> Result<Self> {
        if self.dim != Dim::Two || other.dim != Dim::Two {
            return Err(Error::DimensionMismatch {
                left: self.size(),
                right: other.size(),
            });
        }
        Ok(Self::from_fn(Dim::Four, |i, j| {
            self.data[i / 2][j / 2] * other.data[i % 2][j % 2]
        }))
    }

    pub fn apply(&self, state: &SpinState) -> SpinState {
        assert_eq!(self.dim, state.dim, "operator and state dimensions differ");
        let n = self.size();
        let mut amps = [ZERO; 4];
        for (i, out) in amps.iter_mut().enumerate().take(n) {
            *out = (0..n).map(|j| self.data[i][j] * state.amps[j]).sum();
        }
        SpinState {
            dim: self.dim,
            amps,
        }
    }

    /// `⟨a|M|b⟩`.
    pub fn matrix_element(&self, a: &SpinState, b: &SpinState) -> C64 {
        a.inner(&self.apply(b))
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.size();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.data[i][j].norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        (*self - *other).max_abs()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let n = self.size();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.data[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn unitarity_defect(&self) -> f64 {
        (self.dagger() * *self).max_abs_diff(&Matrix::identity(self.dim))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i][j].norm() <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.size() && j < self.size(), "index out of range");
        &self.data[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.size() && j < self.size(), "index out of range");
        &mut self.data[i][j]
    }
}

impl Add for Matrix {
    type Output = Matrix;

    fn add(self, rhs: Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions differ");
        Matrix::from_fn(self.dim, |i, j| self.data[i][j] + rhs.data[i][j])
    }
}

impl Sub for Matrix {
    type Output = Matrix;

    fn sub(self, rhs: Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions differ");
        Matrix::from_fn(self.dim, |i, j| self.data[i][j] - rhs.data[i][j])
    }
}

impl Mul for Matrix {
    type Output = Matrix;

    fn mul(self, rhs: Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions differ");
        let n = self.size();
        let mut out = Matrix::zeros(self.dim);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i][j] += a * rhs.data[k][j];
                }
            }
        }
        out
    }
}

pub fn pauli_x() -> Matrix {
    Matrix::from_2x2([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> Matrix {
    Matrix::from_2x2([[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> Matrix {
    Matrix::from_2x2([[ONE, ZERO], [ZERO, -ONE]])
}

/// `v·σ` for a real 3-vector.
pub fn pauli_dot(v: [f64; 3]) -> Matrix {
    Matrix::from_2x2([
        [C64::new(v[2], 0.0), C64::new(v[0], -v[1])],
        [C64::new(v[0], v[1]), C64::new(-v[2], 0.0)],
    ])
}

/// Hermitian operator (a Hamiltonian in units with ħ = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hermitian(Matrix);

impl Hermitian {
    pub fn new(m: Matrix) -> Result<Self> {
        let defect = m.hermiticity_defect();
        if defect > HERMITIAN_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is Hermitian by construction.
    pub(crate) fn from_trusted(m: Matrix) -> Self {
        debug_assert!(m.hermiticity_defect() <= 1e-9 * m.max_abs().max(1.0));
        Self(m)
    }

    pub fn zero(dim: Dim) -> Self {
        Self(Matrix::zeros(dim))
    }

    /// Spin Hamiltonian `v·S = ½ v·σ` for a field vector in angular-frequency units.
    pub fn spin(v: [f64; 3]) -> Self {
        Self(pauli_dot(v).scale_real(0.5))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> Dim {
        self.0.dim
    }

    pub fn kron(&self, other: &Hermitian) -> Result<Self> {
        Ok(Self(self.0.kron(&other.0)?))
    }

    /// `⟨ψ|H|ψ⟩`, real for Hermitian `H`.
    pub fn expectation(&self, state: &SpinState) -> f64 {
        self.0.matrix_element(state, state).re
    }
}

impl Add for Hermitian {
    type Output = Hermitian;

    fn add(self, rhs: Hermitian) -> Hermitian {
        Hermitian(self.0 + rhs.0)
    }
}

/// Unitary matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary(Matrix);

impl Unitary {
    pub fn new(m: Matrix, tol: f64) -> Result<Self> {
        let defect = m.unitarity_defect();
        if defect > tol {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_trusted(m: Matrix) -> Self {
        Self(m)
    }

    pub fn identity(dim: Dim) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> Dim {
        self.0.dim
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.dagger())
    }

    pub fn apply(&self, state: &SpinState) -> SpinState {
        self.0.apply(state)
    }

    pub fn kron(&self, other: &Unitary) -> Result<Self> {
        Ok(Self(self.0.kron(&other.0)?))
    }
}

impl Mul for Unitary {
    type Output = Unitary;

    fn mul(self, rhs: Unitary) -> Unitary {
        Unitary(self.0 * rhs.0)
    }
}

/// Normalized state vector of one or two qubits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinState {
    dim: Dim,
    amps: [C64; 4],
}

impl SpinState {
    pub fn new(amplitudes: &[C64]) -> Result<Self> {
        let s = Self::raw(amplitudes)?;
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(s)
    }

    pub fn normalized(amplitudes: &[C64]) -> Result<Self> {
        let mut s = Self::raw(amplitudes)?;
        let norm = s.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        for a in s.amps.iter_mut() {
            *a /= norm;
        }
        Ok(s)
    }

    fn raw(amplitudes: &[C64]) -> Result<Self> {
        let dim = Dim::from_size(amplitudes.len())?;
        let mut amps = [ZERO; 4];
        amps[..amplitudes.len()].copy_from_slice(amplitudes);
        Ok(Self { dim, amps })
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: Dim, index: usize) -> Result<Self> {
        if index >= dim.size() {
            return Err(Error::invalid("index", format!("{index} out of range for dim {dim}")));
        }
        let mut amps = [ZERO; 4];
        amps[index] = ONE;
        Ok(Self { dim, amps })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps[..self.dim.size()]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes()
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SpinState) -> C64 {
        assert_eq!(self.dim, other.dim, "state dimensions differ");
        self.amplitudes()
            .iter()
            .zip(other.amplitudes())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn kron(&self, other: &SpinState) -> Result<Self> {
        if self.dim != Dim::Two || other.dim != Dim::Two {
            return Err(Error::DimensionMismatch {
                left: self.dim.size(),
                right: other.dim.size(),
            });
        }
        let mut amps = [ZERO; 4];
        for (k, a) in amps.iter_mut().enumerate() {
            *a = self.amps[k / 2] * other.amps[k % 2];
        }
        Ok(Self {
            dim: Dim::Four,
            amps,
        })
    }

    pub fn scaled(&self, phase: C64) -> Self {
        let mut out = *self;
        for a in out.amps.iter_mut() {
            *a *= phase;
        }
        out
    }
}

/// Single-qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Matrix);

impl DensityMatrix {
    /// `½(1 + r·σ)`; `|r| ≤ 1`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let len = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !len.is_finite() || len > 1.0 + 1e-12 {
            return Err(Error::invalid("bloch", format!("length {len} exceeds 1")));
        }
        Ok(Self(
            (Matrix::identity(Dim::Two) + pauli_dot(r)).scale_real(0.5),
        ))
    }

    pub fn from_state(state: &SpinState) -> Result<Self> {
        if state.dim != Dim::Two {
            return Err(Error::DimensionMismatch {
                left: 2,
                right: state.dim.size(),
            });
        }
        let a = state.amplitudes();
        Ok(Self(Matrix::from_fn(Dim::Two, |i, j| a[i] * a[j].conj())))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        let m = &self.0;
        [
            (m[(0, 1)] + m[(1, 0)]).re,
            (m[(1, 0)] - m[(0, 1)]).im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ]
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `max |ρ² − ρ|`.
    pub fn idempotency_defect(&self) -> f64 {
        (self.0 * self.0).max_abs_diff(&self.0)
    }
}

/// Kronecker product for operators and states.
pub trait Kron: Sized {
    fn kron_with(&self, other: &Self) -> Result<Self>;
}

impl Kron for Matrix {
    fn kron_with(&self, other: &Self) -> Result<Self> {
        self.kron(other)
    }
}

impl Kron for SpinState {
    fn kron_with(&self, other: &Self) -> Result<Self> {
        self.kron(other)
    }
}

pub fn tensor_product<T: Kron>(a: &T, b: &T) -> Result<T> {
    a.kron_with(b)
}

/// `exp(−iHt)` built from the spectral decomposition of `H`.
pub fn expm_hermitian(h: &Hermitian, t: f64) -> Unitary {
    Unitary(exp_hermitian_matrix(&h.0, t))
}

pub(crate) fn exp_hermitian_matrix(m: &Matrix, t: f64) -> Matrix {
    match m.dim {
        Dim::Two => {
            let b = exp_block([[m.data[0][0], m.data[0][1]], [m.data[1][0], m.data[1][1]]], t);
            Matrix::from_2x2(b)
        }
        Dim::Four => exp_hermitian_4(m, t),
    }
}

/// Closed-form spectral exponential of a 2×2 Hermitian block
/// `a·1 + h·σ`: `e^{−iat}[cos(|h|t) − i sin(|h|t) ĥ·σ]`.
fn exp_block(m: [[C64; 2]; 2], t: f64) -> [[C64; 2]; 2] {
    let a = 0.5 * (m[0][0].re + m[1][1].re);
    let hz = 0.5 * (m[0][0].re - m[1][1].re);
    let hx = m[1][0].re;
    let hy = m[1][0].im;
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let c = (r * t).cos();
    let s = if r == 0.0 { t } else { (r * t).sin() / r };
    let phase = C64::from_polar(1.0, -a * t);
    [
        [phase * C64::new(c, -s * hz), phase * C64::new(-s * hy, -s * hx)],
        [phase * C64::new(s * hy, -s * hx), phase * C64::new(c, s * hz)],
    ]
}

fn exp_hermitian_4(m: &Matrix, t: f64) -> Matrix {
    // Exact zeros in the coupling entries let us exponentiate two
    // independent 2×2 blocks: either fixed second qubit (mask 1) or fixed
    // first qubit (mask 2).
    for mask in [1usize, 2] {
        let decoupled = (0..4).all(|i| (0..4).all(|j| (i ^ j) & mask == 0 || m.data[i][j] == ZERO));
        if decoupled {
            let mut out = Matrix::zeros(Dim::Four);
            let blocks: [[usize; 2]; 2] = if mask == 1 { [[0, 2], [1, 3]] } else { [[0, 1], [2, 3]] };
            for idx in blocks {
                let block = [
                    [m.data[idx[0]][idx[0]], m.data[idx[0]][idx[1]]],
                    [m.data[idx[1]][idx[0]], m.data[idx[1]][idx[1]]],
                ];
                let e = exp_block(block, t);
                for a in 0..2 {
                    for b in 0..2 {
                        out.data[idx[a]][idx[b]] = e[a][b];
                    }
                }
            }
            return out;
        }
    }

    let h = Matrix4::from_fn(|i, j| m.data[i][j]);
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| C64::from_polar(1.0, -lambda * t))
        .collect();
    Matrix::from_fn(Dim::Four, |i, j| {
        (0..4).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum()
    })
}

/// `1 − |Tr(U†V)|/d`: zero iff the unitaries agree up to a global phase.
pub fn gate_distance(u: &Unitary, v: &Unitary) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim().size(),
            right: v.dim().size(),
        });
    }
    let overlap = (u.0.dagger() * v.0).trace().norm() / u.dim().size() as f64;
    Ok((1.0 - overlap).max(0.0))
}

/// `⟨σ⟩` of a single-qubit state.
pub fn bloch_vector(state: &SpinState) -> Result<[f64; 3]> {
    Ok(DensityMatrix::from_state(state)?.bloch_vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(dim: Dim, v: &[f64]) -> Hermitian {
        let n = dim.size();
        let mut m = Matrix::zeros(dim);
        let mut k = 0;
        for i in 0..n {
            m[(i, i)] = c(v[k], 0.0);
            k += 1;
            for j in (i + 1)..n {
                m[(i, j)] = c(v[k], v[k + 1]);
                m[(j, i)] = c(v[k], -v[k + 1]);
                k += 2;
            }
        }
        Hermitian::new(m).unwrap()
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = Matrix::identity(Dim::Two);
        let ii = tensor_product(&i2, &i2).unwrap();
        assert_eq!(ii, Matrix::identity(Dim::Four));

        let zz = pauli_z().kron(&pauli_z()).unwrap();
        let expected = [1.0, -1.0, -1.0, 1.0];
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expected[i] } else { 0.0 };
                assert_eq!(zz[(i, j)], c(e, 0.0));
            }
        }
    }

    #[test]
    fn kron_of_basis_states() {
        let zero = SpinState::basis(Dim::Two, 0).unwrap();
        let one = SpinState::basis(Dim::Two, 1).unwrap();
        let s = tensor_product(&zero, &one).unwrap();
        assert_eq!(s, SpinState::basis(Dim::Four, 1).unwrap());
    }

    #[test]
    fn kron_rejects_four_dimensional_factor() {
        let ii = Matrix::identity(Dim::Four);
        assert!(matches!(
            ii.kron(&pauli_x()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exponential_of_sigma_z() {
        let (w0, t) = (1.3, 0.7);
        let h = Hermitian::spin([0.0, 0.0, w0]);
        let u = expm_hermitian(&h, t);
        let expected = Matrix::from_2x2([
            [C64::from_polar(1.0, -w0 * t / 2.0), ZERO],
            [ZERO, C64::from_polar(1.0, w0 * t / 2.0)],
        ]);
        assert!(u.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn half_turn_about_y() {
        let w_pi = 4.0;
        let u = expm_hermitian(&Hermitian::spin([0.0, w_pi, 0.0]), PI / w_pi);
        let expected = Matrix::from_2x2([[ZERO, -ONE], [ONE, ZERO]]);
        assert!(u.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn axis_angle_identity() {
        let (theta, omega): (f64, f64) = (0.4, 1.1);
        let n = [theta.sin(), 0.0, theta.cos()];
        let u = expm_hermitian(&Hermitian::spin(n), 2.0 * omega);
        let expected = Matrix::identity(Dim::Two).scale_real(omega.cos())
            - pauli_dot(n).scale(c(0.0, omega.sin()));
        assert!(u.matrix().max_abs_diff(&expected) < 1e-15);
        let phi0 = SpinState::new(&[c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0)]).unwrap();
        let eig = u.matrix().matrix_element(&phi0, &phi0);
        assert!((eig - C64::from_polar(1.0, -omega)).norm() < 1e-14);
    }

    #[test]
    fn general_four_by_four_path_matches_blocks() {
        // σx⊗1 + 1⊗σy couples both partitions and takes the eigen-solver path;
        // it is a sum of commuting terms, so the exponential factorizes.
        let h = Hermitian::new(
            pauli_x().kron(&Matrix::identity(Dim::Two)).unwrap()
                + Matrix::identity(Dim::Two).kron(&pauli_y()).unwrap(),
        )
        .unwrap();
        let t = 0.83;
        let u = expm_hermitian(&h, t);
        let ux = expm_hermitian(&Hermitian::new(pauli_x()).unwrap(), t);
        let uy = expm_hermitian(&Hermitian::new(pauli_y()).unwrap(), t);
        let expected = ux.kron(&uy).unwrap();
        assert!(u.matrix().max_abs_diff(expected.matrix()) < 1e-13);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = Matrix::from_2x2([[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(Hermitian::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn distance_examples() {
        let id = Unitary::identity(Dim::Two);
        assert_eq!(gate_distance(&id, &id).unwrap(), 0.0);
        let phased = Unitary::new(
            Matrix::identity(Dim::Two).scale(C64::from_polar(1.0, PI / 3.0)),
            1e-12,
        )
        .unwrap();
        assert!(gate_distance(&id, &phased).unwrap() < 1e-15);
        let x = Unitary::new(pauli_x(), 1e-12).unwrap();
        assert!((gate_distance(&id, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(gate_distance(&id, &Unitary::identity(Dim::Four)).is_err());
    }

    #[test]
    fn bloch_examples() {
        let zero = SpinState::basis(Dim::Two, 0).unwrap();
        assert_eq!(bloch_vector(&zero).unwrap(), [0.0, 0.0, 1.0]);
        let plus = SpinState::normalized(&[ONE, ONE]).unwrap();
        let r = bloch_vector(&plus).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && r[1].abs() < 1e-15 && r[2].abs() < 1e-15);
        let th = PI / 3.0;
        let phi0 = SpinState::new(&[c((th / 2.0).cos(), 0.0), c((th / 2.0).sin(), 0.0)]).unwrap();
        let r = bloch_vector(&phi0).unwrap();
        assert!((r[0] - th.sin()).abs() < 1e-15 && (r[2] - th.cos()).abs() < 1e-15);
        assert!(bloch_vector(&SpinState::basis(Dim::Four, 0).unwrap()).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(matches!(
            SpinState::new(&[ONE, ONE]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            SpinState::new(&[ONE, ZERO, ZERO]),
            Err(Error::UnsupportedDimension(3))
        ));
        assert!(SpinState::normalized(&[ZERO, ZERO]).is_err());
    }

    #[test]
    fn pure_density_matrix_is_idempotent() {
        let s = SpinState::normalized(&[c(0.3, 0.1), c(-0.2, 0.9)]).unwrap();
        let rho = DensityMatrix::from_state(&s).unwrap();
        assert!(rho.idempotency_defect() < 1e-15);
        assert!((rho.matrix().trace() - ONE).norm() < 1e-15);
        assert!(rho.matrix().hermiticity_defect() < 1e-15);
    }

    proptest! {
        #[test]
        fn exponential_inverse_and_group_law(
            v in prop::collection::vec(-3.0f64..3.0, 16),
            t1 in -2.0f64..2.0,
            t2 in -2.0f64..2.0,
            four in any::<bool>(),
        ) {
            let dim = if four { Dim::Four } else { Dim::Two };
            let h = random_hermitian(dim, &v);
            let fwd = expm_hermitian(&h, t1);
            let back = expm_hermitian(&h, -t1);
            prop_assert!((fwd * back).matrix().max_abs_diff(&Matrix::identity(dim)) < 1e-12);
            let joint = expm_hermitian(&h, t1 + t2);
            let split = expm_hermitian(&h, t1) * expm_hermitian(&h, t2);
            prop_assert!(joint.matrix().max_abs_diff(split.matrix()) < 1e-11);
            prop_assert!(fwd.matrix().unitarity_defect() < 1e-12);
        }

        #[test]
        fn density_bloch_round_trip(theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI), plus in any::<bool>()) {
            let b = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let sign = if plus { 1.0 } else { -1.0 };
            let rho = DensityMatrix::from_bloch([sign * b[0], sign * b[1], sign * b[2]]).unwrap();
            let r = rho.bloch_vector();
            for k in 0..3 {
                prop_assert!((r[k] - sign * b[k]).abs() < 1e-10);
            }
            prop_assert!(rho.idempotency_defect() < 1e-10);
        }

        #[test]
        fn distance_symmetric_and_left_invariant(
            a in prop::collection::vec(-2.0f64..2.0, 4),
            b in prop::collection::vec(-2.0f64..2.0, 4),
            w in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let u = expm_hermitian(&random_hermitian(Dim::Two, &a), 1.0);
            let v = expm_hermitian(&random_hermitian(Dim::Two, &b), 1.0);
            let left = expm_hermitian(&random_hermitian(Dim::Two, &w), 1.0);
            let d = gate_distance(&u, &v).unwrap();
            prop_assert!((d - gate_distance(&v, &u).unwrap()).abs() < 1e-14);
            prop_assert!((d - gate_distance(&(left * u), &(left * v)).unwrap()).abs() < 1e-13);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
