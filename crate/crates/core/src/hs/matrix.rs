// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex square matrices and the handful of factorizations the
//! propagators need.
//!
//! Storage is an [`ndarray::Array2`]; products go through `matrixmultiply`'s
//! complex GEMM. Hermitian eigendecompositions, SVD and LU are delegated to
//! `nalgebra`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef};
use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Condition estimate above which an inverse is declared meaningless.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Absolute Hermiticity tolerance for constructed operators, scaled by
/// `max(1, max |a_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Tolerance for density-matrix validation (Hermiticity, positivity, trace).
pub const STATE_TOL: f64 = 1e-10;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A dense complex square matrix.
///
/// Construction through [`ComplexMatrix::from_array`] rejects non-square or
/// non-finite input; arithmetic on finite matrices stays finite except for
/// genuine overflow.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    data: Array2<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { data: Array2::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { data: Array2::eye(dim) }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { data: Array2::from_shape_fn((dim, dim), |(i, j)| f(i, j)) }
    }

    pub fn from_array(data: Array2<C64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::Dimension { expected: r, found: c });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::StateValidation("matrix has non-finite entries".into()));
        }
        Ok(Self { data })
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square matrix");
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square matrix");
        Self::from_fn(n, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(entries: &[C64]) -> Self {
        Self::from_fn(entries.len(), |i, j| if i == j { entries[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        Self::from_fn(entries.len(), |i, j| C64::new(if i == j { entries[i] } else { 0.0 }, 0.0))
    }

    /// `|i⟩⟨j|` in dimension `dim`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.data[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn dagger(&self) -> Self {
        Self { data: self.data.t().mapv(|z| z.conj()) }
    }

    pub fn transpose(&self) -> Self {
        Self { data: self.data.t().to_owned() }
    }

    pub fn conj(&self) -> Self {
        Self { data: self.data.mapv(|z| z.conj()) }
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        Self { data: self.data.dot(&rhs.data) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: self.data.mapv(|z| z * s) }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { data: self.data.mapv(|z| z * s) }
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    pub fn anticommutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) + &rhs.matmul(self)
    }

    /// `tr(self · rho)`.
    pub fn expectation(&self, rho: &Self) -> C64 {
        debug_assert_eq!(self.dim(), rho.dim());
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.data[(i, k)] * rho.data[(k, i)];
            }
        }
        acc
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_1(&self) -> f64 {
        self.data
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn norm_2(&self) -> f64 {
        self.singular_values().into_iter().fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol * self.norm_max().max(1.0)
    }

    /// Returns `Err(Hermiticity)` unless Hermitian within [`HERMITIAN_TOL`].
    pub fn ensure_hermitian(&self) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > HERMITIAN_TOL * self.norm_max().max(1.0) {
            return Err(Error::Hermiticity { deviation });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Checks the density-matrix conditions: Hermitian, PSD to `-STATE_TOL`,
    /// unit trace to `STATE_TOL`.
    pub fn validate_density(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::StateValidation("non-finite entries".into()));
        }
        let dev = self.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::StateValidation(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::StateValidation(format!("trace is {tr}, expected 1")));
        }
        let min = self.eigenvalues_hermitian().into_iter().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::StateValidation(format!(
                "not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.data[(i, j)])
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of the Hermitian
    /// part of `self`.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let h = self.hermitian_part().to_nalgebra();
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(self.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        self.hermitian_eigen().0
    }

    fn hermitian_part(&self) -> Self {
        (self + &self.dagger()).scale_real(0.5)
    }

    /// Applies `f` to the spectrum of the Hermitian part of `self`.
    pub fn hermitian_function(&self, f: impl Fn(f64) -> C64) -> Self {
        let (values, v) = self.hermitian_eigen();
        let fd: Vec<C64> = values.into_iter().map(f).collect();
        v.matmul(&Self::diag(&fd)).matmul(&v.dagger())
    }

    /// Principal square root of a positive semidefinite matrix; small
    /// negative eigenvalues are clamped to zero.
    pub fn sqrt_psd(&self) -> Self {
        self.hermitian_function(|x| C64::new(x.max(0.0).sqrt(), 0.0))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.to_nalgebra().singular_values().iter().copied().collect()
    }

    /// Inverse together with the 1-norm condition estimate
    /// `‖A‖₁·‖A⁻¹‖₁`. Fails with [`Error::SingularMatrix`] above
    /// [`SINGULAR_CONDITION`].
    pub fn inverse(&self) -> Result<(Self, f64)> {
        self.inverse_with_threshold(SINGULAR_CONDITION)
    }

    pub fn inverse_with_threshold(&self, threshold: f64) -> Result<(Self, f64)> {
        let inv = Self::from_faer(self.to_faer().partial_piv_lu().inverse().as_ref());
        if !inv.is_finite() {
            return Err(Error::SingularMatrix { condition: f64::INFINITY });
        }
        let condition = self.norm_1() * inv.norm_1();
        if !condition.is_finite() || condition > threshold {
            return Err(Error::SingularMatrix { condition });
        }
        Ok((inv, condition))
    }

    /// Solves `self · X = rhs`.
    pub(crate) fn solve(&self, rhs: &Self) -> Result<Self> {
        let x = Self::from_faer(self.to_faer().partial_piv_lu().solve(rhs.to_faer()).as_ref());
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::SingularMatrix { condition: f64::INFINITY })
        }
    }

    fn to_faer(&self) -> Mat<C64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.data[(i, j)])
    }

    fn from_faer(m: MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    /// Matrix exponential by scaling and squaring with diagonal Padé
    /// approximants of degree 3, 5, 7, 9 or 13 (the degree is the cheapest
    /// one whose backward-error bound reaches double precision for the
    /// input's 1-norm).
    pub fn expm(&self) -> Self {
        let n = self.dim();
        if n == 0 {
            return self.clone();
        }
        let norm = self.norm_1();
        if norm == 0.0 {
            return Self::identity(n);
        }
        for (m, theta) in PADE_THETA.iter().take(4) {
            if norm <= *theta {
                let (u, v) = pade_uv(self, *m);
                return pade_quotient(&u, &v);
            }
        }
        let theta13 = PADE_THETA[4].1;
        let squarings = (norm / theta13).log2().ceil().max(0.0) as i32;
        let scaled = self.scale_real(0.5_f64.powi(squarings));
        let (u, v) = pade_uv(&scaled, 13);
        let mut r = pade_quotient(&u, &v);
        for _ in 0..squarings {
            r = r.matmul(&r);
        }
        r
    }
}

/// `(degree, θ_m)` for double precision.
const PADE_THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!("unsupported Padé degree {m}"),
    }
}

/// Odd (`U`) and even (`V`) parts of the degree-`m` Padé numerator.
fn pade_uv(a: &ComplexMatrix, m: usize) -> (ComplexMatrix, ComplexMatrix) {
    let b = pade_coefficients(m);
    let n = a.dim();
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(a);
    if m == 13 {
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let inner_u = &(&a6.scale_real(b[13]) + &a4.scale_real(b[11])) + &a2.scale_real(b[9]);
        let tail_u = &(&(&a6.scale_real(b[7]) + &a4.scale_real(b[5])) + &a2.scale_real(b[3]))
            + &id.scale_real(b[1]);
        let u = a.matmul(&(&a6.matmul(&inner_u) + &tail_u));
        let inner_v = &(&a6.scale_real(b[12]) + &a4.scale_real(b[10])) + &a2.scale_real(b[8]);
        let tail_v = &(&(&a6.scale_real(b[6]) + &a4.scale_real(b[4])) + &a2.scale_real(b[2]))
            + &id.scale_real(b[0]);
        let v = &a6.matmul(&inner_v) + &tail_v;
        return (u, v);
    }
    let mut even_power = id.clone();
    let mut u_sum = ComplexMatrix::zeros(n);
    let mut v_sum = ComplexMatrix::zeros(n);
    for j in 0..=(m - 1) / 2 {
        if j > 0 {
            even_power = even_power.matmul(&a2);
        }
        u_sum += &even_power.scale_real(b[2 * j + 1]);
        v_sum += &even_power.scale_real(b[2 * j]);
    }
    (a.matmul(&u_sum), v_sum)
}

fn pade_quotient(u: &ComplexMatrix, v: &ComplexMatrix) -> ComplexMatrix {
    let denom = v - u;
    let numer = v + u;
    denom
        .solve(&numer)
        .expect("Padé denominator is nonsingular inside its convergence region")
}

/// Tensor product `a ⊗ b` (row index `i_a·dim(b) + i_b`).
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(na * nb, |r, c| {
        a.data[(r / nb, c / nb)] * b.data[(r % nb, c % nb)]
    })
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> f64 {
    a.singular_values().iter().sum()
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * trace_norm(&(a - b))
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> f64 {
    let sr = rho.sqrt_psd();
    let inner = sr.matmul(sigma).matmul(&sr);
    let s: f64 = inner.eigenvalues_hermitian().into_iter().map(|x| x.max(0.0).sqrt()).sum();
    s * s
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.data[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.data[idx]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { data: &self.data + &rhs.data }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { data: &self.data - &rhs.data }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { data: self.data.mapv(|z| -z) }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.data += &rhs.data;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.data -= &rhs.data;
    }
}

/// Named single-qubit operators.
pub mod pauli {
    use super::{ComplexMatrix, C64};

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn y() -> ComplexMatrix {
        let z = C64::new(0.0, 0.0);
        ComplexMatrix::from_rows(&[vec![z, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), z]])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::real_diag(&[1.0, -1.0])
    }

    /// `σ₊ = |0⟩⟨1|` in the convention where `|0⟩` has `σ_z = +1`.
    pub fn raising() -> ComplexMatrix {
        ComplexMatrix::unit(2, 0, 1)
    }

    pub fn lowering() -> ComplexMatrix {
        ComplexMatrix::unit(2, 1, 0)
    }
}
