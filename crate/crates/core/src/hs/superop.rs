// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Superoperators on the Hilbert-Schmidt space of a `D`-dimensional system.
//!
//! Operators are vectorized by stacking columns: `vec(X)[i + D·j] = X[i, j]`.
//! Under this convention the map `X ↦ A X B` has matrix `Bᵀ ⊗ A`, so the
//! commutator map `X ↦ [H, X]` is `I ⊗ H − Hᵀ ⊗ I`. Every superoperator in
//! the crate uses this convention.

use std::ops::{Add, Mul, Sub};

use ndarray::Array1;

use super::matrix::{kron, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Dimensions of the system and environment factors. Tensor products are
/// always ordered system first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    d_sys: usize,
    d_bath: usize,
}

/// Which factor a partial trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Bath,
}

impl SpaceLayout {
    pub fn new(d_sys: usize, d_bath: usize) -> Result<Self> {
        if d_sys == 0 || d_bath == 0 {
            return Err(Error::Model(format!(
                "factor dimensions must be positive (got {d_sys}, {d_bath})"
            )));
        }
        Ok(Self { d_sys, d_bath })
    }

    pub fn d_sys(&self) -> usize {
        self.d_sys
    }

    pub fn d_bath(&self) -> usize {
        self.d_bath
    }

    pub fn joint_dim(&self) -> usize {
        self.d_sys * self.d_bath
    }
}

/// Traces out the factor not named by `keep`.
pub fn partial_trace(x: &ComplexMatrix, layout: SpaceLayout, keep: Subsystem) -> Result<ComplexMatrix> {
    let d = layout.joint_dim();
    if x.dim() != d {
        return Err(Error::Dimension { expected: d, found: x.dim() });
    }
    let (ds, db) = (layout.d_sys, layout.d_bath);
    Ok(match keep {
        Subsystem::System => ComplexMatrix::from_fn(ds, |i, j| {
            (0..db).map(|b| x[(i * db + b, j * db + b)]).sum()
        }),
        Subsystem::Bath => ComplexMatrix::from_fn(db, |a, b| {
            (0..ds).map(|s| x[(s * db + a, s * db + b)]).sum()
        }),
    })
}

pub fn vectorize(x: &ComplexMatrix) -> Array1<C64> {
    let d = x.dim();
    Array1::from_shape_fn(d * d, |k| x[(k % d, k / d)])
}

/// Inverse of [`vectorize`]; panics unless `v.len() == d²`.
pub fn devectorize(v: &Array1<C64>, d: usize) -> ComplexMatrix {
    assert_eq!(v.len(), d * d, "vector length must be d²");
    ComplexMatrix::from_fn(d, |i, j| v[i + d * j])
}

/// A linear map on `D × D` operators, stored as a `D² × D²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    dim_op: usize,
    matrix: ComplexMatrix,
}

impl SuperOp {
    pub fn identity(dim_op: usize) -> Self {
        Self { dim_op, matrix: ComplexMatrix::identity(dim_op * dim_op) }
    }

    pub fn zeros(dim_op: usize) -> Self {
        Self { dim_op, matrix: ComplexMatrix::zeros(dim_op * dim_op) }
    }

    pub fn from_matrix(dim_op: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.dim() != dim_op * dim_op {
            return Err(Error::Dimension { expected: dim_op * dim_op, found: matrix.dim() });
        }
        Ok(Self { dim_op, matrix })
    }

    /// Tabulates a linear map by feeding it the matrix units `|i⟩⟨j|`.
    pub fn from_linear_map(dim_op: usize, mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let n = dim_op * dim_op;
        let mut m = ComplexMatrix::zeros(n);
        for col in 0..n {
            let unit = ComplexMatrix::unit(dim_op, col % dim_op, col / dim_op);
            let image = vectorize(&f(&unit));
            for row in 0..n {
                m[(row, col)] = image[row];
            }
        }
        Self { dim_op, matrix: m }
    }

    /// The map `X ↦ A X B`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        assert_eq!(a.dim(), b.dim());
        Self { dim_op: a.dim(), matrix: kron(&b.transpose(), a) }
    }

    pub fn dim_op(&self) -> usize {
        self.dim_op
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.dim() != self.dim_op {
            return Err(Error::Dimension { expected: self.dim_op, found: x.dim() });
        }
        let v = self.matrix.as_array().dot(&vectorize(x));
        Ok(devectorize(&v, self.dim_op))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        assert_eq!(self.dim_op, other.dim_op, "superoperator dimensions differ");
        Self { dim_op: self.dim_op, matrix: self.matrix.matmul(&other.matrix) }
    }

    pub fn scale(&self, s: C64) -> SuperOp {
        Self { dim_op: self.dim_op, matrix: self.matrix.scale(s) }
    }

    pub fn scale_real(&self, s: f64) -> SuperOp {
        Self { dim_op: self.dim_op, matrix: self.matrix.scale_real(s) }
    }

    pub fn expm(&self) -> SuperOp {
        Self { dim_op: self.dim_op, matrix: self.matrix.expm() }
    }

    /// Inverse and 1-norm condition estimate; see [`ComplexMatrix::inverse_with_threshold`].
    pub fn inverse_with_threshold(&self, threshold: f64) -> Result<(SuperOp, f64)> {
        let (inv, cond) = self.matrix.inverse_with_threshold(threshold)?;
        Ok((Self { dim_op: self.dim_op, matrix: inv }, cond))
    }

    /// Largest singular value of the matrix representation.
    pub fn norm(&self) -> f64 {
        self.matrix.norm_2()
    }

    /// Distance to the identity map in the matrix 2-norm.
    pub fn distance_to_identity(&self) -> f64 {
        (&self.matrix - &ComplexMatrix::identity(self.matrix.dim())).norm_2()
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)`.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim_op;
        let mut c = ComplexMatrix::zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                let image = self
                    .apply(&ComplexMatrix::unit(d, i, j))
                    .expect("unit has matching dimension");
                for a in 0..d {
                    for b in 0..d {
                        c[(i * d + a, j * d + b)] = image[(a, b)];
                    }
                }
            }
        }
        c
    }
}

impl Add for &SuperOp {
    type Output = SuperOp;
    fn add(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.dim_op, rhs.dim_op);
        SuperOp { dim_op: self.dim_op, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &SuperOp {
    type Output = SuperOp;
    fn sub(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.dim_op, rhs.dim_op);
        SuperOp { dim_op: self.dim_op, matrix: &self.matrix - &rhs.matrix }
    }
}

impl Mul for &SuperOp {
    type Output = SuperOp;
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        self.compose(rhs)
    }
}

/// Commutator map `X ↦ [h, X]`. The `−i` of the equation of motion is left
/// to the caller.
pub fn liouvillian(h: &ComplexMatrix) -> Result<SuperOp> {
    h.ensure_hermitian()?;
    Ok(commutator_map(h))
}

pub(crate) fn commutator_map(h: &ComplexMatrix) -> SuperOp {
    let d = h.dim();
    let id = ComplexMatrix::identity(d);
    let matrix = &kron(&id, h) - &kron(&h.transpose(), &id);
    SuperOp { dim_op: d, matrix }
}

/// `𝒫 X = tr_B(X) ⊗ ρ_B`.
pub fn projector_p(rho_bath: &ComplexMatrix, layout: SpaceLayout) -> Result<SuperOp> {
    if rho_bath.dim() != layout.d_bath() {
        return Err(Error::Dimension { expected: layout.d_bath(), found: rho_bath.dim() });
    }
    rho_bath.validate_density()?;
    Ok(SuperOp::from_linear_map(layout.joint_dim(), |x| {
        let reduced = partial_trace(x, layout, Subsystem::System).expect("dimension checked");
        kron(&reduced, rho_bath)
    }))
}

/// `𝒬 = 1 − 𝒫`.
pub fn projector_q(rho_bath: &ComplexMatrix, layout: SpaceLayout) -> Result<SuperOp> {
    let p = projector_p(rho_bath, layout)?;
    Ok(&SuperOp::identity(layout.joint_dim()) - &p)
}
