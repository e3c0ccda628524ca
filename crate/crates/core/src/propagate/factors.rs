// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! `𝒫 = ℰ𝒯` with `ℰ: X ↦ X ⊗ ρ_B` (`D² × d²`) and `𝒯 = tr_B` (`d² × D²`).
//!
//! Operators that carry a `𝒫` on one side have rank at most `d²`, so the
//! sweep keeps them as thin blocks and never multiplies them at full size.

use ndarray::Array2;

use crate::error::Result;
use crate::hs::{kron, partial_trace, vectorize, ComplexMatrix, SpaceLayout, Subsystem, SuperOp, C64};

pub(super) struct ProjectorFactors {
    /// `ℰ`, column `a + d b` is `vec(|a⟩⟨b| ⊗ ρ_B)`.
    pub e: Array2<C64>,
    /// `𝒯`, column `c` is `vec(tr_B` of the `c`-th joint matrix unit`)`.
    pub t: Array2<C64>,
}

impl ProjectorFactors {
    pub fn new(rho_bath: &ComplexMatrix, layout: SpaceLayout) -> Result<Self> {
        let (d, dj) = (layout.d_sys(), layout.joint_dim());
        let (s, n) = (d * d, dj * dj);
        let mut e = Array2::zeros((n, s));
        for col in 0..s {
            let v = vectorize(&kron(&ComplexMatrix::unit(d, col % d, col / d), rho_bath));
            e.column_mut(col).assign(&v);
        }
        let mut t = Array2::zeros((s, n));
        for col in 0..n {
            let reduced = partial_trace(&ComplexMatrix::unit(dj, col % dj, col / dj), layout, Subsystem::System)?;
            t.column_mut(col).assign(&vectorize(&reduced));
        }
        Ok(Self { e, t })
    }

    pub fn rank(&self) -> usize {
        self.t.nrows()
    }

    /// `ℰ a 𝒯` at full size.
    pub fn lift(&self, a: &Array2<C64>) -> Array2<C64> {
        self.e.dot(a).dot(&self.t)
    }
}

pub(super) fn eye(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

pub(super) fn superop(dim_op: usize, a: Array2<C64>) -> Result<SuperOp> {
    SuperOp::from_matrix(dim_op, ComplexMatrix::from_array(a)?)
}

pub(super) fn norm_1(a: &Array2<C64>) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}
