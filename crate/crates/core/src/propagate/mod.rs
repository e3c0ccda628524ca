// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Ordered exponentials and the exact convolutionless solution.
//!
//! Every ordered exponential is discretized by midpoint-sampled steps: the
//! interval `[t_k, t_{k+1}]` contributes `expm(±i 𝓛(t_k + Δ_k/2) Δ_k)`,
//! which is second-order accurate and exactly invertible step by step.

mod factors;
mod table;
mod tcl;

use crate::error::Result;
use crate::hs::{liouvillian, projector_p, projector_q, ComplexMatrix, SuperOp};
use crate::models::ModelSpec;

pub use table::{ordered_exp, Ordering, PropagatorTable, Sign};
pub use tcl::{
    g_retarded, projected_propagator_h, quantum_operation, reduced_dm, theta, u_system, w_operator, SliceOps,
    TclPoint, TclSolver,
};

/// A slice-local Liouvillian `t ↦ 𝓛(t)`. Implementations must be pure so
/// steps can be evaluated in parallel.
pub trait Generator: Sync {
    /// Dimension of the operators the superoperators act on.
    fn dim_op(&self) -> usize;

    fn at(&self, t: f64) -> Result<SuperOp>;

    /// The Hamiltonian behind `at(t)` when the generator is a commutator
    /// map; lets one-step propagators come from a `D × D` exponential.
    fn hamiltonian(&self, _t: f64) -> Option<ComplexMatrix> {
        None
    }
}

/// Commutator map of the model's picture Hamiltonian.
pub struct ModelGenerator<'a> {
    model: &'a ModelSpec,
}

impl<'a> ModelGenerator<'a> {
    pub fn new(model: &'a ModelSpec) -> Self {
        Self { model }
    }
}

impl Generator for ModelGenerator<'_> {
    fn dim_op(&self) -> usize {
        self.model.layout().joint_dim()
    }

    fn at(&self, t: f64) -> Result<SuperOp> {
        liouvillian(&self.model.generator_hamiltonian(t))
    }

    fn hamiltonian(&self, t: f64) -> Option<ComplexMatrix> {
        Some(self.model.generator_hamiltonian(t))
    }
}

/// Commutator map of an arbitrary time-dependent Hamiltonian.
pub struct HamiltonianFn<F> {
    dim: usize,
    h: F,
}

impl<F: Fn(f64) -> ComplexMatrix + Sync> HamiltonianFn<F> {
    pub fn new(dim: usize, h: F) -> Self {
        Self { dim, h }
    }
}

impl<F: Fn(f64) -> ComplexMatrix + Sync> Generator for HamiltonianFn<F> {
    fn dim_op(&self) -> usize {
        self.dim
    }

    fn at(&self, t: f64) -> Result<SuperOp> {
        let h = (self.h)(t);
        if h.dim() != self.dim {
            return Err(crate::Error::Dimension { expected: self.dim, found: h.dim() });
        }
        liouvillian(&h)
    }

    fn hamiltonian(&self, t: f64) -> Option<ComplexMatrix> {
        Some((self.h)(t))
    }
}

/// `left ∘ 𝓛(t) ∘ right`, e.g. `𝒬𝓛𝒬` or `𝒫𝓛𝒫`.
pub struct Projected<'g, G: ?Sized> {
    inner: &'g G,
    left: SuperOp,
    right: SuperOp,
}

impl<'g, G: Generator + ?Sized> Projected<'g, G> {
    pub fn new(inner: &'g G, left: SuperOp, right: SuperOp) -> Self {
        Self { inner, left, right }
    }

    /// `𝒬𝓛𝒬` for the projector built from `rho_bath`.
    pub fn qlq(inner: &'g G, model: &ModelSpec) -> Result<Self> {
        let q = projector_q(model.rho_bath(), model.layout())?;
        Ok(Self::new(inner, q.clone(), q))
    }

    /// `𝒫𝓛𝒫` for the projector built from `rho_bath`.
    pub fn plp(inner: &'g G, model: &ModelSpec) -> Result<Self> {
        let p = projector_p(model.rho_bath(), model.layout())?;
        Ok(Self::new(inner, p.clone(), p))
    }
}

impl<G: Generator + ?Sized> Generator for Projected<'_, G> {
    fn dim_op(&self) -> usize {
        self.inner.dim_op()
    }

    fn at(&self, t: f64) -> Result<SuperOp> {
        Ok(self.left.compose(&self.inner.at(t)?).compose(&self.right))
    }
}

/// The zero generator.
pub struct Zero(pub usize);

impl Generator for Zero {
    fn dim_op(&self) -> usize {
        self.0
    }

    fn at(&self, _t: f64) -> Result<SuperOp> {
        Ok(SuperOp::zeros(self.0))
    }
}
