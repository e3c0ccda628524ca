// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense linear algebra and the Hilbert-Schmidt superoperator layer.

mod matrix;
mod superop;

pub use matrix::{
    fidelity, kron, pauli, trace_distance, trace_norm, ComplexMatrix, C64, HERMITIAN_TOL,
    SINGULAR_CONDITION, STATE_TOL,
};
pub(crate) use matrix::I;
pub use superop::{
    devectorize, liouvillian, partial_trace, projector_p, projector_q, vectorize, SpaceLayout,
    SuperOp, Subsystem,
};
