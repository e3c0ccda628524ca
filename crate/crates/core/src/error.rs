// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use thiserror::Error;

/// Which convolutionless auxiliary operator lost invertibility.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BreakdownOperator {
    /// `θ⁻¹`, the correlation-feedback operator.
    ThetaInverse,
    /// `W`, the integrating-factor correction.
    W,
}

impl fmt::Display for BreakdownOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BreakdownOperator::ThetaInverse => f.write_str("theta^-1"),
            BreakdownOperator::W => f.write_str("W"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularMatrix { condition: f64 },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    Hermiticity { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    StateValidation(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error(
        "convolutionless form broke down at slice {slice} (t = {time}): \
         {operator} condition estimate {condition:.3e}"
    )]
    TclBreakdown {
        slice: usize,
        time: f64,
        operator: BreakdownOperator,
        condition: f64,
    },

    #[error("invalid model: {0}")]
    Model(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
