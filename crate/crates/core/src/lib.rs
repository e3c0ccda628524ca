// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact reduced dynamics of open quantum systems in the
//! time-convolutionless (TCL) form, with brute-force references and
//! perturbative expansions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod foliation;
pub mod hs;
pub mod models;
pub mod oracle;
pub mod perturb;
pub mod propagate;

pub use error::{BreakdownOperator, Error, Result};
