// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! The chapters of the guide in `book/` and the README, compiled so their
//! snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/superoperators.md")]
pub mod superoperators {}

#[doc = include_str!("../../../book/src/foliation.md")]
pub mod foliation {}

#[doc = include_str!("../../../book/src/propagators.md")]
pub mod propagators {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/perturbation.md")]
pub mod perturbation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
