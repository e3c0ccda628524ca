// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use rand::Rng;
use tcl_dynamics::hs::{ComplexMatrix, C64};

pub fn random_matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// A random full-rank density matrix `A A† / tr(A A†)`.
pub fn random_state(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    let m = a.matmul(&a.dagger());
    let tr = m.trace().re;
    let rho = m.scale_real(1.0 / tr);
    (&rho + &rho.dagger()).scale_real(0.5)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
