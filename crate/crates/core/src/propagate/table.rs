// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use super::Generator;
use crate::error::{Error, Result};
use crate::foliation::Foliation;
use crate::hs::{SuperOp, C64};

/// Sign of the exponent, `expm(sign · i · 𝓛 Δt)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    /// `−i`: forward evolution.
    Minus,
    /// `+i`: backward evolution.
    Plus,
}

impl Sign {
    fn factor(self) -> C64 {
        match self {
            Sign::Minus => C64::new(0.0, -1.0),
            Sign::Plus => C64::new(0.0, 1.0),
        }
    }
}

/// Product ordering of the interval steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    /// `T`: later steps act last (stand to the left).
    Time,
    /// `T^c`: later steps act first (stand to the right).
    AntiTime,
}

/// Interval step propagators of one ordered exponential, with a cache of
/// accumulated products.
///
/// [`PropagatorTable::between`]`(a, b)` is the ordered product of the steps
/// for intervals `a..b`. For [`Ordering::Time`] it composes as
/// `between(a, c) = between(b, c) ∘ between(a, b)`, for
/// [`Ordering::AntiTime`] as `between(a, c) = between(a, b) ∘ between(b, c)`.
#[derive(Debug)]
pub struct PropagatorTable {
    steps: Vec<SuperOp>,
    ordering: Ordering,
    sign: Sign,
    cache: Mutex<HashMap<(usize, usize), SuperOp>>,
}

/// Tabulates `expm(sign · i · gen(midpoint) · Δt_k)` on every interval.
pub fn ordered_exp<G: Generator + ?Sized>(
    gen: &G,
    f: &Foliation,
    sign: Sign,
    ordering: Ordering,
) -> Result<PropagatorTable> {
    if f.n_intervals() == 0 {
        return Err(Error::Grid("ordered exponential needs at least one interval".into()));
    }
    let factor = sign.factor();
    let steps = (0..f.n_intervals())
        .into_par_iter()
        .map(|k| Ok(gen.at(f.midpoint(k))?.scale(factor * f.step(k)).expm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PropagatorTable { steps, ordering, sign, cache: Mutex::new(HashMap::new()) })
}

impl PropagatorTable {
    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, k: usize) -> &SuperOp {
        &self.steps[k]
    }

    /// Ordered product over the intervals between slices `from ≤ to`.
    pub fn between(&self, from: usize, to: usize) -> Result<SuperOp> {
        if from > to {
            return Err(Error::Grid(format!("propagator requested from slice {from} back to {to}")));
        }
        if to > self.steps.len() {
            return Err(Error::Grid(format!("slice {to} out of range (0..={})", self.steps.len())));
        }
        let dim = self.steps[0].dim_op();
        if from == to {
            return Ok(SuperOp::identity(dim));
        }
        let mut cache = self.cache.lock().expect("propagator cache poisoned");
        if let Some(hit) = cache.get(&(from, to)) {
            return Ok(hit.clone());
        }
        // Extend the longest cached prefix starting at `from`.
        let (mut end, mut acc) = (from + 1..to)
            .rev()
            .find_map(|m| cache.get(&(from, m)).map(|p| (m, p.clone())))
            .unwrap_or((from, SuperOp::identity(dim)));
        while end < to {
            acc = match self.ordering {
                Ordering::Time => self.steps[end].compose(&acc),
                Ordering::AntiTime => acc.compose(&self.steps[end]),
            };
            end += 1;
        }
        cache.insert((from, to), acc.clone());
        Ok(acc)
    }

    /// Product over all intervals.
    pub fn total(&self) -> Result<SuperOp> {
        self.between(0, self.steps.len())
    }
}
