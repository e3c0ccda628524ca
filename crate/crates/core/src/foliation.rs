// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Time slicings.
//!
//! A [`Foliation`] is a strictly increasing list of slice labels, the
//! physical time of each slice, and node quadrature weights. Labels are
//! bookkeeping only: every numerical routine reads `times` and `weights`,
//! so relabeling a foliation never changes a result.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Quadrature {
    /// Composite trapezoid rule on the slice nodes.
    #[default]
    Trapezoid,
    /// Composite midpoint rule on interval centres. Only usable where the
    /// integrand can be sampled off the grid (the perturbative module).
    Midpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Foliation {
    params: Vec<f64>,
    times: Vec<f64>,
    weights: Vec<f64>,
    quadrature: Quadrature,
}

impl Foliation {
    /// Uniform grid of `n` intervals on `[t0, t1]`, labels equal to times.
    pub fn flat(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::Grid("end points must be finite".into()));
        }
        if t1 <= t0 {
            return Err(Error::Grid(format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        if n == 0 {
            return Err(Error::Grid("need at least one interval (n = 0)".into()));
        }
        let span = t1 - t0;
        let times: Vec<f64> = (0..=n)
            .map(|k| if k == n { t1 } else { t0 + span * (k as f64 / n as f64) })
            .collect();
        Self::from_times(times)
    }

    /// Non-uniform slicing through the given times (a variable-lapse grid).
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid("need at least two slices".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Grid("slice times must be finite".into()));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Grid(format!(
                "slice times must be strictly increasing (t[{}] = {} >= t[{}] = {})",
                k,
                times[k],
                k + 1,
                times[k + 1]
            )));
        }
        let weights = trapezoid_weights(&times);
        Ok(Self { params: times.clone(), times, weights, quadrature: Quadrature::Trapezoid })
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    /// Relabels every slice `s ↦ map(s)`; times and weights are untouched.
    pub fn reparametrize(&self, map: impl Fn(f64) -> f64) -> Result<Self> {
        let params: Vec<f64> = self.params.iter().map(|&s| map(s)).collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Grid("relabeling produced a non-finite label".into()));
        }
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("relabeling map is not strictly increasing".into()));
        }
        Ok(Self { params, ..self.clone() })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Trapezoid node weights for the whole grid.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    /// Number of slices (`n + 1`).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Width of interval `k` (between slices `k` and `k + 1`).
    pub fn step(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.times[k] + self.times[k + 1])
    }

    pub fn check_slice(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::Grid(format!("slice {k} out of range (0..{})", self.len())));
        }
        Ok(())
    }

    /// Index of the slice closest to `t`.
    pub fn nearest_slice(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &tk) in self.times.iter().enumerate() {
            if (tk - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// Trapezoid weights of slices `0..=k` for `∫_{t0}^{t_k}`; all zero for `k = 0`.
    pub fn prefix_weights(&self, k: usize) -> Vec<f64> {
        trapezoid_weights(&self.times[..=k])
    }

    /// `(t, w)` pairs approximating `∫_{t0}^{t_k} f dt ≈ Σ w f(t)` under the
    /// configured quadrature.
    pub fn rule_upto(&self, k: usize) -> Vec<(f64, f64)> {
        match self.quadrature {
            Quadrature::Trapezoid => {
                self.times[..=k].iter().copied().zip(self.prefix_weights(k)).collect()
            }
            Quadrature::Midpoint => (0..k).map(|i| (self.midpoint(i), self.step(i))).collect(),
        }
    }

    /// Like [`Foliation::rule_upto`] but for an arbitrary upper limit
    /// `t0 ≤ tau ≤ t_end`; a partial last interval is handled with the same
    /// rule.
    pub fn rule_until(&self, tau: f64) -> Vec<(f64, f64)> {
        let last_full = self.times.iter().rposition(|&t| t <= tau).unwrap_or(0);
        let mut rule = self.rule_upto(last_full);
        let rest = tau - self.times[last_full];
        if rest > 0.0 {
            let start = self.times[last_full];
            match self.quadrature {
                Quadrature::Trapezoid => {
                    if let Some(last) = rule.last_mut() {
                        last.1 += 0.5 * rest;
                    }
                    rule.push((tau, 0.5 * rest));
                }
                Quadrature::Midpoint => rule.push((start + 0.5 * rest, rest)),
            }
        }
        rule
    }
}

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let half = 0.5 * (times[k + 1] - times[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_interval_grid() {
        let f = Foliation::flat(0.0, 1.0, 2).unwrap();
        assert_eq!(f.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(f.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn single_interval_grid() {
        let f = Foliation::flat(0.0, 1.0, 1).unwrap();
        assert_eq!(f.times(), &[0.0, 1.0]);
        assert_eq!(f.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(matches!(Foliation::flat(1.0, 1.0, 4), Err(Error::Grid(_))));
        assert!(matches!(Foliation::flat(2.0, 1.0, 4), Err(Error::Grid(_))));
        assert!(matches!(Foliation::flat(0.0, 1.0, 0), Err(Error::Grid(_))));
        assert!(matches!(Foliation::from_times(vec![0.0, 0.2, 0.2]), Err(Error::Grid(_))));
    }

    #[test]
    fn identity_relabel_is_a_no_op() {
        let f = Foliation::flat(0.0, 2.0, 7).unwrap();
        assert_eq!(f.reparametrize(|s| s).unwrap(), f);
    }

    #[test]
    fn cubic_relabel_keeps_times() {
        let f = Foliation::flat(-1.0, 2.0, 9).unwrap();
        let g = f.reparametrize(|s| s * s * s + s).unwrap();
        assert_eq!(g.times(), f.times());
        assert_eq!(g.weights(), f.weights());
        assert_ne!(g.params(), f.params());
    }

    #[test]
    fn non_monotone_relabel_is_rejected() {
        let f = Foliation::flat(-1.0, 1.0, 4).unwrap();
        assert!(matches!(f.reparametrize(|s| s * s), Err(Error::Grid(_))));
    }

    #[test]
    fn prefix_weights_integrate_linear_functions_exactly() {
        let f = Foliation::flat(0.0, 3.0, 12).unwrap();
        for k in 0..f.len() {
            let w = f.prefix_weights(k);
            let integral: f64 = w.iter().zip(f.times()).map(|(w, t)| w * t).sum();
            let tk = f.time(k);
            assert!((integral - 0.5 * tk * tk).abs() < 1e-13);
        }
    }

    #[test]
    fn rule_until_handles_partial_intervals() {
        for q in [Quadrature::Trapezoid, Quadrature::Midpoint] {
            let f = Foliation::flat(0.0, 1.0, 4).unwrap().with_quadrature(q);
            let rule = f.rule_until(0.6);
            let area: f64 = rule.iter().map(|(_, w)| w).sum();
            let first: f64 = rule.iter().map(|(t, w)| w * t).sum();
            assert!((area - 0.6).abs() < 1e-15, "{q:?}");
            assert!((first - 0.18).abs() < 1e-15, "{q:?}");
        }
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let err = |n: usize| {
            let f = Foliation::flat(0.0, 1.0, n).unwrap().with_quadrature(Quadrature::Midpoint);
            let approx: f64 = f.rule_upto(n).iter().map(|(t, w)| w * t.exp()).sum();
            (approx - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    fn compensated_sum(xs: &[f64]) -> f64 {
        let (mut sum, mut carry) = (0.0f64, 0.0f64);
        for &x in xs {
            let t = sum + x;
            carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        sum + carry
    }

    proptest! {
        #[test]
        fn weights_sum_to_span(t0 in -5.0f64..5.0, span in 0.1f64..10.0, n in 1usize..400) {
            let f = Foliation::flat(t0, t0 + span, n).unwrap();
            let total = compensated_sum(f.weights());
            let exact = f.t_end() - f.t0();
            prop_assert!((total - exact).abs() <= 1e-14 * exact.max(1.0), "error {}", total - exact);
            prop_assert!(f.weights().iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn relabel_preserves_monotonicity(n in 1usize..50, a in 0.1f64..3.0, c in -2.0f64..2.0) {
            let f = Foliation::flat(0.0, 1.0, n).unwrap();
            let g = f.reparametrize(|s| a * s * s * s + s + c).unwrap();
            prop_assert!(g.params().windows(2).all(|w| w[1] > w[0]));
            prop_assert_eq!(g.times(), f.times());
        }
    }
}
