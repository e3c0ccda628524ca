// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! The convolutionless solution `ρ(t) = tr_B{W⁻¹(t) 𝒰_s(t, t₀) ρ₀ ⊗ ρ_B}`.
//!
//! With `𝒢_R(k, j)` the backward propagator of the full Liouvillian from
//! slice `k` to slice `j`, `ℋ(k, j)` the forward propagator of `𝒬𝓛𝒬` and
//! `𝒰_s(k, j)` that of `𝒫𝓛𝒫`:
//!
//! ```text
//! θ⁻¹(t_k) = 1 + i Σ_j w_j ℋ(k, j) 𝒬𝓛(t_j)𝒫 𝒢_R(k, j)
//! W(t_k)   = 1 + i Σ_j w_j 𝒰_s(k, j) 𝒫𝓛(t_j)(θ(t_j) − 1)𝒫 𝒢_R(k, j) θ(t_k)
//! ```
//!
//! Both sums use trapezoid weights on the sub-grid `t₀ … t_k`. The
//! per-slice functions ([`TclSolver::theta`], [`TclSolver::w_operator`])
//! evaluate these sums directly in `O(k)` step compositions, so `W` costs
//! `O(k²)`. Whole trajectories go through [`TclSolver::sweep`], which
//! carries both sums forward with one-step recurrences,
//!
//! ```text
//! I_{k+1} = h_k I_k g_k⁻¹ + (Δ_k/2)(h_k X_k g_k⁻¹ + X_{k+1})
//! ```
//!
//! (and likewise for `W`), making a trajectory of `n` slices `O(n)` in
//! superoperator products and `O(1)` in memory.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use rayon::prelude::*;

use super::factors::{eye, norm_1, superop, ProjectorFactors};
use super::{Generator, ModelGenerator};
use crate::error::{BreakdownOperator, Error, Result};
use crate::foliation::{Foliation, Quadrature};
use crate::hs::{
    kron, partial_trace, projector_p, projector_q, ComplexMatrix, SpaceLayout, Subsystem, SuperOp, C64, I,
    SINGULAR_CONDITION,
};
use crate::models::ModelSpec;

/// Steps computed together in one parallel batch during a sweep.
const SWEEP_BATCH: usize = 32;

struct Step {
    g_inv: SuperOp,
    h: SuperOp,
    u: SuperOp,
    /// `exp(−iΔ 𝒯𝓛ℰ)`, the core of `u = 1 − 𝒫 + ℰ e 𝒯`.
    u_core: Array2<C64>,
}

/// `(𝒬𝓛𝒫, 𝒯𝓛)` at a slice.
struct Node {
    qlp: Array2<C64>,
    tl: Array2<C64>,
}

/// Step exponentials reused by the per-slice (non-sweep) evaluations.
#[derive(Default)]
struct StepMemo {
    steps: Mutex<HashMap<usize, Arc<Step>>>,
    forward: Mutex<HashMap<usize, Arc<SuperOp>>>,
}

fn memoized<T>(map: &Mutex<HashMap<usize, Arc<T>>>, k: usize, make: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    if let Some(hit) = map.lock().expect("step memo poisoned").get(&k) {
        return Ok(hit.clone());
    }
    let fresh = Arc::new(make()?);
    map.lock().expect("step memo poisoned").insert(k, fresh.clone());
    Ok(fresh)
}

/// Auxiliary operators at one slice, handed to the [`TclSolver::sweep`]
/// visitor.
pub struct SliceOps<'s> {
    pub slice: usize,
    pub time: f64,
    pub theta: &'s SuperOp,
    pub w_inv: &'s SuperOp,
    /// `𝒰_s(k, 0)`.
    pub u_s: &'s SuperOp,
    pub cond_theta: f64,
    pub cond_w: f64,
}

impl SliceOps<'_> {
    /// `W⁻¹ 𝒰_s`, the joint-space map whose bath trace is the dynamics.
    pub fn joint_map(&self) -> SuperOp {
        self.w_inv.compose(self.u_s)
    }

    /// `W⁻¹ 𝒰_s x` without forming the product.
    pub fn apply_joint(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.w_inv.apply(&self.u_s.apply(x)?)
    }
}

pub struct TclSolver<'a> {
    gen: Box<dyn Generator + 'a>,
    foliation: &'a Foliation,
    layout: SpaceLayout,
    rho_bath: ComplexMatrix,
    p: SuperOp,
    q: SuperOp,
    threshold: f64,
    factors: ProjectorFactors,
    memo: StepMemo,
}

impl<'a> TclSolver<'a> {
    /// Solver for an arbitrary generator on the joint space of `layout`.
    /// Only the trapezoid rule is supported, since the integrands are known
    /// on slices only.
    pub fn new(
        gen: Box<dyn Generator + 'a>,
        foliation: &'a Foliation,
        rho_bath: &ComplexMatrix,
        layout: SpaceLayout,
    ) -> Result<Self> {
        if foliation.quadrature() != Quadrature::Trapezoid {
            return Err(Error::Grid("the convolutionless solver requires the trapezoid rule".into()));
        }
        if gen.dim_op() != layout.joint_dim() {
            return Err(Error::Dimension { expected: layout.joint_dim(), found: gen.dim_op() });
        }
        let p = projector_p(rho_bath, layout)?;
        let q = projector_q(rho_bath, layout)?;
        let factors = ProjectorFactors::new(rho_bath, layout)?;
        Ok(Self {
            gen,
            foliation,
            layout,
            rho_bath: rho_bath.clone(),
            p,
            q,
            threshold: SINGULAR_CONDITION,
            factors,
            memo: StepMemo::default(),
        })
    }

    pub fn for_model(model: &'a ModelSpec, foliation: &'a Foliation) -> Result<Self> {
        Self::new(Box::new(ModelGenerator::new(model)), foliation, model.rho_bath(), model.layout())
    }

    /// Condition estimate above which `θ⁻¹` or `W` count as singular.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn foliation(&self) -> &Foliation {
        self.foliation
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    pub fn projector_p(&self) -> &SuperOp {
        &self.p
    }

    pub fn projector_q(&self) -> &SuperOp {
        &self.q
    }

    pub fn generator(&self) -> &dyn Generator {
        self.gen.as_ref()
    }

    fn joint_identity(&self) -> SuperOp {
        SuperOp::identity(self.layout.joint_dim())
    }

    fn check_pair(&self, k: usize, j: usize) -> Result<()> {
        self.foliation.check_slice(k)?;
        if j > k {
            return Err(Error::Grid(format!("need j <= k, got j = {j}, k = {k}")));
        }
        Ok(())
    }

    fn liouvillian_at(&self, t: f64) -> Result<SuperOp> {
        self.gen.at(t)
    }

    /// `exp(sign·iΔ_k 𝓛(t))`, through the Hamiltonian when there is one.
    fn unitary_step(&self, l: &SuperOp, t: f64, k: usize, sign: f64) -> SuperOp {
        let dt = sign * self.foliation.step(k);
        match self.gen.hamiltonian(t) {
            Some(h) => {
                let v = h.scale(C64::new(0.0, dt)).expm();
                SuperOp::sandwich(&v, &v.dagger())
            }
            None => l.scale(C64::new(0.0, dt)).expm(),
        }
    }

    fn step(&self, k: usize) -> Result<Step> {
        let t = self.foliation.midpoint(k);
        let l = self.liouvillian_at(t)?;
        let fac = &self.factors;
        let la = l.matrix().as_array();
        let tl = fac.t.dot(la);
        let le = la.dot(&fac.e);
        let core = tl.dot(&fac.e);
        // 𝒬𝓛𝒬 = 𝓛 − 𝒫𝓛 − 𝓛𝒫 + 𝒫𝓛𝒫
        let qlq = &(&(la - &fac.e.dot(&tl)) - &le.dot(&fac.t)) + &fac.lift(&core);
        let dt = self.foliation.step(k);
        let h = superop(l.dim_op(), qlq)?.scale(C64::new(0.0, -dt)).expm();
        let u_core = ComplexMatrix::from_array(core)?.scale(C64::new(0.0, -dt)).expm().into_array();
        let n = la.nrows();
        let u = &(&eye(n) - &fac.e.dot(&fac.t)) + &fac.lift(&u_core);
        Ok(Step { g_inv: self.unitary_step(&l, t, k, 1.0), h, u: superop(l.dim_op(), u)?, u_core })
    }

    fn node_factors(&self, j: usize) -> Result<Node> {
        let l = self.liouvillian_at(self.foliation.time(j))?;
        let fac = &self.factors;
        let la = l.matrix().as_array();
        let tl = fac.t.dot(la);
        let le = la.dot(&fac.e);
        let qlp = &le.dot(&fac.t) - &fac.lift(&tl.dot(&fac.e));
        Ok(Node { qlp, tl })
    }

    fn memo_step(&self, k: usize) -> Result<Arc<Step>> {
        memoized(&self.memo.steps, k, || self.step(k))
    }

    /// `T exp(−i∫𝓛)` over interval `k`.
    fn memo_forward(&self, k: usize) -> Result<Arc<SuperOp>> {
        memoized(&self.memo.forward, k, || {
            let t = self.foliation.midpoint(k);
            Ok(self.unitary_step(&self.liouvillian_at(t)?, t, k, -1.0))
        })
    }

    /// `(𝒬𝓛𝒫, 𝒫𝓛)` at slice `j`.
    fn node(&self, j: usize) -> Result<(SuperOp, SuperOp)> {
        let l = self.liouvillian_at(self.foliation.time(j))?;
        let pl = self.p.compose(&l);
        Ok((self.q.compose(&l).compose(&self.p), pl))
    }

    fn product(&self, from: usize, to: usize, later_left: bool, f: impl Fn(usize) -> Result<SuperOp>) -> Result<SuperOp> {
        let mut acc = self.joint_identity();
        for k in from..to {
            let s = f(k)?;
            acc = if later_left { s.compose(&acc) } else { acc.compose(&s) };
        }
        Ok(acc)
    }

    /// Forward propagator `T exp(−i∫𝓛)` from slice `j` to slice `k`.
    pub fn forward(&self, k: usize, j: usize) -> Result<SuperOp> {
        self.check_pair(k, j)?;
        self.product(j, k, true, |m| Ok((*self.memo_forward(m)?).clone()))
    }

    /// `𝒢_R(k, j) = T^c exp(+i∫_{t_j}^{t_k} 𝓛)`, mapping the joint state at
    /// slice `k` back to slice `j`.
    pub fn g_retarded(&self, k: usize, j: usize) -> Result<SuperOp> {
        self.check_pair(k, j)?;
        self.product(j, k, false, |m| Ok(self.memo_step(m)?.g_inv.clone()))
    }

    /// `ℋ(k, j) = T exp(−i∫_{t_j}^{t_k} 𝒬𝓛𝒬)`.
    pub fn projected_h(&self, k: usize, j: usize) -> Result<SuperOp> {
        self.check_pair(k, j)?;
        self.product(j, k, true, |m| Ok(self.memo_step(m)?.h.clone()))
    }

    /// `𝒰_s(k, j) = T exp(−i∫_{t_j}^{t_k} 𝒫𝓛𝒫)`.
    pub fn u_system(&self, k: usize, j: usize) -> Result<SuperOp> {
        self.check_pair(k, j)?;
        self.product(j, k, true, |m| Ok(self.memo_step(m)?.u.clone()))
    }

    fn breakdown(&self, k: usize, operator: BreakdownOperator, e: Error) -> Error {
        match e {
            Error::SingularMatrix { condition } => {
                Error::TclBreakdown { slice: k, time: self.foliation.time(k), operator, condition }
            }
            other => other,
        }
    }

    fn invert(&self, x: &SuperOp, k: usize, operator: BreakdownOperator) -> Result<(SuperOp, f64)> {
        x.inverse_with_threshold(self.threshold).map_err(|e| self.breakdown(k, operator, e))
    }

    /// `θ⁻¹(t_k)` by the direct sum over slices.
    pub fn theta_inverse(&self, k: usize) -> Result<SuperOp> {
        self.foliation.check_slice(k)?;
        let w = self.foliation.prefix_weights(k);
        let mut h = self.joint_identity();
        let mut g_r = self.joint_identity();
        let mut sum = SuperOp::zeros(self.layout.joint_dim());
        for j in (0..=k).rev() {
            if j < k {
                let s = self.memo_step(j)?;
                h = h.compose(&s.h);
                g_r = s.g_inv.compose(&g_r);
            }
            if w[j] != 0.0 {
                let (x, _) = self.node(j)?;
                sum = &sum + &h.compose(&x).compose(&g_r).scale_real(w[j]);
            }
        }
        Ok(&self.joint_identity() + &sum.scale(I))
    }

    /// `θ(t_k)` and the condition estimate of `θ⁻¹(t_k)`.
    pub fn theta(&self, k: usize) -> Result<(SuperOp, f64)> {
        let inv = self.theta_inverse(k)?;
        self.invert(&inv, k, BreakdownOperator::ThetaInverse)
    }

    /// `W(t_k)` by the direct sum, with its condition estimate; `W` is
    /// checked for invertibility.
    pub fn w_operator(&self, k: usize) -> Result<(SuperOp, f64)> {
        self.foliation.check_slice(k)?;
        let w = self.foliation.prefix_weights(k);
        let (theta_k, _) = self.theta(k)?;
        let id = self.joint_identity();
        let mut u = self.joint_identity();
        let mut g_r = self.joint_identity();
        let mut sum = SuperOp::zeros(self.layout.joint_dim());
        for j in (0..=k).rev() {
            if j < k {
                let s = self.memo_step(j)?;
                u = u.compose(&s.u);
                g_r = s.g_inv.compose(&g_r);
            }
            if w[j] != 0.0 {
                let (theta_j, _) = self.theta(j)?;
                let (_, pl) = self.node(j)?;
                let y = pl.compose(&(&theta_j - &id)).compose(&self.p);
                sum = &sum + &u.compose(&y).compose(&g_r).scale_real(w[j]);
            }
        }
        let w_k = &id + &sum.compose(&theta_k).scale(I);
        let (_, cond) = self.invert(&w_k, k, BreakdownOperator::W)?;
        Ok((w_k, cond))
    }

    /// Walks slices `0..=last`, calling `visit` with the auxiliary
    /// operators of each slice. Stops at the first breakdown.
    pub fn sweep(&self, last: usize, mut visit: impl FnMut(&SliceOps<'_>) -> Result<()>) -> Result<()> {
        self.foliation.check_slice(last)?;
        let fac = &self.factors;
        let dim = self.layout.joint_dim();
        let (n, r) = (dim * dim, fac.rank());
        let id = eye(n);
        let p_full = fac.e.dot(&fac.t);
        let half = |k: usize| C64::new(0.5 * self.foliation.step(k), 0.0);
        // 𝒯𝓛(θ − 1)ℰ, the core of 𝒫𝓛(θ − 1)𝒫.
        let y_core = |node: &Node, theta: &Array2<C64>| node.tl.dot(&(&theta.dot(&fac.e) - &fac.e));

        let mut node = self.node_factors(0)?;
        let mut theta = SuperOp::identity(dim);
        let mut cond_theta = 1.0;
        let mut int_theta: Array2<C64> = Array2::zeros((n, n));
        // ∫W = ℰ b_w, since every term has 𝒫 on the left.
        let mut b_w: Array2<C64> = Array2::zeros((r, n));
        let mut y = y_core(&node, theta.matrix().as_array());
        let mut u_core = eye(r);
        let mut batch: std::vec::IntoIter<Result<(Step, Node)>> = Vec::new().into_iter();

        for k in 0..=last {
            // W = 1 + ℰC with C = i b_w θ, so W⁻¹ = 1 − ℰ(1 + Cℰ)⁻¹C.
            let c = b_w.dot(theta.matrix().as_array()).mapv(|z| z * I);
            let small = &eye(r) + &c.dot(&fac.e);
            let small_inv = ComplexMatrix::from_array(small)?
                .inverse_with_threshold(f64::INFINITY)
                .map_err(|e| self.breakdown(k, BreakdownOperator::W, e))?
                .0
                .into_array();
            let w_full = &id + &fac.e.dot(&c);
            let w_inv = &id - &fac.e.dot(&small_inv.dot(&c));
            let cond_w = norm_1(&w_full) * norm_1(&w_inv);
            if !(cond_w <= self.threshold) {
                return Err(Error::TclBreakdown {
                    slice: k,
                    time: self.foliation.time(k),
                    operator: BreakdownOperator::W,
                    condition: cond_w,
                });
            }
            let w_inv = superop(dim, w_inv)?;
            let u_s = superop(dim, &(&id - &p_full) + &fac.lift(&u_core))?;
            visit(&SliceOps {
                slice: k,
                time: self.foliation.time(k),
                theta: &theta,
                w_inv: &w_inv,
                u_s: &u_s,
                cond_theta,
                cond_w,
            })?;
            if k == last {
                break;
            }

            if batch.len() == 0 {
                let end = (k + SWEEP_BATCH).min(last);
                let fresh: Vec<_> = (k..end)
                    .into_par_iter()
                    .map(|m| Ok((self.step(m)?, self.node_factors(m + 1)?)))
                    .collect();
                batch = fresh.into_iter();
            }
            let (s, next) = batch.next().expect("batch covers the next step")?;
            let dt2 = half(k);
            let (h, g_inv) = (s.h.matrix().as_array(), s.g_inv.matrix().as_array());

            int_theta = &h.dot(&(&int_theta + &node.qlp.mapv(|z| z * dt2))).dot(g_inv) + &next.qlp.mapv(|z| z * dt2);
            let theta_inv = superop(dim, &id + &int_theta.mapv(|z| z * I))?;
            let (theta_next, c_next) = self.invert(&theta_inv, k + 1, BreakdownOperator::ThetaInverse)?;
            let y_next = y_core(&next, theta_next.matrix().as_array());
            let b_in = &b_w + &y.dot(&fac.t).mapv(|z| z * dt2);
            b_w = &s.u_core.dot(&b_in).dot(g_inv) + &y_next.dot(&fac.t).mapv(|z| z * dt2);
            u_core = s.u_core.dot(&u_core);
            theta = theta_next;
            cond_theta = c_next;
            y = y_next;
            node = next;
        }
        Ok(())
    }

    /// `tr_B` of a joint-space map applied to `ρ ⊗ ρ_B`.
    pub fn reduce(&self, joint_map: &SuperOp, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let joint = joint_map.apply(&kron(rho, &self.rho_bath))?;
        partial_trace(&joint, self.layout, Subsystem::System)
    }

    /// The reduced state along the whole foliation.
    pub fn trajectory(&self, rho0: &ComplexMatrix) -> Result<Vec<TclPoint>> {
        let last = self.foliation.len() - 1;
        let mut out = Vec::with_capacity(last + 1);
        let start = kron(rho0, &self.rho_bath);
        self.sweep(last, |ops| {
            let rho = partial_trace(&ops.apply_joint(&start)?, self.layout, Subsystem::System)?;
            let joint = ops.theta.apply(&kron(&rho, &self.rho_bath))?;
            out.push(TclPoint {
                slice: ops.slice,
                time: ops.time,
                rho,
                joint,
                cond_theta: ops.cond_theta,
                cond_w: ops.cond_w,
            });
            Ok(())
        })?;
        Ok(out)
    }

    /// `ρ(t_k)` for initial system state `rho0`.
    pub fn reduced_dm(&self, rho0: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
        let mut rho = None;
        self.sweep(k, |ops| {
            if ops.slice == k {
                let joint = ops.apply_joint(&kron(rho0, &self.rho_bath))?;
                rho = Some(partial_trace(&joint, self.layout, Subsystem::System)?);
            }
            Ok(())
        })?;
        Ok(rho.expect("sweep visits the last slice"))
    }

    /// System-space superoperator `ℰ(t_k)`, tabulated on matrix units.
    pub fn quantum_operation(&self, k: usize) -> Result<SuperOp> {
        let mut map = None;
        self.sweep(k, |ops| {
            if ops.slice == k {
                map = Some(self.channel_from(ops)?);
            }
            Ok(())
        })?;
        Ok(map.expect("sweep visits the last slice"))
    }

    /// `ℰ = tr_B{W⁻¹ 𝒰_s (· ⊗ ρ_B)}` at the slice of `ops`.
    pub fn channel_from(&self, ops: &SliceOps<'_>) -> Result<SuperOp> {
        let joint = ops.joint_map();
        let d = self.layout.d_sys();
        let mut err = None;
        let e = SuperOp::from_linear_map(d, |x| match self.reduce(&joint, x) {
            Ok(r) => r,
            Err(e) => {
                err = Some(e);
                ComplexMatrix::zeros(d)
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(e),
        }
    }
}

/// One slice of a convolutionless trajectory.
#[derive(Clone, Debug)]
pub struct TclPoint {
    pub slice: usize,
    pub time: f64,
    pub rho: ComplexMatrix,
    /// Joint state reconstructed as `θ(t)(ρ(t) ⊗ ρ_B)`.
    pub joint: ComplexMatrix,
    pub cond_theta: f64,
    pub cond_w: f64,
}

/// `𝒢_R(k, j)` for a bare generator.
pub fn g_retarded<G: Generator + ?Sized>(gen: &G, f: &Foliation, k: usize, j: usize) -> Result<SuperOp> {
    f.check_slice(k)?;
    if j > k {
        return Err(Error::Grid(format!("need j <= k, got j = {j}, k = {k}")));
    }
    let mut acc = SuperOp::identity(gen.dim_op());
    for m in j..k {
        let step = gen.at(f.midpoint(m))?.scale(I * f.step(m)).expm();
        acc = acc.compose(&step);
    }
    Ok(acc)
}

/// `ℋ(k, j)` for a model.
pub fn projected_propagator_h(model: &ModelSpec, f: &Foliation, k: usize, j: usize) -> Result<SuperOp> {
    TclSolver::for_model(model, f)?.projected_h(k, j)
}

/// `𝒰_s(k, j)` for a model.
pub fn u_system(model: &ModelSpec, f: &Foliation, k: usize, j: usize) -> Result<SuperOp> {
    TclSolver::for_model(model, f)?.u_system(k, j)
}

/// `θ(t_k)` for a model, with the condition estimate of `θ⁻¹`.
pub fn theta(model: &ModelSpec, f: &Foliation, k: usize) -> Result<(SuperOp, f64)> {
    TclSolver::for_model(model, f)?.theta(k)
}

/// `W(t_k)` for a model, with its condition estimate.
pub fn w_operator(model: &ModelSpec, f: &Foliation, k: usize) -> Result<(SuperOp, f64)> {
    TclSolver::for_model(model, f)?.w_operator(k)
}

/// `ρ(t_k)` of `model` from its own initial state.
pub fn reduced_dm(model: &ModelSpec, f: &Foliation, k: usize) -> Result<ComplexMatrix> {
    TclSolver::for_model(model, f)?.reduced_dm(model.rho0_sys(), k)
}

/// `ℰ(t_k)` of `model`.
pub fn quantum_operation(model: &ModelSpec, f: &Foliation, k: usize) -> Result<SuperOp> {
    TclSolver::for_model(model, f)?.quantum_operation(k)
}

