// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Perturbative expansions in the interaction picture.
//!
//! A classical drive enters as `H_d(t) = −a(t) O(t)` on the system. The bath
//! coupling `Σ_i λ_i S_i ⊗ B_i` enters through the two-time correlation
//! kernel `C_{ii'}(t', t'') = λ_i λ_{i'} ⟨B_i(t') B_{i'}(t'')⟩_B`.
//!
//! Time integrals use the foliation's quadrature, and double integrals run
//! over the ordered region `t'' ≤ t'` with the same rule nested: the outer
//! nodes come from [`Foliation::rule_upto`] and the inner ones from
//! [`Foliation::rule_until`] at each outer node.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::foliation::{Foliation, Quadrature};
use crate::hs::{ComplexMatrix, C64, I};
use crate::models::{ModelSpec, Picture};

/// Switch-on tolerance: the field must vanish to this level at the start.
pub const SWITCH_ON_TOL: f64 = 1e-10;

type Field = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Kernel = Arc<dyn Fn(usize, usize, f64, f64) -> C64 + Send + Sync>;

/// A classical field `a(t)` coupled to a system operator `O`.
#[derive(Clone)]
pub struct DriveProtocol {
    operator: ComplexMatrix,
    field: Field,
    start: f64,
}

impl std::fmt::Debug for DriveProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriveProtocol").field("operator", &self.operator).field("start", &self.start).finish()
    }
}

impl DriveProtocol {
    /// Checks that `O` is Hermitian and `|a(start)| ≤ 1e-10`.
    pub fn new(operator: ComplexMatrix, start: f64, field: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        operator.ensure_hermitian()?;
        let a0 = field(start);
        if !(a0.abs() <= SWITCH_ON_TOL) {
            return Err(Error::Model(format!("drive must be switched off at its start time, a({start}) = {a0:e}")));
        }
        Ok(Self { operator, field: Arc::new(field), start })
    }

    /// `a(t) = ε sin(ν (t − start))`.
    pub fn sine(operator: ComplexMatrix, amplitude: f64, frequency: f64, start: f64) -> Result<Self> {
        Self::new(operator, start, move |t| amplitude * (frequency * (t - start)).sin())
    }

    /// `a(t) = ε r(t) cos(ν (t − start))` with the smooth switch-on
    /// `r(t) = sin²(π/2 · min(1, (t − start)/ramp))`.
    pub fn ramped(operator: ComplexMatrix, amplitude: f64, frequency: f64, ramp: f64, start: f64) -> Result<Self> {
        if !(ramp > 0.0) {
            return Err(Error::Model(format!("ramp time must be positive, got {ramp}")));
        }
        Self::new(operator, start, move |t| {
            let x = ((t - start) / ramp).clamp(0.0, 1.0);
            let r = (0.5 * std::f64::consts::PI * x).sin().powi(2);
            amplitude * r * (frequency * (t - start)).cos()
        })
    }

    /// The same protocol with the field multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let field = Arc::clone(&self.field);
        Self { operator: self.operator.clone(), field: Arc::new(move |t| factor * field(t)), start: self.start }
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn field(&self, t: f64) -> f64 {
        (self.field)(t)
    }

    /// `−a(t) O(t)` in the model's interaction picture.
    pub fn hamiltonian(&self, model: &ModelSpec, t: f64) -> ComplexMatrix {
        model.system_operator_at(&self.operator, t).scale_real(-self.field(t))
    }
}

/// Two-time bath correlation kernel, coupling strengths included.
#[derive(Clone)]
pub struct BathCorrelation {
    n: usize,
    kernel: Kernel,
}

impl std::fmt::Debug for BathCorrelation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BathCorrelation").field("couplings", &self.n).finish()
    }
}

impl BathCorrelation {
    pub fn new(n: usize, kernel: impl Fn(usize, usize, f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        Self { n, kernel: Arc::new(kernel) }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, |_, _, _, _| C64::new(0.0, 0.0))
    }

    /// `λ_i λ_{i'} tr(B_i(t') B_{i'}(t'') ρ_B)` from the model's bath.
    pub fn from_model(model: &ModelSpec) -> Self {
        let m = model.clone();
        Self::new(model.couplings().len(), move |i, ip, t1, t2| {
            let (ci, cj) = (&m.couplings()[i], &m.couplings()[ip]);
            let b1 = m.bath_operator_at(&ci.bath, t1);
            let b2 = m.bath_operator_at(&cj.bath, t2);
            b1.matmul(&b2).expectation(m.rho_bath()) * (ci.strength * cj.strength)
        })
    }

    /// `g² e^{−iω(t' − t'')}`: one mode `ω a†a` in vacuum, `B = a + a†`.
    pub fn single_mode_vacuum(g: f64, omega: f64) -> Self {
        Self::new(1, move |_, _, t1, t2| C64::from_polar(g * g, -omega * (t1 - t2)))
    }

    pub fn n_couplings(&self) -> usize {
        self.n
    }

    /// `C_{ii'}(t', t'')`.
    pub fn eval(&self, i: usize, ip: usize, t1: f64, t2: f64) -> C64 {
        (self.kernel)(i, ip, t1, t2)
    }

    /// `⟨[B_i(t'), B_{i'}(t'')]⟩`, weighted like [`BathCorrelation::eval`].
    pub fn commutator(&self, i: usize, ip: usize, t1: f64, t2: f64) -> C64 {
        self.eval(i, ip, t1, t2) - self.eval(ip, i, t2, t1)
    }

    /// `⟨{B_i(t'), B_{i'}(t'')}⟩`, weighted like [`BathCorrelation::eval`].
    pub fn anticommutator(&self, i: usize, ip: usize, t1: f64, t2: f64) -> C64 {
        self.eval(i, ip, t1, t2) + self.eval(ip, i, t2, t1)
    }
}

fn require_interaction(model: &ModelSpec) -> Result<()> {
    if model.picture() != Picture::Interaction {
        return Err(Error::Model("perturbative expansions work in the interaction picture".into()));
    }
    Ok(())
}

fn check_drive(model: &ModelSpec, drive: &DriveProtocol) -> Result<()> {
    require_interaction(model)?;
    if drive.operator.dim() != model.layout().d_sys() {
        return Err(Error::Dimension { expected: model.layout().d_sys(), found: drive.operator.dim() });
    }
    Ok(())
}

fn check_observable(model: &ModelSpec, obs: &ComplexMatrix) -> Result<()> {
    if obs.dim() != model.layout().d_sys() {
        return Err(Error::Dimension { expected: model.layout().d_sys(), found: obs.dim() });
    }
    obs.ensure_hermitian()
}

/// Interaction-picture system operators memoized by time.
struct Sampler<'m> {
    model: &'m ModelSpec,
    ops: Vec<ComplexMatrix>,
    cache: HashMap<u64, Vec<ComplexMatrix>>,
}

impl<'m> Sampler<'m> {
    fn new(model: &'m ModelSpec, ops: Vec<ComplexMatrix>) -> Self {
        Self { model, ops, cache: HashMap::new() }
    }

    fn at(&mut self, t: f64) -> &[ComplexMatrix] {
        let (model, ops) = (self.model, &self.ops);
        self.cache
            .entry(t.to_bits())
            .or_insert_with(|| ops.iter().map(|o| model.system_operator_at(o, t)).collect())
    }
}

/// `ρ⁽¹⁾(t_k) = ρ₀ + i Σ_j w_j a(t_j) [O(t_j), ρ₀]`.
pub fn rho_first_order(model: &ModelSpec, drive: &DriveProtocol, f: &Foliation, k: usize) -> Result<ComplexMatrix> {
    check_drive(model, drive)?;
    f.check_slice(k)?;
    let rho0 = model.rho0_sys();
    let mut acc = ComplexMatrix::zeros(rho0.dim());
    for (t, w) in f.rule_upto(k) {
        let a = drive.field(t);
        if a != 0.0 {
            acc += &model.system_operator_at(&drive.operator, t).commutator(rho0).scale_real(w * a);
        }
    }
    Ok(rho0 + &acc.scale(I))
}

/// [`rho_first_order`] on every slice, accumulated in one pass.
pub fn rho_first_order_series(model: &ModelSpec, drive: &DriveProtocol, f: &Foliation) -> Result<Vec<ComplexMatrix>> {
    check_drive(model, drive)?;
    let rho0 = model.rho0_sys();
    let increment = |t: f64| model.system_operator_at(&drive.operator, t).commutator(rho0).scale(I * drive.field(t));
    accumulate(f, rho0.dim(), increment).map(|v| v.into_iter().map(|d| rho0 + &d).collect())
}

/// `∫_{t0}^{t_k} g` on every slice, for the foliation's quadrature; each
/// new slice adds one interval.
fn accumulate(f: &Foliation, dim: usize, mut g: impl FnMut(f64) -> ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = ComplexMatrix::zeros(dim);
    out.push(acc.clone());
    let mut left = match f.quadrature() {
        Quadrature::Trapezoid => Some(g(f.t0())),
        Quadrature::Midpoint => None,
    };
    for k in 0..f.n_intervals() {
        match left.take() {
            Some(gl) => {
                let gr = g(f.time(k + 1));
                acc += &(&gl + &gr).scale_real(0.5 * f.step(k));
                left = Some(gr);
            }
            None => acc += &g(f.midpoint(k)).scale_real(f.step(k)),
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// Kubo response `δ⟨obs⟩(t_k) = i Σ_j w_j ⟨[obs(t_k), O(t_j)]⟩₀ a(t_j)`.
pub fn linear_response(
    model: &ModelSpec,
    drive: &DriveProtocol,
    observable: &ComplexMatrix,
    f: &Foliation,
    k: usize,
) -> Result<C64> {
    check_drive(model, drive)?;
    check_observable(model, observable)?;
    f.check_slice(k)?;
    let obs_k = model.system_operator_at(observable, f.time(k));
    let rho0 = model.rho0_sys();
    let mut sum = C64::new(0.0, 0.0);
    for (t, w) in f.rule_upto(k) {
        let a = drive.field(t);
        if a != 0.0 {
            let o = model.system_operator_at(&drive.operator, t);
            sum += obs_k.commutator(&o).expectation(rho0) * (w * a);
        }
    }
    Ok(sum * I)
}

/// Second-order bath correction `Δρ⁽²⁾(t_k)` with the model's own kernel.
pub fn rho_second_order(model: &ModelSpec, f: &Foliation, k: usize) -> Result<ComplexMatrix> {
    rho_second_order_with(model, &BathCorrelation::from_model(model), f, k)
}

/// `Δρ⁽²⁾(t_k) = Σ_{t'' ≤ t'} w w Σ_{ii'} [−C S_i(t')S_{i'}(t'')ρ₀ + C S_{i'}(t'')ρ₀S_i(t')
/// + C̄ S_i(t')ρ₀S_{i'}(t'') − C̄ ρ₀S_{i'}(t'')S_i(t')]` with `C = C_{ii'}(t', t'')` and
/// `C̄ = C_{i'i}(t'', t')`: the bath trace of the second Dyson term.
pub fn rho_second_order_with(
    model: &ModelSpec,
    kernel: &BathCorrelation,
    f: &Foliation,
    k: usize,
) -> Result<ComplexMatrix> {
    require_interaction(model)?;
    f.check_slice(k)?;
    let n = model.couplings().len();
    if kernel.n_couplings() != n {
        return Err(Error::Model(format!("kernel has {} couplings, model has {n}", kernel.n_couplings())));
    }
    let rho0 = model.rho0_sys();
    let mut sampler = Sampler::new(model, model.couplings().iter().map(|c| c.system.clone()).collect());
    let mut acc = ComplexMatrix::zeros(rho0.dim());
    for (t1, w1) in f.rule_upto(k) {
        if w1 == 0.0 {
            continue;
        }
        let s1 = sampler.at(t1).to_vec();
        for (t2, w2) in f.rule_until(t1) {
            if w2 == 0.0 {
                continue;
            }
            let s2 = sampler.at(t2).to_vec();
            for i in 0..n {
                for ip in 0..n {
                    acc += &second_order_term(kernel, rho0, &s1, &s2, i, ip, t1, t2).scale_real(w1 * w2);
                }
            }
        }
    }
    Ok(acc)
}

/// [`rho_second_order_with`] on every slice in `O(n²)` work: the inner
/// integral at each outer node is computed once and the outer integral is
/// accumulated.
pub fn rho_second_order_series(model: &ModelSpec, kernel: &BathCorrelation, f: &Foliation) -> Result<Vec<ComplexMatrix>> {
    require_interaction(model)?;
    let n = model.couplings().len();
    if kernel.n_couplings() != n {
        return Err(Error::Model(format!("kernel has {} couplings, model has {n}", kernel.n_couplings())));
    }
    let rho0 = model.rho0_sys().clone();
    let mut sampler = Sampler::new(model, model.couplings().iter().map(|c| c.system.clone()).collect());
    let inner = |t1: f64| {
        let mut acc = ComplexMatrix::zeros(rho0.dim());
        let s1 = sampler.at(t1).to_vec();
        for (t2, w2) in f.rule_until(t1) {
            if w2 == 0.0 {
                continue;
            }
            let s2 = sampler.at(t2).to_vec();
            for i in 0..n {
                for ip in 0..n {
                    acc += &second_order_term(kernel, &rho0, &s1, &s2, i, ip, t1, t2).scale_real(w2);
                }
            }
        }
        acc
    };
    accumulate(f, model.layout().d_sys(), inner)
}

#[allow(clippy::too_many_arguments)]
fn second_order_term(
    kernel: &BathCorrelation,
    rho0: &ComplexMatrix,
    s1: &[ComplexMatrix],
    s2: &[ComplexMatrix],
    i: usize,
    ip: usize,
    t1: f64,
    t2: f64,
) -> ComplexMatrix {
    let c = kernel.eval(i, ip, t1, t2);
    let cbar = kernel.eval(ip, i, t2, t1);
    let (a, b) = (&s1[i], &s2[ip]);
    let ab_r = a.matmul(b).matmul(rho0);
    let b_r_a = b.matmul(rho0).matmul(a);
    let a_r_b = a.matmul(rho0).matmul(b);
    let r_ba = rho0.matmul(b).matmul(a);
    &(&b_r_a - &ab_r).scale(c) + &(&a_r_b - &r_ba).scale(cbar)
}

/// Second-order shift of `⟨obs(t_k)⟩` caused by the bath, split by kernel
/// symmetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondOrderResponse {
    /// `tr(obs(t_k) Δρ⁽²⁾(t_k))`.
    pub total: C64,
    /// Part carried by the commutator kernel `K = ⟨[B, B]⟩`:
    /// `−½ Σ K_{jm} ⟨{[obs, S_j], S_m}⟩`.
    pub polarization: C64,
    /// Part carried by the anticommutator kernel `A = ⟨{B, B}⟩`:
    /// `½ Σ A_{jm} ⟨[S_m, [obs, S_j]]⟩`.
    pub fluctuation: C64,
}

/// `tr(obs(t_k) Δρ⁽²⁾(t_k)) = Σ [−C_{jm} ⟨[obs, S_j] S_m⟩₀ + C_{mj} ⟨S_m [obs, S_j]⟩₀]`
/// over the ordered region, with its polarization/fluctuation split.
pub fn second_order_response(
    model: &ModelSpec,
    kernel: &BathCorrelation,
    observable: &ComplexMatrix,
    f: &Foliation,
    k: usize,
) -> Result<SecondOrderResponse> {
    require_interaction(model)?;
    check_observable(model, observable)?;
    f.check_slice(k)?;
    let n = model.couplings().len();
    if kernel.n_couplings() != n {
        return Err(Error::Model(format!("kernel has {} couplings, model has {n}", kernel.n_couplings())));
    }
    let rho0 = model.rho0_sys();
    let obs_k = model.system_operator_at(observable, f.time(k));
    let mut sampler = Sampler::new(model, model.couplings().iter().map(|c| c.system.clone()).collect());
    let zero = C64::new(0.0, 0.0);
    let (mut total, mut pol, mut fluct) = (zero, zero, zero);
    for (t1, w1) in f.rule_upto(k) {
        if w1 == 0.0 {
            continue;
        }
        let x: Vec<ComplexMatrix> = sampler.at(t1).iter().map(|s| obs_k.commutator(s)).collect();
        for (t2, w2) in f.rule_until(t1) {
            if w2 == 0.0 {
                continue;
            }
            let s2 = sampler.at(t2).to_vec();
            for (i, xi) in x.iter().enumerate() {
                for (ip, sip) in s2.iter().enumerate() {
                    let w = w1 * w2;
                    let c = kernel.eval(i, ip, t1, t2);
                    let cbar = kernel.eval(ip, i, t2, t1);
                    let xs = xi.matmul(sip).expectation(rho0);
                    let sx = sip.matmul(xi).expectation(rho0);
                    total += (-c * xs + cbar * sx) * w;
                    pol += -0.5 * (c - cbar) * (xs + sx) * w;
                    fluct += 0.5 * (c + cbar) * (sx - xs) * w;
                }
            }
        }
    }
    Ok(SecondOrderResponse { total, polarization: pol, fluctuation: fluct })
}

/// The induced field `δÂ(t) = (i/4) Σ_{t'' ≤ t} w K(t, t'') O(t'')`, an
/// operator on the system, on the outer quadrature nodes up to slice `k`.
/// With it, `i Σ w ⟨[obs, O] ∘ (a + 4 δÂ)⟩₀` (symmetrized product) is the
/// linear response plus the polarization part of the second-order shift.
/// Needs a single coupling whose system operator is the drive operator.
pub fn induced_field(
    model: &ModelSpec,
    kernel: &BathCorrelation,
    drive: &DriveProtocol,
    f: &Foliation,
    k: usize,
) -> Result<Vec<(f64, ComplexMatrix)>> {
    check_drive(model, drive)?;
    f.check_slice(k)?;
    if model.couplings().len() != 1 || kernel.n_couplings() != 1 {
        return Err(Error::Model("the induced field needs exactly one coupling".into()));
    }
    if (&model.couplings()[0].system - &drive.operator).norm_max() > 1e-12 {
        return Err(Error::Model("the induced field needs the drive operator to equal the coupled system operator".into()));
    }
    let mut sampler = Sampler::new(model, vec![drive.operator.clone()]);
    let d = model.layout().d_sys();
    let mut out = Vec::new();
    for (t1, _) in f.rule_upto(k) {
        let mut acc = ComplexMatrix::zeros(d);
        for (t2, w2) in f.rule_until(t1) {
            if w2 != 0.0 {
                let s = sampler.at(t2)[0].clone();
                acc += &s.scale(kernel.commutator(0, 0, t1, t2) * w2);
            }
        }
        out.push((t1, acc.scale(0.25 * I)));
    }
    Ok(out)
}

/// `i Σ_j w_j ⟨[obs(t_k), O(t_j)] ∘ (a(t_j) + 4 δÂ(t_j))⟩₀`.
pub fn polarization_response(
    model: &ModelSpec,
    kernel: &BathCorrelation,
    drive: &DriveProtocol,
    observable: &ComplexMatrix,
    f: &Foliation,
    k: usize,
) -> Result<C64> {
    check_observable(model, observable)?;
    let field = induced_field(model, kernel, drive, f, k)?;
    let rho0 = model.rho0_sys();
    let obs_k = model.system_operator_at(observable, f.time(k));
    let d = model.layout().d_sys();
    let mut sum = C64::new(0.0, 0.0);
    for ((t, w), (_, da)) in f.rule_upto(k).into_iter().zip(&field) {
        let x = obs_k.commutator(&model.system_operator_at(&drive.operator, t));
        let total_field = &ComplexMatrix::identity(d).scale_real(drive.field(t)) + &da.scale_real(4.0);
        sum += x.anticommutator(&total_field).expectation(rho0) * (0.5 * w);
    }
    Ok(sum * I)
}
