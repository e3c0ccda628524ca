// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference dynamics.
//!
//! The joint state is evolved in the lab frame with the exact step
//! unitaries `e^{−iHΔt}` of the time-independent total Hamiltonian and then
//! rotated into the model's picture, so the reference carries no
//! time-discretization error.

use crate::error::{Error, Result};
use crate::foliation::Foliation;
use crate::hs::{kron, partial_trace, ComplexMatrix, Subsystem, C64};
use crate::models::{FreeEvolution, ModelSpec, Picture};

/// Reduced states on the slices of a foliation.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Joint states on every slice, in the model's picture.
pub fn exact_joint_series(model: &ModelSpec, f: &Foliation) -> Result<Vec<ComplexMatrix>> {
    let h = model.lab_hamiltonian();
    let mut rho = lab_initial_state(model, f.t0());
    let mut out = Vec::with_capacity(f.len());
    out.push(to_picture(model, &rho, f.t0()));
    let full = FreeEvolution::new(&h);
    for k in 0..f.n_intervals() {
        let u = full.unitary(f.step(k));
        rho = u.matmul(&rho).matmul(&u.dagger());
        rho = (&rho + &rho.dagger()).scale_real(0.5);
        out.push(to_picture(model, &rho, f.time(k + 1)));
    }
    Ok(out)
}

/// Like [`exact_joint_series`] at one slice, through a single exponential
/// `expm(−iH(t_k − t₀))` instead of stepping.
pub fn exact_joint_single(model: &ModelSpec, f: &Foliation, k: usize) -> Result<ComplexMatrix> {
    f.check_slice(k)?;
    let rho0 = lab_initial_state(model, f.t0());
    let u = model.lab_hamiltonian().scale(C64::new(0.0, -(f.time(k) - f.t0()))).expm();
    Ok(to_picture(model, &u.matmul(&rho0).matmul(&u.dagger()), f.time(k)))
}

/// `ρ_exact(t_k) = tr_B(𝒰(t_k, t₀) ρ₀ ⊗ ρ_B)`.
pub fn exact_reduced(model: &ModelSpec, f: &Foliation, k: usize) -> Result<ComplexMatrix> {
    f.check_slice(k)?;
    let sub = Foliation::from_times(f.times()[..=k.max(1)].to_vec())?;
    let joint = exact_joint_series(model, &sub)?;
    reduce(model, &joint[k])
}

/// [`exact_reduced`] on every slice.
pub fn exact_reduced_series(model: &ModelSpec, f: &Foliation) -> Result<TimeSeries> {
    let joint = exact_joint_series(model, f)?;
    let states = joint.iter().map(|j| reduce(model, j)).collect::<Result<_>>()?;
    Ok(TimeSeries { times: f.times().to_vec(), states })
}

fn reduce(model: &ModelSpec, joint: &ComplexMatrix) -> Result<ComplexMatrix> {
    partial_trace(joint, model.layout(), Subsystem::System)
}

// The initial state is given in the model's picture at t₀.
fn lab_initial_state(model: &ModelSpec, t0: f64) -> ComplexMatrix {
    from_picture(model, &model.initial_joint_state(), t0)
}

fn free_unitary(model: &ModelSpec, t: f64) -> ComplexMatrix {
    kron(&model.free_system().unitary(t), &model.free_bath().unitary(t))
}

fn to_picture(model: &ModelSpec, rho_lab: &ComplexMatrix, t: f64) -> ComplexMatrix {
    match model.picture() {
        Picture::Lab => rho_lab.clone(),
        Picture::Interaction => {
            let u0 = free_unitary(model, t);
            u0.dagger().matmul(rho_lab).matmul(&u0)
        }
    }
}

fn from_picture(model: &ModelSpec, rho: &ComplexMatrix, t: f64) -> ComplexMatrix {
    match model.picture() {
        Picture::Lab => rho.clone(),
        Picture::Interaction => {
            let u0 = free_unitary(model, t);
            u0.matmul(rho).matmul(&u0.dagger())
        }
    }
}

/// Evolves `rho` under a time-dependent Hamiltonian with `substeps`
/// midpoint unitaries per interval, returning the state on every slice.
pub fn evolve_hamiltonian(
    h: impl Fn(f64) -> ComplexMatrix,
    rho: &ComplexMatrix,
    f: &Foliation,
    substeps: usize,
) -> Result<Vec<ComplexMatrix>> {
    if substeps == 0 {
        return Err(Error::Grid("need at least one substep".into()));
    }
    let mut rho = rho.clone();
    let mut out = Vec::with_capacity(f.len());
    out.push(rho.clone());
    for k in 0..f.n_intervals() {
        let dt = f.step(k) / substeps as f64;
        for s in 0..substeps {
            let t = f.time(k) + (s as f64 + 0.5) * dt;
            let hm = h(t);
            hm.ensure_hermitian()?;
            let u = hm.scale(C64::new(0.0, -dt)).expm();
            rho = u.matmul(&rho).matmul(&u.dagger());
        }
        rho = (&rho + &rho.dagger()).scale_real(0.5);
        out.push(rho.clone());
    }
    Ok(out)
}

/// Reduced dynamics of `model` with an extra system Hamiltonian `drive(t)`
/// given in the model's picture.
pub fn driven_reduced_series(
    model: &ModelSpec,
    drive: impl Fn(f64) -> ComplexMatrix,
    f: &Foliation,
    substeps: usize,
) -> Result<TimeSeries> {
    let ib = ComplexMatrix::identity(model.layout().d_bath());
    let h = |t: f64| {
        let d = drive(t);
        let sym = (&d + &d.dagger()).scale_real(0.5);
        &model.generator_hamiltonian(t) + &kron(&sym, &ib)
    };
    let joint = evolve_hamiltonian(h, &model.initial_joint_state(), f, substeps)?;
    let states = joint.iter().map(|j| reduce(model, j)).collect::<Result<_>>()?;
    Ok(TimeSeries { times: f.times().to_vec(), states })
}

/// Interaction-picture coherence factor of a qubit `(ω_s/2)σ_z` whose `σ_z`
/// couples with strength `g` to `x = a + a†` of a mode `ω a†a` in vacuum:
/// `ρ₀₁(t) = ρ₀₁(0) exp(−8 (g/ω)² sin²(ω t / 2))`.
pub fn decoherence_factor(g: f64, omega: f64, t: f64) -> f64 {
    let s = (0.5 * omega * t).sin();
    (-8.0 * (g / omega).powi(2) * s * s).exp()
}

/// Closed-form interaction-picture dynamics of the pure-dephasing qubit.
/// Populations are constant and the coherence decays with
/// [`decoherence_factor`].
pub fn dephasing_reference(g: f64, omega: f64, f: &Foliation, rho0: &ComplexMatrix) -> Result<TimeSeries> {
    if rho0.dim() != 2 {
        return Err(Error::Model(format!("dephasing reference needs a qubit state, got dimension {}", rho0.dim())));
    }
    if !(omega.is_finite() && omega > 0.0 && g.is_finite()) {
        return Err(Error::Model("dephasing reference needs finite g and omega > 0".into()));
    }
    rho0.validate_density()?;
    let states = f
        .times()
        .iter()
        .map(|&t| {
            let c = decoherence_factor(g, omega, t - f.t0());
            let mut rho = rho0.clone();
            rho[(0, 1)] = rho0[(0, 1)] * c;
            rho[(1, 0)] = rho0[(1, 0)] * c;
            rho
        })
        .collect();
    Ok(TimeSeries { times: f.times().to_vec(), states })
}

/// [`dephasing_reference`] for a model, after checking that it is the
/// single-mode dephasing model (system `σ_z` coupling, vacuum bath,
/// interaction picture) and reading `g`, `ω` from it.
pub fn dephasing_reference_for(model: &ModelSpec, f: &Foliation) -> Result<TimeSeries> {
    let (g, omega) = dephasing_parameters(model)?;
    dephasing_reference(g, omega, f, model.rho0_sys())
}

fn dephasing_parameters(model: &ModelSpec) -> Result<(f64, f64)> {
    let shape = |what: &str| Error::Model(format!("not a single-mode dephasing model: {what}"));
    if model.picture() != Picture::Interaction {
        return Err(shape("reference is given in the interaction picture"));
    }
    let layout = model.layout();
    if layout.d_sys() != 2 || model.couplings().len() != 1 {
        return Err(shape("need a qubit with one coupling"));
    }
    let n = layout.d_bath();
    let c = &model.couplings()[0];
    if (&c.system - &crate::hs::pauli::z()).norm_max() > 1e-12 {
        return Err(shape("system coupling operator must be sigma_z"));
    }
    if (&c.bath - &crate::models::boson::position(n)).norm_max() > 1e-12 {
        return Err(shape("bath coupling operator must be a + a^dagger"));
    }
    if (model.rho_bath() - &crate::models::boson::vacuum(n)).norm_max() > 1e-12 {
        return Err(shape("bath must start in the vacuum"));
    }
    if model.h_sys().commutator(&c.system).norm_max() > 1e-12 {
        return Err(shape("system Hamiltonian must commute with the coupling"));
    }
    let omega = model.h_bath()[(1, 1)].re;
    if (model.h_bath() - &crate::models::boson::number(n).scale_real(omega)).norm_max() > 1e-12 || omega <= 0.0 {
        return Err(shape("bath Hamiltonian must be omega a^dagger a"));
    }
    Ok((c.strength, omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn factor_limits() {
        assert_eq!(decoherence_factor(0.2, 1.0, 0.0), 1.0);
        assert_eq!(decoherence_factor(0.0, 1.0, 3.0), 1.0);
        // Full revival after one bath period.
        assert!((decoherence_factor(0.2, 1.0, std::f64::consts::TAU) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let f = Foliation::flat(0.0, 1.0, 4).unwrap();
        let m = models::qubit_boson(1.0, 0.2, 4).unwrap();
        assert!(matches!(dephasing_reference_for(&m, &f), Err(Error::Model(_))));
        assert!(matches!(
            dephasing_reference(0.2, 1.0, &f, &ComplexMatrix::identity(3).scale_real(1.0 / 3.0)),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn reference_reads_model_parameters() {
        let f = Foliation::flat(0.0, 3.0, 6).unwrap();
        let m = models::dephasing(1.3, 0.15, 5).unwrap();
        let a = dephasing_reference_for(&m, &f).unwrap();
        let b = dephasing_reference(0.15, 1.3, &f, m.rho0_sys()).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x, y);
        }
    }
}
