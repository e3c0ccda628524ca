// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! System-environment models.
//!
//! A [`ModelSpec`] is `H = H_S ⊗ 1 + 1 ⊗ H_B + Σ_i λ_i S_i ⊗ B_i` together
//! with a bath reference state `ρ_B` and an initial system state `ρ₀`. The
//! joint initial state is always the product `ρ₀ ⊗ ρ_B`.
//!
//! In the interaction picture the generator of the dynamics is
//! `H_int(t) = Σ_i λ_i S_i(t) ⊗ B_i(t)` with `X(t) = e^{iH₀t} X e^{−iH₀t}`;
//! in the lab picture it is the full time-independent `H`.

use crate::error::{Error, Result};
use crate::hs::{kron, pauli, ComplexMatrix, SpaceLayout, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Picture {
    #[default]
    Interaction,
    Lab,
}

/// One bilinear coupling term `λ S ⊗ B`.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub system: ComplexMatrix,
    pub bath: ComplexMatrix,
    pub strength: f64,
}

/// `e^{iHt} X e^{−iHt}` for a fixed Hermitian `H`, through its
/// eigendecomposition.
#[derive(Clone, Debug)]
pub struct FreeEvolution {
    energies: Vec<f64>,
    vectors: ComplexMatrix,
}

impl FreeEvolution {
    pub fn new(h: &ComplexMatrix) -> Self {
        let (energies, vectors) = h.hermitian_eigen();
        Self { energies, vectors }
    }

    /// `e^{−iHt}`.
    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        let phases: Vec<C64> = self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
        self.vectors.matmul(&ComplexMatrix::diag(&phases)).matmul(&self.vectors.dagger())
    }

    /// `e^{iHt} X e^{−iHt}`.
    pub fn heisenberg(&self, x: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let u = self.unitary(t);
        let out = u.dagger().matmul(x).matmul(&u);
        if x.is_hermitian(1e-14) {
            hermitize(&out)
        } else {
            out
        }
    }
}

fn hermitize(x: &ComplexMatrix) -> ComplexMatrix {
    (x + &x.dagger()).scale_real(0.5)
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    name: String,
    layout: SpaceLayout,
    h_sys: ComplexMatrix,
    h_bath: ComplexMatrix,
    couplings: Vec<Coupling>,
    rho_bath: ComplexMatrix,
    rho0_sys: ComplexMatrix,
    picture: Picture,
    bath_truncation: Option<usize>,
    free_sys: FreeEvolution,
    free_bath: FreeEvolution,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        h_sys: ComplexMatrix,
        h_bath: ComplexMatrix,
        couplings: Vec<Coupling>,
        rho_bath: ComplexMatrix,
        rho0_sys: ComplexMatrix,
    ) -> Result<Self> {
        let layout = SpaceLayout::new(h_sys.dim(), h_bath.dim())?;
        h_sys.ensure_hermitian()?;
        h_bath.ensure_hermitian()?;
        for (i, c) in couplings.iter().enumerate() {
            if c.system.dim() != layout.d_sys() {
                return Err(Error::Model(format!("coupling {i}: system operator has wrong dimension")));
            }
            if c.bath.dim() != layout.d_bath() {
                return Err(Error::Model(format!("coupling {i}: bath operator has wrong dimension")));
            }
            if !c.strength.is_finite() {
                return Err(Error::Model(format!("coupling {i}: strength must be finite")));
            }
            c.system.ensure_hermitian()?;
            c.bath.ensure_hermitian()?;
        }
        check_state(&rho_bath, layout.d_bath(), "bath state")?;
        check_state(&rho0_sys, layout.d_sys(), "initial system state")?;
        let free_sys = FreeEvolution::new(&h_sys);
        let free_bath = FreeEvolution::new(&h_bath);
        Ok(Self {
            name: name.into(),
            layout,
            h_sys,
            h_bath,
            couplings,
            rho_bath,
            rho0_sys,
            picture: Picture::Interaction,
            bath_truncation: None,
            free_sys,
            free_bath,
        })
    }

    pub fn with_picture(mut self, picture: Picture) -> Self {
        self.picture = picture;
        self
    }

    pub fn with_initial_state(mut self, rho0: ComplexMatrix) -> Result<Self> {
        check_state(&rho0, self.layout.d_sys(), "initial system state")?;
        self.rho0_sys = rho0;
        Ok(self)
    }

    pub fn with_bath_state(mut self, rho_bath: ComplexMatrix) -> Result<Self> {
        check_state(&rho_bath, self.layout.d_bath(), "bath state")?;
        self.rho_bath = rho_bath;
        Ok(self)
    }

    /// Sets every coupling strength to `lambda`.
    pub fn with_strength(mut self, lambda: f64) -> Self {
        for c in &mut self.couplings {
            c.strength = lambda;
        }
        self
    }

    /// Marks the bath as a truncated oscillator with `levels` levels, so the
    /// top-level population is reported as a leakage diagnostic.
    pub fn with_truncation(mut self, levels: usize) -> Self {
        self.bath_truncation = Some(levels);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    pub fn h_sys(&self) -> &ComplexMatrix {
        &self.h_sys
    }

    pub fn h_bath(&self) -> &ComplexMatrix {
        &self.h_bath
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn rho_bath(&self) -> &ComplexMatrix {
        &self.rho_bath
    }

    pub fn rho0_sys(&self) -> &ComplexMatrix {
        &self.rho0_sys
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn bath_truncation(&self) -> Option<usize> {
        self.bath_truncation
    }

    pub fn free_system(&self) -> &FreeEvolution {
        &self.free_sys
    }

    pub fn free_bath(&self) -> &FreeEvolution {
        &self.free_bath
    }

    /// `H₀ = H_S ⊗ 1 + 1 ⊗ H_B`.
    pub fn free_hamiltonian(&self) -> ComplexMatrix {
        let is = ComplexMatrix::identity(self.layout.d_sys());
        let ib = ComplexMatrix::identity(self.layout.d_bath());
        &kron(&self.h_sys, &ib) + &kron(&is, &self.h_bath)
    }

    /// `Σ_i λ_i S_i ⊗ B_i` (Schrödinger picture).
    pub fn coupling_hamiltonian(&self) -> ComplexMatrix {
        let d = self.layout.joint_dim();
        self.couplings.iter().fold(ComplexMatrix::zeros(d), |acc, c| {
            &acc + &kron(&c.system, &c.bath).scale_real(c.strength)
        })
    }

    /// Full lab-frame Hamiltonian `H₀ + Σ λ S ⊗ B`.
    pub fn lab_hamiltonian(&self) -> ComplexMatrix {
        &self.free_hamiltonian() + &self.coupling_hamiltonian()
    }

    /// The Hamiltonian whose commutator generates the joint dynamics in this
    /// model's picture.
    pub fn generator_hamiltonian(&self, t: f64) -> ComplexMatrix {
        match self.picture {
            Picture::Interaction => self.interaction_hamiltonian(t),
            Picture::Lab => self.lab_hamiltonian(),
        }
    }

    pub(crate) fn interaction_hamiltonian(&self, t: f64) -> ComplexMatrix {
        let d = self.layout.joint_dim();
        let h = self.couplings.iter().fold(ComplexMatrix::zeros(d), |acc, c| {
            let s = self.free_sys.heisenberg(&c.system, t);
            let b = self.free_bath.heisenberg(&c.bath, t);
            &acc + &kron(&s, &b).scale_real(c.strength)
        });
        hermitize(&h)
    }

    /// System operator in the interaction picture.
    pub fn system_operator_at(&self, x: &ComplexMatrix, t: f64) -> ComplexMatrix {
        self.free_sys.heisenberg(x, t)
    }

    pub fn bath_operator_at(&self, x: &ComplexMatrix, t: f64) -> ComplexMatrix {
        self.free_bath.heisenberg(x, t)
    }

    /// `ρ₀ ⊗ ρ_B`.
    pub fn initial_joint_state(&self) -> ComplexMatrix {
        kron(&self.rho0_sys, &self.rho_bath)
    }

    /// Population of the highest retained bath level in a joint state, when
    /// the bath is a truncated oscillator.
    pub fn leakage(&self, joint: &ComplexMatrix) -> Option<f64> {
        let levels = self.bath_truncation?;
        let bath = crate::hs::partial_trace(joint, self.layout, crate::hs::Subsystem::Bath).ok()?;
        Some(bath[(levels - 1, levels - 1)].re)
    }
}

fn check_state(rho: &ComplexMatrix, dim: usize, what: &str) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::Model(format!("{what} has dimension {}, expected {dim}", rho.dim())));
    }
    rho.validate_density()
        .map_err(|e| Error::StateValidation(format!("{what}: {e}")))
}

/// `H_int(t)` for an interaction-picture model.
pub fn interaction_picture_hint(model: &ModelSpec, t: f64) -> Result<ComplexMatrix> {
    if model.picture != Picture::Interaction {
        return Err(Error::Model("model is not in the interaction picture".into()));
    }
    Ok(model.interaction_hamiltonian(t))
}

/// `e^{−βH}/tr e^{−βH}`. `beta = ∞` gives the normalized projector onto the
/// ground space (maximally mixed over degenerate ground states).
pub fn thermal_state(h: &ComplexMatrix, beta: f64) -> Result<ComplexMatrix> {
    h.ensure_hermitian()?;
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Model(format!("inverse temperature must be >= 0, got {beta}")));
    }
    let (energies, _) = h.hermitian_eigen();
    let e_min = energies[0];
    let rho = if beta.is_infinite() {
        let tol = 1e-10 * e_min.abs().max(1.0);
        h.hermitian_function(|e| C64::new(if e - e_min <= tol { 1.0 } else { 0.0 }, 0.0))
    } else {
        h.hermitian_function(|e| C64::new((-beta * (e - e_min)).exp(), 0.0))
    };
    let tr = rho.trace().re;
    Ok(hermitize(&rho.scale_real(1.0 / tr)))
}

/// Truncated oscillator operators.
pub mod boson {
    use crate::hs::{ComplexMatrix, C64};

    pub fn annihilation(levels: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(levels, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn creation(levels: usize) -> ComplexMatrix {
        annihilation(levels).dagger()
    }

    pub fn number(levels: usize) -> ComplexMatrix {
        let n: Vec<f64> = (0..levels).map(|k| k as f64).collect();
        ComplexMatrix::real_diag(&n)
    }

    /// `a + a†`.
    pub fn position(levels: usize) -> ComplexMatrix {
        let a = annihilation(levels);
        &a + &a.dagger()
    }

    pub fn vacuum(levels: usize) -> ComplexMatrix {
        ComplexMatrix::unit(levels, 0, 0)
    }
}

/// `|+⟩⟨+|`, the default initial system state of the builders.
pub fn plus_state() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])
}

fn check_builder(omega: f64, g: f64, n_trunc: Option<usize>) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Model(format!("omega must be positive, got {omega}")));
    }
    if !g.is_finite() {
        return Err(Error::Model(format!("coupling g must be finite, got {g}")));
    }
    if let Some(n) = n_trunc {
        if n < 2 {
            return Err(Error::Model(format!("oscillator truncation must be >= 2, got {n}")));
        }
    }
    Ok(())
}

/// Qubit `(ω/2)σ_z` coupled through `σ_x ⊗ (a + a†)` to an oscillator `ω a†a`
/// in its vacuum.
pub fn qubit_boson(omega: f64, g: f64, n_trunc: usize) -> Result<ModelSpec> {
    check_builder(omega, g, Some(n_trunc))?;
    oscillator_model("qubit_boson", omega, g, n_trunc, pauli::x())
}

/// Pure dephasing: `σ_z ⊗ (a + a†)` coupling, which commutes with `H_S`.
pub fn dephasing(omega: f64, g: f64, n_trunc: usize) -> Result<ModelSpec> {
    check_builder(omega, g, Some(n_trunc))?;
    oscillator_model("dephasing", omega, g, n_trunc, pauli::z())
}

fn oscillator_model(name: &str, omega: f64, g: f64, n: usize, s: ComplexMatrix) -> Result<ModelSpec> {
    let coupling = Coupling { system: s, bath: boson::position(n), strength: g };
    Ok(ModelSpec::new(
        name,
        pauli::z().scale_real(0.5 * omega),
        boson::number(n).scale_real(omega),
        vec![coupling],
        boson::vacuum(n),
        plus_state(),
    )?
    .with_truncation(n))
}

/// Two resonant qubits `(ω/2)σ_z` coupled by `g σ_x ⊗ σ_x`, bath qubit in
/// its ground state.
pub fn two_qubit_exchange(omega: f64, g: f64) -> Result<ModelSpec> {
    check_builder(omega, g, None)?;
    let h = pauli::z().scale_real(0.5 * omega);
    let ground = ComplexMatrix::unit(2, 1, 1);
    let coupling = Coupling { system: pauli::x(), bath: pauli::x(), strength: g };
    ModelSpec::new("two_qubit_exchange", h.clone(), h, vec![coupling], ground, plus_state())
}

/// A qubit `(ω/2)σ_z` with a one-dimensional environment and no coupling;
/// the carrier for drive-only experiments.
pub fn isolated_qubit(omega: f64) -> Result<ModelSpec> {
    check_builder(omega, 0.0, None)?;
    let one = ComplexMatrix::identity(1);
    ModelSpec::new(
        "isolated_qubit",
        pauli::z().scale_real(0.5 * omega),
        ComplexMatrix::zeros(1),
        Vec::new(),
        one,
        plus_state(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hs::I;

    #[test]
    fn builders_satisfy_model_invariants() {
        let models = [
            qubit_boson(1.0, 0.1, 6).unwrap(),
            dephasing(1.0, 0.2, 6).unwrap(),
            two_qubit_exchange(1.0, 0.1).unwrap(),
            isolated_qubit(1.0).unwrap(),
        ];
        for m in &models {
            m.h_sys().ensure_hermitian().unwrap();
            m.h_bath().ensure_hermitian().unwrap();
            m.rho_bath().validate_density().unwrap();
            m.rho0_sys().validate_density().unwrap();
            assert_eq!(m.initial_joint_state().dim(), m.layout().joint_dim());
        }
    }

    #[test]
    fn builder_parameter_validation() {
        assert!(matches!(qubit_boson(1.0, 0.1, 1), Err(Error::Model(_))));
        assert!(matches!(dephasing(0.0, 0.1, 4), Err(Error::Model(_))));
        assert!(matches!(two_qubit_exchange(-1.0, 0.1), Err(Error::Model(_))));
    }

    #[test]
    fn dephasing_coupling_commutes_with_system_hamiltonian() {
        let m = dephasing(1.3, 0.2, 5).unwrap();
        let c = &m.couplings()[0];
        assert_eq!(m.h_sys().commutator(&c.system).norm_max(), 0.0);
    }

    #[test]
    fn truncated_number_operator_spectrum() {
        let omega = 0.7;
        let m = qubit_boson(omega, 0.1, 6).unwrap();
        let ev = m.h_bath().eigenvalues_hermitian();
        for (k, e) in ev.iter().enumerate() {
            assert!((e - k as f64 * omega).abs() < 1e-14);
        }
    }

    #[test]
    fn rotating_part_conserves_excitations() {
        let n = 6;
        let (omega, g) = (1.0, 0.1);
        let m = qubit_boson(omega, g, n).unwrap();
        let a = boson::annihilation(n);
        let is = ComplexMatrix::identity(2);
        let ib = ComplexMatrix::identity(n);
        let excitations = &kron(&pauli::raising().matmul(&pauli::lowering()), &ib)
            + &kron(&is, &boson::number(n));
        let rotating = &kron(&pauli::raising(), &a) + &kron(&pauli::lowering(), &a.dagger());
        let h_rwa = &m.free_hamiltonian() + &rotating.scale_real(g);
        assert!(h_rwa.commutator(&excitations).norm_max() < 1e-10);
        // σ_x(a + a†) = rotating + counter-rotating; only the latter breaks it.
        let counter = &kron(&pauli::raising(), &a.dagger()) + &kron(&pauli::lowering(), &a);
        let full = &rotating + &counter;
        assert!((&full - &kron(&pauli::x(), &boson::position(n))).norm_max() < 1e-15);
        assert!(m.lab_hamiltonian().commutator(&excitations).norm_max() > 0.05);
    }

    #[test]
    fn interaction_hamiltonian_at_zero_is_bare_coupling() {
        let m = qubit_boson(1.0, 0.3, 4).unwrap();
        let h0 = interaction_picture_hint(&m, 0.0).unwrap();
        assert!((&h0 - &m.coupling_hamiltonian()).norm_max() < 1e-14);
    }

    #[test]
    fn interaction_hamiltonian_matches_joint_frame_rotation() {
        let m = qubit_boson(0.9, 0.3, 4).unwrap();
        let h0 = m.free_hamiltonian();
        for &t in &[0.3, 1.7, 5.0] {
            let u = h0.scale(I * (-t)).expm();
            let direct = u.dagger().matmul(&m.coupling_hamiltonian()).matmul(&u);
            let via_factors = interaction_picture_hint(&m, t).unwrap();
            assert!((&direct - &via_factors).norm_max() < 1e-12);
        }
    }

    #[test]
    fn interaction_hamiltonian_constant_when_commuting() {
        // σ_z ⊗ σ_z commutes with the free two-qubit Hamiltonian.
        let h = pauli::z().scale_real(0.5);
        let c = Coupling { system: pauli::z(), bath: pauli::z(), strength: 0.4 };
        let m = ModelSpec::new("zz", h.clone(), h, vec![c], ComplexMatrix::unit(2, 1, 1), plus_state()).unwrap();
        let h0 = interaction_picture_hint(&m, 0.0).unwrap();
        for &t in &[0.5, 2.0, 11.0] {
            assert!((&interaction_picture_hint(&m, t).unwrap() - &h0).norm_max() < 1e-14);
        }
    }

    #[test]
    fn interaction_hamiltonian_is_hermitian_and_norm_preserving() {
        let m = dephasing(1.0, 0.2, 6).unwrap();
        let n0 = interaction_picture_hint(&m, 0.0).unwrap().norm_2();
        for k in 0..20 {
            let h = interaction_picture_hint(&m, 0.37 * k as f64).unwrap();
            h.ensure_hermitian().unwrap();
            assert!((h.norm_2() - n0).abs() < 1e-10);
        }
    }

    #[test]
    fn interaction_picture_required() {
        let m = two_qubit_exchange(1.0, 0.1).unwrap().with_picture(Picture::Lab);
        assert!(interaction_picture_hint(&m, 0.0).is_err());
    }

    #[test]
    fn thermal_state_limits() {
        let h = ComplexMatrix::real_diag(&[0.0, 1.0, 2.5]);
        let hot = thermal_state(&h, 0.0).unwrap();
        assert!((&hot - &ComplexMatrix::identity(3).scale_real(1.0 / 3.0)).norm_max() < 1e-15);
        let cold = thermal_state(&h, f64::INFINITY).unwrap();
        assert!((&cold - &ComplexMatrix::unit(3, 0, 0)).norm_max() < 1e-15);
        let degenerate = thermal_state(&ComplexMatrix::real_diag(&[1.0, 1.0, 3.0]), f64::INFINITY).unwrap();
        assert!((&degenerate - &ComplexMatrix::real_diag(&[0.5, 0.5, 0.0])).norm_max() < 1e-15);
        assert!(thermal_state(&h, -1.0).is_err());
    }

    #[test]
    fn thermal_state_two_level_populations() {
        let rho = thermal_state(&ComplexMatrix::real_diag(&[0.0, 1.0]), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((rho[(0, 0)].re - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((rho[(1, 1)].re - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn invalid_states_are_rejected() {
        let m = two_qubit_exchange(1.0, 0.1).unwrap();
        assert!(m.clone().with_initial_state(ComplexMatrix::real_diag(&[1.0, 1.0])).is_err());
        assert!(m.with_bath_state(ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn leakage_reports_top_level() {
        let m = dephasing(1.0, 0.2, 3).unwrap();
        let mut bath = ComplexMatrix::real_diag(&[0.9, 0.0, 0.1]);
        bath[(0, 2)] = C64::new(0.0, 0.0);
        let joint = kron(m.rho0_sys(), &bath);
        assert!((m.leakage(&joint).unwrap() - 0.1).abs() < 1e-15);
        assert!(two_qubit_exchange(1.0, 0.1).unwrap().leakage(&ComplexMatrix::identity(4)).is_none());
    }
}
