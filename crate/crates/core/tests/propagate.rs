// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{log_slope, random_state};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcl_dynamics::foliation::{Foliation, Quadrature};
use tcl_dynamics::hs::{
    kron, liouvillian, pauli, projector_p, projector_q, trace_norm, ComplexMatrix, SpaceLayout, SuperOp, C64,
};
use tcl_dynamics::models::{self, Coupling, ModelSpec, Picture};
use tcl_dynamics::oracle;
use tcl_dynamics::propagate::{
    g_retarded, ordered_exp, projected_propagator_h, quantum_operation, reduced_dm, theta, u_system, w_operator,
    Generator, HamiltonianFn, ModelGenerator, Ordering, Sign, TclSolver, Zero,
};
use tcl_dynamics::{BreakdownOperator, Error};

fn exchange(g: f64) -> ModelSpec {
    models::two_qubit_exchange(1.0, g).unwrap()
}

fn dist(a: &SuperOp, b: &SuperOp) -> f64 {
    (a.matrix() - b.matrix()).norm_max()
}

#[test]
fn zero_generator_gives_identity_tables() {
    let f = Foliation::flat(0.0, 1.0, 5).unwrap();
    for (sign, ord) in [(Sign::Minus, Ordering::Time), (Sign::Plus, Ordering::AntiTime)] {
        let t = ordered_exp(&Zero(3), &f, sign, ord).unwrap();
        for a in 0..=5 {
            for b in a..=5 {
                assert_eq!(dist(&t.between(a, b).unwrap(), &SuperOp::identity(3)), 0.0);
            }
        }
    }
}

#[test]
fn time_independent_table_is_a_single_exponential() {
    let m = exchange(0.3).with_picture(Picture::Lab);
    let f = Foliation::flat(0.0, 2.0, 40).unwrap();
    let gen = ModelGenerator::new(&m);
    let l = liouvillian(&m.lab_hamiltonian()).unwrap();
    let t = ordered_exp(&gen, &f, Sign::Minus, Ordering::Time).unwrap();
    let single = l.scale(C64::new(0.0, -2.0)).expm();
    assert!(dist(&t.total().unwrap(), &single) < 1e-10);
}

#[test]
fn time_dependent_table_converges_at_second_order() {
    let m = exchange(0.3);
    let gen = ModelGenerator::new(&m);
    let fine = ordered_exp(&gen, &Foliation::flat(0.0, 2.0, 1600).unwrap(), Sign::Minus, Ordering::Time)
        .unwrap()
        .total()
        .unwrap();
    let errs: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| {
            let t = ordered_exp(&gen, &Foliation::flat(0.0, 2.0, n).unwrap(), Sign::Minus, Ordering::Time).unwrap();
            dist(&t.total().unwrap(), &fine)
        })
        .collect();
    let slope = log_slope(&[25.0, 50.0, 100.0], &errs);
    assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn anti_time_ordered_plus_inverts_time_ordered_minus() {
    let m = models::qubit_boson(1.0, 0.4, 3).unwrap();
    let f = Foliation::flat(0.0, 3.0, 30).unwrap();
    let gen = ModelGenerator::new(&m);
    let fwd = ordered_exp(&gen, &f, Sign::Minus, Ordering::Time).unwrap();
    let back = ordered_exp(&gen, &f, Sign::Plus, Ordering::AntiTime).unwrap();
    let id = SuperOp::identity(6);
    for (a, b) in [(0, 30), (3, 17), (12, 13), (8, 8)] {
        let prod = fwd.between(a, b).unwrap().compose(&back.between(a, b).unwrap());
        assert!(dist(&prod, &id) < 1e-10);
        let prod = back.between(a, b).unwrap().compose(&fwd.between(a, b).unwrap());
        assert!(dist(&prod, &id) < 1e-10);
    }
}

#[test]
fn tables_compose_in_their_ordering() {
    let m = exchange(0.5);
    let f = Foliation::flat(0.0, 4.0, 24).unwrap();
    let gen = ModelGenerator::new(&m);
    let fwd = ordered_exp(&gen, &f, Sign::Minus, Ordering::Time).unwrap();
    let back = ordered_exp(&gen, &f, Sign::Plus, Ordering::AntiTime).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mut abc = [rng.random_range(0..=24), rng.random_range(0..=24), rng.random_range(0..=24)];
        abc.sort();
        let [a, b, c] = abc;
        let lhs = fwd.between(a, c).unwrap();
        let rhs = fwd.between(b, c).unwrap().compose(&fwd.between(a, b).unwrap());
        assert!(dist(&lhs, &rhs) < 1e-10);
        let lhs = back.between(a, c).unwrap();
        let rhs = back.between(a, b).unwrap().compose(&back.between(b, c).unwrap());
        assert!(dist(&lhs, &rhs) < 1e-10);
    }
    assert!(matches!(fwd.between(5, 2), Err(Error::Grid(_))));
}

#[test]
fn bad_foliation_for_ordered_exp() {
    assert!(Foliation::flat(0.0, 1.0, 0).is_err());
    let f = Foliation::flat(0.0, 1.0, 2).unwrap();
    let t = ordered_exp(&Zero(2), &f, Sign::Minus, Ordering::Time).unwrap();
    assert_eq!(t.n_steps(), 2);
}

#[test]
fn retarded_propagator_trivial_cases() {
    let f = Foliation::flat(0.0, 2.0, 10).unwrap();
    let m = exchange(0.2);
    let gen = ModelGenerator::new(&m);
    assert_eq!(dist(&g_retarded(&gen, &f, 4, 4).unwrap(), &SuperOp::identity(4)), 0.0);
    assert!(matches!(g_retarded(&gen, &f, 3, 4), Err(Error::Grid(_))));
    let free = exchange(0.0);
    let gen0 = ModelGenerator::new(&free);
    for (k, j) in [(10, 0), (7, 2)] {
        assert!(g_retarded(&gen0, &f, k, j).unwrap().distance_to_identity() < 1e-14);
    }
}

#[test]
fn retarded_propagator_returns_joint_state_to_start() {
    let m = models::qubit_boson(1.0, 0.3, 3).unwrap();
    let f = Foliation::flat(0.0, 2.0, 40).unwrap();
    let gen = ModelGenerator::new(&m);
    let fwd = ordered_exp(&gen, &f, Sign::Minus, Ordering::Time).unwrap();
    let rho0 = m.initial_joint_state();
    for k in [1, 17, 40] {
        let rho_k = fwd.between(0, k).unwrap().apply(&rho0).unwrap();
        let back = g_retarded(&gen, &f, k, 0).unwrap().apply(&rho_k).unwrap();
        assert!((&back - &rho0).norm_max() < 1e-8);
    }
    let solver = TclSolver::for_model(&m, &f).unwrap();
    let prod = solver.forward(23, 5).unwrap().compose(&solver.g_retarded(23, 5).unwrap());
    assert!(prod.distance_to_identity() < 1e-10);
}

/// `h ⊗ 1` with a one-dimensional environment, where `𝒬 = 0`.
fn confined_model(h: ComplexMatrix) -> ModelSpec {
    ModelSpec::new("confined", h, ComplexMatrix::zeros(1), vec![], ComplexMatrix::identity(1), models::plus_state())
        .unwrap()
}

#[test]
fn projected_propagator_is_identity_when_qlq_vanishes() {
    let m = confined_model(pauli::x().scale_real(0.7));
    let f = Foliation::flat(0.0, 3.0, 12).unwrap();
    let q = projector_q(m.rho_bath(), m.layout()).unwrap();
    let l = ModelGenerator::new(&m).at(1.3).unwrap();
    assert!(q.compose(&l).compose(&q).matrix().norm_max() <= 1e-12);
    assert!(projected_propagator_h(&m, &f, 12, 0).unwrap().distance_to_identity() < 1e-14);
    assert_eq!(dist(&projected_propagator_h(&m, &f, 5, 5).unwrap(), &SuperOp::identity(2)), 0.0);
}

#[test]
fn system_only_liouvillian_commutes_with_projectors() {
    // A pure system Hamiltonian commutes with 𝒫, so 𝒬𝓛𝒬 = 𝓛𝒬, which is
    // nonzero as soon as the environment has more than one level.
    let layout = SpaceLayout::new(2, 3).unwrap();
    let rho_b = models::thermal_state(&ComplexMatrix::real_diag(&[0.0, 0.4, 1.1]), 1.0).unwrap();
    let p = projector_p(&rho_b, layout).unwrap();
    let q = projector_q(&rho_b, layout).unwrap();
    let l = liouvillian(&kron(&pauli::y(), &ComplexMatrix::identity(3))).unwrap();
    assert!(dist(&p.compose(&l), &l.compose(&p)) < 1e-14);
    assert!(dist(&q.compose(&l).compose(&q), &l.compose(&q)) < 1e-14);
    assert!(q.compose(&l).compose(&q).norm() > 0.5);
}

#[test]
fn projected_propagator_semigroup() {
    let m = models::qubit_boson(1.0, 0.4, 3).unwrap();
    let f = Foliation::flat(0.0, 2.0, 16).unwrap();
    let s = TclSolver::for_model(&m, &f).unwrap();
    for (k, mid, j) in [(16, 9, 0), (11, 11, 3), (7, 2, 2)] {
        let lhs = s.projected_h(k, j).unwrap();
        let rhs = s.projected_h(k, mid).unwrap().compose(&s.projected_h(mid, j).unwrap());
        assert!(dist(&lhs, &rhs) < 1e-10);
    }
    assert!(matches!(s.projected_h(2, 3), Err(Error::Grid(_))));
}

#[test]
fn theta_and_w_trivial_cases() {
    let f = Foliation::flat(0.0, 2.0, 12).unwrap();
    let m = exchange(0.3);
    let (t0, c0) = theta(&m, &f, 0).unwrap();
    assert_eq!(t0.distance_to_identity(), 0.0);
    assert_eq!(c0, 1.0);
    assert_eq!(w_operator(&m, &f, 0).unwrap().0.distance_to_identity(), 0.0);
    let free = exchange(0.0);
    for k in [1, 6, 12] {
        assert!(theta(&free, &f, k).unwrap().0.distance_to_identity() < 1e-14);
        assert!(w_operator(&free, &f, k).unwrap().0.distance_to_identity() < 1e-14);
    }
}

#[test]
fn theta_is_first_order_and_w_second_order_in_coupling() {
    let f = Foliation::flat(0.0, 2.0, 100).unwrap();
    let lambdas = [0.025, 0.05, 0.1];
    let mut th = Vec::new();
    let mut ww = Vec::new();
    for &l in &lambdas {
        let s_model = exchange(l);
        let s = TclSolver::for_model(&s_model, &f).unwrap();
        let mut last = None;
        s.sweep(100, |ops| {
            if ops.slice == 100 {
                last = Some((ops.theta.distance_to_identity(), ops.w_inv.distance_to_identity()));
            }
            Ok(())
        })
        .unwrap();
        let (a, b) = last.unwrap();
        th.push(a);
        ww.push(b);
    }
    let s_theta = log_slope(&lambdas, &th);
    let s_w = log_slope(&lambdas, &ww);
    assert!((s_theta - 1.0).abs() < 0.3, "theta slope {s_theta}");
    assert!((s_w - 2.0).abs() < 0.3, "W slope {s_w}");
}

#[test]
fn sweep_recurrences_match_direct_sums() {
    let m = models::qubit_boson(1.0, 0.5, 2).unwrap();
    let f = Foliation::from_times(vec![0.0, 0.1, 0.35, 0.5, 0.9, 1.2, 1.25, 1.6]).unwrap();
    let s = TclSolver::for_model(&m, &f).unwrap();
    let mut checked = 0;
    s.sweep(7, |ops| {
        let (theta_direct, c) = s.theta(ops.slice)?;
        let (w_direct, _) = s.w_operator(ops.slice)?;
        let (w_inv_direct, _) = w_direct.inverse_with_threshold(1e12)?;
        assert!(dist(ops.theta, &theta_direct) < 1e-12);
        assert!(dist(ops.w_inv, &w_inv_direct) < 1e-12);
        assert!(dist(ops.u_s, &s.u_system(ops.slice, 0)?) < 1e-12);
        assert!((ops.cond_theta - c).abs() < 1e-9 * c);
        checked += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(checked, 8);
}

/// Hides the Hamiltonian so every step goes through superoperator exponentials.
struct Opaque<'a>(ModelGenerator<'a>);

impl Generator for Opaque<'_> {
    fn dim_op(&self) -> usize {
        self.0.dim_op()
    }

    fn at(&self, t: f64) -> tcl_dynamics::Result<SuperOp> {
        self.0.at(t)
    }
}

#[test]
fn sweep_matches_direct_sums_for_mixed_baths_and_opaque_generators() {
    let base = models::qubit_boson(1.0, 0.4, 3).unwrap();
    let rho_b = models::thermal_state(base.h_bath(), 0.7).unwrap();
    let m = base.with_bath_state(rho_b).unwrap();
    let f = Foliation::flat(0.0, 1.5, 9).unwrap();
    let s = TclSolver::new(Box::new(Opaque(ModelGenerator::new(&m))), &f, m.rho_bath(), m.layout()).unwrap();
    let reference = TclSolver::for_model(&m, &f).unwrap();
    let traj = reference.trajectory(m.rho0_sys()).unwrap();
    s.sweep(9, |ops| {
        let (theta_direct, _) = s.theta(ops.slice)?;
        let (w_direct, _) = s.w_operator(ops.slice)?;
        assert!(dist(ops.theta, &theta_direct) < 1e-12);
        assert!(dist(&ops.w_inv.compose(&w_direct), &SuperOp::identity(6)) < 1e-12);
        let rho = s.reduce(&ops.joint_map(), m.rho0_sys())?;
        assert!((&rho - &traj[ops.slice].rho).norm_max() < 1e-12);
        Ok(())
    })
    .unwrap();
}

#[test]
fn u_system_trivial_cases() {
    let f = Foliation::flat(0.0, 3.0, 30).unwrap();
    assert!(u_system(&exchange(0.0), &f, 30, 0).unwrap().distance_to_identity() < 1e-14);
    // ⟨σ_x⟩ vanishes in the ground state, so 𝒫𝓛𝒫 = 0.
    let m = exchange(0.4);
    let p = projector_p(m.rho_bath(), m.layout()).unwrap();
    let u = u_system(&m, &f, 30, 0).unwrap();
    assert!(dist(&u.compose(&p), &p) < 1e-12);
    assert!(matches!(u_system(&m, &f, 3, 9), Err(Error::Grid(_))));
}

#[test]
fn u_system_is_effective_hamiltonian_evolution() {
    let m = exchange(0.3).with_bath_state(models::plus_state()).unwrap();
    let f = Foliation::flat(0.0, 3.0, 60).unwrap();
    let h_eff = |t: f64| {
        let h = m.generator_hamiltonian(t);
        let r = h.matmul(&kron(&ComplexMatrix::identity(2), m.rho_bath()));
        tcl_dynamics::hs::partial_trace(&r, m.layout(), tcl_dynamics::hs::Subsystem::System).unwrap()
    };
    assert!(h_eff(0.0).norm_max() > 0.1);
    let s = TclSolver::for_model(&m, &f).unwrap();
    let coarse = oracle::evolve_hamiltonian(h_eff, m.rho0_sys(), &f, 1).unwrap();
    let fine = oracle::evolve_hamiltonian(h_eff, m.rho0_sys(), &Foliation::flat(0.0, 3.0, 6).unwrap(), 2000).unwrap();
    for k in [10, 33, 60] {
        let u = s.u_system(k, 0).unwrap();
        let joint = u.apply(&m.initial_joint_state()).unwrap();
        let expect = kron(&coarse[k], m.rho_bath());
        assert!((&joint - &expect).norm_max() < 1e-8);
    }
    let joint = s.u_system(60, 0).unwrap().apply(&m.initial_joint_state()).unwrap();
    assert!((&joint - &kron(&fine[6], m.rho_bath())).norm_max() < 1e-4);
}

#[test]
fn reduced_dm_trivial_cases() {
    let f = Foliation::flat(0.0, 5.0, 50).unwrap();
    let free = exchange(0.0);
    let rho0 = free.rho0_sys().clone();
    for k in [0, 25, 50] {
        assert!((&reduced_dm(&free, &f, k).unwrap() - &rho0).norm_max() < 1e-14);
    }
    let m = exchange(0.4);
    assert_eq!(reduced_dm(&m, &f, 0).unwrap(), rho0);
}

#[test]
fn reduced_dm_matches_oracle_on_a_boson_model() {
    let m = models::qubit_boson(1.0, 0.15, 3).unwrap();
    let f = Foliation::flat(0.0, 3.0, 300).unwrap();
    let tcl = TclSolver::for_model(&m, &f).unwrap().trajectory(m.rho0_sys()).unwrap();
    let exact = oracle::exact_reduced_series(&m, &f).unwrap();
    let joint = oracle::exact_joint_series(&m, &f).unwrap();
    for (k, p) in tcl.iter().enumerate() {
        assert!(trace_norm(&(&p.rho - &exact.states[k])) < 1e-3, "slice {k}");
        // The reconstructed joint state θ𝒫ρ_T is the exact one.
        assert!(trace_norm(&(&p.joint - &joint[k])) < 1e-3, "slice {k}");
    }
}

#[test]
fn degenerate_reduction_is_effective_unitary_evolution() {
    let h = |t: f64| &pauli::z().scale_real(0.5) + &pauli::x().scale_real(0.3 * (1.7 * t).cos());
    let gen = HamiltonianFn::new(2, h);
    let f = Foliation::flat(0.0, 4.0, 80).unwrap();
    let one = ComplexMatrix::identity(1);
    let layout = SpaceLayout::new(2, 1).unwrap();
    let s = TclSolver::new(Box::new(gen), &f, &one, layout).unwrap();
    let rho0 = models::plus_state();
    let tcl = s.trajectory(&rho0).unwrap();
    let unitary = oracle::evolve_hamiltonian(h, &rho0, &f, 1).unwrap();
    for (p, u) in tcl.iter().zip(&unitary) {
        assert!((&p.rho - u).norm_max() < 1e-10);
    }
}

#[test]
fn quantum_operation_trivial_and_linear() {
    let f = Foliation::flat(0.0, 1.0, 100).unwrap();
    assert!(quantum_operation(&exchange(0.0), &f, 100).unwrap().distance_to_identity() < 1e-13);
    let m = exchange(0.1);
    let s = TclSolver::for_model(&m, &f).unwrap();
    let e = s.quantum_operation(100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let rho = random_state(&mut rng, 2);
        let direct = s.reduced_dm(&rho, 100).unwrap();
        assert!((&e.apply(&rho).unwrap() - &direct).norm_max() < 1e-10);
    }
    // Trace preservation on the matrix-unit basis.
    for i in 0..2 {
        for j in 0..2 {
            let unit = ComplexMatrix::unit(2, i, j);
            let out = e.apply(&unit).unwrap();
            assert!((out.trace() - unit.trace()).norm() < 1e-8);
        }
    }
    let choi = e.choi();
    let min = choi.eigenvalues_hermitian()[0];
    assert!(min >= -1e-6, "{min}");
}

#[test]
fn relabeling_the_foliation_changes_nothing() {
    let m = exchange(0.2);
    let f = Foliation::flat(0.0, 2.0, 60).unwrap();
    let g = f.reparametrize(|s| s.powi(3) + 2.0 * s - 1.0).unwrap();
    let a = TclSolver::for_model(&m, &f).unwrap().trajectory(m.rho0_sys()).unwrap();
    let b = TclSolver::for_model(&m, &g).unwrap().trajectory(m.rho0_sys()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((&x.rho - &y.rho).norm_max() <= 1e-12);
    }
}

#[test]
fn breakdown_is_reported_with_slice_and_operator() {
    let m = exchange(1.5);
    let f = Foliation::flat(0.0, 10.0, 200).unwrap();
    let s = TclSolver::for_model(&m, &f).unwrap().with_threshold(20.0);
    match s.trajectory(m.rho0_sys()) {
        Err(Error::TclBreakdown { slice, time, operator, condition }) => {
            assert!(slice > 0 && slice <= 200);
            assert_eq!(time, f.time(slice));
            assert!(condition > 20.0);
            assert!(matches!(operator, BreakdownOperator::ThetaInverse | BreakdownOperator::W));
        }
        other => panic!("expected a breakdown, got {:?}", other.map(|v| v.len())),
    }
}

#[test]
fn midpoint_quadrature_is_rejected_by_the_solver() {
    let m = exchange(0.2);
    let f = Foliation::flat(0.0, 1.0, 4).unwrap().with_quadrature(Quadrature::Midpoint);
    assert!(matches!(TclSolver::for_model(&m, &f), Err(Error::Grid(_))));
}

#[test]
fn custom_couplings_reach_the_solver() {
    let h = pauli::z().scale_real(0.5);
    let c = Coupling { system: pauli::y(), bath: pauli::x(), strength: 0.2 };
    let m = ModelSpec::new("yx", h.clone(), h, vec![c], ComplexMatrix::unit(2, 1, 1), models::plus_state()).unwrap();
    let f = Foliation::flat(0.0, 3.0, 600).unwrap();
    let rho = reduced_dm(&m, &f, 600).unwrap();
    let exact = oracle::exact_reduced(&m, &f, 600).unwrap();
    assert!(trace_norm(&(&rho - &exact)) < 1e-4);
}
