// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::Config;
use super::output::{fmt_f64, matrix_cells, matrix_columns, sibling, to_json, write_atomic, Csv, JsonMatrix};
use super::{log_slope, CliError, Command, Log};
use crate::foliation::Foliation;
use crate::hs::{fidelity, partial_trace, trace_distance, trace_norm, ComplexMatrix, Subsystem, SuperOp, C64};
use crate::models::ModelSpec;
use crate::oracle;
use crate::perturb::{self, BathCorrelation, DriveProtocol};
use crate::propagate::TclSolver;

type CmdResult = Result<(), CliError>;

pub(super) fn dispatch(command: Command, cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    match command {
        Command::Simulate => simulate(cfg, out, log),
        Command::Oracle => oracle_cmd(cfg, out, log),
        Command::Channel => channel(cfg, out, log),
        Command::Perturb => perturb_cmd(cfg, out, log),
        Command::Linresp => linresp(cfg, out, log),
        Command::Converge => converge(cfg, out, log),
        Command::Identities => identities(cfg, out, log),
    }
}

fn emitted(k: usize, last: usize, stride: usize) -> bool {
    k.is_multiple_of(stride) || k == last
}

fn write(path: &Path, contents: &str) -> CmdResult {
    write_atomic(path, contents).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
}

fn purity(rho: &ComplexMatrix) -> f64 {
    rho.matmul(rho).trace().re
}

fn solver<'a>(cfg: &Config, model: &'a ModelSpec, f: &'a Foliation) -> Result<TclSolver<'a>, CliError> {
    Ok(TclSolver::for_model(model, f)?.with_threshold(cfg.tolerances.breakdown_condition))
}

fn simulate(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let f = cfg.build_foliation()?;
    let stride = cfg.stride()?;
    let tcl = solver(cfg, &model, &f)?;
    let traj = tcl.trajectory(model.rho0_sys())?;
    let exact = oracle::exact_reduced_series(&model, &f)?;

    let d = model.layout().d_sys();
    let truncated = model.bath_truncation().is_some();
    let mut header = vec!["t".to_string()];
    header.extend(matrix_columns("", d));
    header.extend(
        ["trace", "purity", "fidelity_vs_oracle", "trace_distance_vs_oracle", "cond_theta", "cond_w"]
            .map(String::from),
    );
    if truncated {
        header.push("leakage".into());
    }
    header.push("flag".into());
    let mut csv = Csv::new(header);

    let last = f.len() - 1;
    let tol = &cfg.tolerances;
    let (mut n_trace, mut n_leak, mut n_far, mut worst) = (0usize, 0usize, 0usize, 0.0f64);
    for (p, ex) in traj.iter().zip(&exact.states) {
        let tr = p.rho.trace().re;
        let dist = trace_distance(&p.rho, ex);
        worst = worst.max(dist);
        let leak = model.leakage(&p.joint);
        let trace_bad = (tr - 1.0).abs() > tol.trace;
        let leak_bad = leak.is_some_and(|l| l > tol.leakage);
        let far = !(dist <= tol.oracle);
        n_trace += trace_bad as usize;
        n_leak += leak_bad as usize;
        n_far += far as usize;
        if !emitted(p.slice, last, stride) {
            continue;
        }
        let mut row = vec![fmt_f64(p.time)];
        row.extend(matrix_cells(&p.rho));
        row.push(fmt_f64(tr));
        row.push(fmt_f64(purity(&p.rho)));
        row.push(fmt_f64(fidelity(&p.rho, ex)));
        row.push(fmt_f64(dist));
        row.push(fmt_f64(p.cond_theta));
        row.push(fmt_f64(p.cond_w));
        if truncated {
            row.push(fmt_f64(leak.unwrap_or(0.0)));
        }
        let flags: Vec<&str> = [(trace_bad, "trace"), (leak_bad, "leakage"), (far, "oracle")]
            .into_iter()
            .filter_map(|(bad, name)| bad.then_some(name))
            .collect();
        row.push(if flags.is_empty() { "ok".into() } else { flags.join("+") });
        csv.push(row);
    }
    write(out, &csv.render())?;
    if n_trace > 0 {
        log.warn(format!("{n_trace} slices deviate from unit trace by more than {:e}", tol.trace));
    }
    if n_leak > 0 {
        log.warn(format!(
            "{n_leak} slices put more than {:e} population in the top bath level; raise n_trunc",
            tol.leakage
        ));
    }
    if n_far > 0 {
        log.warn(format!("{n_far} slices lie farther than {:e} from the oracle (max {worst:.3e})", tol.oracle));
    }
    log.info(format!("simulate: {} slices, max trace distance to oracle {:.3e}", f.len(), worst));
    Ok(())
}

fn oracle_cmd(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let f = cfg.build_foliation()?;
    let stride = cfg.stride()?;
    let joint = oracle::exact_joint_series(&model, &f)?;
    let d = model.layout().d_sys();
    let truncated = model.bath_truncation().is_some();
    let mut header = vec!["t".to_string()];
    header.extend(matrix_columns("", d));
    header.extend(["trace", "purity"].map(String::from));
    if truncated {
        header.push("leakage".into());
    }
    let mut csv = Csv::new(header);
    let last = f.len() - 1;
    for (k, j) in joint.iter().enumerate() {
        if !emitted(k, last, stride) {
            continue;
        }
        let rho = partial_trace(j, model.layout(), Subsystem::System)?;
        let mut row = vec![fmt_f64(f.time(k))];
        row.extend(matrix_cells(&rho));
        row.push(fmt_f64(rho.trace().re));
        row.push(fmt_f64(purity(&rho)));
        if let Some(l) = model.leakage(j) {
            row.push(fmt_f64(l));
        }
        csv.push(row);
    }
    write(out, &csv.render())?;
    log.info(format!("oracle: {} slices", f.len()));
    Ok(())
}

#[derive(Serialize)]
struct ChannelReport {
    time: f64,
    slice: usize,
    matrix: JsonMatrix,
    choi: JsonMatrix,
    choi_eigenvalues: Vec<f64>,
    min_choi_eigenvalue: f64,
    completely_positive: bool,
    trace_preservation_error: f64,
}

fn trace_preservation_error(map: &SuperOp) -> f64 {
    let d = map.dim_op();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let image = map.apply(&ComplexMatrix::unit(d, i, j)).expect("unit has matching dimension");
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((image.trace() - C64::new(expected, 0.0)).norm());
        }
    }
    worst
}

fn channel(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let f = cfg.build_foliation()?;
    let t = cfg.run.time.unwrap_or(f.t_end());
    if !(t >= f.t0() && t <= f.t_end()) {
        return Err(CliError::Config(format!("`run.time` = {t} lies outside the foliation")));
    }
    let k = f.nearest_slice(t);
    let map = solver(cfg, &model, &f)?.quantum_operation(k)?;
    let choi = map.choi();
    let choi_h = (&choi + &choi.dagger()).scale_real(0.5);
    let eig = choi_h.eigenvalues_hermitian();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let report = ChannelReport {
        time: f.time(k),
        slice: k,
        matrix: map.matrix().into(),
        choi: (&choi).into(),
        min_choi_eigenvalue: min,
        completely_positive: min >= cfg.tolerances.choi,
        choi_eigenvalues: eig,
        trace_preservation_error: trace_preservation_error(&map),
    };
    write(out, &to_json(&report))?;
    if !report.completely_positive {
        log.warn(format!("Choi matrix has eigenvalue {min:.3e} below {:e}", cfg.tolerances.choi));
    }
    log.info(format!("channel: slice {k} (t = {}), min Choi eigenvalue {min:.3e}", f.time(k)));
    Ok(())
}

#[derive(Serialize)]
struct ScalingPoint {
    parameter: f64,
    residual: f64,
}

#[derive(Serialize)]
struct Scaling {
    description: &'static str,
    points: Vec<ScalingPoint>,
    fitted_slope: f64,
    expected_slope: f64,
    pass: bool,
}

impl Scaling {
    fn new(description: &'static str, params: &[f64], residuals: Vec<f64>, expected: f64, pass: impl Fn(f64) -> bool) -> Self {
        let slope = log_slope(params, &residuals);
        Self {
            description,
            points: params.iter().zip(residuals).map(|(&parameter, residual)| ScalingPoint { parameter, residual }).collect(),
            fitted_slope: slope,
            expected_slope: expected,
            pass: pass(slope),
        }
    }
}

#[derive(Serialize)]
struct PerturbScaling {
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling: Option<Scaling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drive: Option<Scaling>,
}

fn sweep_values(values: &Option<Vec<f64>>, default: &[f64], what: &str) -> Result<Vec<f64>, CliError> {
    let v = values.clone().unwrap_or_else(|| default.to_vec());
    if v.len() < 2 || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(CliError::Config(format!("`run.{what}` needs at least two positive values")));
    }
    Ok(v)
}

/// `max_k ‖(ρ_drive(t_k) − ρ_free(t_k)) − (ρ⁽¹⁾(t_k) − ρ₀)‖₁` for one drive.
fn first_order_residual(model: &ModelSpec, drive: &DriveProtocol, f: &Foliation, substeps: usize, free: &[ComplexMatrix]) -> Result<f64, CliError> {
    let rho1 = perturb::rho_first_order_series(model, drive, f)?;
    let driven = oracle::driven_reduced_series(model, |t| drive.hamiltonian(model, t), f, substeps)?;
    let rho0 = model.rho0_sys();
    let mut worst = 0.0f64;
    for ((r1, dr), fr) in rho1.iter().zip(&driven.states).zip(free) {
        worst = worst.max(trace_norm(&(&(dr - fr) - &(r1 - rho0))));
    }
    Ok(worst)
}

fn perturb_cmd(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let f = cfg.build_foliation()?;
    let stride = cfg.stride()?;
    let drive = cfg.build_drive()?;
    let kernel = BathCorrelation::from_model(&model);
    let drho2 = perturb::rho_second_order_series(&model, &kernel, &f)?;
    let rho1 = match &drive {
        Some(d) => Some(perturb::rho_first_order_series(&model, d, &f)?),
        None => None,
    };

    let d = model.layout().d_sys();
    let mut header = vec!["t".to_string()];
    if rho1.is_some() {
        header.extend(matrix_columns("rho1_", d));
    }
    header.extend(matrix_columns("drho2_", d));
    header.push("drho2_trace".into());
    let mut csv = Csv::new(header);
    let last = f.len() - 1;
    for k in (0..f.len()).filter(|&k| emitted(k, last, stride)) {
        let mut row = vec![fmt_f64(f.time(k))];
        if let Some(r) = &rho1 {
            row.extend(matrix_cells(&r[k]));
        }
        row.extend(matrix_cells(&drho2[k]));
        row.push(fmt_f64(drho2[k].trace().re));
        csv.push(row);
    }
    write(out, &csv.render())?;

    let band = cfg.tolerances.order_band;
    let coupling = if model.couplings().is_empty() {
        None
    } else {
        Some(coupling_scaling(cfg, &model, &f, band)?)
    };

    let drive_scaling = match &drive {
        Some(base) => {
            warn_bath_dressing(&model, log);
            let amps = drive_amplitudes(cfg)?;
            let free = oracle::exact_reduced_series(&model, &f)?.states;
            let substeps = cfg.substeps()?;
            let residuals = amps
                .iter()
                .map(|&eps| first_order_residual(&model, &base_scaled(cfg, base, eps)?, &f, substeps, &free))
                .collect::<Result<Vec<_>, CliError>>()?;
            Some(Scaling::new(
                "maximum trace-norm residual of the first-order drive correction against drive amplitude",
                &amps,
                residuals,
                2.0,
                |s| (s - 2.0).abs() <= band,
            ))
        }
        None => None,
    };
    let report = PerturbScaling { coupling, drive: drive_scaling };
    write(&sibling(out, "scaling.json"), &to_json(&report))?;
    if let Some(c) = &report.coupling {
        log.info(format!("perturb: coupling slope {:.3}", c.fitted_slope));
    }
    Ok(())
}

fn coupling_scaling(cfg: &Config, model: &ModelSpec, f: &Foliation, band: f64) -> Result<Scaling, CliError> {
    let last = f.len() - 1;
    // The correction is quadratic in a uniform coupling strength, so one
    // unit-strength evaluation serves the whole sweep.
    let strengths = sweep_values(&cfg.run.strengths, &[0.05, 0.1, 0.2], "strengths")?;
    let unit = model.clone().with_strength(1.0);
    let unit_drho2 = perturb::rho_second_order_series(&unit, &BathCorrelation::from_model(&unit), f)?
        .pop()
        .expect("foliation has slices");
    let residuals = strengths
        .iter()
        .map(|&lam| {
            let m = model.clone().with_strength(lam);
            let exact = oracle::exact_reduced(&m, f, last)?;
            let approx = m.rho0_sys() + &unit_drho2.scale_real(lam * lam);
            Ok(trace_norm(&(&exact - &approx)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Scaling::new(
        "trace-norm residual of the second-order state at the last slice against coupling strength",
        &strengths,
        residuals,
        3.0,
        |s| s >= 3.0 - band,
    ))
}

fn warn_bath_dressing(model: &ModelSpec, log: &Log) {
    if model.couplings().iter().any(|c| c.strength != 0.0) {
        log.warn("the first-order drive response uses uncoupled system correlations; bath terms of order amplitude × coupling² remain in the residuals");
    }
}

fn drive_amplitudes(cfg: &Config) -> Result<Vec<f64>, CliError> {
    sweep_values(&cfg.run.amplitudes, &[0.01, 0.02, 0.04], "amplitudes")
}

/// The configured drive rescaled to amplitude `eps`.
fn base_scaled(cfg: &Config, base: &DriveProtocol, eps: f64) -> Result<DriveProtocol, CliError> {
    let amp = cfg.run.drive.as_ref().map_or(0.0, |d| d.amplitude);
    if amp == 0.0 {
        return Err(CliError::Config("`run.drive.amplitude` must be nonzero for an amplitude sweep".into()));
    }
    Ok(base.scaled(eps / amp))
}

struct Response {
    kubo: Vec<f64>,
    exact: Vec<f64>,
}

fn response(
    model: &ModelSpec,
    drive: &DriveProtocol,
    obs: &ComplexMatrix,
    f: &Foliation,
    substeps: usize,
    free: &[ComplexMatrix],
) -> Result<Response, CliError> {
    let rho1 = perturb::rho_first_order_series(model, drive, f)?;
    let driven = oracle::driven_reduced_series(model, |t| drive.hamiltonian(model, t), f, substeps)?;
    let rho0 = model.rho0_sys();
    let mut kubo = Vec::with_capacity(f.len());
    let mut exact = Vec::with_capacity(f.len());
    for k in 0..f.len() {
        let o = model.system_operator_at(obs, f.time(k));
        kubo.push(o.expectation(&(&rho1[k] - rho0)).re);
        exact.push(o.expectation(&(&driven.states[k] - &free[k])).re);
    }
    Ok(Response { kubo, exact })
}

fn linresp(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let f = cfg.build_foliation()?;
    let stride = cfg.stride()?;
    let substeps = cfg.substeps()?;
    let drive = cfg.build_drive()?.ok_or_else(|| CliError::Config("`linresp` needs `run.drive`".into()))?;
    let obs = cfg
        .run
        .observable
        .ok_or_else(|| CliError::Config("`linresp` needs `run.observable`".into()))?
        .matrix();
    warn_bath_dressing(&model, log);
    let free = oracle::exact_reduced_series(&model, &f)?.states;
    let r = response(&model, &drive, &obs, &f, substeps, &free)?;

    let mut csv = Csv::new(["t", "field", "kubo", "exact", "difference"].map(String::from).to_vec());
    let last = f.len() - 1;
    for k in (0..f.len()).filter(|&k| emitted(k, last, stride)) {
        let t = f.time(k);
        csv.push(vec![
            fmt_f64(t),
            fmt_f64(drive.field(t)),
            fmt_f64(r.kubo[k]),
            fmt_f64(r.exact[k]),
            fmt_f64(r.kubo[k] - r.exact[k]),
        ]);
    }
    write(out, &csv.render())?;

    let amps = drive_amplitudes(cfg)?;
    let residuals = amps
        .iter()
        .map(|&eps| {
            let d = base_scaled(cfg, &drive, eps)?;
            let r = response(&model, &d, &obs, &f, substeps, &free)?;
            Ok(r.kubo.iter().zip(&r.exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let band = cfg.tolerances.order_band;
    let scaling = Scaling::new(
        "maximum deviation of the Kubo response from the finite-field response against drive amplitude",
        &amps,
        residuals,
        2.0,
        |s| (s - 2.0).abs() <= band,
    );
    write(&sibling(out, "scaling.json"), &to_json(&scaling))?;
    log.info(format!("linresp: amplitude slope {:.3}", scaling.fitted_slope));
    Ok(())
}

#[derive(Serialize)]
struct ConvergencePoint {
    n: usize,
    dt: f64,
    max_error: f64,
}

#[derive(Serialize)]
struct ConvergenceReport {
    points: Vec<ConvergencePoint>,
    fitted_order: f64,
    pass: bool,
}

fn converge(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let ns = cfg.run.refinements.clone().unwrap_or_else(|| vec![250, 500, 1000]);
    if ns.len() < 2 || ns.contains(&0) {
        return Err(CliError::Config("`run.refinements` needs at least two positive interval counts".into()));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in &ns {
        let f = cfg.foliation_with(n)?;
        let traj = solver(cfg, &model, &f)?.trajectory(model.rho0_sys())?;
        let exact = oracle::exact_reduced_series(&model, &f)?;
        let max_error = traj.iter().zip(&exact.states).map(|(p, e)| trace_distance(&p.rho, e)).fold(0.0, f64::max);
        let dt = (f.t_end() - f.t0()) / n as f64;
        log.info(format!("converge: n = {n}, max error {max_error:.3e}"));
        points.push(ConvergencePoint { n, dt, max_error });
    }
    let dts: Vec<f64> = points.iter().map(|p| p.dt).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.max_error).collect();
    let order = log_slope(&dts, &errs);
    let report = ConvergenceReport { pass: (order - 2.0).abs() <= cfg.tolerances.order_band, fitted_order: order, points };
    write(out, &to_json(&report))?;
    log.info(format!("converge: fitted order {order:.3}"));
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    max_deviation: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct IdentityReport {
    model: String,
    slices_checked: usize,
    samples: usize,
    seed: u64,
    checks: Vec<Check>,
    all_pass: bool,
}

fn random_matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_state(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    let m = a.matmul(&a.dagger());
    let rho = m.scale_real(1.0 / m.trace().re);
    (&rho + &rho.dagger()).scale_real(0.5)
}

/// Slice pairs `j ≤ k` drawn uniformly.
fn random_pair(rng: &mut impl Rng, m: usize) -> (usize, usize) {
    let a = rng.random_range(0..=m);
    let b = rng.random_range(0..=m);
    (a.max(b), a.min(b))
}

/// Most checks walk propagator products, so they run on at most this many
/// leading intervals.
const IDENTITY_SLICES: usize = 24;
const DIRECT_SLICES: usize = 12;

fn identities(cfg: &Config, out: &Path, log: &Log) -> CmdResult {
    let model = cfg.build_model()?;
    let full = cfg.build_foliation()?;
    let samples = cfg.run.samples.unwrap_or(100);
    let seed = cfg.run.seed.unwrap_or(0);
    if samples == 0 {
        return Err(CliError::Config("`run.samples` must be at least 1".into()));
    }
    let m = full.n_intervals().min(IDENTITY_SLICES);
    let f = Foliation::from_times(full.times()[..=m].to_vec())?.with_quadrature(full.quadrature());
    let tcl = solver(cfg, &model, &f)?;
    let tol = &cfg.tolerances;
    let layout = model.layout();
    let dj = layout.joint_dim();
    let ds = layout.d_sys();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut check = |name, dev: f64, tolerance: f64| checks.push(Check { name, max_deviation: dev, tolerance, pass: dev <= tolerance });

    let (p, q) = (tcl.projector_p(), tcl.projector_q());
    let id = SuperOp::identity(dj);
    let alg = [(&(p * p) - p).norm(), (&(q * q) - q).norm(), (p * q).norm(), (q * p).norm(), (&(p + q) - &id).norm()];
    check("projector_algebra", alg.into_iter().fold(0.0, f64::max), tol.projector);

    let mut dev = 0.0f64;
    let mut dev_prod = 0.0f64;
    for _ in 0..samples {
        let x = random_matrix(&mut rng, dj);
        let px = p.apply(&x)?;
        let qx = q.apply(&x)?;
        dev = dev.max((&p.apply(&px)? - &px).norm_max());
        dev = dev.max(p.apply(&qx)?.norm_max());
        dev = dev.max((&(&px + &qx) - &x).norm_max());
        dev = dev.max(partial_trace(&qx, layout, Subsystem::System)?.norm_max());
        let prod = crate::hs::kron(&random_matrix(&mut rng, ds), model.rho_bath());
        dev_prod = dev_prod.max((&p.apply(&prod)? - &prod).norm_max());
    }
    check("projector_random_operators", dev, tol.projector);
    check("projector_fixes_product_states", dev_prod, tol.projector);

    let (mut inv, mut comp, mut unit) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples.min(20) {
        let (k, j) = random_pair(&mut rng, m);
        let fw = tcl.forward(k, j)?;
        inv = inv.max((&fw.compose(&tcl.g_retarded(k, j)?) - &id).norm());
        let mid = rng.random_range(j..=k);
        comp = comp.max((&tcl.forward(k, mid)?.compose(&tcl.forward(mid, j)?) - &fw).norm());
        let rho = random_state(&mut rng, dj);
        let ev = fw.apply(&rho)?;
        unit = unit.max((ev.trace().re - 1.0).abs()).max(ev.hermitian_deviation());
        unit = unit.max((purity(&ev) - purity(&rho)).abs());
    }
    check("inverse_pairing", inv, tol.propagator);
    check("propagator_composition", comp, tol.propagator);
    check("unitarity", unit, tol.propagator);

    // The direct `W` sum is quadratic in the slice index.
    let md = m.min(DIRECT_SLICES);
    let mut swept = None;
    tcl.sweep(md, |ops| {
        if ops.slice == md {
            swept = Some((ops.theta.clone(), ops.w_inv.clone()));
        }
        Ok(())
    })?;
    let (theta_s, w_inv_s) = swept.expect("sweep visits its last slice");
    let (theta_d, _) = tcl.theta(md)?;
    let (w_d, _) = tcl.w_operator(md)?;
    let rel = |a: &SuperOp, b: &SuperOp| (a - b).norm() / b.norm().max(1.0);
    let sweep_dev = rel(&theta_s, &theta_d).max(rel(&w_inv_s.compose(&w_d), &id));
    check("sweep_matches_direct_sums", sweep_dev, tol.propagator);

    let states: Vec<ComplexMatrix> = (0..samples.min(10)).map(|_| random_state(&mut rng, ds)).collect();
    let mut at_m = None;
    tcl.sweep(m, |ops| {
        if ops.slice == m {
            let joint = ops.joint_map();
            let direct = states.iter().map(|r| tcl.reduce(&joint, r)).collect::<crate::Result<Vec<_>>>()?;
            at_m = Some((tcl.channel_from(ops)?, direct));
        }
        Ok(())
    })?;
    let (channel, direct) = at_m.expect("sweep visits its last slice");
    let mut lin = 0.0f64;
    for (rho, r) in states.iter().zip(&direct) {
        lin = lin.max((&channel.apply(rho)? - r).norm_max());
    }
    check("channel_matches_reduced_state", lin, tol.channel);
    check("channel_trace_preservation", trace_preservation_error(&channel), tol.trace);

    let all_pass = checks.iter().all(|c| c.pass);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let report = IdentityReport { model: model.name().to_string(), slices_checked: m, samples, seed, checks, all_pass };
    write(out, &to_json(&report))?;
    if !all_pass {
        return Err(CliError::Identity(format!("identity checks failed: {}", failed.join(", "))));
    }
    log.info(format!("identities: {} checks passed on {m} slices", report.checks.len()));
    Ok(())
}
