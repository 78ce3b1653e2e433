//! End-to-end acceptance checks on the two reference models: a two-level
//! system with H_S = diag(0, 1) coupled through D = 0.1|e1⟩⟨e2| (rotating-wave
//! model) or D = 0.1σx, to a bath with bump densities on [0, 1] and [2, 3].
//!
//! Each test writes one `PASS`/`FAIL` line straight to stdout so the summary
//! is visible without `--nocapture`.

use std::io::Write;
use std::time::Instant;

use ldl_core::dynamics::{evolve_master, propagate_exact, unravel_jump};
use ldl_core::generator::{born_drift, build_generator, drift, drift_from_t, thermal_t_trace};
use ldl_core::linalg::{frobenius, min_hermitian_eigenvalue, random_density, trace, CMat, I};
use ldl_core::reference::{tm_nr, tm_rwa};
use ldl_core::tmatrix::{series_partial_sums, closed_form_contraction, dyson_oracle, richardson_eta, t_operator_components, DysonGrid, Pair};
use ldl_core::verification::{
    causal_ratio, check_causal_delta_limit, check_delta_limit, diagonal_projection_residual, neumann_residual,
    probe_energies, run_identity_suite, TestFunction, LIMIT_LAMBDAS,
};
use ldl_core::Model;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{verdict} criterion {n}: {detail}").unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rwa() -> Model {
    Model::new(tm_rwa()).unwrap()
}

fn nr() -> Model {
    Model::new(tm_nr()).unwrap()
}

#[test]
fn criterion_01_series_identity() {
    let start = Instant::now();
    let m = nr();
    let mut worst: f64 = 0.0;
    let mut max_order = 0;
    let mut all_converged = true;
    for e in probe_energies(&m) {
        let t = t_operator_components(&m, e).unwrap();
        for (pair, target) in Pair::ALL.into_iter().zip(&t) {
            let s = series_partial_sums(&m, pair, e, 1e-12, 80).unwrap();
            all_converged &= s.converged_at.is_some();
            max_order = max_order.max(*s.orders.last().unwrap());
            worst = worst.max(frobenius(&(s.partial_sums.last().unwrap() - target)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        all_converged && worst <= 1e-10 && secs < 60.0,
        format!("max residual {worst:.2e} (tol 1e-10), highest order {max_order}, {secs:.1} s"),
    );
}

#[test]
fn criterion_02_neumann_vs_direct() {
    let mut worst: f64 = 0.0;
    for m in [rwa(), nr()] {
        worst = worst.max(neumann_residual(&m, &probe_energies(&m)).unwrap());
    }
    report(2, worst <= 1e-10, format!("max relative block discrepancy {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_03_dyson_oracle() {
    let start = Instant::now();
    let m = nr();
    let u = DVector::from_vec(vec![Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.7)]);
    let v = DVector::from_vec(vec![Complex64::new(0.3, -0.4), Complex64::new(0.5, 0.2)]);
    let grid = DysonGrid::default();
    let mut worst: f64 = 0.0;
    let cases = [(2, Pair::P00), (2, Pair::P11), (3, Pair::P01), (3, Pair::P10)];
    let mut lines = Vec::new();
    for (n, pair) in cases {
        let at = |eta: f64| dyson_oracle(&m, pair, n, &u, &v, eta, grid).unwrap();
        let extrapolated = richardson_eta(at(1e-3), at(2e-3), at(4e-3));
        let closed = closed_form_contraction(&m, pair, n, &u, &v).unwrap();
        let rel = (extrapolated - closed).norm() / closed.norm();
        worst = worst.max(rel);
        lines.push(format!("n={n} {}: {rel:.1e}", pair.label()));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        worst <= 1e-3 && secs < 300.0,
        format!("max relative deviation {worst:.2e} (tol 1e-3) [{}], {secs:.1} s", lines.join(", ")),
    );
}

#[test]
fn criterion_04_drift_identity() {
    let mut worst: f64 = 0.0;
    for m in [rwa(), nr()] {
        worst = worst.max(frobenius(&(drift(&m).unwrap() - drift_from_t(&m).unwrap())));
    }
    let m = rwa();
    let unprojected = frobenius(&(drift(&m).unwrap() - thermal_t_trace(&m).unwrap() * I));
    report(
        4,
        worst <= 1e-10 && unprojected <= 1e-10,
        format!("drift paths differ by {worst:.2e}; rotating-wave model without projection {unprojected:.2e} (tol 1e-10)"),
    );
}

#[test]
fn criterion_05_diagonal_projection() {
    let mut worst: f64 = 0.0;
    for m in [rwa(), nr()] {
        worst = worst.max(diagonal_projection_residual(&m, &probe_energies(&m)).unwrap());
    }
    report(5, worst <= 1e-10, format!("max diagonal part of off-diagonal R {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_06_lindblad_structure() {
    let mut pass = true;
    let mut lines = Vec::new();
    for spec in [tm_rwa(), tm_nr()] {
        let r = run_identity_suite(&spec).unwrap();
        for c in &r.checks {
            if matches!(
                c.check.as_str(),
                "lindblad_reconstruction" | "hamiltonian_hermitian" | "choi_psd" | "unitality" | "hamiltonian_from_drift"
            ) {
                pass &= c.pass;
                lines.push(format!("{} {:.1e}/{:.0e}", c.check, c.residual, c.tolerance));
            }
        }
    }
    report(6, pass, lines.join(", "));
}

#[test]
fn criterion_07_master_dynamics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut trace_drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut oracle: f64 = 0.0;
    for m in [rwa(), nr()] {
        let gen = build_generator(&m).unwrap();
        for _ in 0..10 {
            let rho0 = random_density(2, &mut rng);
            let traj = evolve_master(&gen, &rho0, 20.0, 0.05).unwrap();
            for s in &traj.states {
                trace_drift = trace_drift.max((trace(s) - Complex64::new(1.0, 0.0)).norm());
                min_eig = min_eig.min(min_hermitian_eigenvalue(s));
            }
            let at_one = traj.times.iter().position(|&t| (t - 1.0).abs() < 1e-9).unwrap();
            oracle = oracle.max(frobenius(&(&traj.states[at_one] - propagate_exact(&gen, &rho0, 1.0))));
        }
    }
    report(
        7,
        trace_drift <= 1e-9 && min_eig >= -1e-8 && oracle <= 1e-8,
        format!("trace drift {trace_drift:.1e}, min eigenvalue {min_eig:.3e}, exponential oracle {oracle:.1e}"),
    );
}

#[test]
fn criterion_08_jump_unravelling() {
    let start = Instant::now();
    let gen = build_generator(&nr()).unwrap();
    // The generator norm is ~2e-4, so the time axis is stretched to make the
    // coherent rotation and the jumps visible.
    let (t_max, dt, trajectories, seed) = (4.0e4, 100.0, 20_000, 2024);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi0 = DVector::from_vec(vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)]);
    let rho0: CMat = &psi0 * psi0.adjoint();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| unravel_jump(&gen, &psi0, t_max, dt, trajectories, seed).unwrap())
    };
    let ens = run(4);
    let ode = evolve_master(&gen, &rho0, t_max, dt).unwrap();
    let steps = ens.times.len() - 1;
    let mut worst_excess: f64 = 0.0;
    let mut max_dev: f64 = 0.0;
    for c in 1..=10 {
        let k = c * steps / 10;
        for i in 0..2 {
            for j in 0..2 {
                let (m, o) = (ens.mean_states[k][(i, j)], ode.states[k][(i, j)]);
                let dr = (m.re - o.re).abs();
                let di = (m.im - o.im).abs();
                max_dev = max_dev.max(dr).max(di);
                worst_excess = worst_excess
                    .max(dr / (4.0 * ens.stderr_re[k][(i, j)]).max(2e-2))
                    .max(di / (4.0 * ens.stderr_im[k][(i, j)]).max(2e-2));
            }
        }
    }
    let again = run(1);
    let identical = ens.mean_states == again.mean_states;
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        worst_excess <= 1.0 && identical && secs < 300.0,
        format!(
            "max |mean - ODE| {max_dev:.2e}, worst deviation/bound {worst_excess:.2}, bitwise identical across 1 and 4 threads: {identical}, {secs:.1} s"
        ),
    );
}

#[test]
fn criterion_09_distributional_limits() {
    let f = TestFunction::gaussian(0.0, 1.0);
    let plain = check_delta_limit(&f, &f, &f, true, &LIMIT_LAMBDAS).unwrap();
    let causal = check_causal_delta_limit(&f, &f, &f, &LIMIT_LAMBDAS).unwrap();
    let half = causal_ratio(&plain, &causal).unwrap();
    let ratios_ok = |r: &ldl_core::verification::LimitCheckReport| r.monotone && r.ratios().iter().all(|&q| q <= 0.5);
    let pass = ratios_ok(&plain)
        && ratios_ok(&causal)
        && plain.final_relative_error() <= 5e-2
        && causal.final_relative_error() <= 5e-2
        && (half - 0.5).norm() <= 1e-3;
    report(
        9,
        pass,
        format!(
            "delta errors {:?} ratios {:?}; causal errors {:?} ratios {:?}; causal/non-causal {:.6}",
            plain.errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            plain.ratios().iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>(),
            causal.errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            causal.ratios().iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>(),
            half.re
        ),
    );
}

#[test]
fn criterion_10_born_scaling() {
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, m) in [("rotating-wave", rwa()), ("sigma-x", nr())] {
        let gap = |s: f64| {
            let ms = m.with_coupling_scaled(s).unwrap();
            frobenius(&(drift(&ms).unwrap() - born_drift(&ms).unwrap()))
        };
        let ratio = gap(1.0) / gap(0.1);
        pass &= (5e3..=2e4).contains(&ratio);
        lines.push(format!("{name} ratio {ratio:.4e}"));
    }
    report(10, pass, format!("{} (window [5e3, 2e4])", lines.join(", ")));
}
