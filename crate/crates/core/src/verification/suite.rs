//! Named numerical identities with tolerances, gathered into one report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::limits::{causal_ratio, check_causal_delta_limit, check_delta_limit, TestFunction};
use crate::bath::Channel;
use crate::error::Result;
use crate::generator::{apply_generator, build_generator, choi_matrix, drift, drift_from_t, theta0_direct, thermal_t_trace};
use crate::linalg::{frobenius, hermiticity_defect, identity, min_hermitian_eigenvalue, operator_norm, random_hermitian, CMat, I};
use crate::model::{Model, ModelSpec};
use crate::tmatrix::{series_partial_sums, neumann_inverse, solve_one_plus_t, t_operator_components, EnergySlice, Pair};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(check: &str, residual: f64, tolerance: f64) -> Self {
        CheckResult { check: check.to_string(), residual, tolerance, pass: residual.is_finite() && residual <= tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn from_checks(mut checks: Vec<CheckResult>) -> Self {
        checks.sort_by(|a, b| a.check.cmp(&b.check));
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport { checks, pass }
    }

    pub fn merge(self, other: SuiteReport) -> Self {
        SuiteReport::from_checks(self.checks.into_iter().chain(other.checks).collect())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Five interior energies in each bath support.
pub fn probe_energies(model: &Model) -> Vec<f64> {
    let mut out = Vec::new();
    for (a, b) in model.bath_report.supports {
        out.extend((0..5).map(|k| a + (b - a) * (k as f64 + 0.5) / 5.0));
    }
    out
}

fn series_residual(model: &Model, energies: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &e in energies {
        let t = t_operator_components(model, e)?;
        for (pair, target) in Pair::ALL.into_iter().zip(&t) {
            let s = series_partial_sums(model, pair, e, 1e-12, 60)?;
            let last = s.partial_sums.last().expect("at least one order");
            let r = if s.converged_at.is_some() { frobenius(&(last - target)) } else { f64::INFINITY };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Worst relative block discrepancy between the Neumann series and the
/// direct solve. Blocks negligible against their column are compared
/// relative to the column norm instead.
pub fn neumann_residual(model: &Model, energies: &[f64]) -> Result<f64> {
    let tol = model.spec.neumann_tolerance.min(1e-13);
    let max_order = model.spec.neumann_max_order.max(64);
    let mut worst: f64 = 0.0;
    for &e in energies {
        for eps in Channel::ALL {
            for &wp in &model.spectral.bohr_set {
                let series = neumann_inverse(model, eps, wp, e, max_order, tol)?;
                if !series.converged {
                    return Ok(f64::INFINITY);
                }
                let direct = solve_one_plus_t(model, eps, wp, e)?;
                let column: f64 = direct.blocks.iter().map(|b| frobenius(b).powi(2)).sum::<f64>().sqrt();
                for (a, b) in series.column.blocks.iter().zip(&direct.blocks) {
                    let nb = frobenius(b);
                    let scale = if nb > 1e-12 * column { nb } else { column };
                    worst = worst.max(frobenius(&(a - b)) / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// max over ω ≠ 0 and ε of ‖Σ_k P_k R^{εε}_{ω,0}(E) P_k‖.
pub fn diagonal_projection_residual(model: &Model, energies: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &e in energies {
        let mut slice = EnergySlice::new(model, e);
        for eps in Channel::ALL {
            for &w in &model.spectral.bohr_set {
                if model.spectral.index_of(w) == model.spectral.index_of(0.0) {
                    continue;
                }
                let r = slice.r(eps, eps, w, 0.0)?;
                worst = worst.max(frobenius(&model.spectral.diagonal_part(&r)));
            }
        }
    }
    Ok(worst)
}

/// Every assertable identity on one model. Invalid models are refused with
/// the validation error naming the violated condition.
pub fn run_identity_suite(spec: &ModelSpec) -> Result<SuiteReport> {
    let model = Model::new(spec.clone())?;
    let energies = probe_energies(&model);
    let gen = build_generator(&model)?;
    let gamma = drift(&model)?;
    let mut checks = vec![
        CheckResult::new("series_identity", series_residual(&model, &energies)?, 1e-10),
        CheckResult::new("neumann_vs_direct", neumann_residual(&model, &energies)?, 1e-10),
        CheckResult::new("diagonal_projection", diagonal_projection_residual(&model, &energies)?, 1e-10),
        CheckResult::new("drift_identity", frobenius(&(&gamma - drift_from_t(&model)?)), 1e-10),
    ];
    if model.spectral.is_rwa() {
        let unprojected = thermal_t_trace(&model)? * I;
        checks.push(CheckResult::new("drift_rwa_unprojected", frobenius(&(&gamma - unprojected)), 1e-10));
    }
    checks.push(CheckResult::new("hamiltonian_hermitian", hermiticity_defect(&gen.hamiltonian), 1e-12));
    let h_from_gamma = (&gen.drift - gen.drift.adjoint()) / (I * 2.0);
    checks.push(CheckResult::new("hamiltonian_from_drift", frobenius(&(&gen.hamiltonian - h_from_gamma)), 1e-10));
    checks.push(CheckResult::new(
        "unitality",
        frobenius(&(gen.psi_one() - (&gen.drift + gen.drift.adjoint()))),
        1e-10,
    ));
    let choi = choi_matrix(&gen);
    let scale = frobenius(&choi);
    let negative = (-min_hermitian_eigenvalue(&choi)).max(0.0);
    checks.push(CheckResult::new("choi_psd", if scale > 0.0 { negative / scale } else { 0.0 }, 1e-10));
    let mut growth: f64 = 0.0;
    for k in 0..=10 {
        let u = crate::dynamics::vacuum_decay(&gen, k as f64)?;
        growth = growth.max(operator_norm(&u) - 1.0);
    }
    checks.push(CheckResult::new("vacuum_decay_contractive", growth.max(0.0), 1e-8));
    checks.push(CheckResult::new("identity_annihilated", frobenius(&apply_generator(&gen, &identity(model.dim()))?), 1e-10));
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let xs: Vec<CMat> = (0..20).map(|_| random_hermitian(model.dim(), &mut rng)).collect();
    let direct = theta0_direct(&model, &xs)?;
    let mut recon: f64 = 0.0;
    for (x, t) in xs.iter().zip(&direct) {
        recon = recon.max(frobenius(&(apply_generator(&gen, x)? - t)));
    }
    checks.push(CheckResult::new("lindblad_reconstruction", recon, 1e-12));
    Ok(SuiteReport::from_checks(checks))
}

/// The shipped Gaussian test functions and λ ladder for the limit checks.
pub const LIMIT_LAMBDAS: [f64; 3] = [0.4, 0.2, 0.1];

/// Limit checks on unit Gaussians: monotone decay with per-halving ratio
/// ≤ 0.5, final relative error ≤ 5e-2, and the causal half-ratio for even h.
pub fn run_limit_suite() -> Result<SuiteReport> {
    let f = TestFunction::gaussian(0.0, 1.0);
    let plain = check_delta_limit(&f, &f, &f, true, &LIMIT_LAMBDAS)?;
    let causal = check_causal_delta_limit(&f, &f, &f, &LIMIT_LAMBDAS)?;
    let worst_ratio = |r: &super::LimitCheckReport| r.ratios().into_iter().fold(0.0, f64::max);
    let half = causal_ratio(&plain, &causal)?;
    let odd = TestFunction::new(0.0, 1.0, vec![0.0, 1.0])?;
    let odd_report = check_causal_delta_limit(&f, &f, &odd, &LIMIT_LAMBDAS)?;
    let mismatch = check_delta_limit(&f, &f, &f, false, &LIMIT_LAMBDAS)?;
    Ok(SuiteReport::from_checks(vec![
        CheckResult::new("limit_causal_decay_ratio", worst_ratio(&causal), 0.5),
        CheckResult::new("limit_causal_final_error", causal.final_relative_error(), 5e-2),
        CheckResult::new("limit_causal_half_ratio", (half - 0.5).norm(), 1e-3),
        CheckResult::new("limit_causal_odd_final_error", odd_report.final_relative_error(), 5e-2),
        CheckResult::new("limit_delta_decay_ratio", worst_ratio(&plain), 0.5),
        CheckResult::new("limit_delta_final_error", plain.final_relative_error(), 5e-2),
        CheckResult::new("limit_delta_mismatch_final_error", mismatch.final_relative_error(), 1e-6),
    ]))
}
