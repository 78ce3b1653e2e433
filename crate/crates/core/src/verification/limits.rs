//! The scalar kernels behind the weak-coupling limits:
//! λ⁻² e^{i(t′−t)X/λ²} e^{it′(ω−ω′)/λ²} → 2π δ_{ωω′} δ(t′−t) δ(X), and its
//! causal version on t′ < t, paired with Gaussian test functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{self, CompositeRule};

/// Gaussian envelopes extend this many widths from the centre before truncation.
const REACH: f64 = 12.0;
const ORDER: usize = 12;

/// p((x−c)/s)·exp(−(x−c)²/2s²) with p(y) = Σ_k a_k y^k.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub center: f64,
    pub width: f64,
    pub coeffs: Vec<f64>,
}

impl TestFunction {
    pub fn gaussian(center: f64, width: f64) -> Self {
        TestFunction { center, width, coeffs: vec![1.0] }
    }

    pub fn new(center: f64, width: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) || !center.is_finite() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::argument("test function needs a positive width and finite coefficients"));
        }
        Ok(TestFunction { center, width, coeffs })
    }

    fn poly(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * y + a)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.width;
        if y.abs() > REACH {
            return 0.0;
        }
        self.poly(y) * (-0.5 * y * y).exp()
    }

    /// Effective support [c − 12s, c + 12s].
    pub fn support(&self) -> (f64, f64) {
        (self.center - REACH * self.width, self.center + REACH * self.width)
    }

    /// ∫ h(x) e^{iux} dx in closed form.
    pub fn fourier(&self, u: f64) -> Complex64 {
        let b = u * self.width;
        let z = Complex64::new(0.0, b);
        // E[(z + Z)^k] for a standard normal Z, by the binomial expansion.
        let mut total = Complex64::new(0.0, 0.0);
        for (k, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let mut moment = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            let mut normal_moment = 1.0; // E[Z^m], m even
            for m in 0..=k {
                if m > 0 {
                    binom = binom * (k - m + 1) as f64 / m as f64;
                }
                if m % 2 == 0 {
                    if m > 0 {
                        normal_moment *= (m - 1) as f64;
                    }
                    moment += z.powu((k - m) as u32) * (binom * normal_moment);
                }
            }
            total += moment * a;
        }
        let envelope = self.width * (2.0 * PI).sqrt() * (-0.5 * b * b).exp();
        total * Complex64::from_polar(envelope, u * self.center)
    }

    /// PV ∫ h(x)/x dx, folded onto x > 0.
    pub fn principal_value(&self) -> Result<f64> {
        let top = self.center.abs() + REACH * self.width;
        let eps = 1e-7 * self.width;
        let h0 = self.eval(0.0);
        let slope = (self.eval(eps) - self.eval(-eps)) / (2.0 * eps);
        quadrature::integrate(
            |x| {
                if x < eps {
                    2.0 * slope
                } else {
                    (self.eval(x) - self.eval(-x)) / x
                }
            },
            0.0,
            top,
            &[self.center.abs()],
            1e-13 * (1.0 + h0.abs()),
        )
    }
}

/// Per-λ deviations of the pairing from its analytic limit.
#[derive(Clone, Debug, Serialize)]
pub struct LimitCheckReport {
    pub lambdas: Vec<f64>,
    #[serde(serialize_with = "crate::io::complex_list")]
    pub values: Vec<Complex64>,
    pub errors: Vec<f64>,
    #[serde(serialize_with = "crate::io::complex_pair")]
    pub limit_value: Complex64,
    /// Errors strictly decreasing along `lambdas`.
    pub monotone: bool,
}

impl LimitCheckReport {
    /// Successive ratios errors[k+1]/errors[k].
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Last error relative to |limit|, or absolute when the limit vanishes.
    pub fn final_relative_error(&self) -> f64 {
        let last = *self.errors.last().unwrap_or(&0.0);
        let scale = self.limit_value.norm();
        if scale > 0.0 {
            last / scale
        } else {
            last
        }
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::argument("need at least one λ"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::argument("λ values must be positive and finite"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::argument("λ values must be strictly decreasing"));
    }
    Ok(())
}

/// ∫dt f(t) e^{itΔ/λ²} ∫du g(t+λ²u) ĥ(u) e^{iuΔ}, u over ℝ or u < 0.
fn pairing(
    f: &TestFunction,
    g: &TestFunction,
    h: &TestFunction,
    lambda: f64,
    detuning: f64,
    causal: bool,
    refine: usize,
) -> Complex64 {
    let l2 = lambda * lambda;
    let (ta, tb) = f.support();
    let u_max = REACH / h.width + detuning.abs();
    let (ua, ub) = (-u_max, if causal { 0.0 } else { u_max });
    let t_panels = refine * (24 + ((tb - ta) * detuning.abs() / l2 / 3.0).ceil() as usize);
    let u_panels = refine * (24 + ((ub - ua) * (h.center.abs() + detuning.abs()) / 3.0).ceil() as usize);
    let trule = CompositeRule::new(ta, tb, t_panels, ORDER);
    let urule = CompositeRule::new(ua, ub, u_panels, ORDER);
    let kernel: Vec<Complex64> = urule
        .nodes
        .iter()
        .zip(&urule.weights)
        .map(|(&u, &w)| h.fourier(u) * Complex64::from_polar(w, u * detuning))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for (&t, &wt) in trule.nodes.iter().zip(&trule.weights) {
        let ft = f.eval(t);
        if ft == 0.0 {
            continue;
        }
        let inner = urule
            .nodes
            .iter()
            .zip(&kernel)
            .fold(Complex64::new(0.0, 0.0), |acc, (&u, &k)| acc + k * g.eval(t + l2 * u));
        total += inner * Complex64::from_polar(wt * ft, t * detuning / l2);
    }
    total
}

/// Pairing with a refinement check: the rule is doubled and the two results
/// must agree.
fn converged_pairing(
    f: &TestFunction,
    g: &TestFunction,
    h: &TestFunction,
    lambda: f64,
    detuning: f64,
    causal: bool,
) -> Result<Complex64> {
    let coarse = pairing(f, g, h, lambda, detuning, causal, 1);
    let fine = pairing(f, g, h, lambda, detuning, causal, 2);
    let scale = fine.norm().max(f.width * g.width * h.width * 1e-3);
    if (fine - coarse).norm() > 1e-9 * scale {
        return Err(Error::numeric(format!(
            "limit quadrature not converged at λ = {lambda}: {coarse} vs {fine}"
        )));
    }
    Ok(fine)
}

fn overlap(f: &TestFunction, g: &TestFunction) -> Result<f64> {
    let (a, b) = f.support();
    quadrature::integrate(|t| f.eval(t) * g.eval(t), a, b, &[f.center, g.center], 1e-14)
}

fn report(lambdas: &[f64], values: Vec<Complex64>, limit: Complex64) -> LimitCheckReport {
    let errors: Vec<f64> = values.iter().map(|v| (v - limit).norm()).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    LimitCheckReport { lambdas: lambdas.to_vec(), values, errors, limit_value: limit, monotone }
}

/// Non-causal pairing against 2π h(0) ∫fg, or 0 when the frequencies differ
/// (then a unit detuning ω − ω′ = 1 is used).
pub fn check_delta_limit(
    f: &TestFunction,
    g: &TestFunction,
    h: &TestFunction,
    omega_match: bool,
    lambdas: &[f64],
) -> Result<LimitCheckReport> {
    check_lambdas(lambdas)?;
    let detuning = if omega_match { 0.0 } else { 1.0 };
    let values = lambdas
        .iter()
        .map(|&l| converged_pairing(f, g, h, l, detuning, false))
        .collect::<Result<Vec<_>>>()?;
    let limit = if omega_match {
        Complex64::new(2.0 * PI * h.eval(0.0) * overlap(f, g)?, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(report(lambdas, values, limit))
}

/// Pairing restricted to t′ < t against ∫fg·[π h(0) − i PV∫h/X].
pub fn check_causal_delta_limit(
    f: &TestFunction,
    g: &TestFunction,
    h: &TestFunction,
    lambdas: &[f64],
) -> Result<LimitCheckReport> {
    check_lambdas(lambdas)?;
    let values = lambdas
        .iter()
        .map(|&l| converged_pairing(f, g, h, l, 0.0, true))
        .collect::<Result<Vec<_>>>()?;
    let limit = Complex64::new(PI * h.eval(0.0), -h.principal_value()?) * overlap(f, g)?;
    Ok(report(lambdas, values, limit))
}

/// Ratio of causal to non-causal pairings, extrapolated in λ² from the last
/// two λ values of each report.
pub fn causal_ratio(noncausal: &LimitCheckReport, causal: &LimitCheckReport) -> Result<Complex64> {
    let n = noncausal.values.len();
    if n < 2 || causal.values.len() != n || causal.lambdas != noncausal.lambdas {
        return Err(Error::argument("ratio needs two reports on the same λ list, at least two values"));
    }
    let r = |k: usize| causal.values[k] / noncausal.values[k];
    let (l1, l2) = (noncausal.lambdas[n - 2].powi(2), noncausal.lambdas[n - 1].powi(2));
    Ok((r(n - 1) * l1 - r(n - 2) * l2) / (l1 - l2))
}
