//! Time-domain evaluation of the Dyson terms ⟨u⊗g_a, T_n v⊗g_b⟩ by nested
//! quadrature over ordered times, used as an oracle for the closed forms.

use nalgebra::{DVector, RowDVector};
use num_complex::Complex64;

use super::{series_term, Pair};
use crate::bath::Channel;
use crate::error::{Error, Result};
use crate::linalg::{zeros, CMat};
use crate::model::Model;
use crate::quadrature::{self, gregory_weights, CompositeRule};

/// Uniform grid for each gap between consecutive times.
#[derive(Clone, Copy, Debug)]
pub struct DysonGrid {
    /// Upper limit of each gap.
    pub horizon: f64,
    pub step: f64,
}

impl Default for DysonGrid {
    fn default() -> Self {
        DysonGrid { horizon: 60.0, step: 0.05 }
    }
}

/// c_ε(τ) = ⟨g_ε, S_τ g_ε⟩ = ∫ρ_ε(E) e^{iτE} dE at τ = k·h, k = 0..=kmax.
fn correlation_table(model: &Model, ch: Channel, h: f64, kmax: usize) -> Vec<Complex64> {
    let profile = model.bath.spec().density(ch);
    let (a, b) = profile.support();
    let panels = ((b - a) * (kmax as f64 * h) / 2.0).ceil().max(16.0) as usize;
    let rule = CompositeRule::new(a, b, panels, 12);
    let rho: Vec<f64> = rule.nodes.iter().map(|&e| profile.eval(e)).collect();
    (0..=kmax)
        .map(|k| {
            let tau = k as f64 * h;
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .zip(&rho)
                .fold(Complex64::new(0.0, 0.0), |acc, ((&e, &w), &r)| {
                    acc + Complex64::from_polar(w * r, tau * e)
                })
        })
        .collect()
}

struct Chain {
    /// Reservoir channel entering step j; step 0 acts first, at the largest time.
    channels: Vec<Channel>,
    corr: [Vec<Complex64>; 2],
    /// D(−t) = Σ_ω e^{itω} D_ω at t = k·h.
    d_minus: Vec<CMat>,
    weights: Vec<f64>,
    eta: f64,
    h: f64,
    v: DVector<Complex64>,
}

impl Chain {
    fn corr(&self, ch: Channel, k: isize) -> Complex64 {
        let c = self.corr[ch.index()][k.unsigned_abs()];
        if k < 0 {
            c.conj()
        } else {
            c
        }
    }

    /// Operator of step j at time index k: D(−t) after a channel-1 vector,
    /// D(−t)† after a channel-0 vector.
    fn op(&self, j: usize, k: usize) -> CMat {
        match self.channels[j] {
            Channel::One => self.d_minus[k].clone(),
            Channel::Zero => self.d_minus[k].adjoint(),
        }
    }

    /// `row` holds u† times the operators of steps j+1.. (the later ones),
    /// the latest of which sits at time index `k_next`.
    fn descend(&self, j: usize, row: &RowDVector<Complex64>, k_next: usize) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (g, &w) in self.weights.iter().enumerate() {
            let k = k_next + g;
            let factor = self.corr(self.channels[j + 1], -(g as isize))
                * (w * (-self.eta * k as f64 * self.h).exp());
            let r = row * self.op(j, k) * factor;
            total += if j == 0 {
                self.corr(self.channels[0], k as isize) * (r * &self.v)[(0, 0)]
            } else {
                self.descend(j - 1, &r, k)
            };
        }
        total
    }
}

/// ⟨u⊗g_a, T_n (v⊗g_b)⟩ with time damping e^{−ηΣt_i}, for (a, b) = `pair`.
/// The channel sequence alternates, so the element vanishes unless the
/// parity of `n` matches the pair.
pub fn dyson_oracle(
    model: &Model,
    pair: Pair,
    n: usize,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
    eta: f64,
    grid: DysonGrid,
) -> Result<Complex64> {
    if !(eta > 0.0) {
        return Err(Error::argument(format!("damping η must be positive, got {eta}")));
    }
    if n == 0 {
        return Err(Error::argument("Dyson order must be at least 1"));
    }
    let dim = model.dim();
    if u.len() != dim || v.len() != dim {
        return Err(Error::argument(format!("vectors must have length {dim}")));
    }
    let (a, b) = pair.channels();
    let mut channels = Vec::with_capacity(n + 1);
    let mut x = b;
    for _ in 0..=n {
        channels.push(x);
        x = x.other();
    }
    if channels[n] != a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = grid.step;
    let points = (grid.horizon / h).round() as usize + 1;
    let kmax = (n.max(2) - 1) * (points - 1);
    let corr = [
        correlation_table(model, Channel::Zero, h, kmax),
        correlation_table(model, Channel::One, h, kmax),
    ];
    let sp = &model.spectral;
    let d_minus: Vec<CMat> = (0..=kmax)
        .map(|k| {
            let t = k as f64 * h;
            sp.bohr_set
                .iter()
                .zip(&sp.d_blocks)
                .fold(zeros(dim), |acc, (&w, dw)| acc + dw * Complex64::from_polar(1.0, t * w))
        })
        .collect();
    let chain = Chain {
        channels,
        corr,
        d_minus,
        weights: gregory_weights(points, h),
        eta,
        h,
        v: v.clone(),
    };
    // The last operator acts at time 0.
    let row = u.adjoint() * chain.op(n - 1, 0);
    let value = if n == 1 {
        chain.corr(chain.channels[0], 0) * (row * &chain.v)[(0, 0)]
    } else {
        chain.descend(n - 2, &row, 0)
    };
    let prefactor = Complex64::new(0.0, -1.0).powi((n - 1) as i32) * model.bath.norm_sqr(a);
    Ok(value * prefactor)
}

/// Richardson extrapolation to η → 0 from values at η, 2η and 4η.
pub fn richardson_eta(v1: Complex64, v2: Complex64, v4: Complex64) -> Complex64 {
    (v1 * 8.0 - v2 * 6.0 + v4) / 3.0
}

/// i‖g_a‖² ∫dE u†T^{ab}_n(E)v ρ_b(E) from the closed-form terms.
pub fn closed_form_contraction(
    model: &Model,
    pair: Pair,
    n: usize,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
) -> Result<Complex64> {
    let (a, b) = pair.channels();
    let profile = model.bath.spec().density(b).clone();
    let (lo, hi) = profile.support();
    let active = model.spectral.active_frequencies();
    let mut shifts = vec![0.0];
    for _ in 0..n {
        let mut next = shifts.clone();
        for s in &shifts {
            for w in &active {
                next.push(s + w);
                next.push(s - w);
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        shifts = next;
    }
    let mut edges = Vec::new();
    for ch in Channel::ALL {
        edges.extend(model.bath.spec().density(ch).breakpoints());
    }
    let breaks: Vec<f64> = edges
        .iter()
        .flat_map(|p| shifts.iter().map(move |s| p - s))
        .collect();
    let mut failure = None;
    let integral = quadrature::integrate(
        |e| {
            let rho = profile.eval(e);
            if rho == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            match series_term(model, pair, n, e) {
                Ok(t) => (u.adjoint() * t * v)[(0, 0)] * rho,
                Err(err) => {
                    failure.get_or_insert(err);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        lo,
        hi,
        &breaks,
        1e-11,
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(Complex64::new(0.0, model.bath.norm_sqr(a)) * integral)
}
