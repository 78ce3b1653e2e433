//! Scattering blocks T^ε_{ω,ω′}(E), the columns of (1 + T_ε)⁻¹ and the
//! coefficients R^{ε₁,ε₂}_{ω,ω′}(E).
//!
//! Every block of (1 + T_ε)⁻¹ in column ω′ has definite transfer ω − ω′, so
//! only rows ω ∈ ω′ + B can be nonzero and the linear algebra is done on that
//! finite index set.

pub mod series;
pub mod dyson;

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::Channel;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, identity, zeros, CMat, I};
use crate::model::Model;

pub use series::{series_partial_sums, series_term, PerturbativeSeries};
pub use dyson::{closed_form_contraction, dyson_oracle, richardson_eta, DysonGrid};

/// Largest acceptable 1-norm condition estimate for the direct solve.
pub const MAX_CONDITION: f64 = 1e12;

/// One of the four channel pairs (ε₁, ε₂).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pair {
    P00,
    P01,
    P10,
    P11,
}

impl Pair {
    pub const ALL: [Pair; 4] = [Pair::P00, Pair::P01, Pair::P10, Pair::P11];

    pub fn new(e1: Channel, e2: Channel) -> Pair {
        match (e1, e2) {
            (Channel::Zero, Channel::Zero) => Pair::P00,
            (Channel::Zero, Channel::One) => Pair::P01,
            (Channel::One, Channel::Zero) => Pair::P10,
            (Channel::One, Channel::One) => Pair::P11,
        }
    }

    pub fn channels(self) -> (Channel, Channel) {
        match self {
            Pair::P00 => (Channel::Zero, Channel::Zero),
            Pair::P01 => (Channel::Zero, Channel::One),
            Pair::P10 => (Channel::One, Channel::Zero),
            Pair::P11 => (Channel::One, Channel::One),
        }
    }

    pub fn is_diagonal(self) -> bool {
        matches!(self, Pair::P00 | Pair::P11)
    }

    pub fn label(self) -> &'static str {
        match self {
            Pair::P00 => "00",
            Pair::P01 => "01",
            Pair::P10 => "10",
            Pair::P11 => "11",
        }
    }

    pub fn parse(s: &str) -> Result<Pair> {
        Pair::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::argument(format!("unknown channel pair `{s}`")))
    }
}

fn mul_opt(a: Option<&CMat>, b: Option<&CMat>) -> Option<CMat> {
    Some(a? * b?)
}

/// T^ε_{ω,ω′}(E). Only ω″ that put both D subscripts in the Bohr set contribute.
pub fn t_kernel(model: &Model, eps: Channel, w: f64, wp: f64, e: f64) -> Result<CMat> {
    let sp = &model.spectral;
    let bath = &model.bath;
    let mut out = zeros(sp.dim());
    match eps {
        Channel::Zero => {
            // ω″ = b − ω: γ₀(E+ω) γ₁(E−b+ω) D_b (D_{b−ω+ω′})†
            let g0 = bath.gamma(Channel::Zero, e + w)?;
            if g0 == Complex64::new(0.0, 0.0) {
                return Ok(out);
            }
            for &b in &sp.bohr_set {
                if let Some(p) = mul_opt(sp.d(b), sp.d_dag(b - w + wp)) {
                    out += p * (g0 * bath.gamma(Channel::One, e - b + w)?);
                }
            }
        }
        Channel::One => {
            // ω″ = b + ω: γ₁(E+ω) γ₀(E+b+ω) (D_b)† D_{b+ω−ω′}
            let g1 = bath.gamma(Channel::One, e + w)?;
            if g1 == Complex64::new(0.0, 0.0) {
                return Ok(out);
            }
            for &b in &sp.bohr_set {
                if let Some(p) = mul_opt(sp.d_dag(b), sp.d(b + w - wp)) {
                    out += p * (g1 * bath.gamma(Channel::Zero, e + b + w)?);
                }
            }
        }
    }
    Ok(out)
}

/// The column ω′ of (1 + T_ε)⁻¹(E), indexed by `omegas`.
#[derive(Clone, Debug)]
pub struct BlockColumn {
    pub epsilon: Channel,
    pub omega_prime: f64,
    pub energy: f64,
    pub omegas: Vec<f64>,
    pub blocks: Vec<CMat>,
}

impl BlockColumn {
    /// Block at row ω, or `None` if ω is outside the index set.
    pub fn block(&self, w: f64, tol: f64) -> Option<&CMat> {
        self.omegas
            .iter()
            .position(|x| (x - w).abs() <= tol)
            .map(|k| &self.blocks[k])
    }

    fn unit(eps: Channel, wp: f64, e: f64, omegas: Vec<f64>, dim: usize, tol: f64) -> Self {
        let blocks = omegas
            .iter()
            .map(|x| if (x - wp).abs() <= tol { identity(dim) } else { zeros(dim) })
            .collect();
        BlockColumn { epsilon: eps, omega_prime: wp, energy: e, omegas, blocks }
    }
}

/// The dense block matrix (1 + T_ε) restricted to an index set.
pub fn one_plus_t_matrix(model: &Model, eps: Channel, omegas: &[f64], e: f64) -> Result<CMat> {
    let d = model.dim();
    let n = omegas.len();
    let mut m = identity(n * d);
    for (i, &wi) in omegas.iter().enumerate() {
        for (j, &wj) in omegas.iter().enumerate() {
            let t = t_kernel(model, eps, wi, wj, e)?;
            let mut blk = m.view_mut((i * d, j * d), (d, d));
            blk += &t;
        }
    }
    Ok(m)
}

fn one_norm(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn split_blocks(x: &CMat, d: usize) -> Vec<CMat> {
    (0..x.nrows() / d)
        .map(|i| x.view((i * d, 0), (d, d)).into_owned())
        .collect()
}

/// Direct solve of (1 + T_ε) X = δ_{·,ω′} on an explicit index set.
pub fn solve_on_index_set(
    model: &Model,
    eps: Channel,
    wp: f64,
    e: f64,
    omegas: &[f64],
) -> Result<BlockColumn> {
    let d = model.dim();
    let tol = model.spectral.match_tolerance();
    let col = omegas
        .iter()
        .position(|x| (x - wp).abs() <= tol)
        .ok_or_else(|| Error::argument(format!("index set does not contain ω′ = {wp}")))?;
    let m = one_plus_t_matrix(model, eps, omegas, e)?;
    let lu = m.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| {
        Error::numeric(format!("1 + T_{} is singular at E = {e}, ω′ = {wp}", eps.index()))
    })?;
    let kappa = one_norm(&m) * one_norm(&inv);
    if !kappa.is_finite() || kappa > MAX_CONDITION {
        return Err(Error::numeric(format!(
            "1 + T_{} is ill-conditioned at E = {e}, ω′ = {wp}: condition estimate {kappa:e}",
            eps.index()
        )));
    }
    let x = inv.columns(col * d, d).into_owned();
    Ok(BlockColumn {
        epsilon: eps,
        omega_prime: wp,
        energy: e,
        omegas: omegas.to_vec(),
        blocks: split_blocks(&x, d),
    })
}

/// Column ω′ of (1 + T_ε)⁻¹(E) on I(ω′) = ω′ + B.
pub fn solve_one_plus_t(model: &Model, eps: Channel, wp: f64, e: f64) -> Result<BlockColumn> {
    solve_on_index_set(model, eps, wp, e, &model.spectral.shifted(wp))
}

/// {ω′ + b₁ + b₂}, deduplicated; used to confirm the restriction is exact.
pub fn enlarged_index_set(model: &Model, wp: f64) -> Vec<f64> {
    let sp = &model.spectral;
    let tol = sp.match_tolerance();
    let mut v: Vec<f64> = Vec::new();
    for &b1 in &sp.bohr_set {
        for &b2 in &sp.bohr_set {
            v.push(wp + b1 + b2);
        }
    }
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // Keep ω′ + b exactly as in the base index set.
    for x in v.iter_mut() {
        for &b in &sp.bohr_set {
            if (*x - (wp + b)).abs() <= tol {
                *x = wp + b;
            }
        }
    }
    v
}

/// Result of summing the Neumann series for one column.
#[derive(Clone, Debug)]
pub struct NeumannColumn {
    pub column: BlockColumn,
    /// Highest power of T whose term exceeded the tolerance.
    pub order: usize,
    /// Frobenius norm of the last term added.
    pub last_increment: f64,
    pub converged: bool,
    /// Set when the increments failed to decrease over the last five orders.
    pub diverging: bool,
}

/// Σ_n (−T_ε)ⁿ applied to the unit column ω′, truncated when a term drops
/// below `tol` or `max_order` is reached.
pub fn neumann_inverse(
    model: &Model,
    eps: Channel,
    wp: f64,
    e: f64,
    max_order: usize,
    tol: f64,
) -> Result<NeumannColumn> {
    let d = model.dim();
    let sp = &model.spectral;
    let omegas = sp.shifted(wp);
    let n = omegas.len();
    let mut kernel: Vec<Vec<CMat>> = Vec::with_capacity(n);
    for &wi in &omegas {
        let row = omegas
            .iter()
            .map(|&wj| t_kernel(model, eps, wi, wj, e))
            .collect::<Result<Vec<_>>>()?;
        kernel.push(row);
    }
    let mut acc = BlockColumn::unit(eps, wp, e, omegas, d, sp.match_tolerance());
    let mut term = acc.blocks.clone();
    let mut history = vec![frobenius_all(&term)];
    let mut order = 0;
    let mut converged = history[0] < tol;
    let mut diverging = false;
    while !converged && order < max_order {
        let next: Vec<CMat> = (0..n)
            .map(|i| {
                (0..n).fold(zeros(d), |s, j| s - &kernel[i][j] * &term[j])
            })
            .collect();
        term = next;
        order += 1;
        let inc = frobenius_all(&term);
        history.push(inc);
        if !inc.is_finite() || inc > 1e50 {
            diverging = true;
            break;
        }
        for (a, t) in acc.blocks.iter_mut().zip(&term) {
            *a += t;
        }
        if inc < tol {
            converged = true;
            order -= 1;
            break;
        }
        if history.len() > 5 {
            let tail = &history[history.len() - 6..];
            if tail.windows(2).all(|w| w[1] >= w[0]) {
                diverging = true;
            }
        }
    }
    Ok(NeumannColumn {
        column: acc,
        order,
        last_increment: *history.last().expect("at least one term"),
        converged,
        diverging,
    })
}

fn frobenius_all(blocks: &[CMat]) -> f64 {
    blocks.iter().map(|b| frobenius(b).powi(2)).sum::<f64>().sqrt()
}

/// Power-iteration estimate of the spectral radius of T_ε on I(ω′).
pub fn block_spectral_radius(model: &Model, eps: Channel, wp: f64, e: f64) -> Result<f64> {
    let omegas = model.spectral.shifted(wp);
    let t = one_plus_t_matrix(model, eps, &omegas, e)? - identity(omegas.len() * model.dim());
    let n = t.nrows();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.3));
    let mut estimate = 0.0;
    for _ in 0..500 {
        let w = &t * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        estimate = norm / v.norm();
        v = w.unscale(norm);
    }
    Ok(estimate)
}

/// Columns of (1 + T_ε)⁻¹ at one energy, computed on demand and cached.
pub struct EnergySlice<'a> {
    model: &'a Model,
    energy: f64,
    columns: HashMap<(Channel, i64), BlockColumn>,
}

impl<'a> EnergySlice<'a> {
    pub fn new(model: &'a Model, energy: f64) -> Self {
        EnergySlice { model, energy, columns: HashMap::new() }
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn column(&mut self, eps: Channel, wp: f64) -> Result<&BlockColumn> {
        let key = (eps, (wp * 1e9).round() as i64);
        if !self.columns.contains_key(&key) {
            let c = solve_one_plus_t(self.model, eps, wp, self.energy)?;
            self.columns.insert(key, c);
        }
        Ok(&self.columns[&key])
    }

    /// R^{ε₁,ε₂}_{ω,ω′}(E).
    pub fn r(&mut self, e1: Channel, e2: Channel, w: f64, wp: f64) -> Result<CMat> {
        let model = self.model;
        let sp = &model.spectral;
        let d = model.dim();
        let e = self.energy;
        let mut out = zeros(d);
        match (e1, e2) {
            (Channel::Zero, Channel::One) => {
                let col = self.column(Channel::One, wp)?;
                for (w1, x) in col.omegas.iter().zip(&col.blocks) {
                    if let Some(dm) = sp.d(w - w1) {
                        out += dm * x;
                    }
                }
                out *= -I;
            }
            (Channel::One, Channel::Zero) => {
                let col = self.column(Channel::Zero, wp)?;
                for (w1, x) in col.omegas.iter().zip(&col.blocks) {
                    if let Some(dm) = sp.d_dag(w1 - w) {
                        out += dm * x;
                    }
                }
                out *= -I;
            }
            (Channel::Zero, Channel::Zero) => {
                for &b in &sp.bohr_set {
                    let w2 = wp + b;
                    let Some(tail) = sp.d_dag(wp - w2) else { continue };
                    let g = model.bath.gamma(Channel::One, e + w2)?;
                    let col = self.column(Channel::One, w2)?;
                    let mut inner = zeros(d);
                    for (w1, x) in col.omegas.iter().zip(&col.blocks) {
                        if let Some(dm) = sp.d(w - w1) {
                            inner += dm * x;
                        }
                    }
                    out -= inner * tail * g;
                }
            }
            (Channel::One, Channel::One) => {
                for &b in &sp.bohr_set {
                    let w2 = wp + b;
                    let Some(tail) = sp.d(w2 - wp) else { continue };
                    let g = model.bath.gamma(Channel::Zero, e + w2)?;
                    let col = self.column(Channel::Zero, w2)?;
                    let mut inner = zeros(d);
                    for (w1, x) in col.omegas.iter().zip(&col.blocks) {
                        if let Some(dm) = sp.d_dag(w1 - w) {
                            inner += dm * x;
                        }
                    }
                    out -= inner * tail * g;
                }
            }
        }
        Ok(out)
    }

    /// t^{ε₁ε₂}(E) = Σ_ω R^{ε₁,ε₂}_{ω,0}(E), the energy components of the
    /// one-particle T-operator.
    pub fn t_component(&mut self, pair: Pair) -> Result<CMat> {
        let (e1, e2) = pair.channels();
        let mut out = zeros(self.model.dim());
        for w in self.model.spectral.bohr_set.clone() {
            out += self.r(e1, e2, w, 0.0)?;
        }
        Ok(out)
    }
}

/// R^{ε₁,ε₂}_{ω,ω′}(E) for a single argument set.
pub fn r_coefficient(model: &Model, e1: Channel, e2: Channel, w: f64, wp: f64, e: f64) -> Result<CMat> {
    EnergySlice::new(model, e).r(e1, e2, w, wp)
}

/// The four components t^{ε₁ε₂}(E) in the order 00, 01, 10, 11.
pub fn t_operator_components(model: &Model, e: f64) -> Result<[CMat; 4]> {
    let mut slice = EnergySlice::new(model, e);
    Ok([
        slice.t_component(Pair::P00)?,
        slice.t_component(Pair::P01)?,
        slice.t_component(Pair::P10)?,
        slice.t_component(Pair::P11)?,
    ])
}

/// Residual max_ω ‖Σ_{ω₁}(1 + T)_{ω,ω₁} X_{ω₁} − δ_{ω,ω′}‖_F of a column.
pub fn column_residual(model: &Model, col: &BlockColumn) -> Result<f64> {
    let d = model.dim();
    let m = one_plus_t_matrix(model, col.epsilon, &col.omegas, col.energy)?;
    let mut x = DMatrix::zeros(col.omegas.len() * d, d);
    for (i, b) in col.blocks.iter().enumerate() {
        x.view_mut((i * d, 0), (d, d)).copy_from(b);
    }
    let r = m * x;
    let tol = model.spectral.match_tolerance();
    let mut worst: f64 = 0.0;
    for (i, &w) in col.omegas.iter().enumerate() {
        let mut blk = r.view((i * d, 0), (d, d)).into_owned();
        if (w - col.omega_prime).abs() <= tol {
            blk -= identity(d);
        }
        worst = worst.max(frobenius(&blk));
    }
    Ok(worst)
}
