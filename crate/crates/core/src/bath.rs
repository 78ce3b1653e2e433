//! Reservoir description through the two energy densities ρ₀, ρ₁ of the form
//! factors, and the scalar functions built from them: γ_ε(E), μ_ε⁻¹(E) and the
//! K_ω inner product.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance of the principal-value quadrature inside γ.
pub const GAMMA_TOLERANCE: f64 = 1e-9;

/// Which of the two form factors g₀, g₁.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Zero,
    One,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Zero, Channel::One];

    pub fn index(self) -> usize {
        match self {
            Channel::Zero => 0,
            Channel::One => 1,
        }
    }

    pub fn other(self) -> Channel {
        match self {
            Channel::Zero => Channel::One,
            Channel::One => Channel::Zero,
        }
    }

    pub fn from_index(i: usize) -> Result<Channel> {
        match i {
            0 => Ok(Channel::Zero),
            1 => Ok(Channel::One),
            _ => Err(Error::argument(format!("channel index must be 0 or 1, got {i}"))),
        }
    }
}

/// Energy density ρ(E) = ⟨g, P_E g⟩ of one form factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensityProfile {
    /// Constant `height` on [a, b].
    Rect { a: f64, b: f64, height: f64 },
    /// amplitude·(E − a)(b − E) on [a, b].
    Bump { a: f64, b: f64, amplitude: f64 },
    /// Linear interpolation through (energies[i], values[i]).
    Table { energies: Vec<f64>, values: Vec<f64> },
}

impl DensityProfile {
    pub fn support(&self) -> (f64, f64) {
        match self {
            DensityProfile::Rect { a, b, .. } | DensityProfile::Bump { a, b, .. } => (*a, *b),
            DensityProfile::Table { energies, .. } => (
                energies.first().copied().unwrap_or(0.0),
                energies.last().copied().unwrap_or(0.0),
            ),
        }
    }

    pub fn eval(&self, e: f64) -> f64 {
        match self {
            DensityProfile::Rect { a, b, height } => {
                if e >= *a && e <= *b {
                    *height
                } else {
                    0.0
                }
            }
            DensityProfile::Bump { a, b, amplitude } => {
                if e >= *a && e <= *b {
                    amplitude * (e - a) * (b - e)
                } else {
                    0.0
                }
            }
            DensityProfile::Table { energies, values } => {
                let (lo, hi) = self.support();
                if !(e >= lo && e <= hi) {
                    return 0.0;
                }
                let k = energies.partition_point(|&x| x <= e);
                if k == 0 {
                    return values[0];
                }
                if k >= energies.len() {
                    return *values.last().unwrap();
                }
                let (x0, x1) = (energies[k - 1], energies[k]);
                let t = (e - x0) / (x1 - x0);
                values[k - 1] * (1.0 - t) + values[k] * t
            }
        }
    }

    /// Points where the profile is not smooth (support edges, table nodes).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            DensityProfile::Table { energies, .. } => energies.clone(),
            _ => {
                let (a, b) = self.support();
                vec![a, b]
            }
        }
    }

    /// Whether ρ jumps at the support edge `edge`.
    fn jumps_at(&self, edge: f64) -> bool {
        match self {
            DensityProfile::Rect { height, .. } => *height != 0.0,
            DensityProfile::Bump { .. } => false,
            DensityProfile::Table { .. } => self.eval(edge) != 0.0,
        }
    }

    /// ∫ρ(E) dE, exact for every profile kind.
    pub fn total_weight(&self) -> f64 {
        match self {
            DensityProfile::Rect { a, b, height } => height * (b - a),
            DensityProfile::Bump { a, b, amplitude } => amplitude * (b - a).powi(3) / 6.0,
            DensityProfile::Table { energies, values } => energies
                .windows(2)
                .zip(values.windows(2))
                .map(|(e, v)| 0.5 * (e[1] - e[0]) * (v[0] + v[1]))
                .sum(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let (a, b) = self.support();
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::validation(format!("{name}: support [{a}, {b}] must satisfy a < b")));
        }
        match self {
            DensityProfile::Rect { height, .. } if !(*height >= 0.0) => Err(Error::validation(
                format!("{name}: rect height {height} is negative"),
            )),
            DensityProfile::Bump { amplitude, .. } if !(*amplitude >= 0.0) => Err(
                Error::validation(format!("{name}: bump amplitude {amplitude} is negative")),
            ),
            DensityProfile::Table { energies, values } => {
                if energies.len() != values.len() || energies.len() < 2 {
                    return Err(Error::validation(format!(
                        "{name}: table needs matching energies/values with at least two entries"
                    )));
                }
                if energies.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::validation(format!(
                        "{name}: table energies must be strictly increasing"
                    )));
                }
                if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
                    return Err(Error::validation(format!(
                        "{name}: table value {v} is negative"
                    )));
                }
                if values[0] != 0.0 || *values.last().unwrap() != 0.0 {
                    return Err(Error::validation(format!(
                        "{name}: table values must vanish at both support endpoints"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Uniform energy grid carrying trapezoid weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl EnergyGrid {
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| self.min + i as f64 * h).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        quadrature::trapezoid_weights(self.points, self.spacing())
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.min <= lo && hi <= self.max
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BathSpec {
    /// ρ₀ and ρ₁, indexed by `Channel::index`.
    pub densities: [DensityProfile; 2],
    pub grid: EnergyGrid,
}

impl BathSpec {
    pub fn density(&self, ch: Channel) -> &DensityProfile {
        &self.densities[ch.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BathReport {
    pub supports: [(f64, f64); 2],
    /// Distance between the two supports (positive when disjoint).
    pub support_gap: f64,
    pub grid_covers_supports: bool,
}

/// Check nonnegativity, support disjointness and grid coverage.
pub fn validate_bath(spec: &BathSpec, beta: f64) -> Result<BathReport> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::validation(format!("beta must be a finite nonnegative number, got {beta}")));
    }
    spec.densities[0].validate("rho0")?;
    spec.densities[1].validate("rho1")?;
    let s0 = spec.densities[0].support();
    let s1 = spec.densities[1].support();
    let gap = (s1.0 - s0.1).max(s0.0 - s1.1);
    if !(gap > 0.0) {
        return Err(Error::validation(format!(
            "supports of rho0 {s0:?} and rho1 {s1:?} overlap: the form factors must have disjoint \
             energy supports so that <g0, S_t e^(-beta H1) g1> = 0 for all t"
        )));
    }
    let grid = &spec.grid;
    if grid.points < 16 || !(grid.min < grid.max) {
        return Err(Error::validation(format!(
            "energy grid needs min < max and at least 16 points, got [{}, {}] with {}",
            grid.min, grid.max, grid.points
        )));
    }
    let covers = grid.covers(s0.0, s0.1) && grid.covers(s1.0, s1.1);
    if !covers {
        return Err(Error::validation(format!(
            "energy grid [{}, {}] does not cover the supports {s0:?} and {s1:?}",
            grid.min, grid.max
        )));
    }
    Ok(BathReport {
        supports: [s0, s1],
        support_gap: gap,
        grid_covers_supports: covers,
    })
}

/// Rank-one reservoir operator |g_left⟩⟨g_right|.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankOne {
    pub left: Channel,
    pub right: Channel,
}

/// A bath bound to an inverse temperature, with a γ memo table.
#[derive(Debug)]
pub struct Bath {
    spec: BathSpec,
    beta: f64,
    memo: Mutex<HashMap<(Channel, i64), Complex64>>,
}

impl Clone for Bath {
    fn clone(&self) -> Self {
        Bath::new(self.spec.clone(), self.beta)
    }
}

fn memo_key(e: f64) -> i64 {
    (e * 1e12).round() as i64
}

impl Bath {
    pub fn new(spec: BathSpec, beta: f64) -> Self {
        Bath {
            spec,
            beta,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &BathSpec {
        &self.spec
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn density(&self, ch: Channel, e: f64) -> f64 {
        self.spec.density(ch).eval(e)
    }

    /// ‖g_ε‖² = ∫ρ_ε.
    pub fn norm_sqr(&self, ch: Channel) -> f64 {
        self.spec.density(ch).total_weight()
    }

    /// μ_ε⁻¹(E) = e^{−βE} ρ_ε(E).
    pub fn mu_inv(&self, ch: Channel, e: f64) -> f64 {
        let rho = self.density(ch, e);
        if rho == 0.0 {
            0.0
        } else {
            (-self.beta * e).exp() * rho
        }
    }

    /// γ_ε(E) = πρ_ε(E) + i·PV∫ρ_ε(E′)/(E − E′) dE′, memoized on E to 1e-12.
    pub fn gamma(&self, ch: Channel, e: f64) -> Result<Complex64> {
        let key = (ch, memo_key(e));
        if let Some(v) = self.memo.lock().expect("gamma memo poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.gamma_uncached(ch, e)?;
        self.memo.lock().expect("gamma memo poisoned").insert(key, v);
        Ok(v)
    }

    pub fn gamma_uncached(&self, ch: Channel, e: f64) -> Result<Complex64> {
        let profile = self.spec.density(ch);
        let (a, b) = profile.support();
        if (e == a || e == b) && profile.jumps_at(e) {
            return Err(Error::numeric(format!(
                "gamma_{}({e}) requested exactly at a discontinuous support edge of rho{}; \
                 the principal value diverges there, offset rect edges from the evaluation points",
                ch.index(),
                ch.index()
            )));
        }
        let rho_e = profile.eval(e);
        let mut breaks = profile.breakpoints();
        let pv = if e > a && e < b {
            breaks.push(e);
            let smooth = quadrature::integrate(
                |x| {
                    let d = e - x;
                    if d == 0.0 {
                        0.0
                    } else {
                        (profile.eval(x) - rho_e) / d
                    }
                },
                a,
                b,
                &breaks,
                GAMMA_TOLERANCE,
            )?;
            smooth + rho_e * ((e - a) / (e - b)).abs().ln()
        } else {
            quadrature::integrate(|x| profile.eval(x) / (e - x), a, b, &breaks, GAMMA_TOLERANCE)?
        };
        Ok(Complex64::new(PI * rho_e, pv))
    }

    /// ⟨X, Y⟩_ω = 2π∫dE Tr(e^{−βH₁} X* P_E Y P_{E−ω}) for rank-one X, Y.
    /// The integrand is piecewise smooth, so it is integrated adaptively
    /// between its breakpoints rather than on the grid.
    pub fn k_inner_product(&self, x: RankOne, y: RankOne, omega: f64) -> Complex64 {
        // X = |f⟩⟨u|, Y = |v⟩⟨w|: the trace is ⟨f,P_E v⟩⟨w,P_{E−ω}e^{−βH₁}u⟩.
        if x.left != y.left || x.right != y.right {
            return Complex64::new(0.0, 0.0);
        }
        let (f, u) = (x.left, x.right);
        let (fa, fb) = self.spec.density(f).support();
        let (ua, ub) = self.spec.density(u).support();
        let (lo, hi) = (fa.max(ua + omega), fb.min(ub + omega));
        if lo >= hi {
            return Complex64::new(0.0, 0.0);
        }
        let mut breaks = self.spec.density(f).breakpoints();
        breaks.extend(self.spec.density(u).breakpoints().iter().map(|b| b + omega));
        let sum = quadrature::integrate(
            |e| self.density(f, e) * self.mu_inv(u, e - omega),
            lo,
            hi,
            &breaks,
            1e-13,
        )
        .unwrap_or(f64::NAN);
        Complex64::new(2.0 * PI * sum, 0.0)
    }
}
