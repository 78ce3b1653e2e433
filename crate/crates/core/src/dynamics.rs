//! Master-equation integration and the quantum-jump unravelling of Θ₀*.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{dual_generator_matrix, GKSLGenerator};
use crate::linalg::{hermiticity_defect, min_hermitian_eigenvalue, operator_norm, trace, unvec, vec_of, CMat, I};

/// Trajectories per reduction block; fixed so results do not depend on threading.
const BLOCK: usize = 64;

#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
}

fn check_density(rho: &CMat, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::validation(format!(
            "initial state is {}x{}, expected {dim}x{dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if hermiticity_defect(rho) > 1e-10 {
        return Err(Error::validation("initial state is not Hermitian"));
    }
    let tr = trace(rho);
    if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::validation(format!("initial state has trace {tr}, expected 1")));
    }
    let lo = min_hermitian_eigenvalue(rho);
    if lo < -1e-10 {
        return Err(Error::validation(format!("initial state has negative eigenvalue {lo:e}")));
    }
    Ok(())
}

fn step_count(t_max: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::argument(format!("time step must be positive, got {dt}")));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::argument(format!("final time must be nonnegative, got {t_max}")));
    }
    Ok((t_max / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Classical RK4 for vec(ρ)′ = L vec(ρ), storing every step.
pub fn evolve_master(gen: &GKSLGenerator, rho0: &CMat, t_max: f64, dt: f64) -> Result<DensityTrajectory> {
    check_density(rho0, gen.dim)?;
    let steps = step_count(t_max, dt)?;
    let l = dual_generator_matrix(gen);
    let norm = operator_norm(&l);
    if dt * norm >= 0.1 {
        return Err(Error::argument(format!(
            "time step {dt} too large for generator norm {norm:.3e}; need dt < {:.3e}",
            0.1 / norm
        )));
    }
    let d = gen.dim;
    let mut v = vec_of(rho0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    for k in 1..=steps {
        let k1 = &l * &v;
        let k2 = &l * (&v + &k1 * half);
        let k3 = &l * (&v + &k2 * half);
        let k4 = &l * (&v + &k3 * full);
        let two = Complex64::new(2.0, 0.0);
        v += (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0);
        let rho = unvec(&v, d);
        let drift = (trace(&rho) - Complex64::new(1.0, 0.0)).norm();
        if drift > 1e-6 {
            return Err(Error::numeric(format!(
                "trace drifted by {drift:e} at t = {}; reduce the time step",
                k as f64 * dt
            )));
        }
        times.push(k as f64 * dt);
        states.push(rho);
    }
    Ok(DensityTrajectory { times, states })
}

/// exp(t·L) applied to vec(ρ₀), via the matrix exponential of the dual generator.
pub fn propagate_exact(gen: &GKSLGenerator, rho0: &CMat, t: f64) -> CMat {
    let l = dual_generator_matrix(gen) * Complex64::new(t, 0.0);
    unvec(&(l.exp() * vec_of(rho0)), gen.dim)
}

/// ⟨U_t⟩_vac = e^{−Γt}.
pub fn vacuum_decay(gen: &GKSLGenerator, t: f64) -> Result<CMat> {
    if !(t >= 0.0) {
        return Err(Error::argument(format!("time must be nonnegative, got {t}")));
    }
    Ok((&gen.drift * Complex64::new(-t, 0.0)).exp())
}

/// Ensemble average of |ψ⟩⟨ψ| over jump trajectories.
#[derive(Clone, Debug)]
pub struct JumpEnsemble {
    pub trajectories: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub mean_states: Vec<CMat>,
    /// Standard error of the real parts of each entry.
    pub stderr_re: Vec<DMatrix<f64>>,
    /// Standard error of the imaginary parts of each entry.
    pub stderr_im: Vec<DMatrix<f64>>,
}

struct Unraveller {
    h_eff: CMat,
    step: CMat,
    kraus: Vec<(f64, CMat)>,
    dt: f64,
}

impl Unraveller {
    fn new(gen: &GKSLGenerator, dt: f64) -> Self {
        let h_eff = &gen.hamiltonian - gen.decay_operator() * Complex64::new(0.0, 0.5);
        let step = (&h_eff * (-I * dt)).exp();
        let kraus = gen.kraus.iter().map(|k| (k.weight, k.operator.clone())).collect();
        Unraveller { h_eff, step, kraus, dt }
    }

    fn propagate(&self, psi: &DVector<Complex64>, tau: f64) -> DVector<Complex64> {
        (&self.h_eff * (-I * tau)).exp() * psi
    }

    fn jump(&self, psi: &DVector<Complex64>, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
        let images: Vec<DVector<Complex64>> = self.kraus.iter().map(|(_, l)| l * psi).collect();
        let rates: Vec<f64> = self.kraus.iter().zip(&images).map(|((w, _), v)| w * v.norm_squared()).collect();
        let total: f64 = rates.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = rates.len() - 1;
        for (j, r) in rates.iter().enumerate() {
            if pick < *r {
                chosen = j;
                break;
            }
            pick -= r;
        }
        let v = &images[chosen];
        v.unscale(v.norm())
    }

    /// Advance an unnormalized state by one step, resolving any jumps whose
    /// norm threshold falls inside it.
    fn advance(&self, psi: &mut DVector<Complex64>, threshold: &mut f64, rng: &mut ChaCha8Rng) {
        if self.kraus.is_empty() {
            *psi = &self.step * &*psi;
            return;
        }
        let mut remaining = self.dt;
        loop {
            let full = remaining == self.dt;
            let next = if full { &self.step * &*psi } else { self.propagate(psi, remaining) };
            if next.norm_squared() > *threshold {
                *psi = next;
                return;
            }
            // Bisection on τ with ‖e^{−iH_eff τ}ψ‖² = threshold.
            let (mut lo, mut hi) = (0.0, remaining);
            while hi - lo > 1e-10 * self.dt {
                let mid = 0.5 * (lo + hi);
                if self.propagate(psi, mid).norm_squared() > *threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let at_jump = self.propagate(psi, hi);
            *psi = self.jump(&at_jump, rng);
            *threshold = rng.random::<f64>();
            remaining -= hi;
            if remaining <= 0.0 {
                return;
            }
        }
    }
}

struct Moments {
    sum: Vec<CMat>,
    sum_sq_re: Vec<DMatrix<f64>>,
    sum_sq_im: Vec<DMatrix<f64>>,
}

impl Moments {
    fn zeros(points: usize, d: usize) -> Self {
        Moments {
            sum: vec![CMat::zeros(d, d); points],
            sum_sq_re: vec![DMatrix::zeros(d, d); points],
            sum_sq_im: vec![DMatrix::zeros(d, d); points],
        }
    }

    fn add_state(&mut self, k: usize, rho: &CMat) {
        self.sum[k] += rho;
        self.sum_sq_re[k] += rho.map(|z| z.re * z.re);
        self.sum_sq_im[k] += rho.map(|z| z.im * z.im);
    }

    fn merge(&mut self, other: &Moments) {
        for k in 0..self.sum.len() {
            self.sum[k] += &other.sum[k];
            self.sum_sq_re[k] += &other.sum_sq_re[k];
            self.sum_sq_im[k] += &other.sum_sq_im[k];
        }
    }
}

/// Monte-Carlo unravelling with `m` trajectories from |ψ₀⟩; trajectory i uses
/// ChaCha8 stream i under `seed`, and sums are reduced in fixed-size blocks.
pub fn unravel_jump(
    gen: &GKSLGenerator,
    psi0: &DVector<Complex64>,
    t_max: f64,
    dt: f64,
    m: usize,
    seed: u64,
) -> Result<JumpEnsemble> {
    if m == 0 {
        return Err(Error::argument("number of trajectories must be positive"));
    }
    let steps = step_count(t_max, dt)?;
    let d = gen.dim;
    if psi0.len() != d {
        return Err(Error::validation(format!("initial vector has length {}, expected {d}", psi0.len())));
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!("initial vector has norm {}, expected 1", psi0.norm())));
    }
    let un = Unraveller::new(gen, dt);
    let points = steps + 1;
    let blocks: Vec<Moments> = (0..m.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::zeros(points, d);
            for traj in b * BLOCK..((b + 1) * BLOCK).min(m) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(traj as u64);
                let mut psi = psi0.clone();
                let mut threshold: f64 = rng.random();
                acc.add_state(0, &(&psi * psi.adjoint()));
                for k in 1..points {
                    un.advance(&mut psi, &mut threshold, &mut rng);
                    let n2 = psi.norm_squared();
                    acc.add_state(k, &(&psi * psi.adjoint() / Complex64::new(n2, 0.0)));
                }
            }
            acc
        })
        .collect();
    let mut total = Moments::zeros(points, d);
    for b in &blocks {
        total.merge(b);
    }
    let mf = m as f64;
    let mean_states: Vec<CMat> = total.sum.iter().map(|s| s / Complex64::new(mf, 0.0)).collect();
    let se = |sq: &DMatrix<f64>, mean: DMatrix<f64>| {
        let denom = (mf * (mf - 1.0).max(1.0)).sqrt();
        sq.zip_map(&mean, |q, mu| ((q - mf * mu * mu).max(0.0)).sqrt() / denom)
    };
    let stderr_re = total
        .sum_sq_re
        .iter()
        .zip(&mean_states)
        .map(|(q, mu)| se(q, mu.map(|z| z.re)))
        .collect();
    let stderr_im = total
        .sum_sq_im
        .iter()
        .zip(&mean_states)
        .map(|(q, mu)| se(q, mu.map(|z| z.im)))
        .collect();
    let mean_states = mean_states.into_iter().map(|r| (&r + r.adjoint()) * Complex64::new(0.5, 0.0)).collect();
    Ok(JumpEnsemble {
        trajectories: m,
        seed,
        times: (0..points).map(|k| k as f64 * dt).collect(),
        mean_states,
        stderr_re,
        stderr_im,
    })
}

/// Header `t,re_ij…,im_ij…` then one row per time, entries row-major.
pub fn write_trajectory_csv<W: Write>(mut out: W, times: &[f64], states: &[CMat]) -> std::io::Result<()> {
    let d = states.first().map(|s| s.nrows()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for part in ["re", "im"] {
        for i in 0..d {
            for j in 0..d {
                header.push(format!("{part}_{i}{j}"));
            }
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for (t, rho) in times.iter().zip(states) {
        let mut row = vec![t.to_string()];
        for i in 0..d {
            for j in 0..d {
                row.push(rho[(i, j)].re.to_string());
            }
        }
        for i in 0..d {
            for j in 0..d {
                row.push(rho[(i, j)].im.to_string());
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Pure state |ψ⟩⟨ψ|.
pub fn projector(psi: &DVector<Complex64>) -> CMat {
    psi * psi.adjoint()
}
