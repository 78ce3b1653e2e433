//! Drift Γ, the Θ maps and the Lindblad generator Θ₀(X) = Ψ(X) − ½{Ψ(1),X} + i[H,X].
//!
//! All energy integrals use the trapezoid rule on the bath grid. Kraus weights
//! use Re γ = πρ taken directly from the density.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{Channel, EnergyGrid};
use crate::error::{Error, Result};
use crate::linalg::{anticommutator, commutator, identity, matrix_unit, unvec, vec_of, zeros, CMat, I};
use crate::model::Model;
use crate::tmatrix::{EnergySlice, Pair};

/// Grid nodes and trapezoid weights where μ_ε⁻¹ is nonzero.
pub fn support_nodes(model: &Model, eps: Channel) -> Vec<(f64, f64)> {
    let grid = &model.spec.bath.grid;
    grid.nodes()
        .into_iter()
        .zip(grid.weights())
        .filter(|&(e, _)| model.bath.mu_inv(eps, e) > 0.0)
        .collect()
}

/// Check that the grid covers every density support shifted by every Bohr frequency.
pub fn check_grid_coverage(model: &Model) -> Result<()> {
    let grid = &model.spec.bath.grid;
    let mut missing = Vec::new();
    for eps in Channel::ALL {
        let (a, b) = model.spec.bath.density(eps).support();
        for &w in &model.spectral.bohr_set {
            if !grid.covers(a + w, b + w) {
                missing.push(format!("rho{} support shifted by {w} = [{}, {}]", eps.index(), a + w, b + w));
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "energy grid [{}, {}] does not cover: {}",
            grid.min,
            grid.max,
            missing.join("; ")
        )))
    }
}

/// Deterministic ordered reduction of per-node matrices.
fn sum_in_order(parts: Vec<CMat>, dim: usize) -> CMat {
    parts.into_iter().fold(zeros(dim), |acc, m| acc + m)
}

/// Γ = −Σ_ε ∫dE R^{ε,ε}_{0,0}(E) e^{−βE}ρ_ε(E).
pub fn drift(model: &Model) -> Result<CMat> {
    let d = model.dim();
    let mut parts = Vec::new();
    for eps in Channel::ALL {
        let nodes = support_nodes(model, eps);
        let contrib = nodes
            .par_iter()
            .map(|&(e, w)| {
                let r = EnergySlice::new(model, e).r(eps, eps, 0.0, 0.0)?;
                Ok(r * crate::linalg::re(-w * model.bath.mu_inv(eps, e)))
            })
            .collect::<Result<Vec<_>>>()?;
        parts.extend(contrib);
    }
    Ok(sum_in_order(parts, d))
}

/// Second-order (Born) drift: R^{00}_{00} ≈ −Σ_a D_a D_a† γ₁(E−a) and
/// R^{11}_{00} ≈ −Σ_a D_a† D_a γ₀(E+a), integrated like [`drift`].
pub fn born_drift(model: &Model) -> Result<CMat> {
    let d = model.dim();
    let sp = &model.spectral;
    let terms: Vec<(f64, CMat, CMat)> = sp
        .active_frequencies()
        .into_iter()
        .map(|a| {
            let da = sp.d(a).expect("active block");
            (a, da * da.adjoint(), da.adjoint() * da)
        })
        .collect();
    let mut parts = Vec::new();
    for eps in Channel::ALL {
        let nodes = support_nodes(model, eps);
        let contrib = nodes
            .par_iter()
            .map(|&(e, w)| {
                let mut r = zeros(d);
                for (a, ddag, dagd) in &terms {
                    r -= match eps {
                        Channel::Zero => ddag * model.bath.gamma(Channel::One, e - a)?,
                        Channel::One => dagd * model.bath.gamma(Channel::Zero, e + a)?,
                    };
                }
                Ok(r * crate::linalg::re(-w * model.bath.mu_inv(eps, e)))
            })
            .collect::<Result<Vec<_>>>()?;
        parts.extend(contrib);
    }
    Ok(sum_in_order(parts, d))
}

/// Tr_{H₁} e^{−βH₁} T = i Σ_ε ∫dE e^{−βE}ρ_ε(E) t^{εε}(E).
pub fn thermal_t_trace(model: &Model) -> Result<CMat> {
    let d = model.dim();
    let mut parts = Vec::new();
    for eps in Channel::ALL {
        let pair = Pair::new(eps, eps);
        let nodes = support_nodes(model, eps);
        let contrib = nodes
            .par_iter()
            .map(|&(e, w)| {
                let t = EnergySlice::new(model, e).t_component(pair)?;
                Ok(t * (I * (w * model.bath.mu_inv(eps, e))))
            })
            .collect::<Result<Vec<_>>>()?;
        parts.extend(contrib);
    }
    Ok(sum_in_order(parts, d))
}

/// Γ = i Σ_k P_k (Tr_{H₁} e^{−βH₁} T) P_k.
pub fn drift_from_t(model: &Model) -> Result<CMat> {
    let tr = thermal_t_trace(model)?;
    Ok(model.spectral.diagonal_part(&tr) * I)
}

/// Θ^{ε₁,ε₂}_{ω₁,ω₂}(X) at the slice energy.
pub fn theta_on_slice(
    slice: &mut EnergySlice,
    model: &Model,
    x: &CMat,
    e1: Channel,
    e2: Channel,
    w1: f64,
    w2: f64,
) -> Result<CMat> {
    let e = slice.energy();
    let mut out = x * slice.r(e1, e2, w1, w2)? + slice.r(e2, e1, w2, w1)?.adjoint() * x;
    for eps in Channel::ALL {
        for &w in &model.spectral.bohr_set {
            let re_gamma = PI * model.bath.density(eps, e + w);
            if re_gamma == 0.0 {
                continue;
            }
            let left = slice.r(eps, e1, w, w1)?;
            let right = slice.r(eps, e2, w, w2)?;
            out += left.adjoint() * x * right * crate::linalg::re(2.0 * re_gamma);
        }
    }
    Ok(out)
}

/// Θ^{ε₁,ε₂}_{ω₁,ω₂}(X) at energy E.
pub fn theta_map(
    model: &Model,
    x: &CMat,
    e1: Channel,
    e2: Channel,
    w1: f64,
    w2: f64,
    e: f64,
) -> Result<CMat> {
    theta_on_slice(&mut EnergySlice::new(model, e), model, x, e1, e2, w1, w2)
}

/// Θ₀(X) = Σ_ε ∫dE μ_ε⁻¹(E) Θ^{ε,ε}_{0,0}(X), summed directly from the three terms.
pub fn theta0_direct(model: &Model, xs: &[CMat]) -> Result<Vec<CMat>> {
    let d = model.dim();
    let mut totals = vec![zeros(d); xs.len()];
    for eps in Channel::ALL {
        let nodes = support_nodes(model, eps);
        let per_node = nodes
            .par_iter()
            .map(|&(e, w)| {
                let mut slice = EnergySlice::new(model, e);
                let scale = crate::linalg::re(w * model.bath.mu_inv(eps, e));
                xs.iter()
                    .map(|x| Ok(theta_on_slice(&mut slice, model, x, eps, eps, 0.0, 0.0)? * scale))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for node in per_node {
            for (t, v) in totals.iter_mut().zip(node) {
                *t += v;
            }
        }
    }
    Ok(totals)
}

/// One term w·L†XL of Ψ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kraus {
    pub weight: f64,
    #[serde(with = "crate::io::matrix_serde")]
    pub operator: CMat,
}

/// Drift, Hamiltonian and weighted Kraus family of the Markov generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GKSLGenerator {
    pub dim: usize,
    #[serde(with = "crate::io::matrix_serde")]
    pub drift: CMat,
    #[serde(with = "crate::io::matrix_serde")]
    pub hamiltonian: CMat,
    pub kraus: Vec<Kraus>,
    pub grid: EnergyGrid,
}

struct NodeTerms {
    gamma: CMat,
    hamiltonian: CMat,
    kraus: Vec<Kraus>,
}

/// Assemble Γ, H and the Kraus family on the bath grid.
pub fn build_generator(model: &Model) -> Result<GKSLGenerator> {
    check_grid_coverage(model)?;
    let d = model.dim();
    let bohr = model.spectral.bohr_set.clone();
    let mut nodes = Vec::new();
    for eps in Channel::ALL {
        nodes.extend(support_nodes(model, eps).into_iter().map(|(e, w)| (eps, e, w)));
    }
    let terms = nodes
        .par_iter()
        .map(|&(eps, e, w)| {
            let mut slice = EnergySlice::new(model, e);
            let mu = model.bath.mu_inv(eps, e);
            let r = slice.r(eps, eps, 0.0, 0.0)?;
            let gamma = &r * crate::linalg::re(-w * mu);
            let hamiltonian = (r.adjoint() - &r) * (crate::linalg::re(w * mu) / (I * 2.0));
            let mut kraus = Vec::new();
            for eps2 in Channel::ALL {
                for &om in &bohr {
                    let weight = 2.0 * w * mu * PI * model.bath.density(eps2, e + om);
                    if weight <= 0.0 {
                        continue;
                    }
                    let op = slice.r(eps2, eps, om, 0.0)?;
                    if op.iter().all(|z| z.norm() == 0.0) {
                        continue;
                    }
                    kraus.push(Kraus { weight, operator: op });
                }
            }
            Ok(NodeTerms { gamma, hamiltonian, kraus })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut drift = zeros(d);
    let mut hamiltonian = zeros(d);
    let mut kraus = Vec::new();
    for t in terms {
        drift += t.gamma;
        hamiltonian += t.hamiltonian;
        kraus.extend(t.kraus);
    }
    // Remove the roundoff anti-Hermitian part; H is Hermitian by construction.
    let hamiltonian = (&hamiltonian + hamiltonian.adjoint()) * crate::linalg::re(0.5);
    Ok(GKSLGenerator { dim: d, drift, hamiltonian, kraus, grid: model.spec.bath.grid.clone() })
}

impl GKSLGenerator {
    /// Ψ(X) = Σ_j w_j L_j† X L_j.
    pub fn psi(&self, x: &CMat) -> CMat {
        self.kraus
            .iter()
            .fold(zeros(self.dim), |acc, k| acc + k.operator.adjoint() * x * &k.operator * crate::linalg::re(k.weight))
    }

    /// Ψ*(ρ) = Σ_j w_j L_j ρ L_j†.
    pub fn psi_dual(&self, rho: &CMat) -> CMat {
        self.kraus
            .iter()
            .fold(zeros(self.dim), |acc, k| acc + &k.operator * rho * k.operator.adjoint() * crate::linalg::re(k.weight))
    }

    pub fn psi_one(&self) -> CMat {
        self.psi(&identity(self.dim))
    }

    /// Σ_j w_j L_j† L_j as used in the effective non-Hermitian Hamiltonian.
    pub fn decay_operator(&self) -> CMat {
        self.psi_one()
    }

    /// Schrödinger-picture generator Θ₀*(ρ).
    pub fn apply_dual(&self, rho: &CMat) -> CMat {
        let p1 = self.psi_one();
        self.psi_dual(rho) - anticommutator(&p1, rho) * crate::linalg::re(0.5) - commutator(&self.hamiltonian, rho) * I
    }

    /// Same generator with the Kraus family replaced.
    pub fn with_kraus(&self, kraus: Vec<Kraus>) -> Self {
        GKSLGenerator { kraus, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("generator serializes")
    }
}

/// Θ₀(X) = Ψ(X) − ½{Ψ(1),X} + i[H,X].
pub fn apply_generator(gen: &GKSLGenerator, x: &CMat) -> Result<CMat> {
    if x.nrows() != gen.dim || x.ncols() != gen.dim {
        return Err(Error::argument(format!(
            "operator is {}x{}, generator acts on {}x{}",
            x.nrows(),
            x.ncols(),
            gen.dim,
            gen.dim
        )));
    }
    let p1 = gen.psi_one();
    Ok(gen.psi(x) - anticommutator(&p1, x) * crate::linalg::re(0.5) + commutator(&gen.hamiltonian, x) * I)
}

/// Matrix of a linear map on d×d matrices in the column-major vec basis.
pub fn superoperator_matrix(dim: usize, map: impl Fn(&CMat) -> CMat) -> CMat {
    let n = dim * dim;
    let mut out = zeros(n);
    for j in 0..dim {
        for i in 0..dim {
            let col = vec_of(&map(&matrix_unit(dim, i, j)));
            out.set_column(i + j * dim, &col);
        }
    }
    out
}

/// Matrix of ρ ↦ Θ₀*(ρ) acting on vec(ρ).
pub fn dual_generator_matrix(gen: &GKSLGenerator) -> CMat {
    superoperator_matrix(gen.dim, |rho| gen.apply_dual(rho))
}

/// Matrix of X ↦ Θ₀(X) acting on vec(X).
pub fn generator_matrix(gen: &GKSLGenerator) -> CMat {
    superoperator_matrix(gen.dim, |x| apply_generator(gen, x).expect("dimensions match"))
}

/// Choi matrix Σ_{ij} E_ij ⊗ Ψ(E_ij) of Ψ.
pub fn choi_matrix(gen: &GKSLGenerator) -> CMat {
    let d = gen.dim;
    let mut out = zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let blk = gen.psi(&matrix_unit(d, i, j));
            out.view_mut((i * d, j * d), (d, d)).copy_from(&blk);
        }
    }
    out
}

/// Replace the Kraus family by the eigenvectors of Σ_j w_j |L_j⟫⟪L_j|,
/// dropping eigenvalues below `threshold` times the largest.
pub fn compress(gen: &GKSLGenerator, threshold: f64) -> GKSLGenerator {
    let d = gen.dim;
    let mut gram = zeros(d * d);
    for k in &gen.kraus {
        let v = vec_of(&k.operator);
        gram += &v * v.adjoint() * crate::linalg::re(k.weight);
    }
    let gram = (&gram + gram.adjoint()) * crate::linalg::re(0.5);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let kraus = order
        .into_iter()
        .filter(|&k| top > 0.0 && eig.eigenvalues[k] > threshold * top)
        .map(|k| Kraus {
            weight: eig.eigenvalues[k],
            operator: unvec(&eig.eigenvectors.column(k).into_owned(), d),
        })
        .collect();
    gen.with_kraus(kraus)
}
