//! System model: Hamiltonian, coupling operator, spectral projections and
//! the Bohr-frequency decomposition D = Σ_ω D_ω.

use std::path::Path;
use std::sync::Arc;

use crate::bath::{validate_bath, Bath, BathReport, BathSpec};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, zeros, CMat};

pub const DEFAULT_BOHR_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_NEUMANN_MAX_ORDER: usize = 64;
pub const DEFAULT_NEUMANN_TOLERANCE: f64 = 1e-12;

/// The user-supplied microscopic problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub dim: usize,
    pub h_system: CMat,
    pub coupling: CMat,
    pub beta: f64,
    pub bath: BathSpec,
    pub bohr_tolerance: f64,
    pub neumann_max_order: usize,
    pub neumann_tolerance: f64,
}

impl ModelSpec {
    /// Check the scalar parameters and the Hermiticity of `h_system`.
    /// The bath is checked separately by [`validate_bath`].
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("dim must be at least 1"));
        }
        for (name, m) in [("hamiltonian", &self.h_system), ("coupling", &self.coupling)] {
            if m.nrows() != self.dim || m.ncols() != self.dim {
                return Err(Error::validation(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    self.dim,
                    self.dim
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::validation(format!("{name} has non-finite entries")));
            }
        }
        let defect = frobenius(&(&self.h_system - self.h_system.adjoint()));
        if defect > 1e-12 * frobenius(&self.h_system) {
            return Err(Error::validation(format!(
                "hamiltonian is not Hermitian (|H - H^dagger|_F = {defect:e})"
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::validation(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.bohr_tolerance > 0.0) {
            return Err(Error::validation(format!(
                "bohr_tolerance must be positive, got {}",
                self.bohr_tolerance
            )));
        }
        if self.neumann_max_order < 1 {
            return Err(Error::validation("neumann_max_order must be at least 1"));
        }
        if !(self.neumann_tolerance > 0.0) {
            return Err(Error::validation(format!(
                "neumann_tolerance must be positive, got {}",
                self.neumann_tolerance
            )));
        }
        Ok(())
    }
}

/// Read and validate a model JSON file.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    crate::io::parse_model(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub energy: f64,
    pub projection: CMat,
}

/// Spectral data of H_S together with the Bohr decomposition of D.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub levels: Vec<Level>,
    /// Sorted, closed under negation, contains 0 exactly.
    pub bohr_set: Vec<f64>,
    /// D_ω aligned with `bohr_set`.
    pub d_blocks: Vec<CMat>,
    d_dag_blocks: Vec<CMat>,
    nonzero: Vec<bool>,
    match_tolerance: f64,
    dim: usize,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position of ω in the Bohr set, matched to half the grouping tolerance.
    pub fn index_of(&self, omega: f64) -> Option<usize> {
        let k = self.bohr_set.partition_point(|&b| b < omega - self.match_tolerance);
        (k < self.bohr_set.len() && (self.bohr_set[k] - omega).abs() <= self.match_tolerance)
            .then_some(k)
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.index_of(omega).is_some()
    }

    /// D_ω, or `None` when ω is not a Bohr frequency or the block vanishes.
    pub fn d(&self, omega: f64) -> Option<&CMat> {
        self.index_of(omega).filter(|&k| self.nonzero[k]).map(|k| &self.d_blocks[k])
    }

    /// (D_ω)†, or `None` when it vanishes.
    pub fn d_dag(&self, omega: f64) -> Option<&CMat> {
        self.index_of(omega).filter(|&k| self.nonzero[k]).map(|k| &self.d_dag_blocks[k])
    }

    /// Bohr frequencies whose D block is nonzero.
    pub fn active_frequencies(&self) -> Vec<f64> {
        self.bohr_set
            .iter()
            .zip(&self.nonzero)
            .filter(|(_, nz)| **nz)
            .map(|(w, _)| *w)
            .collect()
    }

    /// The rotating-wave frequency ω₀ when exactly one D_ω is nonzero.
    pub fn rwa_frequency(&self) -> Option<f64> {
        let active = self.active_frequencies();
        (active.len() == 1).then(|| active[0])
    }

    pub fn is_rwa(&self) -> bool {
        self.rwa_frequency().is_some()
    }

    /// The index set ω′ + B used for the column ω′ of (1 + T_ε)⁻¹.
    pub fn shifted(&self, omega_prime: f64) -> Vec<f64> {
        self.bohr_set.iter().map(|b| omega_prime + b).collect()
    }

    pub fn match_tolerance(&self) -> f64 {
        self.match_tolerance
    }

    /// Σ_k P_k X P_k.
    pub fn diagonal_part(&self, x: &CMat) -> CMat {
        self.levels
            .iter()
            .fold(zeros(self.dim), |acc, l| acc + &l.projection * x * &l.projection)
    }
}

/// Single-linkage clusters of sorted values: consecutive values closer than
/// `tol` share a cluster. Returns cluster id per input.
fn single_linkage(sorted: &[f64], tol: f64) -> Vec<usize> {
    let mut ids = Vec::with_capacity(sorted.len());
    let mut id = 0;
    for (i, v) in sorted.iter().enumerate() {
        if i > 0 && v - sorted[i - 1] > tol {
            id += 1;
        }
        ids.push(id);
    }
    ids
}

/// Group eigenvalues of H_S into levels, build the Bohr set and the D_ω.
pub fn spectral_decompose(spec: &ModelSpec) -> Result<SpectralData> {
    let n = spec.dim;
    let herm = (&spec.h_system + spec.h_system.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("Hermitian eigensolver returned non-finite eigenvalues"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cluster = single_linkage(&sorted, spec.bohr_tolerance);

    let mut levels: Vec<Level> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let proj = v * v.adjoint();
        let c = cluster[pos];
        if c == levels.len() {
            levels.push(Level { energy: 0.0, projection: zeros(n) });
            counts.push(0);
        }
        levels[c].energy += sorted[pos];
        levels[c].projection += proj;
        counts[c] += 1;
    }
    for (level, count) in levels.iter_mut().zip(&counts) {
        level.energy /= *count as f64;
    }

    // Bohr frequencies from level differences; cluster the nonnegative half
    // and mirror so the set is exactly closed under negation.
    let mut positive: Vec<f64> = Vec::new();
    for lk in &levels {
        for lm in &levels {
            let w = lm.energy - lk.energy;
            if w >= 0.0 {
                positive.push(w);
            }
        }
    }
    positive.sort_by(f64::total_cmp);
    let ids = single_linkage(&positive, spec.bohr_tolerance);
    let mut reps: Vec<f64> = Vec::new();
    let mut start = 0;
    while start < positive.len() {
        let mut end = start;
        while end < positive.len() && ids[end] == ids[start] {
            end += 1;
        }
        let members = &positive[start..end];
        let rep = if members[0] == 0.0 {
            0.0
        } else {
            members.iter().sum::<f64>() / members.len() as f64
        };
        reps.push(rep);
        start = end;
    }
    let mut bohr_set: Vec<f64> = reps.iter().filter(|&&w| w > 0.0).map(|w| -w).collect();
    bohr_set.extend(reps.iter().copied());
    bohr_set.sort_by(f64::total_cmp);
    bohr_set.dedup();

    let match_tolerance = 0.5 * spec.bohr_tolerance;
    let mut d_blocks = vec![zeros(n); bohr_set.len()];
    for lk in &levels {
        for lm in &levels {
            let w = lm.energy - lk.energy;
            let k = nearest(&bohr_set, w);
            d_blocks[k] += &lk.projection * &spec.coupling * &lm.projection;
        }
    }
    let scale = frobenius(&spec.coupling);
    let nonzero = d_blocks.iter().map(|b| frobenius(b) > 1e-14 * scale).collect();
    let d_dag_blocks = d_blocks.iter().map(|b| b.adjoint()).collect();
    Ok(SpectralData {
        levels,
        bohr_set,
        d_blocks,
        d_dag_blocks,
        nonzero,
        match_tolerance,
        dim: n,
    })
}

fn nearest(sorted: &[f64], w: f64) -> usize {
    sorted
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - w).abs().total_cmp(&(b.1 - w).abs()))
        .map(|(k, _)| k)
        .expect("Bohr set contains 0")
}

/// X_ω = Σ_{ε_m − ε_k = ω} P_k X P_m for every ω in the Bohr set.
pub fn block_transfer(x: &CMat, spectral: &SpectralData) -> Vec<CMat> {
    let n = spectral.dim();
    let mut out = vec![zeros(n); spectral.bohr_set.len()];
    for lk in &spectral.levels {
        for lm in &spectral.levels {
            let k = nearest(&spectral.bohr_set, lm.energy - lk.energy);
            out[k] += &lk.projection * x * &lm.projection;
        }
    }
    out
}

/// A validated model with its spectral data and bath bound together.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub spectral: SpectralData,
    pub bath: Arc<Bath>,
    pub bath_report: BathReport,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let bath_report = validate_bath(&spec.bath, spec.beta)?;
        let spectral = spectral_decompose(&spec)?;
        let bath = Arc::new(Bath::new(spec.bath.clone(), spec.beta));
        Ok(Model { spec, spectral, bath, bath_report })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Same model with the coupling operator multiplied by `factor`.
    pub fn with_coupling_scaled(&self, factor: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.coupling = spec.coupling.scale(factor);
        spec.validate()?;
        let spectral = spectral_decompose(&spec)?;
        Ok(Model { spec, spectral, bath: Arc::clone(&self.bath), bath_report: self.bath_report.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{DensityProfile, EnergyGrid};
    use crate::linalg::{c, identity, random_matrix, ONE, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bath() -> BathSpec {
        BathSpec {
            densities: [
                DensityProfile::Bump { a: 0.0, b: 1.0, amplitude: 1.0 },
                DensityProfile::Bump { a: 2.0, b: 3.0, amplitude: 1.0 },
            ],
            grid: EnergyGrid { min: -1.5, max: 4.5, points: 481 },
        }
    }

    fn spec(h: CMat, d: CMat) -> ModelSpec {
        ModelSpec {
            dim: h.nrows(),
            h_system: h,
            coupling: d,
            beta: 0.5,
            bath: bath(),
            bohr_tolerance: DEFAULT_BOHR_TOLERANCE,
            neumann_max_order: DEFAULT_NEUMANN_MAX_ORDER,
            neumann_tolerance: DEFAULT_NEUMANN_TOLERANCE,
        }
    }

    fn diag(v: &[f64]) -> CMat {
        CMat::from_fn(v.len(), v.len(), |i, j| if i == j { c(v[i], 0.0) } else { ZERO })
    }

    fn e12() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
    }

    fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn assert_close(a: &CMat, b: &CMat, tol: f64) {
        let d = frobenius(&(a - b));
        assert!(d <= tol, "difference {d:e} > {tol:e}");
    }

    #[test]
    fn single_off_diagonal_block() {
        let sd = spectral_decompose(&spec(diag(&[0.0, 1.0]), e12())).unwrap();
        assert_eq!(sd.bohr_set, vec![-1.0, 0.0, 1.0]);
        assert_close(sd.d(1.0).unwrap(), &e12(), 1e-15);
        assert!(sd.d(0.0).is_none() && sd.d(-1.0).is_none());
        assert_eq!(sd.rwa_frequency(), Some(1.0));
    }

    #[test]
    fn sigma_x_splits_into_two_blocks() {
        let sd = spectral_decompose(&spec(diag(&[0.0, 1.0]), sigma_x())).unwrap();
        assert_close(sd.d(1.0).unwrap(), &e12(), 1e-15);
        assert_close(sd.d(-1.0).unwrap(), &e12().transpose(), 1e-15);
        assert!(sd.d(0.0).is_none());
        assert!(!sd.is_rwa());
    }

    #[test]
    fn degenerate_levels_are_grouped() {
        let sd = spectral_decompose(&spec(diag(&[0.0, 0.0, 2.0]), identity(3))).unwrap();
        assert_eq!(sd.levels.len(), 2);
        assert_eq!(sd.levels[0].energy, 0.0);
        assert_close(&sd.levels[0].projection, &diag(&[1.0, 1.0, 0.0]), 1e-14);
        assert_eq!(sd.bohr_set, vec![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn near_degeneracy_within_tolerance_merges() {
        let sd = spectral_decompose(&spec(diag(&[1.0, 1.0 + 1e-11, 3.0]), identity(3))).unwrap();
        assert_eq!(sd.levels.len(), 2);
        assert_eq!(sd.bohr_set.len(), 3);
    }

    #[test]
    fn block_transfer_of_identity_and_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = {
            let a = random_matrix(3, &mut rng);
            (&a + a.adjoint()).scale(0.5)
        };
        let d = random_matrix(3, &mut rng);
        let sd = spectral_decompose(&spec(h, d.clone())).unwrap();
        let id_blocks = block_transfer(&identity(3), &sd);
        let zero_idx = sd.index_of(0.0).unwrap();
        for (k, b) in id_blocks.iter().enumerate() {
            let expect = if k == zero_idx { identity(3) } else { zeros(3) };
            assert_close(b, &expect, 1e-12);
        }
        for (b, dk) in block_transfer(&d, &sd).iter().zip(&sd.d_blocks) {
            assert_close(b, dk, 1e-14);
        }
        let x = random_matrix(3, &mut rng);
        let sum = block_transfer(&x, &sd).iter().fold(zeros(3), |a, b| a + b);
        assert_close(&sum, &x, 1e-12);
    }

    #[test]
    fn spectral_invariants_random_three_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(3, &mut rng);
        let h = (&a + a.adjoint()).scale(0.5);
        let d = random_matrix(3, &mut rng);
        let s = spec(h.clone(), d.clone());
        let sd = spectral_decompose(&s).unwrap();

        let sum_p = sd.levels.iter().fold(zeros(3), |acc, l| acc + &l.projection);
        assert_close(&sum_p, &identity(3), 1e-12);
        for (i, li) in sd.levels.iter().enumerate() {
            assert_close(&li.projection, &li.projection.adjoint(), 1e-12);
            for (j, lj) in sd.levels.iter().enumerate() {
                let prod = &li.projection * &lj.projection;
                let expect = if i == j { li.projection.clone() } else { zeros(3) };
                assert_close(&prod, &expect, 1e-12);
            }
        }
        assert!(sd.contains(0.0));
        for w in &sd.bohr_set {
            assert!(sd.contains(-w));
        }
        let sum_d = sd.d_blocks.iter().fold(zeros(3), |acc, b| acc + b);
        assert_close(&sum_d, &d, 1e-12);

        // (D_ω)† = (D†)_{−ω}
        let mut s_dag = s.clone();
        s_dag.coupling = d.adjoint();
        let sd_dag = spectral_decompose(&s_dag).unwrap();
        for (k, w) in sd.bohr_set.iter().enumerate() {
            let j = sd_dag.index_of(-w).unwrap();
            assert_close(&sd.d_blocks[k].adjoint(), &sd_dag.d_blocks[j], 1e-12);
        }

        // e^{itH} D e^{−itH} = Σ_ω e^{−itω} D_ω
        for t in [0.3, 1.7] {
            let u = (h.map(|z| z * c(0.0, t))).exp();
            let lhs = &u * &d * u.adjoint();
            let rhs = sd
                .bohr_set
                .iter()
                .zip(&sd.d_blocks)
                .fold(zeros(3), |acc, (w, b)| acc + b * c(0.0, -t * w).exp());
            assert_close(&lhs, &rhs, 1e-10);
        }
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = spec(diag(&[0.0, 1.0]), sigma_x());
        s.h_system[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
        let mut s = spec(diag(&[0.0, 1.0]), sigma_x());
        s.beta = 0.0;
        assert!(s.validate().is_err());
        let mut s = spec(diag(&[0.0, 1.0]), sigma_x());
        s.bohr_tolerance = -1.0;
        assert!(s.validate().is_err());
    }
}
