//! JSON model schema and matrix/vector encodings.
//!
//! Matrices are nested row-major arrays of `[re, im]` pairs; vectors are flat
//! arrays of `[re, im]` pairs. Unknown keys are rejected.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bath::{BathSpec, DensityProfile, EnergyGrid};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{
    ModelSpec, DEFAULT_BOHR_TOLERANCE, DEFAULT_NEUMANN_MAX_ORDER, DEFAULT_NEUMANN_TOLERANCE,
};

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &CMat) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &MatrixRows, name: &str) -> Result<CMat> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation(format!("{name} is empty")));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::validation(format!(
            "{name} is not square: row {bad} has {} entries, expected {n}",
            rows[bad].len()
        )));
    }
    Ok(CMat::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn vector_from_pairs(pairs: &[[f64; 2]]) -> DVector<Complex64> {
    DVector::from_iterator(pairs.len(), pairs.iter().map(|p| Complex64::new(p[0], p[1])))
}

pub fn vector_to_pairs(v: &DVector<Complex64>) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// `#[serde(with = "crate::io::matrix_serde")]` for `CMat` fields.
/// Complex number as `[re, im]`.
pub fn complex_pair<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Complex list as `[[re, im], ...]`.
pub fn complex_list<S: Serializer>(zs: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    zs.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
}

pub mod matrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = MatrixRows::deserialize(d)?;
        matrix_from_rows(&rows, "matrix").map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hamiltonian: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coupling: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bohr_tolerance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BathFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<EnergyGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho0: Option<DensityProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho1: Option<DensityProfile>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neumann_max_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neumann_tolerance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default)]
    system: Option<SystemFile>,
    #[serde(default)]
    bath: Option<BathFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<TruncationFile>,
}

fn required<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::validation(format!("missing required field `{field}`")))
}

/// Parse and validate a model document.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let file: ModelFile = serde_json::from_str(text)?;
    let system = required(file.system, "system")?;
    let bath = required(file.bath, "bath")?;
    let trunc = file.truncation.unwrap_or_default();

    let h = matrix_from_rows(&required(system.hamiltonian, "system.hamiltonian")?, "system.hamiltonian")?;
    let d = matrix_from_rows(&required(system.coupling, "system.coupling")?, "system.coupling")?;
    if d.nrows() != h.nrows() {
        return Err(Error::validation(format!(
            "system.coupling is {n}x{n} but system.hamiltonian is {m}x{m}",
            n = d.nrows(),
            m = h.nrows()
        )));
    }
    let spec = ModelSpec {
        dim: h.nrows(),
        h_system: h,
        coupling: d,
        beta: required(bath.beta, "bath.beta")?,
        bath: BathSpec {
            densities: [required(bath.rho0, "bath.rho0")?, required(bath.rho1, "bath.rho1")?],
            grid: required(bath.grid, "bath.grid")?,
        },
        bohr_tolerance: system.bohr_tolerance.unwrap_or(DEFAULT_BOHR_TOLERANCE),
        neumann_max_order: trunc.neumann_max_order.unwrap_or(DEFAULT_NEUMANN_MAX_ORDER),
        neumann_tolerance: trunc.neumann_tolerance.unwrap_or(DEFAULT_NEUMANN_TOLERANCE),
    };
    spec.validate()?;
    crate::bath::validate_bath(&spec.bath, spec.beta)?;
    Ok(spec)
}

/// Serialize a model in the same schema `parse_model` reads.
pub fn model_to_json(spec: &ModelSpec) -> String {
    let file = ModelFile {
        system: Some(SystemFile {
            hamiltonian: Some(matrix_to_rows(&spec.h_system)),
            coupling: Some(matrix_to_rows(&spec.coupling)),
            bohr_tolerance: Some(spec.bohr_tolerance),
        }),
        bath: Some(BathFile {
            beta: Some(spec.beta),
            grid: Some(spec.bath.grid.clone()),
            rho0: Some(spec.bath.densities[0].clone()),
            rho1: Some(spec.bath.densities[1].clone()),
        }),
        truncation: Some(TruncationFile {
            neumann_max_order: Some(spec.neumann_max_order),
            neumann_tolerance: Some(spec.neumann_tolerance),
        }),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}
