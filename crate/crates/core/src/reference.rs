//! The two reference two-level models and helpers for building variants.

use crate::bath::{BathSpec, DensityProfile, EnergyGrid};
use crate::linalg::{c, zeros, CMat, ONE};
use crate::model::{
    ModelSpec, DEFAULT_BOHR_TOLERANCE, DEFAULT_NEUMANN_MAX_ORDER, DEFAULT_NEUMANN_TOLERANCE,
};

/// ρ₀ = bump(0,1,1), ρ₁ = bump(2,3,1) on the grid [−1.5, 4.5] with 481 points.
pub fn reference_bath() -> BathSpec {
    BathSpec {
        densities: [
            DensityProfile::Bump { a: 0.0, b: 1.0, amplitude: 1.0 },
            DensityProfile::Bump { a: 2.0, b: 3.0, amplitude: 1.0 },
        ],
        grid: EnergyGrid { min: -1.5, max: 4.5, points: 481 },
    }
}

pub fn two_level_hamiltonian(splitting: f64) -> CMat {
    let mut h = zeros(2);
    h[(1, 1)] = c(splitting, 0.0);
    h
}

/// A two-level model with H_S = diag(0, splitting) on the reference bath.
pub fn two_level(splitting: f64, coupling: CMat) -> ModelSpec {
    ModelSpec {
        dim: 2,
        h_system: two_level_hamiltonian(splitting),
        coupling,
        beta: 0.5,
        bath: reference_bath(),
        bohr_tolerance: DEFAULT_BOHR_TOLERANCE,
        neumann_max_order: DEFAULT_NEUMANN_MAX_ORDER,
        neumann_tolerance: DEFAULT_NEUMANN_TOLERANCE,
    }
}

/// σ₊-type coupling s·|e₁⟩⟨e₂|.
pub fn lowering(scale: f64) -> CMat {
    let mut d = zeros(2);
    d[(0, 1)] = ONE * scale;
    d
}

/// s·σ_x.
pub fn sigma_x(scale: f64) -> CMat {
    let mut d = zeros(2);
    d[(0, 1)] = ONE * scale;
    d[(1, 0)] = ONE * scale;
    d
}

/// Rotating-wave model: H_S = diag(0,1), D = 0.1·|e₁⟩⟨e₂|.
pub fn tm_rwa() -> ModelSpec {
    two_level(1.0, lowering(0.1))
}

/// Non-rotating model: H_S = diag(0,1), D = 0.1·σ_x.
pub fn tm_nr() -> ModelSpec {
    two_level(1.0, sigma_x(0.1))
}
