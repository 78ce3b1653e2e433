//! Low-density-limit quantum Markov generators.
//!
//! Starting from a system Hamiltonian, a coupling operator `D` and the energy
//! densities of two reservoir form factors, the crate builds the scattering
//! blocks `(1 + T_ε)⁻¹`, the coefficients `R^{ε₁ε₂}_{ωω′}(E)`, the drift `Γ`
//! and a Lindblad generator, and integrates the reduced dynamics.

// Negated comparisons are deliberate: NaN inputs must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod dynamics;
pub mod error;
pub mod generator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod reference;
pub mod tmatrix;
pub mod verification;

pub use error::{Error, Result};
pub use model::{load_model, Model, ModelSpec};
