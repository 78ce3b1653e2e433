//! Numerical checks of the weak-coupling limits and of the identities the
//! generator construction relies on.

mod limits;
mod suite;

pub use limits::{causal_ratio, check_causal_delta_limit, check_delta_limit, LimitCheckReport, TestFunction};
pub use suite::{
    diagonal_projection_residual, neumann_residual, probe_energies, run_identity_suite, run_limit_suite, CheckResult,
    SuiteReport, LIMIT_LAMBDAS,
};

#[cfg(test)]
mod tests;
