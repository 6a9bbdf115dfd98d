//! Utility-optimal soft-TTL cache eviction.
//!
//! A soft-TTL policy keeps a non-increasing fraction of a file in the cache as
//! the time since its last request grows. This crate evaluates such policies
//! through renewal-reward identities, optimizes them under an average cache
//! capacity constraint for any alpha-fair utility, and does the same for the
//! TTL and fractional-TTL baselines. A Monte-Carlo renewal simulator checks the
//! analytic formulas.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod policy;
pub mod quadrature;
pub mod request_model;
pub mod simulator;
pub mod solver_constrained;
pub mod solver_soft;

pub use error::{Error, Result};

pub use policy::{aggregate_utility, evaluate_file, Fairness, FileEval, FileSpec, Instance, Policy, Utility};
pub use request_model::{DiscretizedModel, InterArrival};
pub use solver_soft::{PolicyClass, SolveResult};

/// Optimal policies of one class for an instance.
pub fn solve(inst: &Instance, class: PolicyClass) -> Result<SolveResult> {
    match class {
        PolicyClass::Soft => solver_soft::solve_multi_file(inst),
        PolicyClass::Fractional => solver_constrained::solve_fractional(inst),
        PolicyClass::Ttl => solver_constrained::solve_ttl(inst),
    }
}
