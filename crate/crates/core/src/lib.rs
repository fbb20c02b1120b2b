//! Primal-dual Newton conjugate gradients for compressed sensing problems
//! regularized by ℓ1-analysis or isotropic total variation.
//!
//! The solver minimizes `f(x) = c·ψ_μ(W*x) + ½‖Ax − b‖²` where `ψ_μ` is the
//! pseudo-Huber approximation of the ℓ1 norm, using Newton steps on a
//! primal-dual linearization solved by preconditioned conjugate gradients.

pub mod error;
pub mod linalg;
pub mod par;

pub mod diagnostics;
pub mod dictionary;
pub mod operators;
pub mod pdsystem;
pub mod preconditioner;
pub mod problem;
#[cfg(test)]
mod proptests;
pub mod smoothing;
pub mod solver;

pub use dictionary::{ComplexVec, Dictionary, DictionaryKind};
pub use error::{Error, Result};
pub use operators::{rip_constant_bruteforce, DctShape, LinearMap};
pub use par::Execution;
pub use pdsystem::{dual_couplings, DualCouplings, Iterate, NewtonOperator, SymBlocks};
pub use preconditioner::{theorem_bound, Preconditioner, PreconditionerKind};
pub use solver::{
    compute_theta, continuation, pdncg, ContinuationSchedule, DualInit, Preconditioning,
    SolverConfig, StopRule,
};
pub use smoothing::{grad_objective, huber_scalings, huber_value, objective, HuberScalings, Objective};
