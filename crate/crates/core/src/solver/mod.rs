//! Inner PCG solves, Armijo backtracking, the primal-dual Newton loop and
//! the continuation driver.

mod continuation;
mod line_search;
mod pcg;
mod pdncg;

pub use continuation::{
    compute_theta, continuation, continuation_observed, ContinuationReport,
    ContinuationSchedule, StageReport,
};
pub use line_search::{line_search, LineSearchOutcome};
pub use pcg::{pcg, PcgOutcome, RESIDUAL_REFRESH};
pub use pdncg::{pdncg, pdncg_observed, IterationRecord, NewtonSystem, SolveReport, Status};

use crate::diagnostics::metrics::{psnr, relative_error, snr};
use crate::error::{Error, Result};

/// When the Newton systems are preconditioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioning {
    /// Once `μ ≤ precond_activation_mu`.
    #[default]
    Auto,
    Always,
    Never,
}

/// Dual variables at the start of a continuation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualInit {
    /// Keep the projected duals of the previous stage.
    #[default]
    Carry,
    /// Reset to `g = D·W*x` at the new `μ`.
    Consistent,
}

/// Caller-supplied quality stop, checked against a known ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum StopRule {
    Psnr { reference: Vec<f64>, peak: f64, target_db: f64 },
    Snr { reference: Vec<f64>, target_db: f64 },
    RelativeError { reference: Vec<f64>, tol: f64 },
}

impl StopRule {
    /// Quality of `x` in the rule's own unit.
    pub fn measure(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            StopRule::Psnr { reference, peak, .. } => psnr(reference, x, *peak)?.value(),
            StopRule::Snr { reference, .. } => snr(reference, x)?.value(),
            StopRule::RelativeError { reference, .. } => relative_error(reference, x)?,
        })
    }

    pub fn reached(&self, quality: f64) -> bool {
        match self {
            StopRule::Psnr { target_db, .. } | StopRule::Snr { target_db, .. } => {
                quality >= *target_db
            }
            StopRule::RelativeError { tol, .. } => quality <= *tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative residual tolerance of the inner solves.
    pub eta: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub max_backtracks: usize,
    pub max_outer: usize,
    pub max_cg: usize,
    pub rho: f64,
    pub precond_activation_mu: f64,
    pub preconditioning: Preconditioning,
    /// Stop once `‖∇f‖ ≤ grad_tol·max(1, ‖Aᵀb‖)`.
    pub grad_tol: f64,
    /// Gradient tolerance for every continuation stage but the last.
    pub stage_grad_tol: f64,
    pub stop: Option<StopRule>,
    pub dual_init: DualInit,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            tau1: 0.9,
            tau2: 1e-3,
            max_backtracks: 10,
            max_outer: 200,
            max_cg: 200,
            rho: 0.5,
            precond_activation_mu: 1e-4,
            preconditioning: Preconditioning::Auto,
            grad_tol: 1e-6,
            stage_grad_tol: 1e-3,
            stop: None,
            dual_init: DualInit::Carry,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::Parameter { name, reason });
        if !(0.0..1.0).contains(&self.eta) {
            return bad("eta", format!("must lie in [0, 1), got {}", self.eta));
        }
        if !(self.tau1 > 0.0 && self.tau1 < 1.0) {
            return bad("tau1", format!("must lie in (0, 1), got {}", self.tau1));
        }
        if !(self.tau2 > 0.0 && self.tau2 < 0.5) {
            return bad("tau2", format!("must lie in (0, 1/2), got {}", self.tau2));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho", format!("must be positive, got {}", self.rho));
        }
        if !(self.grad_tol >= 0.0 && self.stage_grad_tol >= 0.0) {
            return bad("grad_tol", "tolerances must be nonnegative".into());
        }
        if self.max_cg == 0 {
            return bad("max_cg", "must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn preconditioned_at(&self, mu: f64) -> bool {
        match self.preconditioning {
            Preconditioning::Always => true,
            Preconditioning::Never => false,
            Preconditioning::Auto => mu <= self.precond_activation_mu,
        }
    }
}
