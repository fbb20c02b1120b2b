use std::ops::ControlFlow;

use super::pdncg::{pdncg_observed, NewtonSystem, SolveReport};
use super::{DualInit, SolverConfig};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::operators::LinearMap;
use crate::pdsystem::Iterate;

/// Starting value of both `c` and `μ` when continuation is used.
pub const CONTINUATION_START: f64 = 0.1;

/// `⌈x⌉`, except that values within rounding error of an integer map to it.
fn robust_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 {
        r
    } else {
        x.ceil()
    }
}

/// Number of continuation subintervals:
/// `max(⌈log10(1/c̃)⌉, ⌈log10(1/μ̃)⌉)`, never negative.
pub fn compute_theta(c_final: f64, mu_final: f64) -> usize {
    let c = robust_ceil(-c_final.log10());
    let m = robust_ceil(-mu_final.log10());
    c.max(m).max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    /// `(c^j, μ^j)` for `j = 0..=ϑ`; a single pair when `ϑ < 2`.
    pub pairs: Vec<(f64, f64)>,
}

impl ContinuationSchedule {
    pub fn new(c_final: f64, mu_final: f64) -> Result<Self> {
        for (name, v) in [("c_final", c_final), ("mu_final", mu_final)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("must lie in (0, 1], got {v}"),
                });
            }
        }
        let theta = compute_theta(c_final, mu_final);
        if theta < 2 {
            return Ok(Self {
                pairs: vec![(c_final, mu_final)],
            });
        }
        let geometric = |end: f64, j: usize| {
            if j == theta {
                return end;
            }
            let (l0, l1) = (CONTINUATION_START.log10(), end.log10());
            10f64.powf(l0 + (l1 - l0) * j as f64 / theta as f64)
        };
        let pairs = (0..=theta)
            .map(|j| {
                if j == 0 {
                    (CONTINUATION_START, CONTINUATION_START)
                } else {
                    (geometric(c_final, j), geometric(mu_final, j))
                }
            })
            .collect();
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: usize,
    pub c: f64,
    pub mu: f64,
    pub preconditioned: bool,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct ContinuationReport {
    pub iterate: Iterate,
    pub stages: Vec<StageReport>,
}

impl ContinuationReport {
    pub fn total_cg(&self) -> usize {
        self.stages.iter().map(|s| s.report.total_cg()).sum()
    }

    pub fn outer_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.report.outer_iterations()).sum()
    }
}

/// Solves the sequence of subproblems of the continuation schedule, each
/// warm-started from the previous one, ending at exactly `(c̃, μ̃)`.
pub fn continuation(
    a: &LinearMap,
    w: &Dictionary,
    b: &[f64],
    c_final: f64,
    mu_final: f64,
    config: &SolverConfig,
) -> Result<ContinuationReport> {
    continuation_observed(a, w, b, c_final, mu_final, config, &mut |_, _| {
        ControlFlow::Continue(())
    })
}

/// As [`continuation`], calling `observer(stage, system)` before every
/// inner solve. Breaking stops the current stage and the whole run.
pub fn continuation_observed(
    a: &LinearMap,
    w: &Dictionary,
    b: &[f64],
    c_final: f64,
    mu_final: f64,
    config: &SolverConfig,
    observer: &mut dyn FnMut(usize, &NewtonSystem) -> ControlFlow<()>,
) -> Result<ContinuationReport> {
    let schedule = ContinuationSchedule::new(c_final, mu_final)?;
    let last = schedule.len() - 1;
    let mut iterate = Iterate::zeros(w.n(), w.l());
    let mut stages = Vec::with_capacity(schedule.len());
    for (j, &(c, mu)) in schedule.pairs.iter().enumerate() {
        let mut stage_config = config.clone();
        if j < last {
            stage_config.grad_tol = config.stage_grad_tol;
            stage_config.stop = None;
        }
        if j > 0 && config.dual_init == DualInit::Consistent {
            iterate = Iterate::consistent(w, iterate.x, mu).map_err(|e| wrap(j, e))?;
        }
        let mut stopped = false;
        let report = pdncg_observed(a, w, b, c, mu, &stage_config, iterate, &mut |sys| {
            let flow = observer(j, sys);
            stopped |= flow.is_break();
            flow
        })
        .map_err(|e| wrap(j, e))?;
        iterate = report.iterate.clone();
        stages.push(StageReport {
            stage: j,
            c,
            mu,
            preconditioned: stage_config.preconditioned_at(mu),
            report,
        });
        if stopped {
            break;
        }
    }
    Ok(ContinuationReport { iterate, stages })
}

fn wrap(stage: usize, e: Error) -> Error {
    Error::Stage {
        stage,
        source: Box::new(e),
    }
}
