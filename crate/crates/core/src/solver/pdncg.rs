use std::ops::ControlFlow;

use super::line_search::line_search;
use super::pcg::pcg;
use super::SolverConfig;
use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, norm2};
use crate::operators::LinearMap;
use crate::pdsystem::{dual_couplings, dual_step, project_linf, Iterate, NewtonOperator};
use crate::preconditioner::{Preconditioner, PreconditionerKind};
use crate::smoothing::{HuberScalings, Objective};

/// Backtracks allowed once the regular Armijo search has failed.
const FALLBACK_BACKTRACKS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Gradient tolerance met.
    Converged,
    /// The configured quality target was reached.
    QualityReached,
    MaxOuter,
    /// No decrease was possible along the Newton or gradient direction.
    Stagnated,
    /// An observer asked to stop.
    Stopped,
}

/// One row of the solver trace. Values refer to the iterate at the start of
/// the iteration; the last row is the returned iterate and carries no step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub cg_iterations: usize,
    pub cg_converged: bool,
    pub step: f64,
    pub sufficient_decrease: bool,
    pub preconditioned: bool,
    pub quality: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterate: Iterate,
    pub trace: Vec<IterationRecord>,
    pub status: Status,
}

impl SolveReport {
    pub fn outer_iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn total_cg(&self) -> usize {
        self.trace.iter().map(|r| r.cg_iterations).sum()
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.trace.last().expect("trace holds the final iterate")
    }
}

/// The Newton system about to be solved, handed to observers.
pub struct NewtonSystem<'s, 'a> {
    pub iteration: usize,
    pub c: f64,
    pub mu: f64,
    pub iterate: &'s Iterate,
    pub gradient: &'s [f64],
    pub operator: &'s NewtonOperator<'a>,
    pub preconditioner: &'s Preconditioner<'a>,
}

/// Primal-dual Newton conjugate gradients for fixed `(c, μ)`.
pub fn pdncg(
    a: &LinearMap,
    w: &Dictionary,
    b: &[f64],
    c: f64,
    mu: f64,
    config: &SolverConfig,
    warm_start: Iterate,
) -> Result<SolveReport> {
    pdncg_observed(a, w, b, c, mu, config, warm_start, &mut |_| ControlFlow::Continue(()))
}

/// As [`pdncg`], calling `observer` before every inner solve.
#[allow(clippy::too_many_arguments)]
pub fn pdncg_observed(
    a: &LinearMap,
    w: &Dictionary,
    b: &[f64],
    c: f64,
    mu: f64,
    config: &SolverConfig,
    warm_start: Iterate,
    observer: &mut dyn FnMut(&NewtonSystem) -> ControlFlow<()>,
) -> Result<SolveReport> {
    config.validate()?;
    let obj = Objective::new(a, w, b, c, mu)?;
    check_len("warm start x", w.n(), warm_start.x.len())?;
    check_len("warm start g", w.l(), warm_start.g.len())?;
    let mut it = Iterate::new(warm_start.x, warm_start.g)?;

    let scale = norm2(&a.adjoint_apply(b)?).max(1.0);
    let tol = config.grad_tol * scale;
    let preconditioned = config.preconditioned_at(mu);
    let kind = PreconditionerKind::for_dictionary(w);

    let mut fx = obj.value_unchecked(&it.x);
    if !fx.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut trace = Vec::new();
    let mut k = 0;
    let status = loop {
        let s = HuberScalings::from_analysis(w.analyze_unchecked(&it.x), mu)?;
        let grad = obj.gradient_with(&s, &it.x);
        let grad_norm = norm2(&grad);
        let quality = match &config.stop {
            Some(rule) => Some(rule.measure(&it.x)?),
            None => None,
        };
        let mut record = IterationRecord {
            iteration: k,
            objective: fx,
            grad_norm,
            cg_iterations: 0,
            cg_converged: true,
            step: 0.0,
            sufficient_decrease: true,
            preconditioned,
            quality,
        };
        if grad_norm <= tol {
            trace.push(record);
            break Status::Converged;
        }
        if let (Some(rule), Some(q)) = (&config.stop, quality) {
            if rule.reached(q) {
                trace.push(record);
                break Status::QualityReached;
            }
        }
        if k == config.max_outer {
            trace.push(record);
            break Status::MaxOuter;
        }

        let couplings = dual_couplings(&s, &it)?;
        let op = NewtonOperator::new(&s, &couplings, w, a, c)?;
        let pre = if preconditioned {
            Preconditioner::build(kind, &op.blocks, w, c, config.rho)?
        } else {
            Preconditioner::identity(w.n())
        };
        let system = NewtonSystem {
            iteration: k,
            c,
            mu,
            iterate: &it,
            gradient: &grad,
            operator: &op,
            preconditioner: &pre,
        };
        if observer(&system).is_break() {
            trace.push(record);
            break Status::Stopped;
        }

        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let inner = pcg(&op, &rhs, &pre, config.eta, config.max_cg)?;
        record.cg_iterations = inner.iterations;
        record.cg_converged = inner.converged;

        let dg = dual_step(&couplings, &s, w, &it, &inner.dx)?;
        let mut g = it.g.clone();
        axpy(1.0, &dg.re, &mut g.re);
        axpy(1.0, &dg.im, &mut g.im);
        it.g = project_linf(&g);

        let f = |z: &[f64]| Ok(obj.value_unchecked(z));
        let mut ls = line_search(
            f,
            fx,
            &grad,
            &it.x,
            &inner.dx,
            config.tau1,
            config.tau2,
            config.max_backtracks,
        )?;
        let mut dx = inner.dx;
        if !ls.sufficient_decrease {
            // keep backtracking along the Newton direction beyond the cap,
            // then try steepest descent
            ls = line_search(f, fx, &grad, &it.x, &dx, config.tau1, config.tau2, FALLBACK_BACKTRACKS)?;
            if !ls.sufficient_decrease {
                dx = rhs;
                ls = line_search(f, fx, &grad, &it.x, &dx, config.tau1, config.tau2, FALLBACK_BACKTRACKS)?;
            }
            record.sufficient_decrease = false;
            if !(ls.value < fx) {
                trace.push(record);
                break Status::Stagnated;
            }
        }
        axpy(ls.alpha, &dx, &mut it.x);
        fx = ls.value;
        if !fx.is_finite() {
            return Err(Error::Divergence { iteration: k });
        }
        record.step = ls.alpha;
        trace.push(record);
        k += 1;
    };
    Ok(SolveReport {
        iterate: it,
        trace,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::ComplexVec;
    use crate::operators::DctShape;
    use crate::solver::{Preconditioning, StopRule};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_data_terminates_at_origin() {
        let a = LinearMap::partial_dct(DctShape::Square(4), 4, 1).unwrap();
        let w = Dictionary::itv(4).unwrap();
        let r = pdncg(&a, &w, &[0.0; 4], 1.0, 0.1, &SolverConfig::default(), Iterate::zeros(16, 16))
            .unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.outer_iterations(), 0);
        assert_eq!(r.iterate.x, vec![0.0; 16]);
        assert_eq!(r.final_record().grad_norm, 0.0);
    }

    #[test]
    fn scalar_problem_matches_root_of_optimality_condition() {
        let a = LinearMap::dense(DMatrix::from_element(1, 1, 1.0));
        let w = Dictionary::identity(1);
        let (c, mu) = (1.0, 1e-6);
        // bisection on x − 3 + c·x/√(μ² + x²) = 0
        let h = |x: f64| x - 3.0 + c * x / (mu * mu + x * x).sqrt();
        let (mut lo, mut hi) = (0.0f64, 3.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if h(m) > 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        let config = SolverConfig {
            grad_tol: 1e-12,
            ..SolverConfig::default()
        };
        let r = pdncg(&a, &w, &[3.0], c, mu, &config, Iterate::zeros(1, 1)).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.iterate.x[0] - lo).abs() < 1e-9);
        assert!((r.iterate.x[0] - 2.0).abs() < 1e-3);
    }

    fn random_itv(seed: u64, p: usize) -> (LinearMap, Dictionary, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = LinearMap::partial_dct(DctShape::Square(p), p * p / 3, seed).unwrap();
        let w = Dictionary::itv(p).unwrap();
        let x: Vec<f64> = (0..p * p).map(|_| rng.random_range(0.0..1.0)).collect();
        let b = a.apply(&x).unwrap();
        (a, w, b)
    }

    #[test]
    fn objective_monotone_and_duals_feasible() {
        for seed in 0..4 {
            let (a, w, b) = random_itv(seed, 8);
            for (mu, pre) in [(1e-2, Preconditioning::Never), (1e-4, Preconditioning::Always)] {
                let config = SolverConfig {
                    preconditioning: pre,
                    max_outer: 60,
                    ..SolverConfig::default()
                };
                let mut worst = 0.0f64;
                let mut observer = |sys: &NewtonSystem| {
                    worst = worst.max(sys.iterate.g.norm_inf());
                    ControlFlow::Continue(())
                };
                let r = pdncg_observed(&a, &w, &b, 0.05, mu, &config, Iterate::zeros(64, 64), &mut observer)
                    .unwrap();
                assert!(worst <= 1.0 + 1e-12);
                assert!(r.iterate.g.norm_inf() <= 1.0 + 1e-12);
                for pair in r.trace.windows(2) {
                    assert!(pair[1].objective <= pair[0].objective);
                }
                assert_eq!(r.status, Status::Converged, "seed {seed}, mu {mu}");
            }
        }
    }

    #[test]
    fn observer_can_stop_and_quality_rule_applies() {
        let (a, w, b) = random_itv(7, 6);
        let mut calls = 0;
        let r = pdncg_observed(
            &a,
            &w,
            &b,
            0.1,
            1e-2,
            &SolverConfig::default(),
            Iterate::zeros(36, 36),
            &mut |_| {
                calls += 1;
                if calls == 2 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        )
        .unwrap();
        assert_eq!(r.status, Status::Stopped);
        assert_eq!(r.outer_iterations(), 1);

        let exact = pdncg(&a, &w, &b, 0.1, 1e-2, &SolverConfig::default(), Iterate::zeros(36, 36))
            .unwrap()
            .iterate
            .x;
        let config = SolverConfig {
            stop: Some(StopRule::RelativeError {
                reference: exact,
                tol: 0.5,
            }),
            ..SolverConfig::default()
        };
        let r = pdncg(&a, &w, &b, 0.1, 1e-2, &config, Iterate::zeros(36, 36)).unwrap();
        assert_eq!(r.status, Status::QualityReached);
        assert!(r.final_record().quality.unwrap() <= 0.5);
    }

    #[test]
    fn infeasible_warm_start_is_rejected() {
        let (a, w, b) = random_itv(3, 4);
        let warm = Iterate {
            x: vec![0.0; 16],
            g: ComplexVec {
                re: vec![2.0; 16],
                im: vec![0.0; 16],
            },
        };
        assert!(pdncg(&a, &w, &b, 0.1, 1e-2, &SolverConfig::default(), warm).is_err());
    }
}
