use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    /// Accepted step `τ₁ʲ`, or `τ₁^max_backtracks` when nothing qualified.
    pub alpha: f64,
    pub backtracks: usize,
    /// Objective at `x + α·dx`.
    pub value: f64,
    pub sufficient_decrease: bool,
    /// `∇fᵀdx < 0` held.
    pub descent: bool,
}

/// Backtracking Armijo search: least `j ≥ 0` with
/// `f(x + τ₁ʲdx) ≤ f(x) + τ₂τ₁ʲ∇fᵀdx`.
#[allow(clippy::too_many_arguments)]
pub fn line_search<F>(
    f: F,
    fx: f64,
    grad: &[f64],
    x: &[f64],
    dx: &[f64],
    tau1: f64,
    tau2: f64,
    max_backtracks: usize,
) -> Result<LineSearchOutcome>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(tau1 > 0.0 && tau1 < 1.0) {
        return Err(Error::Parameter {
            name: "tau1",
            reason: format!("must lie in (0, 1), got {tau1}"),
        });
    }
    if !(tau2 > 0.0 && tau2 < 0.5) {
        return Err(Error::Parameter {
            name: "tau2",
            reason: format!("must lie in (0, 1/2), got {tau2}"),
        });
    }
    let slope = dot(grad, dx);
    let descent = slope < 0.0;
    let mut trial = vec![0.0; x.len()];
    let mut alpha = 1.0;
    let mut value = f64::NAN;
    for j in 0..=max_backtracks {
        if j > 0 {
            alpha *= tau1;
        }
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(dx) {
            *t = xi + alpha * di;
        }
        value = f(&trial)?;
        if descent && value <= fx + tau2 * alpha * slope {
            return Ok(LineSearchOutcome {
                alpha,
                backtracks: j,
                value,
                sufficient_decrease: true,
                descent,
            });
        }
    }
    Ok(LineSearchOutcome {
        alpha,
        backtracks: max_backtracks,
        value,
        sufficient_decrease: false,
        descent,
    })
}
