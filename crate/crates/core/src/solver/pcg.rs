use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm2, SymmetricOperator};
use crate::preconditioner::Preconditioner;

/// Iterations between recomputations of the true residual.
pub const RESIDUAL_REFRESH: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub dx: Vec<f64>,
    pub iterations: usize,
    /// `‖B̂·dx − rhs‖ / ‖rhs‖` at exit, from the true residual.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients from the zero initial guess, stopped
/// once `‖B̂·dx − rhs‖ ≤ η‖rhs‖` holds for the true residual.
pub fn pcg(
    op: &impl SymmetricOperator,
    rhs: &[f64],
    precond: &Preconditioner,
    eta: f64,
    max_cg: usize,
) -> Result<PcgOutcome> {
    let n = op.dim();
    check_len("pcg rhs", n, rhs.len())?;
    check_len("pcg preconditioner", n, precond.dim())?;
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Parameter {
            name: "eta",
            reason: format!("must lie in [0, 1), got {eta}"),
        });
    }
    let rhs_norm = norm2(rhs);
    let mut dx = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(PcgOutcome {
            dx,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let target = eta * rhs_norm;
    let mut r = rhs.to_vec();
    let mut z = precond.solve(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut residual = rhs_norm;
    while iterations < max_cg {
        let q = op.apply(&p);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::Definiteness {
                iteration: iterations,
                curvature,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut dx);
        axpy(-alpha, &q, &mut r);
        iterations += 1;

        residual = norm2(&r);
        if residual <= target || iterations % RESIDUAL_REFRESH == 0 {
            r = true_residual(op, rhs, &dx);
            residual = norm2(&r);
            if residual <= target {
                break;
            }
        }
        z = precond.solve(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgOutcome {
        dx,
        iterations,
        relative_residual: residual / rhs_norm,
        converged: residual <= target,
    })
}

fn true_residual(op: &impl SymmetricOperator, rhs: &[f64], dx: &[f64]) -> Vec<f64> {
    let bx = op.apply(dx);
    rhs.iter().zip(&bx).map(|(b, v)| b - v).collect()
}
