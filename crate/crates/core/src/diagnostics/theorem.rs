//! Numerical check of the eigenvalue bound for the preconditioned Hessian
//! `N⁻¹∇²f` with `N = c∇²ψ_μ + ρI`, on instances small enough to
//! brute-force the restricted isometry constant.

use nalgebra::DMatrix;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::operators::{rip_constant_bruteforce, LinearMap};
use crate::par::Execution;
use crate::preconditioner::theorem_bound;
use crate::smoothing::{huber_hessian_vec, huber_scalings};

use super::spectrum::densify;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheck {
    pub sigma: usize,
    pub nu: f64,
    pub delta_sigma: f64,
    /// `‖AAᵀ − I‖₂`
    pub delta: f64,
    pub rho: f64,
    pub lambda_min_term: f64,
    pub bound_nonkernel: f64,
    pub bound_kernel: f64,
    /// Generalized eigenvalues of `(∇²f, N)`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl TheoremCheck {
    pub fn bound(&self) -> f64 {
        self.bound_nonkernel.max(self.bound_kernel)
    }

    pub fn max_deviation(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| (l - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn violations(&self) -> usize {
        let b = self.bound();
        self.eigenvalues
            .iter()
            .filter(|l| (*l - 1.0).abs() > b)
            .count()
    }
}

/// Smallest strictly positive ρ considered.
const RHO_FLOOR: f64 = 1e-3;

/// Evaluates the bound at `x` with `σ` coordinates declared small
/// (`#(D_i < ν) = σ`). `rho_position ∈ [0, 1]` places `ρ` inside the
/// admissible interval `[max(δ_σ, ε), 1/2]`.
pub fn check_theorem_instance(
    a: &LinearMap,
    w: &Dictionary,
    x: &[f64],
    c: f64,
    mu: f64,
    sigma: usize,
    rho_position: f64,
) -> Result<TheoremCheck> {
    let l = w.l();
    if sigma == 0 || sigma >= l {
        return Err(Error::Parameter {
            name: "sigma",
            reason: format!("must lie in 1..{l}, got {sigma}"),
        });
    }
    let s = huber_scalings(w, x, mu)?;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| s.d[i].total_cmp(&s.d[j]));
    let (below, above) = (s.d[order[sigma - 1]], s.d[order[sigma]]);
    if below >= above {
        return Err(Error::Parameter {
            name: "sigma",
            reason: "tied scalings admit no threshold with this count".into(),
        });
    }
    let nu = 0.5 * (below + above);

    let delta_sigma = rip_constant_bruteforce(a, w, sigma)?;
    if delta_sigma >= 0.5 {
        return Err(Error::Parameter {
            name: "delta_sigma",
            reason: format!("restricted isometry constant {delta_sigma} is not below 1/2"),
        });
    }
    let lo = delta_sigma.max(RHO_FLOOR);
    let rho = lo + rho_position.clamp(0.0, 1.0) * (0.5 - lo);

    let ad = a.to_dense();
    let aat = &ad * ad.transpose() - DMatrix::identity(a.m(), a.m());
    let delta = aat
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let chi = 1.0 + delta - rho;

    let (wr, wi) = w.to_dense_split();
    let complement: Vec<usize> = order[sigma..].to_vec();
    let (r, i) = (wr.select_columns(&complement), wi.select_columns(&complement));
    let gram = &r * r.transpose() + &i * i.transpose();
    let eig = gram.symmetric_eigenvalues();
    let top = eig.iter().fold(0.0f64, |m, v| m.max(*v));
    let lambda_min_term = eig
        .iter()
        .copied()
        .filter(|v| *v > 1e-10 * top)
        .fold(f64::INFINITY, f64::min);
    let lambda_min_term = if lambda_min_term.is_finite() {
        lambda_min_term
    } else {
        0.0
    };

    let bound_nonkernel = theorem_bound(chi, rho, c, mu, nu, lambda_min_term)?;
    let bound_kernel = theorem_bound(chi, rho, c, mu, nu, 0.0)?;

    // dense ∇²ψ, then the pencil (c∇²ψ + AᵀA, c∇²ψ + ρI)
    let n = w.n();
    let hpsi = densify(
        &crate::linalg::FnOperator::new(n, |v: &[f64]| {
            huber_hessian_vec(&s, w, v).expect("dimension checked")
        }),
        Execution::Sequential,
    )?;
    let hess = &hpsi * c + ad.transpose() * &ad;
    let nmat = &hpsi * c + DMatrix::identity(n, n) * rho;
    let chol = nmat.cholesky().ok_or(Error::Factorization {
        block: 0,
        pivot: f64::NAN,
    })?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or(Error::Factorization { block: 0, pivot: 0.0 })?;
    let sym = &linv * hess * linv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);

    Ok(TheoremCheck {
        sigma,
        nu,
        delta_sigma,
        delta,
        rho,
        lambda_min_term,
        bound_nonkernel,
        bound_kernel,
        eigenvalues,
    })
}
