use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SymmetricOperator;
use crate::par::Execution;
use crate::preconditioner::Preconditioner;

/// Largest dimension that is densified.
pub const DENSE_LIMIT: usize = 4096;

/// Band around one used for clustering summaries.
pub const DEFAULT_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub preconditioned: bool,
    pub iteration: usize,
    pub band: (f64, f64),
}

impl SpectralReport {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// Fraction of eigenvalues inside `band` (inclusive).
    pub fn band_fraction(&self) -> f64 {
        if self.eigenvalues.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.band;
        let inside = self
            .eigenvalues
            .iter()
            .filter(|&&v| v >= lo && v <= hi)
            .count();
        inside as f64 / self.eigenvalues.len() as f64
    }

    /// Linearly interpolated quantile, `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.eigenvalues.len();
        if n == 0 {
            return f64::NAN;
        }
        let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let t = pos - lo as f64;
        self.eigenvalues[lo] * (1.0 - t) + self.eigenvalues[hi] * t
    }

    pub fn interquartile_range(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    pub const CSV_HEADER: &'static str = "iteration,preconditioned,min,max,band_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.17e},{:.17e},{:.17e}",
            self.iteration,
            u8::from(self.preconditioned),
            self.min(),
            self.max(),
            self.band_fraction()
        )
    }
}

fn refuse_large(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge(format!(
            "dense spectrum of dimension {n} exceeds {DENSE_LIMIT}"
        )));
    }
    Ok(())
}

/// Materializes `column(j) = f(e_j)` and symmetrizes.
fn densify_columns<F>(n: usize, exec: Execution, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send,
{
    refuse_large(n)?;
    let cols = exec.map_range(n, |j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        f(&e)
    });
    let mut m = DMatrix::zeros(n, n);
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        m.column_mut(j).copy_from_slice(&col);
    }
    let t = m.transpose();
    Ok((m + t) * 0.5)
}

/// Dense symmetric matrix of `op`, built by applying it to basis vectors.
pub fn densify(op: &(impl SymmetricOperator + Sync), exec: Execution) -> Result<DMatrix<f64>> {
    densify_columns(op.dim(), exec, |e| Ok(op.apply(e)))
}

fn report(m: DMatrix<f64>, preconditioned: bool, iteration: usize) -> SpectralReport {
    let mut eigenvalues: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    SpectralReport {
        eigenvalues,
        preconditioned,
        iteration,
        band: DEFAULT_BAND,
    }
}

/// All eigenvalues of the symmetrized dense form of `op`.
pub fn densify_and_eig(
    op: &(impl SymmetricOperator + Sync),
    iteration: usize,
    exec: Execution,
) -> Result<SpectralReport> {
    Ok(report(densify(op, exec)?, false, iteration))
}

/// Eigenvalues of `F⁻¹ B̂ F⁻ᵀ` for the factor `Ñ = F Fᵀ`, which is similar
/// to `Ñ⁻¹B̂`.
pub fn preconditioned_spectrum(
    op: &(impl SymmetricOperator + Sync),
    pre: &Preconditioner,
    iteration: usize,
    exec: Execution,
) -> Result<SpectralReport> {
    let m = densify_columns(op.dim(), exec, |e| {
        let v = pre.solve_right(e)?;
        pre.solve_left(&op.apply(&v))
    })?;
    let preconditioned = !matches!(pre, Preconditioner::Identity { .. });
    Ok(report(m, preconditioned, iteration))
}
