//! The preconditioner `Ñ = c·sym(B̃) + ρI`.
//!
//! For iTV dictionaries `Ñ` is block tridiagonal with `p × p` blocks:
//! tridiagonal `C_j` on the diagonal and upper-bidiagonal `K_j` below it
//! (nonzero diagonals at offsets `0, ±1, ±(p−1), ±p`). It is factored as
//! `Ñ = L̃L̃ᵀ` with the block recurrences
//!
//! ```text
//! L_1 L_1ᵀ = C_1
//! U_j L_jᵀ = K_j
//! U_{j−1} U_{j−1}ᵀ + L_j L_jᵀ = C_j
//! ```
//!
//! For a real orthonormal `W`, `Ñ = W (c·S + ρI) Wᵀ` with diagonal `S` and
//! is inverted with two dictionary passes.

use nalgebra::DMatrix;

use crate::dictionary::{Dictionary, DictionaryKind};
use crate::error::{check_len, Error, Result};
use crate::linalg::SymmetricOperator;
use crate::pdsystem::SymBlocks;
use crate::smoothing::check_positive;

/// Symmetric `n × n` matrix (`n = p²`) with lower bandwidth `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetric {
    p: usize,
    n: usize,
    /// `band[k * (p + 1) + o]` holds entry `(k + o, k)`.
    band: Vec<f64>,
}

impl BandedSymmetric {
    fn zeros(p: usize) -> Self {
        let n = p * p;
        Self {
            p,
            n,
            band: vec![0.0; n * (p + 1)],
        }
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let o = r - c;
        if o > self.p {
            0.0
        } else {
            self.band[c * (self.p + 1) + o]
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let o = r - c;
        debug_assert!(o <= self.p);
        self.band[c * (self.p + 1) + o] += v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Offsets `r − c ≥ 0` that carry at least one nonzero.
    pub fn nonzero_offsets(&self) -> Vec<usize> {
        (0..=self.p)
            .filter(|&o| (0..self.n - o.min(self.n)).any(|c| self.band[c * (self.p + 1) + o] != 0.0))
            .collect()
    }

    fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|k| self.band[k * (self.p + 1)]).fold(0.0, f64::max)
    }

    /// Dense `p × p` block at block row `bi`, block column `bj` (`bi ≥ bj`).
    fn block(&self, bi: usize, bj: usize) -> DMatrix<f64> {
        let p = self.p;
        DMatrix::from_fn(p, p, |r, c| self.get(bi * p + r, bj * p + c))
    }
}

impl SymmetricOperator for BandedSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let w = self.p + 1;
        for c in 0..self.n {
            let row = &self.band[c * w..(c + 1) * w];
            out[c] += row[0] * v[c];
            for o in 1..w {
                let r = c + o;
                if r >= self.n {
                    break;
                }
                out[r] += row[o] * v[c];
                out[c] += row[o] * v[r];
            }
        }
        out
    }
}

/// Explicit `Ñ = c·sym(B̃) + ρI` for an iTV dictionary.
pub fn assemble_itv(
    blocks: &SymBlocks,
    w: &Dictionary,
    c: f64,
    rho: f64,
) -> Result<BandedSymmetric> {
    let p = w.itv_side().ok_or(Error::Kind { expected: "itv" })?;
    check_positive("c", c)?;
    check_positive("rho", rho)?;
    check_len("assemble_itv", w.l(), blocks.s11.len())?;
    let mut m = BandedSymmetric::zeros(p);
    for j in 0..p {
        for i in 0..p {
            let k = i + p * j;
            let has_v = i + 1 < p;
            let has_h = j + 1 < p;
            m.add(k, k, rho);
            if has_v {
                let s = c * blocks.s11[k];
                m.add(k, k, s);
                m.add(k + 1, k + 1, s);
                m.add(k + 1, k, -s);
            }
            if has_h {
                let s = c * blocks.s22[k];
                m.add(k, k, s);
                m.add(k + p, k + p, s);
                m.add(k + p, k, -s);
            }
            if has_v && has_h {
                // rv = e_{k+1} − e_k, rh = e_{k+p} − e_k; adds s12·(rv rhᵀ + rh rvᵀ)
                let s = c * blocks.s12[k];
                m.add(k, k, 2.0 * s);
                m.add(k + p, k, -s);
                m.add(k + 1, k, -s);
                m.add(k + p, k + 1, s);
            }
        }
    }
    Ok(m)
}

/// Cholesky factor of a block-tridiagonal `Ñ`: diagonal blocks `L_j`
/// (lower triangular) and subdiagonal blocks `U_j`.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    p: usize,
    lower: Vec<DMatrix<f64>>,
    sub: Vec<DMatrix<f64>>,
}

/// Relative pivot threshold declaring loss of definiteness.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

fn dense_cholesky_in_place(a: &mut DMatrix<f64>, min_pivot: f64) -> std::result::Result<(), f64> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > min_pivot) {
            return Err(d);
        }
        let ljj = d.sqrt();
        a[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / ljj;
        }
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L z = r` in place for lower-triangular `L`.
fn forward_subst(l: &DMatrix<f64>, r: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = r[i];
        for k in 0..i {
            s -= l[(i, k)] * r[k];
        }
        r[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ z = r` in place for lower-triangular `L`.
fn backward_subst(l: &DMatrix<f64>, r: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = r[i];
        for k in i + 1..n {
            s -= l[(k, i)] * r[k];
        }
        r[i] = s / l[(i, i)];
    }
}

/// Factors an assembled iTV preconditioner block by block.
pub fn block_cholesky(m: &BandedSymmetric) -> Result<BlockCholesky> {
    let p = m.p;
    let min_pivot = PIVOT_TOLERANCE * m.max_diagonal();
    let mut lower = Vec::with_capacity(p);
    let mut sub: Vec<DMatrix<f64>> = Vec::with_capacity(p.saturating_sub(1));
    for j in 0..p {
        // Schur complement C_j − U_{j−1} U_{j−1}ᵀ
        let mut schur = m.block(j, j);
        if let Some(u) = sub.last() {
            schur -= u * u.transpose();
        }
        dense_cholesky_in_place(&mut schur, min_pivot)
            .map_err(|pivot| Error::Factorization { block: j, pivot })?;
        if j + 1 < p {
            // U_j L_jᵀ = K_j  ⇔  L_j U_jᵀ = K_jᵀ, one row of U_j at a time
            let k = m.block(j + 1, j);
            let mut u = DMatrix::zeros(p, p);
            let mut row = vec![0.0; p];
            for r in 0..p {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = k[(r, c)];
                }
                forward_subst(&schur, &mut row);
                for (c, v) in row.iter().enumerate() {
                    u[(r, c)] = *v;
                }
            }
            sub.push(u);
        }
        lower.push(schur);
    }
    Ok(BlockCholesky { p, lower, sub })
}

impl BlockCholesky {
    pub fn side(&self) -> usize {
        self.p
    }

    pub fn lower_blocks(&self) -> &[DMatrix<f64>] {
        &self.lower
    }

    pub fn sub_blocks(&self) -> &[DMatrix<f64>] {
        &self.sub
    }

    /// Dense `L̃`. Diagnostics only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.p;
        let mut l = DMatrix::zeros(p * p, p * p);
        for (j, b) in self.lower.iter().enumerate() {
            l.view_mut((j * p, j * p), (p, p)).copy_from(b);
        }
        for (j, u) in self.sub.iter().enumerate() {
            l.view_mut(((j + 1) * p, j * p), (p, p)).copy_from(u);
        }
        l
    }

    /// `L̃⁻¹ r`
    pub fn solve_lower(&self, r: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut z = r.to_vec();
        for j in 0..p {
            if j > 0 {
                let (done, rest) = z.split_at_mut(j * p);
                let prev = &done[(j - 1) * p..];
                let u = &self.sub[j - 1];
                for row in 0..p {
                    let mut s = 0.0;
                    for col in 0..p {
                        s += u[(row, col)] * prev[col];
                    }
                    rest[row] -= s;
                }
            }
            forward_subst(&self.lower[j], &mut z[j * p..(j + 1) * p]);
        }
        z
    }

    /// `L̃⁻ᵀ z`
    pub fn solve_upper(&self, z: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut x = z.to_vec();
        for j in (0..p).rev() {
            if j + 1 < p {
                let (head, tail) = x.split_at_mut((j + 1) * p);
                let next = &tail[..p];
                let u = &self.sub[j];
                let cur = &mut head[j * p..];
                for col in 0..p {
                    let mut s = 0.0;
                    for row in 0..p {
                        s += u[(row, col)] * next[row];
                    }
                    cur[col] -= s;
                }
            }
            backward_subst(&self.lower[j], &mut x[j * p..(j + 1) * p]);
        }
        x
    }
}

/// Which preconditioner family to build for a dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Identity,
    OrthogonalFast,
    ItvCholesky,
}

impl PreconditionerKind {
    /// The structure-exploiting choice for `w`; general frames get none.
    pub fn for_dictionary(w: &Dictionary) -> Self {
        match w.kind() {
            DictionaryKind::Orthonormal(_) => PreconditionerKind::OrthogonalFast,
            DictionaryKind::Itv { .. } => PreconditionerKind::ItvCholesky,
            DictionaryKind::DenseComplex { .. } => PreconditionerKind::Identity,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Preconditioner<'a> {
    Identity { n: usize },
    /// `Ñ⁻¹ = W diag(1/λ) Wᵀ` with `λ_i = c·S_i + ρ`.
    OrthogonalFast { w: &'a Dictionary, lambda: Vec<f64> },
    /// Assembled but not yet factored.
    ItvAssembled(BandedSymmetric),
    ItvCholesky(BlockCholesky),
}

impl<'a> Preconditioner<'a> {
    pub fn identity(n: usize) -> Self {
        Preconditioner::Identity { n }
    }

    pub fn orthogonal_fast(
        blocks: &SymBlocks,
        w: &'a Dictionary,
        c: f64,
        rho: f64,
    ) -> Result<Self> {
        if !w.is_real() {
            return Err(Error::Kind {
                expected: "real orthonormal",
            });
        }
        check_positive("c", c)?;
        check_positive("rho", rho)?;
        check_len("orthogonal_fast", w.l(), blocks.s11.len())?;
        let lambda = blocks.s11.iter().map(|s| c * s + rho).collect();
        Ok(Preconditioner::OrthogonalFast { w, lambda })
    }

    pub fn itv(blocks: &SymBlocks, w: &Dictionary, c: f64, rho: f64) -> Result<Self> {
        let m = assemble_itv(blocks, w, c, rho)?;
        Ok(Preconditioner::ItvCholesky(block_cholesky(&m)?))
    }

    /// Builds the requested kind at the current Newton system.
    pub fn build(
        kind: PreconditionerKind,
        blocks: &SymBlocks,
        w: &'a Dictionary,
        c: f64,
        rho: f64,
    ) -> Result<Self> {
        match kind {
            PreconditionerKind::Identity => Ok(Self::identity(w.n())),
            PreconditionerKind::OrthogonalFast => Self::orthogonal_fast(blocks, w, c, rho),
            PreconditionerKind::ItvCholesky => Self::itv(blocks, w, c, rho),
        }
    }

    pub fn kind(&self) -> PreconditionerKind {
        match self {
            Preconditioner::Identity { .. } => PreconditionerKind::Identity,
            Preconditioner::OrthogonalFast { .. } => PreconditionerKind::OrthogonalFast,
            Preconditioner::ItvAssembled(_) | Preconditioner::ItvCholesky(_) => {
                PreconditionerKind::ItvCholesky
            }
        }
    }

    /// Factors an assembled iTV preconditioner; other states pass through.
    pub fn factor(self) -> Result<Self> {
        match self {
            Preconditioner::ItvAssembled(m) => Ok(Preconditioner::ItvCholesky(block_cholesky(&m)?)),
            other => Ok(other),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Preconditioner::Identity { n } => *n,
            Preconditioner::OrthogonalFast { w, .. } => w.n(),
            Preconditioner::ItvAssembled(m) => m.n(),
            Preconditioner::ItvCholesky(f) => f.p * f.p,
        }
    }

    /// `Ñ⁻¹ r`
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("precond_solve", self.dim(), r.len())?;
        match self {
            Preconditioner::Identity { .. } => Ok(r.to_vec()),
            Preconditioner::OrthogonalFast { w, lambda } => {
                let y = w.analyze_unchecked(r);
                let t: Vec<f64> = y.re.iter().zip(lambda).map(|(a, l)| a / l).collect();
                Ok(w.synthesize_unchecked(&t, &vec![0.0; t.len()]))
            }
            Preconditioner::ItvAssembled(_) => Err(Error::Unfactored),
            Preconditioner::ItvCholesky(f) => Ok(f.solve_upper(&f.solve_lower(r))),
        }
    }

    /// `F⁻¹ r` for a factor `Ñ = F Fᵀ`.
    pub fn solve_left(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("precond_solve_left", self.dim(), r.len())?;
        match self {
            Preconditioner::Identity { .. } => Ok(r.to_vec()),
            Preconditioner::OrthogonalFast { w, lambda } => {
                let y = w.analyze_unchecked(r);
                let t: Vec<f64> = y.re.iter().zip(lambda).map(|(a, l)| a / l.sqrt()).collect();
                Ok(w.synthesize_unchecked(&t, &vec![0.0; t.len()]))
            }
            Preconditioner::ItvAssembled(_) => Err(Error::Unfactored),
            Preconditioner::ItvCholesky(f) => Ok(f.solve_lower(r)),
        }
    }

    /// `F⁻ᵀ r` for a factor `Ñ = F Fᵀ`.
    pub fn solve_right(&self, r: &[f64]) -> Result<Vec<f64>> {
        match self {
            Preconditioner::ItvCholesky(f) => {
                check_len("precond_solve_right", self.dim(), r.len())?;
                Ok(f.solve_upper(r))
            }
            // the identity and the symmetric square root are self-transposed
            other => other.solve_left(r),
        }
    }
}

/// Eigenvalue bound `½(χ + 1 + √(5χ² − 2χ + 1)) / (c μ² ν³ λ_min + ρ)`
/// for the preconditioned Hessian. `lambda_min_term = 0` gives the bound
/// for eigenvectors in the kernel of the non-sparse part of `W*`.
pub fn theorem_bound(
    chi: f64,
    rho: f64,
    c: f64,
    mu: f64,
    nu: f64,
    lambda_min_term: f64,
) -> Result<f64> {
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(Error::Parameter {
            name: "rho",
            reason: format!("must lie in (0, 1/2], got {rho}"),
        });
    }
    check_positive("nu", nu)?;
    check_positive("c", c)?;
    check_positive("mu", mu)?;
    if lambda_min_term < 0.0 || !lambda_min_term.is_finite() {
        return Err(Error::Parameter {
            name: "lambda_min_term",
            reason: format!("must be nonnegative, got {lambda_min_term}"),
        });
    }
    let numerator = 0.5 * (chi + 1.0 + (5.0 * chi * chi - 2.0 * chi + 1.0).sqrt());
    Ok(numerator / (c * mu * mu * nu.powi(3) * lambda_min_term + rho))
}
