//! Matrix-free measurement operators `A: ℝⁿ → ℝᵐ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::par::Execution;

/// Largest analysis dimension accepted by [`rip_constant_bruteforce`].
pub const RIP_MAX_L: usize = 14;

/// Layout of the signal a partial DCT acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DctShape {
    /// 1-D orthonormal DCT-II of length `n`.
    Line(usize),
    /// Separable 2-D orthonormal DCT-II of a column-major `p × p` image.
    Square(usize),
}

impl DctShape {
    fn len(self) -> usize {
        match self {
            DctShape::Line(n) => n,
            DctShape::Square(p) => p * p,
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    PartialDct {
        shape: DctShape,
        rows: Vec<usize>,
        /// `cos(π t / (2N))` for `t ∈ [0, 4N)` (line) or the `p × p` DCT
        /// matrix, row-major (square).
        table: Vec<f64>,
    },
    BlockSign {
        block: usize,
        signs: Vec<f64>,
        scale: f64,
    },
    Dense(DMatrix<f64>),
}

/// A measurement operator with `apply` and `adjoint_apply`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    m: usize,
    n: usize,
    kind: Kind,
}

fn dct_matrix(p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p * p];
    for k in 0..p {
        let s = if k == 0 {
            (1.0 / p as f64).sqrt()
        } else {
            (2.0 / p as f64).sqrt()
        };
        for j in 0..p {
            c[k * p + j] = s * (PI * ((2 * j + 1) * k) as f64 / (2 * p) as f64).cos();
        }
    }
    c
}

/// Selects `m` of `total` rows uniformly without replacement, always
/// including row 0 (the DC coefficient). Returned sorted.
fn select_rows(total: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = std::iter::once(0)
        .chain(
            index::sample(&mut rng, total - 1, m - 1)
                .into_iter()
                .map(|r| r + 1),
        )
        .collect();
    rows.sort_unstable();
    rows
}

impl LinearMap {
    /// Partial DCT with `m` seeded random rows (DC row always kept).
    pub fn partial_dct(shape: DctShape, m: usize, seed: u64) -> Result<Self> {
        let n = shape.len();
        if m == 0 || m > n {
            return Err(Error::Parameter {
                name: "m",
                reason: format!("row count {m} must lie in 1..={n}"),
            });
        }
        let rows = select_rows(n, m, seed);
        Self::partial_dct_with_rows(shape, rows)
    }

    /// Partial DCT restricted to explicit coefficient indices.
    pub fn partial_dct_with_rows(shape: DctShape, rows: Vec<usize>) -> Result<Self> {
        let n = shape.len();
        if n == 0 {
            return Err(Error::Parameter {
                name: "n",
                reason: "empty signal".into(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| **r >= n) {
            return Err(Error::Parameter {
                name: "rows",
                reason: format!("row {bad} out of range for n = {n}"),
            });
        }
        let table = match shape {
            DctShape::Line(n) => (0..4 * n)
                .map(|t| (PI * t as f64 / (2 * n) as f64).cos())
                .collect(),
            DctShape::Square(p) => dct_matrix(p),
        };
        Ok(Self {
            m: rows.len(),
            n,
            kind: Kind::PartialDct { shape, rows, table },
        })
    }

    /// Block-diagonal ±1 operator: row `k` sums `signs[j]·x[j]` over
    /// columns `j ∈ [k·block, (k+1)·block)`. Entries are exactly ±1.
    pub fn block_sign(m: usize, block: usize, signs: Vec<f64>) -> Result<Self> {
        Self::block_sign_scaled(m, block, signs, 1.0)
    }

    /// Block-sign operator with random signs and rows scaled by
    /// `1/√block`, so that `A Aᵀ = I`.
    pub fn block_sign_random(m: usize, block: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signs = (0..m * block)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self::block_sign_scaled(m, block, signs, (block as f64).sqrt().recip())
    }

    fn block_sign_scaled(m: usize, block: usize, signs: Vec<f64>, scale: f64) -> Result<Self> {
        if m == 0 || block == 0 {
            return Err(Error::Parameter {
                name: "block",
                reason: "row count and block size must be positive".into(),
            });
        }
        check_len("block_sign signs", m * block, signs.len())?;
        if signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Parameter {
                name: "signs",
                reason: "entries must be +1 or -1".into(),
            });
        }
        Ok(Self {
            m,
            n: m * block,
            kind: Kind::BlockSign {
                block,
                signs,
                scale,
            },
        })
    }

    pub fn dense(matrix: DMatrix<f64>) -> Self {
        Self {
            m: matrix.nrows(),
            n: matrix.ncols(),
            kind: Kind::Dense(matrix),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Selected DCT coefficient indices, if this is a partial DCT.
    pub fn dct_rows(&self) -> Option<&[usize]> {
        match &self.kind {
            Kind::PartialDct { rows, .. } => Some(rows),
            _ => None,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply", self.n, x.len())?;
        Ok(self.forward(x))
    }

    pub fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint_apply", self.m, y.len())?;
        Ok(self.backward(y))
    }

    /// `AᵀA v`
    pub fn normal_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("normal_apply", self.n, v.len())?;
        Ok(self.backward(&self.forward(v)))
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::PartialDct { shape, rows, table } => match *shape {
                DctShape::Line(n) => rows
                    .iter()
                    .map(|&k| {
                        let s = if k == 0 {
                            (1.0 / n as f64).sqrt()
                        } else {
                            (2.0 / n as f64).sqrt()
                        };
                        let mut acc = 0.0;
                        let mut t = k;
                        let step = 2 * k;
                        let wrap = 4 * n;
                        for xj in x {
                            acc += table[t] * xj;
                            t = (t + step) % wrap;
                        }
                        s * acc
                    })
                    .collect(),
                DctShape::Square(p) => {
                    let coeffs = dct2(table, p, x);
                    rows.iter().map(|&k| coeffs[k]).collect()
                }
            },
            Kind::BlockSign {
                block,
                signs,
                scale,
            } => x
                .chunks(*block)
                .zip(signs.chunks(*block))
                .map(|(xs, ss)| scale * xs.iter().zip(ss).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
            Kind::Dense(a) => (a * nalgebra::DVector::from_column_slice(x))
                .as_slice()
                .to_vec(),
        }
    }

    pub(crate) fn backward(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::PartialDct { shape, rows, table } => match *shape {
                DctShape::Line(n) => {
                    let mut out = vec![0.0; n];
                    let wrap = 4 * n;
                    for (&k, &yk) in rows.iter().zip(y) {
                        let s = if k == 0 {
                            (1.0 / n as f64).sqrt()
                        } else {
                            (2.0 / n as f64).sqrt()
                        };
                        let c = s * yk;
                        let mut t = k;
                        for o in out.iter_mut() {
                            *o += c * table[t];
                            t = (t + 2 * k) % wrap;
                        }
                    }
                    out
                }
                DctShape::Square(p) => {
                    let mut coeffs = vec![0.0; p * p];
                    for (&k, &yk) in rows.iter().zip(y) {
                        coeffs[k] = yk;
                    }
                    idct2(table, p, &coeffs)
                }
            },
            Kind::BlockSign {
                block,
                signs,
                scale,
            } => {
                let mut out = vec![0.0; self.n];
                for (k, yk) in y.iter().enumerate() {
                    for j in k * block..(k + 1) * block {
                        out[j] = scale * signs[j] * yk;
                    }
                }
                out
            }
            Kind::Dense(a) => a
                .tr_mul(&nalgebra::DVector::from_column_slice(y))
                .as_slice()
                .to_vec(),
        }
    }

    /// Dense `m × n` matrix, materialized column by column.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.forward(&e);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        out
    }

    /// Spectral defect `‖A Aᵀ − I_m‖₂` of the row near-orthogonality.
    pub fn row_orthogonality_defect(&self) -> f64 {
        let a = self.to_dense();
        let gram = &a * a.transpose() - DMatrix::<f64>::identity(self.m, self.m);
        gram.symmetric_eigenvalues()
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Column-major `p × p` image `X` to coefficients `C X Cᵀ` (column-major).
fn dct2(c: &[f64], p: usize, x: &[f64]) -> Vec<f64> {
    // T = C X : T[k, j] = Σ_i C[k, i] X[i, j]
    let mut t = vec![0.0; p * p];
    for j in 0..p {
        let col = &x[j * p..(j + 1) * p];
        for k in 0..p {
            let row = &c[k * p..(k + 1) * p];
            t[k + p * j] = row.iter().zip(col).map(|(a, b)| a * b).sum();
        }
    }
    // Y = T Cᵀ : Y[k, l] = Σ_j T[k, j] C[l, j]
    let mut y = vec![0.0; p * p];
    for l in 0..p {
        let row = &c[l * p..(l + 1) * p];
        for (j, cj) in row.iter().enumerate() {
            let tcol = &t[j * p..(j + 1) * p];
            let ycol = &mut y[l * p..(l + 1) * p];
            for (yk, tk) in ycol.iter_mut().zip(tcol) {
                *yk += cj * tk;
            }
        }
    }
    y
}

/// Inverse (= transpose) of [`dct2`]: `Cᵀ Y C`.
fn idct2(c: &[f64], p: usize, y: &[f64]) -> Vec<f64> {
    // T = Cᵀ Y : T[i, l] = Σ_k C[k, i] Y[k, l]
    let mut t = vec![0.0; p * p];
    for l in 0..p {
        let ycol = &y[l * p..(l + 1) * p];
        let tcol = &mut t[l * p..(l + 1) * p];
        for (k, yk) in ycol.iter().enumerate() {
            if *yk == 0.0 {
                continue;
            }
            let row = &c[k * p..(k + 1) * p];
            for (ti, ci) in tcol.iter_mut().zip(row) {
                *ti += ci * yk;
            }
        }
    }
    // X = T C : X[i, j] = Σ_l T[i, l] C[l, j]
    let mut x = vec![0.0; p * p];
    for j in 0..p {
        let xcol = &mut x[j * p..(j + 1) * p];
        for l in 0..p {
            let clj = c[l * p + j];
            let tcol = &t[l * p..(l + 1) * p];
            for (xi, ti) in xcol.iter_mut().zip(tcol) {
                *xi += clj * ti;
            }
        }
    }
    x
}

fn combinations(l: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if q > l {
        return out;
    }
    let mut current: Vec<usize> = (0..q).collect();
    loop {
        out.push(current.clone());
        // rightmost position that can still advance
        match (0..q).rev().find(|&i| current[i] < i + l - q) {
            None => return out,
            Some(i) => {
                current[i] += 1;
                for j in i + 1..q {
                    current[j] = current[j - 1] + 1;
                }
            }
        }
    }
}

/// Brute-force W-RIP constant `δ_q` of `A` adapted to `W`.
///
/// Enumerates every support of size `min(q, l)`; for each one the ratio
/// `‖A W z‖² / ‖W z‖²` is bounded by the extreme eigenvalues of `AᵀA`
/// compressed to `range(W_S)` (complex ranges are realified). Vectors with
/// `W z = 0` drop out because only the range is used.
pub fn rip_constant_bruteforce(a: &LinearMap, w: &Dictionary, q: usize) -> Result<f64> {
    rip_constant_bruteforce_with(a, w, q, Execution::default())
}

pub fn rip_constant_bruteforce_with(
    a: &LinearMap,
    w: &Dictionary,
    q: usize,
    exec: Execution,
) -> Result<f64> {
    check_len("rip_constant_bruteforce", a.n(), w.n())?;
    let l = w.l();
    if l > RIP_MAX_L {
        return Err(Error::TooLarge(format!(
            "l = {l} exceeds the enumeration limit {RIP_MAX_L}"
        )));
    }
    let q = q.min(l);
    if q == 0 {
        return Ok(0.0);
    }
    let n = w.n();
    let ad = a.to_dense();
    let (wr, wi) = w.to_dense_split();
    let supports = combinations(l, q);
    let per_support = exec.map_slice(&supports, |support| {
        let s = support.len();
        let mut real = DMatrix::zeros(2 * n, 2 * s);
        for (c, &col) in support.iter().enumerate() {
            for r in 0..n {
                real[(r, c)] = wr[(r, col)];
                real[(r, s + c)] = -wi[(r, col)];
                real[(n + r, c)] = wi[(r, col)];
                real[(n + r, s + c)] = wr[(r, col)];
            }
        }
        let svd = real.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return 0.0;
        }
        let basis: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > 1e-10 * smax)
            .collect();
        let r = basis.len();
        let mut aq = DMatrix::zeros(2 * a.m(), r);
        for (c, &k) in basis.iter().enumerate() {
            let col = u.column(k);
            let top = &ad * col.rows(0, n);
            let bottom = &ad * col.rows(n, n);
            aq.view_mut((0, c), (a.m(), 1)).copy_from(&top);
            aq.view_mut((a.m(), c), (a.m(), 1)).copy_from(&bottom);
        }
        let gram = aq.transpose() * aq;
        let eig = gram.symmetric_eigenvalues();
        let lmax = eig.max();
        let lmin = eig.min();
        (lmax - 1.0).max(1.0 - lmin)
    });
    Ok(per_support.into_iter().fold(0.0, f64::max))
}
