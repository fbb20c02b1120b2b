//! Analysis operators `W` stored as a real/imaginary split `(ReW, ImW)`.
//!
//! `analyze` returns `y = (ReWᵀx, ImWᵀx)` and `synthesize_real` returns
//! `ReW·g_re + ImW·g_im`, so the pair is adjoint under the real inner
//! product `⟨y, g⟩ = ⟨y_re, g_re⟩ + ⟨y_im, g_im⟩`.
//!
//! Images are vectorized column-major: pixel `(i, j)` of a `p × p` image
//! lives at index `i + p·j`.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// A complex vector held as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn from_real(re: Vec<f64>) -> Self {
        let im = vec![0.0; re.len()];
        Self { re, im }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Componentwise modulus `|u_i|`.
    pub fn abs(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }

    /// `max_i |u_i|`
    pub fn norm_inf(&self) -> f64 {
        self.abs().into_iter().fold(0.0, f64::max)
    }

    /// Real inner product `⟨u_re, v_re⟩ + ⟨u_im, v_im⟩`.
    pub fn real_dot(&self, other: &ComplexVec) -> f64 {
        crate::linalg::dot(&self.re, &other.re) + crate::linalg::dot(&self.im, &other.im)
    }
}

#[derive(Debug, Clone)]
pub enum DictionaryKind {
    /// Real square orthonormal `W` (`W Wᵀ = Wᵀ W = I`), stored densely.
    Orthonormal(DMatrix<f64>),
    /// Complex discrete nabla `W = W_v + i·W_h` on a `p × p` image.
    Itv { p: usize },
    /// Small explicit complex frame.
    DenseComplex { re: DMatrix<f64>, im: DMatrix<f64> },
}

/// The analysis operator `W ∈ E^{n×l}`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    n: usize,
    l: usize,
    kind: DictionaryKind,
}

impl Dictionary {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            l: n,
            kind: DictionaryKind::Orthonormal(DMatrix::identity(n, n)),
        }
    }

    /// Wraps a real square matrix whose columns are orthonormal.
    pub fn orthonormal(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::Shape(format!(
                "orthonormal dictionary must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let n = w.nrows();
        let gram = w.transpose() * &w;
        let defect = (gram - DMatrix::<f64>::identity(n, n)).abs().max();
        if defect > 1e-10 {
            return Err(Error::Parameter {
                name: "w",
                reason: format!("columns are not orthonormal (defect {defect:e})"),
            });
        }
        Ok(Self {
            n,
            l: n,
            kind: DictionaryKind::Orthonormal(w),
        })
    }

    /// Isotropic TV operator on a `p × p` image.
    pub fn itv(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Shape("iTV image side must be positive".into()));
        }
        Ok(Self {
            n: p * p,
            l: p * p,
            kind: DictionaryKind::Itv { p },
        })
    }

    /// Isotropic TV operator for a vectorized image of `n` pixels.
    pub fn itv_for_len(n: usize) -> Result<Self> {
        let p = (n as f64).sqrt().round() as usize;
        if p * p != n {
            return Err(Error::Shape(format!("{n} pixels do not form a square image")));
        }
        Self::itv(p)
    }

    pub fn dense_complex(re: DMatrix<f64>, im: DMatrix<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::Shape(format!(
                "real part {:?} and imaginary part {:?} differ in shape",
                re.shape(),
                im.shape()
            )));
        }
        Ok(Self {
            n: re.nrows(),
            l: re.ncols(),
            kind: DictionaryKind::DenseComplex { re, im },
        })
    }

    /// Gabor-like frame: Gaussian windows at `shifts` circular positions,
    /// each modulated by `freqs` equispaced frequencies, with unit-norm
    /// columns. `l = shifts · freqs`.
    pub fn gabor_like(n: usize, shifts: usize, freqs: usize) -> Result<Self> {
        if n == 0 || shifts == 0 || freqs == 0 {
            return Err(Error::Parameter {
                name: "gabor",
                reason: "n, shifts and freqs must be positive".into(),
            });
        }
        if n > 64 || shifts * freqs > 256 {
            return Err(Error::Parameter {
                name: "gabor",
                reason: format!("frame too large (n = {n}, l = {})", shifts * freqs),
            });
        }
        let l = shifts * freqs;
        let width = n as f64 / shifts as f64;
        let mut re = DMatrix::zeros(n, l);
        let mut im = DMatrix::zeros(n, l);
        for s in 0..shifts {
            let center = s as f64 * width;
            for f in 0..freqs {
                let col = s * freqs + f;
                let omega = 2.0 * std::f64::consts::PI * (f as f64) * (n as f64 / freqs as f64)
                    / n as f64;
                let mut energy = 0.0;
                for t in 0..n {
                    let mut d = (t as f64 - center).abs();
                    d = d.min(n as f64 - d);
                    let env = (-0.5 * (d / width).powi(2)).exp();
                    let (sin, cos) = (omega * t as f64).sin_cos();
                    re[(t, col)] = env * cos;
                    im[(t, col)] = env * sin;
                    energy += env * env;
                }
                let scale = energy.sqrt().recip();
                for t in 0..n {
                    re[(t, col)] *= scale;
                    im[(t, col)] *= scale;
                }
            }
        }
        Self::dense_complex(re, im)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn kind(&self) -> &DictionaryKind {
        &self.kind
    }

    /// Capability flag: `ImW ≡ 0`, so every imaginary branch can be skipped.
    pub fn is_real(&self) -> bool {
        matches!(self.kind, DictionaryKind::Orthonormal(_))
    }

    /// Image side for the iTV kind.
    pub fn itv_side(&self) -> Option<usize> {
        match self.kind {
            DictionaryKind::Itv { p } => Some(p),
            _ => None,
        }
    }

    /// `y = W*x` as `(ReWᵀx, ImWᵀx)`.
    pub fn analyze(&self, x: &[f64]) -> Result<ComplexVec> {
        check_len("analyze", self.n, x.len())?;
        Ok(self.analyze_unchecked(x))
    }

    pub(crate) fn analyze_unchecked(&self, x: &[f64]) -> ComplexVec {
        match &self.kind {
            DictionaryKind::Orthonormal(w) => {
                let re = w.tr_mul(&nalgebra::DVector::from_column_slice(x));
                ComplexVec::from_real(re.as_slice().to_vec())
            }
            DictionaryKind::Itv { p } => {
                let p = *p;
                let mut out = ComplexVec::zeros(self.l);
                for j in 0..p {
                    for i in 0..p {
                        let k = i + p * j;
                        if i + 1 < p {
                            out.re[k] = x[k + 1] - x[k];
                        }
                        if j + 1 < p {
                            out.im[k] = x[k + p] - x[k];
                        }
                    }
                }
                out
            }
            DictionaryKind::DenseComplex { re, im } => {
                let xv = nalgebra::DVector::from_column_slice(x);
                ComplexVec {
                    re: re.tr_mul(&xv).as_slice().to_vec(),
                    im: im.tr_mul(&xv).as_slice().to_vec(),
                }
            }
        }
    }

    /// `Re(W ḡ) = ReW·g_re + ImW·g_im`.
    pub fn synthesize_real(&self, g: &ComplexVec) -> Result<Vec<f64>> {
        check_len("synthesize_real (re)", self.l, g.re.len())?;
        check_len("synthesize_real (im)", self.l, g.im.len())?;
        Ok(self.synthesize_unchecked(&g.re, &g.im))
    }

    pub(crate) fn synthesize_unchecked(&self, g_re: &[f64], g_im: &[f64]) -> Vec<f64> {
        match &self.kind {
            DictionaryKind::Orthonormal(w) => {
                let out = w * nalgebra::DVector::from_column_slice(g_re);
                out.as_slice().to_vec()
            }
            DictionaryKind::Itv { p } => {
                let p = *p;
                let mut out = vec![0.0; self.n];
                for j in 0..p {
                    for i in 0..p {
                        let k = i + p * j;
                        if i + 1 < p {
                            out[k] -= g_re[k];
                            out[k + 1] += g_re[k];
                        }
                        if j + 1 < p {
                            out[k] -= g_im[k];
                            out[k + p] += g_im[k];
                        }
                    }
                }
                out
            }
            DictionaryKind::DenseComplex { re, im } => {
                let out = re * nalgebra::DVector::from_column_slice(g_re)
                    + im * nalgebra::DVector::from_column_slice(g_im);
                out.as_slice().to_vec()
            }
        }
    }

    /// Dense `(ReW, ImW)`, each `n × l`. Diagnostics only.
    pub fn to_dense_split(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.kind {
            DictionaryKind::Orthonormal(w) => (w.clone(), DMatrix::zeros(self.n, self.l)),
            DictionaryKind::DenseComplex { re, im } => (re.clone(), im.clone()),
            DictionaryKind::Itv { .. } => {
                // column i of W is the transpose of analysis row i
                let mut re = DMatrix::zeros(self.n, self.l);
                let mut im = DMatrix::zeros(self.n, self.l);
                let mut e = vec![0.0; self.n];
                for col in 0..self.n {
                    e[col] = 1.0;
                    let y = self.analyze_unchecked(&e);
                    for row in 0..self.l {
                        re[(col, row)] = y.re[row];
                        im[(col, row)] = y.im[row];
                    }
                    e[col] = 0.0;
                }
                (re, im)
            }
        }
    }
}
