//! Pseudo-Huber smoothing `ψ_μ(W*x) = Σ (√(μ² + |y_i|²) − μ)` and the
//! smoothed objective `f_c^μ(x) = c·ψ_μ(W*x) + ½‖Ax − b‖²`.

use crate::dictionary::{ComplexVec, Dictionary};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot};
use crate::operators::LinearMap;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

/// Per-coordinate diagonals of the pseudo-Huber derivatives at one point.
#[derive(Debug, Clone)]
pub struct HuberScalings {
    pub mu: f64,
    /// `y = W*x`
    pub y: ComplexVec,
    /// `D_i = (μ² + |y_i|²)^{-1/2}`
    pub d: Vec<f64>,
    /// `Ŷ_i = μ² D_i³ + D_i`
    pub yhat: Vec<f64>,
    /// `Ỹ_i = −y_i² D_i³`
    pub ytilde: ComplexVec,
}

impl HuberScalings {
    pub fn from_analysis(y: ComplexVec, mu: f64) -> Result<Self> {
        check_positive("mu", mu)?;
        let l = y.len();
        let mut d = Vec::with_capacity(l);
        let mut yhat = Vec::with_capacity(l);
        let mut ytilde = ComplexVec::zeros(l);
        let mu2 = mu * mu;
        for i in 0..l {
            let (a, b) = (y.re[i], y.im[i]);
            let di = (mu2 + a * a + b * b).sqrt().recip();
            let d3 = di * di * di;
            d.push(di);
            yhat.push(mu2 * d3 + di);
            ytilde.re[i] = -(a * a - b * b) * d3;
            ytilde.im[i] = -2.0 * a * b * d3;
        }
        Ok(Self {
            mu,
            y,
            d,
            yhat,
            ytilde,
        })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

fn huber_terms(y: &ComplexVec, mu: f64) -> f64 {
    // √(μ²+t²) − μ written as t²/(√(μ²+t²)+μ) to avoid cancellation
    y.re.iter()
        .zip(&y.im)
        .map(|(a, b)| {
            let t2 = a * a + b * b;
            t2 / ((mu * mu + t2).sqrt() + mu)
        })
        .sum()
}

pub fn huber_value(w: &Dictionary, x: &[f64], mu: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    let y = w.analyze(x)?;
    Ok(huber_terms(&y, mu))
}

pub fn huber_scalings(w: &Dictionary, x: &[f64], mu: f64) -> Result<HuberScalings> {
    check_positive("mu", mu)?;
    HuberScalings::from_analysis(w.analyze(x)?, mu)
}

/// `∇ψ_μ(W*x) = Re(W D W*) x`
pub fn huber_gradient(w: &Dictionary, x: &[f64], mu: f64) -> Result<Vec<f64>> {
    let s = huber_scalings(w, x, mu)?;
    Ok(gradient_from_scalings(&s, w))
}

pub(crate) fn gradient_from_scalings(s: &HuberScalings, w: &Dictionary) -> Vec<f64> {
    let re: Vec<f64> = s.d.iter().zip(&s.y.re).map(|(d, y)| d * y).collect();
    let im: Vec<f64> = if w.is_real() {
        vec![0.0; s.len()]
    } else {
        s.d.iter().zip(&s.y.im).map(|(d, y)| d * y).collect()
    };
    w.synthesize_unchecked(&re, &im)
}

/// `∇²ψ_μ(W*x)·v` from the `Ŷ`/`Ỹ` diagonals. In the real split each
/// coordinate contributes the 2×2 block
/// `½[[Ŷ + ReỸ, ImỸ], [ImỸ, Ŷ − ReỸ]]`.
pub fn huber_hessian_vec(s: &HuberScalings, w: &Dictionary, v: &[f64]) -> Result<Vec<f64>> {
    check_len("huber_hessian_vec scalings", w.l(), s.len())?;
    check_len("huber_hessian_vec", w.n(), v.len())?;
    Ok(hessian_vec_unchecked(s, w, v))
}

pub(crate) fn hessian_vec_unchecked(s: &HuberScalings, w: &Dictionary, v: &[f64]) -> Vec<f64> {
    let u = w.analyze_unchecked(v);
    let l = s.len();
    if w.is_real() {
        let t: Vec<f64> = (0..l)
            .map(|i| 0.5 * (s.yhat[i] + s.ytilde.re[i]) * u.re[i])
            .collect();
        return w.synthesize_unchecked(&t, &vec![0.0; l]);
    }
    let mut t_re = vec![0.0; l];
    let mut t_im = vec![0.0; l];
    for i in 0..l {
        let (a, b) = (u.re[i], u.im[i]);
        let off = 0.5 * s.ytilde.im[i];
        t_re[i] = 0.5 * (s.yhat[i] + s.ytilde.re[i]) * a + off * b;
        t_im[i] = off * a + 0.5 * (s.yhat[i] - s.ytilde.re[i]) * b;
    }
    w.synthesize_unchecked(&t_re, &t_im)
}

/// The smoothed least-squares objective for fixed `(c, μ)`.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub a: &'a LinearMap,
    pub w: &'a Dictionary,
    pub b: &'a [f64],
    pub c: f64,
    pub mu: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        a: &'a LinearMap,
        w: &'a Dictionary,
        b: &'a [f64],
        c: f64,
        mu: f64,
    ) -> Result<Self> {
        check_positive("c", c)?;
        check_positive("mu", mu)?;
        check_len("objective: W rows vs A columns", a.n(), w.n())?;
        check_len("objective: measurements", a.m(), b.len())?;
        Ok(Self { a, w, b, c, mu })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_len("objective", self.n(), x.len())?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let y = self.w.analyze_unchecked(x);
        let mut r = self.a.forward(x);
        axpy(-1.0, self.b, &mut r);
        self.c * huber_terms(&y, self.mu) + 0.5 * dot(&r, &r)
    }

    /// `c∇ψ_μ(W*x) + Aᵀ(Ax − b)`
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("grad_objective", self.n(), x.len())?;
        let s = HuberScalings::from_analysis(self.w.analyze_unchecked(x), self.mu)?;
        Ok(self.gradient_with(&s, x))
    }

    pub(crate) fn gradient_with(&self, s: &HuberScalings, x: &[f64]) -> Vec<f64> {
        let mut g = gradient_from_scalings(s, self.w);
        for gi in g.iter_mut() {
            *gi *= self.c;
        }
        let mut r = self.a.forward(x);
        axpy(-1.0, self.b, &mut r);
        axpy(1.0, &self.a.backward(&r), &mut g);
        g
    }

    /// `∇²f_c^μ(x)·v = c∇²ψ_μ·v + AᵀAv`
    pub fn hessian_vec(&self, s: &HuberScalings, v: &[f64]) -> Result<Vec<f64>> {
        let mut h = huber_hessian_vec(s, self.w, v)?;
        for hi in h.iter_mut() {
            *hi *= self.c;
        }
        axpy(1.0, &self.a.backward(&self.a.forward(v)), &mut h);
        Ok(h)
    }
}

pub fn objective(
    a: &LinearMap,
    w: &Dictionary,
    b: &[f64],
    c: f64,
    mu: f64,
    x: &[f64],
) -> Result<f64> {
    Objective::new(a, w, b, c, mu)?.value(x)
}

pub fn grad_objective(
    a: &LinearMap,
    w: &Dictionary,
    b: &[f64],
    c: f64,
    mu: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    Objective::new(a, w, b, c, mu)?.gradient(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn scalar_dict() -> Dictionary {
        Dictionary::identity(1)
    }

    #[test]
    fn scalar_value_gradient_hessian() {
        let w = scalar_dict();
        let v = huber_value(&w, &[2.0], 1.0).unwrap();
        assert!((v - (5f64.sqrt() - 1.0)).abs() < 1e-15);
        let g = huber_gradient(&w, &[2.0], 1.0).unwrap();
        assert!((g[0] - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        let s = huber_scalings(&w, &[2.0], 1.0).unwrap();
        let h = huber_hessian_vec(&s, &w, &[1.0]).unwrap();
        assert!((h[0] - 5f64.powf(-1.5)).abs() < 1e-15);
        assert_eq!(huber_hessian_vec(&s, &w, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn scalings_examples() {
        let s = HuberScalings::from_analysis(ComplexVec::from_real(vec![0.0, 2.0]), 1.0).unwrap();
        assert_eq!(s.d[0], 1.0);
        assert_eq!(s.yhat[0], 2.0);
        assert_eq!(s.ytilde.re[0], 0.0);
        assert!((s.d[1] - 0.447_213_595_499_958).abs() < 1e-12);
        assert!((s.yhat[1] - 0.536_656_314_599_949_5).abs() < 1e-12);
        assert!((s.ytilde.re[1] + 0.357_770_876_399_966_4).abs() < 1e-12);

        // homogeneity: (t·y, t·μ) ⇒ D / t
        let t = 7.5;
        let scaled =
            HuberScalings::from_analysis(ComplexVec::from_real(vec![0.0, 2.0 * t]), t).unwrap();
        for i in 0..2 {
            assert!((scaled.d[i] - s.d[i] / t).abs() < 1e-15);
        }
    }

    #[test]
    fn scalings_invariants_hold_for_complex_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = ComplexVec {
            re: rv(&mut rng, 50),
            im: rv(&mut rng, 50),
        };
        for mu in [1e-6, 1e-2, 1.0] {
            let s = HuberScalings::from_analysis(y.clone(), mu).unwrap();
            for i in 0..50 {
                assert!(s.d[i] > 0.0 && s.d[i] <= 1.0 / mu);
                assert!(s.yhat[i] > 0.0);
                assert!(s.ytilde.re[i].hypot(s.ytilde.im[i]) <= s.yhat[i]);
            }
        }
    }

    #[test]
    fn parameter_errors() {
        let w = scalar_dict();
        assert!(matches!(huber_value(&w, &[1.0], 0.0), Err(Error::Parameter { .. })));
        assert!(matches!(huber_value(&w, &[1.0], -1.0), Err(Error::Parameter { .. })));
    }

    #[test]
    fn value_zero_iff_analysis_zero_and_l1_sandwich() {
        let w = Dictionary::itv(6).unwrap();
        assert_eq!(huber_value(&w, &[0.3; 36], 1e-3).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mu in [1e-1, 1e-3, 1e-6] {
            for _ in 0..20 {
                let x = rv(&mut rng, 36);
                let y = w.analyze(&x).unwrap();
                let l1: f64 = y.abs().iter().sum();
                let psi = huber_value(&w, &x, mu).unwrap();
                assert!(psi <= l1 + 1e-12);
                assert!(psi >= l1 - 36.0 * mu - 1e-12);
            }
        }
    }

    #[test]
    fn convexity_along_segments() {
        let w = Dictionary::itv(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let x1 = rv(&mut rng, 25);
            let x2 = rv(&mut rng, 25);
            let t: f64 = rng.random_range(0.0..1.0);
            let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let lhs = huber_value(&w, &mid, 1e-2).unwrap();
            let rhs = t * huber_value(&w, &x1, 1e-2).unwrap()
                + (1.0 - t) * huber_value(&w, &x2, 1e-2).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let w = Dictionary::itv(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-6;
        for _ in 0..5 {
            let x = rv(&mut rng, 36);
            let g = huber_gradient(&w, &x, 0.1).unwrap();
            let mut fd = vec![0.0; 36];
            for k in 0..36 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                fd[k] = (huber_value(&w, &xp, 0.1).unwrap() - huber_value(&w, &xm, 0.1).unwrap())
                    / (2.0 * h);
            }
            let err = norm2(&crate::linalg::sub(&g, &fd)) / norm2(&fd);
            assert!(err < 1e-6, "relative error {err}");
        }
    }

    /// Oracle: the per-coordinate real Hessian `D·I − D³·y yᵀ` of
    /// `√(μ² + a² + b²)` assembled densely.
    fn dense_hessian_oracle(w: &Dictionary, x: &[f64], mu: f64) -> DMatrix<f64> {
        let (wr, wi) = w.to_dense_split();
        let y = w.analyze(x).unwrap();
        let n = w.n();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..w.l() {
            let (a, b) = (y.re[i], y.im[i]);
            let d = (mu * mu + a * a + b * b).sqrt().recip();
            let d3 = d * d * d;
            let block = [[d - d3 * a * a, -d3 * a * b], [-d3 * a * b, d - d3 * b * b]];
            let cols = [wr.column(i).clone_owned(), wi.column(i).clone_owned()];
            for r in 0..2 {
                for c in 0..2 {
                    h += block[r][c] * &cols[r] * cols[c].transpose();
                }
            }
        }
        h
    }

    #[test]
    fn hessian_vec_matches_dense_oracle_for_complex_dictionaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for w in [Dictionary::itv(4).unwrap(), Dictionary::gabor_like(8, 2, 4).unwrap()] {
            let x = rv(&mut rng, w.n());
            let mu = 0.05;
            let s = huber_scalings(&w, &x, mu).unwrap();
            let oracle = dense_hessian_oracle(&w, &x, mu);
            for _ in 0..10 {
                let v = rv(&mut rng, w.n());
                let got = huber_hessian_vec(&s, &w, &v).unwrap();
                let want = &oracle * nalgebra::DVector::from_column_slice(&v);
                for k in 0..w.n() {
                    assert!((got[k] - want[k]).abs() < 1e-10 * want.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn hessian_symmetric_psd_and_matches_gradient_differences() {
        let w = Dictionary::itv(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = rv(&mut rng, 25);
        let mu = 1e-1;
        let s = huber_scalings(&w, &x, mu).unwrap();
        for _ in 0..20 {
            let v = rv(&mut rng, 25);
            let u = rv(&mut rng, 25);
            let hv = huber_hessian_vec(&s, &w, &v).unwrap();
            let hu = huber_hessian_vec(&s, &w, &u).unwrap();
            assert!((dot(&hv, &u) - dot(&v, &hu)).abs() < 1e-12);
            assert!(dot(&hv, &v) >= -1e-12);
        }
        let v = rv(&mut rng, 25);
        let h = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let gp = huber_gradient(&w, &xp, mu).unwrap();
        let gm = huber_gradient(&w, &xm, mu).unwrap();
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let hv = huber_hessian_vec(&s, &w, &v).unwrap();
        let err = norm2(&crate::linalg::sub(&hv, &fd)) / norm2(&fd);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn objective_examples() {
        let a = LinearMap::dense(DMatrix::identity(1, 1));
        let w = scalar_dict();
        let f = objective(&a, &w, &[0.0], 1.0, 1.0, &[2.0]).unwrap();
        assert!((f - 3.236_067_977_499_79).abs() < 1e-12);
        let g = grad_objective(&a, &w, &[0.0], 1.0, 1.0, &[2.0]).unwrap();
        assert!((g[0] - 2.894_427_190_999_916).abs() < 1e-12);
        assert_eq!(objective(&a, &w, &[0.0], 1.0, 1.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(grad_objective(&a, &w, &[0.0], 1.0, 1.0, &[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            objective(&a, &w, &[0.0, 1.0], 1.0, 1.0, &[0.0]),
            Err(Error::Size { .. })
        ));
    }
}
