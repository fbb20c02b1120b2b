//! The symmetrized primal-dual Newton system.
//!
//! Linearizing `D⁻¹g_re = ReWᵀx`, `D⁻¹g_im = ImWᵀx` couples every analysis
//! coordinate through the 2×2 block
//!
//! ```text
//! M_i = D_i · [[1 − B1_i, −B2_i],
//!              [−B3_i,    1 − B4_i]]
//! ```
//!
//! so that `B̃ = [ReW ImW] · blkdiag(M_i) · [ReW ImW]ᵀ`. The system matrix
//! used by the solver is `B̂ = c·sym(B̃) + AᵀA`; `sym` acts blockwise.

use crate::dictionary::{ComplexVec, Dictionary};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, SymmetricOperator};
use crate::operators::LinearMap;
use crate::smoothing::{check_positive, HuberScalings};

/// Primal iterate plus complex dual variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub g: ComplexVec,
}

impl Iterate {
    pub fn zeros(n: usize, l: usize) -> Self {
        Self {
            x: vec![0.0; n],
            g: ComplexVec::zeros(l),
        }
    }

    /// Builds an iterate, rejecting duals outside the unit `ℓ∞` ball.
    pub fn new(x: Vec<f64>, g: ComplexVec) -> Result<Self> {
        let norm = g.norm_inf();
        if norm > 1.0 + 1e-12 {
            return Err(Error::Parameter {
                name: "g",
                reason: format!("dual variable has ‖g‖∞ = {norm} > 1"),
            });
        }
        Ok(Self { x, g })
    }

    /// Primal `x` with duals `g = D·W*x`, the fixed point of the dual update.
    pub fn consistent(w: &Dictionary, x: Vec<f64>, mu: f64) -> Result<Self> {
        let s = crate::smoothing::huber_scalings(w, &x, mu)?;
        let g = ComplexVec {
            re: s.d.iter().zip(&s.y.re).map(|(d, y)| d * y).collect(),
            im: s.d.iter().zip(&s.y.im).map(|(d, y)| d * y).collect(),
        };
        Ok(Self { x, g })
    }
}

/// Diagonals `B1..B4` coupling the dual variable into the Newton matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCouplings {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub b3: Vec<f64>,
    pub b4: Vec<f64>,
}

/// `B1 = D g_re ReWᵀx`, `B2 = D g_re ImWᵀx`, `B3 = D g_im ReWᵀx`,
/// `B4 = D g_im ImWᵀx`, with `W*x` taken from the cached scalings.
pub fn dual_couplings(s: &HuberScalings, iterate: &Iterate) -> Result<DualCouplings> {
    let l = s.len();
    check_len("dual_couplings (g_re)", l, iterate.g.re.len())?;
    check_len("dual_couplings (g_im)", l, iterate.g.im.len())?;
    let mut c = DualCouplings {
        b1: Vec::with_capacity(l),
        b2: Vec::with_capacity(l),
        b3: Vec::with_capacity(l),
        b4: Vec::with_capacity(l),
    };
    for i in 0..l {
        let (d, gr, gi) = (s.d[i], iterate.g.re[i], iterate.g.im[i]);
        let (yr, yi) = (s.y.re[i], s.y.im[i]);
        c.b1.push(d * gr * yr);
        c.b2.push(d * gr * yi);
        c.b3.push(d * gi * yr);
        c.b4.push(d * gi * yi);
    }
    Ok(c)
}

/// Symmetrized per-coordinate blocks `D·sym(M_i)` as `(s11, s12, s22)`.
#[derive(Debug, Clone)]
pub struct SymBlocks {
    pub s11: Vec<f64>,
    pub s12: Vec<f64>,
    pub s22: Vec<f64>,
}

impl SymBlocks {
    pub fn new(s: &HuberScalings, couplings: &DualCouplings) -> Self {
        let l = s.len();
        let mut out = SymBlocks {
            s11: Vec::with_capacity(l),
            s12: Vec::with_capacity(l),
            s22: Vec::with_capacity(l),
        };
        for i in 0..l {
            let d = s.d[i];
            out.s11.push(d * (1.0 - couplings.b1[i]));
            out.s12.push(-0.5 * d * (couplings.b2[i] + couplings.b3[i]));
            out.s22.push(d * (1.0 - couplings.b4[i]));
        }
        out
    }
}

/// `B̂ = c·sym(B̃) + AᵀA` at a fixed iterate.
#[derive(Debug, Clone)]
pub struct NewtonOperator<'a> {
    pub w: &'a Dictionary,
    pub a: &'a LinearMap,
    pub c: f64,
    pub blocks: SymBlocks,
}

impl<'a> NewtonOperator<'a> {
    pub fn new(
        s: &HuberScalings,
        couplings: &DualCouplings,
        w: &'a Dictionary,
        a: &'a LinearMap,
        c: f64,
    ) -> Result<Self> {
        check_positive("c", c)?;
        check_len("NewtonOperator: A vs W", w.n(), a.n())?;
        check_len("NewtonOperator: scalings", w.l(), s.len())?;
        Ok(Self {
            w,
            a,
            c,
            blocks: SymBlocks::new(s, couplings),
        })
    }

    /// `sym(B̃)·v`
    pub fn apply_sym_btilde(&self, v: &[f64]) -> Vec<f64> {
        apply_blocks(self.w, &self.blocks, v)
    }
}

pub(crate) fn apply_blocks(w: &Dictionary, b: &SymBlocks, v: &[f64]) -> Vec<f64> {
    let u = w.analyze_unchecked(v);
    let l = w.l();
    if w.is_real() {
        let t: Vec<f64> = (0..l).map(|i| b.s11[i] * u.re[i]).collect();
        return w.synthesize_unchecked(&t, &vec![0.0; l]);
    }
    let mut t_re = vec![0.0; l];
    let mut t_im = vec![0.0; l];
    for i in 0..l {
        let (p, q) = (u.re[i], u.im[i]);
        t_re[i] = b.s11[i] * p + b.s12[i] * q;
        t_im[i] = b.s12[i] * p + b.s22[i] * q;
    }
    w.synthesize_unchecked(&t_re, &t_im)
}

impl SymmetricOperator for NewtonOperator<'_> {
    fn dim(&self) -> usize {
        self.w.n()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.apply_sym_btilde(v);
        for o in out.iter_mut() {
            *o *= self.c;
        }
        axpy(1.0, &self.a.backward(&self.a.forward(v)), &mut out);
        out
    }
}

/// `B̂·v`, matrix-free.
pub fn apply_bhat(
    couplings: &DualCouplings,
    s: &HuberScalings,
    w: &Dictionary,
    a: &LinearMap,
    c: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    check_len("apply_bhat", w.n(), v.len())?;
    Ok(NewtonOperator::new(s, couplings, w, a, c)?.apply(v))
}

/// The unsymmetrized `B̃·v` (and `B̃ᵀ·v` with `transpose`).
pub fn apply_btilde(
    couplings: &DualCouplings,
    s: &HuberScalings,
    w: &Dictionary,
    v: &[f64],
    transpose: bool,
) -> Result<Vec<f64>> {
    check_len("apply_btilde", w.n(), v.len())?;
    let u = w.analyze_unchecked(v);
    let l = w.l();
    let mut t_re = vec![0.0; l];
    let mut t_im = vec![0.0; l];
    for i in 0..l {
        let d = s.d[i];
        let m11 = d * (1.0 - couplings.b1[i]);
        let m12 = -d * couplings.b2[i];
        let m21 = -d * couplings.b3[i];
        let m22 = d * (1.0 - couplings.b4[i]);
        let (m12, m21) = if transpose { (m21, m12) } else { (m12, m21) };
        t_re[i] = m11 * u.re[i] + m12 * u.im[i];
        t_im[i] = m21 * u.re[i] + m22 * u.im[i];
    }
    Ok(w.synthesize_unchecked(&t_re, &t_im))
}

/// Dual increments from the linearized dual equations:
///
/// ```text
/// Δg_re = D(I−B1)ReWᵀΔx − D·B2·ImWᵀΔx − g_re + D·ReWᵀx
/// Δg_im = −D·B3·ReWᵀΔx + D(I−B4)ImWᵀΔx − g_im + D·ImWᵀx
/// ```
pub fn dual_step(
    couplings: &DualCouplings,
    s: &HuberScalings,
    w: &Dictionary,
    iterate: &Iterate,
    dx: &[f64],
) -> Result<ComplexVec> {
    check_len("dual_step", w.n(), dx.len())?;
    check_len("dual_step (g)", w.l(), iterate.g.len())?;
    let u = w.analyze_unchecked(dx);
    let l = w.l();
    let mut dg = ComplexVec::zeros(l);
    for i in 0..l {
        let d = s.d[i];
        let (a, b) = (u.re[i], u.im[i]);
        dg.re[i] = d * (1.0 - couplings.b1[i]) * a - d * couplings.b2[i] * b - iterate.g.re[i]
            + d * s.y.re[i];
        dg.im[i] = -d * couplings.b3[i] * a + d * (1.0 - couplings.b4[i]) * b - iterate.g.im[i]
            + d * s.y.im[i];
    }
    Ok(dg)
}

/// Componentwise projection `u ← min(1/|u|, 1)·u` onto the unit `ℓ∞` ball.
pub fn project_linf(g: &ComplexVec) -> ComplexVec {
    let mut out = g.clone();
    for i in 0..g.len() {
        let m = g.re[i].hypot(g.im[i]);
        if m > 1.0 {
            let (mut re, mut im) = (g.re[i] / m, g.im[i] / m);
            // rounding may leave the modulus one ulp above 1
            if re.hypot(im) > 1.0 {
                re *= 1.0 - f64::EPSILON;
                im *= 1.0 - f64::EPSILON;
            }
            out.re[i] = re;
            out.im[i] = im;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm2};
    use crate::operators::DctShape;
    use crate::smoothing::{huber_hessian_vec, huber_scalings};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_dual(rng: &mut ChaCha8Rng, l: usize, real: bool) -> ComplexVec {
        let g = ComplexVec {
            re: rv(rng, l),
            im: if real { vec![0.0; l] } else { rv(rng, l) },
        };
        project_linf(&g)
    }

    fn scalar_setup(g_re: f64) -> (Dictionary, LinearMap, Iterate, HuberScalings) {
        let w = Dictionary::identity(1);
        let a = LinearMap::dense(DMatrix::identity(1, 1));
        let it = Iterate::new(vec![2.0], ComplexVec::from_real(vec![g_re])).unwrap();
        let s = huber_scalings(&w, &it.x, 1.0).unwrap();
        (w, a, it, s)
    }

    #[test]
    fn couplings_vanish_for_zero_dual_or_zero_primal() {
        let w = Dictionary::itv(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rv(&mut rng, 9);
        let s = huber_scalings(&w, &x, 0.1).unwrap();
        let c = dual_couplings(&s, &Iterate::zeros(9, 9)).unwrap();
        assert!(c.b1.iter().chain(&c.b2).chain(&c.b3).chain(&c.b4).all(|v| *v == 0.0));

        let it = Iterate::new(vec![0.0; 9], random_dual(&mut rng, 9, false)).unwrap();
        let s0 = huber_scalings(&w, &it.x, 0.1).unwrap();
        let c = dual_couplings(&s0, &it).unwrap();
        assert!(c.b1.iter().chain(&c.b2).chain(&c.b3).chain(&c.b4).all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_coupling_and_dual_step() {
        let (w, _, it, s) = scalar_setup(0.5);
        let c = dual_couplings(&s, &it).unwrap();
        assert!((c.b1[0] - 0.447_213_595_499_958).abs() < 1e-12);
        assert_eq!((c.b2[0], c.b3[0], c.b4[0]), (0.0, 0.0, 0.0));

        let (w0, _, it0, s0) = scalar_setup(0.0);
        let c0 = dual_couplings(&s0, &it0).unwrap();
        let dg = dual_step(&c0, &s0, &w0, &it0, &[0.0]).unwrap();
        assert!((dg.re[0] - 0.894_427_190_999_916).abs() < 1e-12);
        let _ = w;
    }

    #[test]
    fn bhat_at_origin_is_two_identity() {
        let w = Dictionary::identity(3);
        let a = LinearMap::dense(DMatrix::identity(3, 3));
        let it = Iterate::zeros(3, 3);
        let s = huber_scalings(&w, &it.x, 1.0).unwrap();
        let c = dual_couplings(&s, &it).unwrap();
        let v = [1.0, -2.0, 0.5];
        let out = apply_bhat(&c, &s, &w, &a, 1.0, &v).unwrap();
        assert_eq!(out, vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn bhat_is_symmetric_and_equals_average_of_btilde_and_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Dictionary::itv(5).unwrap();
        let a = LinearMap::partial_dct(DctShape::Square(5), 8, 1).unwrap();
        let it = Iterate::new(rv(&mut rng, 25), random_dual(&mut rng, 25, false)).unwrap();
        let s = huber_scalings(&w, &it.x, 0.05).unwrap();
        let c = dual_couplings(&s, &it).unwrap();
        let op = NewtonOperator::new(&s, &c, &w, &a, 0.3).unwrap();
        for _ in 0..20 {
            let v = rv(&mut rng, 25);
            let u = rv(&mut rng, 25);
            assert!((dot(&op.apply(&v), &u) - dot(&v, &op.apply(&u))).abs() < 1e-12);
            let bt = apply_btilde(&c, &s, &w, &v, false).unwrap();
            let btt = apply_btilde(&c, &s, &w, &v, true).unwrap();
            let avg: Vec<f64> = bt.iter().zip(&btt).map(|(p, q)| 0.5 * (p + q)).collect();
            let sym = op.apply_sym_btilde(&v);
            assert!(norm2(&crate::linalg::sub(&avg, &sym)) < 1e-12 * norm2(&v).max(1.0));
            // B̃ᵀ really is the adjoint of B̃
            let lhs = dot(&apply_btilde(&c, &s, &w, &v, false).unwrap(), &u);
            let rhs = dot(&v, &apply_btilde(&c, &s, &w, &u, true).unwrap());
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn consistent_duals_reproduce_the_hessian_for_real_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = DMatrix::from_fn(7, 7, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let w = Dictionary::orthonormal(q).unwrap();
        let a = LinearMap::dense(DMatrix::identity(7, 7));
        let mu = 0.03;
        let it = Iterate::consistent(&w, rv(&mut rng, 7), mu).unwrap();
        let s = huber_scalings(&w, &it.x, mu).unwrap();
        let c = dual_couplings(&s, &it).unwrap();
        let op = NewtonOperator::new(&s, &c, &w, &a, 1.0).unwrap();
        for _ in 0..20 {
            let v = rv(&mut rng, 7);
            let h = huber_hessian_vec(&s, &w, &v).unwrap();
            let sym = op.apply_sym_btilde(&v);
            assert!(norm2(&crate::linalg::sub(&h, &sym)) <= 1e-12 * norm2(&v));
        }
        // and the dual update is at its fixed point
        let dg = dual_step(&c, &s, &w, &it, &[0.0; 7]).unwrap();
        assert!(dg.re.iter().chain(&dg.im).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn consistent_duals_reproduce_the_hessian_for_complex_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Dictionary::itv(4).unwrap();
        let mu = 1e-2;
        let it = Iterate::consistent(&w, rv(&mut rng, 16), mu).unwrap();
        let s = huber_scalings(&w, &it.x, mu).unwrap();
        let c = dual_couplings(&s, &it).unwrap();
        let a = LinearMap::partial_dct(DctShape::Square(4), 6, 0).unwrap();
        let op = NewtonOperator::new(&s, &c, &w, &a, 1.0).unwrap();
        for _ in 0..20 {
            let v = rv(&mut rng, 16);
            let h = huber_hessian_vec(&s, &w, &v).unwrap();
            let sym = op.apply_sym_btilde(&v);
            assert!(norm2(&crate::linalg::sub(&h, &sym)) <= 1e-10 * norm2(&v));
        }
    }

    /// Oracle: finite-difference Jacobian of the dual residual
    /// `F(x, g) = D(x)⁻¹ g − W*x`; Newton's dual rows solve
    /// `J_g Δg = −F − J_x Δx`.
    #[test]
    fn dual_step_matches_dense_linearization() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Dictionary::gabor_like(4, 2, 2).unwrap();
        let (n, l) = (w.n(), w.l());
        let mu = 0.2;
        let it = Iterate::new(rv(&mut rng, n), random_dual(&mut rng, l, false)).unwrap();
        let dx = rv(&mut rng, n);
        let s = huber_scalings(&w, &it.x, mu).unwrap();
        let c = dual_couplings(&s, &it).unwrap();
        let got = dual_step(&c, &s, &w, &it, &dx).unwrap();

        let residual = |x: &[f64], g: &ComplexVec| -> DVector<f64> {
            let y = w.analyze(x).unwrap();
            let mut r = DVector::zeros(2 * l);
            for i in 0..l {
                let inv_d = (mu * mu + y.re[i].powi(2) + y.im[i].powi(2)).sqrt();
                r[i] = inv_d * g.re[i] - y.re[i];
                r[l + i] = inv_d * g.im[i] - y.im[i];
            }
            r
        };
        let h = 1e-7;
        let mut jx = DMatrix::zeros(2 * l, n);
        for k in 0..n {
            let mut xp = it.x.clone();
            let mut xm = it.x.clone();
            xp[k] += h;
            xm[k] -= h;
            jx.set_column(k, &((residual(&xp, &it.g) - residual(&xm, &it.g)) / (2.0 * h)));
        }
        // F is linear in g: J_g = diag(D⁻¹, D⁻¹)
        let f0 = residual(&it.x, &it.g);
        let rhs = -(f0 + jx * DVector::from_column_slice(&dx));
        for i in 0..l {
            let inv_d = s.d[i].recip();
            assert!((got.re[i] - rhs[i] / inv_d).abs() < 1e-6, "re {i}");
            assert!((got.im[i] - rhs[l + i] / inv_d).abs() < 1e-6, "im {i}");
        }
    }

    #[test]
    fn projection_examples_and_properties() {
        let g = ComplexVec {
            re: vec![0.3, 3.0],
            im: vec![0.0, 4.0],
        };
        let p = project_linf(&g);
        assert_eq!(p.re[0], 0.3);
        assert!((p.re[1] - 0.6).abs() < 1e-15 && (p.im[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_linf(&p), p);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let u = ComplexVec {
                re: rv(&mut rng, 10).iter().map(|v| 3.0 * v).collect(),
                im: rv(&mut rng, 10).iter().map(|v| 3.0 * v).collect(),
            };
            let v = ComplexVec {
                re: rv(&mut rng, 10).iter().map(|v| 3.0 * v).collect(),
                im: rv(&mut rng, 10).iter().map(|v| 3.0 * v).collect(),
            };
            let (pu, pv) = (project_linf(&u), project_linf(&v));
            assert!(pu.norm_inf() <= 1.0 + 1e-15);
            let dp = ComplexVec {
                re: crate::linalg::sub(&pu.re, &pv.re),
                im: crate::linalg::sub(&pu.im, &pv.im),
            };
            let d = ComplexVec {
                re: crate::linalg::sub(&u.re, &v.re),
                im: crate::linalg::sub(&u.im, &v.im),
            };
            assert!(dp.real_dot(&dp).sqrt() <= d.real_dot(&d).sqrt() + 1e-14);
        }
    }

    #[test]
    fn iterate_rejects_infeasible_duals() {
        assert!(Iterate::new(vec![0.0], ComplexVec::from_real(vec![1.5])).is_err());
    }

    #[test]
    fn bhat_positive_definite_on_itv_dct_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = Dictionary::itv(6).unwrap();
        let a = LinearMap::partial_dct(DctShape::Square(6), 9, 3).unwrap();
        for _ in 0..5 {
            let it = Iterate::new(rv(&mut rng, 36), random_dual(&mut rng, 36, false)).unwrap();
            let s = huber_scalings(&w, &it.x, 1e-3).unwrap();
            let c = dual_couplings(&s, &it).unwrap();
            let op = NewtonOperator::new(&s, &c, &w, &a, 0.05).unwrap();
            let mut dense = DMatrix::zeros(36, 36);
            let mut e = vec![0.0; 36];
            for j in 0..36 {
                e[j] = 1.0;
                dense.set_column(j, &DVector::from_vec(op.apply(&e)));
                e[j] = 0.0;
            }
            let sym = 0.5 * (&dense + dense.transpose());
            assert!(sym.symmetric_eigenvalues().min() > 0.0);
        }
    }
}
