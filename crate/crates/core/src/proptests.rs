use proptest::prelude::*;

use crate::dictionary::{ComplexVec, Dictionary};
use crate::linalg::{dot, norm2, sub, SymmetricOperator};
use crate::operators::{DctShape, LinearMap};
use crate::pdsystem::{dual_couplings, project_linf, Iterate, SymBlocks};
use crate::preconditioner::{assemble_itv, Preconditioner};
use crate::smoothing::{huber_hessian_vec, huber_scalings, huber_value};
use crate::solver::{line_search, ContinuationSchedule};

fn vec_of(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_dct_adjoint(p in 2usize..9, frac in 0.1f64..1.0, seed in any::<u64>(),
                           raw in vec_of(128, -1.0, 1.0)) {
        let n = p * p;
        let m = ((n as f64 * frac) as usize).max(1);
        let a = LinearMap::partial_dct(DctShape::Square(p), m, seed).unwrap();
        let x = &raw[..n];
        let y = &raw[64..64 + m];
        let lhs = dot(&a.apply(x).unwrap(), y);
        let rhs = dot(x, &a.adjoint_apply(y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(u in vec_of(16, -4.0, 4.0), v in vec_of(16, -4.0, 4.0)) {
        let cu = ComplexVec { re: u[..8].to_vec(), im: u[8..].to_vec() };
        let cv = ComplexVec { re: v[..8].to_vec(), im: v[8..].to_vec() };
        let (pu, pv) = (project_linf(&cu), project_linf(&cv));
        prop_assert_eq!(&project_linf(&pu), &pu);
        prop_assert!(pu.norm_inf() <= 1.0);
        for i in 0..8 {
            let before = (cu.re[i] - cv.re[i]).hypot(cu.im[i] - cv.im[i]);
            let after = (pu.re[i] - pv.re[i]).hypot(pu.im[i] - pv.im[i]);
            prop_assert!(after <= before * (1.0 + 1e-15) + 1e-15);
        }
    }

    #[test]
    fn pseudo_huber_sandwiches_l1(x in vec_of(16, -2.0, 2.0), mu in 1e-6f64..1.0) {
        let w = Dictionary::itv(4).unwrap();
        let y = w.analyze(&x).unwrap();
        let l1: f64 = y.abs().iter().sum();
        let psi = huber_value(&w, &x, mu).unwrap();
        prop_assert!(psi <= l1 * (1.0 + 1e-12));
        prop_assert!(psi >= l1 - 16.0 * mu - 1e-12);
    }

    #[test]
    fn hessian_is_psd(x in vec_of(25, -1.0, 1.0), v in vec_of(25, -1.0, 1.0), mu in 1e-4f64..1.0) {
        let w = Dictionary::itv(5).unwrap();
        let s = huber_scalings(&w, &x, mu).unwrap();
        let hv = huber_hessian_vec(&s, &w, &v).unwrap();
        prop_assert!(dot(&v, &hv) >= -1e-10 * norm2(&v).powi(2) / mu);
    }

    #[test]
    fn itv_preconditioner_solves(p in 2usize..10, seed in any::<u64>(), mu in 1e-6f64..1e-1,
                                 c in 1e-3f64..1.0, rho in 1e-2f64..0.5) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = p * p;
        let mut r = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
        let w = Dictionary::itv(p).unwrap();
        let g = project_linf(&ComplexVec { re: r(-1.5, 1.5), im: r(-1.5, 1.5) });
        let it = Iterate::new(r(0.0, 1.0), g).unwrap();
        let s = huber_scalings(&w, &it.x, mu).unwrap();
        let blocks = SymBlocks::new(&s, &dual_couplings(&s, &it).unwrap());
        let m = assemble_itv(&blocks, &w, c, rho).unwrap();
        let pre = Preconditioner::itv(&blocks, &w, c, rho).unwrap();
        let rhs = r(-1.0, 1.0);
        let z = pre.solve(&rhs).unwrap();
        prop_assert!(norm2(&sub(&m.apply(&z), &rhs)) <= 1e-9 * norm2(&rhs));
    }

    #[test]
    fn schedule_ends_exactly_at_targets(lc in -4.0f64..0.0, lm in -10.0f64..0.0) {
        let (c, mu) = (10f64.powf(lc), 10f64.powf(lm));
        let s = ContinuationSchedule::new(c, mu).unwrap();
        prop_assert_eq!(*s.pairs.last().unwrap(), (c, mu));
        if s.len() > 1 {
            prop_assert_eq!(s.pairs[0], (0.1, 0.1));
        }
    }

    #[test]
    fn accepted_steps_satisfy_armijo(x0 in -5.0f64..5.0, dx in -10.0f64..10.0) {
        let f = |x: &[f64]| Ok((x[0] - 1.0).powi(4) + x[0] * x[0]);
        let grad = 4.0 * (x0 - 1.0).powi(3) + 2.0 * x0;
        let fx = f(&[x0]).unwrap();
        let out = line_search(f, fx, &[grad], &[x0], &[dx], 0.9, 1e-3, 10).unwrap();
        if out.sufficient_decrease {
            prop_assert!(out.value <= fx + 1e-3 * out.alpha * grad * dx + 1e-12);
            prop_assert!(grad * dx < 0.0);
        }
    }
}
