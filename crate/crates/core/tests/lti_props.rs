mod common;

use common::*;
use proptest::prelude::*;
use structmor::lti::ValidationOptions;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn similarity_preserves_frf(seed in any::<u64>(), n in 1usize..=6, p in 1usize..=3, q in 1usize..=3) {
        let mut r = rng(seed);
        let sys = stable_system(&mut r, n, p, q);
        let t = transform(&mut r, n);
        let sys2 = sys.similarity_transform(&t).unwrap();
        for w in log_grid(1e-2, 1e2, 20) {
            let s = num_complex::Complex64::new(0.0, w);
            let g = sys.eval(s).unwrap();
            let g2 = sys2.eval(s).unwrap();
            prop_assert!((&g - &g2).norm() <= 1e-8 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn dual_keeps_spectrum_and_swaps_ranks(seed in any::<u64>(), n in 1usize..=6, p in 1usize..=3, rank_b in 0usize..=1) {
        let mut r = rng(seed);
        let mut sys = stable_system(&mut r, n, p, p);
        if rank_b == 0 && n > 1 {
            // Diagonal A and a zero last row of B: the last state is uncontrollable.
            let (a, b, c, d) = sys.into_parts();
            let a = Mat::from_diagonal(&a.diagonal().map(|x| -x.abs() - 0.1));
            let mut b = b;
            b.row_mut(n - 1).fill(0.0);
            sys = structmor::StateSpace::new(a, b, c, d).unwrap();
        }
        let dual = sys.dual().unwrap();
        let mut ev: Vec<(f64, f64)> = structmor::linalg::eigenvalues(sys.a()).iter().map(|z| (z.re, z.im)).collect();
        let mut ed: Vec<(f64, f64)> = structmor::linalg::eigenvalues(dual.a()).iter().map(|z| (z.re, z.im)).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in ev.iter().zip(&ed) {
            prop_assert!((x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9);
        }
        let v = sys.validate(ValidationOptions::default()).unwrap();
        let vd = dual.validate(ValidationOptions::default()).unwrap();
        prop_assert_eq!(v.controllable_dim, vd.observable_dim);
        prop_assert_eq!(v.observable_dim, vd.controllable_dim);
    }

    #[test]
    fn step_response_is_exact_discretization(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let sys = stable_system(&mut r, n, 1, 2);
        let coarse = sys.step_response(0.02, 1.0, 0).unwrap();
        let fine = sys.step_response(0.01, 1.0, 0).unwrap();
        for (k, t) in coarse.t.iter().enumerate() {
            prop_assert!((fine.t[2 * k] - t).abs() < 1e-12);
            for j in 0..2 {
                let a = coarse.y[(k, j)];
                let b = fine.y[(2 * k, j)];
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "t={t}: {a} vs {b}");
            }
        }
    }
}
