mod common;

use common::*;
use proptest::prelude::*;
use structmor::balancing::Method;
use structmor::beam;
use structmor::interconnection as ic;
use structmor::metrics::{self, LinfOptions};

fn wide_band() -> LinfOptions {
    LinfOptions {
        f_min_hz: 1e-4,
        f_max_hz: 1e3,
        ..LinfOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn h2_matches_frequency_quadrature(seed in any::<u64>(), n in 1usize..=6, p in 1usize..=2, q in 1usize..=2) {
        let mut r = rng(seed);
        let sys = strictly_proper(&mut r, n, p, q);
        let exact = metrics::h2_norm(&sys);
        let quad = metrics::h2_quadrature(&sys, 1e-3, 1e6, 10_000);
        prop_assert!((exact - quad).abs() <= 1e-2 * exact, "{exact} vs {quad}");
    }

    #[test]
    fn linf_is_invariant_under_transposition(seed in any::<u64>(), n in 1usize..=6, p in 1usize..=2) {
        let mut r = rng(seed);
        let sys = stable_system(&mut r, n, p, p);
        let g = metrics::linf_norm(&sys, &wide_band()).value;
        let gt = metrics::linf_norm(&sys.dual().unwrap(), &wide_band()).value;
        prop_assert!((g - gt).abs() <= 1e-9 * g);
    }

    #[test]
    fn linf_bounds_every_sample(seed in any::<u64>(), n in 1usize..=6, p in 1usize..=2, q in 1usize..=2) {
        let mut r = rng(seed);
        let sys = stable_system(&mut r, n, p, q);
        let l = metrics::linf_norm(&sys, &wide_band()).value;
        for w in log_grid(1e-3, 1e3, 97) {
            let s = metrics::sigma_max(&sys, w).unwrap();
            prop_assert!(s <= l * (1.0 + 1e-6), "ω = {w}: {s} > {l}");
        }
        let d = sys.d().clone().singular_values().max();
        prop_assert!(d <= l * (1.0 + 1e-12));
    }

    #[test]
    fn error_of_identical_models_is_zero(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let sys = strictly_proper(&mut r, n, 1, 1);
        let rep = metrics::error_norms(&sys, &sys, &wide_band()).unwrap();
        prop_assert!(rep.h2 <= 1e-12 * (1.0 + metrics::h2_norm(&sys)));
        prop_assert!(rep.linf <= 1e-12);
    }
}

#[test]
fn benchmark_error_norms_are_grid_stable() {
    let (set, topo) = beam::build_benchmark().unwrap();
    let fom = ic::couple(&ic::parallel_compose(&set), &topo).unwrap();
    for method in [Method::MGBT, Method::PIBT] {
        let rom = ic::reduce_interconnected(method, &set, &topo, &[12, 12])
            .unwrap()
            .coupled;
        let err = metrics::error_system(&fom, &rom).unwrap();
        let coarse = metrics::linf_norm(&err, &LinfOptions::default()).value;
        let fine = metrics::linf_norm(
            &err,
            &LinfOptions {
                points: 4000,
                ..LinfOptions::default()
            },
        )
        .value;
        assert!(
            (coarse - fine).abs() <= 1e-3 * fine,
            "{}: {coarse} vs {fine}",
            method.name()
        );
    }
}
