use gridbid_core::grid::{penetration_level, scale_case};
use gridbid_core::instances::{random_instance, RandomSpec};
use gridbid_core::lp::RevisedSimplex;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn scaling_round_trips(seed in 0u64..10_000, a in 0.1f64..10.0, b in 0.1f64..10.0) {
        let (case, _) = random_instance(seed, &RandomSpec::small(), &RevisedSimplex::default()).unwrap();
        let back = scale_case(&scale_case(&case, a, b).unwrap(), 1.0 / a, 1.0 / b).unwrap();
        for (x, y) in case.vres_units.iter().zip(&back.vres_units) {
            prop_assert!((x.capacity_mw - y.capacity_mw).abs() <= 1e-12 * (1.0 + x.capacity_mw));
        }
        for (x, y) in case.lines.iter().zip(&back.lines) {
            prop_assert!((x.capacity_mw - y.capacity_mw).abs() <= 1e-12 * (1.0 + x.capacity_mw));
            prop_assert_eq!(x.reactance_pu, y.reactance_pu);
        }
        prop_assert_eq!(&case.conventional_units, &back.conventional_units);
        prop_assert_eq!(&case.loads, &back.loads);
    }

    #[test]
    fn penetration_is_linear_in_renewable_scale(seed in 0u64..10_000, s in 0.1f64..5.0) {
        let (case, sc) = random_instance(seed, &RandomSpec::small(), &RevisedSimplex::default()).unwrap();
        let base = penetration_level(&case, &sc).unwrap();
        let scaled = penetration_level(&scale_case(&case, s, 1.0).unwrap(), &sc.scaled(s)).unwrap();
        prop_assert!((scaled - s * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }
}
