use proptest::prelude::*;

use ordembed::bounds::{
    bound_value, build_dyadic_witness, default_depth, normalize_target, verify_interval_bound,
    verify_interval_bound_normalized,
};
use ordembed::geometry::{hausdorff_to_cube, PointConfig};

fn pinned(inner: Vec<f64>) -> PointConfig {
    let mut v = vec![0.0, 1.0];
    v.extend(inner);
    PointConfig::from_1d(&v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn witness_satisfies_containment(inner in prop::collection::vec(0.0..1.0f64, 1..60)) {
        let x = pinned(inner);
        let alpha = hausdorff_to_cube(&x).unwrap().value;
        let depth = default_depth(alpha).unwrap();
        let w = build_dyadic_witness(&x, alpha, depth).unwrap();
        let xs = x.values_1d().unwrap();
        for (label, a) in &w.assignments {
            prop_assert!(a.low - 1e-12 <= a.value && a.value <= a.high + 1e-12, "{label}");
            prop_assert_eq!(xs[a.index], a.value);
        }
        prop_assert_eq!(w.assignments.len(), (1usize << depth) + 1);
    }

    #[test]
    fn bound_is_increasing_in_alpha(a in 1e-6..0.49f64, b in 1e-6..0.49f64) {
        prop_assume!(a < b);
        prop_assert!(bound_value(a).unwrap() < bound_value(b).unwrap());
    }

    #[test]
    fn affine_images_fit_exactly(inner in prop::collection::vec(0.0..1.0f64, 1..30), s in 0.1..10.0f64, t in -5.0..5.0f64, flip in any::<bool>()) {
        let x = pinned(inner);
        let s = if flip { -s } else { s };
        let y = PointConfig::from_1d(&x.values_1d().unwrap().iter().map(|v| s * v + t).collect::<Vec<_>>());
        let c = verify_interval_bound(&x, &y).unwrap();
        prop_assert!(c.ok);
        prop_assert!(c.achieved < 1e-9);
    }

    #[test]
    fn normalization_maps_extremes_to_ends(v in prop::collection::vec(-3.0..3.0f64, 3..20)) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-6);
        let (xn, alpha) = normalize_target(&PointConfig::from_1d(&v)).unwrap();
        let xs = xn.values_1d().unwrap();
        prop_assert!(xs.iter().any(|&u| u == 0.0) && xs.iter().any(|&u| u == 1.0));
        prop_assert!((alpha - hausdorff_to_cube(&xn).unwrap().value).abs() < 1e-15);
        let c = verify_interval_bound_normalized(&PointConfig::from_1d(&v), &PointConfig::from_1d(&v)).unwrap();
        prop_assert!(c.achieved < 1e-9);
    }
}

#[test]
fn missing_endpoints_are_rejected() {
    let x = PointConfig::from_1d(&[0.1, 0.5, 1.0]);
    assert!(verify_interval_bound(&x, &x).is_err());
    assert!(verify_interval_bound_normalized(&x, &x).is_ok());
}
