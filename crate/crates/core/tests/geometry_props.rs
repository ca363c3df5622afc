use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use ordembed::geometry::{
    apply_similarity, cheb_fit_1d, displacement, hausdorff_to_cube, procrustes_align, PointConfig,
    Similarity,
};
use ordembed::triplets::{build_table, signed_margin};

fn config(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = PointConfig> {
    n.prop_flat_map(move |n| prop::collection::vec(0.0..1.0f64, n * d))
        .prop_map(move |v| PointConfig::new(d, v).unwrap())
}

fn similarity(d: usize) -> impl Strategy<Value = Similarity> {
    (
        0.2..5.0f64,
        prop::collection::vec(-1.0..1.0f64, d * d),
        prop::collection::vec(-3.0..3.0f64, d),
        any::<bool>(),
    )
        .prop_filter_map("singular", move |(s, m, t, flip)| {
            let a = DMatrix::from_vec(d, d, m);
            if a.determinant().abs() < 1e-3 {
                return None;
            }
            let mut q = a.qr().q();
            if flip {
                q.column_mut(0).neg_mut();
            }
            Similarity::new(s, q, DVector::from_vec(t)).ok()
        })
}

/// Sorted-gap formula for the 1-D distance to [0,1].
fn hausdorff_1d(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut h = s[0].max(1.0 - s[s.len() - 1]);
    for w in s.windows(2) {
        h = h.max((w[1] - w[0]) / 2.0);
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strict_signs_survive_similarities(x in config(3..=9, 2), sim in similarity(2)) {
        let y = apply_similarity(&sim, &x).unwrap();
        for t in build_table(&x, 0.0).unwrap().iter() {
            let mx = signed_margin(&x, t.anchor, t.j, t.k);
            if mx.abs() > 1e-9 {
                prop_assert_eq!(signed_margin(&y, t.anchor, t.j, t.k) > 0.0, mx > 0.0);
            }
        }
    }

    #[test]
    fn procrustes_undoes_a_similarity(x in config(4..=12, 3), sim in similarity(3)) {
        let y = apply_similarity(&sim, &x).unwrap();
        let (_, rep) = procrustes_align(&x, &y).unwrap();
        prop_assert!(rep.d_inf < 1e-8, "d_inf {}", rep.d_inf);
    }

    #[test]
    fn procrustes_not_worse_than_identity_in_l2(
        (x, y) in (4usize..=10).prop_flat_map(|n| (config(n..=n, 2), config(n..=n, 2)))
    ) {
        let (_, rep) = procrustes_align(&x, &y).unwrap();
        let plain = displacement(&x, &y).unwrap();
        prop_assert!(rep.d_2 <= plain.d_2 + 1e-9);
    }

    #[test]
    fn cheb_fit_beats_any_slope(
        pts in prop::collection::vec((0.0..1.0f64, -2.0..2.0f64), 2..12),
        a in -10.0..10.0f64,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = cheb_fit_1d(&PointConfig::from_1d(&xs), &PointConfig::from_1d(&ys)).unwrap();
        let r: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x - a * y).collect();
        let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(fit.residual <= (hi - lo) / 2.0 + 1e-12);
        let realized = xs.iter().zip(&ys).map(|(x, y)| (x - fit.a * y - fit.b).abs()).fold(0.0, f64::max);
        prop_assert!((realized - fit.residual).abs() < 1e-12);
    }

    #[test]
    fn cheb_fit_ignores_affine_reparametrization(
        pts in prop::collection::vec((0.0..1.0f64, -2.0..2.0f64), 3..10),
        s in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64],
        t in -3.0..3.0f64,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let zs: Vec<f64> = ys.iter().map(|y| s * y + t).collect();
        let x = PointConfig::from_1d(&xs);
        let f1 = cheb_fit_1d(&x, &PointConfig::from_1d(&ys)).unwrap();
        let f2 = cheb_fit_1d(&x, &PointConfig::from_1d(&zs)).unwrap();
        prop_assert!((f1.residual - f2.residual).abs() < 1e-9);
    }

    #[test]
    fn hausdorff_1d_matches_gap_formula(v in prop::collection::vec(0.0..=1.0f64, 1..30)) {
        let h = hausdorff_to_cube(&PointConfig::from_1d(&v)).unwrap();
        prop_assert!((h.value - hausdorff_1d(&v)).abs() < 1e-15);
        prop_assert_eq!(h.error_bound, 0.0);
    }

    #[test]
    fn hausdorff_2d_estimate_is_bracketed(x in config(1..=6, 2)) {
        let h = hausdorff_to_cube(&x).unwrap();
        // Brute force on a coarse independent grid; the true value lies within
        // the estimate's error bound, and a coarse grid can only under-estimate.
        let mut coarse: f64 = 0.0;
        for i in 0..=200 {
            for j in 0..=200 {
                let q = [i as f64 / 200.0, j as f64 / 200.0];
                let d = x.points().map(|p| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
                coarse = coarse.max(d);
            }
        }
        prop_assert!(coarse <= h.value + h.error_bound + 1e-12);
        prop_assert!(h.value - h.error_bound <= coarse + 0.5f64.sqrt() / 200.0 + 1e-12);
    }
}
