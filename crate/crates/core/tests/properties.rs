use proptest::prelude::*;

use hcut::alpha::AlphaSampler;
use hcut::cuts::{cut_measure_from_map, cut_metric, elementary_cut_metric, line_variation};
use hcut::distortion::{min_distortion_exact, verify_witness};
use hcut::heisenberg::{cc_distance, koranyi_distance};
use hcut::levels::{slice_grid_values, LevelSet, TestFunction};
use hcut::perimeter::{perimeter, perimeter_field, total_perimeter_measure};
use hcut::{Cut, DistanceMatrix, FiniteMetricSpace, GridGeometry, GridSet, GroupElement, HalfSpace, L1Map};

fn element() -> impl Strategy<Value = GroupElement> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c)| GroupElement::new(a, b, c))
}

fn close(x: GroupElement, y: GroupElement, tol: f64) -> bool {
    x.max_abs_diff(y) <= tol
}

fn l1_map() -> impl Strategy<Value = L1Map> {
    (1usize..12, 1usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-3i32..4, n * m),
            prop::collection::vec(0.5..2.0f64, n),
            prop::collection::vec(0.5..2.0f64, m),
        )
            .prop_map(move |(v, pw, tw)| L1Map::new(v.into_iter().map(|x| x as f64 * 0.5).collect(), pw, tw).unwrap())
    })
}

fn small_grid() -> GridGeometry {
    GridGeometry::cube(1.0, [8, 8, 16]).unwrap()
}

proptest! {
    #[test]
    fn group_law_is_associative(g in element(), h in element(), k in element()) {
        prop_assert!(close((g * h) * k, g * (h * k), 1e-12));
    }

    #[test]
    fn inverse_is_two_sided(g in element()) {
        prop_assert!(close(g * g.inverse(), GroupElement::IDENTITY, 1e-12));
        prop_assert!(close(g.inverse() * g, GroupElement::IDENTITY, 1e-12));
    }

    #[test]
    fn dilations_are_automorphisms(g in element(), h in element(), r in 0.1..3.0f64) {
        let lhs = (g * h).dilate(r).unwrap();
        let rhs = g.dilate(r).unwrap() * h.dilate(r).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10));
    }

    #[test]
    fn koranyi_distance_is_left_invariant_and_homogeneous(x in element(), g in element(), h in element(), r in 0.1..3.0f64) {
        let d = koranyi_distance(g, h);
        prop_assert!((koranyi_distance(x * g, x * h) - d).abs() <= 1e-9 * (1.0 + d));
        let dr = koranyi_distance(g.dilate(r).unwrap(), h.dilate(r).unwrap());
        prop_assert!((dr - r * d).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn cc_distance_is_left_invariant(x in element(), g in element(), h in element()) {
        let d = cc_distance(g, h, 1e-12).unwrap();
        let e = cc_distance(x * g, x * h, 1e-12).unwrap();
        prop_assert!((d - e).abs() <= 1e-7 * (1.0 + d));
        prop_assert!((cc_distance(h, g, 1e-12).unwrap() - d).abs() <= 1e-7 * (1.0 + d));
    }

    #[test]
    fn cut_metric_of_slices_is_the_l1_distance(f in l1_map()) {
        let sigma = cut_measure_from_map(&f).unwrap();
        let d = cut_metric(&sigma);
        prop_assert!(d.max_abs_diff(&f.distance_matrix()) <= 1e-12);
        prop_assert!((sigma.mass(&f.point_weights) - f.norm()).abs() <= 1e-12);
    }

    #[test]
    fn elementary_metric_ignores_complement(n in 2usize..40, mask in any::<u64>(), i in 0usize..40, j in 0usize..40) {
        let (i, j) = (i % n, j % n);
        let cut = Cut::from_fn(n, |k| mask >> (k % 64) & 1 == 1);
        prop_assert_eq!(elementary_cut_metric(&cut, i, j), elementary_cut_metric(&cut.complement(), i, j));
        prop_assert_eq!(Cut::from_hex(n, &cut.to_hex()).unwrap(), cut);
    }

    #[test]
    fn exact_distortion_has_a_valid_witness(pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..7)) {
        let n = pts.len();
        let d = DistanceMatrix::from_fn(n, |i, j| {
            if i == j { 0.0 } else { ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt().max(1e-3) }
        });
        prop_assume!(d.pseudometric_defect() == 0.0);
        let space = FiniteMetricSpace::new(d).unwrap();
        let r = min_distortion_exact(&space).unwrap();
        prop_assert!(r.distortion >= 1.0 - 1e-9);
        let check = verify_witness(&space, &r);
        prop_assert!(check.max_upper_violation <= 1e-9);
        prop_assert!(check.max_lower_violation <= 1e-9);
    }

    #[test]
    fn perimeter_of_complement(seed in any::<u64>()) {
        let g = small_grid();
        let set = GridSet::from_fn(g.clone(), |p| ((p.a * 7.0 + p.b * 3.0 + p.c * 5.0 + seed as f64 * 0.37).sin()) > 0.0);
        let a = perimeter_field(&set).total();
        let b = perimeter_field(&set.complement()).total();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn perimeter_is_additive_over_regions(split in 0usize..1536, angle in 0.0..6.3f64) {
        let g = small_grid();
        let set = GridSet::from_membership(g.clone(), &HalfSpace::new(GroupElement::new(0.1, -0.1, 0.0), angle)).unwrap();
        let whole = perimeter(&set, |_| true).total();
        let parts = perimeter(&set, |i| i < split).total() + perimeter(&set, |i| i >= split).total();
        prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole));
    }

    #[test]
    fn sliced_total_perimeter_is_total_variation(levels in 1usize..12, shift in -1.0..1.0f64) {
        let g = small_grid();
        let values: Vec<f64> = (0..g.len()).map(|i| {
            let p = g.center(i);
            TestFunction::Generic.eval(p) + shift * p.b * p.b
        }).collect();
        let s = slice_grid_values(&g, &values, levels).unwrap();
        let per = total_perimeter_measure(&s.measure, |_| true).unwrap().total();
        let tv = line_variation(&s.quantized, &g.lines());
        prop_assert!((per - tv).abs() <= 1e-10 * (1.0 + tv));
    }

    #[test]
    fn alpha_is_complement_symmetric(t in -0.5..0.5f64, a in -0.3..0.3f64, b in -0.3..0.3f64, r in 0.05..0.4f64) {
        let sampler = AlphaSampler::new(128);
        let x = GroupElement::new(a, b, 0.0);
        let e = LevelSet::new(TestFunction::Parabolic, t);
        let inside = sampler.memberships(&e, x, r).unwrap();
        let outside: Vec<bool> = inside.iter().map(|v| !v).collect();
        prop_assert_eq!(sampler.minimize(&inside).0, sampler.minimize(&outside).0);
    }
}
