use fracac_core::{
    gradient_l1_norm, l1_distance, level_set, make_grid, rescale_blowdown, BallRegion, BoundaryModel, ExteriorConstant,
    Grid, ScalarField,
};
use proptest::prelude::*;

fn periodic(n: usize, l: f64, h: f64) -> Grid<f64> {
    make_grid(n, l, h, BoundaryModel::Periodic).unwrap()
}

fn field(g: &Grid<f64>, values: Vec<f64>) -> ScalarField<f64> {
    ScalarField::new(g.clone(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blowdown_by_one_is_identity(values in prop::collection::vec(-1.0f64..1.0, 64)) {
        let g = periodic(2, 1.0, 0.25);
        let u = field(&g, values);
        let v = rescale_blowdown(&u, 1.0, &g).unwrap();
        prop_assert_eq!(v.values, u.values);
    }

    #[test]
    fn blowdowns_compose(a in 1.0f64..2.0, b in 1.0f64..2.0, k in 0.2f64..1.5, phase in -1.0f64..1.0) {
        let h = 0.05;
        let ext = BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 0.0));
        let big = make_grid(1, 8.0, h, ext.clone()).unwrap();
        let mid = make_grid(1, 3.0, h, ext.clone()).unwrap();
        let unit = make_grid(1, 1.0, h, ext).unwrap();
        let u = ScalarField::from_fn(&big, |x| (k * x[0] + phase).sin());
        let two_step = rescale_blowdown(&rescale_blowdown(&u, a, &mid).unwrap(), b, &unit).unwrap();
        let direct = rescale_blowdown(&u, a * b, &unit).unwrap();
        let gap = two_step.values.iter().zip(&direct.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 10.0 * h, "gap {gap}");
    }

    #[test]
    fn l1_distance_is_a_metric(
        f in prop::collection::vec(-1.0f64..1.0, 64),
        g in prop::collection::vec(-1.0f64..1.0, 64),
        k in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let grid = periodic(2, 1.0, 0.25);
        let region = BallRegion::centered(2, 0.8);
        let (f, g, k) = (field(&grid, f), field(&grid, g), field(&grid, k));
        let d = |a: &ScalarField<f64>, b: &ScalarField<f64>| l1_distance(a, b, &region).unwrap();
        prop_assert_eq!(d(&f, &f), 0.0);
        prop_assert_eq!(d(&f, &g), d(&g, &f));
        prop_assert!(d(&f, &k) <= d(&f, &g) + d(&g, &k) + 1e-12);
    }

    #[test]
    fn level_sets_are_nested(values in prop::collection::vec(-1.0f64..1.0, 32), c1 in -1.0f64..1.0, gap in 0.0f64..1.0) {
        let u = field(&periodic(1, 2.0, 0.125), values);
        let low = level_set(&u, c1);
        let high = level_set(&u, c1 + gap);
        for (hi, lo) in high.membership.iter().zip(&low.membership) {
            prop_assert!(!*hi || *lo);
        }
    }

    #[test]
    fn smoothed_half_space_gradient_tracks_perimeter(axis in 0usize..2, offset in -0.5f64..0.5) {
        let h = 0.0625;
        let g = make_grid(2, 3.0, h, BoundaryModel::ExteriorField).unwrap();
        let u = ScalarField::from_fn(&g, |x| ((x[axis] - offset) / h).tanh());
        let r = 2.0;
        let tv = gradient_l1_norm(&u, &BallRegion::centered(2, r)).unwrap();
        let chord = 2.0 * (r * r - offset * offset).sqrt();
        let ratio = tv / (2.0 * chord);
        prop_assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn grid_nodes_are_cell_centred() {
    let g = periodic(1, 4.0, 0.5);
    assert_eq!(g.len(), 16);
    assert_eq!(g.axis_coord(0), -3.75);
    assert_eq!(g.axis_coord(15), 3.75);
    assert!(make_grid::<f64>(1, 1.0, 0.3, BoundaryModel::Periodic).is_err());
    assert!(make_grid::<f64>(4, 1.0, 0.5, BoundaryModel::Periodic).is_err());
}
