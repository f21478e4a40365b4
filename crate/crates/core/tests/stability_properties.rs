use fracac_core::{
    cone_perimeter_stability, make_grid, min_rayleigh, second_variation, BallRegion, BoundaryModel, ExteriorConstant,
    Grid, IndicatorSet, KernelSpec, Potential, ScalarField, VectorFieldSpec,
};
use proptest::prelude::*;

fn grid() -> Grid<f64> {
    make_grid(1, 4.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 1.0))).unwrap()
}

/// Random test function supported in `B_r`.
fn compact(values: &[f64], r: f64) -> ScalarField<f64> {
    let g = grid();
    let v = (0..g.len())
        .map(|i| if g.point(i)[0].abs() < r { values[i] } else { 0.0 })
        .collect();
    ScalarField::new(g, v).unwrap()
}

fn q(u: &ScalarField<f64>, xi: &ScalarField<f64>, s: f64) -> f64 {
    second_variation(u, xi, &KernelSpec::fractional(s), &Potential::quartic(), 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn second_variation_is_a_quadratic_form(
        base in prop::collection::vec(-1.0f64..1.0, 64),
        a in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 64),
        alpha in -3.0f64..3.0,
        s in 0.2f64..1.8,
    ) {
        let u = ScalarField::new(grid(), base).unwrap();
        let (xa, xb) = (compact(&a, 3.0), compact(&b, 3.0));
        let qa = q(&u, &xa, s);
        let scaled = xa.map(|v| alpha * v);
        prop_assert!((q(&u, &scaled, s) - alpha * alpha * qa).abs() <= 1e-10 * (1.0 + qa.abs() * alpha * alpha));
        let plus = xa.zip_map(&xb, |x, y| x + y).unwrap();
        let minus = xa.zip_map(&xb, |x, y| x - y).unwrap();
        let lhs = q(&u, &plus, s) + q(&u, &minus, s);
        let rhs = 2.0 * qa + 2.0 * q(&u, &xb, s);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn stable_well_has_nonnegative_second_variation(xi in prop::collection::vec(-1.0f64..1.0, 64), s in 0.2f64..1.8) {
        let u = ScalarField::constant(&grid(), 1.0);
        let xi = compact(&xi, 3.0);
        prop_assert!(q(&u, &xi, s) >= -1e-4 * xi.dot(&xi));
    }
}

#[test]
fn witness_reproduces_the_rayleigh_value() {
    let g = make_grid::<f64>(1, 8.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 0.0))).unwrap();
    let u = ScalarField::from_fn(&g, |x| 0.3 * x[0].sin());
    let region = BallRegion::centered(1, 5.0);
    let spec = KernelSpec::fractional(0.6);
    let w = Potential::quartic();
    let rep = min_rayleigh(&u, &region, &spec, &w, 1.0, 2000).unwrap();
    for i in 0..g.len() {
        if !region.contains(&g.point(i)[..1]) {
            assert_eq!(rep.witness.values[i], 0.0);
        }
    }
    let norm2 = rep.witness.dot(&rep.witness);
    let again = second_variation(&u, &rep.witness, &spec, &w, 1.0).unwrap() / norm2;
    assert!((again - rep.min_rayleigh).abs() <= 1e-10 * (1.0 + again.abs()), "{again} vs {}", rep.min_rayleigh);
}

#[test]
fn perimeter_quotient_is_even_in_the_field() {
    let g = make_grid::<f64>(2, 1.5, 1.0 / 16.0, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
    let half_plane = IndicatorSet::from_fn(&g, |x| x[0] >= 0.0);
    let v = vec![0.6, -0.8];
    let minus: Vec<f64> = v.iter().map(|c| -c).collect();
    let ts = [0.05];
    let a = cone_perimeter_stability(&half_plane, &VectorFieldSpec::bumped_constant(v, 0.1, 0.9), 0.5, &ts).unwrap();
    let b = cone_perimeter_stability(&half_plane, &VectorFieldSpec::bumped_constant(minus, 0.1, 0.9), 0.5, &ts).unwrap();
    for (p, m) in a.iter().zip(&b) {
        assert!((p.q - m.q).abs() <= 1e-12 * (1.0 + p.q.abs()), "{} vs {}", p.q, m.q);
    }
}
