use fracac_core::{
    extend, extension_constant, make_grid, monotonicity_trace, BoundaryModel, Grid, Potential,
    ScalarField,
};
use proptest::prelude::*;

fn grid() -> Grid<f64> {
    make_grid(1, 4.0, 0.125, BoundaryModel::Periodic).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_extend_to_constants(c in -1.0f64..1.0, s in 0.2f64..0.95) {
        let u = ScalarField::constant(&grid(), c);
        let ext = extend(&u, s, 4.0, 0).unwrap();
        for level in &ext.values {
            for v in level {
                prop_assert!((v - c).abs() <= 1e-14, "{v} vs {c}");
            }
        }
    }

    #[test]
    fn extension_obeys_the_maximum_principle(
        amps in prop::collection::vec(-1.0f64..1.0, 3),
        phases in prop::collection::vec(0.0f64..6.3, 3),
        s in 0.2f64..0.95,
    ) {
        let g = make_grid(1, 4.0, 0.0625, BoundaryModel::Periodic).unwrap();
        let u = ScalarField::from_fn(&g, |x| {
            let w: f64 = (0..3).map(|k| amps[k] * (std::f64::consts::FRAC_PI_4 * (k + 1) as f64 * x[0] + phases[k]).cos()).sum();
            w.tanh()
        });
        let ext = extend(&u, s, 4.0, 0).unwrap();
        prop_assert!(ext.max_principle_gap() <= 1e-12);
        prop_assert!(ext.y_nodes.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn extension_constant_is_positive(s in 0.05f64..0.99) {
        let d = extension_constant(s);
        prop_assert!(d.is_finite() && d > 0.0);
    }
}

#[test]
fn monotonicity_radii_must_increase() {
    let u = ScalarField::constant(&grid(), 1.0);
    let ext = extend(&u, 0.5, 4.0, 0).unwrap();
    let w = Potential::quartic();
    assert!(monotonicity_trace(&ext, &[1.0, 1.0], &w, 1.0).is_err());
    assert!(monotonicity_trace(&ext, &[2.0, 1.0], &w, 1.0).is_err());
    let trace = monotonicity_trace(&ext, &[1.0, 2.0], &w, 1.0).unwrap();
    assert!(trace.phi_values.iter().all(|p| p.is_finite()));
}
