use fracac_core::{
    el_consistency, gradient_flow, make_grid, BoundaryModel, Grid, KernelSpec, Potential, ScalarField, SolveConfig,
};
use proptest::prelude::*;

fn grid() -> Grid<f64> {
    make_grid(1, 4.0, 0.125, BoundaryModel::Periodic).unwrap()
}

fn seed_field() -> impl Strategy<Value = ScalarField<f64>> {
    prop::collection::vec(-1.0f64..1.0, 64).prop_map(|v| ScalarField::new(grid(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_decreases_energy_and_stays_in_range(seed in seed_field(), s in 0.2f64..1.8, steps in 1usize..60) {
        let cfg = SolveConfig::new(seed, 1.0).max_iterations(steps);
        let out = gradient_flow(&cfg, &KernelSpec::fractional(s), &Potential::quartic()).unwrap();
        for pair in out.energy_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-10, "{} -> {}", pair[0], pair[1]);
        }
        prop_assert!(out.field.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        if out.converged {
            prop_assert!(out.residual_sup <= cfg.residual_tol);
        }
    }

    #[test]
    fn flow_is_deterministic(seed in seed_field(), s in 0.2f64..1.8) {
        let cfg = SolveConfig::new(seed, 1.0).max_iterations(40);
        let spec = KernelSpec::fractional(s);
        let w = Potential::quartic();
        let a = gradient_flow(&cfg, &spec, &w).unwrap();
        let b = gradient_flow(&cfg, &spec, &w).unwrap();
        prop_assert_eq!(a.field.values, b.field.values);
        prop_assert_eq!(a.energy_trace, b.energy_trace);
    }

    #[test]
    fn energy_derivative_matches_first_variation(u in seed_field(), xi in seed_field(), s in 0.2f64..1.8, eps in 0.2f64..2.0) {
        let r = el_consistency(&u, &xi, &KernelSpec::fractional(s), &Potential::quartic(), eps).unwrap();
        prop_assert!(r.residual <= 1e-6, "residual {}", r.residual);
    }
}

#[test]
fn zero_perturbation_has_zero_derivative() {
    let u = ScalarField::from_fn(&grid(), |x| x[0].tanh());
    let xi = ScalarField::constant(&grid(), 0.0);
    let r = el_consistency(&u, &xi, &KernelSpec::fractional(0.5), &Potential::quartic(), 1.0).unwrap();
    assert_eq!(r.finite_difference, 0.0);
    assert_eq!(r.inner_product, 0.0);
}
