use fracac_core::{
    kernel_audit, make_grid, BoundaryModel, DiscreteOperator, Grid, KernelSpec, RadialProfile,
};
use proptest::prelude::*;

fn grid2() -> Grid<f64> {
    make_grid(2, 1.0, 0.125, BoundaryModel::Periodic).unwrap()
}

fn dot(a: &[f64], b: &[f64], g: &Grid<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * g.cell_volume()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 256)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_is_linear(u in values(), v in values(), a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.1f64..1.9) {
        let g = grid2();
        let op = DiscreteOperator::new(&g, &KernelSpec::fractional(s)).unwrap();
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = op.apply_values(&combo);
        let (lu, lv) = (op.apply_values(&u), op.apply_values(&v));
        let scale = lhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - a * lu[i] - b * lv[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn operator_is_self_adjoint_and_nonnegative(u in values(), v in values(), s in 0.1f64..1.9) {
        let g = grid2();
        let op = DiscreteOperator::new(&g, &KernelSpec::fractional(s)).unwrap();
        let (lu, lv) = (op.apply_values(&u), op.apply_values(&v));
        let (uv, vu) = (dot(&lu, &v, &g), dot(&u, &lv, &g));
        prop_assert!((uv - vu).abs() <= 1e-11 * (1.0 + uv.abs()));
        prop_assert!(dot(&lu, &u, &g) >= -1e-12);
    }

    #[test]
    fn general_kernels_are_comparable(u in values(), s in 0.2f64..1.8, lambda in 0.3f64..1.0, spread in 1.0f64..3.0) {
        let g = grid2();
        let big_lambda = lambda * spread;
        let frac = DiscreteOperator::new(&g, &KernelSpec::fractional(s)).unwrap();
        let general = DiscreteOperator::new(
            &g,
            &KernelSpec::general_l2(s, RadialProfile::LogOscillation { lambda, big_lambda }),
        )
        .unwrap();
        let qf = dot(&frac.apply_values(&u), &u, &g);
        let qk = dot(&general.apply_values(&u), &u, &g);
        prop_assert!(lambda * qf <= qk * (1.0 + 1e-9), "{} > {}", lambda * qf, qk);
        prop_assert!(qk <= big_lambda * qf * (1.0 + 1e-9), "{} > {}", qk, big_lambda * qf);
    }
}

#[test]
fn sampled_kernels_respect_their_bounds() {
    for s in [0.3, 1.0, 1.7] {
        for n in [1, 2, 3] {
            let spec = KernelSpec::general_l2(s, RadialProfile::LogOscillation { lambda: 0.5, big_lambda: 2.0 });
            let audit = kernel_audit(&spec, n, 200, 7).unwrap();
            assert!(audit.pass, "s = {s}, n = {n}: {audit:?}");
        }
    }
}
