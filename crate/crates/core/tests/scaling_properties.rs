use fracac_core::{fit_loglog, ScalingExperiment};
use proptest::prelude::*;

fn power_law(radii: &[f64], c: f64, p: f64) -> ScalingExperiment {
    let values = radii.iter().map(|r| c * r.powf(p)).collect();
    ScalingExperiment::new("power", radii.to_vec(), values, vec![0.0; radii.len()]).unwrap()
}

fn parse(csv: &str) -> ScalingExperiment {
    let mut cols = (Vec::new(), Vec::new(), Vec::new());
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        cols.0.push(f[0]);
        cols.1.push(f[1]);
        cols.2.push(f[2]);
    }
    ScalingExperiment::new("parsed", cols.0, cols.1, cols.2).unwrap()
}

fn increasing() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..2.0, 4..10).prop_map(|steps| {
        let mut r = 1.0;
        steps
            .into_iter()
            .map(|d| {
                r += d;
                r
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn doubling_abscissae_keeps_the_slope(radii in increasing(), c in 0.01f64..100.0, p in -3.0f64..3.0) {
        let a = fit_loglog(&power_law(&radii, c, p)).unwrap();
        let doubled: Vec<f64> = radii.iter().map(|r| 2.0 * r).collect();
        let b = fit_loglog(&power_law(&doubled, c, p)).unwrap();
        prop_assert!((a.slope - p).abs() <= 1e-9);
        prop_assert!((a.slope - b.slope).abs() <= 1e-9);
    }

    #[test]
    fn slope_is_reproducible_from_the_csv(radii in increasing(), noise in prop::collection::vec(0.5f64..2.0, 10)) {
        let values: Vec<f64> = radii.iter().zip(&noise).map(|(r, e)| r * r * e).collect();
        let exp = ScalingExperiment::new("noisy", radii.clone(), values, vec![0.0; radii.len()]).unwrap();
        let direct = fit_loglog(&exp).unwrap();
        let again = fit_loglog(&parse(&exp.to_csv())).unwrap();
        prop_assert_eq!(direct.slope.to_bits(), again.slope.to_bits());
        prop_assert_eq!(direct.intercept.to_bits(), again.intercept.to_bits());
    }

    #[test]
    fn fit_statistics_are_well_formed(radii in increasing(), noise in prop::collection::vec(0.01f64..10.0, 10)) {
        let values: Vec<f64> = noise[..radii.len()].to_vec();
        let exp = ScalingExperiment::new("random", radii.clone(), values, vec![0.0; radii.len()]).unwrap();
        let fit = fit_loglog(&exp).unwrap();
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        prop_assert!(fit.window.0 < fit.window.1 && fit.window.1 <= radii.len());
    }
}

#[test]
fn traces_are_validated() {
    assert!(ScalingExperiment::new("x", vec![1.0, 2.0], vec![1.0], vec![0.0]).is_err());
    assert!(ScalingExperiment::new("x", vec![1.0, 3.0, 2.0], vec![1.0; 3], vec![0.0; 3]).is_err());
    assert!(ScalingExperiment::new("x", vec![3.0, 2.0, 1.0], vec![1.0; 3], vec![0.0; 3]).is_ok());
}
