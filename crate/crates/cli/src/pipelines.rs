//! One pipeline per experiment: compute, write traces, and record named checks.

use std::time::Instant;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracac_core::scaling::{CALIBRATION_SEEDS, DENSITY_FROZEN, INTERPOLATION_CONSTANT, SOBOLEV_BV_CONSTANT};
use fracac_core::stability::{cosine_similarity, gradient_field};
use fracac_core::{
    blowdown_convergence, bv_scaling, cone_perimeter_stability, density_check, el_consistency, embed_profile, extend,
    extend_half_space, flatness_profile, full_energy_scaling, gradient_flow, gradient_test_inequality,
    gradient_test_terms, interpolation_check, layer_decay, make_grid, maxmin_identity_check, min_rayleigh,
    monotonicity_trace, operator_consistency, perimeter_energy_identity, pot_vs_sob, potential_decay,
    random_smooth_field, solve_layer, sobolev_scaling, unit_width_epsilon, BallRegion, BoundaryModel,
    DensityCheckConfig, DensityOutcome, ExteriorConstant, IndicatorSet, KernelSpec, LayerSolution, Potential,
    PotentialKind, ScalarField, ScalingRun, SolveConfig, VectorFieldSpec,
};

use crate::config::{Experiment, RunConfig};
use crate::output::{field_csv, svg_line_plot, trace_csv, Sink};
use crate::report::{Check, RunReport};

/// Slope tolerance of the fitted exponents.
pub const SLOPE_TOLERANCE: f64 = 0.15;

/// Runs the configured experiment and writes `report.json`, `checks.csv`, `config.csv` and `timing.json`
/// next to its traces under `output_dir/<experiment>/`.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut sink = Sink::create(&cfg.output_dir, cfg.experiment.id())
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    let mut report = RunReport::new(cfg.experiment.id(), cfg.echo());
    match cfg.experiment {
        Experiment::Layer => layer(cfg, &mut sink, &mut report)?,
        Experiment::OpCheck => op_check(cfg, &mut sink, &mut report)?,
        Experiment::Energy => energy(cfg, &mut sink, &mut report)?,
        Experiment::Scaling => scaling(cfg, &mut sink, &mut report)?,
        Experiment::Monotonicity => monotonicity(cfg, &mut sink, &mut report)?,
        Experiment::Stability => stability(cfg, &mut sink, &mut report)?,
        Experiment::Density => density(cfg, &mut sink, &mut report)?,
        Experiment::Blowdown => blowdown(cfg, &mut sink, &mut report)?,
        Experiment::Cone => cone(cfg, &mut sink, &mut report)?,
    }
    sink.write("checks.csv", &report.checks_csv())?;
    let mut echo = String::from("key,value\n");
    for (k, v) in &report.config {
        echo.push_str(&format!("{k},\"{v}\"\n"));
    }
    sink.write("config.csv", &echo)?;
    report.artifacts = sink.written().to_vec();
    report.artifacts.push("report.json".into());
    report.artifacts.sort();
    report.wall_clock_s = start.elapsed().as_secs_f64();
    sink.json("report.json", &report)?;
    sink.json("timing.json", &serde_json::json!({ "wall_clock_s": report.wall_clock_s }))?;
    Ok(report)
}

fn potential(cfg: &RunConfig) -> Potential<f64> {
    match cfg.potential {
        PotentialKind::PeierlsNabarro => Potential::peierls_nabarro(),
        _ => Potential::quartic(),
    }
}

fn spec(s: f64) -> KernelSpec<f64> {
    if s >= 2.0 {
        KernelSpec::classical()
    } else {
        KernelSpec::fractional(s)
    }
}

fn epsilon(cfg: &RunConfig, n: usize, s: f64) -> f64 {
    cfg.epsilon.unwrap_or(if s >= 2.0 { 1.0 } else { unit_width_epsilon(n, s) })
}

fn layer_1d(cfg: &RunConfig, s: f64, box_radius: f64, h: f64) -> Result<LayerSolution<f64>> {
    Ok(solve_layer(&spec(s), &potential(cfg), epsilon(cfg, 1, s), box_radius, h, cfg.tol)?)
}

fn write_run(sink: &mut Sink, name: &str, run: &ScalingRun) -> Result<()> {
    let e = &run.experiment;
    sink.write(&format!("{name}.csv"), &e.to_csv())?;
    sink.write(
        &format!("{name}.svg"),
        &svg_line_plot(name, &[(name, &e.abscissae, &e.values)], true, true),
    )?;
    Ok(())
}

fn slope_of(run: &ScalingRun) -> f64 {
    run.fit.as_ref().map_or(f64::NAN, |f| f.slope)
}

fn layer(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let sol = layer_1d(cfg, cfg.s, cfg.box_radius, cfg.h)?;
    let u = &sol.field;
    sink.write("profile.csv", &field_csv(u))?;
    let xs: Vec<f64> = (0..u.grid.len()).map(|i| u.grid.point(i)[0]).collect();
    sink.write("profile.svg", &svg_line_plot("layer", &[("phi", &xs, &u.values)], false, false))?;
    let monotone = u.values.windows(2).all(|p| p[1] >= p[0]);
    report.push(Check::holds(4, "layer_monotone", monotone));
    report.push(Check::at_most(4, "layer_residual", sol.residual_sup, 1e-8));
    let mut record = serde_json::json!({
        "epsilon": sol.epsilon,
        "residual_sup": sol.residual_sup,
        "newton_steps": sol.newton_steps,
        "symmetry_defect": sol.symmetry_defect,
    });
    if cfg.s < 2.0 && cfg.box_radius >= 20.0 {
        let d = layer_decay(u)?;
        report.push(Check::near(4, "layer_tail_exponent", d.fit.slope, -cfg.s, 0.1));
        report.push(Check::holds(4, "layer_tail_conclusive", !d.inconclusive));
        record["tail_fit"] = serde_json::to_value(&d)?;
    }
    sink.json("convergence.json", &record)?;
    Ok(())
}

fn op_check(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let g = make_grid::<f64>(cfg.n, cfg.box_radius, cfg.h, BoundaryModel::Periodic)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // band-limited: integer wave vectors of the 2L-periodic box up to |k| = 6
    let base = std::f64::consts::PI / cfg.box_radius;
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..4)
        .map(|_| {
            let k: Vec<f64> = (0..cfg.n).map(|_| rng.gen_range(-6i32..=6) as f64 * base).collect();
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let u = ScalarField::from_fn(&g, |x| {
        modes
            .iter()
            .map(|(k, a, p)| a * (k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + p).cos())
            .sum()
    });
    let s_list = if cfg.s_list.is_empty() { vec![cfg.s] } else { cfg.s_list.clone() };
    let mut rows = String::from("s,discrepancy,calibrated_constant,analytic_constant\n");
    for &s in &s_list {
        let r = operator_consistency(&u, s, 1e-3)?;
        rows.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s, r.discrepancy, r.calibrated_constant, r.analytic_constant
        ));
        report.push(Check::at_most(1, &format!("operator_discrepancy_s{s}"), r.discrepancy, 1e-3));
    }
    sink.write("consistency.csv", &rows)?;
    Ok(())
}

fn energy(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let n = cfg.n;
    let w = potential(cfg);
    if cfg.wants("euler_lagrange") {
        let mut dir = vec![0.0; n];
        dir[0] = 1.0;
        let g = make_grid::<f64>(n, cfg.box_radius, cfg.h, BoundaryModel::signs(dir))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let eps = epsilon(cfg, n, cfg.s);
        let mut rows = String::from("pair,finite_difference,inner_product,residual\n");
        let mut worst = 0.0f64;
        for k in 0..cfg.samples {
            let u = ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let freq: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
            let amp = rng.gen_range(0.2..1.0);
            let reach = 0.9 * cfg.box_radius;
            let xi = ScalarField::from_fn(&g, |x| {
                let r2: f64 = x.iter().take(n).map(|v| v * v).sum::<f64>() / (reach * reach);
                if r2 < 1.0 {
                    amp * (1.0 - r2) * x.iter().zip(&freq).map(|(a, b)| a * b).sum::<f64>().sin()
                } else {
                    0.0
                }
            });
            let c = el_consistency(&u, &xi, &spec(cfg.s), &w, eps)?;
            worst = worst.max(c.residual);
            rows.push_str(&format!(
                "{k},{:.16e},{:.16e},{:.16e}\n",
                c.finite_difference, c.inner_product, c.residual
            ));
        }
        sink.write("euler_lagrange.csv", &rows)?;
        report.push(Check::at_most(2, "euler_lagrange_residual", worst, 1e-6));
    }
    if cfg.wants("identity") {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
        let mut worst = 0.0f64;
        for _ in 0..1_000_000 {
            let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            worst = worst.max(maxmin_identity_check(q[0], q[1], q[2], q[3]));
        }
        sink.write("identity.csv", &format!("quadruples,max_residual\n1000000,{worst:.16e}\n"))?;
        report.push(Check::at_most(3, "maxmin_identity_residual", worst, 1e-12));
    }
    Ok(())
}

fn scaling(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let n = cfg.n;
    let w = potential(cfg);
    let s = cfg.s;
    let mut dir = vec![0.0; n];
    dir[0] = 1.0;
    let g = make_grid::<f64>(n, cfg.box_radius, cfg.h, BoundaryModel::signs(dir.clone()))?;
    let needs_layer = cfg.wants("exponents") || cfg.wants("domination");
    let u = if needs_layer {
        let profile = layer_1d(cfg, s, 40f64.max(cfg.box_radius * 2.5), 0.1)?.field;
        Some(embed_profile(&profile, &dir, &g)?)
    } else {
        None
    };
    if cfg.wants("exponents") {
        let u = u.as_ref().unwrap();
        let bv = bv_scaling(u, &cfg.radii)?;
        let sob = sobolev_scaling(u, &cfg.radii, s)?;
        let full = full_energy_scaling(u, &cfg.radii, s, &w, epsilon(cfg, n, s))?;
        write_run(sink, "bv", &bv)?;
        write_run(sink, "sobolev", &sob)?;
        write_run(sink, "energy", &full)?;
        report.push(Check::near(7, "bv_slope", slope_of(&bv), bv.expected_slope, SLOPE_TOLERANCE));
        report.push(Check::near(7, "sobolev_slope", slope_of(&sob), sob.expected_slope, SLOPE_TOLERANCE));
        report.push(Check::near(7, "energy_slope", slope_of(&full), full.expected_slope, SLOPE_TOLERANCE));
        let r4 = 4.0f64.min(cfg.box_radius - cfg.h);
        let sob4 = sobolev_scaling(u, &[r4], s)?.experiment.values[0];
        let bv4 = bv_scaling(u, &[r4])?.experiment.values[0];
        report.push(Check::at_most(
            7,
            "sobolev_bv_bound",
            (1.0 - s) * sob4 / (1.0 + bv4),
            SOBOLEV_BV_CONSTANT,
        ));
    }
    if cfg.wants("domination") {
        let u = u.as_ref().unwrap();
        let radii: Vec<f64> = cfg.radii.iter().copied().filter(|r| *r > cfg.r0).collect();
        let rep = pot_vs_sob(u, &radii, cfg.r0, &spec(s), &w, epsilon(cfg, n, s))?;
        sink.write("pot_vs_sob.csv", &trace_csv(&rep.radii, &rep.ratios, &[]))?;
        report.push(Check::at_most(8, "pot_sob_trend_slope", rep.trend_slope, 0.05));
        report.push(Check::holds(8, "pot_sob_ratio_finite", rep.max_ratio.is_finite()));
        let classical = layer_1d(cfg, 2.0, 20.0, 0.05)?.field;
        let uc = embed_profile(&classical, &dir, &g)?;
        let rc = pot_vs_sob(&uc, &radii, cfg.r0, &KernelSpec::classical(), &w, 1.0)?;
        sink.write("pot_vs_sob_classical.csv", &trace_csv(&rc.radii, &rc.ratios, &[]))?;
        report.push(Check::at_most(8, "classical_ratio_max", rc.max_ratio, 1.0));
    }
    if cfg.wants("decay") {
        let s_list = if cfg.s_list.is_empty() { vec![s] } else { cfg.s_list.clone() };
        let lmax = cfg.epsilon_list.iter().fold(0.0f64, |m, e| m.max(1.0 / e));
        for &sd in &s_list {
            let profile = layer_1d(cfg, sd, lmax.max(20.0), 0.1)?.field;
            let run = potential_decay(&profile, &cfg.epsilon_list, sd, n, &w)?;
            write_run(sink, &format!("potential_decay_s{sd}"), &run)?;
            report.push(Check::at_least(9, &format!("potential_decay_s{sd}"), slope_of(&run), run.expected_slope - 0.05));
        }
    }
    if cfg.wants("interpolation") {
        let gi = make_grid::<f64>(2, 6.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(2, 0.0)))?;
        // fresh seeds, disjoint from the calibration family
        let fresh = 2000u64;
        debug_assert!(!CALIBRATION_SEEDS.contains(&fresh));
        let mut rows = String::from("seed,s,lhs,v,p,ratio\n");
        let mut worst = 0.0f64;
        for seed in fresh..fresh + cfg.samples as u64 {
            let f = random_smooth_field(&gi, seed);
            for si in [0.3, 0.5, 0.7] {
                let r = interpolation_check(&f, 4.0, si)?;
                worst = worst.max(r.ratio);
                rows.push_str(&format!(
                    "{seed},{si},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    r.lhs, r.v, r.p, r.ratio
                ));
            }
        }
        sink.write("interpolation.csv", &rows)?;
        report.push(Check::at_most(14, "interpolation_ratio_max", worst, INTERPOLATION_CONSTANT));
    }
    Ok(())
}

fn monotonicity(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let s = cfg.s;
    let w = potential(cfg);
    if cfg.wants("layer") {
        let u = layer_1d(cfg, s, cfg.box_radius, cfg.h)?.field;
        let e = extend(&u, s, cfg.box_radius, 0)?;
        let t = monotonicity_trace(&e, &cfg.radii, &w, epsilon(cfg, 1, s))?;
        sink.write("phi_layer.csv", &t.to_csv())?;
        sink.write("phi_layer.svg", &svg_line_plot("Phi(R)", &[("layer", &t.radii, &t.phi_values)], true, false))?;
        report.push(Check::holds(6, "layer_phi_nondecreasing", t.is_monotone()));
        report.push(Check::holds(6, "layer_hypothesis", !t.hypothesis_violated));
    }
    if cfg.wants("half_space") {
        let g = make_grid::<f64>(1, 16.0, 1.0 / 512.0, BoundaryModel::signs(vec![1.0]))?;
        let e = extend_half_space(&g, &[1.0], s, 16.0, 0)?;
        let t = monotonicity_trace(&e, &[2.0, 4.0, 8.0, 16.0], &w, 1.0)?;
        sink.write("phi_half_space.csv", &t.to_csv())?;
        report.push(Check::at_most(6, "half_space_phi_spread", t.relative_spread(), 0.01));
    }
    Ok(())
}

fn stability(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let s = cfg.s;
    let w = potential(cfg);
    let iterations = cfg.max_iterations;
    if cfg.wants("rayleigh") {
        let u = layer_1d(cfg, s, cfg.box_radius, cfg.h)?.field;
        let region = BallRegion::centered(1, cfg.box_radius / 2.0);
        let rep = min_rayleigh(&u, &region, &spec(s), &w, epsilon(cfg, 1, s), iterations)?;
        let grad = gradient_field(&u);
        let mask = u.grid.region_mask(&region);
        let d: Vec<f64> = (0..u.grid.len()).map(|i| if mask[i] { grad[i][0] } else { 0.0 }).collect();
        let cos = cosine_similarity(&d, &rep.witness.values);
        sink.write("witness.csv", &field_csv(&rep.witness))?;
        sink.json("rayleigh.json", &rep.to_json())?;
        report.push(Check::near(5, "layer_min_rayleigh", rep.min_rayleigh, 0.0, 1e-3));
        report.push(Check::at_least(5, "witness_cosine", cos, 0.99));
        let g0 = make_grid::<f64>(1, 8.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 0.0)))?;
        let zero = ScalarField::constant(&g0, 0.0);
        let rz = min_rayleigh(&zero, &BallRegion::centered(1, 7.0), &spec(s), &w, epsilon(cfg, 1, s), iterations)?;
        sink.json("rayleigh_zero.json", &serde_json::json!({ "min_rayleigh": rz.min_rayleigh }))?;
        report.push(Check::at_most(5, "zero_field_min_rayleigh", rz.min_rayleigh, -0.5));
    }
    if cfg.wants("gradient") {
        let g = make_grid::<f64>(2, 5.0, 0.125, BoundaryModel::signs(vec![1.0, 0.0]))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let seed = ScalarField::new(
            g.clone(),
            (0..g.len())
                .map(|i| {
                    let p = g.point(i);
                    (0.5 * p[0] + 0.3 * rng.gen_range(-1.0..1.0)).tanh()
                })
                .collect(),
        )?;
        let eps = epsilon(cfg, 2, s);
        let relaxed = gradient_flow(
            &SolveConfig::new(seed, eps).scheme(cfg.scheme).residual_tol(1e-6),
            &spec(s),
            &w,
        )?;
        let t = gradient_test_inequality(&relaxed.field, s, &w, eps)?;
        let profile = layer_1d(cfg, s, 20.0, 0.125)?.field;
        let emb = embed_profile(&profile, &[1.0, 0.0], &g)?;
        let te = gradient_test_terms(&emb, s)?;
        sink.write(
            "gradient_test.csv",
            &format!(
                "field,i2,i3\nrelaxed,{:.16e},{:.16e}\nembedded,{:.16e},{:.16e}\n",
                t.i2, t.i3, te.i2, te.i3
            ),
        )?;
        report.push(Check::at_most(13, "relaxed_i2_over_i3", t.i2 / t.i3, 1.05));
        report.push(Check::holds(13, "embedded_i2_zero", te.i2 == 0.0));
    }
    Ok(())
}

fn density(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let (c_bar, omega0, r0) = DENSITY_FROZEN;
    let dc = DensityCheckConfig::new(1, c_bar, omega0, r0)?;
    let l = cfg.box_radius;
    let well = |c: f64| make_grid::<f64>(1, l, cfg.h, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, c)));
    let mut zoo: Vec<(String, ScalarField<f64>)> = vec![
        ("minus_one".into(), ScalarField::constant(&well(-1.0)?, -1.0)),
        ("plus_one".into(), ScalarField::constant(&well(1.0)?, 1.0)),
    ];
    for s in [0.3, 0.5, 0.7] {
        let u = layer_1d(cfg, s, l, cfg.h)?.field;
        zoo.push((format!("layer_s{s}"), u.map(|v| v)));
        zoo.push((format!("reflected_layer_s{s}"), u.map(|v| -v)));
        for &r in &cfg.radii {
            let shift = 3.0 * r;
            let moved = ScalarField::from_fn(&u.grid, |x| u.sample(&[x[0] - shift]).unwrap_or(-1.0));
            zoo.push((format!("layer_s{s}_shift{shift}"), moved));
        }
    }
    let mut rows = String::from("field,R,density,sup_half,outcome\n");
    let mut counterexamples = 0usize;
    let mut outcome_of = std::collections::BTreeMap::new();
    for (name, u) in &zoo {
        for &r in &cfg.radii {
            let d = density_check(u, r, &dc)?;
            if d.outcome == DensityOutcome::Counterexample {
                counterexamples += 1;
            }
            let tag = serde_json::to_value(d.outcome)?.as_str().unwrap_or_default().to_string();
            rows.push_str(&format!("{name},{r},{:.16e},{:.16e},{tag}\n", d.density, d.sup_half));
            outcome_of.insert((name.clone(), r.to_bits()), d.outcome);
        }
    }
    sink.write("density.csv", &rows)?;
    sink.json(
        "density_config.json",
        &serde_json::json!({ "c_bar": c_bar, "omega0": omega0, "R0": r0 }),
    )?;
    report.push(Check::at_most(11, "density_counterexamples", counterexamples as f64, 0.0));
    let r = cfg.radii[0];
    let at = |name: &str| outcome_of.get(&(name.to_string(), r.to_bits())).copied();
    report.push(Check::holds(11, "minus_one_implication", at("minus_one") == Some(DensityOutcome::ImplicationHolds)));
    report.push(Check::holds(11, "plus_one_vacuous", at("plus_one") == Some(DensityOutcome::HypothesisFalse)));
    report.push(Check::holds(
        11,
        "centered_layer_vacuous",
        at("layer_s0.5") == Some(DensityOutcome::HypothesisFalse)
            && at("reflected_layer_s0.5") == Some(DensityOutcome::HypothesisFalse),
    ));
    report.push(Check::holds(
        11,
        "translated_layer_implication",
        at(&format!("layer_s0.5_shift{}", 3.0 * r)) == Some(DensityOutcome::ImplicationHolds),
    ));
    Ok(())
}

fn blowdown(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let s = cfg.s;
    let d = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
    let profile = layer_1d(cfg, s, 40f64.max(cfg.box_radius * 2.0), 0.1)?.field;
    let g = make_grid::<f64>(2, cfg.box_radius, cfg.h, BoundaryModel::signs(d.to_vec()))?;
    let u = embed_profile(&profile, &d, &g)?;
    let t = blowdown_convergence(&u, &cfg.radii, 0.5, 1.0 / 64.0)?;
    sink.write("blowdown_l1.csv", &trace_csv(&t.radii, &t.l1, &[]))?;
    sink.write("blowdown_hausdorff.csv", &trace_csv(&t.radii, &t.hausdorff, &[]))?;
    sink.write(
        "blowdown.svg",
        &svg_line_plot("blow-down distances", &[("L1", &t.radii, &t.l1), ("Hausdorff", &t.radii, &t.hausdorff)], true, true),
    )?;
    let angle = t.angle_to(&d);
    sink.json("blowdown_normal.json", &serde_json::json!({ "normal": t.normal, "angle_deg": angle }))?;
    report.push(Check::holds(10, "l1_strictly_decreasing", t.l1_strictly_decreasing()));
    report.push(Check::holds(10, "hausdorff_strictly_decreasing", t.hausdorff_strictly_decreasing()));
    report.push(Check::at_most(10, "normal_angle_deg", angle, 5.0));
    let flat = flatness_profile(&u, &cfg.radii, -0.8, 0.8)?;
    let a: Vec<f64> = flat.iter().map(|p| p.a).collect();
    sink.write("flatness.csv", &trace_csv(&cfg.radii, &a, &[]))?;
    let trapped: Vec<f64> = a.iter().copied().filter(|v| *v < 1.0).collect();
    let decreasing = a.windows(2).all(|p| p[1] <= p[0])
        && trapped.len() >= 2
        && trapped.windows(2).all(|p| p[1] < p[0]);
    report.push(Check::holds(10, "flatness_decreasing", decreasing));
    Ok(())
}

fn cone(cfg: &RunConfig, sink: &mut Sink, report: &mut RunReport) -> Result<()> {
    let s = cfg.s;
    let g = make_grid::<f64>(2, cfg.box_radius, cfg.h, BoundaryModel::signs(vec![0.0, 1.0]))?;
    let half = IndicatorSet::from_fn(&g, |x| x[1] > 0.0);
    if cfg.wants("identity") {
        let r = perimeter_energy_identity(&half, &BallRegion::centered(2, 1.0), s)?;
        sink.write("perimeter_identity.csv", &format!("s,residual\n{s},{r:.16e}\n"))?;
        report.push(Check::at_most(12, "perimeter_identity_residual", r, 1e-12));
    }
    if cfg.wants("suite") {
        let mut rows = String::from("seed,t,q,error_bar\n");
        let mut worst = f64::INFINITY;
        for seed in 0..cfg.samples as u64 {
            let x = VectorFieldSpec::random_admissible(2, cfg.seed.wrapping_add(seed));
            for p in cone_perimeter_stability(&half, &x, s, &cfg.t_list)? {
                rows.push_str(&format!("{seed},{:.16e},{:.16e},{:.16e}\n", p.t, p.q, p.error_bar));
                worst = worst.min(p.q + p.error_bar);
            }
        }
        sink.write("half_plane_quotients.csv", &rows)?;
        report.push(Check::at_least(12, "half_plane_q_plus_bar_min", worst, 0.0));
    }
    if cfg.wants("translation") {
        let x = VectorFieldSpec::bumped_constant(vec![1.0, 0.0], 0.1, 0.9);
        let lip = x.lipschitz_bound();
        let ts: Vec<f64> = cfg.t_list.iter().map(|t| t / lip).collect();
        let mut rows = String::from("t,q,error_bar\n");
        let mut excess = 0.0f64;
        for p in cone_perimeter_stability(&half, &x, s, &ts)? {
            rows.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.t, p.q, p.error_bar));
            excess = excess.max(p.q.abs() - p.error_bar);
        }
        sink.write("translation_quotients.csv", &rows)?;
        report.push(Check::at_most(12, "translation_q_excess", excess, 0.0));
    }
    if cfg.wants("cross") {
        let cross = IndicatorSet::from_fn(&g, |x| x[0] * x[1] > 0.0);
        let x = VectorFieldSpec::random_admissible(2, cfg.seed);
        let t = cfg.t_list.iter().copied().fold(f64::INFINITY, f64::min);
        let mut rows = String::from("s,t,q,error_bar\n");
        for &sc in &cfg.s_list {
            for p in cone_perimeter_stability(&cross, &x, sc, &[t])? {
                rows.push_str(&format!("{sc},{:.16e},{:.16e},{:.16e}\n", p.t, p.q, p.error_bar));
                report.push(Check::recorded(12, &format!("cross_cone_q_s{sc}"), p.q));
            }
        }
        sink.write("cross_cone_sweep.csv", &rows)?;
    }
    Ok(())
}
