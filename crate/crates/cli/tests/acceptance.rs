//! Acceptance suite: one test and one PASS/FAIL line per criterion, using the
//! default configuration of each experiment.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use fracac::{run, Experiment, RunConfig, RunReport};

type Cache = Mutex<HashMap<&'static str, Arc<OnceLock<RunReport>>>>;

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().expect("temp dir")).path()
}

fn report(exp: Experiment) -> RunReport {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry(exp.id()).or_default().clone()
    };
    slot.get_or_init(|| {
        let mut cfg = RunConfig::defaults(exp);
        cfg.output_dir = scratch().join("acceptance");
        run(&cfg).unwrap_or_else(|e| panic!("{} failed: {e:#}", exp.id()))
    })
    .clone()
}

fn verdict(criterion: u8, title: &str, exp: Experiment, budget_s: f64) {
    let r = report(exp);
    let checks: Vec<_> = r.checks.iter().filter(|c| c.criterion == criterion).collect();
    assert!(!checks.is_empty(), "no checks recorded for C{criterion}");
    for c in &checks {
        println!("    {}", c.describe());
    }
    let in_time = r.wall_clock_s <= budget_s;
    let pass = r.criterion_pass(criterion) && in_time;
    let _ = writeln!(
        std::io::stderr(),
        "[{}] C{criterion} {title} ({} checks, {:.1} s of {budget_s} s)",
        if pass { "PASS" } else { "FAIL" },
        checks.len(),
        r.wall_clock_s
    );
    assert!(in_time, "C{criterion} over its runtime budget");
    assert!(pass, "C{criterion} {title} failed");
}

#[test]
fn c01_operator_oracle_equivalence() {
    verdict(1, "operator oracle equivalence", Experiment::OpCheck, 10.0);
}

#[test]
fn c02_euler_lagrange_consistency() {
    verdict(2, "Euler-Lagrange consistency", Experiment::Energy, 30.0);
}

#[test]
fn c03_algebraic_identity() {
    verdict(3, "max/min algebraic identity", Experiment::Energy, 5.0);
}

#[test]
fn c04_layer_solve() {
    verdict(4, "layer solve", Experiment::Layer, 120.0);
}

#[test]
fn c05_layer_stability() {
    verdict(5, "layer stability", Experiment::Stability, 120.0);
}

#[test]
fn c06_monotonicity() {
    verdict(6, "extension monotonicity", Experiment::Monotonicity, 180.0);
}

#[test]
fn c07_scaling_exponents() {
    verdict(7, "scaling exponents", Experiment::Scaling, 600.0);
}

#[test]
fn c08_potential_domination() {
    verdict(8, "potential domination", Experiment::Scaling, 300.0);
}

#[test]
fn c09_potential_decay() {
    verdict(9, "potential decay rate", Experiment::Scaling, 600.0);
}

#[test]
fn c10_blowdown() {
    verdict(10, "blow-down", Experiment::Blowdown, 600.0);
}

#[test]
fn c11_density_implication() {
    verdict(11, "density implication", Experiment::Density, 120.0);
}

#[test]
fn c12_perimeter_and_cones() {
    verdict(12, "perimeter identity and cone stability", Experiment::Cone, 900.0);
}

#[test]
fn c13_gradient_test() {
    verdict(13, "gradient-test inequality", Experiment::Stability, 300.0);
}

#[test]
fn c14_interpolation() {
    verdict(14, "interpolation inequality", Experiment::Scaling, 300.0);
}

fn outputs(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "timing.json") {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn c15_determinism() {
    let start = std::time::Instant::now();
    let mut trees = Vec::new();
    let root = scratch().join("determinism");
    for _ in 0..2 {
        let _ = fs::remove_dir_all(&root);
        for (exp, overrides) in [
            (Experiment::Energy, vec![("samples", "5")]),
            (Experiment::Layer, vec![("box_radius", "10"), ("h", "0.1")]),
            (Experiment::Blowdown, vec![]),
            (Experiment::Density, vec![]),
        ] {
            let mut cfg = RunConfig::defaults(exp);
            for (k, v) in overrides {
                cfg.set(k, v).unwrap();
            }
            cfg.output_dir = root.clone();
            run(&cfg).unwrap();
        }
        trees.push(outputs(&root));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let differing: Vec<_> = trees[0]
        .iter()
        .zip(&trees[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    let pass = trees[0].len() == trees[1].len() && differing.is_empty() && elapsed <= 60.0;
    let _ = writeln!(
        std::io::stderr(),
        "[{}] C15 determinism ({} files compared, {} differ, {elapsed:.1} s of 60 s)",
        if pass { "PASS" } else { "FAIL" },
        trees[0].len(),
        differing.len()
    );
    assert!(pass, "outputs differ on rerun: {differing:?}");
}
