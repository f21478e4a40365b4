use std::path::Path;
use std::process::Command;

use fracac::{run, Experiment, RunConfig, RunReport};

fn fracac(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fracac")).args(args).output().expect("spawn fracac")
}

fn small_energy(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::defaults(Experiment::Energy);
    cfg.set("samples", "3").unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn malformed_spacing_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fracac(&["layer", "--h", "0.3", "--box_radius", "1", "--output_dir", out]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("h"));
    let o = fracac(&["layer", "--h", "abc", "--output_dir", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = fracac(&["layer", "--no_such_key", "1", "--output_dir", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn passing_run_exits_zero_and_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fracac(&["energy", "--samples", "3", "--output_dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS] C2") && stdout.contains("[PASS] C3"));
    for f in ["report.json", "checks.csv", "config.csv", "timing.json"] {
        assert!(dir.path().join("energy").join(f).exists(), "{f} missing");
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# energy settings\nsamples = 2\ns = 0.7\n").unwrap();
    let out = dir.path().join("o");
    let o = fracac(&[
        "energy",
        "--config",
        file.to_str().unwrap(),
        "--s=0.6",
        "--output_dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: RunReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("energy/report.json")).unwrap()).unwrap();
    assert_eq!(report.config["samples"], "2");
    assert_eq!(report.config["s"], "0.6");
}

#[test]
fn reports_merge_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    run(&small_energy(dir.path())).unwrap();
    let mut cfg = RunConfig::defaults(Experiment::Density);
    cfg.output_dir = dir.path().to_path_buf();
    run(&cfg).unwrap();
    let a = dir.path().join("energy/report.json");
    let b = dir.path().join("density/report.json");
    let merged = dir.path().join("merged.json");
    let o = fracac(&["report", a.to_str().unwrap(), b.to_str().unwrap(), "--out", merged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m: RunReport = serde_json::from_str(&std::fs::read_to_string(&merged).unwrap()).unwrap();
    assert_eq!(m.experiments, vec!["energy", "density"]);
    assert!(m.pass);
    assert!(m.config.contains_key("energy.samples") && m.config.contains_key("density.h"));
    assert!(m.criteria().contains(&2) && m.criteria().contains(&11));

    let o = fracac(&["report", a.to_str().unwrap(), a.to_str().unwrap(), "--out", merged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_report_number_appears_in_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&small_energy(dir.path())).unwrap();
    let base = dir.path().join("energy");
    let mut csv_numbers = Vec::new();
    let mut csv_text = String::new();
    for entry in std::fs::read_dir(&base).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            let text = std::fs::read_to_string(&p).unwrap();
            for cell in text.split([',', '\n', '"']) {
                if let Ok(v) = cell.trim().parse::<f64>() {
                    csv_numbers.push(v);
                }
            }
            csv_text.push_str(&text);
        }
    }
    for c in &report.checks {
        for v in [c.value, c.bound, c.tolerance] {
            assert!(csv_numbers.contains(&v), "{} value {v} not in any CSV", c.name);
        }
    }
    for (k, v) in &report.config {
        assert!(csv_text.contains(&format!("{k},\"{v}\"")), "config {k} not echoed");
    }
    assert!(report.checks.iter().all(|c| c.criterion >= 1 && c.criterion <= 15));
}
