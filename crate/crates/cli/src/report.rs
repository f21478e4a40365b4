//! Run reports: named checks tied to acceptance criteria, and report merging.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value ≤ bound`
    AtMost,
    /// `value ≥ bound`
    AtLeast,
    /// `|value − bound| ≤ tolerance`
    Near,
    /// boolean condition, `value ∈ {0, 1}`
    Holds,
    /// exploratory output, never fails
    Recorded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(criterion: u8, name: &str, value: f64, bound: f64) -> Self {
        Check::build(criterion, name, value, Relation::AtMost, bound, 0.0, value <= bound)
    }

    pub fn at_least(criterion: u8, name: &str, value: f64, bound: f64) -> Self {
        Check::build(criterion, name, value, Relation::AtLeast, bound, 0.0, value >= bound)
    }

    pub fn near(criterion: u8, name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Check::build(criterion, name, value, Relation::Near, target, tolerance, (value - target).abs() <= tolerance)
    }

    pub fn holds(criterion: u8, name: &str, ok: bool) -> Self {
        Check::build(criterion, name, if ok { 1.0 } else { 0.0 }, Relation::Holds, 1.0, 0.0, ok)
    }

    pub fn recorded(criterion: u8, name: &str, value: f64) -> Self {
        Check::build(criterion, name, value, Relation::Recorded, 0.0, 0.0, true)
    }

    fn build(criterion: u8, name: &str, value: f64, relation: Relation, bound: f64, tolerance: f64, pass: bool) -> Self {
        Check {
            criterion,
            name: name.to_string(),
            value,
            relation,
            bound,
            tolerance,
            pass: pass && value.is_finite(),
        }
    }

    pub fn describe(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => format!("{:.6e} <= {:.6e}", self.value, self.bound),
            Relation::AtLeast => format!("{:.6e} >= {:.6e}", self.value, self.bound),
            Relation::Near => format!("{:.6e} = {:.6e} ± {:.3e}", self.value, self.bound, self.tolerance),
            Relation::Holds => (if self.pass { "holds" } else { "violated" }).to_string(),
            Relation::Recorded => format!("{:.6e} (recorded)", self.value),
        };
        format!("[{}] C{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.criterion, self.name, rel)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiments: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub pass: bool,
    /// Kept out of `report.json` so reruns stay byte-identical; written to `timing.json`.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn new(experiment: &str, config: BTreeMap<String, String>) -> Self {
        RunReport {
            experiments: vec![experiment.to_string()],
            config,
            pass: true,
            ..Default::default()
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn criteria(&self) -> Vec<u8> {
        let mut c: Vec<u8> = self.checks.iter().map(|k| k.criterion).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn criterion_pass(&self, criterion: u8) -> bool {
        self.checks.iter().filter(|c| c.criterion == criterion).all(|c| c.pass)
    }

    /// `criterion,name,value,relation,bound,tolerance,pass` rows.
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("criterion,name,value,relation,bound,tolerance,pass\n");
        for c in &self.checks {
            let rel = serde_json::to_value(c.relation)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.16e},{},{:.16e},{:.16e},{}\n",
                c.criterion, c.name, c.value, rel, c.bound, c.tolerance, c.pass
            ));
        }
        out
    }
}

/// Conjunction of reports with disjoint experiment ids; config keys gain an `id.` prefix.
pub fn report_merge(reports: &[RunReport]) -> Result<RunReport, ConfigError> {
    let mut out = RunReport {
        pass: true,
        ..Default::default()
    };
    if reports.is_empty() {
        out.warnings.push("empty merge: pass holds vacuously".into());
        return Ok(out);
    }
    for r in reports {
        for id in &r.experiments {
            if out.experiments.contains(id) {
                return Err(ConfigError::new("experiment", format!("id '{id}' appears in more than one report")));
            }
            out.experiments.push(id.clone());
        }
        let prefix = r.experiments.join("+");
        for (k, v) in &r.config {
            let key = if r.experiments.len() == 1 { format!("{prefix}.{k}") } else { k.clone() };
            out.config.insert(key, v.clone());
        }
        out.checks.extend(r.checks.iter().cloned());
        out.artifacts.extend(r.artifacts.iter().cloned());
        out.warnings.extend(r.warnings.iter().cloned());
        out.pass &= r.pass;
        out.wall_clock_s += r.wall_clock_s;
    }
    Ok(out)
}
