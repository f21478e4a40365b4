//! Plain-text `key = value` run configuration with per-experiment defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fracac_core::{PotentialKind, Scheme};

/// Invalid configuration; `field` names the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field '{}': {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    Layer,
    OpCheck,
    Energy,
    Scaling,
    Monotonicity,
    Stability,
    Density,
    Blowdown,
    Cone,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Layer,
        Experiment::OpCheck,
        Experiment::Energy,
        Experiment::Scaling,
        Experiment::Monotonicity,
        Experiment::Stability,
        Experiment::Density,
        Experiment::Blowdown,
        Experiment::Cone,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Layer => "layer",
            Experiment::OpCheck => "op-check",
            Experiment::Energy => "energy",
            Experiment::Scaling => "scaling",
            Experiment::Monotonicity => "monotonicity",
            Experiment::Stability => "stability",
            Experiment::Density => "density",
            Experiment::Blowdown => "blowdown",
            Experiment::Cone => "cone",
        }
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| ConfigError::new("experiment", format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub s: f64,
    pub h: f64,
    pub box_radius: f64,
    pub potential: PotentialKind,
    /// `None` selects the unit-width value for `(n, s)`.
    pub epsilon: Option<f64>,
    pub epsilon_list: Vec<f64>,
    pub radii: Vec<f64>,
    pub scheme: Scheme,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub r0: f64,
    pub s_list: Vec<f64>,
    pub t_list: Vec<f64>,
    /// Size of a seeded field family (random vector fields, random pairs, ...).
    pub samples: usize,
    /// Sub-experiments to run; empty runs all of them.
    pub parts: Vec<String>,
}

const KEYS: [&str; 19] = [
    "experiment",
    "n",
    "s",
    "h",
    "box_radius",
    "potential",
    "epsilon",
    "epsilon_list",
    "radii",
    "scheme",
    "tol",
    "max_iterations",
    "seed",
    "output_dir",
    "r0",
    "s_list",
    "t_list",
    "samples",
    "parts",
];

impl RunConfig {
    /// Defaults reproducing the acceptance settings of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = RunConfig {
            experiment,
            n: 1,
            s: 0.5,
            h: 0.1,
            box_radius: 40.0,
            potential: PotentialKind::Quartic,
            epsilon: None,
            epsilon_list: Vec::new(),
            radii: Vec::new(),
            scheme: Scheme::Newton,
            tol: 1e-10,
            max_iterations: 20_000,
            seed: 1,
            output_dir: PathBuf::from("out"),
            r0: 2.0,
            s_list: Vec::new(),
            t_list: Vec::new(),
            samples: 20,
            parts: Vec::new(),
        };
        match experiment {
            Experiment::Layer => c.h = 0.05,
            Experiment::OpCheck => {
                c.box_radius = std::f64::consts::PI;
                c.h = std::f64::consts::PI / 128.0;
                c.s_list = vec![0.3, 0.5, 0.7, 0.9];
            }
            Experiment::Energy => {
                c.n = 2;
                c.box_radius = 2.0;
                c.h = 0.125;
                c.s = 0.4;
            }
            Experiment::Scaling => {
                c.n = 2;
                c.box_radius = 16.0;
                c.h = 0.125;
                c.radii = vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0];
                c.epsilon_list = vec![0.1, 0.05, 0.025, 0.0125, 0.00625];
                c.s_list = vec![0.4, 0.8];
                c.samples = 50;
            }
            Experiment::Monotonicity => {
                c.radii = vec![2.0, 4.0, 6.0, 8.0, 12.0, 16.0];
            }
            Experiment::Stability => {
                c.max_iterations = 3000;
                c.box_radius = 128.0;
            }
            Experiment::Density => {
                c.radii = vec![8.0, 12.0, 16.0];
            }
            Experiment::Blowdown => {
                c.n = 2;
                c.box_radius = 32.0;
                c.h = 0.125;
                c.radii = vec![2.0, 4.0, 8.0, 16.0];
            }
            Experiment::Cone => {
                c.n = 2;
                c.box_radius = 1.5;
                c.h = 1.0 / 64.0;
                c.t_list = vec![0.8, 0.4];
                c.s_list = vec![0.1, 0.3, 0.5, 0.7, 0.9];
            }
        }
        c
    }

    /// Defaults for `experiment`, then the file (if any), then `overrides` in order.
    pub fn load(experiment: Experiment, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
            pairs.extend(parse_pairs(&text)?);
        }
        pairs.extend(overrides.iter().cloned());
        let mut c = RunConfig::defaults(experiment);
        for (k, v) in &pairs {
            c.set(k, v)?;
        }
        if c.experiment != experiment {
            return Err(ConfigError::new(
                "experiment",
                format!("file names '{}' but the subcommand is '{}'", c.experiment.id(), experiment.id()),
            ));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "experiment" => self.experiment = v.parse()?,
            "n" => self.n = num(key, v)?,
            "s" => self.s = num(key, v)?,
            "h" => self.h = num(key, v)?,
            "box_radius" => self.box_radius = num(key, v)?,
            "potential" => {
                self.potential = match v {
                    "quartic" => PotentialKind::Quartic,
                    "peierls_nabarro" => PotentialKind::PeierlsNabarro,
                    other => return Err(ConfigError::new(key, format!("unknown potential '{other}'"))),
                }
            }
            "epsilon" => self.epsilon = if v == "auto" { None } else { Some(num(key, v)?) },
            "epsilon_list" => self.epsilon_list = list(key, v)?,
            "radii" => self.radii = list(key, v)?,
            "scheme" => self.scheme = v.parse().map_err(|e| ConfigError::new(key, format!("{e}")))?,
            "tol" => self.tol = num(key, v)?,
            "max_iterations" => self.max_iterations = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "r0" => self.r0 = num(key, v)?,
            "s_list" => self.s_list = list(key, v)?,
            "t_list" => self.t_list = list(key, v)?,
            "samples" => self.samples = num(key, v)?,
            "parts" => self.parts = v.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect(),
            other => return Err(ConfigError::new(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=3).contains(&self.n) {
            return Err(ConfigError::new("n", "dimension must be 1, 2 or 3"));
        }
        if !(self.s > 0.0 && self.s <= 2.0) {
            return Err(ConfigError::new("s", "order must lie in (0, 2]"));
        }
        if !(self.h > 0.0) {
            return Err(ConfigError::new("h", "spacing must be positive"));
        }
        if !(self.box_radius > 0.0) {
            return Err(ConfigError::new("box_radius", "must be positive"));
        }
        let ratio = self.box_radius / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(ConfigError::new("h", format!("h = {} does not divide box_radius = {}", self.h, self.box_radius)));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(ConfigError::new("epsilon", "must be positive"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::new("tol", "must be positive"));
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(ConfigError::new("radii", "radii must be positive"));
        }
        if self.epsilon_list.iter().any(|e| !(*e > 0.0)) {
            return Err(ConfigError::new("epsilon_list", "values must be positive"));
        }
        if self.s_list.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(ConfigError::new("s_list", "values must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn wants(&self, part: &str) -> bool {
        self.parts.is_empty() || self.parts.iter().any(|p| p == part)
    }

    /// Effective configuration as ordered `key → value` strings.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        for key in KEYS {
            let value = match key {
                "experiment" => self.experiment.id().to_string(),
                "n" => self.n.to_string(),
                "s" => format!("{}", self.s),
                "h" => format!("{}", self.h),
                "box_radius" => format!("{}", self.box_radius),
                "potential" => match self.potential {
                    PotentialKind::Quartic => "quartic".into(),
                    PotentialKind::PeierlsNabarro => "peierls_nabarro".into(),
                    PotentialKind::Custom => "custom".into(),
                },
                "epsilon" => self.epsilon.map_or("auto".into(), |e| format!("{e}")),
                "epsilon_list" => join(&self.epsilon_list),
                "radii" => join(&self.radii),
                "scheme" => serde_json::to_value(self.scheme)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                "tol" => format!("{:e}", self.tol),
                "max_iterations" => self.max_iterations.to_string(),
                "seed" => self.seed.to_string(),
                "output_dir" => self.output_dir.display().to_string(),
                "r0" => format!("{}", self.r0),
                "s_list" => join(&self.s_list),
                "t_list" => join(&self.t_list),
                "samples" => self.samples.to_string(),
                _ => self.parts.join(","),
            };
            m.insert(key.to_string(), value);
        }
        m
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::new(key, format!("cannot parse '{v}'")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| num(key, p.trim())).collect()
}

/// `key = value` or `key value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => match line.split_once(char::is_whitespace) {
                Some((a, b)) => (a.trim(), b.trim()),
                None => return Err(ConfigError::new(line, format!("line {}: missing value", k + 1))),
            },
        };
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// `--key value` pairs; `--key=value` is accepted too.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            return Err(ConfigError::new(a, "expected a --key flag"));
        };
        if let Some((k, v)) = flag.split_once('=') {
            out.push((k.replace('-', "_"), v.to_string()));
        } else {
            let v = it.next().ok_or_else(|| ConfigError::new(flag, "flag without a value"))?;
            out.push((flag.replace('-', "_"), v.clone()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let pairs = parse_pairs("# layer run\ns = 0.3\nbox_radius 20\nradii = 2, 4,8\n").unwrap();
        let mut c = RunConfig::defaults(Experiment::Layer);
        for (k, v) in &pairs {
            c.set(k, v).unwrap();
        }
        assert_eq!((c.s, c.box_radius), (0.3, 20.0));
        assert_eq!(c.radii, vec![2.0, 4.0, 8.0]);
        let o = parse_overrides(&["--s".into(), "0.7".into(), "--box-radius=30".into()]).unwrap();
        let c = RunConfig::load(Experiment::Layer, None, &o).unwrap();
        assert_eq!((c.s, c.box_radius), (0.7, 30.0));
    }

    #[test]
    fn malformed_values_name_the_field() {
        let e = RunConfig::load(Experiment::Layer, None, &[("h".into(), "0.07".into())]).unwrap_err();
        assert_eq!(e.field, "h");
        let e = RunConfig::load(Experiment::Layer, None, &[("bogus".into(), "1".into())]).unwrap_err();
        assert_eq!(e.field, "bogus");
        let e = RunConfig::load(Experiment::Layer, None, &[("s".into(), "x".into())]).unwrap_err();
        assert_eq!(e.field, "s");
        assert!(parse_overrides(&["s".into()]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::defaults(Experiment::Scaling);
        let mut d = RunConfig::defaults(Experiment::Scaling);
        for (k, v) in c.echo() {
            d.set(&k, &v).unwrap();
        }
        assert_eq!(c, d);
    }
}
