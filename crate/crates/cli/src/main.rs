use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use fracac::{exit_code, parse_overrides, report_merge, run, Experiment, RunConfig, RunReport};

#[derive(Parser)]
#[command(name = "fracac", version, about = "Fractional Allen-Cahn experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the 1D layer and check monotonicity, residual and tail
    Layer(RunArgs),
    /// Spectral against quadrature operator on a band-limited periodic field
    OpCheck(RunArgs),
    /// Euler-Lagrange consistency and the max/min identity
    Energy(RunArgs),
    /// Energy exponents, potential domination, potential decay, interpolation
    Scaling(RunArgs),
    /// Extension monotonicity formula
    Monotonicity(RunArgs),
    /// Rayleigh quotients and the gradient-test inequality
    Stability(RunArgs),
    /// Density implication over the solution zoo
    Density(RunArgs),
    /// Blow-down convergence and flatness
    Blowdown(RunArgs),
    /// Perimeter identity and cone stability quotients
    Cone(RunArgs),
    /// Merge report.json files
    Report {
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "merged_report.json")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Key/value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides of configuration keys
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FRACAC_THREADS") {
        let n: usize = v.parse().map_err(|_| fracac::ConfigError::new("FRACAC_THREADS", format!("cannot parse '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let (experiment, args) = match cli.command {
        Command::Report { reports, out } => {
            let mut all = Vec::new();
            for p in &reports {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let r: RunReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                all.push(r);
            }
            let merged = report_merge(&all)?;
            for w in &merged.warnings {
                eprintln!("warning: {w}");
            }
            std::fs::write(&out, serde_json::to_string_pretty(&merged)? + "\n")?;
            println!("{} -> {}: {}", reports.len(), out.display(), if merged.pass { "pass" } else { "fail" });
            return Ok(merged.pass);
        }
        Command::Layer(a) => (Experiment::Layer, a),
        Command::OpCheck(a) => (Experiment::OpCheck, a),
        Command::Energy(a) => (Experiment::Energy, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
        Command::Monotonicity(a) => (Experiment::Monotonicity, a),
        Command::Stability(a) => (Experiment::Stability, a),
        Command::Density(a) => (Experiment::Density, a),
        Command::Blowdown(a) => (Experiment::Blowdown, a),
        Command::Cone(a) => (Experiment::Cone, a),
    };
    let overrides = parse_overrides(&args.overrides)?;
    let cfg = RunConfig::load(experiment, args.config.as_deref(), &overrides)?;
    let report = run(&cfg)?;
    for c in &report.checks {
        println!("{}", c.describe());
    }
    println!(
        "{}: {} in {:.1} s, output in {}",
        experiment.id(),
        if report.pass { "pass" } else { "fail" },
        report.wall_clock_s,
        cfg.output_dir.join(experiment.id()).display()
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
