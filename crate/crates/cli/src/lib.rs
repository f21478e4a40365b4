//! Configuration, experiment pipelines and report emission for the `fracac` runner.

pub mod config;
pub mod output;
pub mod pipelines;
pub mod report;

pub use config::{parse_overrides, parse_pairs, ConfigError, Experiment, RunConfig};
pub use pipelines::run;
pub use report::{report_merge, Check, Relation, RunReport};

/// Exit status for a failed run: 2 for configuration errors, 3 for numerical failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<fracac_core::LabError>() {
        Some(fracac_core::LabError::Config(_) | fracac_core::LabError::Parse(_)) => 2,
        _ => 3,
    }
}
