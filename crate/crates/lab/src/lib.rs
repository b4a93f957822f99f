//! Batch experiments over the `qseal` simulator: TOML experiment specs,
//! parallel seeded runs, CSV reports with a metadata sidecar, session files
//! and the single-seal demo.

pub mod config;
pub mod demo;
pub mod experiment;
pub mod formats;
pub mod report;

use std::path::{Path, PathBuf};

pub use config::{ExperimentSpec, Kind, Plan, SpecError, StrategyName};
pub use experiment::{run_experiment, ExperimentError};
pub use report::{Report, ReportRow};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QSEAL_OUT_DIR";

/// Where a report goes when no path was given: `<dir>/<kind>-<strategy>-seed<seed>.csv`.
pub fn default_output(dir: Option<&Path>, plan: &Plan) -> PathBuf {
    let dir = dir.map_or_else(|| PathBuf::from("qseal-out"), Path::to_path_buf);
    dir.join(format!(
        "{}-{}-seed{}.csv",
        plan.spec.kind,
        plan.strategy.as_str(),
        plan.spec.seed
    ))
}
