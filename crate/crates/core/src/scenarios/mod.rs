//! Scenario configs, the built-in registry, experiment orchestration, and
//! machine-readable reports.
//!
//! Configs and reports are JSON; sweep and ABL tables are also available as
//! CSV. Complex numbers serialize as `[re, im]` and matrices as row-major
//! arrays of rows.

mod config;
mod registry;
mod report;
mod run;

use std::fmt;

use thiserror::Error;

pub use config::{
    emit_config, load_config, ClassicalConfig, ClassicalFilter, ClassicalObservable, CurrentConfig,
    LoadedConfig, Mode, OutputFormat, PointerConfig, PostSpec, ProjectorSet, ScenarioConfig,
    Violation,
};
pub use registry::{
    preset, preset_names, presets, three_box_post, three_box_pre, ThreeBoxMode, THREE_BOX_SWEEP,
};
pub use report::{
    ids, Assertion, CurrentReadout, ProjectiveRecord, Report, SlopeFit, SweepFits, SweepRecord,
    WeakValueEntry,
};
pub use run::{run_scenario, run_three_box, sweep_coupling};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration:\n{}", ViolationList(.0))]
    Invalid(Vec<Violation>),

    // the cause is part of the message, not a chained source, so that
    // `{:#}` printing does not repeat it
    #[error("scenario '{scenario}'{}: {cause}", AtCoupling(*.g))]
    Run {
        scenario: String,
        g: Option<f64>,
        cause: crate::Error,
    },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("report serialization failed: {0}")]
    Output(String),
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.0 {
            writeln!(f, "  {}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

struct AtCoupling(Option<f64>);

impl fmt::Display for AtCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(g) => write!(f, " at g = {g}"),
            None => Ok(()),
        }
    }
}
