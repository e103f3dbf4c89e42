//! Configuration, commands and verification checks behind the `invspec`
//! binary.

use std::path::PathBuf;
use std::sync::Arc;

use invspec_core::isozaki::EtaRule;
use invspec_core::mesh::Grid;
use invspec_core::schrodinger::{sample_potential, PotentialField};
use invspec_core::spectra::{EigenOptions, TraceScheme};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

pub use config::{RouteChoice, RunConfig};
pub use report::{CheckResult, Status, VerificationReport};
pub use verify::Check;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: invspec_core::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        use invspec_core::Error as E;
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            // Unresolved probes and inadmissible potentials come from the
            // configuration, not from the numerics.
            HarnessError::Stage {
                source: E::TauCeiling { .. } | E::Inadmissible(_),
                ..
            } => EXIT_CONFIG,
            HarnessError::Stage { .. } | HarnessError::Output { .. } => EXIT_NUMERIC,
        }
    }
}

pub(crate) fn stage(name: &'static str) -> impl Fn(invspec_core::Error) -> HarnessError {
    move |source| HarnessError::Stage { stage: name, source }
}

/// A validated configuration with its grid and sampled potentials.
#[derive(Debug, Clone)]
pub struct Problem {
    pub cfg: RunConfig,
    pub grid: Arc<Grid>,
    pub q1: PotentialField,
    pub q2: PotentialField,
    pub scheme: TraceScheme,
    pub route: RouteChoice,
    pub eta: EtaRule,
    pub eigen_opts: EigenOptions,
    /// Allow probe parameters above the resolution ceiling.
    pub force: bool,
}

impl Problem {
    pub fn new(cfg: RunConfig, force: bool) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let q1 = sample_potential(&cfg.potential_spec(1)?, &grid).map_err(stage("potential1"))?;
        let q2 = sample_potential(&cfg.potential_spec(2)?, &grid).map_err(stage("potential2"))?;
        if force {
            log::warn!("probe parameters above the resolution ceiling are allowed");
        }
        Ok(Problem {
            scheme: cfg.trace_scheme()?,
            route: cfg.route()?,
            eta: cfg.eta_rule()?,
            eigen_opts: EigenOptions::with_tol(cfg.spectra.tol),
            cfg,
            grid,
            q1,
            q2,
            force,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Problem::new(RunConfig::parse(text)?, false)
    }
}
