use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCENARIO: i32 = 3;
pub const EXIT_LIFT: i32 = 4;
pub const EXIT_STABILIZABILITY: i32 = 5;
pub const EXIT_SDP_INFEASIBLE: i32 = 6;
pub const EXIT_EMPTY_PIECE: i32 = 7;
pub const EXIT_PLANNER: i32 = 8;
pub const EXIT_MONITOR: i32 = 9;
pub const EXIT_NUMERICAL: i32 = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("usage: {0}")]
    Usage(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Core(#[from] layercon::Error),
    #[error("monitor failure: {0}")]
    Monitor(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn code(&self) -> i32 {
        use layercon::Error as E;
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Scenario(_) => EXIT_SCENARIO,
            CliError::Monitor(_) => EXIT_MONITOR,
            CliError::Core(e) => match e {
                E::LiftUnsolvable { .. } => EXIT_LIFT,
                E::NotStabilizable(_) => EXIT_STABILIZABILITY,
                E::SdpInfeasible(_) => EXIT_SDP_INFEASIBLE,
                E::EmptyPlanningSet { .. } => EXIT_EMPTY_PIECE,
                E::PlannerInfeasible(_) | E::StateOutsidePlanningSet { .. } => EXIT_PLANNER,
                E::InvalidArgument(_) | E::Dimension { .. } => EXIT_SCENARIO,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}
