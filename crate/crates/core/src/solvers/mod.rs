//! PDHG and SPDHG iteration engines.

mod problem;
mod run;
mod state;
mod steps;

use std::fmt;
use std::str::FromStr;

pub use problem::{DualBlock, SaddleProblem};
pub use run::{
    gamma_search, iterations_per_epoch, run, ConvergenceRecord, GammaRun, GammaSearch, RunConfig,
    RunOutput, RunTarget, DIVERGENCE_FACTOR,
};
pub use state::{pdhg_step, spdhg_step, spdhg_step_with_block, SolverState};
pub use steps::{compute_step_sizes, validate_step_sizes, StepSizes, StepViolation};

/// Step-size ratio grid `10⁻⁵, 10⁻⁴, …, 10⁵`.
pub fn default_gamma_grid() -> Vec<f64> {
    (-5..=5).map(|e| 10f64.powi(e)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Pdhg,
    Spdhg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pdhg => "pdhg",
            Algorithm::Spdhg => "spdhg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pdhg" => Ok(Algorithm::Pdhg),
            "spdhg" => Ok(Algorithm::Spdhg),
            other => Err(crate::Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}
