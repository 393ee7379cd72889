//! Command implementations behind the `kslab` binary.

pub mod certify;
pub mod config;
pub mod simulate;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

use anyhow::Result;
use kslab::criterion::{certify_q_scan, Certificate};
use kslab::initial::make_initial;
use kslab::solver::run;
use kslab::{
    DiagnosticsConfig, DiffusionModel, Grid, InitialSpec, Params, RunResult, SolverConfig, State,
};

use crate::config::RunConfig;

/// Horizon reached, certificate found, or all checks passed.
pub const EXIT_OK: i32 = 0;
/// Invalid input, I/O failure, or a run stalled at `dt_min`.
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
/// `verify` found a failing check.
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub jobs: usize,
    pub quiet: bool,
    /// Reverse the drift flux. Only for mutation tests.
    pub flip_drift: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            out: PathBuf::from("."),
            jobs: 1,
            quiet: true,
            flip_drift: false,
        }
    }
}

/// Everything a run needs, built and validated from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub params: Params,
    pub model: DiffusionModel,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub spec: InitialSpec,
    pub diagnostics: DiagnosticsConfig,
}

impl Setup {
    pub fn new(config: &RunConfig, flip_drift: bool) -> Result<Self> {
        let mut solver = config.solver_config()?;
        if flip_drift {
            solver.drift_sign = -1.0;
        }
        Ok(Self {
            params: config.params,
            model: config.model()?,
            grid: config.grid(),
            solver,
            spec: config.initial_spec()?,
            diagnostics: config.diagnostics_config(),
        })
    }

    pub fn initial_state(&self) -> Result<State> {
        Ok(make_initial(&self.spec, &self.params, &self.grid)?)
    }

    pub fn run(&self) -> Result<RunResult> {
        let state = self.initial_state()?;
        Ok(run(
            &state,
            &self.params,
            &self.model,
            &self.grid,
            &self.solver,
            &self.diagnostics,
        )?)
    }

    pub fn certificate(&self, config: &RunConfig) -> kslab::Result<Certificate> {
        if config.certify.scan {
            certify_q_scan(&self.spec, &self.params, &self.model, &self.grid)
        } else {
            kslab::criterion::certify(
                &self.spec,
                &self.params,
                &self.model,
                config.certify.q,
                &self.grid,
            )
        }
    }
}
