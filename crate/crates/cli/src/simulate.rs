use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use kslab::criterion::Certificate;
use kslab::diagnostics::SubsolutionReport;
use kslab::{DiagnosticsRecord, Grid, RunOutcome, State, StopReason};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Options, Setup, EXIT_BLOWUP, EXIT_ERROR, EXIT_OK};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub outcome: RunOutcome,
    /// Detection time, present only for blow-up.
    pub t_b: Option<f64>,
    #[serde(rename = "final")]
    pub final_record: Option<DiagnosticsRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsolution: Option<SubsolutionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_error: Option<String>,
    #[serde(rename = "T_star", skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_b_within_t_star: Option<bool>,
}

pub fn write_state_csv(path: &Path, state: &State, grid: &Grid) -> Result<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "x,u,v")?;
    for (i, x) in grid.centers().iter().enumerate() {
        writeln!(w, "{x},{},{}", state.u[i], state.v[i])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the solver and writes the diagnostics CSV, the terminal state and a
/// JSON summary into `opts.out`.
pub fn cmd_simulate(config: &RunConfig, opts: &Options) -> Result<i32> {
    let setup = Setup::new(config, opts.flip_drift)?;
    let certificate = config.certify.enabled.then(|| setup.certificate(config));
    let result = setup.run()?;

    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let diag_path = opts.out.join(&config.diagnostics.csv);
    let file =
        File::create(&diag_path).with_context(|| format!("creating {}", diag_path.display()))?;
    result.series.write_csv(BufWriter::new(file))?;
    write_state_csv(
        &opts.out.join(&config.diagnostics.state_csv),
        &result.final_state,
        &setup.grid,
    )?;

    let outcome = result.outcome;
    let t_b = (outcome.reason == StopReason::BlowupDetected).then_some(outcome.t_final);
    let (certificate, certificate_error) = match certificate {
        Some(Ok(c)) => (Some(c), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, None),
    };
    let t_star = certificate.as_ref().and_then(|c| c.t_star);
    let summary = Summary {
        outcome,
        t_b,
        final_record: result.series.last().cloned(),
        subsolution: result.subsolution,
        certificate,
        certificate_error,
        t_star,
        t_b_within_t_star: t_b.zip(t_star).map(|(tb, ts)| tb <= ts),
    };
    let summary_path = opts.out.join(&config.diagnostics.summary);
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    if !opts.quiet {
        eprintln!(
            "simulate: {} at t = {} after {} steps (sup u = {:.6e})",
            outcome.reason.as_str(),
            outcome.t_final,
            outcome.steps,
            outcome.max_u
        );
    }
    Ok(match outcome.reason {
        StopReason::HorizonReached => EXIT_OK,
        StopReason::BlowupDetected => EXIT_BLOWUP,
        StopReason::DtUnderflow => {
            eprintln!(
                "error: time step fell below dt_min at t = {} without sustained growth",
                outcome.t_final
            );
            EXIT_ERROR
        }
    })
}
