use std::fs::{self, File};

use anyhow::{bail, Context, Result};
use kslab::StopReason;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::{Options, Setup, EXIT_OK};

/// One grid point of a sweep. Numeric fields are empty when the point failed
/// before producing them.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub pq: Option<f64>,
    pub e_x0: Option<f64>,
    pub verdict: Option<String>,
    pub t_star: Option<f64>,
    pub t_b: Option<f64>,
    pub error: Option<String>,
}

/// Cartesian product of the axis values, first axis outermost.
pub fn sweep_points(config: &RunConfig) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in &config.sweep {
        let values = axis.values();
        points = points
            .iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    points
}

fn evaluate(config: &RunConfig, values: &[f64], opts: &Options) -> SweepRow {
    let mut row = SweepRow {
        values: values.to_vec(),
        pq: None,
        e_x0: None,
        verdict: None,
        t_star: None,
        t_b: None,
        error: None,
    };
    let mut point = config.clone();
    for (axis, v) in config.sweep.iter().zip(values) {
        match point.with_value(&axis.key, *v) {
            Ok(next) => point = next,
            Err(e) => {
                row.error = Some(format!("{e:#}"));
                return row;
            }
        }
    }
    let setup = match Setup::new(&point, opts.flip_drift) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(format!("{e:#}"));
            return row;
        }
    };
    let mut errors = Vec::new();
    match setup.certificate(&point) {
        Ok(c) => {
            row.pq = Some(c.pq_val);
            row.e_x0 = Some(c.e_at_x0);
            row.verdict = Some(c.verdict.as_str().to_string());
            row.t_star = c.t_star;
        }
        Err(e) => errors.push(format!("certify: {e}")),
    }
    if config.sweep_simulate {
        match setup.run() {
            Ok(r) if r.outcome.reason == StopReason::BlowupDetected => {
                row.t_b = Some(r.outcome.t_final)
            }
            Ok(r) if r.outcome.reason == StopReason::DtUnderflow => errors.push(format!(
                "simulate: dt-underflow at t = {}",
                r.outcome.t_final
            )),
            Ok(_) => {}
            Err(e) => errors.push(format!("simulate: {e:#}")),
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Evaluates every point on a pool of `opts.jobs` threads; rows come back in
/// input order regardless of scheduling.
pub fn sweep_rows(config: &RunConfig, opts: &Options) -> Result<Vec<SweepRow>> {
    if config.sweep.is_empty() {
        bail!("sweep needs at least sweep.1.key");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()?;
    let points = sweep_points(config);
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|p| evaluate(config, p, opts))
            .collect()
    }))
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows<W: std::io::Write>(config: &RunConfig, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = config.sweep.iter().map(|a| a.key.clone()).collect();
    header.extend(["Pq", "E_X0", "verdict", "T_star", "t_b", "error"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut record: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        record.push(cell(row.pq));
        record.push(cell(row.e_x0));
        record.push(row.verdict.clone().unwrap_or_default());
        record.push(cell(row.t_star));
        record.push(cell(row.t_b));
        record.push(row.error.clone().unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sweep.csv` into `opts.out`. Per-point failures end up in the
/// `error` column and do not change the exit code.
pub fn cmd_sweep(config: &RunConfig, opts: &Options) -> Result<i32> {
    let rows = sweep_rows(config, opts)?;
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let path = opts.out.join("sweep.csv");
    write_rows(
        config,
        &rows,
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    )?;
    if !opts.quiet {
        let failed = rows.iter().filter(|r| r.error.is_some()).count();
        eprintln!(
            "sweep: {} points ({failed} with errors) -> {}",
            rows.len(),
            path.display()
        );
    }
    Ok(EXIT_OK)
}
