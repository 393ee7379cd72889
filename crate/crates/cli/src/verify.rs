use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};
use kslab::{StopReason, VSolver};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Options, Setup, EXIT_CHECK_FAILED, EXIT_OK};

const MONOTONE_TOL: f64 = 1e-6;
const LOWER_BOUND_TOL: f64 = 1e-8;
const DISSIPATION_TOL: f64 = 1e-4;
const MIN_VIRIAL_ORDER: f64 = 1.0;
/// Residuals below this (relative to `1 + |rhs|`) count as exact.
const VIRIAL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VirialStudy {
    pub q: f64,
    pub ns: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Pairwise orders between consecutive grids.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log residual` against `log dx`.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub virial: Option<VirialStudy>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{}: {} ({})",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
        }
        s
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn virial_study(
    config: &RunConfig,
    opts: &Options,
    q_index: usize,
) -> Result<(VirialStudy, Vec<Check>)> {
    let mut residuals = Vec::new();
    let mut scale: f64 = 1.0;
    let mut stalled = Vec::new();
    for &n in &config.verify.ns {
        let mut c = config.with_value("grid.n", n as f64)?;
        let dt = config.verify.dt_factor / (n * n) as f64;
        c.solver.t_end = config.verify.t_end;
        c.solver.dt_max = dt;
        c.solver.dt_init = dt;
        c.solver.dt_min = c.solver.dt_min.min(0.5 * dt);
        c.solver.v_solver = Some(if c.params.eps > 0.0 {
            VSolver::Explicit
        } else {
            VSolver::Elliptic
        });
        c.diagnostics.output_stride = usize::MAX;
        c.diagnostics.track_subsolution = false;
        let r = Setup::new(&c, opts.flip_drift)?.run()?;
        if r.outcome.reason != StopReason::HorizonReached {
            stalled.push(format!("n = {n}: {}", r.outcome.reason.as_str()));
        }
        let last = r.series.last().context("run produced no diagnostics")?;
        scale = scale.max(1.0 + last.virial_rhs[q_index].abs());
        residuals.push(last.virial_residual(q_index).abs());
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let exact = residuals.iter().all(|r| *r <= VIRIAL_FLOOR * scale);
    let order = (!exact && residuals.iter().all(|r| *r > 0.0)).then(|| {
        let log_dx: Vec<f64> = config.verify.ns.iter().map(|&n| -(n as f64).ln()).collect();
        let log_res: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
        least_squares_slope(&log_dx, &log_res)
    });
    let q = config.diagnostics.qs[q_index];
    let mut checks = vec![check(
        "virial-refinement",
        stalled.is_empty() && (exact || order.is_some_and(|o| o >= MIN_VIRIAL_ORDER)),
        if !stalled.is_empty() {
            format!(
                "runs did not reach t = {}: {}",
                config.verify.t_end,
                stalled.join(", ")
            )
        } else if exact {
            format!("q = {q}: all residuals below {:.1e}", VIRIAL_FLOOR * scale)
        } else {
            format!(
                "q = {q}: residuals [{}], order {:.3} (need >= {MIN_VIRIAL_ORDER})",
                residuals
                    .iter()
                    .map(|r| format!("{r:.3e}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                order.unwrap_or(f64::NAN)
            )
        },
    )];
    if config.verify.ns.len() < 2 {
        checks[0].passed = false;
        checks[0].detail = "verify.ns needs at least two grids".into();
    }
    Ok((
        VirialStudy {
            q,
            ns: config.verify.ns.clone(),
            residuals,
            orders,
            order,
        },
        checks,
    ))
}

/// Runs the configured problem with subsolution tracking plus a virial
/// refinement study.
pub fn run_checks(config: &RunConfig, opts: &Options) -> Result<Report> {
    let mut main = config.clone();
    main.diagnostics.track_subsolution = true;
    let setup = Setup::new(&main, opts.flip_drift)?;
    let result = setup.run()?;
    let p = &setup.params;
    // with eps = 0 the first record still carries the prescribed v0
    let start = if p.eps == 0.0 {
        1.min(result.series.records.len().saturating_sub(1))
    } else {
        0
    };
    let records = &result.series.records[start..];
    let mut checks = Vec::new();

    let worst = records
        .windows(2)
        .map(|w| {
            (
                w[1].t,
                (w[1].liapunov - w[0].liapunov) / (1.0 + w[0].liapunov.abs()),
            )
        })
        .fold(
            (0.0, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    checks.push(check(
        "liapunov-monotone",
        worst.1 <= MONOTONE_TOL,
        if records.len() < 2 {
            "fewer than two records".into()
        } else {
            format!(
                "largest relative increase {:.3e} at t = {}",
                worst.1, worst.0
            )
        },
    ));

    let floor = -p.mass * p.mass / (2.0 * p.d);
    let min_l = records
        .iter()
        .map(|r| r.liapunov)
        .fold(f64::INFINITY, f64::min);
    checks.push(check(
        "liapunov-lower-bound",
        min_l >= floor - LOWER_BOUND_TOL,
        format!("min L = {min_l:.6e}, bound {floor:.6e}"),
    ));

    let (l0, d0) = records
        .first()
        .map(|r| (r.liapunov, r.diss_cum))
        .unwrap_or((0.0, 0.0));
    let excess = records
        .iter()
        .map(|r| r.liapunov + (r.diss_cum - d0) - l0)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = DISSIPATION_TOL * (1.0 + l0.abs());
    checks.push(check(
        "dissipation-inequality",
        excess <= tol,
        format!("max of L(t) + int eps|v_t|^2 - L(0) = {excess:.3e}, tolerance {tol:.1e}"),
    ));

    let (study, virial_checks) = virial_study(config, opts, 0)?;
    checks.extend(virial_checks);

    match result.subsolution {
        Some(s) => checks.push(check(
            "subsolution",
            s.check().is_ok(),
            format!(
                "min gap {:.3e} over {} checks, max |h_x| {:.6} vs bound {:.6}",
                s.min_gap, s.checks, s.max_grad_h, s.grad_bound
            ),
        )),
        None => checks.push(check(
            "subsolution",
            false,
            "tracker produced no report".into(),
        )),
    }
    Ok(Report {
        checks,
        virial: Some(study),
    })
}

/// Writes `verify.txt` and `verify.json`; exits nonzero naming the failed
/// checks.
pub fn cmd_verify(config: &RunConfig, opts: &Options) -> Result<i32> {
    let report = run_checks(config, opts)?;
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let text = report.to_text();
    fs::write(opts.out.join("verify.txt"), &text)?;
    fs::write(
        opts.out.join("verify.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    if !opts.quiet {
        print!("{text}");
    }
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        eprintln!("verify: failed checks: {}", report.failed().join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}
