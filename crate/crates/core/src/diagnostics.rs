//! Functionals evaluated along trajectories: the Liapunov functional and
//! its dissipation, the moments `m_q` of the cumulative density, the
//! right-hand side of the virial identity for `dm_q/dt`, and the
//! subsolution barrier for the cumulative chemoattractant.

use std::io::Write;

use serde::Serialize;

use crate::diffusion::{DiffusionModel, EntropyTable};
use crate::error::{Error, Result};
use crate::model::{Grid, Params, State};
use crate::quadrature::{gauss_legendre8, mean_power_of_linear};
use crate::solver::{solve_tridiagonal, v_rhs, SolverConfig, VSolver};

/// Node values of `U(x) = int_0^x u` and `V(x) = int_0^x v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Exact node values of the cumulative functions for cell averages.
pub fn cumulative(state: &State, grid: &Grid) -> CumulativeState {
    let dx = grid.dx();
    let running = |cells: &[f64]| {
        let mut out = Vec::with_capacity(cells.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &c in cells {
            acc += c * dx;
            out.push(acc);
        }
        out
    };
    CumulativeState {
        u: running(&state.u),
        v: running(&state.v),
    }
}

/// `L(u, v) = int b(u) - u v + D/2 |v_x|^2 + gamma/2 v^2`.
///
/// Cell terms use the midpoint rule; `|v_x|^2` is summed over interior
/// faces, the wall faces contributing zero.
pub fn liapunov(state: &State, table: &EntropyTable, params: &Params, grid: &Grid) -> f64 {
    let dx = grid.dx();
    let cells: f64 = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(&u, &v)| table.b(u) - u * v + 0.5 * params.gamma * v * v)
        .sum::<f64>()
        * dx;
    cells + 0.5 * params.d * gradient_energy(&state.v, grid)
}

/// `sum over interior faces of ((v_{i+1} - v_i)/dx)^2 dx`.
fn gradient_energy(v: &[f64], grid: &Grid) -> f64 {
    let dx = grid.dx();
    v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / dx
}

/// `eps ||v_t||_2^2` with `v_t` taken from the discrete `v` equation.
pub fn dissipation_rate(state: &State, params: &Params, grid: &Grid) -> Result<f64> {
    let dtv = v_rhs(state, params, grid)?;
    Ok(params.eps * dtv.iter().map(|x| x * x).sum::<f64>() * grid.dx())
}

/// `m_q = ||U||_q^q / q`, integrating `U^q` exactly on each cell where `U`
/// is linear.
pub fn mq(cum: &CumulativeState, q: f64, grid: &Grid) -> f64 {
    let dx = grid.dx();
    cum.u
        .windows(2)
        .map(|w| mean_power_of_linear(w[0].max(0.0), w[1].max(0.0), q))
        .sum::<f64>()
        * dx
        / q
}

/// The six terms of the virial identity for `dm_q/dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirialTerms {
    /// `(M/D) m_q`
    pub growth: f64,
    /// `-M^{q+1} / (q (q+1) D)`
    pub sink: f64,
    /// `M^{q-1} A(u(t, 1))`
    pub boundary: f64,
    /// `-(q-1) int U^{q-2} u A(u)`
    pub bulk: f64,
    /// `(eps / qD) int U^q v_t`
    pub relaxation: f64,
    /// `-(gamma / D) int U^{q-1} u V`
    pub decay: f64,
}

impl VirialTerms {
    pub fn total(&self) -> f64 {
        self.growth + self.sink + self.boundary + self.bulk + self.relaxation + self.decay
    }
}

/// Right-hand side of the virial identity on a snapshot. Any antiderivative
/// of `a` may stand in for `A`: the two `A` terms cancel a constant shift.
pub fn virial_rhs(
    state: &State,
    cum: &CumulativeState,
    model: &DiffusionModel,
    params: &Params,
    grid: &Grid,
    q: f64,
) -> Result<VirialTerms> {
    let dx = grid.dx();
    let (m, d, n) = (params.mass, params.d, grid.n());
    let m_q = mq(cum, q, grid);
    let growth = m / d * m_q;
    let sink = -m.powf(q + 1.0) / (q * (q + 1.0) * d);
    let boundary = m.powf(q - 1.0) * model.flux_primitive(state.u[n - 1]);
    let mut bulk = 0.0;
    let mut decay = 0.0;
    for i in 0..n {
        let (u_lo, u_hi) = (cum.u[i].max(0.0), cum.u[i + 1].max(0.0));
        let u = state.u[i];
        bulk += u * model.flux_primitive(u) * mean_power_of_linear(u_lo, u_hi, q - 2.0);
        if params.gamma > 0.0 && u > 0.0 {
            let (v_lo, v_hi) = (cum.v[i], cum.v[i + 1]);
            let f = |s: f64| (u_lo + (u_hi - u_lo) * s).powf(q - 1.0) * (v_lo + (v_hi - v_lo) * s);
            decay += u * gauss_legendre8(&f, 0.0, 1.0);
        }
    }
    let bulk = -(q - 1.0) * bulk * dx;
    let decay = -params.gamma / d * decay * dx;
    let relaxation = if params.eps > 0.0 {
        let dtv = v_rhs(state, params, grid)?;
        let s: f64 = (0..n)
            .map(|i| dtv[i] * mean_power_of_linear(cum.u[i].max(0.0), cum.u[i + 1].max(0.0), q))
            .sum();
        params.eps / (q * d) * s * dx
    } else {
        0.0
    };
    Ok(VirialTerms {
        growth,
        sink,
        boundary,
        bulk,
        relaxation,
        decay,
    })
}

/// `(sum v^2 dx + sum over interior faces ((v_{i+1}-v_i)/dx)^2 dx)^{1/2}`.
pub fn h1_norm(v: &[f64], grid: &Grid) -> f64 {
    let l2: f64 = v.iter().map(|x| x * x).sum::<f64>() * grid.dx();
    (l2 + gradient_energy(v, grid)).sqrt()
}

/// Result of tracking `V >= V_m = (M/6D)(x^3 - x) + h` along a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsolutionReport {
    /// `min (V - V_m)` over nodes and checked times.
    pub min_gap: f64,
    pub min_gap_t: f64,
    pub min_gap_x: f64,
    /// `max ||h_x||_inf` over checked times.
    pub max_grad_h: f64,
    /// `||v0||_inf + M/(3D)`.
    pub grad_bound: f64,
    pub checks: usize,
    pub tol: f64,
}

impl SubsolutionReport {
    /// Errors if either the comparison or the gradient bound is violated
    /// beyond `tol`.
    pub fn check(&self) -> Result<()> {
        if self.min_gap < -self.tol {
            return Err(Error::ComparisonViolated {
                t: self.min_gap_t,
                x: self.min_gap_x,
                gap: self.min_gap,
            });
        }
        if self.max_grad_h > self.grad_bound + self.tol {
            return Err(Error::BoundViolated {
                r: f64::NAN,
                lhs: self.max_grad_h,
                rhs: self.grad_bound,
            });
        }
        Ok(())
    }
}

/// Integrates `eps h_t - D h_xx + gamma h = 0` with `h = 0` at both walls on
/// the node grid, using the same time discretisation as `v`.
#[derive(Debug, Clone)]
pub struct SubsolutionTracker {
    h: Vec<f64>,
    params: Params,
    grid: Grid,
    report: SubsolutionReport,
}

impl SubsolutionTracker {
    /// Sets up `h(0)` from `initial`; no state is checked until [`Self::observe`].
    pub fn new(initial: &State, params: &Params, grid: &Grid, tol: f64) -> Result<Self> {
        if params.eps <= 0.0 {
            return Err(Error::EpsZero);
        }
        let cum = cumulative(initial, grid);
        let c = params.mass / (6.0 * params.d);
        let n = grid.n();
        let mut h: Vec<f64> = (0..=n)
            .map(|k| {
                let x = grid.node(k);
                (cum.v[k] + c * (x - x * x * x)).min(0.0)
            })
            .collect();
        h[0] = 0.0;
        h[n] = 0.0;
        let grad_bound = initial.sup_v() + params.mass / (3.0 * params.d);
        let report = SubsolutionReport {
            min_gap: f64::INFINITY,
            min_gap_t: 0.0,
            min_gap_x: 0.0,
            max_grad_h: 0.0,
            grad_bound,
            checks: 0,
            tol,
        };
        Ok(Self {
            h,
            params: *params,
            grid: *grid,
            report,
        })
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn advance(&mut self, dt: f64, mode: VSolver) {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let (eps, d, gamma) = (self.params.eps, self.params.d, self.params.gamma);
        let k = d / (dx * dx);
        match mode {
            VSolver::Explicit => {
                let old = self.h.clone();
                for j in 1..n {
                    let lap = old[j - 1] - 2.0 * old[j] + old[j + 1];
                    self.h[j] = old[j] + dt / eps * (k * lap - gamma * old[j]);
                }
            }
            _ => {
                let shift = eps / dt + gamma;
                let diag = vec![shift + 2.0 * k; n - 1];
                let rhs: Vec<f64> = self.h[1..n].iter().map(|&x| eps / dt * x).collect();
                let inner = solve_tridiagonal(&diag, -k, &rhs);
                self.h[1..n].copy_from_slice(&inner);
            }
        }
    }

    /// Compares the state's `V` with the barrier at the tracker's current time.
    pub fn observe(&mut self, state: &State) {
        let cum = cumulative(state, &self.grid);
        let c = self.params.mass / (6.0 * self.params.d);
        let dx = self.grid.dx();
        for (k, (&v_cum, &h)) in cum.v.iter().zip(&self.h).enumerate() {
            let x = self.grid.node(k);
            let gap = v_cum - (c * (x * x * x - x) + h);
            if gap < self.report.min_gap {
                self.report.min_gap = gap;
                self.report.min_gap_t = state.t;
                self.report.min_gap_x = x;
            }
        }
        let grad = self
            .h
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dx).abs())
            .fold(0.0, f64::max);
        self.report.max_grad_h = self.report.max_grad_h.max(grad);
        self.report.checks += 1;
    }

    pub fn report(&self) -> SubsolutionReport {
        self.report
    }
}

/// What the recorder measures besides the fixed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Moment exponents, each `>= 2`.
    pub qs: Vec<f64>,
    pub track_subsolution: bool,
    pub subsolution_tol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            qs: vec![3.0],
            track_subsolution: false,
            subsolution_tol: 1e-6,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(q) = self.qs.iter().find(|q| !(**q >= 2.0 && q.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "moment exponent q = {q} must be >= 2"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub v_mean: f64,
    #[serde(rename = "L")]
    pub liapunov: f64,
    /// `eps int_0^t ||v_t||^2 ds`, trapezoid rule over accepted steps.
    pub diss_cum: f64,
    pub mq: Vec<f64>,
    /// `dm_q/dt` by finite differences of `m_q` over adjacent accepted steps.
    pub virial_lhs: Vec<f64>,
    pub virial_rhs: Vec<f64>,
    pub sup_u: f64,
    pub h1_v: f64,
}

impl DiagnosticsRecord {
    pub fn virial_residual(&self, k: usize) -> f64 {
        self.virial_lhs[k] - self.virial_rhs[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSeries {
    pub qs: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsSeries {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "mass", "v_mean", "L", "diss_cum"]
            .map(String::from)
            .to_vec();
        for prefix in ["mq", "virial_lhs", "virial_rhs"] {
            h.extend(self.qs.iter().map(|q| format!("{prefix}_q{q}")));
        }
        h.push("sup_u".into());
        h.push("h1_v".into());
        h
    }

    /// Writes one CSV row per record, header first.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::FileParse(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(io)?;
        for r in &self.records {
            let mut row = vec![r.t, r.mass, r.v_mean, r.liapunov, r.diss_cum];
            row.extend(&r.mq);
            row.extend(&r.virial_lhs);
            row.extend(&r.virial_rhs);
            row.push(r.sup_u);
            row.push(r.h1_v);
            w.write_record(row.iter().map(|x| x.to_string()))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::FileParse(e.to_string()))?;
        Ok(())
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }
}

/// Derivative at the middle of three (possibly unevenly spaced) samples.
fn three_point_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// Snapshot of the moments at one accepted step.
#[derive(Debug, Clone)]
struct MomentSample {
    t: f64,
    mq: Vec<f64>,
}

/// Builds the diagnostics series while the solver runs.
pub(crate) struct Recorder<'a> {
    params: Params,
    model: &'a DiffusionModel,
    table: &'a EntropyTable,
    grid: Grid,
    qs: Vec<f64>,
    stride: usize,
    v_solver: VSolver,
    records: Vec<DiagnosticsRecord>,
    /// Record whose `virial_lhs` still waits for the next step.
    pending: Option<usize>,
    prev: Option<MomentSample>,
    cur: MomentSample,
    /// State before the latest accepted step, for the terminal difference.
    before_last: State,
    diss_cum: f64,
    diss_rate: f64,
    subsolution: Option<SubsolutionTracker>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        initial: &State,
        params: &Params,
        model: &'a DiffusionModel,
        table: &'a EntropyTable,
        grid: &Grid,
        config: &SolverConfig,
        diagnostics: &DiagnosticsConfig,
    ) -> Result<Self> {
        diagnostics.validate()?;
        let subsolution = if diagnostics.track_subsolution && params.eps > 0.0 {
            Some(SubsolutionTracker::new(
                initial,
                params,
                grid,
                diagnostics.subsolution_tol,
            )?)
        } else {
            None
        };
        let diss_rate = if params.eps > 0.0 {
            dissipation_rate(initial, params, grid)?
        } else {
            0.0
        };
        let mut rec = Self {
            params: *params,
            model,
            table,
            grid: *grid,
            qs: diagnostics.qs.clone(),
            stride: config.output_stride,
            v_solver: config.v_solver,
            records: Vec::new(),
            pending: None,
            prev: None,
            cur: MomentSample {
                t: initial.t,
                mq: Vec::new(),
            },
            before_last: initial.clone(),
            diss_cum: 0.0,
            diss_rate,
            subsolution,
        };
        rec.cur = rec.moments(initial);
        rec.push_record(initial)?;
        Ok(rec)
    }

    fn moments(&self, state: &State) -> MomentSample {
        let cum = cumulative(state, &self.grid);
        MomentSample {
            t: state.t,
            mq: self.qs.iter().map(|&q| mq(&cum, q, &self.grid)).collect(),
        }
    }

    fn push_record(&mut self, state: &State) -> Result<()> {
        let cum = cumulative(state, &self.grid);
        let virial_rhs = self
            .qs
            .iter()
            .map(|&q| {
                virial_rhs(state, &cum, self.model, &self.params, &self.grid, q).map(|t| t.total())
            })
            .collect::<Result<Vec<_>>>()?;
        self.records.push(DiagnosticsRecord {
            t: state.t,
            mass: state.mass(&self.grid),
            v_mean: state.v_mean(&self.grid),
            liapunov: liapunov(state, self.table, &self.params, &self.grid),
            diss_cum: self.diss_cum,
            mq: self.cur.mq.clone(),
            virial_lhs: vec![f64::NAN; self.qs.len()],
            virial_rhs,
            sup_u: state.sup_u(),
            h1_v: h1_norm(&state.v, &self.grid),
        });
        self.pending = Some(self.records.len() - 1);
        if let Some(tracker) = self.subsolution.as_mut() {
            tracker.observe(state);
        }
        Ok(())
    }

    /// Registers the accepted step `old -> new` of length `dt`.
    pub(crate) fn accept(&mut self, old: &State, new: &State, dt: f64, steps: usize) -> Result<()> {
        self.before_last.clone_from(old);
        if self.params.eps > 0.0 {
            let rate = dissipation_rate(new, &self.params, &self.grid)?;
            self.diss_cum += 0.5 * dt * (self.diss_rate + rate);
            self.diss_rate = rate;
        }
        if let Some(tracker) = self.subsolution.as_mut() {
            tracker.advance(dt, self.v_solver);
        }
        // m_q is only needed at the steps around a record
        let near_record =
            self.pending.is_some() || (steps + 1).is_multiple_of(self.stride) || steps.is_multiple_of(self.stride);
        if !near_record {
            return Ok(());
        }
        let next = self.moments(new);
        if let Some(idx) = self.pending.take() {
            let lhs = match &self.prev {
                Some(prev) => (0..self.qs.len())
                    .map(|k| {
                        three_point_derivative(
                            [prev.t, self.cur.t, next.t],
                            [prev.mq[k], self.cur.mq[k], next.mq[k]],
                        )
                    })
                    .collect(),
                None => (0..self.qs.len())
                    .map(|k| (next.mq[k] - self.cur.mq[k]) / (next.t - self.cur.t))
                    .collect(),
            };
            self.records[idx].virial_lhs = lhs;
        }
        self.prev = Some(std::mem::replace(&mut self.cur, next));
        if steps.is_multiple_of(self.stride) {
            self.push_record(new)?;
        }
        Ok(())
    }

    /// Closes the series with a record at the terminal state.
    pub(crate) fn finish(
        mut self,
        last: &State,
        _steps: usize,
    ) -> Result<(DiagnosticsSeries, Option<SubsolutionReport>)> {
        let at_end = self.records.last().map(|r| r.t == last.t).unwrap_or(false);
        if !at_end {
            if self.cur.t != last.t {
                self.cur = self.moments(last);
            }
            if self.prev.as_ref().map(|p| p.t) != Some(self.before_last.t)
                && self.before_last.t < last.t
            {
                self.prev = Some(self.moments(&self.before_last));
            }
            self.push_record(last)?;
        }
        if let Some(idx) = self.pending.take() {
            if let Some(prev) = &self.prev {
                let lhs = (0..self.qs.len())
                    .map(|k| (self.cur.mq[k] - prev.mq[k]) / (self.cur.t - prev.t))
                    .collect();
                self.records[idx].virial_lhs = lhs;
            }
        }
        let report = self.subsolution.as_ref().map(|t| t.report());
        Ok((
            DiagnosticsSeries {
                qs: self.qs,
                records: self.records,
            },
            report,
        ))
    }
}
