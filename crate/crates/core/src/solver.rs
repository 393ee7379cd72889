//! Mass-conservative finite-volume scheme for the coupled system with
//! no-flux boundaries, adaptive time stepping and blow-up detection.
//!
//! The density flux through interface `i + 1/2` is
//!
//! ```text
//! F = (A(u_{i+1}) - A(u_i)) / dx - u_up (v_{i+1} - v_i) / dx
//! ```
//!
//! with `u_up` the upwind cell for the drift, and `F = 0` on both walls.
//! `u` is advanced by forward Euler; `v` by forward Euler, backward Euler
//! or an elliptic solve depending on [`VSolver`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsConfig, DiagnosticsSeries, Recorder, SubsolutionReport};
use crate::diffusion::{DiffusionModel, EntropyTable};
use crate::error::{Error, Result};
use crate::model::{project_mean_zero, Grid, Params, RunOutcome, State, StopReason, DENSITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VSolver {
    Explicit,
    Implicit,
    Elliptic,
}

impl VSolver {
    pub fn as_str(&self) -> &'static str {
        match self {
            VSolver::Explicit => "explicit",
            VSolver::Implicit => "implicit",
            VSolver::Elliptic => "elliptic",
        }
    }
}

impl std::str::FromStr for VSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(VSolver::Explicit),
            "implicit" => Ok(VSolver::Implicit),
            "elliptic" => Ok(VSolver::Elliptic),
            other => Err(Error::InvalidParameter(format!(
                "unknown v_solver `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl_safety: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Sup-norm of `u` above which blow-up is declared.
    pub blowup_threshold: f64,
    pub v_solver: VSolver,
    /// Accepted steps between diagnostic records.
    pub output_stride: usize,
    /// Declare blow-up once a single cell holds this fraction of the total
    /// mass (the grid can no longer resolve further concentration).
    pub concentration_fraction: f64,
    /// Steps over which `sup u` must have grown monotonically for a
    /// `dt_min` stall to count as blow-up.
    pub growth_window: usize,
    /// Multiplier of the drift flux. Always `1.0` except in tests (`-1.0`
    /// reverses the drift, `0.0` removes it).
    #[doc(hidden)]
    #[serde(skip, default = "one")]
    pub drift_sign: f64,
}

fn one() -> f64 {
    1.0
}

impl SolverConfig {
    /// Defaults for total mass `mass`: threshold `1e6 M`, implicit `v`.
    pub fn for_mass(mass: f64, t_end: f64) -> Self {
        Self {
            cfl_safety: 0.4,
            dt_init: 1e-6,
            dt_min: 1e-14,
            dt_max: 1e-2,
            t_end,
            blowup_threshold: 1e6 * mass,
            v_solver: VSolver::Implicit,
            output_stride: 100,
            concentration_fraction: 0.9,
            growth_window: 100,
            drift_sign: 1.0,
        }
    }

    pub fn validate(&self, params: &Params) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            ));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init <= self.dt_max) {
            return bad("time steps must satisfy 0 < dt_min < dt_init <= dt_max".into());
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be finite and >= 0", self.t_end));
        }
        if !(self.blowup_threshold > params.mass) {
            return bad(format!(
                "blowup_threshold = {} must exceed M = {}",
                self.blowup_threshold, params.mass
            ));
        }
        if self.output_stride == 0 {
            return bad("output_stride must be >= 1".into());
        }
        if !(self.concentration_fraction > 0.0 && self.concentration_fraction <= 1.0) {
            return bad("concentration_fraction must lie in (0, 1]".into());
        }
        match (self.v_solver, params.eps > 0.0) {
            (VSolver::Elliptic, true) => bad("elliptic v_solver requires eps = 0".into()),
            (VSolver::Explicit | VSolver::Implicit, false) => {
                bad("eps = 0 requires the elliptic v_solver".into())
            }
            _ => Ok(()),
        }
    }

    /// The sup-norm that triggers blow-up on `grid`: the configured
    /// threshold, capped by the resolution limit `fraction * M / dx`.
    pub fn effective_threshold(&self, params: &Params, grid: &Grid) -> f64 {
        let resolution = self.concentration_fraction * params.mass / grid.dx();
        self.blowup_threshold.min(resolution)
    }
}

/// Interface fluxes `F_{-1/2}, ..., F_{n-1/2}` (length `n + 1`).
pub fn u_flux(state: &State, model: &DiffusionModel, grid: &Grid) -> Vec<f64> {
    let prim: Vec<f64> = state.u.iter().map(|&u| model.flux_primitive(u)).collect();
    let mut flux = vec![0.0; grid.n() + 1];
    fill_flux(&mut flux, &state.u, &state.v, &prim, grid.dx(), 1.0);
    flux
}

fn fill_flux(flux: &mut [f64], u: &[f64], v: &[f64], prim: &[f64], dx: f64, drift_sign: f64) {
    let n = u.len();
    flux[0] = 0.0;
    flux[n] = 0.0;
    for i in 0..n - 1 {
        let dv = v[i + 1] - v[i];
        let upwind = if drift_sign * dv > 0.0 {
            u[i]
        } else {
            u[i + 1]
        };
        flux[i + 1] = (prim[i + 1] - prim[i] - drift_sign * upwind * dv) / dx;
    }
}

/// Neumann 3-point Laplacian of cell values.
pub fn laplacian(v: &[f64], grid: &Grid) -> Vec<f64> {
    let n = v.len();
    let inv = 1.0 / (grid.dx() * grid.dx());
    (0..n)
        .map(|i| {
            let left = if i == 0 { v[0] } else { v[i - 1] };
            let right = if i + 1 == n { v[n - 1] } else { v[i + 1] };
            (left - 2.0 * v[i] + right) * inv
        })
        .collect()
}

/// `(D lap v - gamma v + u - M) / eps`.
pub fn v_rhs(state: &State, params: &Params, grid: &Grid) -> Result<Vec<f64>> {
    if params.eps <= 0.0 {
        return Err(Error::EpsZero);
    }
    let lap = laplacian(&state.v, grid);
    Ok(state
        .u
        .iter()
        .zip(&state.v)
        .zip(&lap)
        .map(|((&u, &v), &l)| (params.d * l - params.gamma * v + u - params.mass) / params.eps)
        .collect())
}

/// Solves the symmetric tridiagonal system with constant off-diagonal `off`
/// and diagonal `diag` (Thomas algorithm).
pub(crate) fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solves `(shift - D lap) v = rhs` with Neumann ends, `shift > 0`.
fn shifted_neumann_solve(shift: f64, d: f64, rhs: &[f64], grid: &Grid) -> Vec<f64> {
    let n = rhs.len();
    let k = d / (grid.dx() * grid.dx());
    let mut diag = vec![shift + 2.0 * k; n];
    diag[0] = shift + k;
    diag[n - 1] = shift + k;
    solve_tridiagonal(&diag, -k, rhs)
}

/// Solves `D lap v - gamma v = M - u` with Neumann conditions. For
/// `gamma = 0` the solution is pinned by the mean-zero projection.
pub fn elliptic_v(u: &[f64], params: &Params, grid: &Grid) -> Result<Vec<f64>> {
    let dx = grid.dx();
    let n = u.len();
    if params.gamma > 0.0 {
        let rhs: Vec<f64> = u.iter().map(|&x| x - params.mass).collect();
        let v = shifted_neumann_solve(params.gamma, params.d, &rhs, grid);
        return Ok(project_mean_zero(&v, grid));
    }
    // gamma = 0: integrate the face gradients g_{i+1/2} = D (v_{i+1} - v_i)/dx
    // from the left wall; the right wall closes only if sum(u - M) = 0.
    let mut v = vec![0.0; n];
    let mut g = 0.0;
    for i in 0..n {
        g += dx * (params.mass - u[i]);
        if i + 1 < n {
            v[i + 1] = v[i] + dx * g / params.d;
        }
    }
    let scale = params.mass.max(1.0);
    if g.abs() > 1e-9 * scale {
        return Err(Error::SingularSystem(g));
    }
    Ok(project_mean_zero(&v, grid))
}

/// One time step of length `dt`. Fails with [`Error::StepRejected`] when the
/// new density drops below `-DENSITY_FLOOR` or becomes non-finite; the
/// caller is expected to retry with a smaller step.
pub fn step(
    state: &State,
    params: &Params,
    model: &DiffusionModel,
    grid: &Grid,
    dt: f64,
    v_solver: VSolver,
) -> Result<State> {
    let mut ws = Workspace::new(grid.n());
    ws.refresh_primitive(&state.u, model);
    step_with(&mut ws, state, params, grid, dt, v_solver, 1.0)
}

/// Scratch buffers reused across steps.
pub(crate) struct Workspace {
    prim: Vec<f64>,
    flux: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            prim: vec![0.0; n],
            flux: vec![0.0; n + 1],
        }
    }

    fn refresh_primitive(&mut self, u: &[f64], model: &DiffusionModel) {
        for (p, &x) in self.prim.iter_mut().zip(u) {
            *p = model.flux_primitive(x);
        }
    }
}

/// Like [`step`], with `ws.prim` already holding the flux primitive of `state.u`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_with(
    ws: &mut Workspace,
    state: &State,
    params: &Params,
    grid: &Grid,
    dt: f64,
    v_solver: VSolver,
    drift_sign: f64,
) -> Result<State> {
    let dx = grid.dx();
    fill_flux(&mut ws.flux, &state.u, &state.v, &ws.prim, dx, drift_sign);
    let mut u = Vec::with_capacity(state.u.len());
    for (i, &ui) in state.u.iter().enumerate() {
        let new = ui + dt * (ws.flux[i + 1] - ws.flux[i]) / dx;
        if !new.is_finite() {
            return Err(Error::StepRejected(format!(
                "non-finite density in cell {i}"
            )));
        }
        if new < -DENSITY_FLOOR {
            return Err(Error::StepRejected(format!("density {new:e} in cell {i}")));
        }
        u.push(new.max(0.0));
    }
    let v = match v_solver {
        VSolver::Explicit => {
            let rhs = v_rhs(state, params, grid)?;
            state.v.iter().zip(&rhs).map(|(v, r)| v + dt * r).collect()
        }
        VSolver::Implicit => {
            if params.eps <= 0.0 {
                return Err(Error::EpsZero);
            }
            let shift = params.eps / dt + params.gamma;
            let rhs: Vec<f64> = state
                .v
                .iter()
                .zip(&u)
                .map(|(&v, &x)| params.eps * v / dt + x - params.mass)
                .collect();
            shifted_neumann_solve(shift, params.d, &rhs, grid)
        }
        VSolver::Elliptic => elliptic_v(&u, params, grid)?,
    };
    if v.iter().any(|x: &f64| !x.is_finite()) {
        return Err(Error::StepRejected("non-finite chemoattractant".into()));
    }
    Ok(State {
        t: state.t + dt,
        u,
        v,
    })
}

/// Stability-limited step `cfl * min(dx^2 / (2 max a_bar), dx / max |v_x|,
/// eps dx^2 / (2 D))` (the last term for explicit `v` only), before clamping.
pub fn raw_stable_dt(
    state: &State,
    params: &Params,
    model: &DiffusionModel,
    grid: &Grid,
    config: &SolverConfig,
) -> f64 {
    let prim: Vec<f64> = state.u.iter().map(|&u| model.flux_primitive(u)).collect();
    dt_from_primitive(state, &prim, params, model, grid, config)
}

fn dt_from_primitive(
    state: &State,
    prim: &[f64],
    params: &Params,
    model: &DiffusionModel,
    grid: &Grid,
    config: &SolverConfig,
) -> f64 {
    let dx = grid.dx();
    let u = &state.u;
    let mut a_max: f64 = 0.0;
    for i in 0..u.len() - 1 {
        let du = u[i + 1] - u[i];
        let slope = if du.abs() > 1e-12 * (1.0 + u[i].abs()) {
            ((prim[i + 1] - prim[i]) / du).abs()
        } else {
            model.a(u[i])
        };
        a_max = a_max.max(slope);
    }
    let grad_max = state
        .v
        .windows(2)
        .map(|w| ((w[1] - w[0]) / dx).abs())
        .fold(0.0_f64, f64::max);
    let mut dt = f64::INFINITY;
    if a_max > 0.0 {
        dt = dt.min(dx * dx / (2.0 * a_max));
    }
    if grad_max > 0.0 {
        dt = dt.min(dx / grad_max);
    }
    if config.v_solver == VSolver::Explicit {
        let reaction = params.d * 4.0 / (dx * dx) + params.gamma;
        dt = dt
            .min(2.0 * params.eps / reaction)
            .min(params.eps * dx * dx / (2.0 * params.d));
    }
    config.cfl_safety * dt
}

/// [`raw_stable_dt`] clamped to `[dt_min, dt_max]`.
pub fn stable_dt(
    state: &State,
    params: &Params,
    model: &DiffusionModel,
    grid: &Grid,
    config: &SolverConfig,
) -> f64 {
    raw_stable_dt(state, params, model, grid, config).clamp(config.dt_min, config.dt_max)
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: RunOutcome,
    pub series: DiagnosticsSeries,
    pub final_state: State,
    pub subsolution: Option<SubsolutionReport>,
}

/// Advances `initial` until the horizon, blow-up, or a `dt_min` stall.
pub fn run(
    initial: &State,
    params: &Params,
    model: &DiffusionModel,
    grid: &Grid,
    config: &SolverConfig,
    diagnostics: &DiagnosticsConfig,
) -> Result<RunResult> {
    params.validate()?;
    config.validate(params)?;
    grid.check_len(&initial.u)?;
    grid.check_len(&initial.v)?;
    let table = EntropyTable::new(model);
    let mut recorder = Recorder::new(initial, params, model, &table, grid, config, diagnostics)?;
    let threshold = config.effective_threshold(params, grid);
    let mut ws = Workspace::new(grid.n());
    let mut state = initial.clone();
    let mut history: VecDeque<f64> = VecDeque::with_capacity(config.growth_window + 1);
    history.push_back(state.sup_u());
    let mut steps = 0usize;
    let mut first = true;

    let reason = loop {
        if state.sup_u() > threshold {
            break StopReason::BlowupDetected;
        }
        let remaining = config.t_end - state.t;
        if remaining <= 1e-12 * config.t_end.max(1e-300) {
            break StopReason::HorizonReached;
        }
        ws.refresh_primitive(&state.u, model);
        let raw = dt_from_primitive(&state, &ws.prim, params, model, grid, config);
        if raw < config.dt_min {
            break stall_reason(&history, config);
        }
        let mut dt = raw.min(config.dt_max).min(remaining);
        if first {
            dt = dt.min(config.dt_init);
            first = false;
        }
        // avoid a sliver step at the horizon
        if dt < remaining && remaining < 2.0 * dt {
            dt = 0.5 * remaining;
        }
        let next = loop {
            match step_with(
                &mut ws,
                &state,
                params,
                grid,
                dt,
                config.v_solver,
                config.drift_sign,
            ) {
                Ok(s) => break Some(s),
                Err(Error::StepRejected(_)) => {
                    dt *= 0.5;
                    if dt < config.dt_min {
                        break None;
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let Some(mut next) = next else {
            break stall_reason(&history, config);
        };
        if remaining - dt <= 1e-12 * config.t_end {
            next.t = config.t_end;
        }
        steps += 1;
        recorder.accept(&state, &next, dt, steps)?;
        history.push_back(next.sup_u());
        if history.len() > config.growth_window + 1 {
            history.pop_front();
        }
        state = next;
    };

    let outcome = RunOutcome {
        reason,
        t_final: state.t,
        max_u: state.sup_u(),
        steps,
    };
    let (series, subsolution) = recorder.finish(&state, steps)?;
    Ok(RunResult {
        outcome,
        series,
        final_state: state,
        subsolution,
    })
}

fn stall_reason(history: &VecDeque<f64>, config: &SolverConfig) -> StopReason {
    let full = history.len() > config.growth_window;
    let growing = history
        .iter()
        .zip(history.iter().skip(1))
        .all(|(a, b)| b > a);
    if full && growing {
        StopReason::BlowupDetected
    } else {
        StopReason::DtUnderflow
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl() -> DiffusionModel {
        DiffusionModel::power_law(1.0, 2.0).unwrap()
    }

    fn flat(grid: &Grid, m: f64) -> State {
        State {
            t: 0.0,
            u: vec![m; grid.n()],
            v: vec![0.0; grid.n()],
        }
    }

    #[test]
    fn constant_state_has_zero_flux() {
        let g = Grid::new(16).unwrap();
        let f = u_flux(&flat(&g, 3.0), &pl(), &g);
        assert_eq!(f.len(), 17);
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn flux_example_four_cells() {
        let g = Grid::new(4).unwrap();
        let s = State {
            t: 0.0,
            u: vec![0.0, 0.0, 2.0, 2.0],
            v: vec![0.0; 4],
        };
        let f = u_flux(&s, &pl(), &g);
        assert!((f[2] - 8.0 / 3.0).abs() < 1e-14);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[3], 0.0);
        assert_eq!((f[0], f[4]), (0.0, 0.0));
    }

    #[test]
    fn drift_is_upwinded_towards_higher_v() {
        let g = Grid::new(4).unwrap();
        let s = State {
            t: 0.0,
            u: vec![1.0, 2.0, 3.0, 4.0],
            v: vec![0.0, 1.0, 1.0, 0.0],
        };
        let m = DiffusionModel::constant(1e-30).unwrap();
        let f = u_flux(&s, &m, &g);
        // v rises between cells 0 and 1: cell 0 feeds the flux to the right
        assert!((f[1] + 4.0).abs() < 1e-12);
        // v falls between cells 2 and 3: cell 3 feeds the flux to the left
        assert!((f[3] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn v_rhs_examples() {
        let g = Grid::new(32).unwrap();
        let p = Params::new(2.0, 1.0, 0.5, 1.0).unwrap();
        assert!(v_rhs(&flat(&g, 1.0), &p, &g)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
        let mut s = flat(&g, 1.0);
        s.v = vec![0.3; 32];
        for r in v_rhs(&s, &p, &g).unwrap() {
            assert!((r + 0.5 * 0.3 / 2.0).abs() < 1e-14);
        }
        let p0 = Params::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(v_rhs(&s, &p0, &g), Err(Error::EpsZero));
    }

    #[test]
    fn elliptic_constant_density_gives_zero() {
        let g = Grid::new(16).unwrap();
        for gamma in [0.0, 1.0] {
            let p = Params::new(0.0, 1.0, gamma, 2.0).unwrap();
            let v = elliptic_v(&[2.0; 16], &p, &g).unwrap();
            assert!(v.iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn elliptic_incompatible_data_is_singular() {
        let g = Grid::new(8).unwrap();
        let p = Params::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            elliptic_v(&[2.0; 8], &p, &g),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn steady_state_is_fixed_point_for_every_mode() {
        let g = Grid::new(32).unwrap();
        let m = pl();
        for (eps, mode) in [
            (1.0, VSolver::Explicit),
            (1.0, VSolver::Implicit),
            (0.0, VSolver::Elliptic),
        ] {
            let p = Params::new(eps, 1.0, 0.3, 2.0).unwrap();
            let s = flat(&g, 2.0);
            let next = step(&s, &p, &m, &g, 1e-4, mode).unwrap();
            assert_eq!(next.u, s.u);
            assert!(next.v.iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn step_conserves_mass_and_v_mean() {
        let g = Grid::new(64).unwrap();
        let m = pl();
        let u: Vec<f64> = g
            .centers()
            .iter()
            .map(|x| 1.0 + 0.5 * (3.0 * x).cos())
            .collect();
        let mass = g.integrate(&u);
        let v0: Vec<f64> = g
            .centers()
            .iter()
            .map(|x| (std::f64::consts::PI * x).cos() * 0.2)
            .collect();
        let v0 = project_mean_zero(&v0, &g);
        for (eps, mode) in [
            (1.0, VSolver::Explicit),
            (1.0, VSolver::Implicit),
            (0.0, VSolver::Elliptic),
        ] {
            let p = Params::new(eps, 1.0, 0.3, mass).unwrap();
            let mut s = State {
                t: 0.0,
                u: u.clone(),
                v: v0.clone(),
            };
            for _ in 0..50 {
                s = step(&s, &p, &m, &g, 5e-5, mode).unwrap();
            }
            assert!((s.mass(&g) - mass).abs() < 1e-13, "{mode:?}");
            assert!(s.v_mean(&g).abs() < 1e-12, "{mode:?}");
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = Grid::new(64).unwrap();
        let p = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let mut u = vec![0.0; 64];
        u[32] = 64.0;
        let s = State {
            t: 0.0,
            u,
            v: vec![0.0; 64],
        };
        assert!(matches!(
            step(
                &s,
                &p,
                &DiffusionModel::constant(1.0).unwrap(),
                &g,
                1.0,
                VSolver::Implicit
            ),
            Err(Error::StepRejected(_))
        ));
    }

    #[test]
    fn stable_dt_example() {
        let g = Grid::new(64).unwrap();
        let p = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let cfg = SolverConfig::for_mass(1.0, 1.0);
        let dt = stable_dt(&flat(&g, 1.0), &p, &pl(), &g, &cfg);
        let expected = 0.4 * (1.0f64 / 64.0).powi(2) / 0.5;
        assert!((dt - expected).abs() < 1e-18);
    }

    #[test]
    fn stable_dt_clamps_to_bounds() {
        let g = Grid::new(64).unwrap();
        let p = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let mut cfg = SolverConfig::for_mass(1.0, 1.0);
        cfg.dt_max = 1e-7;
        assert_eq!(stable_dt(&flat(&g, 1.0), &p, &pl(), &g, &cfg), 1e-7);
        cfg.dt_max = 1.0;
        cfg.dt_min = 1e-3;
        cfg.dt_init = 1e-2;
        assert_eq!(stable_dt(&flat(&g, 1.0), &p, &pl(), &g, &cfg), 1e-3);
    }

    #[test]
    fn config_validation() {
        let p = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let mut cfg = SolverConfig::for_mass(1.0, 1.0);
        assert!(cfg.validate(&p).is_ok());
        cfg.blowup_threshold = 0.5;
        assert!(cfg.validate(&p).is_err());
        let mut cfg = SolverConfig::for_mass(1.0, 1.0);
        cfg.v_solver = VSolver::Elliptic;
        assert!(cfg.validate(&p).is_err());
        let mut cfg = SolverConfig::for_mass(1.0, 1.0);
        cfg.dt_min = cfg.dt_init;
        assert!(cfg.validate(&p).is_err());
    }
}
