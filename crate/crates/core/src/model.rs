//! Physical parameters, the uniform grid on [0, 1] and the discrete state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values in `[-DENSITY_FLOOR, 0)` are round-off and get clamped to zero.
pub const DENSITY_FLOOR: f64 = 1e-13;

/// The four physical constants of the system.
///
/// `eps = 0` selects the parabolic-elliptic mode, in which `v` is obtained
/// from an elliptic solve at every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub eps: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub mass: f64,
}

impl Params {
    pub fn new(eps: f64, d: f64, gamma: f64, mass: f64) -> Result<Self> {
        let p = Self {
            eps,
            d,
            gamma,
            mass,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.eps, self.d, self.gamma, self.mass]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.d <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "D = {} must be > 0",
                self.d
            )));
        }
        if self.mass <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "M = {} must be > 0",
                self.mass
            )));
        }
        if self.eps < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps = {} must be >= 0",
                self.eps
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must be >= 0",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Mass tolerance used when validating initial data.
    pub fn mass_tolerance(&self) -> f64 {
        1e-10 * self.mass.max(1.0)
    }

    /// Allowed mass drift after `steps` time steps.
    pub fn drift_tolerance(&self, steps: usize) -> f64 {
        1e-10 * self.mass * (1.0 + steps as f64 * 1e-6)
    }
}

/// Uniform cell-centred grid on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs n >= 4 cells, got {n}"
            )));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Centre of cell `i`.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Position of node (cell interface) `k`, `k = 0..=n`.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.node(k)).collect()
    }

    /// Midpoint-rule integral of cell values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.dx()
    }

    pub(crate) fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// Cell averages of the density `u` and the chemoattractant `v` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn mass(&self, grid: &Grid) -> f64 {
        grid.integrate(&self.u)
    }

    pub fn v_mean(&self, grid: &Grid) -> f64 {
        grid.integrate(&self.v)
    }

    pub fn sup_u(&self) -> f64 {
        self.u.iter().fold(0.0_f64, |m, &x| m.max(x))
    }

    pub fn sup_v(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    HorizonReached,
    BlowupDetected,
    DtUnderflow,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::HorizonReached => "horizon-reached",
            StopReason::BlowupDetected => "blowup-detected",
            StopReason::DtUnderflow => "dt-underflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub reason: StopReason,
    pub t_final: f64,
    pub max_u: f64,
    pub steps: usize,
}

/// Subtracts the discrete mean so that `sum(v) * dx == 0` up to round-off.
pub fn project_mean_zero(v: &[f64], grid: &Grid) -> Vec<f64> {
    let mean = grid.integrate(v);
    v.iter().map(|x| x - mean).collect()
}

/// Checks non-negativity and mass of `u0`, projects `v0` to mean zero and
/// returns the state at `t = 0`.
pub fn validate_initial(u0: &[f64], v0: &[f64], params: &Params, grid: &Grid) -> Result<State> {
    params.validate()?;
    grid.check_len(u0)?;
    grid.check_len(v0)?;
    let mut u = Vec::with_capacity(u0.len());
    for (cell, &value) in u0.iter().enumerate() {
        if !value.is_finite() || value < -DENSITY_FLOOR {
            return Err(Error::NegativeDensity { cell, value });
        }
        u.push(value.max(0.0));
    }
    if v0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite v0".into()));
    }
    let mass = grid.integrate(&u);
    let tol = params.mass_tolerance();
    if (mass - params.mass).abs() > tol {
        return Err(Error::MassMismatch {
            expected: params.mass,
            actual: mass,
            tol,
        });
    }
    Ok(State {
        t: 0.0,
        u,
        v: project_mean_zero(v0, grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> Params {
        Params::new(1.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = Grid::new(4).unwrap();
        assert_eq!(project_mean_zero(&[0.0; 4], &g), vec![0.0; 4]);
        assert!(project_mean_zero(&[3.0; 4], &g)
            .iter()
            .all(|x| x.abs() < 1e-15));
        // mean of the four centres is 1/2
        let p = project_mean_zero(&g.centers(), &g);
        for (i, x) in p.iter().enumerate() {
            assert!((x - (g.center(i) - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_data_is_valid() {
        let g = Grid::new(8).unwrap();
        let s = validate_initial(&[1.0; 8], &[0.0; 8], &unit_params(), &g).unwrap();
        assert_eq!(s.t, 0.0);
        assert_eq!(s.u, vec![1.0; 8]);
    }

    #[test]
    fn negative_entry_rejected() {
        let g = Grid::new(4).unwrap();
        let u = [1.1, -0.1, 1.0, 2.0];
        let err = validate_initial(&u, &[0.0; 4], &unit_params(), &g).unwrap_err();
        assert!(matches!(err, Error::NegativeDensity { cell: 1, .. }));
    }

    #[test]
    fn round_off_negatives_are_clamped() {
        let g = Grid::new(4).unwrap();
        let u = [1.0, -1e-14, 1.0, 2.0];
        let s = validate_initial(&u, &[0.0; 4], &unit_params(), &g).unwrap();
        assert_eq!(s.u[1], 0.0);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let g = Grid::new(4).unwrap();
        let err = validate_initial(&[2.0; 4], &[0.0; 4], &unit_params(), &g).unwrap_err();
        assert!(matches!(err, Error::MassMismatch { .. }));
    }

    #[test]
    fn validation_projects_v_idempotently() {
        let g = Grid::new(16).unwrap();
        let v0: Vec<f64> = g.centers().iter().map(|x| x * x + 0.3).collect();
        let s1 = validate_initial(&[1.0; 16], &v0, &unit_params(), &g).unwrap();
        let s2 = validate_initial(&s1.u, &s1.v, &unit_params(), &g).unwrap();
        for (a, b) in s1.v.iter().zip(&s2.v) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(s1.v_mean(&g).abs() < 1e-15);
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(Params::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(Params::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, -1.0, 1.0).is_err());
        assert!(Params::new(-1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Params::new(0.0, 1.0, 0.0, 1.0).is_ok());
        assert!(Grid::new(3).is_err());
    }
}
