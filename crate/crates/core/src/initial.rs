//! Initial data: the concentrated ramp used by the blow-up certificates and
//! a small library of generic profiles. All densities are produced as exact
//! cell averages where a closed form exists.

use std::f64::consts::PI;
use std::io::Read;

use crate::error::{Error, Result};
use crate::model::{validate_initial, Grid, Params, State};
use crate::quadrature::gauss_legendre8;

/// Piecewise-linear profile through `(x, value)` samples, constant outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Profile {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::FileParse(
                "profile needs matching, non-empty columns".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::FileParse(
                "x column must be strictly increasing".into(),
            ));
        }
        if y.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::FileParse("non-finite profile value".into()));
        }
        Ok(Self { x, y })
    }

    /// Two-column CSV `x,value` with a header row.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::FileParse(e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::FileParse(format!(
                    "expected 2 columns, got {}",
                    rec.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::FileParse(format!("`{s}`: {e}")))
            };
            xs.push(num(&rec[0])?);
            ys.push(num(&rec[1])?);
        }
        Self::new(xs, ys)
    }

    /// `int_{-inf..x}` is not needed; this is `int_{x_0}^{x}` of the interpolant.
    fn integral_to(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return (x - self.x[0]) * self.y[0];
        }
        let mut acc = 0.0;
        for k in 0..n - 1 {
            let (x0, x1) = (self.x[k], self.x[k + 1]);
            if x <= x0 {
                return acc;
            }
            let hi = x.min(x1);
            let y_hi = self.y[k] + (self.y[k + 1] - self.y[k]) * (hi - x0) / (x1 - x0);
            acc += 0.5 * (self.y[k] + y_hi) * (hi - x0);
            if x <= x1 {
                return acc;
            }
        }
        acc + (x - self.x[n - 1]) * self.y[n - 1]
    }

    /// Exact cell averages of the interpolant.
    pub fn cell_averages(&self, grid: &Grid) -> Vec<f64> {
        let dx = grid.dx();
        let nodes: Vec<f64> = grid.nodes().iter().map(|&x| self.integral_to(x)).collect();
        nodes.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UKind {
    /// `2M max(x + delta - 1, 0) / delta^2`.
    PaperRamp {
        delta: f64,
    },
    Constant,
    GaussianBump {
        center: f64,
        width: f64,
    },
    /// Two Gaussians; `fraction` of the mass sits in the first.
    TwoBump {
        centers: (f64, f64),
        width: f64,
        fraction: f64,
    },
    FromFile(Profile),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VKind {
    Zero,
    /// Coefficients of `cos(k pi x)`, `k = 1, 2, ...`.
    CosineModes(Vec<f64>),
    FromFile(Profile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub u: UKind,
    pub v: VKind,
}

impl InitialSpec {
    pub fn paper_ramp(delta: f64) -> Self {
        Self {
            u: UKind::PaperRamp { delta },
            v: VKind::Zero,
        }
    }
}

/// Exact cell averages of `2M max(x + delta - 1, 0) / delta^2`, rescaled so
/// that the discrete mass is exactly `M`.
pub fn paper_ramp(mass: f64, delta: f64, grid: &Grid) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    // antiderivative M max(x + delta - 1, 0)^2 / delta^2
    let prim = |x: f64| {
        let s = (x + delta - 1.0).max(0.0);
        mass * s * s / (delta * delta)
    };
    let dx = grid.dx();
    let u: Vec<f64> = (0..grid.n())
        .map(|i| (prim(grid.node(i + 1)) - prim(grid.node(i))) / dx)
        .collect();
    normalize(u, mass, grid)
}

/// Closed-form `m_q(0)` for the ramp obtained by integrating
/// `U(x) = M (x + delta - 1)^2 / delta^2` directly.
pub fn ramp_mq_integrated(mass: f64, delta: f64, q: f64) -> f64 {
    mass.powf(q) * delta / (q * (2.0 * q + 1.0))
}

/// The alternative closed form `(2M)^q delta / (2q + 1)`; reported for
/// comparison only, it does not match direct integration.
pub fn ramp_mq_alternative(mass: f64, delta: f64, q: f64) -> f64 {
    (2.0 * mass).powf(q) * delta / (2.0 * q + 1.0)
}

fn normalize(mut u: Vec<f64>, mass: f64, grid: &Grid) -> Result<Vec<f64>> {
    let total = grid.integrate(&u);
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidParameter(
            "density profile has no positive mass".into(),
        ));
    }
    let scale = mass / total;
    for x in &mut u {
        *x *= scale;
    }
    Ok(u)
}

fn gaussian_cells(center: f64, width: f64, grid: &Grid) -> Vec<f64> {
    let f = |x: f64| (-(x - center).powi(2) / (2.0 * width * width)).exp();
    (0..grid.n())
        .map(|i| gauss_legendre8(&f, grid.node(i), grid.node(i + 1)) / grid.dx())
        .collect()
}

fn build_u(kind: &UKind, mass: f64, grid: &Grid) -> Result<Vec<f64>> {
    match kind {
        UKind::PaperRamp { delta } => paper_ramp(mass, *delta, grid),
        UKind::Constant => Ok(vec![mass; grid.n()]),
        UKind::GaussianBump { center, width } => {
            if !(*width > 0.0) {
                return Err(Error::InvalidParameter("bump width must be > 0".into()));
            }
            normalize(gaussian_cells(*center, *width, grid), mass, grid)
        }
        UKind::TwoBump {
            centers,
            width,
            fraction,
        } => {
            if !(*width > 0.0 && (0.0..=1.0).contains(fraction)) {
                return Err(Error::InvalidParameter(
                    "two-bump needs width > 0, fraction in [0, 1]".into(),
                ));
            }
            let a = normalize(
                gaussian_cells(centers.0, *width, grid),
                fraction * mass,
                grid,
            );
            let b = normalize(
                gaussian_cells(centers.1, *width, grid),
                (1.0 - fraction) * mass,
                grid,
            );
            match (a, b) {
                (Ok(a), Ok(b)) => Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
                (Ok(a), Err(_)) => Ok(a),
                (Err(_), Ok(b)) => Ok(b),
                (Err(e), Err(_)) => Err(e),
            }
        }
        UKind::FromFile(profile) => {
            let u = profile.cell_averages(grid);
            if let Some((cell, &value)) = u.iter().enumerate().find(|(_, x)| **x < 0.0) {
                return Err(Error::NegativeDensity { cell, value });
            }
            normalize(u, mass, grid)
        }
    }
}

fn build_v(kind: &VKind, grid: &Grid) -> Vec<f64> {
    match kind {
        VKind::Zero => vec![0.0; grid.n()],
        VKind::CosineModes(coeffs) => (0..grid.n())
            .map(|i| {
                let (a, b) = (grid.node(i), grid.node(i + 1));
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let w = (k + 1) as f64 * PI;
                        c * ((w * b).sin() - (w * a).sin()) / (w * grid.dx())
                    })
                    .sum()
            })
            .collect(),
        VKind::FromFile(profile) => profile.cell_averages(grid),
    }
}

/// Builds `(u0, v0)`, normalises the mass to `M`, projects `v0` to mean zero
/// and validates the result.
pub fn make_initial(spec: &InitialSpec, params: &Params, grid: &Grid) -> Result<State> {
    let u = build_u(&spec.u, params.mass, grid)?;
    let v = build_v(&spec.v, grid);
    validate_initial(&u, &v, params, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_ramp_is_linear() {
        let g = Grid::new(16).unwrap();
        let u = paper_ramp(1.5, 1.0, &g).unwrap();
        for (i, x) in u.iter().enumerate() {
            assert!((x - 3.0 * g.center(i)).abs() < 1e-13);
        }
    }

    #[test]
    fn ramp_mass_is_exact_for_any_delta() {
        for n in [4, 37, 1024] {
            let g = Grid::new(n).unwrap();
            for delta in [1.0, 0.5, 0.013, 1e-4] {
                let u = paper_ramp(10.0, delta, &g).unwrap();
                assert!((g.integrate(&u) - 10.0).abs() < 1e-12);
                assert!(u.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn half_ramp_shape() {
        let g = Grid::new(8).unwrap();
        let u = paper_ramp(1.0, 0.5, &g).unwrap();
        assert!(u[..4].iter().all(|&x| x == 0.0));
        // slope 8 from x = 0.5; last cell average is 8 * (0.9375 - 0.5)
        assert!((u[7] - 3.5).abs() < 1e-13);
        assert!(paper_ramp(1.0, 0.0, &g).is_err());
        assert!(paper_ramp(1.0, 1.5, &g).is_err());
    }

    #[test]
    fn make_initial_constant_and_cosine() {
        let g = Grid::new(32).unwrap();
        let p = Params::new(1.0, 1.0, 0.0, 2.0).unwrap();
        let spec = InitialSpec {
            u: UKind::Constant,
            v: VKind::Zero,
        };
        let s = make_initial(&spec, &p, &g).unwrap();
        assert_eq!(s.u, vec![2.0; 32]);
        assert!(s.v.iter().all(|&x| x == 0.0));
        let spec = InitialSpec {
            u: UKind::Constant,
            v: VKind::CosineModes(vec![0.1]),
        };
        let s = make_initial(&spec, &p, &g).unwrap();
        assert!(s.v_mean(&g).abs() < 1e-16);
        for (i, v) in s.v.iter().enumerate() {
            assert!((v - 0.1 * (PI * g.center(i)).cos()).abs() < 1e-3);
        }
    }

    #[test]
    fn bumps_are_normalised() {
        let g = Grid::new(128).unwrap();
        let p = Params::new(1.0, 1.0, 0.0, 3.0).unwrap();
        for u in [
            UKind::GaussianBump {
                center: 0.3,
                width: 0.05,
            },
            UKind::TwoBump {
                centers: (0.2, 0.8),
                width: 0.05,
                fraction: 0.25,
            },
        ] {
            let s = make_initial(&InitialSpec { u, v: VKind::Zero }, &p, &g).unwrap();
            assert!((s.mass(&g) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_from_csv() {
        let text = "x,value\n0,0\n1,2\n";
        let prof = Profile::from_reader(text.as_bytes()).unwrap();
        let g = Grid::new(4).unwrap();
        let avg = prof.cell_averages(&g);
        for (i, a) in avg.iter().enumerate() {
            assert!((a - 2.0 * g.center(i)).abs() < 1e-14);
        }
        let p = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let spec = InitialSpec {
            u: UKind::FromFile(prof),
            v: VKind::Zero,
        };
        assert!((make_initial(&spec, &p, &g).unwrap().mass(&g) - 1.0).abs() < 1e-14);
        assert!(Profile::from_reader("x,value\n0,1\n0,2\n".as_bytes()).is_err());
        assert!(Profile::from_reader("x,value\n0,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn ramp_closed_forms_disagree() {
        let (m, d, q) = (1.0, 0.5, 2.0);
        assert!((ramp_mq_integrated(m, d, q) - 0.05).abs() < 1e-15);
        assert!((ramp_mq_alternative(m, d, q) - 0.4).abs() < 1e-15);
    }
}
