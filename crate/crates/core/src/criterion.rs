//! Finite-time blow-up certificates.
//!
//! With `kappa = c1 (q-1) q^{(q-2)/q} D / ((p-1) M^{p-1})`:
//!
//! ```text
//! F(z1, z2)      = c1 (1 + M) + M^2/(2D) + z1 + M z2 + (D + gamma)/2 z2^2
//! P_q(z1,z2,z3)  = (1 + gamma/D + gamma z2/M + M^{q-2} z3/(4qD)) F
//!                  + kappa F^{(q-2)/q} - M^q/(q(q+1))
//! E(z)           = (1 + gamma/D + gamma |v0|_{H1}/M + eps M^{q-1}/(4qD)) z
//!                  + kappa z^{(q-2)/q} - M^q/(q(q+1))
//! ```
//!
//! `P_q(m_q(0), |v0|_{H1}, eps M) < 0` or `E(m_q(0) + L(u0, v0) + M^2/(2D)) < 0`
//! guarantees blow-up in finite time. Since `X = m_q + L + M^2/(2D)` obeys
//! `X' <= (M/D) E(X)` and `E` is increasing, `X0 D / (M |E(X0)|)` bounds the
//! blow-up time from above.

use serde::Serialize;

use crate::diagnostics::{cumulative, h1_norm, liapunov, mq};
use crate::diffusion::{
    check_primitive_bound, default_samples, DecayBound, DiffusionModel, EntropyTable,
};
use crate::error::{Error, Result};
use crate::initial::{make_initial, ramp_mq_alternative, ramp_mq_integrated, InitialSpec, UKind};
use crate::model::{Grid, Params};

/// Refinement factor for the second `m_q(0)` quadrature.
pub const REFINEMENT: usize = 16;
/// Largest relative disagreement between the two `m_q(0)` values.
pub const MQ_AGREEMENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateQuery {
    pub params: Params,
    pub bound: DecayBound,
    pub q: f64,
    /// `m_q(0)`
    pub z1: f64,
    /// `|v0|_{H1}`
    pub z2: f64,
    /// `eps M`
    pub z3: f64,
}

impl CertificateQuery {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        check_q(self.q, &self.bound)?;
        if !(self.z1 >= 0.0 && self.z2 >= 0.0 && self.z3 >= 0.0) {
            return Err(Error::InvalidParameter("z1, z2, z3 must be >= 0".into()));
        }
        Ok(())
    }

    pub fn pq(&self) -> Result<f64> {
        pq_eval(self.z1, self.z2, self.z3, self.q, &self.params, &self.bound)
    }
}

/// Admissible exponents: `q > 2`, finite, and `q <= 2/(2-p)`.
pub fn check_q(q: f64, bound: &DecayBound) -> Result<()> {
    let q_max = bound.q_max();
    if !(q > 2.0 && q.is_finite() && q <= q_max * (1.0 + 1e-12)) {
        return Err(Error::QOutOfRange { q, q_max });
    }
    Ok(())
}

/// `F(z1, z2)`.
pub fn f_eval(z1: f64, z2: f64, params: &Params, c1: f64) -> f64 {
    let (m, d, g) = (params.mass, params.d, params.gamma);
    c1 * (1.0 + m) + m * m / (2.0 * d) + z1 + m * z2 + 0.5 * (d + g) * z2 * z2
}

/// `kappa = c1 (q-1) q^{(q-2)/q} D / ((p-1) M^{p-1})`.
pub fn power_coefficient(q: f64, params: &Params, bound: &DecayBound) -> f64 {
    bound.c1 * (q - 1.0) * q.powf((q - 2.0) / q) * params.d
        / ((bound.p - 1.0) * params.mass.powf(bound.p - 1.0))
}

/// `M^q / (q (q+1))`.
pub fn sink(q: f64, params: &Params) -> f64 {
    params.mass.powf(q) / (q * (q + 1.0))
}

/// The three pieces of `P_q` or `E`: `coeff * z + kappa z^{(q-2)/q} - sink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateTerms {
    /// Argument the functional is applied to (`F` for `P_q`, `X0` for `E`).
    pub argument: f64,
    pub linear_coefficient: f64,
    pub linear: f64,
    pub power: f64,
    pub sink: f64,
}

impl CertificateTerms {
    pub fn value(&self) -> f64 {
        self.linear + self.power - self.sink
    }

    fn build(
        argument: f64,
        linear_coefficient: f64,
        q: f64,
        params: &Params,
        bound: &DecayBound,
    ) -> Self {
        Self {
            argument,
            linear_coefficient,
            linear: linear_coefficient * argument,
            power: power_coefficient(q, params, bound) * argument.powf((q - 2.0) / q),
            sink: sink(q, params),
        }
    }
}

pub fn pq_terms(
    z1: f64,
    z2: f64,
    z3: f64,
    q: f64,
    params: &Params,
    bound: &DecayBound,
) -> Result<CertificateTerms> {
    check_q(q, bound)?;
    let (m, d, g) = (params.mass, params.d, params.gamma);
    let f = f_eval(z1, z2, params, bound.c1);
    let coeff = 1.0 + g / d + g / m * z2 + m.powf(q - 2.0) / (4.0 * q * d) * z3;
    Ok(CertificateTerms::build(f, coeff, q, params, bound))
}

/// `P_q(z1, z2, z3)`.
pub fn pq_eval(
    z1: f64,
    z2: f64,
    z3: f64,
    q: f64,
    params: &Params,
    bound: &DecayBound,
) -> Result<f64> {
    Ok(pq_terms(z1, z2, z3, q, params, bound)?.value())
}

pub fn e_terms(
    z: f64,
    q: f64,
    params: &Params,
    bound: &DecayBound,
    v0_h1: f64,
) -> CertificateTerms {
    let (m, d, g, eps) = (params.mass, params.d, params.gamma, params.eps);
    let coeff = 1.0 + g / d + g / m * v0_h1 + eps * m.powf(q - 1.0) / (4.0 * q * d);
    CertificateTerms::build(z, coeff, q, params, bound)
}

/// `E(z)` for `z >= 0`.
pub fn e_eval(z: f64, q: f64, params: &Params, bound: &DecayBound, v0_h1: f64) -> f64 {
    e_terms(z, q, params, bound, v0_h1).value()
}

/// Upper bound `X0 D / (M |E(X0)|)` on the blow-up time.
pub fn blowup_bound(
    x0: f64,
    q: f64,
    params: &Params,
    bound: &DecayBound,
    v0_h1: f64,
) -> Result<f64> {
    if !(x0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("X0 = {x0} must be >= 0")));
    }
    let e = e_eval(x0, q, params, bound, v0_h1);
    if !(e < 0.0) {
        return Err(Error::NotCertified(e));
    }
    Ok(x0 * params.d / (params.mass * e.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedBlowup,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CertifiedBlowup => "certified-blowup",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Evaluated certificate for one initial datum and exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub params: Params,
    pub c1: f64,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    /// `m_q(0)` on the simulation grid.
    pub mq0: f64,
    /// `m_q(0)` on the grid refined by [`REFINEMENT`].
    pub mq0_refined: f64,
    /// Direct-integration closed form, for the ramp only.
    pub mq0_ramp_integrated: Option<f64>,
    /// Alternative closed form `(2M)^q delta / (2q+1)`, for the ramp only.
    pub mq0_ramp_alternative: Option<f64>,
    pub v0_h1: f64,
    pub eps_m: f64,
    pub liapunov0: f64,
    #[serde(rename = "X0")]
    pub x0: f64,
    #[serde(rename = "F_val")]
    pub f_val: f64,
    #[serde(rename = "Pq_val")]
    pub pq_val: f64,
    #[serde(rename = "E_at_X0")]
    pub e_at_x0: f64,
    pub pq_terms: CertificateTerms,
    pub e_terms: CertificateTerms,
    pub verdict: Verdict,
    #[serde(rename = "T_star")]
    pub t_star: Option<f64>,
}

/// Checks that `model` declares a decay bound and that the bound, the entropy
/// majorant and the primitive bound hold on a sample set.
pub fn certifiable_bound(model: &DiffusionModel, table: &EntropyTable) -> Result<DecayBound> {
    let bound = model
        .bound
        .ok_or_else(|| Error::ModelNotCertifiable("diffusivity declares no (c1, p)".into()))?;
    let samples = default_samples(1e4);
    let wrap = |e: Error| Error::ModelNotCertifiable(e.to_string());
    table.check_b_bound(&samples).map_err(wrap)?;
    check_primitive_bound(model, &samples).map_err(wrap)?;
    Ok(bound)
}

/// Evaluates both certificate routes for the initial data described by `spec`.
pub fn certify(
    spec: &InitialSpec,
    params: &Params,
    model: &DiffusionModel,
    q: f64,
    grid: &Grid,
) -> Result<Certificate> {
    let table = EntropyTable::new(model);
    let bound = certifiable_bound(model, &table)?;
    check_q(q, &bound)?;
    params.validate()?;

    let state = make_initial(spec, params, grid)?;
    let mq0 = mq(&cumulative(&state, grid), q, grid);
    let fine = Grid::new(grid.n() * REFINEMENT)?;
    let fine_state = make_initial(spec, params, &fine)?;
    let mq0_refined = mq(&cumulative(&fine_state, &fine), q, &fine);
    if (mq0 - mq0_refined).abs() > MQ_AGREEMENT * mq0_refined.abs() {
        return Err(Error::ModelNotCertifiable(format!(
            "m_q(0) not resolved: {mq0} on n = {} vs {mq0_refined} on n = {}",
            grid.n(),
            fine.n()
        )));
    }
    let v0_h1 = h1_norm(&state.v, grid);
    let liapunov0 = liapunov(&state, &table, params, grid);
    let x0 = mq0 + liapunov0 + params.mass * params.mass / (2.0 * params.d);
    let eps_m = params.eps * params.mass;

    let pq = pq_terms(mq0, v0_h1, eps_m, q, params, &bound)?;
    let e = e_terms(x0, q, params, &bound, v0_h1);
    let (pq_val, e_at_x0) = (pq.value(), e.value());
    let certified = pq_val < 0.0 || e_at_x0 < 0.0;
    let t_star = if e_at_x0 < 0.0 {
        Some(blowup_bound(x0, q, params, &bound, v0_h1)?)
    } else if pq_val < 0.0 {
        // E(F) = P_q < 0 and X0 <= F
        Some(pq.argument * params.d / (params.mass * pq_val.abs()))
    } else {
        None
    };
    let (ramp_int, ramp_alt) = match spec.u {
        UKind::PaperRamp { delta } => (
            Some(ramp_mq_integrated(params.mass, delta, q)),
            Some(ramp_mq_alternative(params.mass, delta, q)),
        ),
        _ => (None, None),
    };
    Ok(Certificate {
        params: *params,
        c1: bound.c1,
        p: bound.p,
        q,
        n: grid.n(),
        mq0,
        mq0_refined,
        mq0_ramp_integrated: ramp_int,
        mq0_ramp_alternative: ramp_alt,
        v0_h1,
        eps_m,
        liapunov0,
        x0,
        f_val: pq.argument,
        pq_val,
        e_at_x0,
        pq_terms: pq,
        e_terms: e,
        verdict: if certified {
            Verdict::CertifiedBlowup
        } else {
            Verdict::Inconclusive
        },
        t_star,
    })
}

/// Geometric grid of `count` exponents in `(2, min(q_max, q_cap)]`.
pub fn q_grid(bound: &DecayBound, count: usize, q_cap: f64) -> Vec<f64> {
    let hi = bound.q_max().min(q_cap);
    let ratio = (hi / 2.0).powf(1.0 / count as f64);
    (1..=count)
        .map(|k| {
            if k == count {
                hi
            } else {
                2.0 * ratio.powi(k as i32)
            }
        })
        .collect()
}

/// Certifies on a 32-point `q` grid and returns the best certificate: the
/// certified one with the smallest `T_star`, otherwise the one whose `E(X0)`
/// is most negative relative to the sink `M^q/(q(q+1))`.
pub fn certify_q_scan(
    spec: &InitialSpec,
    params: &Params,
    model: &DiffusionModel,
    grid: &Grid,
) -> Result<Certificate> {
    let bound = model
        .bound
        .ok_or_else(|| Error::ModelNotCertifiable("diffusivity declares no (c1, p)".into()))?;
    let mut best: Option<Certificate> = None;
    for q in q_grid(&bound, 32, 64.0) {
        let cert = certify(spec, params, model, q, grid)?;
        let better = match &best {
            None => true,
            Some(b) => match (cert.t_star, b.t_star) {
                (Some(t), Some(tb)) => t < tb,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => cert.e_at_x0 / cert.e_terms.sink < b.e_at_x0 / b.e_terms.sink,
            },
        };
        if better {
            best = Some(cert);
        }
    }
    Ok(best.expect("q grid is non-empty"))
}

/// Bisection for a sign change of `f` on `[lo, hi]` with `f(lo) >= 0 > f(hi)`
/// or `f(lo) < 0 <= f(hi)`, to relative tolerance `rel_tol`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let lo_negative = f(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * mid.abs() {
            break;
        }
        if (f(mid) < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `theta` with `P_q(m_q(0), theta, theta) < 0`, so that
/// `eps M < theta` and `|v0|_{H1} < theta` keep the certificate negative.
pub fn theta_threshold(mq0: f64, params: &Params, bound: &DecayBound, q: f64) -> Result<f64> {
    let at_zero = pq_eval(mq0, 0.0, 0.0, q, params, bound)?;
    if !(at_zero < 0.0) {
        return Err(Error::ConditionA16Fails(at_zero));
    }
    let f = |t: f64| pq_eval(mq0, t, t, q, params, bound).expect("q validated");
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::InvalidParameter("no sign change in theta".into()));
        }
    }
    Ok(bisect(f, 0.0, hi, 1e-9))
}

/// [`theta_threshold`] for the initial density of `spec` on `grid`.
pub fn theta_threshold_for(
    spec: &InitialSpec,
    params: &Params,
    bound: &DecayBound,
    q: f64,
    grid: &Grid,
) -> Result<f64> {
    let state = make_initial(spec, params, grid)?;
    let mq0 = mq(&cumulative(&state, grid), q, grid);
    theta_threshold(mq0, params, bound, q)
}

/// Smallest mass `M*` with `P_q(0, 0, 0) < 0`; `params.mass` is ignored.
pub fn find_critical_mass(bound: &DecayBound, params: &Params, q: f64) -> Result<f64> {
    check_q(q, bound)?;
    let at = |m: f64| {
        let p = Params { mass: m, ..*params };
        pq_eval(0.0, 0.0, 0.0, q, &p, bound).expect("q validated")
    };
    // scan upward geometrically for the first sign change
    let mut lo = 1e-6;
    if at(lo) < 0.0 {
        return Err(Error::InvalidParameter(
            "P_q(0,0,0) negative at tiny mass".into(),
        ));
    }
    let factor = 1.05;
    let mut hi = lo * factor;
    while at(hi) >= 0.0 {
        lo = hi;
        hi *= factor;
        if hi > 1e12 {
            return Err(Error::InvalidParameter(
                "no critical mass below 1e12".into(),
            ));
        }
    }
    Ok(bisect(at, lo, hi, 1e-6))
}
