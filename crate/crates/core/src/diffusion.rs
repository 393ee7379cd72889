//! The diffusivity `a`, its flux primitive `A` (`A' = a`, `A(inf) = 0`) and
//! the entropy density `b` (`b'' = a/r`, `b(1) = b'(1) = 0`).

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, gauss_legendre8};

/// Declared decay bound `0 < a(r) <= c1 (1 + r)^(-p)` with `p` in `(1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    pub c1: f64,
    pub p: f64,
}

impl DecayBound {
    pub fn new(c1: f64, p: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::InvalidParameter(format!("c1 = {c1} must be > 0")));
        }
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "p = {p} must lie in (1, 2]"
            )));
        }
        Ok(Self { c1, p })
    }

    #[inline]
    pub fn majorant(&self, r: f64) -> f64 {
        self.c1 * (1.0 + r).powf(-self.p)
    }

    /// Largest admissible moment exponent `2 / (2 - p)` (infinite for `p = 2`).
    pub fn q_max(&self) -> f64 {
        if self.p >= 2.0 {
            f64::INFINITY
        } else {
            2.0 / (2.0 - self.p)
        }
    }
}

/// Piecewise-linear diffusivity read from `r,a` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    r: Vec<f64>,
    a: Vec<f64>,
    /// `cum[k] = int_{r_0}^{r_k} a`, exact for the linear interpolant.
    cum: Vec<f64>,
}

impl Tabulated {
    pub fn new(r: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if r.len() != a.len() || r.len() < 2 {
            return Err(Error::FileParse("need at least two (r, a) samples".into()));
        }
        if r[0] < 0.0 {
            return Err(Error::FileParse("r must be non-negative".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::FileParse(
                "r column must be strictly increasing".into(),
            ));
        }
        if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::FileParse(
                "a column must be positive and finite".into(),
            ));
        }
        let mut cum = Vec::with_capacity(r.len());
        cum.push(0.0);
        for k in 1..r.len() {
            let seg = 0.5 * (a[k] + a[k - 1]) * (r[k] - r[k - 1]);
            cum.push(cum[k - 1] + seg);
        }
        Ok(Self { r, a, cum })
    }

    /// Parses the two-column text format with mandatory header `r,a`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::FileParse(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "r" || &headers[1] != "a" {
            return Err(Error::FileParse("header must be `r,a`".into()));
        }
        let (mut rs, mut as_) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::FileParse(e.to_string()))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::FileParse(format!("bad number `{s}`: {e}")))
            };
            rs.push(parse(&rec[0])?);
            as_.push(parse(&rec[1])?);
        }
        Self::new(rs, as_)
    }

    fn last(&self) -> usize {
        self.r.len() - 1
    }

    fn segment(&self, r: f64) -> usize {
        // index k with r_k <= r < r_{k+1}
        match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(k) => k.min(self.last() - 1),
            Err(k) => k.saturating_sub(1).min(self.last() - 1),
        }
    }

    fn value(&self, r: f64, tail_p: Option<f64>) -> f64 {
        let n = self.last();
        if r <= self.r[0] {
            return self.a[0];
        }
        if r >= self.r[n] {
            return match tail_p {
                Some(p) => self.a[n] * ((1.0 + self.r[n]) / (1.0 + r)).powf(p),
                None => self.a[n],
            };
        }
        let k = self.segment(r);
        let w = (r - self.r[k]) / (self.r[k + 1] - self.r[k]);
        self.a[k] + w * (self.a[k + 1] - self.a[k])
    }

    /// `int_{r_0}^{r} a` for `r` inside the table (constant extension below).
    fn integral_from_first(&self, r: f64) -> f64 {
        if r <= self.r[0] {
            return -(self.r[0] - r) * self.a[0];
        }
        let k = self.segment(r.min(self.r[self.last()]));
        let ar = self.value(r.min(self.r[self.last()]), None);
        let rr = r.min(self.r[self.last()]);
        self.cum[k] + 0.5 * (self.a[k] + ar) * (rr - self.r[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diffusivity {
    /// `a(r) = c (1 + r)^(-p)`, any `p > 0`.
    PowerLaw {
        c: f64,
        p: f64,
    },
    /// `a(r) = c`.
    Constant {
        c: f64,
    },
    Tabulated(Arc<Tabulated>),
}

/// A diffusivity together with an optional declared decay bound. Only
/// models carrying a bound take part in blow-up certification.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub diffusivity: Diffusivity,
    pub bound: Option<DecayBound>,
}

impl DiffusionModel {
    /// Power law `c (1 + r)^(-p)`. The bound `(c, p)` is declared
    /// automatically when `p` lies in `(1, 2]`.
    pub fn power_law(c: f64, p: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power law needs c > 0, p > 0 (got c = {c}, p = {p})"
            )));
        }
        let bound = DecayBound::new(c, p).ok();
        Ok(Self {
            diffusivity: Diffusivity::PowerLaw { c, p },
            bound,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constant diffusivity {c} must be > 0"
            )));
        }
        Ok(Self {
            diffusivity: Diffusivity::Constant { c },
            bound: None,
        })
    }

    pub fn tabulated(table: Tabulated) -> Self {
        Self {
            diffusivity: Diffusivity::Tabulated(Arc::new(table)),
            bound: None,
        }
    }

    /// Declares (or overrides) the decay bound.
    pub fn with_bound(mut self, bound: DecayBound) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn kind(&self) -> &'static str {
        match self.diffusivity {
            Diffusivity::PowerLaw { .. } => "power-law",
            Diffusivity::Constant { .. } => "constant",
            Diffusivity::Tabulated(_) => "custom-tabulated",
        }
    }

    fn tail_p(&self) -> Option<f64> {
        self.bound.map(|b| b.p)
    }

    /// `a(r)` without the argument check; callers guarantee `r >= 0`.
    #[inline]
    pub fn a(&self, r: f64) -> f64 {
        match &self.diffusivity {
            Diffusivity::PowerLaw { c, p } => {
                if *p == 2.0 {
                    let s = 1.0 + r;
                    c / (s * s)
                } else {
                    c * (1.0 + r).powf(-p)
                }
            }
            Diffusivity::Constant { c } => *c,
            Diffusivity::Tabulated(t) => t.value(r, self.tail_p()),
        }
    }

    pub fn a_eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeArgument(r));
        }
        Ok(self.a(r))
    }

    /// Whether `int^inf a` is finite, i.e. `A` is defined.
    pub fn tail_integrable(&self) -> bool {
        match &self.diffusivity {
            Diffusivity::PowerLaw { p, .. } => *p > 1.0,
            Diffusivity::Constant { .. } => false,
            Diffusivity::Tabulated(_) => self.bound.is_some(),
        }
    }

    /// `A(r) = -int_r^inf a(s) ds`.
    pub fn primitive_a(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeArgument(r));
        }
        if !self.tail_integrable() {
            return Err(Error::TailNotIntegrable);
        }
        Ok(self.flux_primitive(r))
    }

    /// An antiderivative of `a`: equal to `A` when the tail is integrable,
    /// otherwise `int_0^r a`. Only differences enter the fluxes.
    #[inline]
    pub fn flux_primitive(&self, r: f64) -> f64 {
        match &self.diffusivity {
            Diffusivity::PowerLaw { c, p } => {
                let s = 1.0 + r;
                if *p == 2.0 {
                    -c / s
                } else if *p > 1.0 {
                    -c * s.powf(1.0 - p) / (p - 1.0)
                } else if *p == 1.0 {
                    c * s.ln()
                } else if *p == 0.5 {
                    2.0 * c * (s.sqrt() - 1.0)
                } else {
                    c * (s.powf(1.0 - p) - 1.0) / (1.0 - p)
                }
            }
            Diffusivity::Constant { c } => c * r,
            Diffusivity::Tabulated(t) => {
                let n = t.last();
                let rn = t.r[n];
                match self.tail_p() {
                    Some(p) => {
                        let tail_total = t.a[n] * (1.0 + rn) / (p - 1.0);
                        if r >= rn {
                            -t.a[n] * (1.0 + rn).powf(p) * (1.0 + r).powf(1.0 - p) / (p - 1.0)
                        } else {
                            -(t.cum[n] - t.integral_from_first(r)) - tail_total
                        }
                    }
                    None => {
                        let base = t.integral_from_first(0.0);
                        if r >= rn {
                            t.cum[n] + t.a[n] * (r - rn) - base
                        } else {
                            t.integral_from_first(r) - base
                        }
                    }
                }
            }
        }
    }

    /// Checks `a(r) <= c1 (1 + r)^(-p)` on the samples.
    pub fn check_a_bound(&self, samples: &[f64]) -> Result<BoundReport> {
        let bound = self
            .bound
            .ok_or_else(|| Error::ModelNotCertifiable("no declared (c1, p)".into()))?;
        let mut report = BoundReport::new();
        for &r in samples {
            let lhs = self.a_eval(r)?;
            let rhs = bound.majorant(r);
            report.observe(r, lhs, rhs)?;
        }
        Ok(report)
    }
}

/// Outcome of a sampled bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub samples: usize,
    /// Smallest `rhs - lhs` seen (closest approach).
    pub min_margin: f64,
    /// Largest `rhs - lhs` seen.
    pub max_slack: f64,
}

impl BoundReport {
    fn new() -> Self {
        Self {
            samples: 0,
            min_margin: f64::INFINITY,
            max_slack: f64::NEG_INFINITY,
        }
    }

    fn observe(&mut self, r: f64, lhs: f64, rhs: f64) -> Result<()> {
        let tol = 1e-9 * (1.0 + rhs.abs());
        if !(lhs <= rhs + tol) {
            return Err(Error::BoundViolated { r, lhs, rhs });
        }
        self.samples += 1;
        self.min_margin = self.min_margin.min(rhs - lhs);
        self.max_slack = self.max_slack.max(rhs - lhs);
        Ok(())
    }
}

const TABLE_NODES: usize = 2048;
const TABLE_LOG10_MIN: f64 = -6.0;
const TABLE_LOG10_MAX: f64 = 8.0;

/// `b` and `b'` on log-spaced nodes. Values between nodes are completed by
/// a short Gauss-Legendre integral from the nearest anchor (a node or
/// `r = 1`), so `b(1) = b'(1) = 0` holds exactly.
#[derive(Debug, Clone)]
pub struct EntropyTable {
    model: DiffusionModel,
    nodes: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
    /// `b(0)`, the continuous extension.
    b_zero: f64,
}

impl EntropyTable {
    pub fn new(model: &DiffusionModel) -> Self {
        let step = (TABLE_LOG10_MAX - TABLE_LOG10_MIN) / (TABLE_NODES - 1) as f64;
        let nodes: Vec<f64> = (0..TABLE_NODES)
            .map(|k| 10f64.powf(TABLE_LOG10_MIN + step * k as f64))
            .collect();
        // b'(r) = int_1^r a(s)/s ds and int_1^r a(s) ds in the log variable.
        let f1 = |t: f64| model.a(t.exp());
        let f0 = |t: f64| {
            let s = t.exp();
            model.a(s) * s
        };
        let one = nodes.partition_point(|&r| r < 1.0);
        let mut db = vec![0.0; TABLE_NODES];
        let mut b0 = vec![0.0; TABLE_NODES];
        // upward from 1
        let mut prev = 0.0_f64;
        let (mut acc1, mut acc0) = (0.0, 0.0);
        for k in one..TABLE_NODES {
            let t = nodes[k].ln();
            acc1 += gauss_legendre8(&f1, prev, t);
            acc0 += gauss_legendre8(&f0, prev, t);
            db[k] = acc1;
            b0[k] = acc0;
            prev = t;
        }
        // downward from 1
        let (mut prev, mut acc1, mut acc0) = (0.0_f64, 0.0, 0.0);
        for k in (0..one).rev() {
            let t = nodes[k].ln();
            acc1 += gauss_legendre8(&f1, prev, t);
            acc0 += gauss_legendre8(&f0, prev, t);
            db[k] = acc1;
            b0[k] = acc0;
            prev = t;
        }
        let b: Vec<f64> = (0..TABLE_NODES).map(|k| nodes[k] * db[k] - b0[k]).collect();
        // b(0) = -int_1^0 a = int_0^1 a
        let a_lin = |s: f64| model.a(s);
        let b_zero = -(b0[0] - gauss_legendre8(&a_lin, 0.0, nodes[0]));
        Self {
            model: model.clone(),
            nodes,
            b,
            db,
            b_zero,
        }
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    /// `b(r)` for `r >= 0`; negative arguments are treated as 0.
    pub fn b(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        if r == 0.0 {
            return self.b_zero;
        }
        let first = self.nodes[0];
        let last = *self.nodes.last().unwrap();
        if r < first {
            // b(r) = b(r0) - b'(r0)(r0 - r) + int_r^{r0} (s - r) a(s)/s ds
            let ln_r = r.ln();
            let g = |t: f64| {
                let s = t.exp();
                (s - r) * self.model.a(s)
            };
            return self.b[0] - self.db[0] * (first - r) + gauss_legendre8(&g, ln_r, first.ln());
        }
        if r >= last {
            let k = self.nodes.len() - 1;
            return self.b[k] + self.db[k] * (r - last);
        }
        let (anchor, b_a, db_a) = self.anchor(r);
        b_a + db_a * (r - anchor) + self.taylor_remainder(anchor, r)
    }

    /// `b'(r)` for `r > 0`.
    pub fn db(&self, r: f64) -> f64 {
        let last = *self.nodes.last().unwrap();
        if r >= last {
            return *self.db.last().unwrap();
        }
        if r < self.nodes[0] {
            let g = |t: f64| self.model.a(t.exp());
            return self.db[0] - gauss_legendre8(&g, r.ln(), self.nodes[0].ln());
        }
        let (anchor, _, db_a) = self.anchor(r);
        let g = |t: f64| self.model.a(t.exp());
        db_a + gauss_legendre8(&g, anchor.ln(), r.ln())
    }

    fn anchor(&self, r: f64) -> (f64, f64, f64) {
        let k = self.nodes.partition_point(|&x| x <= r).saturating_sub(1);
        let mut best = (self.nodes[k], self.b[k], self.db[k]);
        if k + 1 < self.nodes.len() && (self.nodes[k + 1] - r).abs() < (r - best.0).abs() {
            best = (self.nodes[k + 1], self.b[k + 1], self.db[k + 1]);
        }
        if (r - 1.0).abs() < (r - best.0).abs() {
            best = (1.0, 0.0, 0.0);
        }
        best
    }

    /// `int_anchor^r (r - s) a(s)/s ds`, evaluated in the log variable.
    fn taylor_remainder(&self, anchor: f64, r: f64) -> f64 {
        if anchor == r {
            return 0.0;
        }
        let g = |t: f64| {
            let s = t.exp();
            (r - s) * self.model.a(s)
        };
        gauss_legendre8(&g, anchor.ln(), r.ln())
    }

    /// Checks `b(r) <= c1 (r ln r - r + 1)` on `[0, 1]`,
    /// `b(r) <= c1 (r - 1)/p` on `[1, inf)` and that both are `<= c1 (1 + r)`.
    /// Also checks the decay bound on `a` at the same samples.
    pub fn check_b_bound(&self, samples: &[f64]) -> Result<BoundReport> {
        let bound = self
            .model
            .bound
            .ok_or_else(|| Error::ModelNotCertifiable("no declared (c1, p)".into()))?;
        self.model.check_a_bound(samples)?;
        let mut report = BoundReport::new();
        for &r in samples {
            if r < 0.0 {
                return Err(Error::NegativeArgument(r));
            }
            let inner = if r <= 1.0 {
                let rlnr = if r == 0.0 { 0.0 } else { r * r.ln() };
                bound.c1 * (rlnr - r + 1.0)
            } else {
                bound.c1 * (r - 1.0) / bound.p
            };
            let outer = bound.c1 * (1.0 + r);
            report.observe(r, self.b(r), inner)?;
            if inner > outer + 1e-12 * outer {
                return Err(Error::BoundViolated {
                    r,
                    lhs: inner,
                    rhs: outer,
                });
            }
        }
        Ok(report)
    }
}

/// Checks `0 <= -A(r) r <= c1 r^(2-p) / (p - 1)` on the samples.
pub fn check_primitive_bound(model: &DiffusionModel, samples: &[f64]) -> Result<BoundReport> {
    let bound = model
        .bound
        .ok_or_else(|| Error::ModelNotCertifiable("no declared (c1, p)".into()))?;
    let mut report = BoundReport::new();
    for &r in samples {
        let lhs = -model.primitive_a(r)? * r;
        if lhs < -1e-12 {
            return Err(Error::BoundViolated {
                r,
                lhs: 0.0,
                rhs: lhs,
            });
        }
        let rhs = bound.c1 * r.powf(2.0 - bound.p) / (bound.p - 1.0);
        report.observe(r, lhs, rhs)?;
    }
    Ok(report)
}

/// `A(r)` by quadrature of `-int_r^inf a` in the variable `1 + s = (1 + r) e^t`,
/// where a power tail becomes an exponential. Unit chunks in `t` are summed
/// until negligible and the geometric remainder is added. Used to
/// cross-check the closed forms.
pub fn primitive_by_quadrature(model: &DiffusionModel, r: f64) -> Result<f64> {
    if !model.tail_integrable() {
        return Err(Error::TailNotIntegrable);
    }
    let f = |t: f64| {
        let w = (1.0 + r) * t.exp();
        model.a(w - 1.0) * w
    };
    let mut total: f64 = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..100_000 {
        let chunk = adaptive(
            &f,
            k as f64,
            k as f64 + 1.0,
            1e-16 * total.max(chunk_floor(&f, k)),
        );
        total += chunk;
        if chunk <= 1e-15 * total {
            let ratio = chunk / prev;
            if ratio < 1.0 {
                total += chunk * ratio / (1.0 - ratio);
            }
            return Ok(-total);
        }
        prev = chunk;
    }
    Err(Error::TailNotIntegrable)
}

fn chunk_floor<F: Fn(f64) -> f64>(f: &F, k: usize) -> f64 {
    f(k as f64).abs().max(1e-300)
}

/// Standard sample set on `[0, r_max]`: a uniform and a log-spaced part.
pub fn default_samples(r_max: f64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..=200).map(|k| r_max * k as f64 / 200.0).collect();
    s.extend((0..=200).map(|k| 10f64.powf(-6.0 + (r_max.log10() + 6.0) * k as f64 / 200.0)));
    s.push(1.0);
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}
