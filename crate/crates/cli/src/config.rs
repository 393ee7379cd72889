//! Run configuration: flat `section.key = value` text.
//!
//! ```text
//! # comments start with '#'
//! params.M = 10.0
//! diffusion.kind = power-law
//! initial.u = paper-ramp
//! initial.delta = 0.01
//! ```
//!
//! Unknown keys, duplicate keys and keys that do not apply to the chosen
//! kind are rejected, so `parse -> serialize -> parse` is the identity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use kslab::diffusion::Tabulated;
use kslab::initial::Profile;
use kslab::{
    DecayBound, DiagnosticsConfig, DiffusionModel, Grid, InitialSpec, Params, SolverConfig, UKind,
    VKind, VSolver,
};

#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionSpec {
    PowerLaw {
        c1: f64,
        p: f64,
    },
    Constant {
        c: f64,
    },
    Tabulated {
        file: String,
        bound: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum UInit {
    PaperRamp {
        delta: f64,
    },
    Constant,
    GaussianBump {
        center: f64,
        width: f64,
    },
    TwoBump {
        centers: (f64, f64),
        width: f64,
        fraction: f64,
    },
    FromFile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VInit {
    Zero,
    CosineModes(Vec<f64>),
    FromFile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub cfl_safety: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Defaults to `1e6 M`.
    pub blowup_threshold: Option<f64>,
    /// Defaults to implicit for `eps > 0` and elliptic for `eps = 0`.
    pub v_solver: Option<VSolver>,
    pub concentration_fraction: f64,
    pub growth_window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsBlock {
    pub qs: Vec<f64>,
    pub output_stride: usize,
    pub track_subsolution: bool,
    pub subsolution_tol: f64,
    pub csv: String,
    pub state_csv: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyBlock {
    pub q: f64,
    /// Scan a geometric grid of exponents instead of using `q` alone.
    pub scan: bool,
    /// Attach a certificate to `simulate` summaries.
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub scale: Scale,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.from],
            n => (0..n)
                .map(|k| {
                    let s = k as f64 / (n - 1) as f64;
                    match self.scale {
                        Scale::Linear => self.from + s * (self.to - self.from),
                        Scale::Geometric => self.from * (self.to / self.from).powf(s),
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyBlock {
    pub ns: Vec<usize>,
    pub t_end: f64,
    /// Refinement runs use `dt = dt_factor * dx^2`.
    pub dt_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub diffusion: DiffusionSpec,
    pub n: usize,
    pub solver: SolverBlock,
    pub u0: UInit,
    pub v0: VInit,
    pub diagnostics: DiagnosticsBlock,
    pub certify: CertifyBlock,
    pub sweep: Vec<SweepAxis>,
    pub sweep_simulate: bool,
    pub verify: VerifyBlock,
    /// Directory that relative file paths are resolved against.
    pub base_dir: PathBuf,
}

/// Ordered `key = value` pairs, as read from or written to text.
pub type Pairs = Vec<(String, String)>;

pub fn parse_pairs(text: &str) -> Result<Pairs> {
    let mut pairs: Pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            bail!("line {}: malformed key `{key}`", lineno + 1);
        }
        if pairs.iter().any(|(k, _)| k == key) {
            bail!("line {}: duplicate key `{key}`", lineno + 1);
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

struct Table {
    values: BTreeMap<String, String>,
}

impl Table {
    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        self.f64_opt(key).map(|v| v.unwrap_or(default))
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|s| {
                s.parse::<f64>()
                    .with_context(|| format!("{key}: `{s}` is not a number"))
            })
            .transpose()
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            Some(s) => s
                .parse()
                .with_context(|| format!("{key}: `{s}` is not a non-negative integer")),
            None => Ok(default),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            Some(s) => s
                .parse()
                .with_context(|| format!("{key}: `{s}` is not true/false")),
            None => Ok(default),
        }
    }

    fn string_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key)
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .with_context(|| format!("{key}: `{t}` is not a number"))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| fmt_f64(*x))
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: RunConfig = text
            .parse()
            .with_context(|| format!("in {}", path.display()))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn from_pairs(pairs: &Pairs) -> Result<Self> {
        let mut t = Table {
            values: pairs.iter().cloned().collect(),
        };
        let params = Params::new(
            t.f64_or("params.eps", 1.0)?,
            t.f64_or("params.D", 1.0)?,
            t.f64_or("params.gamma", 0.0)?,
            t.f64_or("params.M", 1.0)?,
        )?;

        let diffusion = match t.string_or("diffusion.kind", "power-law").as_str() {
            "power-law" => DiffusionSpec::PowerLaw {
                c1: t.f64_or("diffusion.c1", 1.0)?,
                p: t.f64_or("diffusion.p", 2.0)?,
            },
            "constant" => DiffusionSpec::Constant {
                c: t.f64_or("diffusion.c1", 1.0)?,
            },
            "tabulated" => {
                let file = t
                    .take("diffusion.file")
                    .ok_or_else(|| anyhow!("diffusion.file is required"))?;
                let bound = match (t.f64_opt("diffusion.c1")?, t.f64_opt("diffusion.p")?) {
                    (Some(c1), Some(p)) => Some((c1, p)),
                    (None, None) => None,
                    _ => bail!(
                        "tabulated diffusion needs both diffusion.c1 and diffusion.p, or neither"
                    ),
                };
                DiffusionSpec::Tabulated { file, bound }
            }
            other => bail!("diffusion.kind: unknown kind `{other}`"),
        };

        let n = t.usize_or("grid.n", 256)?;
        Grid::new(n)?;

        let defaults = SolverConfig::for_mass(params.mass, 1.0);
        let solver = SolverBlock {
            cfl_safety: t.f64_or("solver.cfl_safety", defaults.cfl_safety)?,
            dt_init: t.f64_or("solver.dt_init", defaults.dt_init)?,
            dt_min: t.f64_or("solver.dt_min", defaults.dt_min)?,
            dt_max: t.f64_or("solver.dt_max", defaults.dt_max)?,
            t_end: t.f64_or("solver.t_end", defaults.t_end)?,
            blowup_threshold: t.f64_opt("solver.blowup_threshold")?,
            v_solver: t
                .take("solver.v_solver")
                .map(|s| s.parse::<VSolver>())
                .transpose()?,
            concentration_fraction: t.f64_or(
                "solver.concentration_fraction",
                defaults.concentration_fraction,
            )?,
            growth_window: t.usize_or("solver.growth_window", defaults.growth_window)?,
        };

        let u0 = match t.string_or("initial.u", "constant").as_str() {
            "paper-ramp" => UInit::PaperRamp {
                delta: t.f64_or("initial.delta", 0.1)?,
            },
            "constant" => UInit::Constant,
            "gaussian-bump" => UInit::GaussianBump {
                center: t.f64_or("initial.center", 0.5)?,
                width: t.f64_or("initial.width", 0.1)?,
            },
            "two-bump" => {
                let centers = t
                    .list("initial.centers")?
                    .unwrap_or_else(|| vec![0.25, 0.75]);
                let [a, b] = centers[..] else {
                    bail!("initial.centers needs exactly two values")
                };
                UInit::TwoBump {
                    centers: (a, b),
                    width: t.f64_or("initial.width", 0.1)?,
                    fraction: t.f64_or("initial.fraction", 0.5)?,
                }
            }
            "from-file" => UInit::FromFile(
                t.take("initial.u_file")
                    .ok_or_else(|| anyhow!("initial.u_file is required"))?,
            ),
            other => bail!("initial.u: unknown kind `{other}`"),
        };
        let v0 = match t.string_or("initial.v", "zero").as_str() {
            "zero" => VInit::Zero,
            "cosine-modes" => VInit::CosineModes(t.list("initial.v_modes")?.unwrap_or_default()),
            "from-file" => VInit::FromFile(
                t.take("initial.v_file")
                    .ok_or_else(|| anyhow!("initial.v_file is required"))?,
            ),
            other => bail!("initial.v: unknown kind `{other}`"),
        };

        let diagnostics = DiagnosticsBlock {
            qs: t.list("diagnostics.q")?.unwrap_or_else(|| vec![3.0]),
            output_stride: t.usize_or("diagnostics.output_stride", defaults.output_stride)?,
            track_subsolution: t.bool_or("diagnostics.track_subsolution", false)?,
            subsolution_tol: t.f64_or("diagnostics.subsolution_tol", 1e-6)?,
            csv: t.string_or("diagnostics.csv", "diagnostics.csv"),
            state_csv: t.string_or("diagnostics.state_csv", "state.csv"),
            summary: t.string_or("diagnostics.summary", "summary.json"),
        };
        let certify = CertifyBlock {
            q: t.f64_or("certify.q", 4.0)?,
            scan: t.bool_or("certify.scan", false)?,
            enabled: t.bool_or("certify.enabled", false)?,
        };

        let mut sweep = Vec::new();
        for axis in 1..=2 {
            let prefix = format!("sweep.{axis}.");
            let Some(key) = t.take(&format!("{prefix}key")) else {
                continue;
            };
            let scale = match t.string_or(&format!("{prefix}scale"), "linear").as_str() {
                "linear" => Scale::Linear,
                "geometric" => Scale::Geometric,
                other => bail!("{prefix}scale: unknown scale `{other}`"),
            };
            let from = t
                .f64_opt(&format!("{prefix}from"))?
                .ok_or_else(|| anyhow!("{prefix}from is required"))?;
            let to = t
                .f64_opt(&format!("{prefix}to"))?
                .ok_or_else(|| anyhow!("{prefix}to is required"))?;
            let points = t.usize_or(&format!("{prefix}points"), 10)?;
            if scale == Scale::Geometric && !(from > 0.0 && to > 0.0) {
                bail!("{prefix}: a geometric range needs positive end points");
            }
            if key.starts_with("sweep.") {
                bail!("{prefix}key: cannot sweep `{key}`");
            }
            sweep.push(SweepAxis {
                key,
                from,
                to,
                points,
                scale,
            });
        }
        let sweep_simulate = t.bool_or("sweep.simulate", false)?;

        let verify = VerifyBlock {
            ns: t
                .list("verify.ns")?
                .unwrap_or_else(|| vec![64.0, 128.0, 256.0, 512.0])
                .into_iter()
                .map(|x| {
                    if x >= 4.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(anyhow!("verify.ns: bad grid size {x}"))
                    }
                })
                .collect::<Result<_>>()?,
            t_end: t.f64_or("verify.t_end", 0.1)?,
            dt_factor: t.f64_or("verify.dt_factor", 0.1)?,
        };

        if let Some(key) = t.values.keys().next() {
            bail!("unknown or inapplicable key `{key}`");
        }
        let config = RunConfig {
            params,
            diffusion,
            n,
            solver,
            u0,
            v0,
            diagnostics,
            certify,
            sweep,
            sweep_simulate,
            verify,
            base_dir: PathBuf::new(),
        };
        config.solver_config()?;
        config.diagnostics_config().validate()?;
        Ok(config)
    }

    pub fn to_pairs(&self) -> Pairs {
        let mut out: Pairs = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let p = &self.params;
        put("params.eps", fmt_f64(p.eps));
        put("params.D", fmt_f64(p.d));
        put("params.gamma", fmt_f64(p.gamma));
        put("params.M", fmt_f64(p.mass));
        match &self.diffusion {
            DiffusionSpec::PowerLaw { c1, p } => {
                put("diffusion.kind", "power-law".into());
                put("diffusion.c1", fmt_f64(*c1));
                put("diffusion.p", fmt_f64(*p));
            }
            DiffusionSpec::Constant { c } => {
                put("diffusion.kind", "constant".into());
                put("diffusion.c1", fmt_f64(*c));
            }
            DiffusionSpec::Tabulated { file, bound } => {
                put("diffusion.kind", "tabulated".into());
                put("diffusion.file", file.clone());
                if let Some((c1, p)) = bound {
                    put("diffusion.c1", fmt_f64(*c1));
                    put("diffusion.p", fmt_f64(*p));
                }
            }
        }
        put("grid.n", self.n.to_string());
        let s = &self.solver;
        put("solver.cfl_safety", fmt_f64(s.cfl_safety));
        put("solver.dt_init", fmt_f64(s.dt_init));
        put("solver.dt_min", fmt_f64(s.dt_min));
        put("solver.dt_max", fmt_f64(s.dt_max));
        put("solver.t_end", fmt_f64(s.t_end));
        if let Some(b) = s.blowup_threshold {
            put("solver.blowup_threshold", fmt_f64(b));
        }
        if let Some(v) = s.v_solver {
            put("solver.v_solver", v.as_str().into());
        }
        put(
            "solver.concentration_fraction",
            fmt_f64(s.concentration_fraction),
        );
        put("solver.growth_window", s.growth_window.to_string());
        match &self.u0 {
            UInit::PaperRamp { delta } => {
                put("initial.u", "paper-ramp".into());
                put("initial.delta", fmt_f64(*delta));
            }
            UInit::Constant => put("initial.u", "constant".into()),
            UInit::GaussianBump { center, width } => {
                put("initial.u", "gaussian-bump".into());
                put("initial.center", fmt_f64(*center));
                put("initial.width", fmt_f64(*width));
            }
            UInit::TwoBump {
                centers,
                width,
                fraction,
            } => {
                put("initial.u", "two-bump".into());
                put("initial.centers", fmt_list(&[centers.0, centers.1]));
                put("initial.width", fmt_f64(*width));
                put("initial.fraction", fmt_f64(*fraction));
            }
            UInit::FromFile(f) => {
                put("initial.u", "from-file".into());
                put("initial.u_file", f.clone());
            }
        }
        match &self.v0 {
            VInit::Zero => put("initial.v", "zero".into()),
            VInit::CosineModes(m) => {
                put("initial.v", "cosine-modes".into());
                put("initial.v_modes", fmt_list(m));
            }
            VInit::FromFile(f) => {
                put("initial.v", "from-file".into());
                put("initial.v_file", f.clone());
            }
        }
        let d = &self.diagnostics;
        put("diagnostics.q", fmt_list(&d.qs));
        put("diagnostics.output_stride", d.output_stride.to_string());
        put(
            "diagnostics.track_subsolution",
            d.track_subsolution.to_string(),
        );
        put("diagnostics.subsolution_tol", fmt_f64(d.subsolution_tol));
        put("diagnostics.csv", d.csv.clone());
        put("diagnostics.state_csv", d.state_csv.clone());
        put("diagnostics.summary", d.summary.clone());
        put("certify.q", fmt_f64(self.certify.q));
        put("certify.scan", self.certify.scan.to_string());
        put("certify.enabled", self.certify.enabled.to_string());
        for (k, axis) in self.sweep.iter().enumerate() {
            let prefix = format!("sweep.{}.", k + 1);
            put(&format!("{prefix}key"), axis.key.clone());
            put(&format!("{prefix}from"), fmt_f64(axis.from));
            put(&format!("{prefix}to"), fmt_f64(axis.to));
            put(&format!("{prefix}points"), axis.points.to_string());
            let scale = match axis.scale {
                Scale::Linear => "linear",
                Scale::Geometric => "geometric",
            };
            put(&format!("{prefix}scale"), scale.into());
        }
        put("sweep.simulate", self.sweep_simulate.to_string());
        put(
            "verify.ns",
            self.verify
                .ns
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", "),
        );
        put("verify.t_end", fmt_f64(self.verify.t_end));
        put("verify.dt_factor", fmt_f64(self.verify.dt_factor));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// A copy with `key` set to `value`, re-validated as a whole.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self> {
        let mut pairs = self.to_pairs();
        let formatted = if key == "grid.n"
            || key.ends_with("output_stride")
            || key.ends_with("growth_window")
        {
            if value < 0.0 || value.fract() != 0.0 {
                bail!("{key} = {value} is not an integer");
            }
            (value as usize).to_string()
        } else {
            fmt_f64(value)
        };
        match pairs.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = formatted,
            None => pairs.push((key.to_string(), formatted)),
        }
        let mut next = Self::from_pairs(&pairs)?;
        next.base_dir = self.base_dir.clone();
        Ok(next)
    }

    fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n).expect("validated on parse")
    }

    pub fn model(&self) -> Result<DiffusionModel> {
        Ok(match &self.diffusion {
            DiffusionSpec::PowerLaw { c1, p } => DiffusionModel::power_law(*c1, *p)?,
            DiffusionSpec::Constant { c } => DiffusionModel::constant(*c)?,
            DiffusionSpec::Tabulated { file, bound } => {
                let path = self.resolve(file);
                let reader =
                    File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                let model = DiffusionModel::tabulated(Tabulated::from_reader(reader)?);
                match bound {
                    Some((c1, p)) => model.with_bound(DecayBound::new(*c1, *p)?),
                    None => model,
                }
            }
        })
    }

    fn profile(&self, file: &str) -> Result<Profile> {
        let path = self.resolve(file);
        let reader = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Profile::from_reader(reader)?)
    }

    pub fn initial_spec(&self) -> Result<InitialSpec> {
        let u = match &self.u0 {
            UInit::PaperRamp { delta } => UKind::PaperRamp { delta: *delta },
            UInit::Constant => UKind::Constant,
            UInit::GaussianBump { center, width } => UKind::GaussianBump {
                center: *center,
                width: *width,
            },
            UInit::TwoBump {
                centers,
                width,
                fraction,
            } => UKind::TwoBump {
                centers: *centers,
                width: *width,
                fraction: *fraction,
            },
            UInit::FromFile(f) => UKind::FromFile(self.profile(f)?),
        };
        let v = match &self.v0 {
            VInit::Zero => VKind::Zero,
            VInit::CosineModes(m) => VKind::CosineModes(m.clone()),
            VInit::FromFile(f) => VKind::FromFile(self.profile(f)?),
        };
        Ok(InitialSpec { u, v })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let mut c = SolverConfig::for_mass(self.params.mass, s.t_end);
        c.cfl_safety = s.cfl_safety;
        c.dt_init = s.dt_init;
        c.dt_min = s.dt_min;
        c.dt_max = s.dt_max;
        if let Some(b) = s.blowup_threshold {
            c.blowup_threshold = b;
        }
        c.v_solver = s.v_solver.unwrap_or(if self.params.eps > 0.0 {
            VSolver::Implicit
        } else {
            VSolver::Elliptic
        });
        c.output_stride = self.diagnostics.output_stride;
        c.concentration_fraction = s.concentration_fraction;
        c.growth_window = s.growth_window;
        c.validate(&self.params)?;
        Ok(c)
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            qs: self.diagnostics.qs.clone(),
            track_subsolution: self.diagnostics.track_subsolution,
            subsolution_tol: self.diagnostics.subsolution_tol,
        }
    }
}

impl std::str::FromStr for RunConfig {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }
}
