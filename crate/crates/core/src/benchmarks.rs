//! Benchmark cases with their analytic data, and the flat `key = value`
//! run configuration shared by config files and command-line flags.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::ConvectiveForm;
use crate::error::{Error, Result};
use crate::mesh::{generate_step_channel, generate_uniform, DomainSpec, Mesh, Point};
use crate::reconstruction::ProjectionFlavor;
use crate::spaces::ElementPair;
use crate::timestepping::{BoundaryCondition, ScalarFn, SchemeConfig, Stepper, VectorFn};

/// Mesh size of the default step channel, chosen so the P2-bubble/P1disc
/// dof count is close to the 22738 of the reference mesh.
pub const STEP_TARGET_H: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseName {
    Gresho,
    Lattice,
    Step,
    Mms,
}

impl CaseName {
    pub const ALL: [CaseName; 4] = [CaseName::Gresho, CaseName::Lattice, CaseName::Step, CaseName::Mms];

    pub fn name(self) -> &'static str {
        match self {
            CaseName::Gresho => "gresho",
            CaseName::Lattice => "lattice",
            CaseName::Step => "step",
            CaseName::Mms => "mms",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CaseName::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown case '{s}' (gresho, lattice, step, mms)")))
    }
}

/// Keys of the run configuration, identical to the long command-line flags.
pub const CONFIG_KEYS: [&str; 14] = [
    "case", "pair", "form", "stepper", "flavor", "nx", "target-h", "dt", "t-end", "nu", "vorticity",
    "vtk-every", "seed", "out",
];

/// A fully resolved run: case defaults with any overrides applied.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRequest {
    pub case: CaseName,
    pub pair: ElementPair,
    pub form: ConvectiveForm,
    pub stepper: Stepper,
    pub flavor: ProjectionFlavor,
    /// Cells per side; unused by the step channel.
    pub nx: usize,
    /// Step channel mesh size; unused elsewhere.
    pub target_h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub nu: f64,
    pub vorticity: bool,
    /// VTK output every k steps, 0 = off.
    pub vtk_every: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunRequest {
    pub fn defaults(case: CaseName) -> Self {
        let base = RunRequest {
            case,
            pair: ElementPair::P2BubbleP1Disc,
            form: ConvectiveForm::ModConv,
            stepper: Stepper::CnPicard1,
            flavor: ProjectionFlavor::L2,
            nx: 48,
            target_h: STEP_TARGET_H,
            dt: 0.01,
            t_end: 10.0,
            nu: 0.0,
            vorticity: false,
            vtk_every: 0,
            seed: 0,
            out: PathBuf::from("out"),
        };
        match case {
            CaseName::Gresho => base,
            CaseName::Lattice => RunRequest {
                nx: 64,
                dt: 0.001,
                nu: 1e-5,
                ..base
            },
            CaseName::Step => RunRequest {
                stepper: Stepper::Bdf2,
                t_end: 80.0,
                nu: 0.001,
                ..base
            },
            CaseName::Mms => RunRequest {
                nx: 16,
                dt: 1e-3,
                t_end: 0.1,
                nu: 1.0,
                ..base
            },
        }
    }

    /// Applies one `key = value` setting. `case` resets everything else to
    /// that case's defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for '{key}': expected {what}"));
        let named = |e: Error| match e {
            Error::Config(m) => Error::Config(format!("invalid value '{value}' for '{key}': {m}")),
            other => other,
        };
        let float = || value.parse::<f64>().map_err(|_| bad("a number"));
        let uint = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
        match key {
            "case" => *self = RunRequest::defaults(value.parse().map_err(named)?),
            "pair" => self.pair = value.parse().map_err(named)?,
            "form" => self.form = value.parse().map_err(named)?,
            "stepper" => self.stepper = value.parse().map_err(named)?,
            "flavor" => self.flavor = value.parse().map_err(named)?,
            "nx" => self.nx = uint()?,
            "target-h" => self.target_h = float()?,
            "dt" => self.dt = float()?,
            "t-end" => self.t_end = float()?,
            "nu" => self.nu = float()?,
            "vorticity" => self.vorticity = value.parse().map_err(|_| bad("true or false"))?,
            "vtk-every" => self.vtk_every = uint()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("a non-negative integer"))?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Value of `key` in config-file syntax; floats use the shortest
    /// representation that parses back to the same bits.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "case" => self.case.to_string(),
            "pair" => self.pair.to_string(),
            "form" => self.form.to_string(),
            "stepper" => self.stepper.to_string(),
            "flavor" => self.flavor.to_string(),
            "nx" => self.nx.to_string(),
            "target-h" => self.target_h.to_string(),
            "dt" => self.dt.to_string(),
            "t-end" => self.t_end.to_string(),
            "nu" => self.nu.to_string(),
            "vorticity" => self.vorticity.to_string(),
            "vtk-every" => self.vtk_every.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        })
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("known key"));
        }
        s
    }

    /// Parses a config file. Blank lines and `#` comments are skipped; a
    /// `case` line, if present, is applied before all other keys.
    pub fn parse_config(text: &str) -> Result<Self> {
        Self::from_pairs(&config_pairs(text)?)
    }

    /// Resolves `key = value` pairs: defaults of the last `case` given (or
    /// Gresho), then every other pair in order.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let mut req = RunRequest::defaults(CaseName::Gresho);
        if let Some((_, v)) = pairs.iter().rfind(|(k, _)| k.as_ref() == "case") {
            req.set("case", v.as_ref())?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k.as_ref() != "case") {
            req.set(k.as_ref(), v.as_ref())?;
        }
        Ok(req)
    }

    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// `key = value` lines of a config file, in order, without resolving them.
pub fn config_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Clone)]
pub struct AnalyticSolution {
    pub velocity: VectorFn,
    pub pressure: Option<ScalarFn>,
}

impl fmt::Debug for AnalyticSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticSolution")
            .field("pressure", &self.pressure.is_some())
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkCase {
    pub request: RunRequest,
    pub domain: DomainSpec,
    pub scheme: SchemeConfig,
    pub exact: Option<AnalyticSolution>,
}

impl BenchmarkCase {
    pub fn new(request: RunRequest) -> Result<Self> {
        let r = &request;
        if r.case != CaseName::Step && r.nx == 0 {
            return Err(Error::Config("nx must be positive".into()));
        }
        let (domain, initial, exact): (DomainSpec, VectorFn, Option<AnalyticSolution>) = match r.case {
            CaseName::Gresho => (
                DomainSpec::gresho_square(r.nx),
                Arc::new(|p, _| gresho_velocity(p)),
                Some(AnalyticSolution {
                    velocity: Arc::new(|p, _| gresho_velocity(p)),
                    pressure: Some(Arc::new(|p, _| gresho_pressure(p))),
                }),
            ),
            CaseName::Lattice => {
                let nu = r.nu;
                (
                    DomainSpec::unit_square(r.nx),
                    Arc::new(|p, _| lattice_velocity(p, 0.0, 0.0)),
                    Some(AnalyticSolution {
                        velocity: Arc::new(move |p, t| lattice_velocity(p, t, nu)),
                        pressure: Some(Arc::new(move |p, t| lattice_pressure(p, t, nu))),
                    }),
                )
            }
            CaseName::Step => (DomainSpec::step_channel(), Arc::new(|p, _| step_inflow(p)), None),
            CaseName::Mms => (
                DomainSpec::unit_square(r.nx),
                Arc::new(|p, _| mms_velocity(p, 0.0)),
                Some(AnalyticSolution {
                    velocity: Arc::new(mms_velocity),
                    pressure: Some(Arc::new(mms_pressure)),
                }),
            ),
        };
        let mut s = SchemeConfig::new(r.pair, r.form, initial);
        s.flavor = r.flavor;
        s.stepper = r.stepper;
        s.dt = r.dt;
        s.t_end = r.t_end;
        s.nu = r.nu;
        s.vorticity = r.vorticity;
        s.exact = exact.as_ref().map(|e| e.velocity.clone());
        s.initial_gradient = match r.case {
            CaseName::Gresho => None,
            CaseName::Lattice => Some(Arc::new(|p, _| lattice_velocity_gradient(p, 0.0, 0.0))),
            CaseName::Step => Some(Arc::new(|p, _| [[0.0, (10.0 - 2.0 * p[1]) / 25.0], [0.0, 0.0]])),
            CaseName::Mms => Some(Arc::new(|p, _| mms_velocity_gradient(p, 0.0))),
        };
        match r.case {
            CaseName::Gresho => s.boundary = [BoundaryCondition::NoPenetration; 4],
            CaseName::Lattice => {
                s.boundary = [BoundaryCondition::Dirichlet; 4];
                s.boundary_data = s.exact.clone();
            }
            CaseName::Step => {
                use BoundaryCondition::*;
                s.boundary = [Dirichlet, DoNothing, NoSlip, NoSlip];
                s.boundary_data = Some(Arc::new(|p, _| step_inflow(p)));
            }
            CaseName::Mms => {
                let nu = r.nu;
                s.boundary = [BoundaryCondition::Dirichlet; 4];
                s.boundary_data = s.exact.clone();
                s.force = Some(Arc::new(move |p, t| mms_force(p, t, nu)));
                s.force_curl = Some(Arc::new(move |p, t| mms_force_curl(p, t, nu)));
            }
        }
        s.validate()?;
        Ok(BenchmarkCase {
            request,
            domain,
            scheme: s,
            exact,
        })
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        let m = match self.request.case {
            CaseName::Step => generate_step_channel(&self.domain, self.request.target_h)?,
            _ => generate_uniform(&self.domain)?,
        };
        Ok(Arc::new(m))
    }
}

/// Case defaults with `key = value` overrides applied in order.
pub fn case_with(name: CaseName, overrides: &[(&str, &str)]) -> Result<BenchmarkCase> {
    let mut r = RunRequest::defaults(name);
    for (k, v) in overrides {
        if *k == "case" {
            return Err(Error::Config("the case cannot be overridden".into()));
        }
        r.set(k, v)?;
    }
    BenchmarkCase::new(r)
}

pub fn case_gresho(overrides: &[(&str, &str)]) -> Result<BenchmarkCase> {
    case_with(CaseName::Gresho, overrides)
}

pub fn case_lattice(overrides: &[(&str, &str)]) -> Result<BenchmarkCase> {
    case_with(CaseName::Lattice, overrides)
}

pub fn case_step(overrides: &[(&str, &str)]) -> Result<BenchmarkCase> {
    case_with(CaseName::Step, overrides)
}

pub fn case_mms(overrides: &[(&str, &str)]) -> Result<BenchmarkCase> {
    case_with(CaseName::Mms, overrides)
}

/// Angular speed profile of the Gresho vortex.
pub fn gresho_speed(r: f64) -> f64 {
    if r < 0.2 {
        5.0 * r
    } else if r < 0.4 {
        2.0 - 5.0 * r
    } else {
        0.0
    }
}

pub fn gresho_velocity(p: Point) -> [f64; 2] {
    let r = p[0].hypot(p[1]);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let s = gresho_speed(r) / r;
    [-s * p[1], s * p[0]]
}

pub fn gresho_pressure(p: Point) -> f64 {
    let r = p[0].hypot(p[1]);
    if r < 0.2 {
        5.0 + 12.5 * r * r
    } else if r < 0.4 {
        9.0 - 4.0 * 0.2f64.ln() + 12.5 * r * r - 20.0 * r + 4.0 * r.ln()
    } else {
        3.0 + 4.0 * 2.0f64.ln()
    }
}

pub fn lattice_velocity(p: Point, t: f64, nu: f64) -> [f64; 2] {
    let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
    let d = (-8.0 * nu * PI * PI * t).exp();
    [d * x.sin() * y.sin(), d * x.cos() * y.cos()]
}

/// `grad[k][j] = d u_k / d x_j` of [`lattice_velocity`].
pub fn lattice_velocity_gradient(p: Point, t: f64, nu: f64) -> [[f64; 2]; 2] {
    let (sx, cx) = (2.0 * PI * p[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * p[1]).sin_cos();
    let d = 2.0 * PI * (-8.0 * nu * PI * PI * t).exp();
    [[d * cx * sy, d * sx * cy], [-d * sx * cy, -d * cx * sy]]
}

pub fn lattice_pressure(p: Point, t: f64, nu: f64) -> f64 {
    let d = (-16.0 * nu * PI * PI * t).exp();
    0.25 * d * ((4.0 * PI * p[0]).cos() - (4.0 * PI * p[1]).cos())
}

pub fn step_inflow(p: Point) -> [f64; 2] {
    [p[1] * (10.0 - p[1]) / 25.0, 0.0]
}

/// Divergence-free manufactured velocity on the unit square, the curl of
/// `-sin(pi x) cos(pi y + t) / pi`.
pub fn mms_velocity(p: Point, t: f64) -> [f64; 2] {
    let (sx, cx) = (PI * p[0]).sin_cos();
    let (sy, cy) = (PI * p[1] + t).sin_cos();
    [sx * sy, cx * cy]
}

/// `grad[k][j] = d u_k / d x_j` of [`mms_velocity`].
pub fn mms_velocity_gradient(p: Point, t: f64) -> [[f64; 2]; 2] {
    let (sx, cx) = (PI * p[0]).sin_cos();
    let (sy, cy) = (PI * p[1] + t).sin_cos();
    [[PI * cx * sy, PI * sx * cy], [-PI * sx * cy, -PI * cx * sy]]
}

/// Mean-free manufactured pressure.
pub fn mms_pressure(p: Point, t: f64) -> f64 {
    let mean = 2.0 * (1.0 + t).sin() - t.sin() - (2.0 + t).sin();
    (p[0] + p[1] + t).sin() - mean
}

/// `u_t - nu lap u + (u.grad) u + grad p` for the manufactured pair.
pub fn mms_force(p: Point, t: f64, nu: f64) -> [f64; 2] {
    let (sx, cx) = (PI * p[0]).sin_cos();
    let (sy, cy) = (PI * p[1] + t).sin_cos();
    let u = [sx * sy, cx * cy];
    let ut = [sx * cy, -cx * sy];
    let conv = [PI * sx * cx, -PI * sy * cy];
    let gp = (p[0] + p[1] + t).cos();
    let k = 2.0 * nu * PI * PI;
    [ut[0] + k * u[0] + conv[0] + gp, ut[1] + k * u[1] + conv[1] + gp]
}

/// Scalar curl of [`mms_force`].
pub fn mms_force_curl(p: Point, t: f64, nu: f64) -> f64 {
    let sx = (PI * p[0]).sin();
    let (sy, cy) = (PI * p[1] + t).sin_cos();
    // curl u = -2 pi sin(pi x) cos(pi y + t); the convective part is a gradient
    let w = -2.0 * PI * sx * cy;
    let wt = 2.0 * PI * sx * sy;
    wt + 2.0 * nu * PI * PI * w
}
