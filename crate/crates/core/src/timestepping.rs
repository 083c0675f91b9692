//! Fully discrete schemes: linearized Crank-Nicolson with extrapolated
//! (Picard) advection, an optional second Picard pass, BDF2, and a
//! Crank-Nicolson co-stepper for the scalar vorticity.
//!
//! Each step solves one monolithic saddle system for `u^{n+1}` and a
//! pressure `q`, which for the Crank-Nicolson steppers approximates
//! `p^{n+1/2}`. Dirichlet data is imposed on `u^{n+1}` at `t^{n+1}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{Assembler, ConvectiveForm};
use crate::diagnostics::{conserved_quantities, max_divergence, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::linalg::{eliminate, relative_residual, Constraints, LuSolver, SaddleLayout, SparseMatrix, RESIDUAL_TOLERANCE};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::reconstruction::{ProjectionFlavor, ReconstructionPlan, Reconstructor};
use crate::spaces::{DofDirection, ElementKind, ElementPair, Field, Space};

pub type VectorFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
/// `g[k][j] = d u_k / d x_j`.
pub type TensorFn = Arc<dyn Fn(Point, f64) -> [[f64; 2]; 2] + Send + Sync>;

/// Energy growth beyond this factor counts as blow-up.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stepper {
    /// Crank-Nicolson, advection by `3/2 u^n - 1/2 u^{n-1}`.
    CnPicard1,
    /// As above followed by a second pass advected by the first pass's
    /// midpoint value.
    CnPicard2,
    /// BDF2 with advection by `2 u^n - u^{n-1}`, started with one
    /// Crank-Nicolson step.
    Bdf2,
}

impl Stepper {
    pub const ALL: [Stepper; 3] = [Stepper::CnPicard1, Stepper::CnPicard2, Stepper::Bdf2];

    pub fn name(self) -> &'static str {
        match self {
            Stepper::CnPicard1 => "cn1",
            Stepper::CnPicard2 => "cn2",
            Stepper::Bdf2 => "bdf2",
        }
    }
}

impl fmt::Display for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stepper {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stepper::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown stepper '{s}' (cn1, cn2, bdf2)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    NoSlip,
    /// `u.n = 0`, tangential component free. Boundaries must be axis-aligned.
    NoPenetration,
    /// Velocity prescribed by [`SchemeConfig::boundary_data`].
    Dirichlet,
    /// Natural outflow.
    DoNothing,
}

#[derive(Clone)]
pub struct SchemeConfig {
    pub pair: ElementPair,
    pub form: ConvectiveForm,
    /// `false` drops the convection term (Stokes flow).
    pub convection: bool,
    pub flavor: ProjectionFlavor,
    pub stepper: Stepper,
    pub dt: f64,
    pub t_end: f64,
    pub nu: f64,
    /// Indexed by [`BoundaryTag::index`].
    pub boundary: [BoundaryCondition; 4],
    pub boundary_data: Option<VectorFn>,
    pub force: Option<VectorFn>,
    /// Curl of the force, for the vorticity co-stepper.
    pub force_curl: Option<ScalarFn>,
    pub initial: VectorFn,
    /// Gradient of the initial velocity. When given and `nu > 0` the start
    /// is the Stokes (Ritz) projection instead of the L2 projection.
    pub initial_gradient: Option<TensorFn>,
    pub exact: Option<VectorFn>,
    pub vorticity: bool,
}

impl fmt::Debug for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeConfig")
            .field("pair", &self.pair)
            .field("form", &self.form)
            .field("convection", &self.convection)
            .field("flavor", &self.flavor)
            .field("stepper", &self.stepper)
            .field("dt", &self.dt)
            .field("t_end", &self.t_end)
            .field("nu", &self.nu)
            .field("boundary", &self.boundary)
            .field("force", &self.force.is_some())
            .field("exact", &self.exact.is_some())
            .field("vorticity", &self.vorticity)
            .finish()
    }
}

impl SchemeConfig {
    /// Unit time step and horizon, no-slip walls, no forcing.
    pub fn new(pair: ElementPair, form: ConvectiveForm, initial: VectorFn) -> Self {
        SchemeConfig {
            pair,
            form,
            convection: true,
            flavor: ProjectionFlavor::L2,
            stepper: Stepper::CnPicard1,
            dt: 1.0,
            t_end: 1.0,
            nu: 0.0,
            boundary: [BoundaryCondition::NoSlip; 4],
            boundary_data: None,
            force: None,
            force_curl: None,
            initial,
            initial_gradient: None,
            exact: None,
            vorticity: false,
        }
    }

    pub fn plan(&self) -> Option<ReconstructionPlan> {
        (self.convection && self.form == ConvectiveForm::ModConv)
            .then(|| ReconstructionPlan::new(self.pair).with_flavor(self.flavor))
    }

    pub fn condition(&self, tag: BoundaryTag) -> BoundaryCondition {
        self.boundary[tag.index()]
    }

    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.num_steps() >= 1) {
            return bad(format!("end time {} is shorter than the time step {}", self.t_end, self.dt));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return bad(format!("viscosity must be non-negative, got {}", self.nu));
        }
        if self.boundary.contains(&BoundaryCondition::Dirichlet) && self.boundary_data.is_none() {
            return bad("Dirichlet boundary without boundary data".into());
        }
        if self.vorticity && self.plan().is_none() {
            return bad("the vorticity co-stepper needs the modified convective form".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct State {
    pub u: Field,
    pub u_prev: Option<Field>,
    /// Pressure of the last step; the midpoint value for Crank-Nicolson.
    pub p: Field,
    pub w: Option<Field>,
    pub step: usize,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    Completed,
    BlowUp { step: usize, time: f64 },
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub initial: DiagnosticsRecord,
    /// One record per completed step.
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
}

#[derive(Clone, Copy, Debug)]
enum Pin {
    Zero,
    Data(usize),
}

struct VorticityStepper {
    space: Arc<Space>,
    mass: SparseMatrix,
    /// `M/dt + nu/2 K`
    base: SparseMatrix,
    lu: LuSolver,
}

pub struct Simulation {
    config: SchemeConfig,
    velocity: Arc<Space>,
    pressure: Arc<Space>,
    asm: Assembler,
    mass: SparseMatrix,
    /// `M/dt + nu/2 K` on the convection pattern.
    cn_base: SparseMatrix,
    /// `3/(2 dt) M + nu K` on the convection pattern.
    bdf_base: SparseMatrix,
    b: SparseMatrix,
    mean: Option<Vec<f64>>,
    layout: SaddleLayout,
    pins: Vec<(usize, Pin)>,
    lu: LuSolver,
    reconstructor: Option<Reconstructor>,
    vorticity: Option<VorticityStepper>,
    state: State,
    initial_energy: f64,
    residual: f64,
    div_rec_max: f64,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("config", &self.config)
            .field("dofs", &self.dof_counts())
            .field("step", &self.state.step)
            .finish()
    }
}

impl Simulation {
    /// Sets up spaces and operators and projects the initial velocity onto
    /// the discretely divergence-free fields matching the boundary data.
    pub fn new(mesh: Arc<Mesh>, config: SchemeConfig) -> Result<Self> {
        Self::with_assembler(mesh, config, Assembler::default())
    }

    pub fn with_assembler(mesh: Arc<Mesh>, config: SchemeConfig, asm: Assembler) -> Result<Self> {
        config.validate()?;
        let velocity = Space::new(mesh.clone(), config.pair.velocity());
        let pressure = Space::new(mesh.clone(), config.pair.pressure());
        let (dt, nu) = (config.dt, config.nu);
        let mass = asm.mass(&velocity);
        let stiffness = asm.stiffness(&velocity);
        let b = asm.div(&velocity, &pressure)?;
        let full = config.convection && config.form.couples_components();
        let widen = |m: SparseMatrix| if full { m.add(1.0, &velocity.pattern(true).matrix, 0.0) } else { m };
        let cn_base = widen(mass.add(1.0 / dt, &stiffness, 0.5 * nu));
        let bdf_base = widen(mass.add(1.5 / dt, &stiffness, nu));

        let free_constant = mesh
            .boundary_edges()
            .all(|e| mesh.boundary_tag(e).is_some_and(|t| config.condition(t) != BoundaryCondition::DoNothing));
        let mean = free_constant.then(|| asm.mean_vector(&pressure));
        let layout = SaddleLayout::new(&cn_base, &b, mean.as_deref())?;
        let pins = boundary_pins(&velocity, &config);

        let enforced = |t: BoundaryTag| config.condition(t) != BoundaryCondition::DoNothing;
        let reconstructor = match config.plan() {
            Some(plan) => Some(Reconstructor::new(&velocity, plan, enforced)?),
            None => None,
        };

        // initial velocity: L2 projection onto the discretely divergence-free
        // fields, or the Ritz projection for viscous flow so that the start
        // carries no stiff components Crank-Nicolson would fail to damp
        let u0f = config.initial.clone();
        let (op, load) = match (&config.initial_gradient, nu > 0.0) {
            (Some(g), true) => (&stiffness, asm.gradient_load(&velocity, |x| g(x, 0.0))),
            _ => (&mass, asm.load(&velocity, |x| u0f(x, 0.0))),
        };
        let init_layout = SaddleLayout::new(op, &b, mean.as_deref())?;
        let mut m = init_layout.assemble(op, &b, mean.as_deref())?;
        let mut rhs = init_layout.rhs(&load, &vec![0.0; pressure.ndofs()]);
        eliminate(&mut m, &mut rhs, &constraints_at(&pins, &velocity, &config, 0.0)?)?;
        let mut lu = LuSolver::new();
        lu.factor(&m)?;
        let x = lu.solve(&rhs)?;
        let residual = relative_residual(&m, &x, &rhs);
        check_residual(0, residual)?;
        let nu_dofs = velocity.ndofs();
        let u = Field::new(velocity.clone(), x[..nu_dofs].to_vec())?;
        let p = Field::zeros(pressure.clone());

        let (vorticity, w) = if config.vorticity {
            let space = Space::new(mesh.clone(), ElementKind::ScalarP2);
            let wm = asm.mass(&space);
            let wk = asm.stiffness(&space);
            let base = wm.add(1.0 / dt, &wk, 0.5 * nu);
            let w0 = asm.l2_project_local(&space, |c, x| [u.eval_at(c, x).curl(), 0.0])?;
            (
                Some(VorticityStepper {
                    space,
                    mass: wm,
                    base,
                    lu: LuSolver::new(),
                }),
                Some(w0),
            )
        } else {
            (None, None)
        };

        let initial_energy = conserved_quantities(&u, None).kinetic_energy;
        Ok(Simulation {
            config,
            velocity,
            pressure,
            asm,
            mass,
            cn_base,
            bdf_base,
            b,
            mean,
            layout,
            pins,
            lu: LuSolver::new(),
            reconstructor,
            vorticity,
            state: State {
                u,
                u_prev: None,
                p,
                w,
                step: 0,
                time: 0.0,
            },
            initial_energy,
            residual,
            div_rec_max: f64::NAN,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn velocity_space(&self) -> &Arc<Space> {
        &self.velocity
    }

    pub fn pressure_space(&self) -> &Arc<Space> {
        &self.pressure
    }

    /// `(velocity, pressure)` dof counts.
    pub fn dof_counts(&self) -> (usize, usize) {
        (self.velocity.ndofs(), self.pressure.ndofs())
    }

    /// The advecting field for a given extrapolated velocity.
    pub fn advecting_field(&self, u_pre: &Field) -> Result<Field> {
        match &self.reconstructor {
            Some(r) => r.apply(u_pre),
            None => Ok(u_pre.clone()),
        }
    }

    /// Advances one step with the configured stepper.
    pub fn step(&mut self) -> Result<DiagnosticsRecord> {
        match self.config.stepper {
            Stepper::Bdf2 if self.state.u_prev.is_some() => self.bdf2_step(),
            _ => self.cn_picard_step(),
        }
    }

    pub fn cn_picard_step(&mut self) -> Result<DiagnosticsRecord> {
        let n = self.state.step;
        let dt = self.config.dt;
        let t_mid = (n as f64 + 0.5) * dt;
        let u_pre = match &self.state.u_prev {
            Some(prev) => combine(1.5, &self.state.u, -0.5, prev),
            None => self.state.u.clone(),
        };
        let mut a = self.advecting_field(&u_pre)?;
        // (2/dt) M u^n + F^{n+1/2}, completed by -A u^n once A is known
        let mut rhs = self.mass.matvec(self.state.u.coeffs());
        rhs.iter_mut().for_each(|v| *v *= 2.0 / dt);
        if let Some(f) = &self.config.force {
            let load = self.asm.load(&self.velocity, |x| f(x, t_mid));
            rhs.iter_mut().zip(load).for_each(|(r, l)| *r += l);
        }
        let passes = if self.config.stepper == Stepper::CnPicard2 { 2 } else { 1 };
        let mut solution = None;
        for pass in 0..passes {
            if pass > 0 {
                let (u1, _) = solution.as_ref().expect("first pass done");
                a = self.advecting_field(&combine(0.5, &self.state.u, 0.5, u1))?;
            }
            let block = self.block(&self.cn_base.clone(), &a, 0.5)?;
            let mut r = rhs.clone();
            let au = block.matvec(self.state.u.coeffs());
            r.iter_mut().zip(&au).for_each(|(x, y)| *x -= y);
            solution = Some(self.solve(&block, r)?);
        }
        let (u_new, p_new) = solution.expect("at least one pass");
        self.finish(u_new, p_new, &a)
    }

    pub fn bdf2_step(&mut self) -> Result<DiagnosticsRecord> {
        let Some(prev) = self.state.u_prev.clone() else {
            return Err(Error::Config("BDF2 needs two previous levels".into()));
        };
        let n = self.state.step;
        let dt = self.config.dt;
        let t_new = (n + 1) as f64 * dt;
        let a = self.advecting_field(&combine(2.0, &self.state.u, -1.0, &prev))?;
        let hist = combine(4.0, &self.state.u, -1.0, &prev);
        let mut rhs = self.mass.matvec(hist.coeffs());
        rhs.iter_mut().for_each(|v| *v /= 2.0 * dt);
        if let Some(f) = &self.config.force {
            let load = self.asm.load(&self.velocity, |x| f(x, t_new));
            rhs.iter_mut().zip(load).for_each(|(r, l)| *r += l);
        }
        let block = self.block(&self.bdf_base.clone(), &a, 1.0)?;
        let (u_new, p_new) = self.solve(&block, rhs)?;
        self.finish(u_new, p_new, &a)
    }

    /// `base + theta N(a)`.
    fn block(&self, base: &SparseMatrix, a: &Field, theta: f64) -> Result<SparseMatrix> {
        if !self.config.convection {
            return Ok(base.clone());
        }
        let full = self.config.form.couples_components();
        let n = self.asm.convection_on(self.config.form, a, &self.velocity, full)?;
        Ok(base.add(1.0, &n, theta))
    }

    fn solve(&mut self, block: &SparseMatrix, rhs_u: Vec<f64>) -> Result<(Field, Field)> {
        let step = self.state.step + 1;
        let t_new = step as f64 * self.config.dt;
        let mut m = self.layout.assemble(block, &self.b, self.mean.as_deref())?;
        let mut rhs = self.layout.rhs(&rhs_u, &vec![0.0; self.pressure.ndofs()]);
        eliminate(&mut m, &mut rhs, &constraints_at(&self.pins, &self.velocity, &self.config, t_new)?)?;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step, time: t_new });
        }
        self.lu.factor(&m)?;
        let x = self.lu.solve(&rhs)?;
        self.residual = relative_residual(&m, &x, &rhs);
        check_residual(step, self.residual)?;
        let nu = self.velocity.ndofs();
        let np = self.pressure.ndofs();
        Ok((
            Field::new(self.velocity.clone(), x[..nu].to_vec())?,
            Field::new(self.pressure.clone(), x[nu..nu + np].to_vec())?,
        ))
    }

    fn finish(&mut self, u_new: Field, p_new: Field, a: &Field) -> Result<DiagnosticsRecord> {
        let step = self.state.step + 1;
        let time = step as f64 * self.config.dt;
        self.div_rec_max = max_divergence(a);
        let w_new = match (&mut self.vorticity, &self.state.w) {
            (Some(vs), Some(w)) => {
                let t_mid = time - 0.5 * self.config.dt;
                Some(vorticity_costep(vs, &self.asm, &self.config, a, w, t_mid, step)?)
            }
            _ => None,
        };
        let blown = u_new.coeffs().iter().any(|v| !v.is_finite());
        let old = std::mem::replace(&mut self.state.u, u_new);
        self.state.u_prev = Some(old);
        self.state.p = p_new;
        self.state.w = w_new;
        self.state.step = step;
        self.state.time = time;
        if blown {
            return Err(Error::BlowUp { step, time });
        }
        let rec = self.record();
        let e = rec.quantities.kinetic_energy;
        if !e.is_finite() || e > BLOWUP_FACTOR * self.initial_energy.max(f64::MIN_POSITIVE) {
            return Err(Error::BlowUp { step, time });
        }
        Ok(rec)
    }

    /// Diagnostics of the current state.
    pub fn record(&self) -> DiagnosticsRecord {
        let s = &self.state;
        let [div2] = s.u.integrate(|_, e| [e.div * e.div]);
        DiagnosticsRecord {
            step: s.step,
            time: s.time,
            quantities: conserved_quantities(&s.u, s.w.as_ref()),
            l2_error: self.config.exact.as_ref().map(|ex| s.u.l2_error(|x| ex(x, s.time))),
            div_l2: div2.sqrt(),
            div_rec_max: self.div_rec_max,
            solver_residual: self.residual,
        }
    }

    /// Steps to the end time, calling `observer` after every step. Blow-up
    /// ends the run early and is reported in the summary, not as an error.
    pub fn run(
        &mut self,
        mut observer: impl FnMut(&Simulation, &DiagnosticsRecord) -> Result<()>,
    ) -> Result<RunSummary> {
        let initial = self.record();
        let mut records = Vec::with_capacity(self.config.num_steps());
        let mut termination = Termination::Completed;
        while self.state.step < self.config.num_steps() {
            match self.step() {
                Ok(rec) => {
                    observer(self, &rec)?;
                    records.push(rec);
                }
                Err(Error::BlowUp { step, time }) => {
                    termination = Termination::BlowUp { step, time };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(RunSummary {
            initial,
            records,
            termination,
        })
    }
}

/// Builds and runs a simulation without an observer.
pub fn run(mesh: Arc<Mesh>, config: SchemeConfig) -> Result<(RunSummary, State)> {
    let mut sim = Simulation::new(mesh, config)?;
    let summary = sim.run(|_, _| Ok(()))?;
    Ok((summary, sim.state))
}

fn check_residual(step: usize, residual: f64) -> Result<()> {
    if residual.is_finite() && residual <= RESIDUAL_TOLERANCE {
        return Ok(());
    }
    Err(Error::Residual {
        step,
        residual,
        tolerance: RESIDUAL_TOLERANCE,
    })
}

fn combine(a: f64, x: &Field, b: f64, y: &Field) -> Field {
    let c = x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| a * p + b * q).collect();
    Field::new(x.space().clone(), c).expect("same space")
}

/// Velocity dofs fixed by the boundary conditions, in dof order.
fn boundary_pins(space: &Arc<Space>, config: &SchemeConfig) -> Vec<(usize, Pin)> {
    let mesh = space.mesh();
    let mut pins: Vec<Option<Pin>> = vec![None; space.ndofs()];
    for e in mesh.boundary_edges() {
        let tag = mesh.boundary_tag(e).expect("boundary edge has a tag");
        let n = mesh.edge_normal(e);
        for d in space.edge_dofs(e) {
            let k = match space.dof(d).direction {
                DofDirection::Component(k) => k,
                _ => continue,
            };
            let pin = match config.condition(tag) {
                BoundaryCondition::NoSlip => Pin::Zero,
                BoundaryCondition::NoPenetration if n[k].abs() > 0.5 => Pin::Zero,
                BoundaryCondition::Dirichlet => Pin::Data(k),
                _ => continue,
            };
            // zero wins where walls meet prescribed data
            pins[d] = match (pins[d], pin) {
                (Some(Pin::Zero), _) => Some(Pin::Zero),
                _ => Some(pin),
            };
        }
    }
    pins.into_iter().enumerate().filter_map(|(d, p)| p.map(|p| (d, p))).collect()
}

fn constraints_at(pins: &[(usize, Pin)], space: &Space, config: &SchemeConfig, t: f64) -> Result<Constraints> {
    Constraints::from_pairs(pins.iter().map(|&(d, pin)| {
        let v = match pin {
            Pin::Zero => 0.0,
            Pin::Data(k) => config.boundary_data.as_ref().map_or(0.0, |g| g(space.dof(d).point, t)[k]),
        };
        (d, v)
    }))
}

/// Crank-Nicolson step of the scalar vorticity transported by the same
/// advecting field as the velocity, with natural boundary conditions.
fn vorticity_costep(
    vs: &mut VorticityStepper,
    asm: &Assembler,
    config: &SchemeConfig,
    a: &Field,
    w: &Field,
    t_mid: f64,
    step: usize,
) -> Result<Field> {
    let n = asm.vorticity_operator(a, &vs.space)?;
    let block = vs.base.add(1.0, &n, 0.5);
    let mut rhs = vs.mass.matvec(w.coeffs());
    rhs.iter_mut().for_each(|v| *v *= 2.0 / config.dt);
    let bw = block.matvec(w.coeffs());
    rhs.iter_mut().zip(&bw).for_each(|(r, b)| *r -= b);
    if let Some(fc) = &config.force_curl {
        let load = asm.load(&vs.space, |x| [fc(x, t_mid), 0.0]);
        rhs.iter_mut().zip(load).for_each(|(r, l)| *r += l);
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            step,
            time: step as f64 * config.dt,
        });
    }
    vs.lu.factor(&block)?;
    let x = vs.lu.solve(&rhs)?;
    check_residual(step, relative_residual(&block, &x, &rhs))?;
    Field::new(vs.space.clone(), x)
}
