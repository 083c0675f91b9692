//! Divergence-free H(div) reconstruction of discrete velocities.
//!
//! P2-bubble velocities are interpolated directly into RT1. Taylor-Hood
//! velocities are first projected onto the Bernardi-Raugel fields that are
//! divergence-free against P0, then interpolated into BDM1. In both cases a
//! discretely divergence-free velocity maps to a pointwise divergence-free
//! field.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::Assembler;
use crate::error::{Error, Result};
use crate::linalg::{eliminate, relative_residual, Constraints, LuSolver, SaddleLayout, SparseMatrix, RESIDUAL_TOLERANCE};
use crate::mesh::{BoundaryTag, Point};
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::spaces::{BoundaryClass, ElementKind, ElementPair, Field, LocalEntity, Shape, Space, REF_VERTICES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ProjectionFlavor {
    /// Darcy-type: minimises the L2 distance.
    #[default]
    L2,
    /// Minimises the H1 seminorm distance.
    Stokes,
}

impl ProjectionFlavor {
    pub const ALL: [ProjectionFlavor; 2] = [ProjectionFlavor::L2, ProjectionFlavor::Stokes];

    pub fn name(self) -> &'static str {
        match self {
            ProjectionFlavor::L2 => "l2",
            ProjectionFlavor::Stokes => "stokes",
        }
    }
}

impl fmt::Display for ProjectionFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionFlavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProjectionFlavor::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown projection flavor '{s}' (l2, stokes)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ReconstructionPlan {
    pub pair: ElementPair,
    /// Only used by the Taylor-Hood route.
    pub flavor: ProjectionFlavor,
}

impl ReconstructionPlan {
    pub fn new(pair: ElementPair) -> Self {
        ReconstructionPlan {
            pair,
            flavor: ProjectionFlavor::default(),
        }
    }

    pub fn with_flavor(self, flavor: ProjectionFlavor) -> Self {
        ReconstructionPlan { flavor, ..self }
    }

    pub fn source(&self) -> ElementKind {
        self.pair.velocity()
    }

    pub fn target(&self) -> ElementKind {
        match self.pair {
            ElementPair::P2BubbleP1Disc => ElementKind::HdivRT1,
            ElementPair::TaylorHood => ElementKind::HdivBDM1,
        }
    }
}

/// Matrix of the canonical interpolation from a vector space into RT1, BDM1
/// or Bernardi-Raugel. The degrees of freedom are those of
/// [`Field::interpolate`], applied to the source basis cell by cell; the
/// source must be continuous across edges for the result to be well defined.
pub fn interpolation_matrix(src: &Arc<Space>, dst: &Arc<Space>) -> Result<SparseMatrix> {
    let (sk, dk) = (src.kind(), dst.kind());
    if !sk.is_vector() {
        return Err(Error::KindMismatch(format!("cannot interpolate from scalar space {sk}")));
    }
    if !matches!(dk, ElementKind::HdivRT1 | ElementKind::HdivBDM1 | ElementKind::VectorBernardiRaugel) {
        return Err(Error::KindMismatch(format!("no interpolation matrix into {dk}")));
    }
    if !Arc::ptr_eq(src.mesh(), dst.mesh()) {
        return Err(Error::Pairing("spaces live on different meshes".into()));
    }
    let mesh = src.mesh();
    let ns = src.local_dofs();
    let layout = dst.local_layout();
    let (gs, gw) = gauss_legendre(5);
    let rule = QuadratureRule::default();
    let mut shapes = [Shape::default(); 14];
    let mut done = vec![false; dst.ndofs()];
    let mut row = vec![0.0; ns];
    let mut t = Vec::new();

    for c in 0..mesh.num_cells() {
        let dd = dst.cell_dofs(c);
        if dd.iter().all(|&g| done[g]) {
            continue;
        }
        let geo = mesh.geometry(c);
        let verts = mesh.cell(c);
        let edges = mesh.cell_edges(c);
        let sd = src.cell_dofs(c);
        // reference points of edge l, parametrised low to high vertex
        let edge_point = |l: usize, s: f64| -> Point {
            let (a, b) = ((l + 1) % 3, (l + 2) % 3);
            let (lo, hi) = if verts[a] < verts[b] { (a, b) } else { (b, a) };
            let (p, q) = (REF_VERTICES[lo], REF_VERTICES[hi]);
            [
                0.5 * (p[0] + q[0]) + 0.5 * s * (q[0] - p[0]),
                0.5 * (p[1] + q[1]) + 0.5 * s * (q[1] - p[1]),
            ]
        };
        for (i, &g) in dd.iter().enumerate() {
            if done[g] {
                continue;
            }
            done[g] = true;
            row.iter_mut().for_each(|v| *v = 0.0);
            let mut edge_moment = |row: &mut [f64], l: usize, k: i32, scale: f64| {
                let n = mesh.edge_normal(edges[l]);
                for (&s, &w) in gs.iter().zip(&gw) {
                    src.tabulate(c, &geo, edge_point(l, s), &mut shapes);
                    for (r, sh) in row.iter_mut().zip(&shapes[..ns]) {
                        *r += scale * 0.5 * w * s.powi(k) * (sh.val[0] * n[0] + sh.val[1] * n[1]);
                    }
                }
            };
            match (dk, layout[i].0) {
                (ElementKind::VectorBernardiRaugel, LocalEntity::Vertex(l)) => {
                    src.tabulate(c, &geo, REF_VERTICES[l], &mut shapes);
                    let k = i / 3;
                    for (r, sh) in row.iter_mut().zip(&shapes[..ns]) {
                        *r = sh.val[k];
                    }
                }
                (ElementKind::VectorBernardiRaugel, LocalEntity::Edge(l)) => {
                    // 1.5 * (mean normal flux - mean of the endpoint normal values)
                    edge_moment(&mut row, l, 0, 1.5);
                    let n = mesh.edge_normal(edges[l]);
                    for v in [(l + 1) % 3, (l + 2) % 3] {
                        src.tabulate(c, &geo, REF_VERTICES[v], &mut shapes);
                        for (r, sh) in row.iter_mut().zip(&shapes[..ns]) {
                            *r -= 0.75 * (sh.val[0] * n[0] + sh.val[1] * n[1]);
                        }
                    }
                }
                (_, LocalEntity::Edge(l)) => edge_moment(&mut row, l, (i % 2) as i32, 1.0),
                (_, LocalEntity::Cell) => {
                    let k = i - 6;
                    for (xi, w) in rule.iter() {
                        src.tabulate(c, &geo, xi, &mut shapes);
                        for (r, sh) in row.iter_mut().zip(&shapes[..ns]) {
                            *r += 2.0 * w * sh.val[k];
                        }
                    }
                }
                (_, LocalEntity::Vertex(_)) => unreachable!("H(div) spaces have no vertex dofs"),
            }
            t.extend(row.iter().zip(sd).filter(|(r, _)| **r != 0.0).map(|(&r, &j)| (g, j, r)));
        }
    }
    SparseMatrix::from_triplets(dst.ndofs(), src.ndofs(), &t)
}

fn interpolate_into(u: &Field, source: ElementKind, target: ElementKind) -> Result<Field> {
    if u.kind() != source {
        return Err(Error::KindMismatch(format!("expected a {source} field, got {}", u.kind())));
    }
    let dst = Space::new(u.space().mesh().clone(), target);
    let m = interpolation_matrix(u.space(), &dst)?;
    Field::new(dst, m.matvec(u.coeffs()))
}

/// Canonical RT1 interpolant of a P2-bubble velocity.
pub fn rt1_interpolate(u: &Field) -> Result<Field> {
    interpolate_into(u, ElementKind::VectorP2Bubble, ElementKind::HdivRT1)
}

/// Canonical BDM1 interpolant of a Bernardi-Raugel velocity.
pub fn bdm1_interpolate(u: &Field) -> Result<Field> {
    interpolate_into(u, ElementKind::VectorBernardiRaugel, ElementKind::HdivBDM1)
}

/// Projection of a velocity onto the Bernardi-Raugel fields that are
/// divergence-free against P0. On boundary edges whose tag is enforced, the
/// result is pinned to the Bernardi-Raugel interpolant of the input, so a
/// zero normal trace carries over. The saddle matrix is factored once.
pub struct ThProjection {
    source: Arc<Space>,
    br: Arc<Space>,
    flavor: ProjectionFlavor,
    transfer: SparseMatrix,
    trace: SparseMatrix,
    constrained: Vec<usize>,
    layout: SaddleLayout,
    /// Unconstrained matrix, used to lift pinned values into the rhs.
    monolithic: SparseMatrix,
    lu: LuSolver,
}

impl fmt::Debug for ThProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThProjection")
            .field("source", &self.source.kind())
            .field("flavor", &self.flavor)
            .field("size", &self.layout.size())
            .finish()
    }
}

impl ThProjection {
    pub fn new(source: &Arc<Space>, flavor: ProjectionFlavor, enforce: impl Fn(BoundaryTag) -> bool) -> Result<Self> {
        let kind = source.kind();
        if !kind.is_vector() || kind.is_hdiv() {
            return Err(Error::KindMismatch(format!("cannot project a {kind} field")));
        }
        let mesh = source.mesh();
        let br = Space::new(mesh.clone(), ElementKind::VectorBernardiRaugel);
        let p0 = Space::new(mesh.clone(), ElementKind::ScalarP0);
        let asm = Assembler::default();
        let (a, transfer) = match flavor {
            ProjectionFlavor::L2 => (asm.mass(&br), asm.mixed_mass(&br, source)?),
            ProjectionFlavor::Stokes => (asm.stiffness(&br), asm.mixed_stiffness(&br, source)?),
        };
        let b = asm.div(&br, &p0)?;
        let trace = interpolation_matrix(source, &br)?;

        let mut pinned = vec![false; br.ndofs()];
        let mut all_enforced = true;
        for e in mesh.boundary_edges() {
            if mesh.boundary_tag(e).is_some_and(&enforce) {
                for d in br.edge_dofs(e) {
                    pinned[d] = true;
                }
            } else {
                all_enforced = false;
            }
        }
        let constrained: Vec<usize> = (0..br.ndofs()).filter(|&d| pinned[d]).collect();
        if flavor == ProjectionFlavor::Stokes && constrained.is_empty() {
            return Err(Error::Solver("the Stokes projection needs pinned boundary dofs".into()));
        }
        // the pressure constant is free exactly when every boundary dof is pinned
        let mean = all_enforced.then(|| asm.mean_vector(&p0));
        let layout = SaddleLayout::new(&a, &b, mean.as_deref())?;
        let monolithic = layout.assemble(&a, &b, mean.as_deref())?;
        let mut eliminated = monolithic.clone();
        let mut scratch = vec![0.0; layout.size()];
        eliminate(
            &mut eliminated,
            &mut scratch,
            &Constraints::from_pairs(constrained.iter().map(|&d| (d, 0.0)))?,
        )?;
        let mut lu = LuSolver::new();
        lu.factor(&eliminated)?;
        Ok(ThProjection {
            source: source.clone(),
            br,
            flavor,
            transfer,
            trace,
            constrained,
            layout,
            monolithic,
            lu,
        })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.br
    }

    pub fn flavor(&self) -> ProjectionFlavor {
        self.flavor
    }

    pub fn project(&self, u: &Field) -> Result<Field> {
        if u.kind() != self.source.kind() || !Arc::ptr_eq(u.space().mesh(), self.source.mesh()) {
            return Err(Error::KindMismatch(format!(
                "projection built for {} got a {} field",
                self.source.kind(),
                u.kind()
            )));
        }
        let f = self.transfer.matvec(u.coeffs());
        let mut rhs = self.layout.rhs(&f, &vec![0.0; self.layout.np()]);
        if !self.constrained.is_empty() {
            let trace = self.trace.matvec(u.coeffs());
            let mut lift = vec![0.0; self.layout.size()];
            for &d in &self.constrained {
                lift[d] = trace[d];
            }
            let shift = self.monolithic.matvec(&lift);
            for (r, s) in rhs.iter_mut().zip(&shift) {
                *r -= s;
            }
            for &d in &self.constrained {
                rhs[d] = trace[d];
            }
        }
        let x = self.lu.solve(&rhs)?;
        if let Some(m) = self.lu.matrix() {
            let res = relative_residual(m, &x, &rhs);
            if res > RESIDUAL_TOLERANCE {
                return Err(Error::Residual {
                    step: 0,
                    residual: res,
                    tolerance: RESIDUAL_TOLERANCE,
                });
            }
        }
        Field::new(self.br.clone(), x[..self.br.ndofs()].to_vec())
    }
}

/// Projection onto the discretely divergence-free Bernardi-Raugel fields
/// with every boundary edge pinned to the input's trace.
pub fn th_project_divfree(u: &Field, flavor: ProjectionFlavor) -> Result<Field> {
    ThProjection::new(u.space(), flavor, |_| true)?.project(u)
}

/// A reconstruction operator for one velocity space, with everything that
/// does not depend on the velocity precomputed.
#[derive(Debug)]
pub struct Reconstructor {
    plan: ReconstructionPlan,
    source: Arc<Space>,
    target: Arc<Space>,
    interp: SparseMatrix,
    projection: Option<ThProjection>,
}

impl Reconstructor {
    /// `enforce` selects the boundary tags on which the velocity trace is
    /// prescribed; it matters only for the Taylor-Hood projection.
    pub fn new(velocity: &Arc<Space>, plan: ReconstructionPlan, enforce: impl Fn(BoundaryTag) -> bool) -> Result<Self> {
        if velocity.kind() != plan.source() {
            return Err(Error::KindMismatch(format!(
                "the {} reconstruction needs a {} velocity, got {}",
                plan.pair,
                plan.source(),
                velocity.kind()
            )));
        }
        let target = Space::new(velocity.mesh().clone(), plan.target());
        let (interp, projection) = match plan.pair {
            ElementPair::P2BubbleP1Disc => (interpolation_matrix(velocity, &target)?, None),
            ElementPair::TaylorHood => {
                let proj = ThProjection::new(velocity, plan.flavor, enforce)?;
                (interpolation_matrix(proj.space(), &target)?, Some(proj))
            }
        };
        Ok(Reconstructor {
            plan,
            source: velocity.clone(),
            target,
            interp,
            projection,
        })
    }

    pub fn plan(&self) -> ReconstructionPlan {
        self.plan
    }

    pub fn target(&self) -> &Arc<Space> {
        &self.target
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        if u.kind() != self.source.kind() || !Arc::ptr_eq(u.space().mesh(), self.source.mesh()) {
            return Err(Error::KindMismatch(format!(
                "reconstruction built for {} got a {} field",
                self.source.kind(),
                u.kind()
            )));
        }
        let coeffs = match &self.projection {
            None => self.interp.matvec(u.coeffs()),
            Some(p) => self.interp.matvec(p.project(u)?.coeffs()),
        };
        Field::new(self.target.clone(), coeffs)
    }
}

/// One-off reconstruction with every boundary edge treated as enforced.
pub fn reconstruct(u: &Field, plan: ReconstructionPlan) -> Result<Field> {
    Reconstructor::new(u.space(), plan, |_| true)?.apply(u)
}

/// Draws discretely divergence-free velocities vanishing on the boundary by
/// solving Stokes problems with random smooth forcing. The Stokes matrix is
/// factored once.
pub struct DivFreeSampler {
    velocity: Arc<Space>,
    layout: SaddleLayout,
    pinned: Vec<usize>,
    lu: LuSolver,
}

impl fmt::Debug for DivFreeSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivFreeSampler")
            .field("velocity", &self.velocity.kind())
            .field("size", &self.layout.size())
            .finish()
    }
}

impl DivFreeSampler {
    pub fn new(velocity: &Arc<Space>, pressure: &Arc<Space>) -> Result<Self> {
        let asm = Assembler::default();
        let a = asm.stiffness(velocity);
        let b = asm.div(velocity, pressure)?;
        let mean = asm.mean_vector(pressure);
        let layout = SaddleLayout::new(&a, &b, Some(&mean))?;
        let mut m = layout.assemble(&a, &b, Some(&mean))?;
        let pinned: Vec<usize> = (0..velocity.ndofs())
            .filter(|&d| velocity.dof(d).class != BoundaryClass::Interior)
            .collect();
        let mut scratch = vec![0.0; layout.size()];
        eliminate(&mut m, &mut scratch, &Constraints::from_pairs(pinned.iter().map(|&d| (d, 0.0)))?)?;
        let mut lu = LuSolver::new();
        lu.factor(&m)?;
        Ok(DivFreeSampler {
            velocity: velocity.clone(),
            layout,
            pinned,
            lu,
        })
    }

    /// A sample normalised to unit L2 norm.
    pub fn sample(&self, seed: u64) -> Result<Field> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<([f64; 2], [f64; 2], [f64; 2])> = (0..6)
            .map(|_| {
                let amp = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let k = [rng.random_range(1..=4) as f64, rng.random_range(1..=4) as f64];
                let phase = [rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU)];
                (amp, k, phase)
            })
            .collect();
        let force = |x: Point| {
            let mut f = [0.0; 2];
            for (amp, k, ph) in &modes {
                let s = (k[0] * std::f64::consts::PI * x[0] + ph[0]).sin() * (k[1] * std::f64::consts::PI * x[1] + ph[1]).cos();
                f[0] += amp[0] * s;
                f[1] += amp[1] * s;
            }
            f
        };
        let load = Assembler::default().load(&self.velocity, force);
        let mut rhs = self.layout.rhs(&load, &vec![0.0; self.layout.np()]);
        for &d in &self.pinned {
            rhs[d] = 0.0;
        }
        // refinement pushes B u = 0 down to round-off
        let x = self.lu.solve_refined(&rhs, 2)?;
        let mut u = Field::new(self.velocity.clone(), x[..self.velocity.ndofs()].to_vec())?;
        let norm = u.norms().l2;
        if norm > 0.0 {
            u.coeffs_mut().iter_mut().for_each(|v| *v /= norm);
        }
        Ok(u)
    }
}

/// A single seeded discretely divergence-free velocity; see [`DivFreeSampler`].
pub fn random_discrete_divfree(velocity: &Arc<Space>, pressure: &Arc<Space>, seed: u64) -> Result<Field> {
    DivFreeSampler::new(velocity, pressure)?.sample(seed)
}

#[cfg(test)]
mod tests;
