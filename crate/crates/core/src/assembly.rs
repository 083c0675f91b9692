//! Mass, stiffness, divergence and convection operators.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, SparseMatrix};
use crate::mesh::Point;
use crate::quadrature::QuadratureRule;
use crate::spaces::{ElementKind, Eval, Field, Shape, Space};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvectiveForm {
    /// `((a.grad) v, w)`
    Conv,
    /// `((a.grad) v, w) + 1/2 ((div a) v, w)`
    Skew,
    /// `((w.grad) v, a) - ((v.grad) w, a)`, the skew linearization of
    /// `2 D(u) u + (div u) u`
    EmacLin,
    /// `((a.grad) v, w)` with `a` a divergence-free H(div) reconstruction
    ModConv,
}

impl ConvectiveForm {
    pub const ALL: [ConvectiveForm; 4] = [
        ConvectiveForm::Conv,
        ConvectiveForm::Skew,
        ConvectiveForm::EmacLin,
        ConvectiveForm::ModConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConvectiveForm::Conv => "conv",
            ConvectiveForm::Skew => "skew",
            ConvectiveForm::EmacLin => "emac",
            ConvectiveForm::ModConv => "modconv",
        }
    }

    /// Whether the operator couples the two velocity components.
    pub fn couples_components(self) -> bool {
        self == ConvectiveForm::EmacLin
    }
}

impl fmt::Display for ConvectiveForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConvectiveForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConvectiveForm::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown convective form '{s}' (conv, skew, emac, modconv)")))
    }
}

/// Operator assembly with a fixed quadrature rule.
#[derive(Clone, Debug, Default)]
pub struct Assembler {
    rule: QuadratureRule,
}

impl Assembler {
    pub fn new(rule: QuadratureRule) -> Self {
        Assembler { rule }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Element loop over a square operator on `space`. `kernel(test, trial,
    /// a)` is the integrand for entry `(i, j)`.
    fn square(
        &self,
        space: &Arc<Space>,
        full: bool,
        coefficient: Option<&Field>,
        kernel: impl Fn(&Shape, &Shape, &Eval) -> f64,
    ) -> SparseMatrix {
        let mesh = space.mesh();
        let pattern = space.pattern(full);
        let n = space.local_dofs();
        let mut m = pattern.matrix.clone();
        let vals = m.values_mut();
        let mut shapes = [Shape::default(); 14];
        let mut ashapes = [Shape::default(); 14];
        let mut local = vec![0.0; n * n];
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            local.iter_mut().for_each(|v| *v = 0.0);
            for (xi, w) in self.rule.iter() {
                space.tabulate(c, &geo, xi, &mut shapes);
                let a = match coefficient {
                    Some(f) => {
                        f.space().tabulate(c, &geo, xi, &mut ashapes);
                        f.combine(c, &ashapes)
                    }
                    None => Eval::default(),
                };
                let wd = w * geo.det;
                for i in 0..n {
                    for j in 0..n {
                        local[i * n + j] += wd * kernel(&shapes[i], &shapes[j], &a);
                    }
                }
            }
            for (k, &p) in pattern.cell_positions(c).iter().enumerate() {
                if p != usize::MAX {
                    vals[p] += local[k];
                }
            }
        }
        m
    }

    pub fn mass(&self, space: &Arc<Space>) -> SparseMatrix {
        self.square(space, false, None, |u, v, _| u.val[0] * v.val[0] + u.val[1] * v.val[1])
    }

    pub fn stiffness(&self, space: &Arc<Space>) -> SparseMatrix {
        self.square(space, false, None, |u, v, _| {
            let (a, b) = (u.grad, v.grad);
            a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
        })
    }

    /// Rectangular operator with rows from `test` and columns from `trial`.
    fn rectangular(
        &self,
        test: &Arc<Space>,
        trial: &Arc<Space>,
        kernel: impl Fn(&Shape, &Shape) -> f64,
    ) -> Result<SparseMatrix> {
        if !Arc::ptr_eq(test.mesh(), trial.mesh()) {
            return Err(Error::Pairing("spaces live on different meshes".into()));
        }
        let mesh = test.mesh();
        let (nt, ns) = (test.local_dofs(), trial.local_dofs());
        let mut tshapes = [Shape::default(); 14];
        let mut sshapes = [Shape::default(); 14];
        let mut local = vec![0.0; nt * ns];
        let mut t = Vec::with_capacity(mesh.num_cells() * nt * ns);
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            local.iter_mut().for_each(|v| *v = 0.0);
            for (xi, w) in self.rule.iter() {
                test.tabulate(c, &geo, xi, &mut tshapes);
                trial.tabulate(c, &geo, xi, &mut sshapes);
                for i in 0..nt {
                    for j in 0..ns {
                        local[i * ns + j] += w * geo.det * kernel(&tshapes[i], &sshapes[j]);
                    }
                }
            }
            let (td, sd) = (test.cell_dofs(c), trial.cell_dofs(c));
            for i in 0..nt {
                for j in 0..ns {
                    t.push((td[i], sd[j], local[i * ns + j]));
                }
            }
        }
        SparseMatrix::from_triplets(test.ndofs(), trial.ndofs(), &t)
    }

    /// `R[i, j] = (chi_j, phi_i)` between two spaces on one mesh.
    pub fn mixed_mass(&self, test: &Arc<Space>, trial: &Arc<Space>) -> Result<SparseMatrix> {
        self.rectangular(test, trial, |u, v| u.val[0] * v.val[0] + u.val[1] * v.val[1])
    }

    /// `R[i, j] = (grad chi_j, grad phi_i)` between two spaces on one mesh.
    pub fn mixed_stiffness(&self, test: &Arc<Space>, trial: &Arc<Space>) -> Result<SparseMatrix> {
        self.rectangular(test, trial, |u, v| {
            let (a, b) = (u.grad, v.grad);
            a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
        })
    }

    /// `B[q, j] = (div phi_j, psi_q)`.
    pub fn div(&self, vel: &Arc<Space>, pres: &Arc<Space>) -> Result<SparseMatrix> {
        check_pair(vel.kind(), pres.kind())?;
        if !Arc::ptr_eq(vel.mesh(), pres.mesh()) {
            return Err(Error::Pairing("spaces live on different meshes".into()));
        }
        let mesh = vel.mesh();
        let (nu, np) = (vel.local_dofs(), pres.local_dofs());
        let mut shapes = [Shape::default(); 14];
        let mut pshapes = [Shape::default(); 14];
        let mut t = Vec::with_capacity(mesh.num_cells() * nu * np);
        let mut local = vec![0.0; nu * np];
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            local.iter_mut().for_each(|v| *v = 0.0);
            for (xi, w) in self.rule.iter() {
                vel.tabulate(c, &geo, xi, &mut shapes);
                pres.tabulate(c, &geo, xi, &mut pshapes);
                for q in 0..np {
                    for j in 0..nu {
                        local[q * nu + j] += w * geo.det * shapes[j].div() * pshapes[q].val[0];
                    }
                }
            }
            let (vd, pd) = (vel.cell_dofs(c), pres.cell_dofs(c));
            for q in 0..np {
                for j in 0..nu {
                    t.push((pd[q], vd[j], local[q * nu + j]));
                }
            }
        }
        SparseMatrix::from_triplets(pres.ndofs(), vel.ndofs(), &t)
    }

    /// `N[i, j] = form(a, phi_j, phi_i)` on the velocity pattern. The pattern
    /// couples components only for the EMAC form.
    pub fn convection(&self, form: ConvectiveForm, a: &Field, space: &Arc<Space>) -> Result<SparseMatrix> {
        self.convection_on(form, a, space, form.couples_components())
    }

    /// As [`Assembler::convection`] but on an explicitly chosen pattern.
    pub fn convection_on(
        &self,
        form: ConvectiveForm,
        a: &Field,
        space: &Arc<Space>,
        full: bool,
    ) -> Result<SparseMatrix> {
        check_convection(form, a, space)?;
        if form.couples_components() && !full {
            return Err(Error::KindMismatch("the EMAC form needs the coupled pattern".into()));
        }
        let adv = |v: &Shape, a: &Eval| -> [f64; 2] {
            // (a.grad) v
            [
                a.value[0] * v.grad[0][0] + a.value[1] * v.grad[0][1],
                a.value[0] * v.grad[1][0] + a.value[1] * v.grad[1][1],
            ]
        };
        let m = match form {
            ConvectiveForm::Conv | ConvectiveForm::ModConv => self.square(space, full, Some(a), |w, v, a| {
                let g = adv(v, a);
                g[0] * w.val[0] + g[1] * w.val[1]
            }),
            ConvectiveForm::Skew => self.square(space, full, Some(a), |w, v, a| {
                let g = adv(v, a);
                g[0] * w.val[0] + g[1] * w.val[1] + 0.5 * a.div * (v.val[0] * w.val[0] + v.val[1] * w.val[1])
            }),
            ConvectiveForm::EmacLin => self.square(space, full, Some(a), |w, v, a| {
                // ((w.grad) v, a) - ((v.grad) w, a)
                let mut s = 0.0;
                for k in 0..2 {
                    let wv = w.val[0] * v.grad[k][0] + w.val[1] * v.grad[k][1];
                    let vw = v.val[0] * w.grad[k][0] + v.val[1] * w.grad[k][1];
                    s += (wv - vw) * a.value[k];
                }
                s
            }),
        };
        Ok(m)
    }

    /// `N[i, j] = ((a.grad) psi_j, psi_i)` for scalar transport.
    pub fn vorticity_operator(&self, a: &Field, w_space: &Arc<Space>) -> Result<SparseMatrix> {
        if !a.kind().is_hdiv() {
            return Err(Error::KindMismatch(format!(
                "vorticity transport needs an H(div) advecting field, got {}",
                a.kind()
            )));
        }
        if w_space.kind() != ElementKind::ScalarP2 {
            return Err(Error::KindMismatch(format!("vorticity space must be P2, got {}", w_space.kind())));
        }
        Ok(self.square(w_space, false, Some(a), |w, v, a| {
            (a.value[0] * v.grad[0][0] + a.value[1] * v.grad[0][1]) * w.val[0]
        }))
    }

    /// `F[i] = (f, phi_i)`; scalar spaces use component 0.
    pub fn load(&self, space: &Arc<Space>, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let mesh = space.mesh();
        let n = space.local_dofs();
        let mut out = vec![0.0; space.ndofs()];
        let mut shapes = [Shape::default(); 14];
        let mut local = vec![0.0; n];
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            local.iter_mut().for_each(|v| *v = 0.0);
            for (xi, w) in self.rule.iter() {
                space.tabulate(c, &geo, xi, &mut shapes);
                let fx = f(geo.map(xi));
                for i in 0..n {
                    local[i] += w * geo.det * (fx[0] * shapes[i].val[0] + fx[1] * shapes[i].val[1]);
                }
            }
            for (i, &g) in space.cell_dofs(c).iter().enumerate() {
                out[g] += local[i];
            }
        }
        out
    }

    /// `F[i] = (g, grad phi_i)` for a velocity gradient `g[k][j] = d u_k / d x_j`.
    pub fn gradient_load(&self, space: &Arc<Space>, g: impl Fn(Point) -> [[f64; 2]; 2]) -> Vec<f64> {
        let mesh = space.mesh();
        let n = space.local_dofs();
        let mut out = vec![0.0; space.ndofs()];
        let mut shapes = [Shape::default(); 14];
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            for (xi, w) in self.rule.iter() {
                space.tabulate(c, &geo, xi, &mut shapes);
                let gx = g(geo.map(xi));
                for (i, &dof) in space.cell_dofs(c).iter().enumerate().take(n) {
                    let d = shapes[i].grad;
                    out[dof] += w * geo.det * (gx[0][0] * d[0][0] + gx[0][1] * d[0][1] + gx[1][0] * d[1][0] + gx[1][1] * d[1][1]);
                }
            }
        }
        out
    }

    /// `m[q] = (1, psi_q)`.
    pub fn mean_vector(&self, space: &Arc<Space>) -> Vec<f64> {
        self.load(space, |_| [1.0, 0.0])
    }

    /// L2 projection of a field given cell-locally, `f(c, x)`.
    pub fn l2_project_local(&self, space: &Arc<Space>, f: impl Fn(usize, Point) -> [f64; 2]) -> Result<Field> {
        let mesh = space.mesh();
        let n = space.local_dofs();
        let mut rhs = vec![0.0; space.ndofs()];
        let mut shapes = [Shape::default(); 14];
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            for (xi, w) in self.rule.iter() {
                space.tabulate(c, &geo, xi, &mut shapes);
                let fx = f(c, geo.map(xi));
                for (i, &g) in space.cell_dofs(c).iter().enumerate().take(n) {
                    rhs[g] += w * geo.det * (fx[0] * shapes[i].val[0] + fx[1] * shapes[i].val[1]);
                }
            }
        }
        let x = lu_solve(&self.mass(space), &rhs)?;
        Field::new(space.clone(), x)
    }
}

fn check_pair(vel: ElementKind, pres: ElementKind) -> Result<()> {
    use ElementKind::*;
    match (vel, pres) {
        (VectorP2, ScalarP1) | (VectorP2Bubble, ScalarP1Disc) | (VectorBernardiRaugel, ScalarP0) => Ok(()),
        _ => Err(Error::Pairing(format!("{vel}/{pres} is not a supported velocity/pressure pair"))),
    }
}

fn check_convection(form: ConvectiveForm, a: &Field, space: &Arc<Space>) -> Result<()> {
    if !space.kind().is_vector() || space.kind().is_hdiv() {
        return Err(Error::KindMismatch(format!("{} is not a velocity space", space.kind())));
    }
    if !Arc::ptr_eq(a.space().mesh(), space.mesh()) {
        return Err(Error::KindMismatch("advecting field lives on another mesh".into()));
    }
    let hdiv = a.kind().is_hdiv();
    match form {
        ConvectiveForm::ModConv if !hdiv => Err(Error::KindMismatch(format!(
            "modified convection needs an RT1 or BDM1 advecting field, got {}",
            a.kind()
        ))),
        ConvectiveForm::Conv | ConvectiveForm::Skew | ConvectiveForm::EmacLin if hdiv || a.kind().is_scalar() => {
            Err(Error::KindMismatch(format!(
                "{form} needs a velocity-space advecting field, got {}",
                a.kind()
            )))
        }
        _ => Ok(()),
    }
}

pub fn assemble_mass(space: &Arc<Space>) -> SparseMatrix {
    Assembler::default().mass(space)
}

pub fn assemble_stiffness(space: &Arc<Space>) -> SparseMatrix {
    Assembler::default().stiffness(space)
}

pub fn assemble_div(vel: &Arc<Space>, pres: &Arc<Space>) -> Result<SparseMatrix> {
    Assembler::default().div(vel, pres)
}

pub fn assemble_convection(form: ConvectiveForm, a: &Field, space: &Arc<Space>) -> Result<SparseMatrix> {
    Assembler::default().convection(form, a, space)
}

pub fn assemble_vorticity_operator(a: &Field, w_space: &Arc<Space>) -> Result<SparseMatrix> {
    Assembler::default().vorticity_operator(a, w_space)
}
