//! Coefficient vectors bound to a space.

use std::sync::Arc;

use super::element::{check_reference, LocalEntity};
use super::{ElementKind, Shape, Space};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::{gauss_legendre, QuadratureRule};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Eval {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
    pub div: f64,
}

impl Eval {
    /// Scalar curl `d u2/dx - d u1/dy`.
    pub fn curl(&self) -> f64 {
        self.grad[1][0] - self.grad[0][1]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub div_l2: f64,
}

#[derive(Clone, Debug)]
pub struct Field {
    space: Arc<Space>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<Space>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::KindMismatch(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        Ok(Field { space, coeffs })
    }

    pub fn zeros(space: Arc<Space>) -> Self {
        let n = space.ndofs();
        Field {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn kind(&self) -> ElementKind {
        self.space.kind()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Interpolates an analytic vector field. Scalar spaces use component 0.
    pub fn interpolate(space: &Arc<Space>, f: impl Fn(Point) -> [f64; 2]) -> Field {
        Self::interpolate_local(space, |_, x| f(x))
    }

    pub fn interpolate_scalar(space: &Arc<Space>, f: impl Fn(Point) -> f64) -> Field {
        Self::interpolate_local(space, |_, x| [f(x), 0.0])
    }

    /// Interpolation of a field that is only known cell by cell: `f(c, x)`
    /// evaluates it at physical point `x` of cell `c`. Shared dofs take the
    /// value seen from the first cell visiting them.
    pub fn interpolate_local(space: &Arc<Space>, f: impl Fn(usize, Point) -> [f64; 2]) -> Field {
        let mesh = space.mesh();
        let kind = space.kind();
        let mut coeffs = vec![0.0; space.ndofs()];
        let mut done = vec![false; space.ndofs()];
        let (gs, gw) = gauss_legendre(5);
        let rule = QuadratureRule::default();
        let layout = space.local_layout();

        for c in 0..mesh.num_cells() {
            let dofs = space.cell_dofs(c);
            if dofs.iter().all(|&g| done[g]) {
                continue;
            }
            let geo = mesh.geometry(c);
            let verts = mesh.cell(c);
            let edges = mesh.cell_edges(c);
            let centroid = geo.map([1.0 / 3.0, 1.0 / 3.0]);
            let edge_trace = |l: usize, k: usize| -> f64 {
                // (1/|e|) int_e f.n s^k ds, s from the low to the high vertex
                let [lo, hi] = mesh.edge(edges[l]);
                let (p, q) = (mesh.vertex(lo), mesh.vertex(hi));
                let n = mesh.edge_normal(edges[l]);
                gs.iter()
                    .zip(&gw)
                    .map(|(&s, &w)| {
                        let x = [
                            0.5 * (p[0] + q[0]) + 0.5 * s * (q[0] - p[0]),
                            0.5 * (p[1] + q[1]) + 0.5 * s * (q[1] - p[1]),
                        ];
                        let v = f(c, x);
                        0.5 * w * s.powi(k as i32) * (v[0] * n[0] + v[1] * n[1])
                    })
                    .sum()
            };
            match kind {
                ElementKind::HdivRT1 | ElementKind::HdivBDM1 => {
                    for (i, &g) in dofs.iter().enumerate() {
                        if done[g] {
                            continue;
                        }
                        coeffs[g] = match layout[i].0 {
                            LocalEntity::Edge(l) => edge_trace(l, i % 2),
                            _ => {
                                let k = i - 6;
                                rule.iter().map(|(xi, w)| 2.0 * w * f(c, geo.map(xi))[k]).sum()
                            }
                        };
                        done[g] = true;
                    }
                }
                ElementKind::VectorBernardiRaugel => {
                    for (i, &g) in dofs.iter().enumerate() {
                        if done[g] {
                            continue;
                        }
                        coeffs[g] = if i < 6 {
                            f(c, mesh.vertex(verts[i % 3]))[i / 3]
                        } else {
                            let l = i - 6;
                            let e = edges[l];
                            let n = mesh.edge_normal(e);
                            let [lo, hi] = mesh.edge(e);
                            let (fa, fb) = (f(c, mesh.vertex(lo)), f(c, mesh.vertex(hi)));
                            let linear = 0.5 * ((fa[0] + fb[0]) * n[0] + (fa[1] + fb[1]) * n[1]);
                            // int_e 4 l_a l_b = 2|e|/3, and both moments are scaled by 1/|e|
                            (edge_trace(l, 0) - linear) * 1.5
                        };
                        done[g] = true;
                    }
                }
                _ => {
                    let bubble = kind == ElementKind::VectorP2Bubble;
                    let fc = bubble.then(|| f(c, centroid));
                    let mut nodal = [[0.0; 2]; 6];
                    if bubble {
                        for (l, slot) in nodal.iter_mut().enumerate() {
                            *slot = if l < 3 {
                                f(c, mesh.vertex(verts[l]))
                            } else {
                                f(c, mesh.edge_midpoint(edges[l - 3]))
                            };
                        }
                    }
                    for (i, &g) in dofs.iter().enumerate() {
                        if done[g] {
                            continue;
                        }
                        let (ent, dir) = layout[i];
                        let k = match dir {
                            super::DofDirection::Component(k) => k,
                            _ => 0,
                        };
                        coeffs[g] = match (kind, ent) {
                            (ElementKind::ScalarP1Disc, _) => f(c, mesh.vertex(verts[i]))[0],
                            (ElementKind::ScalarP0, _) => f(c, centroid)[0],
                            (_, LocalEntity::Vertex(l)) => f(c, mesh.vertex(verts[l]))[k],
                            (_, LocalEntity::Edge(l)) => f(c, mesh.edge_midpoint(edges[l]))[k],
                            (_, LocalEntity::Cell) => {
                                // P2 interpolant at the centroid: -1/9 sum(vertices) + 4/9 sum(midpoints)
                                let p2: f64 = (0..3)
                                    .map(|l| -nodal[l][k] / 9.0 + 4.0 * nodal[3 + l][k] / 9.0)
                                    .sum();
                                fc.unwrap()[k] - p2
                            }
                        };
                        done[g] = true;
                    }
                }
            }
        }
        Field {
            space: space.clone(),
            coeffs,
        }
    }

    /// Value, Jacobian and divergence at reference points of cell `c`.
    pub fn evaluate(&self, c: usize, points: &[[f64; 2]]) -> Result<Vec<Eval>> {
        if c >= self.space.mesh().num_cells() {
            return Err(Error::InvalidMesh(format!("cell {c} out of range")));
        }
        points
            .iter()
            .map(|&xi| {
                check_reference(xi)?;
                Ok(self.eval_ref(c, xi))
            })
            .collect()
    }

    pub(crate) fn eval_ref(&self, c: usize, xi: [f64; 2]) -> Eval {
        let geo = self.space.mesh().geometry(c);
        let mut shapes = [Shape::default(); 14];
        self.space.tabulate(c, &geo, xi, &mut shapes);
        self.combine(c, &shapes)
    }

    /// Combines tabulated basis values of cell `c` with the coefficients.
    pub fn combine(&self, c: usize, shapes: &[Shape]) -> Eval {
        let mut out = Eval::default();
        for (s, &g) in shapes.iter().zip(self.space.cell_dofs(c)) {
            let a = self.coeffs[g];
            if a == 0.0 {
                continue;
            }
            for k in 0..2 {
                out.value[k] += a * s.val[k];
                for d in 0..2 {
                    out.grad[k][d] += a * s.grad[k][d];
                }
            }
        }
        out.div = out.grad[0][0] + out.grad[1][1];
        out
    }

    /// Evaluation at a physical point known to lie in cell `c`.
    pub fn eval_at(&self, c: usize, x: Point) -> Eval {
        let xi = self.space.mesh().geometry(c).pullback(x);
        self.eval_ref(c, xi)
    }

    /// Integrates `g(x, eval)` over the domain with the default rule.
    pub fn integrate<const N: usize>(&self, g: impl Fn(Point, &Eval) -> [f64; N]) -> [f64; N] {
        let mesh = self.space.mesh();
        let rule = QuadratureRule::default();
        let mut shapes = [Shape::default(); 14];
        let mut total = [0.0; N];
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            let mut cell = [0.0; N];
            for (xi, w) in rule.iter() {
                self.space.tabulate(c, &geo, xi, &mut shapes);
                let e = self.combine(c, &shapes);
                let v = g(geo.map(xi), &e);
                for k in 0..N {
                    cell[k] += w * v[k];
                }
            }
            for k in 0..N {
                total[k] += geo.det * cell[k];
            }
        }
        total
    }

    /// Maximum of `g(eval)` over all quadrature points of the default rule.
    pub fn max_at_quadrature(&self, g: impl Fn(&Eval) -> f64) -> f64 {
        let mesh = self.space.mesh();
        let rule = QuadratureRule::default();
        let mut shapes = [Shape::default(); 14];
        let mut worst = f64::NEG_INFINITY;
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            for (xi, _) in rule.iter() {
                self.space.tabulate(c, &geo, xi, &mut shapes);
                worst = worst.max(g(&self.combine(c, &shapes)));
            }
        }
        worst
    }

    /// `max |u|` and `max |div u|` over quadrature points.
    pub fn sup_norms(&self) -> (f64, f64) {
        let v = self.max_at_quadrature(|e| e.value[0].hypot(e.value[1]));
        let d = self.max_at_quadrature(|e| e.div.abs());
        (v, d)
    }

    pub fn norms(&self) -> Norms {
        let [l2, h1, div] = self.integrate(|_, e| {
            let g = e.grad;
            [
                e.value[0] * e.value[0] + e.value[1] * e.value[1],
                g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1],
                e.div * e.div,
            ]
        });
        Norms {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
            div_l2: if self.kind().is_scalar() { 0.0 } else { div.sqrt() },
        }
    }

    /// `||u_h - exact||_{L2}`.
    pub fn l2_error(&self, exact: impl Fn(Point) -> [f64; 2]) -> f64 {
        let [e] = self.integrate(|x, e| {
            let u = exact(x);
            let (a, b) = (e.value[0] - u[0], e.value[1] - u[1]);
            [a * a + b * b]
        });
        e.sqrt()
    }

    /// `|u_h - exact|_{H1}` given the exact Jacobian `grad[k][d]`.
    pub fn h1_error(&self, exact_grad: impl Fn(Point) -> [[f64; 2]; 2]) -> f64 {
        let [e] = self.integrate(|x, e| {
            let g = exact_grad(x);
            let mut s = 0.0;
            for k in 0..2 {
                for d in 0..2 {
                    s += (e.grad[k][d] - g[k][d]).powi(2);
                }
            }
            [s]
        });
        e.sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &Field) {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
