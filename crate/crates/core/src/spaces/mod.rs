//! Finite-element spaces: global dof numbering, boundary classification and
//! physical basis tabulation.

mod element;
mod field;

use std::sync::{Arc, OnceLock};

pub use element::{DofDirection, ElementKind, ElementPair, LocalEntity};
pub(crate) use element::{barycentric, REF_VERTICES};
pub use field::{Eval, Field, Norms};

use element::{hdiv_reference, hdiv_span, scalar_entity, scalar_family, scalar_shapes, ScalarFamily};

use crate::linalg::dense::DenseMatrix;
use crate::linalg::sparse::SparseMatrix;
use crate::mesh::{CellGeometry, Mesh, Point};
use crate::quadrature::{gauss_legendre, QuadratureRule};

/// Physical value and Jacobian of one basis function at one point.
/// `grad[k][d]` is the derivative of component `k` in direction `d`; scalar
/// functions use component 0 only.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Shape {
    pub val: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl Shape {
    pub fn div(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Edge(usize),
    Cell(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryClass {
    Interior,
    /// Acts along the outward normal of the boundary it sits on.
    Normal,
    /// Acts tangentially to the boundary it sits on.
    Tangential,
    /// Sits where the boundary normals span both directions, or a scalar on
    /// the boundary.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DofInfo {
    pub entity: Entity,
    pub direction: DofDirection,
    pub point: Point,
    pub class: BoundaryClass,
}

#[derive(Debug)]
pub struct Space {
    kind: ElementKind,
    mesh: Arc<Mesh>,
    ndofs: usize,
    nloc: usize,
    local: Vec<(LocalEntity, DofDirection)>,
    cell_dofs: Vec<usize>,
    /// Per cell, the `span x nloc` matrix turning Piola-mapped reference
    /// functions into the nodal H(div) basis.
    hdiv_coeffs: Vec<f64>,
    dofs: Vec<DofInfo>,
    patterns: [OnceLock<Arc<CellPattern>>; 2],
}

/// Sparsity pattern of square operators on a space, with the value-array
/// position of every local `(i, j)` pair so assembly can scatter without
/// sorting. In the split variant, Lagrange dofs of different vector
/// components are not coupled.
#[derive(Debug)]
pub struct CellPattern {
    pub matrix: SparseMatrix,
    /// `pos[(c * nloc + i) * nloc + j]`, `usize::MAX` where not coupled.
    pub pos: Vec<usize>,
    pub nloc: usize,
}

impl CellPattern {
    fn build(space: &Space, full: bool) -> CellPattern {
        let nloc = space.nloc;
        let couples = |i: usize, j: usize| {
            full || match (space.local[i].1, space.local[j].1) {
                (DofDirection::Component(a), DofDirection::Component(b)) => a == b,
                _ => true,
            }
        };
        let mut t = Vec::new();
        for c in 0..space.mesh.num_cells() {
            let d = space.cell_dofs(c);
            for i in 0..nloc {
                for j in 0..nloc {
                    if couples(i, j) {
                        t.push((d[i], d[j], 0.0));
                    }
                }
            }
        }
        let matrix = SparseMatrix::from_triplets(space.ndofs, space.ndofs, &t).expect("indices in range");
        let mut pos = Vec::with_capacity(space.mesh.num_cells() * nloc * nloc);
        for c in 0..space.mesh.num_cells() {
            let d = space.cell_dofs(c);
            for i in 0..nloc {
                for j in 0..nloc {
                    pos.push(if couples(i, j) { matrix.find(d[i], d[j]).unwrap() } else { usize::MAX });
                }
            }
        }
        CellPattern { matrix, pos, nloc }
    }

    pub fn cell_positions(&self, c: usize) -> &[usize] {
        let n = self.nloc * self.nloc;
        &self.pos[c * n..(c + 1) * n]
    }
}

impl Space {
    pub fn new(mesh: Arc<Mesh>, kind: ElementKind) -> Arc<Space> {
        let (nv, ne, nt) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_cells());
        let nloc = kind.local_dofs();
        let local = local_layout(kind);
        let ndofs = match kind {
            ElementKind::ScalarP1 => nv,
            ElementKind::ScalarP2 => nv + ne,
            ElementKind::ScalarP1Disc => 3 * nt,
            ElementKind::ScalarP0 => nt,
            ElementKind::VectorP2 => 2 * (nv + ne),
            ElementKind::VectorP2Bubble => 2 * (nv + ne + nt),
            ElementKind::VectorBernardiRaugel => 2 * nv + ne,
            ElementKind::HdivRT1 => 2 * ne + 2 * nt,
            ElementKind::HdivBDM1 => 2 * ne,
        };

        let mut vertex_boundary: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for e in mesh.boundary_edges() {
            for v in mesh.edge(e) {
                vertex_boundary[v].push(e);
            }
        }

        let mut cell_dofs = Vec::with_capacity(nt * nloc);
        let placeholder = DofInfo {
            entity: Entity::Cell(usize::MAX),
            direction: DofDirection::Scalar,
            point: [0.0; 2],
            class: BoundaryClass::Interior,
        };
        let mut dofs = vec![placeholder; ndofs];
        for c in 0..nt {
            let verts = mesh.cell(c);
            let edges = mesh.cell_edges(c);
            let pts = mesh.cell_points(c);
            let centroid = [
                (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
                (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
            ];
            for (i, &(ent, dir)) in local.iter().enumerate() {
                let (g, entity, point) = global_index(kind, &mesh, c, i, ent, dir);
                let point = point.unwrap_or(match ent {
                    LocalEntity::Vertex(l) => mesh.vertex(verts[l]),
                    LocalEntity::Edge(l) => mesh.edge_midpoint(edges[l]),
                    LocalEntity::Cell => centroid,
                });
                cell_dofs.push(g);
                let boundary = match entity {
                    Entity::Vertex(v) => vertex_boundary[v].clone(),
                    Entity::Edge(e) if mesh.is_boundary_edge(e) => vec![e],
                    _ => Vec::new(),
                };
                let class = classify(&mesh, dir, &boundary);
                dofs[g] = DofInfo {
                    entity,
                    direction: dir,
                    point,
                    class,
                };
            }
        }

        let mut space = Space {
            kind,
            mesh,
            ndofs,
            nloc,
            local,
            cell_dofs,
            hdiv_coeffs: Vec::new(),
            dofs,
            patterns: Default::default(),
        };
        if kind.is_hdiv() {
            space.hdiv_coeffs = space.build_hdiv_coeffs();
        }
        Arc::new(space)
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn local_dofs(&self) -> usize {
        self.nloc
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.nloc..(c + 1) * self.nloc]
    }

    pub fn dof(&self, i: usize) -> &DofInfo {
        &self.dofs[i]
    }

    pub fn dofs(&self) -> &[DofInfo] {
        &self.dofs
    }

    /// Cached operator pattern; `full` couples all vector components.
    pub fn pattern(&self, full: bool) -> Arc<CellPattern> {
        self.patterns[usize::from(full)]
            .get_or_init(|| Arc::new(CellPattern::build(self, full)))
            .clone()
    }

    pub fn local_layout(&self) -> &[(LocalEntity, DofDirection)] {
        &self.local
    }

    /// Dofs living on the closed edge `e` (its vertices and the edge itself).
    pub fn edge_dofs(&self, e: usize) -> Vec<usize> {
        let c = self.mesh.edge_cells(e)[0].expect("edge has a cell");
        let l = self.mesh.local_edge_index(c, e).expect("edge in cell");
        let on_edge = |ent: LocalEntity| match ent {
            LocalEntity::Vertex(v) => v != l,
            LocalEntity::Edge(k) => k == l,
            LocalEntity::Cell => false,
        };
        let dofs = self.cell_dofs(c);
        self.local
            .iter()
            .enumerate()
            .filter(|(_, (ent, _))| on_edge(*ent))
            .map(|(i, _)| dofs[i])
            .collect()
    }

    /// Physical basis values at reference point `xi` of cell `c`.
    pub fn tabulate(&self, c: usize, geo: &CellGeometry, xi: [f64; 2], out: &mut [Shape]) {
        let out = &mut out[..self.nloc];
        if let Some((fam, nsc)) = scalar_family(self.kind) {
            let mut v = [0.0; 7];
            let mut g = [[0.0; 2]; 7];
            scalar_shapes(fam, xi, &mut v, &mut g);
            for i in 0..nsc {
                let pg = geo.push_gradient(g[i]);
                out[i] = Shape {
                    val: [v[i], 0.0],
                    grad: [pg, [0.0; 2]],
                };
                if self.kind.is_vector() {
                    out[nsc + i] = Shape {
                        val: [0.0, v[i]],
                        grad: [[0.0; 2], pg],
                    };
                }
            }
            return;
        }
        match self.kind {
            ElementKind::VectorBernardiRaugel => {
                let mut v = [0.0; 7];
                let mut g = [[0.0; 2]; 7];
                scalar_shapes(ScalarFamily::P2, xi, &mut v, &mut g);
                let l = barycentric(xi);
                for i in 0..3 {
                    let pg = geo.push_gradient(element::DLAMBDA[i]);
                    out[i] = Shape {
                        val: [l[i], 0.0],
                        grad: [pg, [0.0; 2]],
                    };
                    out[3 + i] = Shape {
                        val: [0.0, l[i]],
                        grad: [[0.0; 2], pg],
                    };
                }
                let edges = self.mesh.cell_edges(c);
                for k in 0..3 {
                    let n = self.mesh.edge_normal(edges[k]);
                    let pg = geo.push_gradient(g[3 + k]);
                    out[6 + k] = Shape {
                        val: [n[0] * v[3 + k], n[1] * v[3 + k]],
                        grad: [
                            [n[0] * pg[0], n[0] * pg[1]],
                            [n[1] * pg[0], n[1] * pg[1]],
                        ],
                    };
                }
            }
            ElementKind::HdivRT1 | ElementKind::HdivBDM1 => {
                let span = hdiv_span(self.kind);
                let coeffs = &self.hdiv_coeffs[c * span * self.nloc..(c + 1) * span * self.nloc];
                for s in out.iter_mut() {
                    *s = Shape::default();
                }
                for m in 0..span {
                    let p = piola(geo, xi, m);
                    for (j, s) in out.iter_mut().enumerate() {
                        let a = coeffs[m * self.nloc + j];
                        if a == 0.0 {
                            continue;
                        }
                        for k in 0..2 {
                            s.val[k] += a * p.val[k];
                            for d in 0..2 {
                                s.grad[k][d] += a * p.grad[k][d];
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    fn build_hdiv_coeffs(&self) -> Vec<f64> {
        let mesh = &self.mesh;
        let span = hdiv_span(self.kind);
        let n = self.nloc;
        debug_assert_eq!(span, n);
        let (gs, gw) = gauss_legendre(5);
        let rule = QuadratureRule::default();
        let mut out = Vec::with_capacity(mesh.num_cells() * n * n);
        for c in 0..mesh.num_cells() {
            let geo = mesh.geometry(c);
            let verts = mesh.cell(c);
            let edges = mesh.cell_edges(c);
            let mut d = DenseMatrix::zeros(n);
            for l in 0..3 {
                let (a, b) = ((l + 1) % 3, (l + 2) % 3);
                let (lo, hi) = if verts[a] < verts[b] { (a, b) } else { (b, a) };
                let (xl, xh) = (REF_VERTICES[lo], REF_VERTICES[hi]);
                let normal = mesh.edge_normal(edges[l]);
                for (&s, &w) in gs.iter().zip(&gw) {
                    let xi = [
                        0.5 * (xl[0] + xh[0]) + 0.5 * s * (xh[0] - xl[0]),
                        0.5 * (xl[1] + xh[1]) + 0.5 * s * (xh[1] - xl[1]),
                    ];
                    for m in 0..span {
                        let p = piola(&geo, xi, m);
                        let vn = p.val[0] * normal[0] + p.val[1] * normal[1];
                        d[(2 * l, m)] += 0.5 * w * vn;
                        d[(2 * l + 1, m)] += 0.5 * w * s * vn;
                    }
                }
            }
            if n == 8 {
                for (xi, w) in rule.iter() {
                    for m in 0..span {
                        let p = piola(&geo, xi, m);
                        // (1/|T|) * w * det * v_k with |T| = det / 2
                        d[(6, m)] += 2.0 * w * p.val[0];
                        d[(7, m)] += 2.0 * w * p.val[1];
                    }
                }
            }
            let inv = d.inverse().expect("H(div) unisolvence");
            out.extend_from_slice(inv.as_slice());
        }
        out
    }
}

/// Contravariant Piola image of reference function `m`.
fn piola(geo: &CellGeometry, xi: [f64; 2], m: usize) -> Shape {
    let (v, g, _) = hdiv_reference(xi, m);
    let j = geo.jac;
    let det = geo.det;
    let val = [
        (j[0][0] * v[0] + j[0][1] * v[1]) / det,
        (j[1][0] * v[0] + j[1][1] * v[1]) / det,
    ];
    // J * g * J^{-1} / det
    let mut jg = [[0.0; 2]; 2];
    for a in 0..2 {
        for e in 0..2 {
            jg[a][e] = j[a][0] * g[0][e] + j[a][1] * g[1][e];
        }
    }
    let mut grad = [[0.0; 2]; 2];
    for a in 0..2 {
        for d in 0..2 {
            grad[a][d] = (jg[a][0] * geo.inv[0][d] + jg[a][1] * geo.inv[1][d]) / det;
        }
    }
    Shape { val, grad }
}

fn local_layout(kind: ElementKind) -> Vec<(LocalEntity, DofDirection)> {
    match kind {
        ElementKind::ScalarP1Disc => (0..3).map(|_| (LocalEntity::Cell, DofDirection::Scalar)).collect(),
        ElementKind::ScalarP0 => vec![(LocalEntity::Cell, DofDirection::Scalar)],
        ElementKind::ScalarP1 | ElementKind::ScalarP2 => {
            let (fam, n) = scalar_family(kind).unwrap();
            (0..n).map(|i| (scalar_entity(fam, i), DofDirection::Scalar)).collect()
        }
        ElementKind::VectorP2 | ElementKind::VectorP2Bubble => {
            let (fam, n) = scalar_family(kind).unwrap();
            (0..2)
                .flat_map(|k| (0..n).map(move |i| (scalar_entity(fam, i), DofDirection::Component(k))))
                .collect()
        }
        ElementKind::VectorBernardiRaugel => {
            let mut v: Vec<_> = (0..2)
                .flat_map(|k| (0..3).map(move |i| (LocalEntity::Vertex(i), DofDirection::Component(k))))
                .collect();
            v.extend((0..3).map(|l| (LocalEntity::Edge(l), DofDirection::EdgeNormal)));
            v
        }
        ElementKind::HdivRT1 | ElementKind::HdivBDM1 => {
            let mut v: Vec<_> = (0..6)
                .map(|i| (LocalEntity::Edge(i / 2), DofDirection::EdgeNormal))
                .collect();
            if kind == ElementKind::HdivRT1 {
                v.push((LocalEntity::Cell, DofDirection::Interior(0)));
                v.push((LocalEntity::Cell, DofDirection::Interior(1)));
            }
            v
        }
    }
}

/// Global index, owning entity, and (for vertex-located discontinuous dofs)
/// the nodal point of local dof `i` of cell `c`.
fn global_index(
    kind: ElementKind,
    mesh: &Mesh,
    c: usize,
    i: usize,
    ent: LocalEntity,
    dir: DofDirection,
) -> (usize, Entity, Option<Point>) {
    let (nv, ne, nt) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_cells());
    let verts = mesh.cell(c);
    let edges = mesh.cell_edges(c);
    let lagrange = |nscalar: usize, comp: usize| -> (usize, Entity) {
        let (s, e) = match ent {
            LocalEntity::Vertex(l) => (verts[l], Entity::Vertex(verts[l])),
            LocalEntity::Edge(l) => (nv + edges[l], Entity::Edge(edges[l])),
            LocalEntity::Cell => (nv + ne + c, Entity::Cell(c)),
        };
        (comp * nscalar + s, e)
    };
    let comp = match dir {
        DofDirection::Component(k) => k,
        _ => 0,
    };
    match kind {
        ElementKind::ScalarP1 | ElementKind::ScalarP2 => {
            let (g, e) = lagrange(0, 0);
            (g, e, None)
        }
        ElementKind::ScalarP1Disc => (3 * c + i, Entity::Cell(c), Some(mesh.vertex(verts[i]))),
        ElementKind::ScalarP0 => (c, Entity::Cell(c), None),
        ElementKind::VectorP2 => {
            let (g, e) = lagrange(nv + ne, comp);
            (g, e, None)
        }
        ElementKind::VectorP2Bubble => {
            let (g, e) = lagrange(nv + ne + nt, comp);
            (g, e, None)
        }
        ElementKind::VectorBernardiRaugel => match ent {
            LocalEntity::Vertex(l) => (comp * nv + verts[l], Entity::Vertex(verts[l]), None),
            LocalEntity::Edge(l) => (2 * nv + edges[l], Entity::Edge(edges[l]), None),
            LocalEntity::Cell => unreachable!(),
        },
        ElementKind::HdivRT1 | ElementKind::HdivBDM1 => match ent {
            LocalEntity::Edge(l) => (2 * edges[l] + i % 2, Entity::Edge(edges[l]), None),
            LocalEntity::Cell => (2 * ne + 2 * c + (i - 6), Entity::Cell(c), None),
            LocalEntity::Vertex(_) => unreachable!(),
        },
    }
}

fn classify(mesh: &Mesh, dir: DofDirection, boundary: &[usize]) -> BoundaryClass {
    if boundary.is_empty() {
        return BoundaryClass::Interior;
    }
    let mut axes = [false; 2];
    for &e in boundary {
        let n = mesh.edge_normal(e);
        for k in 0..2 {
            if n[k].abs() > 0.5 {
                axes[k] = true;
            }
        }
    }
    match dir {
        DofDirection::Scalar => BoundaryClass::Full,
        DofDirection::EdgeNormal => BoundaryClass::Normal,
        DofDirection::Interior(_) => BoundaryClass::Interior,
        DofDirection::Component(k) => {
            if axes[0] && axes[1] {
                BoundaryClass::Full
            } else if axes[k] {
                BoundaryClass::Normal
            } else {
                BoundaryClass::Tangential
            }
        }
    }
}

#[cfg(test)]
mod tests;
