//! Conforming triangulations of rectangles and the forward-backward-step channel.
//!
//! Cells are stored counter-clockwise. Edges carry a global orientation from
//! the lower vertex index to the higher one, and local edge `l` of a cell is
//! the edge opposite its local vertex `l`.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inflow,
    Outflow,
    Wall,
    Generic,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Inflow,
        BoundaryTag::Outflow,
        BoundaryTag::Wall,
        BoundaryTag::Generic,
    ];

    pub fn index(self) -> usize {
        match self {
            BoundaryTag::Inflow => 0,
            BoundaryTag::Outflow => 1,
            BoundaryTag::Wall => 2,
            BoundaryTag::Generic => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Rect,
    GreshoSquare,
    StepChannel,
}

/// Position and size of the rectangular notch cut out of the channel floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepGeometry {
    pub x0: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for StepGeometry {
    fn default() -> Self {
        StepGeometry {
            x0: 5.0,
            width: 1.0,
            height: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// `[xmin, xmax, ymin, ymax]`
    pub bounds: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub step: Option<StepGeometry>,
}

impl DomainSpec {
    pub fn rect(bounds: [f64; 4], nx: usize, ny: usize) -> Self {
        DomainSpec {
            kind: DomainKind::Rect,
            bounds,
            nx,
            ny,
            step: None,
        }
    }

    pub fn unit_square(n: usize) -> Self {
        Self::rect([0.0, 1.0, 0.0, 1.0], n, n)
    }

    /// The centered square `(-0.5, 0.5)^2`.
    pub fn gresho_square(n: usize) -> Self {
        DomainSpec {
            kind: DomainKind::GreshoSquare,
            bounds: [-0.5, 0.5, -0.5, 0.5],
            nx: n,
            ny: n,
            step: None,
        }
    }

    /// The 40 x 10 channel with a unit step on the floor starting at x = 5.
    /// `nx`/`ny` are unused; the channel is meshed from a target size.
    pub fn step_channel() -> Self {
        DomainSpec {
            kind: DomainKind::StepChannel,
            bounds: [0.0, 40.0, 0.0, 10.0],
            nx: 1,
            ny: 1,
            step: Some(StepGeometry::default()),
        }
    }

    pub fn area(&self) -> f64 {
        let [x0, x1, y0, y1] = self.bounds;
        let step = self.step.map_or(0.0, |s| s.width * s.height);
        (x1 - x0) * (y1 - y0) - step
    }

    fn validate(&self) -> Result<()> {
        let [x0, x1, y0, y1] = self.bounds;
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidSpec(format!(
                "cell counts must be positive, got nx={} ny={}",
                self.nx, self.ny
            )));
        }
        if !(x1 > x0 && y1 > y0) || !bounds_finite(&self.bounds) {
            return Err(Error::InvalidSpec(format!(
                "degenerate bounds {:?}",
                self.bounds
            )));
        }
        Ok(())
    }
}

fn bounds_finite(b: &[f64; 4]) -> bool {
    b.iter().all(|v| v.is_finite())
}

/// Affine map from the reference triangle `(0,0),(1,0),(0,1)` onto a cell.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub origin: Point,
    /// Columns are `x1 - x0` and `x2 - x0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(p: [Point; 3]) -> Self {
        let jac = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        CellGeometry {
            origin: p[0],
            jac,
            det,
            inv,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn map(&self, xi: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn pullback(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient: `J^{-T} g`.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    cell_edge_signs: Vec<[f64; 3]>,
    edge_cells: Vec<[Option<usize>; 2]>,
    boundary_tags: Vec<Option<BoundaryTag>>,
}

impl Mesh {
    /// Builds connectivity from vertex coordinates and cell triples. Cells given
    /// clockwise are reoriented; degenerate cells are rejected. `tag` names the
    /// boundary part of each boundary edge from its two vertex indices.
    pub fn new(
        vertices: Vec<Point>,
        mut cells: Vec<[usize; 3]>,
        tag: impl Fn(usize, usize) -> BoundaryTag,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references a missing vertex"
                )));
            }
            let g = CellGeometry::new([vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]]);
            if g.det == 0.0 || !g.det.is_finite() {
                return Err(Error::InvalidMesh(format!("cell {c} is degenerate")));
            }
            if g.det < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut edges = Vec::new();
        let mut edge_cells: Vec<[Option<usize>; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            let mut cs = [0.0; 3];
            for l in 0..3 {
                let a = cell[(l + 1) % 3];
                let b = cell[(l + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push([None, None]);
                    edges.len() - 1
                });
                match edge_cells[e] {
                    [None, _] => edge_cells[e][0] = Some(c),
                    [Some(_), None] => edge_cells[e][1] = Some(c),
                    _ => {
                        return Err(Error::InvalidMesh(format!(
                            "edge ({}, {}) shared by more than two cells",
                            key.0, key.1
                        )))
                    }
                }
                ce[l] = e;
                cs[l] = if a < b { 1.0 } else { -1.0 };
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
        }
        let boundary_tags = edges
            .iter()
            .zip(&edge_cells)
            .map(|(e, ec)| ec[1].is_none().then(|| tag(e[0], e[1])))
            .collect();

        Ok(Mesh {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_signs,
            edge_cells,
            boundary_tags,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> [usize; 3] {
        self.cells[c]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn cell_edges(&self, c: usize) -> [usize; 3] {
        self.cell_edges[c]
    }

    /// +1 when the counter-clockwise traversal of the local edge runs from the
    /// lower to the higher vertex index, -1 otherwise.
    pub fn cell_edge_signs(&self, c: usize) -> [f64; 3] {
        self.cell_edge_signs[c]
    }

    pub fn edge_cells(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_cells[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_cells[e][1].is_none()
    }

    pub fn boundary_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.boundary_tags[e]
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.is_boundary_edge(e))
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn geometry(&self, c: usize) -> CellGeometry {
        CellGeometry::new(self.cell_points(c))
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.geometry(c).area()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Unit normal obtained by turning the low-to-high tangent clockwise. For
    /// a cell with edge sign +1 this is the outward normal.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let len = self.edge_length(e);
        [(q[1] - p[1]) / len, -(q[0] - p[0]) / len]
    }

    pub fn max_cell_diameter(&self) -> f64 {
        (0..self.cells.len())
            .map(|c| {
                self.cell_edges[c]
                    .iter()
                    .map(|&e| self.edge_length(e))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    pub fn euler_characteristic(&self) -> isize {
        self.vertices.len() as isize - self.edges.len() as isize + self.cells.len() as isize
    }

    /// Relabels vertices so that old vertex `v` becomes `perm[v]`.
    pub fn renumber_vertices(&self, perm: &[usize]) -> Result<Mesh> {
        let n = self.vertices.len();
        if perm.len() != n {
            return Err(Error::InvalidMesh("permutation length mismatch".into()));
        }
        let mut vertices = vec![[0.0; 2]; n];
        let mut seen = vec![false; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || seen[new] {
                return Err(Error::InvalidMesh("not a permutation".into()));
            }
            seen[new] = true;
            vertices[new] = self.vertices[old];
        }
        let cells = self
            .cells
            .iter()
            .map(|c| [perm[c[0]], perm[c[1]], perm[c[2]]])
            .collect();
        let mut tags = HashMap::new();
        for e in self.boundary_edges() {
            let [a, b] = self.edges[e];
            let (pa, pb) = (perm[a], perm[b]);
            tags.insert((pa.min(pb), pa.max(pb)), self.boundary_tags[e].unwrap());
        }
        Mesh::new(vertices, cells, |a, b| {
            tags.get(&(a.min(b), a.max(b)))
                .copied()
                .unwrap_or(BoundaryTag::Generic)
        })
    }

    /// Checks the structural invariants; used by tests and after construction
    /// of user-supplied meshes.
    pub fn check(&self) -> Result<()> {
        for c in 0..self.cells.len() {
            if self.geometry(c).det <= 0.0 {
                return Err(Error::InvalidMesh(format!("cell {c} is not counter-clockwise")));
            }
            for (l, &e) in self.cell_edges[c].iter().enumerate() {
                if !self.edge_cells[e].contains(&Some(c)) {
                    return Err(Error::InvalidMesh(format!(
                        "edge {e} does not list cell {c} (local {l})"
                    )));
                }
            }
        }
        for e in 0..self.edges.len() {
            let interior = self.edge_cells[e][1].is_some();
            if interior == self.boundary_tags[e].is_some() {
                return Err(Error::InvalidMesh(format!("edge {e} tag/adjacency mismatch")));
            }
            if interior {
                let sum: f64 = self.edge_cells[e]
                    .iter()
                    .flatten()
                    .map(|&c| {
                        let l = self.local_edge_index(c, e).unwrap();
                        self.cell_edge_signs[c][l]
                    })
                    .sum();
                if sum != 0.0 {
                    return Err(Error::InvalidMesh(format!("edge {e} has inconsistent signs")));
                }
            }
        }
        Ok(())
    }

    pub fn local_edge_index(&self, c: usize, e: usize) -> Option<usize> {
        self.cell_edges[c].iter().position(|&x| x == e)
    }
}

/// Uniform triangulation of a rectangle: `nx * ny` quadrilaterals each split
/// along the lower-left to upper-right diagonal. All boundary edges are walls.
pub fn generate_uniform(spec: &DomainSpec) -> Result<Mesh> {
    if spec.kind == DomainKind::StepChannel {
        return Err(Error::InvalidSpec(
            "the step channel is meshed with generate_step_channel".into(),
        ));
    }
    spec.validate()?;
    let [x0, x1, y0, y1] = spec.bounds;
    let xs = linspace(x0, x1, spec.nx);
    let ys = linspace(y0, y1, spec.ny);
    let active = vec![true; spec.nx * spec.ny];
    tensor_mesh(&xs, &ys, &active, |_, _| BoundaryTag::Wall)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    v[n] = b;
    v
}

/// Triangulates the active quads of a tensor grid. Vertices are numbered by
/// grid index (row-major in y) and only those touched by an active quad kept.
fn tensor_mesh(
    xs: &[f64],
    ys: &[f64],
    active: &[bool],
    tag: impl Fn(Point, Point) -> BoundaryTag,
) -> Result<Mesh> {
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            if active[j * nx + i] {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[grid(i + di, j + dj)] = true;
                }
            }
        }
    }
    let mut id = vec![usize::MAX; used.len()];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[grid(i, j)] {
                id[grid(i, j)] = vertices.len();
                vertices.push([xs[i], ys[j]]);
            }
        }
    }
    let mut cells = Vec::with_capacity(2 * active.len());
    for j in 0..ny {
        for i in 0..nx {
            if !active[j * nx + i] {
                continue;
            }
            let v00 = id[grid(i, j)];
            let v10 = id[grid(i + 1, j)];
            let v01 = id[grid(i, j + 1)];
            let v11 = id[grid(i + 1, j + 1)];
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    let coords = vertices.clone();
    Mesh::new(vertices, cells, |a, b| tag(coords[a], coords[b]))
}

const GRADING: f64 = 0.8;

/// Breakpoints of one axis: each segment is split uniformly with spacing at
/// most `h`, then the interval touching a graded coordinate is split into
/// three layers shrinking geometrically towards it.
fn graded_axis(breaks: &[f64], h: f64, graded: &[f64]) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let grade_a = graded.contains(&a);
        let grade_b = graded.contains(&b);
        let mut n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        if n == 1 && grade_a && grade_b {
            n = 2;
        }
        let d = (b - a) / n as f64;
        let unit = d / (1.0 + GRADING + GRADING * GRADING);
        for k in 0..n {
            let lo = a + d * k as f64;
            if k == 0 && grade_a {
                out.push(a + unit * GRADING * GRADING);
                out.push(a + unit * (GRADING * GRADING + GRADING));
            }
            if k == n - 1 && grade_b {
                out.push(b - unit * (GRADING * GRADING + GRADING));
                out.push(b - unit * GRADING * GRADING);
                out.push(b);
            } else {
                out.push(if k == n - 1 { b } else { lo + d });
            }
        }
    }
    out
}

/// Structured triangulation of the step channel with the step removed and
/// geometric grading towards the two re-entrant corners of the step.
pub fn generate_step_channel(spec: &DomainSpec, target_h: f64) -> Result<Mesh> {
    if spec.kind != DomainKind::StepChannel {
        return Err(Error::InvalidSpec("expected a step channel spec".into()));
    }
    let step = spec
        .step
        .ok_or_else(|| Error::InvalidSpec("step geometry missing".into()))?;
    let [x0, x1, y0, y1] = spec.bounds;
    if !(target_h > 0.0) || !target_h.is_finite() {
        return Err(Error::InvalidSpec(format!("target_h must be positive, got {target_h}")));
    }
    if target_h > step.width.min(step.height) {
        return Err(Error::InvalidSpec(format!(
            "target_h {target_h} exceeds the step size"
        )));
    }
    let (sx0, sx1, sy1) = (step.x0, step.x0 + step.width, y0 + step.height);
    if !(x0 < sx0 && sx1 < x1 && sy1 < y1) {
        return Err(Error::InvalidSpec("step does not fit in the channel".into()));
    }
    let xs = graded_axis(&[x0, sx0, sx1, x1], target_h, &[sx0, sx1]);
    let ys = graded_axis(&[y0, sy1, y1], target_h, &[sy1]);
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut active = vec![true; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if cx > sx0 && cx < sx1 && cy < sy1 {
                active[j * nx + i] = false;
            }
        }
    }
    tensor_mesh(&xs, &ys, &active, |p, q| {
        if p[0] == x0 && q[0] == x0 {
            BoundaryTag::Inflow
        } else if p[0] == x1 && q[0] == x1 {
            BoundaryTag::Outflow
        } else {
            BoundaryTag::Wall
        }
    })
}

/// Red refinement: every triangle is split into four through its edge
/// midpoints. Midpoint of edge `e` becomes vertex `V + e`.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend((0..mesh.num_edges()).map(|e| mesh.edge_midpoint(e)));
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let [a, b, d] = mesh.cells[c];
        let [e0, e1, e2] = mesh.cell_edges[c];
        // e0 is opposite a (b-d), e1 opposite b (d-a), e2 opposite d (a-b)
        let (m_bd, m_da, m_ab) = (nv + e0, nv + e1, nv + e2);
        cells.push([a, m_ab, m_da]);
        cells.push([m_ab, b, m_bd]);
        cells.push([m_da, m_bd, d]);
        cells.push([m_ab, m_bd, m_da]);
    }
    let parent_tags = &mesh.boundary_tags;
    Mesh::new(vertices, cells, |a, b| {
        let mid = a.max(b);
        debug_assert!(mid >= nv);
        parent_tags[mid - nv].unwrap_or(BoundaryTag::Generic)
    })
}
