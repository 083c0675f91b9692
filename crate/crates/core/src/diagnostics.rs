//! Conserved and monitored quantities, the per-step CSV record and VTK output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::spaces::{Eval, Field};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservedQuantities {
    /// `1/2 int |u|^2`
    pub kinetic_energy: f64,
    pub momentum: [f64; 2],
    /// `int (u1 y - u2 x)`
    pub angular_momentum: f64,
    /// `1/2 int w^2`
    pub enstrophy: f64,
    /// `int w`
    pub total_vorticity: f64,
}

/// Integrals of a velocity and, when given, a separately computed vorticity.
/// Without `w` the vorticity is the curl of `u`.
pub fn conserved_quantities(u: &Field, w: Option<&Field>) -> ConservedQuantities {
    let [e, m0, m1, am, ens, tv] = u.integrate(|x, v| {
        let c = v.curl();
        [
            0.5 * (v.value[0] * v.value[0] + v.value[1] * v.value[1]),
            v.value[0],
            v.value[1],
            v.value[0] * x[1] - v.value[1] * x[0],
            0.5 * c * c,
            c,
        ]
    });
    let (enstrophy, total_vorticity) = match w {
        Some(w) => {
            let [a, b] = w.integrate(|_, v| [0.5 * v.value[0] * v.value[0], v.value[0]]);
            (a, b)
        }
        None => (ens, tv),
    };
    ConservedQuantities {
        kinetic_energy: e,
        momentum: [m0, m1],
        angular_momentum: am,
        enstrophy,
        total_vorticity,
    }
}

/// `||u_h - exact||_{L2}`.
pub fn l2_error(u: &Field, exact: impl Fn(Point) -> [f64; 2]) -> f64 {
    u.l2_error(exact)
}

/// `max |div a|` over quadrature points.
pub fn max_divergence(a: &Field) -> f64 {
    a.max_at_quadrature(|e: &Eval| e.div.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub quantities: ConservedQuantities,
    pub l2_error: Option<f64>,
    pub div_l2: f64,
    /// `max |div a|` of the advecting field used for this step.
    pub div_rec_max: f64,
    pub solver_residual: f64,
}

impl DiagnosticsRecord {
    pub fn momentum_sum(&self) -> f64 {
        self.quantities.momentum[0] + self.quantities.momentum[1]
    }

    pub fn is_finite(&self) -> bool {
        let q = &self.quantities;
        [
            self.time,
            q.kinetic_energy,
            q.momentum[0],
            q.momentum[1],
            q.angular_momentum,
            q.enstrophy,
            q.total_vorticity,
            self.div_l2,
            self.div_rec_max,
            self.solver_residual,
        ]
        .iter()
        .chain(self.l2_error.iter())
        .all(|v| v.is_finite())
    }
}

pub const CSV_COLUMNS: [&str; 13] = [
    "step",
    "time",
    "kinetic_energy",
    "momentum_x",
    "momentum_y",
    "momentum_sum",
    "angular_momentum",
    "enstrophy",
    "total_vorticity",
    "l2_error",
    "div_l2",
    "div_rec_max",
    "solver_residual",
];

/// 17 significant digits, enough to round-trip any double.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_string(records: &[DiagnosticsRecord]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in records {
        let q = &r.quantities;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            num(r.time),
            num(q.kinetic_energy),
            num(q.momentum[0]),
            num(q.momentum[1]),
            num(r.momentum_sum()),
            num(q.angular_momentum),
            num(q.enstrophy),
            num(q.total_vorticity),
            r.l2_error.map(num).unwrap_or_default(),
            num(r.div_l2),
            num(r.div_rec_max),
            num(r.solver_residual),
        );
    }
    s
}

pub fn write_csv(records: &[DiagnosticsRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, csv_string(records)).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty diagnostics file".into()))?;
    if header != CSV_COLUMNS.join(",") {
        return Err(Error::Config(format!("unexpected diagnostics header '{header}'")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::Config(format!("diagnostics line {}: {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != CSV_COLUMNS.len() {
                return Err(bad("wrong number of fields"));
            }
            let x = |k: usize| f[k].parse::<f64>().map_err(|_| bad(&format!("bad {}", CSV_COLUMNS[k])));
            Ok(DiagnosticsRecord {
                step: f[0].parse().map_err(|_| bad("bad step"))?,
                time: x(1)?,
                quantities: ConservedQuantities {
                    kinetic_energy: x(2)?,
                    momentum: [x(3)?, x(4)?],
                    angular_momentum: x(6)?,
                    enstrophy: x(7)?,
                    total_vorticity: x(8)?,
                },
                l2_error: if f[9].is_empty() { None } else { Some(x(9)?) },
                div_l2: x(10)?,
                div_rec_max: x(11)?,
                solver_residual: x(12)?,
            })
        })
        .collect()
}

/// Legacy ASCII VTK unstructured grid: velocity and speed at the vertices,
/// pressure averaged over each cell.
pub fn vtk_string(u: &Field, p: &Field) -> Result<String> {
    let mesh = u.space().mesh();
    if !std::sync::Arc::ptr_eq(mesh, p.space().mesh()) {
        return Err(Error::Pairing("velocity and pressure live on different meshes".into()));
    }
    let (nv, nt) = (mesh.num_vertices(), mesh.num_cells());
    let mut vel = vec![[0.0; 2]; nv];
    let mut seen = vec![false; nv];
    const CORNERS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    for c in 0..nt {
        for (l, &v) in mesh.cell(c).iter().enumerate() {
            if !seen[v] {
                seen[v] = true;
                vel[v] = u.evaluate(c, &[CORNERS[l]])?[0].value;
            }
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nnsfem velocity and pressure\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for x in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", num(x[0]), num(x[1]));
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for c in mesh.cells() {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}\nVECTORS velocity double");
    for v in &vel {
        let _ = writeln!(s, "{} {} 0", num(v[0]), num(v[1]));
    }
    s.push_str("SCALARS speed double 1\nLOOKUP_TABLE default\n");
    for v in &vel {
        let _ = writeln!(s, "{}", num(v[0].hypot(v[1])));
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nSCALARS pressure double 1\nLOOKUP_TABLE default");
    for c in 0..nt {
        let _ = writeln!(s, "{}", num(p.evaluate(c, &[[1.0 / 3.0, 1.0 / 3.0]])?[0].value[0]));
    }
    Ok(s)
}

pub fn export_vtk(u: &Field, p: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, vtk_string(u, p)?).map_err(|e| Error::io(path, e))
}
