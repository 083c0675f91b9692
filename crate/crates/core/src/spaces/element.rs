//! Reference-element shape functions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    ScalarP1,
    ScalarP2,
    ScalarP1Disc,
    ScalarP0,
    VectorP2,
    VectorP2Bubble,
    VectorBernardiRaugel,
    HdivRT1,
    HdivBDM1,
}

impl ElementKind {
    pub const ALL: [ElementKind; 9] = [
        ElementKind::ScalarP1,
        ElementKind::ScalarP2,
        ElementKind::ScalarP1Disc,
        ElementKind::ScalarP0,
        ElementKind::VectorP2,
        ElementKind::VectorP2Bubble,
        ElementKind::VectorBernardiRaugel,
        ElementKind::HdivRT1,
        ElementKind::HdivBDM1,
    ];

    pub fn local_dofs(self) -> usize {
        match self {
            ElementKind::ScalarP1 | ElementKind::ScalarP1Disc => 3,
            ElementKind::ScalarP2 => 6,
            ElementKind::ScalarP0 => 1,
            ElementKind::VectorP2 => 12,
            ElementKind::VectorP2Bubble => 14,
            ElementKind::VectorBernardiRaugel => 9,
            ElementKind::HdivRT1 => 8,
            ElementKind::HdivBDM1 => 6,
        }
    }

    pub fn is_vector(self) -> bool {
        !self.is_scalar()
    }

    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            ElementKind::ScalarP1
                | ElementKind::ScalarP2
                | ElementKind::ScalarP1Disc
                | ElementKind::ScalarP0
        )
    }

    pub fn is_hdiv(self) -> bool {
        matches!(self, ElementKind::HdivRT1 | ElementKind::HdivBDM1)
    }

    /// Polynomial degree of the highest-order basis function.
    pub fn degree(self) -> usize {
        match self {
            ElementKind::ScalarP0 => 0,
            ElementKind::ScalarP1 | ElementKind::ScalarP1Disc | ElementKind::HdivBDM1 => 1,
            ElementKind::ScalarP2
            | ElementKind::VectorP2
            | ElementKind::VectorBernardiRaugel
            | ElementKind::HdivRT1 => 2,
            ElementKind::VectorP2Bubble => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::ScalarP1 => "P1",
            ElementKind::ScalarP2 => "P2",
            ElementKind::ScalarP1Disc => "P1disc",
            ElementKind::ScalarP0 => "P0",
            ElementKind::VectorP2 => "P2^2",
            ElementKind::VectorP2Bubble => "P2b^2",
            ElementKind::VectorBernardiRaugel => "BR",
            ElementKind::HdivRT1 => "RT1",
            ElementKind::HdivBDM1 => "BDM1",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ElementKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown element kind '{s}'")))
    }
}

/// Inf-sup stable velocity/pressure pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementPair {
    /// P2/P1 Taylor-Hood.
    TaylorHood,
    /// P2 plus cubic bubble with discontinuous P1 pressure.
    P2BubbleP1Disc,
}

impl ElementPair {
    pub const ALL: [ElementPair; 2] = [ElementPair::TaylorHood, ElementPair::P2BubbleP1Disc];

    pub fn name(self) -> &'static str {
        match self {
            ElementPair::TaylorHood => "th",
            ElementPair::P2BubbleP1Disc => "p2b",
        }
    }

    pub fn velocity(self) -> ElementKind {
        match self {
            ElementPair::TaylorHood => ElementKind::VectorP2,
            ElementPair::P2BubbleP1Disc => ElementKind::VectorP2Bubble,
        }
    }

    pub fn pressure(self) -> ElementKind {
        match self {
            ElementPair::TaylorHood => ElementKind::ScalarP1,
            ElementPair::P2BubbleP1Disc => ElementKind::ScalarP1Disc,
        }
    }
}

impl fmt::Display for ElementPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ElementPair::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown element pair '{s}' (th, p2b)")))
    }
}

/// Mesh entity a local dof is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalEntity {
    Vertex(usize),
    Edge(usize),
    Cell,
}

/// Direction a vector dof acts in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofDirection {
    Scalar,
    Component(usize),
    /// Along the global normal of the edge the dof sits on (BR bubbles, H(div) edge moments).
    EdgeNormal,
    /// Interior moments of H(div) fields.
    Interior(usize),
}

pub fn barycentric(xi: [f64; 2]) -> [f64; 3] {
    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
}

/// Reference gradients of the barycentric coordinates.
pub const DLAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Scalar Lagrange family underlying a kind, with the count of scalar
/// functions per component.
pub(crate) fn scalar_family(kind: ElementKind) -> Option<(ScalarFamily, usize)> {
    match kind {
        ElementKind::ScalarP1 | ElementKind::ScalarP1Disc => Some((ScalarFamily::P1, 3)),
        ElementKind::ScalarP2 | ElementKind::VectorP2 => Some((ScalarFamily::P2, 6)),
        ElementKind::VectorP2Bubble => Some((ScalarFamily::P2Bubble, 7)),
        ElementKind::ScalarP0 => Some((ScalarFamily::P0, 1)),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ScalarFamily {
    P0,
    P1,
    P2,
    P2Bubble,
}

/// Values and reference gradients of a scalar family at `xi`.
pub(crate) fn scalar_shapes(fam: ScalarFamily, xi: [f64; 2], val: &mut [f64], grad: &mut [[f64; 2]]) {
    let l = barycentric(xi);
    let d = DLAMBDA;
    match fam {
        ScalarFamily::P0 => {
            val[0] = 1.0;
            grad[0] = [0.0, 0.0];
        }
        ScalarFamily::P1 => {
            for i in 0..3 {
                val[i] = l[i];
                grad[i] = d[i];
            }
        }
        ScalarFamily::P2 | ScalarFamily::P2Bubble => {
            for i in 0..3 {
                val[i] = l[i] * (2.0 * l[i] - 1.0);
                let s = 4.0 * l[i] - 1.0;
                grad[i] = [s * d[i][0], s * d[i][1]];
            }
            for e in 0..3 {
                let (a, b) = ((e + 1) % 3, (e + 2) % 3);
                val[3 + e] = 4.0 * l[a] * l[b];
                grad[3 + e] = [
                    4.0 * (d[a][0] * l[b] + l[a] * d[b][0]),
                    4.0 * (d[a][1] * l[b] + l[a] * d[b][1]),
                ];
            }
            if fam == ScalarFamily::P2Bubble {
                val[6] = 27.0 * l[0] * l[1] * l[2];
                grad[6] = [0, 1].map(|k| {
                    27.0 * (d[0][k] * l[1] * l[2] + l[0] * d[1][k] * l[2] + l[0] * l[1] * d[2][k])
                });
            }
        }
    }
}

/// Local entity of the `i`-th scalar function of a family.
pub(crate) fn scalar_entity(fam: ScalarFamily, i: usize) -> LocalEntity {
    match (fam, i) {
        (ScalarFamily::P0, _) => LocalEntity::Cell,
        (_, 0..=2) => LocalEntity::Vertex(i),
        (_, 3..=5) => LocalEntity::Edge(i - 3),
        _ => LocalEntity::Cell,
    }
}

/// Number of reference functions spanning the H(div) element before the
/// per-cell change of basis.
pub(crate) fn hdiv_span(kind: ElementKind) -> usize {
    match kind {
        ElementKind::HdivRT1 => 8,
        ElementKind::HdivBDM1 => 6,
        _ => 0,
    }
}

/// Reference spanning functions for RT1 (all 8) and BDM1 (first 6), with
/// their reference Jacobians `g[k][d] = d p_k / d xi_d` and divergences.
pub(crate) fn hdiv_reference(xi: [f64; 2], m: usize) -> ([f64; 2], [[f64; 2]; 2], f64) {
    let (x, y) = (xi[0], xi[1]);
    match m {
        0 => ([1.0, 0.0], [[0.0, 0.0], [0.0, 0.0]], 0.0),
        1 => ([x, 0.0], [[1.0, 0.0], [0.0, 0.0]], 1.0),
        2 => ([y, 0.0], [[0.0, 1.0], [0.0, 0.0]], 0.0),
        3 => ([0.0, 1.0], [[0.0, 0.0], [0.0, 0.0]], 0.0),
        4 => ([0.0, x], [[0.0, 0.0], [1.0, 0.0]], 0.0),
        5 => ([0.0, y], [[0.0, 0.0], [0.0, 1.0]], 1.0),
        6 => ([x * x, x * y], [[2.0 * x, 0.0], [y, x]], 3.0 * x),
        7 => ([x * y, y * y], [[y, x], [0.0, 2.0 * y]], 3.0 * y),
        _ => unreachable!("reference H(div) index {m}"),
    }
}

pub(crate) fn check_reference(xi: [f64; 2]) -> Result<()> {
    const TOL: f64 = 1e-12;
    if !(xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL) {
        return Err(Error::OutsideReference(xi[0], xi[1]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_dof_counts() {
        let counts: Vec<usize> = ElementKind::ALL.iter().map(|k| k.local_dofs()).collect();
        assert_eq!(counts, vec![3, 6, 3, 1, 12, 14, 9, 8, 6]);
    }

    #[test]
    fn names_roundtrip() {
        for k in ElementKind::ALL {
            assert_eq!(k.name().parse::<ElementKind>().unwrap(), k);
        }
    }

    #[test]
    fn lagrange_nodal_property() {
        let nodes = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.0, 0.5],
            [0.5, 0.0],
        ];
        let mut v = [0.0; 7];
        let mut g = [[0.0; 2]; 7];
        for (j, &p) in nodes.iter().enumerate() {
            scalar_shapes(ScalarFamily::P2, p, &mut v, &mut g);
            for i in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v[i] - expect).abs() < 1e-15);
            }
        }
        scalar_shapes(ScalarFamily::P2Bubble, [1.0 / 3.0, 1.0 / 3.0], &mut v, &mut g);
        assert!((v[6] - 1.0).abs() < 1e-14);
        assert!(g[6][0].abs() < 1e-14 && g[6][1].abs() < 1e-14);
    }

    #[test]
    fn reference_gradients_match_differences() {
        let h = 1e-6;
        let p = [0.21, 0.33];
        for fam in [ScalarFamily::P1, ScalarFamily::P2Bubble] {
            let (mut v0, mut g) = ([0.0; 7], [[0.0; 2]; 7]);
            let (mut vp, mut vm, mut gg) = ([0.0; 7], [0.0; 7], [[0.0; 2]; 7]);
            scalar_shapes(fam, p, &mut v0, &mut g);
            for d in 0..2 {
                let mut a = p;
                let mut b = p;
                a[d] += h;
                b[d] -= h;
                scalar_shapes(fam, a, &mut vp, &mut gg);
                scalar_shapes(fam, b, &mut vm, &mut gg);
                for i in 0..7 {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - g[i][d]).abs() < 1e-8);
                }
            }
        }
        for m in 0..8 {
            let (_, g, div) = hdiv_reference(p, m);
            assert!((g[0][0] + g[1][1] - div).abs() < 1e-15);
            for d in 0..2 {
                let mut a = p;
                let mut b = p;
                a[d] += h;
                b[d] -= h;
                let (va, _, _) = hdiv_reference(a, m);
                let (vb, _, _) = hdiv_reference(b, m);
                for k in 0..2 {
                    assert!(((va[k] - vb[k]) / (2.0 * h) - g[k][d]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn outside_reference_rejected() {
        assert!(check_reference([0.5, 0.5]).is_ok());
        assert!(check_reference([0.6, 0.5]).is_err());
        assert!(check_reference([-0.1, 0.5]).is_err());
    }
}
