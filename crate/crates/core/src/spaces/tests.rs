use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::mesh::{generate_uniform, DomainSpec};

fn square(n: usize) -> Arc<Mesh> {
    Arc::new(generate_uniform(&DomainSpec::unit_square(n)).unwrap())
}

fn skewed() -> Arc<Mesh> {
    // a sheared, non-uniform patch so Piola maps are not all alike
    let base = generate_uniform(&DomainSpec::unit_square(3)).unwrap();
    let verts: Vec<Point> = base
        .vertices()
        .iter()
        .map(|p| [p[0] + 0.3 * p[1] + 0.05 * (p[0] * p[1]), 0.8 * p[1] + 0.1 * p[0] * p[0]])
        .collect();
    Arc::new(Mesh::new(verts, base.cells().to_vec(), |_, _| crate::mesh::BoundaryTag::Wall).unwrap())
}

fn random_ref_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            if a + b > 1.0 {
                [1.0 - a, 1.0 - b]
            } else {
                [a, b]
            }
        })
        .collect()
}

#[test]
fn dof_counts() {
    let m = square(1);
    assert_eq!(Space::new(m.clone(), ElementKind::ScalarP1).ndofs(), 4);
    let g = Arc::new(generate_uniform(&DomainSpec::gresho_square(48)).unwrap());
    assert_eq!(Space::new(g.clone(), ElementKind::VectorP2Bubble).ndofs(), 28034);
    assert_eq!(Space::new(g, ElementKind::ScalarP1Disc).ndofs(), 13824);

    let m = square(4);
    let (v, e, t) = (m.num_vertices(), m.num_edges(), m.num_cells());
    let expect = [v, v + e, 3 * t, t, 2 * (v + e), 2 * (v + e + t), 2 * v + e, 2 * e + 2 * t, 2 * e];
    for (kind, n) in ElementKind::ALL.into_iter().zip(expect) {
        let s = Space::new(m.clone(), kind);
        assert_eq!(s.ndofs(), n, "{kind}");
        let mut hit = vec![false; n];
        for c in 0..t {
            assert_eq!(s.cell_dofs(c).len(), kind.local_dofs());
            for &g in s.cell_dofs(c) {
                hit[g] = true;
            }
        }
        assert!(hit.iter().all(|&h| h), "{kind}: dof table not surjective");
    }
}

#[test]
fn partition_of_unity() {
    let m = skewed();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kind in [ElementKind::ScalarP1, ElementKind::ScalarP2, ElementKind::ScalarP1Disc] {
        let s = Space::new(m.clone(), kind);
        let mut shapes = [Shape::default(); 14];
        for xi in random_ref_points(&mut rng, 20) {
            s.tabulate(3, &m.geometry(3), xi, &mut shapes);
            let sum: f64 = shapes[..kind.local_dofs()].iter().map(|s| s.val[0]).sum();
            assert!((sum - 1.0).abs() <= 1e-13);
        }
    }
}

type VecFn = Box<dyn Fn(Point) -> [f64; 2]>;

fn quadratics() -> Vec<VecFn> {
    vec![
        Box::new(|_| [1.0, -2.0]),
        Box::new(|p| [p[0] - 0.5 * p[1], 0.3 + p[1]]),
        Box::new(|p| [p[0] * p[0], p[0] * p[1]]),
        Box::new(|p| [p[1] * p[1] - p[0], 2.0 * p[0] * p[0] + p[1]]),
    ]
}

fn linears() -> Vec<VecFn> {
    vec![
        Box::new(|_| [1.0, 0.0]),
        Box::new(|p| [-p[1], p[0]]),
        Box::new(|p| [0.2 + p[0] - 3.0 * p[1], 1.0 - 0.5 * p[0] + p[1]]),
    ]
}

fn rt1_extras() -> Vec<VecFn> {
    // x * (a + b x + c y) for homogeneous linear parts, plus P1^2
    vec![
        Box::new(|p| [p[0] * p[0], p[0] * p[1]]),
        Box::new(|p| {
            let s = 0.4 - p[0] + 2.0 * p[1];
            [p[0] * s + 1.0 - p[1], p[1] * s + 0.5 * p[0]]
        }),
    ]
}

fn check_reproduction(kind: ElementKind, fns: Vec<VecFn>) {
    let m = skewed();
    let s = Space::new(m.clone(), kind);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for f in fns {
        let field = Field::interpolate(&s, &f);
        for c in 0..m.num_cells() {
            let geo = m.geometry(c);
            let pts = random_ref_points(&mut rng, 4);
            for (xi, e) in pts.iter().zip(field.evaluate(c, &pts).unwrap()) {
                let want = f(geo.map(*xi));
                let ncomp = if kind.is_scalar() { 1 } else { 2 };
                for k in 0..ncomp {
                    assert!(
                        (e.value[k] - want[k]).abs() <= 1e-12,
                        "{kind}: {:?} vs {want:?}",
                        e.value
                    );
                }
            }
        }
    }
}

#[test]
fn polynomial_reproduction() {
    check_reproduction(ElementKind::VectorP2, quadratics());
    check_reproduction(ElementKind::VectorP2Bubble, quadratics());
    check_reproduction(ElementKind::ScalarP2, quadratics());
    check_reproduction(ElementKind::ScalarP1, linears());
    check_reproduction(ElementKind::ScalarP1Disc, linears());
    check_reproduction(ElementKind::VectorBernardiRaugel, linears());
    check_reproduction(ElementKind::HdivBDM1, linears());
    check_reproduction(ElementKind::HdivRT1, linears());
    check_reproduction(ElementKind::HdivRT1, rt1_extras());
}

#[test]
fn p2_bubble_reproduces_cubic_bubble() {
    let m = skewed();
    let s = Space::new(m.clone(), ElementKind::VectorP2Bubble);
    let mut coeffs = vec![0.0; s.ndofs()];
    let (nv, ne) = (m.num_vertices(), m.num_edges());
    coeffs[nv + ne + 2] = 1.0;
    let f = Field::new(s, coeffs).unwrap();
    let e = f.evaluate(2, &[[1.0 / 3.0, 1.0 / 3.0], [0.5, 0.5]]).unwrap();
    assert!((e[0].value[0] - 1.0).abs() < 1e-14);
    assert!(e[1].value[0].abs() < 1e-15);
}

#[test]
fn hdiv_normal_continuity() {
    let m = skewed();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [ElementKind::HdivRT1, ElementKind::HdivBDM1, ElementKind::VectorBernardiRaugel] {
        let s = Space::new(m.clone(), kind);
        let coeffs: Vec<f64> = (0..s.ndofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Field::new(s, coeffs).unwrap();
        for e in 0..m.num_edges() {
            let [Some(c0), Some(c1)] = m.edge_cells(e) else { continue };
            let n = m.edge_normal(e);
            let [a, b] = m.edge(e);
            for t in [0.1, 0.5, 0.83] {
                let x = [
                    (1.0 - t) * m.vertex(a)[0] + t * m.vertex(b)[0],
                    (1.0 - t) * m.vertex(a)[1] + t * m.vertex(b)[1],
                ];
                let (u, v) = (f.eval_at(c0, x).value, f.eval_at(c1, x).value);
                let jump = (u[0] - v[0]) * n[0] + (u[1] - v[1]) * n[1];
                assert!(jump.abs() <= 1e-12, "{kind} edge {e}: {jump}");
            }
        }
    }
}

#[test]
fn hdiv_basis_is_dual_to_moments() {
    let m = skewed();
    for kind in [ElementKind::HdivRT1, ElementKind::HdivBDM1] {
        let s = Space::new(m.clone(), kind);
        for g in [0, 5, s.ndofs() - 1] {
            let mut coeffs = vec![0.0; s.ndofs()];
            coeffs[g] = 1.0;
            let f = Field::new(s.clone(), coeffs.clone()).unwrap();
            let back = Field::interpolate_local(&s, |c, x| f.eval_at(c, x).value);
            for (i, (&p, &q)) in coeffs.iter().zip(back.coeffs()).enumerate() {
                assert!((p - q).abs() < 1e-12, "{kind} dof {g} -> {i}: {q}");
            }
        }
    }
}

#[test]
fn constant_and_linear_derivatives() {
    let m = skewed();
    let s = Space::new(m.clone(), ElementKind::VectorP2);
    let c = Field::interpolate(&s, |_| [2.0, -1.0]);
    let lin = Field::interpolate(&s, |p| [p[0], p[1]]);
    let pts = [[0.2, 0.2], [0.0, 1.0], [0.6, 0.1]];
    for cell in 0..m.num_cells() {
        for e in c.evaluate(cell, &pts).unwrap() {
            assert!(e.grad.iter().flatten().all(|g| g.abs() < 1e-12));
            assert!(e.div.abs() < 1e-12);
        }
        for e in lin.evaluate(cell, &pts).unwrap() {
            assert!((e.div - 2.0).abs() < 1e-12);
        }
    }
    assert!(matches!(c.evaluate(0, &[[0.7, 0.7]]), Err(Error::OutsideReference(..))));
}

#[test]
fn rt1_divergence_matches_finite_differences() {
    let m = skewed();
    let s = Space::new(m.clone(), ElementKind::HdivRT1);
    let c = 4;
    let e = m.cell_edges(c)[1];
    let mut coeffs = vec![0.0; s.ndofs()];
    coeffs[2 * e] = 1.0;
    let f = Field::new(s, coeffs).unwrap();
    let geo = m.geometry(c);
    let h = 1e-6;
    for xi in [[0.3, 0.3], [0.1, 0.6], [0.7, 0.2]] {
        let x = geo.map(xi);
        let d = f.evaluate(c, &[xi]).unwrap()[0].div;
        let ux = |dx: f64, dy: f64| f.eval_at(c, [x[0] + dx, x[1] + dy]).value;
        let fd = (ux(h, 0.0)[0] - ux(-h, 0.0)[0] + ux(0.0, h)[1] - ux(0.0, -h)[1]) / (2.0 * h);
        assert!((fd - d).abs() < 1e-6, "{fd} vs {d}");
        assert!(d.abs() > 1e-3);
    }
}

#[test]
fn norms_of_simple_fields() {
    let m = square(4);
    let s = Space::new(m.clone(), ElementKind::VectorP2Bubble);
    let z = Field::zeros(s.clone());
    assert_eq!(z.norms(), Norms::default());
    let f = Field::interpolate(&s, |p| [p[0], 0.0]);
    let n = f.norms();
    assert!((n.div_l2 - 1.0).abs() < 1e-13);
    assert!((n.h1_semi - 1.0).abs() < 1e-13);
    assert!((n.l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
}

#[test]
fn lattice_interpolant_norm() {
    let m = square(64);
    let s = Space::new(m, ElementKind::VectorP2Bubble);
    let u0 = |p: Point| {
        let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        [x.sin() * y.sin(), x.cos() * y.cos()]
    };
    let f = Field::interpolate(&s, u0);
    // int sin^2 sin^2 + cos^2 cos^2 over the unit square = 1/2
    assert!((f.norms().l2 - 0.5f64.sqrt()).abs() < 1e-3);
}

fn gresho_speed(r: f64) -> f64 {
    if r <= 0.2 {
        5.0 * r
    } else if r <= 0.4 {
        2.0 - 5.0 * r
    } else {
        0.0
    }
}

/// 2 pi int_0^0.4 u(r)^2 r dr by composite Simpson on each smooth piece.
fn gresho_energy_oracle() -> f64 {
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let g = |r: f64| gresho_speed(r).powi(2) * r;
        let mut s = g(a) + g(b);
        for i in 1..n {
            s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    2.0 * PI * (simpson(0.0, 0.2, 200) + simpson(0.2, 0.4, 200))
}

#[test]
fn gresho_interpolant_norm() {
    let m = Arc::new(generate_uniform(&DomainSpec::gresho_square(48)).unwrap());
    let s = Space::new(m, ElementKind::VectorP2Bubble);
    let f = Field::interpolate(&s, |p| {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let u = gresho_speed(r);
        [-u * p[1] / r, u * p[0] / r]
    });
    let exact = gresho_energy_oracle().sqrt();
    assert!(((f.norms().l2 - exact) / exact).abs() < 0.01);
}

#[test]
fn boundary_classification() {
    let m = square(2);
    let s = Space::new(m.clone(), ElementKind::VectorP2);
    for d in s.dofs() {
        let p = d.point;
        let on_x = p[0] == 0.0 || p[0] == 1.0;
        let on_y = p[1] == 0.0 || p[1] == 1.0;
        let DofDirection::Component(k) = d.direction else { panic!() };
        let expect = match (on_x, on_y) {
            (false, false) => BoundaryClass::Interior,
            (true, true) => BoundaryClass::Full,
            (true, false) if k == 0 => BoundaryClass::Normal,
            (false, true) if k == 1 => BoundaryClass::Normal,
            _ => BoundaryClass::Tangential,
        };
        assert_eq!(d.class, expect, "{d:?}");
    }
    for e in m.boundary_edges() {
        assert_eq!(s.edge_dofs(e).len(), 6);
    }
}
