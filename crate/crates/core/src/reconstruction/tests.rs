use super::*;
use crate::assembly::{assemble_convection, ConvectiveForm};
use crate::mesh::{generate_uniform, DomainSpec, Mesh};
use crate::spaces::Eval;

fn gresho(n: usize) -> Arc<Mesh> {
    Arc::new(generate_uniform(&DomainSpec::gresho_square(n)).unwrap())
}

fn unit(n: usize) -> Arc<Mesh> {
    Arc::new(generate_uniform(&DomainSpec::unit_square(n)).unwrap())
}

fn spaces(mesh: &Arc<Mesh>, pair: ElementPair) -> (Arc<Space>, Arc<Space>) {
    (Space::new(mesh.clone(), pair.velocity()), Space::new(mesh.clone(), pair.pressure()))
}

fn h1(u: &Field) -> f64 {
    let n = u.norms();
    (n.l2 * n.l2 + n.h1_semi * n.h1_semi).sqrt()
}

fn random_coeffs(space: &Arc<Space>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (0..space.ndofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Field::new(space.clone(), c).unwrap()
}

/// curl of sin^2(pi x) sin^2(pi y) on the unit square
fn smooth_divfree(p: Point) -> [f64; 2] {
    use std::f64::consts::PI;
    let (sx, cx) = ((PI * p[0]).sin(), (PI * p[0]).cos());
    let (sy, cy) = ((PI * p[1]).sin(), (PI * p[1]).cos());
    [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
}

#[test]
fn matrix_agrees_with_pointwise_interpolation() {
    let m = unit(3);
    for (src, dst) in [
        (ElementKind::VectorP2Bubble, ElementKind::HdivRT1),
        (ElementKind::VectorBernardiRaugel, ElementKind::HdivBDM1),
        (ElementKind::VectorP2, ElementKind::VectorBernardiRaugel),
        (ElementKind::VectorP2, ElementKind::HdivBDM1),
    ] {
        let (s, d) = (Space::new(m.clone(), src), Space::new(m.clone(), dst));
        let u = random_coeffs(&s, 4);
        let by_matrix = interpolation_matrix(&s, &d).unwrap().matvec(u.coeffs());
        let oracle = Field::interpolate_local(&d, |c, x| u.eval_at(c, x).value);
        for (a, b) in by_matrix.iter().zip(oracle.coeffs()) {
            assert!((a - b).abs() < 1e-12, "{src} -> {dst}: {a} vs {b}");
        }
    }
    let s = Space::new(m.clone(), ElementKind::ScalarP2);
    let d = Space::new(m, ElementKind::HdivRT1);
    assert!(matches!(interpolation_matrix(&s, &d), Err(Error::KindMismatch(_))));
}

#[test]
fn rt1_reproduces_constants_and_rotation() {
    let m = gresho(4);
    let v = Space::new(m, ElementKind::VectorP2Bubble);
    for f in [|_: Point| [0.3, -1.1], |x: Point| [-x[1], x[0]]] {
        let u = Field::interpolate(&v, f);
        let r = rt1_interpolate(&u).unwrap();
        assert_eq!(r.kind(), ElementKind::HdivRT1);
        assert!(r.l2_error(f) < 1e-13);
        assert!(r.sup_norms().1 < 1e-12);
    }
    assert!(rt1_interpolate(&Field::zeros(Space::new(gresho(2), ElementKind::VectorP2))).is_err());
}

#[test]
fn bdm1_reproduces_linear_fields() {
    let m = gresho(4);
    let v = Space::new(m, ElementKind::VectorBernardiRaugel);
    let f = |x: Point| [1.0 + 2.0 * x[0] - x[1], 0.5 * x[0] + 3.0 * x[1]];
    let r = bdm1_interpolate(&Field::interpolate(&v, f)).unwrap();
    assert!(r.l2_error(f) < 1e-13);
}

#[test]
fn bdm1_preserves_cellwise_divergence_of_an_edge_bubble() {
    let m = unit(3);
    let v = Space::new(m.clone(), ElementKind::VectorBernardiRaugel);
    let e = (0..m.num_edges()).find(|&e| !m.is_boundary_edge(e)).unwrap();
    let mut u = Field::zeros(v.clone());
    u.coeffs_mut()[2 * m.num_vertices() + e] = 1.0;
    let r = bdm1_interpolate(&u).unwrap();
    let rule = QuadratureRule::default();
    for c in m.edge_cells(e).into_iter().flatten() {
        let det = m.geometry(c).det;
        let cell_div = |f: &Field| -> f64 {
            let ev = f.evaluate(c, &rule.points).unwrap();
            ev.iter().zip(&rule.weights).map(|(e, w)| w * det * e.div).sum()
        };
        let (a, b) = (cell_div(&u), cell_div(&r));
        assert!(a.abs() > 1e-3);
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
}

#[test]
fn reconstruction_is_pointwise_divergence_free() {
    let m = gresho(8);
    for pair in ElementPair::ALL {
        let (v, q) = spaces(&m, pair);
        let sampler = DivFreeSampler::new(&v, &q).unwrap();
        for flavor in ProjectionFlavor::ALL {
            let rec = Reconstructor::new(&v, ReconstructionPlan::new(pair).with_flavor(flavor), |_| true).unwrap();
            for seed in 0..8 {
                let u = sampler.sample(seed).unwrap();
                let pu = rec.apply(&u).unwrap();
                assert_eq!(pu.kind(), rec.plan().target());
                let div = pu.sup_norms().1;
                assert!(div <= 1e-12 * h1(&u), "{pair} {flavor} seed {seed}: {div}");
            }
        }
    }
}

#[test]
fn discrete_divergence_alone_is_not_pointwise() {
    // the velocity itself is only weakly divergence-free
    let m = gresho(8);
    for pair in ElementPair::ALL {
        let (v, q) = spaces(&m, pair);
        let u = random_discrete_divfree(&v, &q, 1).unwrap();
        let b = Assembler::default().div(&v, &q).unwrap();
        assert!(b.matvec(u.coeffs()).iter().all(|r| r.abs() < 1e-12));
        assert!(u.sup_norms().1 > 1e-3);
    }
}

#[test]
fn normal_trace_vanishes_on_the_boundary() {
    let m = gresho(6);
    let (gs, _) = gauss_legendre(4);
    for pair in ElementPair::ALL {
        let (v, q) = spaces(&m, pair);
        let u = random_discrete_divfree(&v, &q, 7).unwrap();
        let pu = reconstruct(&u, ReconstructionPlan::new(pair)).unwrap();
        for e in m.boundary_edges() {
            let c = m.edge_cells(e)[0].unwrap();
            let [a, b] = m.edge(e);
            let (p, r) = (m.vertex(a), m.vertex(b));
            let n = m.edge_normal(e);
            for &s in &gs {
                let x = [p[0] + 0.5 * (1.0 + s) * (r[0] - p[0]), p[1] + 0.5 * (1.0 + s) * (r[1] - p[1])];
                let val = pu.eval_at(c, x).value;
                assert!((val[0] * n[0] + val[1] * n[1]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn stability_ratio_is_mesh_independent() {
    for pair in ElementPair::ALL {
        let mut worst: f64 = 0.0;
        for n in [8, 16] {
            let m = gresho(n);
            let (v, q) = spaces(&m, pair);
            let sampler = DivFreeSampler::new(&v, &q).unwrap();
            let rec = Reconstructor::new(&v, ReconstructionPlan::new(pair), |_| true).unwrap();
            for seed in 0..5 {
                let u = sampler.sample(100 + seed).unwrap();
                worst = worst.max(rec.apply(&u).unwrap().norms().l2 / u.norms().l2);
            }
        }
        assert!(worst <= 2.0, "{pair}: {worst}");
        assert!(worst > 0.5);
    }
}

#[test]
fn approximation_order() {
    for pair in ElementPair::ALL {
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let v = Space::new(unit(n), pair.velocity());
                let u = Field::interpolate(&v, smooth_divfree);
                reconstruct(&u, ReconstructionPlan::new(pair)).unwrap().l2_error(smooth_divfree)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "{pair}: {errs:?}");
        }
    }
}

#[test]
fn projection_of_zero_is_zero() {
    let v = Space::new(gresho(4), ElementKind::VectorP2);
    for flavor in ProjectionFlavor::ALL {
        let w = th_project_divfree(&Field::zeros(v.clone()), flavor).unwrap();
        assert_eq!(w.kind(), ElementKind::VectorBernardiRaugel);
        assert!(w.max_abs() == 0.0);
    }
}

#[test]
fn projection_is_identity_on_its_constraint_set() {
    let m = gresho(6);
    let br = Space::new(m.clone(), ElementKind::VectorBernardiRaugel);
    let p0 = Space::new(m, ElementKind::ScalarP0);
    let u = random_discrete_divfree(&br, &p0, 3).unwrap();
    for flavor in ProjectionFlavor::ALL {
        let w = th_project_divfree(&u, flavor).unwrap();
        for (a, b) in w.coeffs().iter().zip(u.coeffs()) {
            assert!((a - b).abs() < 1e-11, "{flavor}");
        }
    }
}

#[test]
fn l2_projection_is_the_best_feasible_approximation() {
    let m = gresho(6);
    let (v, q) = spaces(&m, ElementPair::TaylorHood);
    let u = random_discrete_divfree(&v, &q, 11).unwrap();
    let w = th_project_divfree(&u, ProjectionFlavor::L2).unwrap();
    let br = w.space().clone();
    let dist = |z: &Field| distance(&u, z);
    let best = dist(&w);
    let kernel = DivFreeSampler::new(&br, &Space::new(m.clone(), ElementKind::ScalarP0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..20 {
        // feasible: same boundary values, still divergence-free against P0
        let mut z = w.clone();
        z.axpy(rng.random_range(-0.5..0.5), &kernel.sample(k).unwrap());
        assert!(best <= dist(&z) + 1e-14);
    }
}

fn distance(u: &Field, z: &Field) -> f64 {
    let mesh = u.space().mesh();
    let rule = QuadratureRule::default();
    let mut s = 0.0;
    for c in 0..mesh.num_cells() {
        let det = mesh.geometry(c).det;
        let a: Vec<Eval> = u.evaluate(c, &rule.points).unwrap();
        let b: Vec<Eval> = z.evaluate(c, &rule.points).unwrap();
        for ((x, y), w) in a.iter().zip(&b).zip(&rule.weights) {
            s += w * det * ((x.value[0] - y.value[0]).powi(2) + (x.value[1] - y.value[1]).powi(2));
        }
    }
    s.sqrt()
}

#[test]
fn modified_convection_is_skew_for_reconstructed_advection() {
    let m = gresho(8);
    for pair in ElementPair::ALL {
        let (v, q) = spaces(&m, pair);
        let keep: Vec<bool> = v.dofs().iter().map(|d| d.class == BoundaryClass::Interior).collect();
        let sampler = DivFreeSampler::new(&v, &q).unwrap();
        let rec = Reconstructor::new(&v, ReconstructionPlan::new(pair), |_| true).unwrap();
        for seed in 0..4 {
            let pu = rec.apply(&sampler.sample(seed).unwrap()).unwrap();
            let n = assemble_convection(ConvectiveForm::ModConv, &pu, &v).unwrap();
            let bound = 1e-12 * pu.sup_norms().0.max(1.0);
            assert!(n.skew_defect(&keep) <= bound, "{pair}: {}", n.skew_defect(&keep));
        }
    }
}

#[test]
fn plain_convection_does_not_conserve_energy() {
    let m = gresho(8);
    let (v, q) = spaces(&m, ElementPair::TaylorHood);
    let u = random_discrete_divfree(&v, &q, 2).unwrap();
    let n = assemble_convection(ConvectiveForm::Conv, &u, &v).unwrap();
    assert!(n.bilinear(u.coeffs(), u.coeffs()).abs() > 1e-6);
    let pu = reconstruct(&u, ReconstructionPlan::new(ElementPair::TaylorHood)).unwrap();
    let nm = assemble_convection(ConvectiveForm::ModConv, &pu, &v).unwrap();
    assert!(nm.bilinear(u.coeffs(), u.coeffs()).abs() < 1e-12);
}

#[test]
fn reconstructor_checks_kinds() {
    let m = gresho(2);
    let v = Space::new(m.clone(), ElementKind::VectorP2);
    assert!(Reconstructor::new(&v, ReconstructionPlan::new(ElementPair::P2BubbleP1Disc), |_| true).is_err());
    let rec = Reconstructor::new(&v, ReconstructionPlan::new(ElementPair::TaylorHood), |_| true).unwrap();
    let other = Space::new(gresho(2), ElementKind::VectorP2);
    assert!(rec.apply(&Field::zeros(other)).is_err());
    assert_eq!("Stokes".parse::<ProjectionFlavor>().unwrap(), ProjectionFlavor::Stokes);
    assert!("h1".parse::<ProjectionFlavor>().is_err());
}
