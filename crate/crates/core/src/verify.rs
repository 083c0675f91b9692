//! Quick property suite: skew-symmetry of the modified convection,
//! pointwise divergence and stability of the reconstruction, conservation
//! drift of short inviscid runs and convergence slopes of the manufactured
//! solution. All random fields derive from one root seed.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::assembly::{Assembler, ConvectiveForm};
use crate::benchmarks::{case_gresho, case_mms, mms_velocity_gradient, BenchmarkCase};
use crate::error::Result;
use crate::mesh::{generate_uniform, DomainSpec, Mesh};
use crate::quadrature::{QuadratureRule, DEFAULT_DEGREE};
use crate::reconstruction::{DivFreeSampler, ReconstructionPlan, Reconstructor};
use crate::spaces::{BoundaryClass, ElementPair, Field, Space};
use crate::timestepping::{RunSummary, Simulation, State, Termination};

pub const SKEW_TOLERANCE: f64 = 1e-12;
pub const DIVERGENCE_TOLERANCE: f64 = 1e-12;
pub const STABILITY_BOUND: f64 = 2.0;
pub const ENERGY_TOLERANCE: f64 = 1e-10;
pub const VORTICITY_TOLERANCE: f64 = 1e-8;
pub const MOMENTUM_TOLERANCE: f64 = 1e-10;
pub const SPATIAL_ORDER: f64 = 2.5;
pub const TEMPORAL_ORDER: f64 = 1.8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Degree of the quadrature used for operator assembly.
    pub quadrature_degree: usize,
    /// Random fields per pair.
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            quadrature_degree: DEFAULT_DEGREE,
            samples: 20,
        }
    }
}

/// Whether a check's value must stay below or reach its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound, threshold: f64) -> Self {
        let passed = match bound {
            Bound::AtMost => value <= threshold,
            Bound::AtLeast => value >= threshold,
        };
        CheckOutcome {
            name: name.into(),
            value,
            bound,
            threshold,
            passed,
        }
    }

    fn failed(name: impl Into<String>, bound: Bound, threshold: f64) -> Self {
        CheckOutcome::new(name, f64::NAN, bound, threshold)
    }
}

/// `log2(coarse / fine)` for errors on meshes or steps halved in between.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub fn run_verify(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let asm = match QuadratureRule::new(opts.quadrature_degree) {
        Ok(rule) => Assembler::new(rule),
        Err(_) => Assembler::default(),
    };
    let mut out = Vec::new();
    for pair in ElementPair::ALL {
        out.extend(reconstruction_checks(pair, opts, &asm));
    }
    out.extend(conservation_checks(&asm));
    out.extend(convergence_checks(&asm));
    out
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|c| c.passed)
}

pub fn format_table(outcomes: &[CheckOutcome]) -> String {
    let width = outcomes.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in outcomes {
        let op = match c.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        let _ = writeln!(
            s,
            "{:<width$}  {:>12.4e} {op} {:<10.3e} {}",
            c.name,
            c.value,
            c.threshold,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}

fn gresho_mesh(n: usize) -> Result<Arc<Mesh>> {
    Ok(Arc::new(generate_uniform(&DomainSpec::gresho_square(n))?))
}

/// Largest skew defect, divergence ratio and stability ratio over seeded
/// discretely divergence-free samples on one mesh.
pub fn reconstruction_metrics(
    mesh: &Arc<Mesh>,
    pair: ElementPair,
    samples: usize,
    seed: u64,
    asm: &Assembler,
) -> Result<(f64, f64, f64)> {
    let v = Space::new(mesh.clone(), pair.velocity());
    let q = Space::new(mesh.clone(), pair.pressure());
    let keep: Vec<bool> = v.dofs().iter().map(|d| d.class == BoundaryClass::Interior).collect();
    let sampler = DivFreeSampler::new(&v, &q)?;
    let rec = Reconstructor::new(&v, ReconstructionPlan::new(pair), |_| true)?;
    let (mut skew, mut div, mut stab) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..samples {
        let u = sampler.sample(seed.wrapping_mul(1000).wrapping_add(k as u64))?;
        let pu = rec.apply(&u)?;
        let (sup, max_div) = pu.sup_norms();
        let n = asm.convection(ConvectiveForm::ModConv, &pu, &v)?;
        skew = skew.max(n.skew_defect(&keep) / sup.max(1.0));
        let nu = u.norms();
        div = div.max(max_div / (nu.l2 * nu.l2 + nu.h1_semi * nu.h1_semi).sqrt());
        stab = stab.max(pu.norms().l2 / nu.l2);
    }
    Ok((skew, div, stab))
}

fn reconstruction_checks(pair: ElementPair, opts: &VerifyOptions, asm: &Assembler) -> Vec<CheckOutcome> {
    let names = [
        format!("skew-symmetry {pair}"),
        format!("reconstruction divergence {pair}"),
        format!("reconstruction stability {pair}"),
    ];
    let limits = [SKEW_TOLERANCE, DIVERGENCE_TOLERANCE, STABILITY_BOUND];
    let mut worst = [0.0f64; 3];
    for n in [8, 16] {
        let m = gresho_mesh(n).and_then(|m| reconstruction_metrics(&m, pair, opts.samples.max(1), opts.seed, asm));
        match m {
            Ok((a, b, c)) => {
                for (w, v) in worst.iter_mut().zip([a, b, c]) {
                    *w = w.max(v);
                }
            }
            Err(_) => {
                return names
                    .into_iter()
                    .zip(limits)
                    .map(|(n, l)| CheckOutcome::failed(n, Bound::AtMost, l))
                    .collect()
            }
        }
    }
    names
        .into_iter()
        .zip(worst)
        .zip(limits)
        .map(|((n, v), l)| CheckOutcome::new(n, v, Bound::AtMost, l))
        .collect()
}

fn run_case(case: &BenchmarkCase, asm: &Assembler) -> Result<(RunSummary, State)> {
    let mut sim = Simulation::with_assembler(case.mesh()?, case.scheme.clone(), asm.clone())?;
    let summary = sim.run(|_, _| Ok(()))?;
    Ok((summary, sim.state().clone()))
}

fn conservation_checks(asm: &Assembler) -> Vec<CheckOutcome> {
    let names = ["energy drift", "enstrophy drift", "total vorticity drift", "momentum drift"];
    let limits = [ENERGY_TOLERANCE, VORTICITY_TOLERANCE, VORTICITY_TOLERANCE, MOMENTUM_TOLERANCE];
    let run = case_gresho(&[("nx", "12"), ("t-end", "0.2"), ("vorticity", "true")]).and_then(|c| run_case(&c, asm));
    let summary = match run {
        Ok((s, _)) if s.termination == Termination::Completed => s,
        _ => {
            return names
                .into_iter()
                .zip(limits)
                .map(|(n, l)| CheckOutcome::failed(n, Bound::AtMost, l))
                .collect()
        }
    };
    let q0 = summary.initial.quantities;
    let mut worst = [0.0f64; 4];
    for r in &summary.records {
        let q = r.quantities;
        let vals = [
            (q.kinetic_energy - q0.kinetic_energy).abs() / q0.kinetic_energy,
            (q.enstrophy - q0.enstrophy).abs() / q0.enstrophy,
            (q.total_vorticity - q0.total_vorticity).abs() / (2.0 * q0.enstrophy).sqrt(),
            (q.momentum[0] - q0.momentum[0]).abs().max((q.momentum[1] - q0.momentum[1]).abs()),
        ];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(if v.is_nan() { f64::INFINITY } else { v });
        }
    }
    names
        .into_iter()
        .zip(worst)
        .zip(limits)
        .map(|((n, v), l)| CheckOutcome::new(n, v, Bound::AtMost, l))
        .collect()
}

/// Final-time L2 and H1 velocity errors of the manufactured solution.
pub fn mms_errors(pair: ElementPair, nx: usize, dt: f64, t_end: f64, asm: &Assembler) -> Result<(f64, f64, Field)> {
    let nx = nx.to_string();
    let (dt_s, t_s) = (dt.to_string(), t_end.to_string());
    let case = case_mms(&[("pair", pair.name()), ("nx", &nx), ("dt", &dt_s), ("t-end", &t_s)])?;
    let (summary, state) = run_case(&case, asm)?;
    let t = state.time;
    let exact = case.scheme.exact.clone().expect("manufactured case has an exact solution");
    let l2 = summary.records.last().and_then(|r| r.l2_error).unwrap_or_else(|| state.u.l2_error(|x| exact(x, t)));
    let h1 = state.u.h1_error(|x| mms_velocity_gradient(x, t));
    Ok((l2, h1, state.u))
}

fn convergence_checks(asm: &Assembler) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for pair in ElementPair::ALL {
        let name = format!("spatial order {pair}");
        let errs: Result<Vec<f64>> = [8, 16].iter().map(|&n| mms_errors(pair, n, 1e-3, 0.005, asm).map(|e| e.0)).collect();
        out.push(match errs {
            Ok(e) => CheckOutcome::new(name, observed_order(e[0], e[1]), Bound::AtLeast, SPATIAL_ORDER),
            Err(_) => CheckOutcome::failed(name, Bound::AtLeast, SPATIAL_ORDER),
        });
    }
    // successive differences cancel the spatial error on a fixed mesh
    let name = "temporal order p2b".to_string();
    let runs: Result<Vec<Field>> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| mms_errors(ElementPair::P2BubbleP1Disc, 16, dt, 0.2, asm).map(|e| e.2))
        .collect();
    out.push(match runs {
        Ok(u) => {
            let d = |a: &Field, b: &Field| difference_l2(a, b);
            CheckOutcome::new(name, observed_order(d(&u[0], &u[1]), d(&u[1], &u[2])), Bound::AtLeast, TEMPORAL_ORDER)
        }
        Err(_) => CheckOutcome::failed(name, Bound::AtLeast, TEMPORAL_ORDER),
    });
    out
}

/// `||a - b||_{L2}` for fields on identically numbered spaces, e.g. two runs
/// on separately generated copies of one mesh.
pub fn difference_l2(a: &Field, b: &Field) -> f64 {
    assert_eq!(a.kind(), b.kind());
    assert_eq!(a.coeffs().len(), b.coeffs().len());
    let c = a.coeffs().iter().zip(b.coeffs()).map(|(p, q)| p - q).collect();
    Field::new(a.space().clone(), c).expect("matching length").norms().l2
}
