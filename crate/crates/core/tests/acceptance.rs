//! Acceptance criteria 1-12, one line each.
//!
//! Runs with the optimized test profile and takes roughly half an hour on one
//! core. Environment:
//!   NSFEM_FULL=1    criterion 6 on the 48x48 mesh instead of 32x32
//!   NSFEM_ONLY=3,7  run a subset
//!   NSFEM_STRICT=1  exit non-zero when any criterion fails

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nsfem_core::assembly::{Assembler, ConvectiveForm};
use nsfem_core::benchmarks::{case_gresho, case_lattice, case_step, BenchmarkCase};
use nsfem_core::diagnostics::{export_vtk, DiagnosticsRecord};
use nsfem_core::mesh::generate_uniform;
use nsfem_core::timestepping::{RunSummary, Termination};
use nsfem_core::verify::{difference_l2, mms_errors, observed_order, reconstruction_metrics};
use nsfem_core::{DomainSpec, ElementPair, Field, Result, Simulation};

const SAMPLES: usize = 20;
const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn env_flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| !v.is_empty() && v != "0")
}

fn run_case(case: &BenchmarkCase) -> Result<(RunSummary, Simulation)> {
    let mut sim = Simulation::new(case.mesh()?, case.scheme.clone())?;
    let summary = sim.run(|_, _| Ok(()))?;
    Ok((summary, sim))
}

fn max_over(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    records.iter().map(f).fold(0.0, |a, v| if v.is_nan() { f64::INFINITY } else { a.max(v) })
}

fn reconstruction(meshes: &[usize]) -> Result<Vec<(ElementPair, usize, f64, f64, f64)>> {
    let asm = Assembler::default();
    let mut out = Vec::new();
    for pair in ElementPair::ALL {
        for &n in meshes {
            let mesh = Arc::new(generate_uniform(&DomainSpec::gresho_square(n))?);
            let (skew, div, stab) = reconstruction_metrics(&mesh, pair, SAMPLES, SEED, &asm)?;
            out.push((pair, n, skew, div, stab));
        }
    }
    Ok(out)
}

fn c1() -> Result<Outcome> {
    let m = reconstruction(&[8])?;
    let worst = m.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(outcome(worst <= 1e-12, format!("skew defect {worst:.3e} <= 1e-12 (8x8, {SAMPLES} samples, both pairs)")))
}

fn c2() -> Result<Outcome> {
    let m = reconstruction(&[8])?;
    let worst = m.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(outcome(worst <= 1e-12, format!("max |div Pi u| / ||u||_H1 = {worst:.3e} <= 1e-12")))
}

/// Gresho, p2b, modified convection, 24x24, dt 0.01, T 2, vorticity co-solve.
fn gresho_24(form: &str, vorticity: bool) -> Result<RunSummary> {
    let v = if vorticity { "true" } else { "false" };
    let case = case_gresho(&[("nx", "24"), ("t-end", "2"), ("form", form), ("vorticity", v)])?;
    Ok(run_case(&case)?.0)
}

fn c3(run: &RunSummary) -> Outcome {
    let e0 = run.initial.quantities.kinetic_energy;
    let drift = max_over(&run.records, |r| (r.quantities.kinetic_energy - e0).abs() / e0);
    let done = run.termination == Termination::Completed;
    outcome(done && drift <= 1e-9, format!("energy drift {drift:.3e} <= 1e-9 over {} steps", run.records.len()))
}

fn c4(run: &RunSummary) -> Outcome {
    let q0 = run.initial.quantities;
    let ens = max_over(&run.records, |r| (r.quantities.enstrophy - q0.enstrophy).abs() / q0.enstrophy);
    let norm_w0 = (2.0 * q0.enstrophy).sqrt();
    let tv = max_over(&run.records, |r| (r.quantities.total_vorticity - q0.total_vorticity).abs() / norm_w0);
    outcome(
        ens <= 1e-7 && tv <= 1e-7,
        format!("enstrophy drift {ens:.3e}, total vorticity drift {tv:.3e}, both <= 1e-7"),
    )
}

fn momentum_drift(run: &RunSummary, t_max: f64) -> f64 {
    let m0 = run.initial.quantities.momentum;
    let within: Vec<_> = run.records.iter().filter(|r| r.time <= t_max + 1e-12).cloned().collect();
    max_over(&within, |r| (r.quantities.momentum[0] - m0[0]).abs().max((r.quantities.momentum[1] - m0[1]).abs()))
}

fn c5(modconv: &RunSummary) -> Result<Outcome> {
    let early = momentum_drift(modconv, 1.0);
    let conv = gresho_24("conv", false)?;
    // a blow-up before t = 2 counts as unbounded drift
    let conv_drift = match conv.termination {
        Termination::Completed => momentum_drift(&conv, 2.0),
        Termination::BlowUp { .. } => f64::INFINITY,
    };
    let mod_drift = momentum_drift(modconv, 2.0);
    let ratio = conv_drift / mod_drift.max(f64::MIN_POSITIVE);
    Ok(outcome(
        early <= 1e-8 && ratio >= 100.0,
        format!(
            "modconv drift to t=1 {early:.3e} <= 1e-8; at t=2 conv {conv_drift:.3e} vs modconv {mod_drift:.3e}, ratio {ratio:.3e} >= 100"
        ),
    ))
}

fn c6() -> Result<Outcome> {
    let nx = if env_flag("NSFEM_FULL") { "48" } else { "32" };
    let conv = case_gresho(&[("nx", nx), ("form", "conv")])?;
    let (conv_run, _) = run_case(&conv)?;
    let blow = match conv_run.termination {
        Termination::BlowUp { time, .. } => Some(time),
        Termination::Completed => None,
    };
    let modconv = case_gresho(&[("nx", nx), ("form", "modconv")])?;
    let (mod_run, _) = run_case(&modconv)?;
    let e0 = mod_run.initial.quantities.kinetic_energy;
    let drift = max_over(&mod_run.records, |r| (r.quantities.kinetic_energy - e0).abs() / e0);
    let completed = mod_run.termination == Termination::Completed;
    let blow_ok = blow.is_some_and(|t| t > 1.0 && t <= 5.0);
    Ok(outcome(
        blow_ok && completed && drift <= 1e-8,
        format!(
            "{nx}x{nx}: conv blow-up at t = {} in (1, 5]; modconv to T = 10 {}, energy drift {drift:.3e} <= 1e-8",
            blow.map_or("none".into(), |t| format!("{t}")),
            if completed { "completed" } else { "stopped" }
        ),
    ))
}

fn lattice_errors(form: &str, nu: &str, dt: &str, t_end: &str) -> Result<Vec<f64>> {
    let case = case_lattice(&[("nx", "32"), ("form", form), ("nu", nu), ("dt", dt), ("t-end", t_end)])?;
    let (run, _) = run_case(&case)?;
    if run.termination != Termination::Completed {
        return Ok(vec![f64::INFINITY]);
    }
    Ok(run.records.iter().map(|r| r.l2_error.unwrap_or(f64::NAN)).collect())
}

fn c7() -> Result<Outcome> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut worst = (0.0, "", 0);
    for nu in ["1e3", "1", "1e-1"] {
        let m = lattice_errors("modconv", nu, "0.002", "0.5")?;
        let c = lattice_errors("conv", nu, "0.002", "0.5")?;
        if m.len() != c.len() {
            return Ok(outcome(false, format!("nu = {nu}: runs ended at different steps")));
        }
        for (step, (a, b)) in m.iter().zip(&c).enumerate() {
            let r = a / b;
            if r.is_nan() {
                return Ok(outcome(false, format!("nu = {nu}: undefined error ratio")));
            }
            lo = lo.min(r);
            hi = hi.max(r);
            if (r - 1.0).abs() > worst.0 {
                worst = ((r - 1.0).abs(), nu, step + 1);
            }
        }
    }
    Ok(outcome(
        lo >= 0.98 && hi <= 1.02,
        format!(
            "per-step error ratio modconv/conv in [{lo:.5}, {hi:.5}] within [0.98, 1.02]; worst at nu = {}, step {}",
            worst.1, worst.2
        ),
    ))
}

fn c8() -> Result<Outcome> {
    let m = *lattice_errors("modconv", "1e-5", "0.004", "5")?.last().unwrap_or(&f64::NAN);
    let s = *lattice_errors("skew", "1e-5", "0.004", "5")?.last().unwrap_or(&f64::NAN);
    Ok(outcome(m <= s, format!("final error modconv {m:.4e} <= skew {s:.4e}")))
}

fn c9() -> Result<Outcome> {
    let asm = Assembler::default();
    let mut passed = true;
    let mut parts = Vec::new();
    for pair in ElementPair::ALL {
        let e: Vec<(f64, f64)> = [8, 16, 32]
            .iter()
            .map(|&n| mms_errors(pair, n, 1e-3, 0.1, &asm).map(|(l2, h1, _)| (l2, h1)))
            .collect::<Result<_>>()?;
        let l2 = [observed_order(e[0].0, e[1].0), observed_order(e[1].0, e[2].0)];
        let h1 = [observed_order(e[0].1, e[1].1), observed_order(e[1].1, e[2].1)];
        // the finest pair of meshes decides
        passed &= l2[1] >= 2.7 && h1[1] >= 1.8;
        parts.push(format!("{pair} L2 {:.2}/{:.2} H1 {:.2}/{:.2}", l2[0], l2[1], h1[0], h1[1]));
    }
    Ok(outcome(passed, format!("orders 8-16/16-32: {}; need L2 >= 2.7, H1 >= 1.8", parts.join(", "))))
}

fn c10() -> Result<Outcome> {
    let asm = Assembler::default();
    let u: Vec<Field> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| mms_errors(ElementPair::P2BubbleP1Disc, 32, dt, 0.1, &asm).map(|e| e.2))
        .collect::<Result<_>>()?;
    let (d1, d2) = (difference_l2(&u[0], &u[1]), difference_l2(&u[1], &u[2]));
    let order = observed_order(d1, d2);
    Ok(outcome(order >= 1.9, format!("successive differences {d1:.3e}, {d2:.3e}, order {order:.3} >= 1.9")))
}

fn c11() -> Result<Outcome> {
    let m = reconstruction(&[8, 16, 32])?;
    let worst = m.iter().map(|r| r.4).fold(0.0, f64::max);
    Ok(outcome(worst <= 2.0, format!("max ||Pi u|| / ||u|| = {worst:.4} <= 2 on 8/16/32")))
}

fn c12() -> Result<Outcome> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut passed = true;
    let mut parts = Vec::new();
    for form in ConvectiveForm::ALL {
        let case = case_step(&[("target-h", "1.0"), ("t-end", "5"), ("form", form.name())])?;
        let mut sim = Simulation::new(case.mesh()?, case.scheme.clone())?;
        let out = dir.path().join(form.name());
        std::fs::create_dir_all(&out).expect("output directory");
        let mut frames = 0usize;
        let run = sim.run(|s, r| {
            if r.step % 100 == 0 {
                export_vtk(&s.state().u, &s.state().p, out.join(format!("step_{:05}.vtk", r.step)))?;
                frames += 1;
            }
            Ok(())
        });
        let (status, finite) = match &run {
            Ok(s) => (
                format!("{:?}", s.termination),
                s.termination == Termination::Completed && s.records.iter().all(|r| r.is_finite()),
            ),
            Err(e) => (format!("error: {e}"), false),
        };
        let readable = frames > 0 && vtk_series_readable(&out, frames);
        if form != ConvectiveForm::Conv {
            passed &= finite && readable;
        }
        parts.push(format!("{form} {status} finite={finite} vtk={frames}{}", if readable { "" } else { " unreadable" }));
    }
    Ok(outcome(passed, format!("coarse step, bdf2, T = 5: {}", parts.join("; "))))
}

fn vtk_series_readable(dir: &Path, frames: usize) -> bool {
    let Ok(entries) = std::fs::read_dir(dir) else { return false };
    let files: Vec<_> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    files.len() == frames && files.iter().all(|p| vtkio::Vtk::import(p).is_ok())
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("NSFEM_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |k: usize, r: Result<Outcome>, t: Instant| {
        let o = r.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        println!(
            "criterion {k:>2}: {}  {}  [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((k, o));
    };

    let singles: [(usize, fn() -> Result<Outcome>); 2] = [(1, c1), (2, c2)];
    for (k, f) in singles {
        if wanted(k) {
            let t = Instant::now();
            report(k, f(), t);
        }
    }
    if wanted(3) || wanted(4) || wanted(5) {
        let t = Instant::now();
        match gresho_24("modconv", true) {
            Ok(run) => {
                if wanted(3) {
                    report(3, Ok(c3(&run)), t);
                }
                if wanted(4) {
                    report(4, Ok(c4(&run)), t);
                }
                if wanted(5) {
                    let t = Instant::now();
                    report(5, c5(&run), t);
                }
            }
            Err(e) => {
                for k in (3..=5).filter(|&k| wanted(k)) {
                    report(k, Ok(outcome(false, format!("error: {e}"))), t);
                }
            }
        }
    }
    let rest: [(usize, fn() -> Result<Outcome>); 7] =
        [(6, c6), (7, c7), (8, c8), (9, c9), (10, c10), (11, c11), (12, c12)];
    for (k, f) in rest {
        if wanted(k) {
            let t = Instant::now();
            report(k, f(), t);
        }
    }

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.passed).map(|(k, _)| *k).collect();
    println!(
        "{} of {} criteria passed in {:.0}s{}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if env_flag("NSFEM_STRICT") && !failed.is_empty() {
        std::process::exit(1);
    }
}
