//! One run: build the case, step it, write diagnostics.csv, meta.txt and
//! the optional VTK series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nsfem_core::benchmarks::{BenchmarkCase, RunRequest};
use nsfem_core::diagnostics::{export_vtk, write_csv, DiagnosticsRecord};
use nsfem_core::timestepping::Termination;
use nsfem_core::{Error, Result, Simulation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

pub fn version() -> String {
    format!("nsfem {} ({})", env!("CARGO_PKG_VERSION"), env!("NSFEM_GIT_DESCRIBE"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Completed,
    BlowUp { step: usize, time: f64 },
    Failed { code: i32, message: String },
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Completed => EXIT_OK,
            Status::BlowUp { .. } => EXIT_BLOWUP,
            Status::Failed { code, .. } => *code,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::BlowUp { .. } => "blowup",
            Status::Failed { .. } => "failed",
        }
    }

    fn describe(&self) -> String {
        match self {
            Status::Completed => "completed".into(),
            Status::BlowUp { step, time } => format!("blowup at step {step}, t = {time:.6}"),
            Status::Failed { message, .. } => format!("failed: {message}"),
        }
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        // a bad request, including an unwritable output directory
        Error::Config(_) | Error::Io { .. } => EXIT_USAGE,
        Error::BlowUp { .. } => EXIT_BLOWUP,
        _ => EXIT_SOLVER,
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub request: RunRequest,
    pub status: Status,
    pub initial: Option<DiagnosticsRecord>,
    pub records: Vec<DiagnosticsRecord>,
    pub dofs: Option<(usize, usize)>,
    pub wall_seconds: f64,
}

impl RunOutcome {
    pub fn energy_drift(&self) -> Option<f64> {
        let e0 = self.initial.as_ref()?.quantities.kinetic_energy;
        let e = self.records.last()?.quantities.kinetic_energy;
        Some((e - e0).abs() / e0)
    }
}

/// Runs `req` and writes its artifacts into `req.out`. Never panics on
/// solver trouble; the status carries the exit code.
pub fn execute(req: &RunRequest, progress: bool) -> RunOutcome {
    let start = Instant::now();
    let mut out = RunOutcome {
        request: req.clone(),
        status: Status::Completed,
        initial: None,
        records: Vec::new(),
        dofs: None,
        wall_seconds: 0.0,
    };
    if let Err(e) = simulate(req, &mut out, progress) {
        out.status = Status::Failed {
            code: error_code(&e),
            message: e.to_string(),
        };
    }
    out.wall_seconds = start.elapsed().as_secs_f64();
    let written = fs::create_dir_all(&req.out)
        .map_err(|e| Error::Config(format!("cannot create '{}': {e}", req.out.display())))
        .and_then(|_| write_csv(&out.records, req.out.join("diagnostics.csv")))
        .and_then(|_| fs::write(req.out.join("meta.txt"), meta_text(&out)).map_err(|e| Error::Config(e.to_string())));
    if let Err(e) = written {
        if out.status == Status::Completed || matches!(out.status, Status::BlowUp { .. }) {
            out.status = Status::Failed {
                code: error_code(&e),
                message: e.to_string(),
            };
        }
    }
    out
}

fn simulate(req: &RunRequest, out: &mut RunOutcome, progress: bool) -> Result<()> {
    let case = BenchmarkCase::new(req.clone())?;
    fs::create_dir_all(&req.out).map_err(|e| Error::Config(format!("cannot create '{}': {e}", req.out.display())))?;
    let mut sim = Simulation::new(case.mesh()?, case.scheme.clone())?;
    out.dofs = Some(sim.dof_counts());
    let vtk_dir = req.out.join("vtk");
    if req.vtk_every > 0 {
        fs::create_dir_all(&vtk_dir).map_err(|e| Error::Config(format!("cannot create '{}': {e}", vtk_dir.display())))?;
        write_frame(&sim, &vtk_dir, 0)?;
    }
    let total = sim.config().num_steps();
    let report_every = (total / 20).max(1);
    let records = &mut out.records;
    let summary = sim.run(|s, r| {
        records.push(r.clone());
        if req.vtk_every > 0 && r.step % req.vtk_every == 0 {
            write_frame(s, &vtk_dir, r.step)?;
        }
        if progress && (r.step % report_every == 0 || r.step == total) {
            eprintln!(
                "step {}/{total}  t = {:.4}  E = {:.10e}",
                r.step, r.time, r.quantities.kinetic_energy
            );
        }
        Ok(())
    });
    match summary {
        Ok(s) => {
            out.initial = Some(s.initial);
            if let Termination::BlowUp { step, time } = s.termination {
                out.status = Status::BlowUp { step, time };
            }
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn write_frame(sim: &Simulation, dir: &Path, step: usize) -> Result<()> {
    let s = sim.state();
    export_vtk(&s.u, &s.p, dir.join(format!("step_{step:06}.vtk")))
}

/// The resolved config in config-file syntax, so `run --config meta.txt`
/// repeats the run, followed by run facts as comments.
pub fn meta_text(out: &RunOutcome) -> String {
    let mut s = String::from("# nsfem run; repeat with `nsfem run --config meta.txt`\n");
    s.push_str(&out.request.to_config_string());
    let _ = writeln!(s, "# version: {}", version());
    match out.dofs {
        Some((nu, np)) => {
            let _ = writeln!(s, "# velocity dofs: {nu}");
            let _ = writeln!(s, "# pressure dofs: {np}");
        }
        None => {
            let _ = writeln!(s, "# dofs: not built");
        }
    }
    let _ = writeln!(s, "# steps written: {}", out.records.len());
    let _ = writeln!(s, "# termination: {}", out.status.describe());
    let _ = writeln!(s, "# exit code: {}", out.status.exit_code());
    let _ = writeln!(s, "# wall time: {:.3} s", out.wall_seconds);
    s
}
