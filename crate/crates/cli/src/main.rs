//! `nsfem`: run benchmark cases, parameter sweeps and the property suite.
//!
//! Exit codes: 0 success, 1 failed verify checks, 2 usage, 3 blow-up,
//! 4 solver failure.

mod run;
mod settings;
mod sweep;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsfem_core::quadrature::{QuadratureRule, DEFAULT_DEGREE};
use nsfem_core::verify::{all_passed, format_table, run_verify, VerifyOptions};

use run::{execute, Status, EXIT_FAILED_CHECKS, EXIT_OK, EXIT_USAGE};
use settings::{flag_error, Settings};
use sweep::{run_sweep, Axis};

#[derive(Parser, Debug)]
#[command(name = "nsfem", version = env!("CARGO_PKG_VERSION"), about = "Mixed finite element solver for 2D incompressible flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one benchmark case.
    Run(RunArgs),
    /// Run the cartesian product of one or more parameter axes.
    Sweep(SweepArgs),
    /// Run the property suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    settings: Settings,
    /// No progress lines on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    settings: Settings,
    /// `key=v1,v2,...`; repeat for a product of axes.
    #[arg(long = "axis", value_name = "KEY=VALUES", required = true)]
    axes: Vec<String>,
    /// Runs in parallel.
    #[arg(long, short, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Root seed of the random test fields.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random fields per element pair.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Quadrature degree for operator assembly.
    #[arg(long = "quadrature-degree", default_value_t = DEFAULT_DEGREE)]
    quadrature_degree: usize,
}

fn usage(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let req = match args.settings.resolve() {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let out = execute(&req, !args.quiet);
    match &out.status {
        Status::Completed => println!(
            "completed {} steps in {:.1} s -> {}",
            out.records.len(),
            out.wall_seconds,
            req.out.display()
        ),
        Status::BlowUp { step, time } => println!("blow-up at step {step}, t = {time:.6} -> {}", req.out.display()),
        Status::Failed { message, .. } => eprintln!("error: {message}"),
    }
    code(out.status.exit_code())
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let axes: Vec<Axis> = match args.axes.iter().map(|a| Axis::parse(a)).collect() {
        Ok(a) => a,
        Err(e) => return usage(e),
    };
    let (base, root) = match args.settings.pairs().and_then(|p| args.settings.resolve().map(|r| (p, r.out))) {
        Ok(x) => x,
        Err(e) => return usage(e),
    };
    let res = match run_sweep(&base, &root, &axes, args.jobs) {
        Ok(r) => r,
        Err(e) => return usage(flag_error(e)),
    };
    println!(
        "{} of {} runs completed -> {}",
        res.completed(),
        res.outcomes.len(),
        root.join("summary.csv").display()
    );
    code(sweep::exit_code(&res))
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    if let Err(e) = QuadratureRule::new(args.quadrature_degree) {
        return usage(format!("--quadrature-degree: {e}"));
    }
    let outcomes = run_verify(&VerifyOptions {
        seed: args.seed,
        quadrature_degree: args.quadrature_degree,
        samples: args.samples,
    });
    print!("{}", format_table(&outcomes));
    code(if all_passed(&outcomes) { EXIT_OK } else { EXIT_FAILED_CHECKS })
}
