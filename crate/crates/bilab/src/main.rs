//! Command-line harness: each subcommand runs one experiment driven by a
//! flat key=value config file and writes CSV artifacts plus `report.json`
//! into the output directory.
//!
//! Exit codes: 0 when every check passes, 1 when the run completes but a
//! check fails (the report is still written), 2 for configuration or usage
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use bilab::config::Config;
use bilab::error::Error;
use bilab::experiments::{self, RunContext};

#[derive(Parser)]
#[command(
    name = "bilab",
    about = "Finite-difference laboratory for fourth-order Navier problems \
             with first-order nonlinear perturbations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Key=value config file driving the experiment.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and report.json (default: alongside
    /// the config file, named after the subcommand).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override; otherwise the config key `seed` is required.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-convergence study of the plain fourth-order Navier solve.
    Forward(RunArgs),
    /// Fixed-point diagnostics for one nonlinear solve.
    Fixpoint(RunArgs),
    /// Stability probe comparing interior and boundary distances.
    CauchyProbe(RunArgs),
    /// Clamped least-squares projection diagnostics.
    Project(RunArgs),
    /// Transfer between two solution maps and its derivative.
    SecondMap(RunArgs),
    /// Coefficient-difference recovery from boundary pairings.
    Recover(RunArgs),
    /// Density of global solutions on subdomains plus point control.
    Runge(RunArgs),
    /// Reachable-set sweep comparing two nonlinearities on reached jets.
    Sweep(RunArgs),
    /// Verification battery for the nonlinearity calculus.
    VerifyAppendix(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward(_) => "forward",
            Command::Fixpoint(_) => "fixpoint",
            Command::CauchyProbe(_) => "cauchy-probe",
            Command::Project(_) => "project",
            Command::SecondMap(_) => "second-map",
            Command::Recover(_) => "recover",
            Command::Runge(_) => "runge",
            Command::Sweep(_) => "sweep",
            Command::VerifyAppendix(_) => "verify-appendix",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Forward(a)
            | Command::Fixpoint(a)
            | Command::CauchyProbe(a)
            | Command::Project(a)
            | Command::SecondMap(a)
            | Command::Recover(a)
            | Command::Runge(a)
            | Command::Sweep(a)
            | Command::VerifyAppendix(a) => a,
        }
    }
}

fn build_context(name: &str, args: &RunArgs) -> Result<RunContext, Error> {
    let cfg = Config::load(&args.config)?;
    let seed = match args.seed {
        // The command line wins, but the config key still counts as
        // consumed so the strict unknown-key check stays meaningful.
        Some(s) => {
            let _ = cfg.get_u64("seed", s)?;
            s
        }
        None => {
            if cfg.contains("seed") {
                cfg.get_u64("seed", 0)?
            } else {
                return Err(Error::Config(
                    "missing seed: set `seed` in the config or pass --seed".into(),
                ));
            }
        }
    };
    let out_dir = match &args.out {
        Some(p) => p.clone(),
        None => args
            .config
            .parent()
            .unwrap_or_else(|| std::path::Path::new("."))
            .join(format!("{name}-out")),
    };
    std::fs::create_dir_all(&out_dir)?;
    Ok(RunContext { cfg, out_dir, seed })
}

fn dispatch(name: &str, ctx: &RunContext) -> Result<bilab::report::Report, Error> {
    match name {
        "forward" => experiments::forward::run(ctx),
        "fixpoint" => experiments::fixpoint::run(ctx),
        "cauchy-probe" => experiments::cauchy_probe::run(ctx),
        "project" => experiments::project::run(ctx),
        "second-map" => experiments::second_transfer::run(ctx),
        "recover" => experiments::recover::run(ctx),
        "runge" => experiments::runge_density::run(ctx),
        "sweep" => experiments::sweep::run(ctx),
        "verify-appendix" => experiments::appendix::run(ctx),
        _ => unreachable!("unmapped subcommand {name}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let args = cli.command.args();
    let started = Instant::now();

    let ctx = match build_context(name, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("bilab {name}: {e}");
            return ExitCode::from(2);
        }
    };
    match dispatch(name, &ctx) {
        Ok(report) => {
            if let Err(e) = report.write(&ctx.out_dir) {
                eprintln!("bilab {name}: cannot write report: {e}");
                return ExitCode::from(2);
            }
            report.print_summary(started.elapsed());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("bilab {name}: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            // A numerical failure still produces a report recording it.
            let mut report = ctx.report(name);
            report.failure("run", &e.to_string());
            if let Err(we) = report.write(&ctx.out_dir) {
                eprintln!("bilab {name}: cannot write failure report: {we}");
            }
            eprintln!("bilab {name}: {e}");
            ExitCode::from(1)
        }
    }
}
