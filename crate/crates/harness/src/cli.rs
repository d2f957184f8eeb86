//! The `masspart` command line.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::demo::write_demo;
use crate::instance::Instance;
use crate::plot::render_plot;
use crate::report::{load_solution, Report};
use crate::run::{exit_code, oracle_only, solve, verify_only, EXIT_PASS, EXIT_USAGE};
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "masspart", version, about = "Mass-partition solvers with grid oracles and independent verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flag whose levels bisect the given functionals (also ham-sandwich instances).
    Fairy(RunArgs),
    /// (k-1)-vertical k-flat through the origin with a bisecting (k-1)-flat.
    Rotation(RunArgs),
    /// lambda-vertical k-flat with a common lambda-transversal.
    Transversal(RunArgs),
    /// Vertical hyperplane and horizontal cut bisecting line families.
    Horizontal(RunArgs),
    /// Time and hyperplane bisecting moving point families.
    Dynamic(RunArgs),
    /// Vertical line and split point bisecting hyperplane families.
    Hline(RunArgs),
    /// Exhaustive grid over the solver's parametrization.
    Oracle(RunArgs),
    /// Recompute the conditions of a stored solution.
    Verify(RunArgs),
    /// Write the built-in instances into a directory.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Instance file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Report file; printed to stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// SVG plot of the instance and the solution.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Number of multistart seeds [default: 64].
    #[arg(long, value_name = "N")]
    pub starts: Option<usize>,
    /// Residual target [default: 1e-6].
    #[arg(long, value_name = "REAL")]
    pub target: Option<f64>,
    /// Oracle grid points per axis [default: 64]; solve commands run the oracle only when given.
    #[arg(long, value_name = "N")]
    pub resolution: Option<usize>,
    /// Gaussian blur applied to raw discrete payloads.
    #[arg(long, value_name = "SIGMA")]
    pub mollify: Option<f64>,
    /// Solution or report file to check (verify only).
    #[arg(long, value_name = "PATH")]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "demo")]
    pub out: PathBuf,
}

fn load(args: &RunArgs) -> Result<Instance, HarnessError> {
    let mut inst = Instance::load(&args.input)?;
    let c = &mut inst.config;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(n) = args.starts {
        c.starts = n;
    }
    if let Some(t) = args.target {
        if !(t > 0.0) {
            return Err(HarnessError::Usage("--target must be positive".into()));
        }
        c.target = t;
    }
    if let Some(r) = args.resolution {
        c.grid_resolution = r;
    }
    if let Some(s) = args.mollify {
        if !(s > 0.0) {
            return Err(HarnessError::Usage("--mollify must be positive".into()));
        }
        c.mollify = Some(s);
    }
    Ok(inst)
}

fn expect_kind(inst: &Instance, allowed: &[&str], command: &str) -> Result<(), HarnessError> {
    let kind = inst.problem.kind();
    if allowed.contains(&kind) {
        Ok(())
    } else {
        Err(HarnessError::Usage(format!("`{command}` does not accept {kind} instances")))
    }
}

fn emit(report: &Report, inst: &Instance, args: &RunArgs) -> Result<(), HarnessError> {
    if let Some(p) = &args.plot {
        let note = format!("{:?} {:?}, residual {:.3e}", report.status, report.verdict, report.residual_norm);
        render_plot(inst, report.solution.as_ref(), Some(&note), p)?;
    }
    match &args.out {
        Some(p) => report.write(p),
        None => std::io::stdout()
            .write_all(report.to_json().as_bytes())
            .map_err(|e| HarnessError::Io(e.to_string())),
    }
}

fn run(command: Command) -> Result<i32, HarnessError> {
    let (args, allowed, name): (RunArgs, &[&str], &str) = match command {
        Command::Demo(d) => {
            for p in write_demo(&d.out)? {
                println!("{}", p.display());
            }
            return Ok(EXIT_PASS);
        }
        Command::Oracle(args) => {
            let inst = load(&args)?;
            let report = oracle_only(&inst, inst.config.grid_resolution)?;
            eprintln!("oracle: floor {:.6e} over {} evaluations", report.residual_norm, report.oracle.as_ref().map_or(0, |o| o.evaluations));
            emit(&report, &inst, &args)?;
            return Ok(exit_code(&report));
        }
        Command::Verify(args) => {
            let inst = load(&args)?;
            let path = args.solution.clone().ok_or_else(|| HarnessError::Usage("verify needs --solution PATH".into()))?;
            let report = verify_only(&inst, load_solution(&path)?)?;
            summarize(&report);
            emit(&report, &inst, &args)?;
            return Ok(exit_code(&report));
        }
        Command::Fairy(a) => (a, &["fairy", "hamsandwich"], "fairy"),
        Command::Rotation(a) => (a, &["rotation"], "rotation"),
        Command::Transversal(a) => (a, &["transversal"], "transversal"),
        Command::Horizontal(a) => (a, &["horizontal"], "horizontal"),
        Command::Dynamic(a) => (a, &["dynamic"], "dynamic"),
        Command::Hline(a) => (a, &["translated-line"], "hline"),
    };
    let inst = load(&args)?;
    expect_kind(&inst, allowed, name)?;
    let report = solve(&inst, args.resolution)?;
    summarize(&report);
    emit(&report, &inst, &args)?;
    Ok(exit_code(&report))
}

fn summarize(r: &Report) {
    eprintln!("{}: {:?} {:?}, residual {:.6e}", r.kind, r.status, r.verdict, r.residual_norm);
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

/// Runs the command line; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

