use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geomexp::harness::{self, ExperimentConfig, Suite, SweepConfig};
use geomexp::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "geomexp", version, about = "Geometric exponential integrators for semilinear Poisson systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write step,t,energy_error[,traj_error],iterations,residual.
    Integrate(IntegrateArgs),
    /// Find the largest converging timestep per method, solver and resolution.
    Sweep(SweepArgs),
    /// Run a verification suite: structure, order, poisson or composition.
    Verify(VerifyArgs),
    /// Write a matplotlib script that plots the given CSVs.
    PlotScript(PlotArgs),
}

#[derive(Args)]
struct IntegrateArgs {
    /// key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// nls | kdv
    #[arg(long)]
    model: Option<String>,
    /// Grid size N (odd).
    #[arg(long, short = 'n')]
    nodes: Option<String>,
    /// KdV dispersion.
    #[arg(long)]
    nu: Option<String>,
    /// midpoint | dg | exp_euler | exp_midpoint | disex6 | energy_exp
    #[arg(long)]
    method: Option<String>,
    /// fixed_point | newton
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, short = 'o')]
    output: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Drop the potential term.
    #[arg(long)]
    linear: bool,
    /// Add traj_error against an exp_midpoint run at h/100.
    #[arg(long)]
    reference: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated grid sizes.
    #[arg(long, short = 'n')]
    nodes: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    /// Comma-separated method[:solver] list, e.g. midpoint:newton,exp_midpoint.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    h_min: Option<String>,
    #[arg(long)]
    h_max: Option<String>,
    /// Minimum steps per sweep point (default 100).
    #[arg(long)]
    horizon: Option<String>,
    /// Simulated time each sweep point must also cover (default 5; 0 disables).
    #[arg(long)]
    horizon_time: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, short = 'o')]
    output: Option<String>,
    /// h_max summary file (default: <output stem>_summary.csv).
    #[arg(long)]
    summary: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    linear: bool,
    /// Worker threads (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// structure | order | poisson | composition
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Sweep, summary or trajectory CSVs.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    #[arg(long, short = 'o', default_value = "plots.py")]
    output: PathBuf,
}

fn overrides(pairs: &[(&str, &Option<String>)], mut set: impl FnMut(&str, &str) -> Result<()>) -> Result<()> {
    for (key, value) in pairs {
        if let Some(v) = value {
            set(key, v)?;
        }
    }
    Ok(())
}

fn integrate(args: IntegrateArgs) -> Result<u8> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    overrides(
        &[
            ("model", &args.model),
            ("nodes", &args.nodes),
            ("nu", &args.nu),
            ("method", &args.method),
            ("solver", &args.solver),
            ("h", &args.h),
            ("steps", &args.steps),
            ("tol", &args.tol),
            ("output", &args.output),
            ("seed", &args.seed),
        ],
        |k, v| cfg.set(k, v),
    )?;
    if args.linear {
        cfg.linear = true;
    }
    cfg.validate()?;
    let mut out = BufWriter::new(File::create(&cfg.output)?);
    let summary = harness::run_integrate(&cfg, args.reference, &mut out)?;
    match summary.failed_step {
        Some(k) => {
            eprintln!("{}: solver failed at step {k}; partial CSV kept in {}", cfg.method, cfg.output.display());
            Ok(EXIT_DIVERGED)
        }
        None => {
            println!(
                "{} steps, max energy error {:e}, final {:e}{}",
                summary.steps_completed,
                summary.max_energy_error,
                summary.final_energy_error,
                summary
                    .max_traj_error
                    .map(|e| format!(", max traj error {e:e}"))
                    .unwrap_or_default()
            );
            Ok(0)
        }
    }
}

fn sweep(args: SweepArgs) -> Result<u8> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    overrides(
        &[
            ("model", &args.model),
            ("nodes", &args.nodes),
            ("nu", &args.nu),
            ("methods", &args.methods),
            ("h_min", &args.h_min),
            ("h_max", &args.h_max),
            ("horizon", &args.horizon),
            ("horizon_time", &args.horizon_time),
            ("tol", &args.tol),
            ("output", &args.output),
            ("summary", &args.summary),
            ("seed", &args.seed),
        ],
        |k, v| cfg.set(k, v),
    )?;
    if args.linear {
        cfg.linear = true;
    }
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = BufWriter::new(File::create(&cfg.output)?);
    let mut summary = BufWriter::new(File::create(cfg.summary_path())?);
    let results = pool.install(|| harness::run_sweep(&cfg, &mut rows, &mut summary))?;
    for r in results {
        let h = r.h_max.map(|h| format!("{h:e}")).unwrap_or_else(|| "none".into());
        println!("{:<14}{:<13}N={:<6}h_max={h}", r.method.name(), r.solver.name(), r.resolution);
    }
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<u8> {
    let suite: Suite = args.suite.parse()?;
    let checks = harness::run_suite(suite, args.seed)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY_FAILED })
}

fn plot_script(args: PlotArgs) -> Result<u8> {
    let script = harness::plot_script(&args.csv)?;
    fs::write(&args.output, script)?;
    println!("wrote {}", args.output.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Integrate(a) => integrate(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::PlotScript(a) => plot_script(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
