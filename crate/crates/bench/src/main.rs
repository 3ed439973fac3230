//! `bench`: run one solver configuration or the full example sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use saddlecg::bench::{
    run_benchmark, run_sweep, sweep_configs, write_sweep, Execution, Precond, ProblemSpec, Rhs,
    RunConfig, Solver, SweepOptions,
};
use saddlecg::spectral::WeightMode;

#[derive(Parser)]
#[command(name = "bench", version, about = "Scattering amplitude solver benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one problem.
    Run(RunArgs),
    /// Run every example/solver pair and write one CSV and JSON per run.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Nspcg,
    Glsqr,
    Qmr,
    Lsqr,
}

#[derive(Clone, Copy, ValueEnum)]
enum WModeArg {
    Strict,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum RhsArg {
    Ones,
    Random,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("problem").required(true).args(["example", "matrix"]))]
struct RunArgs {
    /// Built-in example 1..6 (example 2 reads ORSIRR_1 from --matrix or $ORSIRR_1_PATH).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    example: Option<u8>,
    /// Matrix Market file to use as `A`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nspcg")]
    solver: SolverArg,
    /// none, exact, iqr or iqr:DROPTOL
    #[arg(long, default_value = "none")]
    precond: String,
    #[arg(long, value_enum, default_value = "weak")]
    w_mode: WModeArg,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    maxit: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "ones")]
    rhs: RhsArg,
    /// Override the example's dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Override the number of large singular values (examples 4-6).
    #[arg(long)]
    p: Option<usize>,
    /// Override the sprand density (example 1).
    #[arg(long)]
    density: Option<f64>,
    /// Override the perturbation scale (example 3).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Record wall-clock time in the JSON summary (output is then not reproducible).
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Local ORSIRR_1 file; Example 2 runs are skipped without it.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Also run Example 6 (n = 1000).
    #[arg(long)]
    include_example6: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run configurations one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

fn problem(args: &RunArgs) -> Result<ProblemSpec, String> {
    let mut spec = match (args.example, &args.matrix) {
        (Some(2), Some(path)) => ProblemSpec::Example2 { path: path.clone() },
        (Some(k), _) => ProblemSpec::example(k, args.seed).map_err(|e| e.to_string())?,
        (None, Some(path)) => ProblemSpec::File { path: path.clone() },
        (None, None) => return Err("one of --example or --matrix is required".into()),
    };
    match &mut spec {
        ProblemSpec::Example1 { n, density, .. } => {
            *n = args.n.unwrap_or(*n);
            *density = args.density.unwrap_or(*density);
        }
        ProblemSpec::Example3 { n, scale, .. } => {
            *n = args.n.unwrap_or(*n);
            *scale = args.scale.unwrap_or(*scale);
        }
        ProblemSpec::Svd { n, p, .. } => {
            *n = args.n.unwrap_or(*n);
            *p = args.p.unwrap_or(*p);
        }
        ProblemSpec::Example2 { .. } | ProblemSpec::File { .. } => {}
    }
    Ok(spec)
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    let solver = match args.solver {
        SolverArg::Nspcg => Solver::Nspcg,
        SolverArg::Glsqr => Solver::Glsqr,
        SolverArg::Qmr => Solver::Qmr,
        SolverArg::Lsqr => Solver::Lsqr,
    };
    let mut cfg = RunConfig::new(problem(&args)?, solver);
    cfg.precond = args.precond.parse::<Precond>().map_err(|e| e.to_string())?;
    cfg.w_mode = match args.w_mode {
        WModeArg::Strict => WeightMode::Strict,
        WModeArg::Weak => WeightMode::Weak,
    };
    cfg.tol = args.tol;
    cfg.maxit = args.maxit;
    cfg.seed = args.seed;
    cfg.rhs = match args.rhs {
        RhsArg::Ones => Rhs::Ones,
        RhsArg::Random => Rhs::Random,
    };
    cfg.record_timing = args.record_timing;

    let out = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    if let Some(path) = &args.out_csv {
        let bytes = out.csv_bytes().map_err(|e| e.to_string())?;
        std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let json = out.json().map_err(|e| e.to_string())?;
    match &args.out_json {
        Some(path) => std::fs::write(path, &json).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{json}"),
    }
    eprintln!(
        "{}: {} after {} iterations",
        cfg.label(),
        out.status.as_str(),
        out.summary.iterations
    );
    Ok(ExitCode::from(out.status.exit_code() as u8))
}

fn sweep(args: SweepArgs) -> Result<ExitCode, String> {
    let opts = SweepOptions {
        orsirr_1: args.matrix,
        include_example6: args.include_example6,
        seed: args.seed,
    };
    let configs = sweep_configs(&opts).map_err(|e| e.to_string())?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let results = run_sweep(&configs, exec);
    let mut failed = false;
    for (cfg, res) in configs.iter().zip(&results) {
        match res {
            Ok(out) => println!("{:<32} {:<10} {:>5}", cfg.label(), out.status.as_str(), out.summary.iterations),
            Err(e) => {
                failed = true;
                println!("{:<32} error: {e}", cfg.label());
            }
        }
    }
    write_sweep(&args.out_dir, &configs, &results).map_err(|e| e.to_string())?;
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        ExitCode::from(1)
    })
}
