//! `kmnmf` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kmnmf::harness::{self, BenchOptions, GeneratorSpec, RunReport};
use kmnmf::operators::vi_residual;
use kmnmf::solvers::{run, NmfProblem, SolverConfig};
use kmnmf::verify::{self, StepDraw};
use kmnmf::{matrix_io, Algorithm, NmfError, StepPolicy};

#[derive(Parser, Debug)]
#[command(
    name = "kmnmf",
    version,
    about = "Nonnegative matrix factorization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one algorithm on one instance and print the final state.
    Solve(SolveArgs),
    /// Run the repeated-sampling benchmark and write a report.
    Bench(BenchArgs),
    /// Run the randomized property suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    FixedPoint,
    Mult,
    Als,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::FixedPoint => Algorithm::FixedPoint,
            AlgoArg::Mult => Algorithm::Mult,
            AlgoArg::Als => Algorithm::Als,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StepArg {
    Adaptive,
    Const,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Rows of V.
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Columns of V.
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// Inner dimension R of the factorization.
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Target fraction of nonzero entries in V.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Base seed; falls back to $NMF_SEED, then 0.
    #[arg(long, env = "NMF_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Averaging weight C of the fixed-point iteration, in (0, 1).
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_enum)]
    step: Option<StepArg>,
    /// Constant step used with `--step const`.
    #[arg(long)]
    step_c: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol_fun: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_x: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Load V from a matrix file (`rows cols` header, row-major entries)
    /// instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Which random starting point to use.
    #[arg(long, default_value_t = 0)]
    sample: usize,
    /// Directory to write W.txt, H.txt and trace.csv into.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// One of table1..table8; overrides the instance and algorithm flags.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Worker threads for samples (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write NA for the timing columns so the report is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Samples for the nonexpansivity sweep.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, env = "NMF_SEED", default_value_t = 0)]
    seed: u64,
    /// Use the step 3/‖G‖_F, which violates the nonexpansivity bound, and
    /// succeed only if the sweep detects violations.
    #[arg(long)]
    diagnostic: bool,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<NmfError> for CliError {
    fn from(e: NmfError) -> Self {
        match e {
            NmfError::InvalidParameter(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn solver_config(args: &SolverArgs, default: Algorithm) -> Result<SolverConfig, CliError> {
    let algorithm = args.algo.map(Algorithm::from).unwrap_or(default);
    let mut cfg = match algorithm {
        Algorithm::FixedPoint => SolverConfig::fixed_point(args.c.unwrap_or(0.25)),
        Algorithm::Mult => SolverConfig::mult(),
        Algorithm::Als => SolverConfig::als(),
    };
    match (args.step, args.step_c) {
        (Some(StepArg::Const), Some(c)) => cfg.step_policy = StepPolicy::constant(c)?,
        (Some(StepArg::Const), None) => {
            return Err(CliError::Usage("--step const requires --step-c".into()))
        }
        (None, Some(c)) => cfg.step_policy = StepPolicy::constant(c)?,
        (Some(StepArg::Adaptive), Some(_)) => {
            return Err(CliError::Usage(
                "--step-c conflicts with --step adaptive".into(),
            ))
        }
        _ => {}
    }
    cfg.max_iter = args.max_iter;
    cfg.tol_fun = args.tol_fun;
    cfg.tol_x = args.tol_x;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let cfg = solver_config(&args.solver, Algorithm::FixedPoint)?;
    let inst = &args.instance;
    let (v, spec) = match &args.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let v = matrix_io::parse_matrix(&text)?;
            let spec = GeneratorSpec::new(v.rows(), v.cols(), inst.rank, 1.0, inst.seed)?;
            (v, spec)
        }
        None => {
            let spec = GeneratorSpec::new(inst.m, inst.n, inst.rank, inst.rate, inst.seed)?;
            (harness::generate_v(&spec), spec)
        }
    };
    let problem = NmfProblem::new(v, spec.rank)?;
    let (w0, h0) = harness::generate_init(&spec, args.sample);
    let out = run(&problem, &cfg, w0, h0)?;
    let residual = vi_residual(problem.v(), &out.state.w, &out.state.h)?;

    println!("algorithm    {}", cfg.label());
    println!(
        "instance     {}x{} R={} seed={}",
        problem.m(),
        problem.n(),
        problem.rank(),
        spec.seed
    );
    println!("iterations   {}", out.state.n);
    println!("f            {:.10e}", out.state.f_value);
    println!("F            {:.10e}", out.state.rms_value);
    println!("vi_residual  {:.10e}", residual);
    println!("stop         {}", out.reason);
    println!("time [s]     {:.6}", out.state.elapsed);

    if let Some(dir) = &args.output {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| io_err(&path, e))
        };
        write("W.txt", matrix_io::format_matrix(&out.state.w))?;
        write("H.txt", matrix_io::format_matrix(&out.state.h))?;
        let mut trace = String::from("n,f,F\n");
        for p in &out.trace {
            trace.push_str(&format!("{},{:?},{:?}\n", p.n, p.f, p.rms));
        }
        write("trace.csv", trace)?;
    }
    Ok(())
}

fn print_summary(reports: &[RunReport], timing: bool) {
    println!(
        "{:<22} {:>12} {:>12} {:>12} {:>12}",
        "algorithm", "bstT", "avgT", "bstF", "avgF"
    );
    for r in reports {
        let (bt, at) = if timing {
            (harness::format_sig8(r.bst_t), harness::format_sig8(r.avg_t))
        } else {
            ("NA".into(), "NA".into())
        };
        println!(
            "{:<22} {:>12} {:>12} {:>12} {:>12}",
            r.label,
            bt,
            at,
            harness::format_sig8(r.bst_f),
            harness::format_sig8(r.avg_f)
        );
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let inst = &args.instance;
    let (spec, configs) = match &args.preset {
        Some(name) => {
            let p = harness::preset(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown preset `{name}`; expected one of {}",
                    harness::PRESET_NAMES.join(", ")
                ))
            })?;
            let mut configs = p.configs.clone();
            for cfg in &mut configs {
                cfg.max_iter = args.solver.max_iter;
                cfg.tol_fun = args.solver.tol_fun;
                cfg.tol_x = args.solver.tol_x;
            }
            (p.spec(inst.seed), configs)
        }
        None => {
            let spec = GeneratorSpec::new(inst.m, inst.n, inst.rank, inst.rate, inst.seed)?;
            let configs = if args.solver.algo.is_some() {
                vec![solver_config(&args.solver, Algorithm::FixedPoint)?]
            } else {
                harness::full_config_set()
                    .into_iter()
                    .map(|c| SolverConfig {
                        max_iter: args.solver.max_iter,
                        tol_fun: args.solver.tol_fun,
                        tol_x: args.solver.tol_x,
                        ..c
                    })
                    .collect()
            };
            (spec, configs)
        }
    };
    let reports = harness::run_benchmark(
        &spec,
        &configs,
        BenchOptions {
            samples: args.samples,
            workers: args.workers,
        },
    )?;

    let timing = !args.no_timing;
    println!(
        "V: {}x{} R={} rate target={} realized={} seed={} samples={}",
        spec.m,
        spec.n,
        spec.rank,
        spec.rate,
        harness::format_sig8(reports.first().map_or(0.0, |r| r.rate_realized_mean)),
        spec.seed,
        args.samples
    );
    print_summary(&reports, timing);

    if let Some(path) = &args.output {
        let body = match args.format {
            FormatArg::Csv => harness::reports_to_csv(&reports, timing),
            FormatArg::Json => harness::reports_to_json(&reports)?,
        };
        fs::write(path, body).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    if args.diagnostic {
        let res = verify::nonexpansivity(args.trials, args.seed, StepDraw::Scaled(3.0))?;
        println!("{res}");
        return if res.passed() {
            Err(CliError::Runtime(
                "diagnostic sweep found no violations with an invalid step".into(),
            ))
        } else {
            println!("diagnostic: violations detected as expected");
            Ok(())
        };
    }
    let results = verify::run_all(args.trials, args.seed)?;
    for r in &results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(CliError::Runtime("property suites failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
