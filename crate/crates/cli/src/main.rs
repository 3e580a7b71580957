mod bench;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use highdiv::ccss::{MoveOperator, SearchParams};
use highdiv::cdclt::CdclLimits;
use highdiv::coverage::CoverageAccumulator;
use highdiv::sample_io::{read_jsonl, write_samples, SampleFormat};
use highdiv::sampler::{run_instance, verify_sample, RunConfig, SamplerError, StopReason};
use highdiv::smtlib::Problem;

#[derive(Parser)]
#[command(name = "highdiv", version, about = "Diverse solution sampling for QF_LIA formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample distinct models of a formula.
    Sample(SampleArgs),
    /// Report bit coverage of a sample file.
    Coverage(CoverageArgs),
    /// Check every sample of a file against the formula.
    Verify(VerifyArgs),
    /// Sample every .smt2 file of a directory and write CSV and JSON reports.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Jsonl,
    Smt2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OperatorArg {
    /// Boundary-aware move.
    Bam,
    /// Critical move.
    Cm,
}

#[derive(Args, Clone)]
pub struct SamplingOptions {
    /// Number of distinct samples wanted.
    #[arg(short = 'k', long = "samples", default_value_t = 100)]
    samples: usize,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 900.0)]
    time_limit: f64,
    #[arg(long, env = "HIGHDIV_SEED", default_value_t = 0)]
    seed: u64,
    /// Literal-occurrence threshold of the high-frequency subsystem.
    #[arg(long, default_value_t = 50)]
    lambda: usize,
    /// Step limit of one local search.
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    /// Probability of pinning a variable in the next under-approximation.
    #[arg(long, default_value_t = 0.5)]
    fix_prob: f64,
    /// Width that caps unbounded move intervals.
    #[arg(long, default_value_t = 1000)]
    window: u64,
    /// Replace the time limit by this many sampling iterations.
    #[arg(long, value_name = "N")]
    deterministic_budget: Option<u64>,
    #[arg(long, value_enum, default_value_t = OperatorArg::Bam)]
    operator: OperatorArg,
}

impl SamplingOptions {
    pub fn run_config(&self) -> Result<RunConfig, String> {
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            return Err("--time-limit must be a positive number of seconds".into());
        }
        let cfg = RunConfig {
            k: self.samples,
            time_limit: Duration::from_secs_f64(self.time_limit),
            seed: self.seed,
            fix_probability: self.fix_prob,
            search: SearchParams {
                lambda: self.lambda,
                max_steps: self.max_steps,
                window: self.window,
                operator: match self.operator {
                    OperatorArg::Bam => MoveOperator::BoundaryAware,
                    OperatorArg::Cm => MoveOperator::Critical,
                },
                ..SearchParams::default()
            },
            cdcl: CdclLimits::default(),
            iteration_budget: self.deterministic_budget,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SampleArgs {
    /// SMT-LIB2 input file.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    format: FormatArg,
    #[command(flatten)]
    options: SamplingOptions,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// JSON-lines sample file.
    #[arg(long, value_name = "FILE")]
    samples: PathBuf,
    /// Include one entry per tracked node.
    #[arg(long)]
    per_node: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    samples: PathBuf,
}

const EXIT_ERROR: u8 = 1;
const EXIT_UNSAT: u8 = 2;

pub fn load_problem(path: &Path) -> Result<Problem, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Problem::from_smtlib(&text).map_err(|e| format!("{}:{e}", path.display()))
}

fn load_samples(path: &Path, problem: &Problem) -> Result<Vec<highdiv::model::Model>, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_jsonl(BufReader::new(file), &problem.ast).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_sample(args: &SampleArgs) -> Result<ExitCode, String> {
    let problem = load_problem(&args.input)?;
    let cfg = args.options.run_config()?;
    let start = Instant::now();
    let run = match run_instance(&problem, &cfg, 0) {
        Ok(r) => r,
        Err(SamplerError::UnsatFormula) => {
            println!("unsat");
            return Ok(ExitCode::from(EXIT_UNSAT));
        }
        Err(e) => return Err(e.to_string()),
    };
    let format = match args.format {
        FormatArg::Jsonl => SampleFormat::Jsonl,
        FormatArg::Smt2 => SampleFormat::Smt2,
    };
    let written = match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_samples(BufWriter::new(file), &problem.ast, &run.samples, format)
        }
        None => write_samples(io::stdout().lock(), &problem.ast, &run.samples, format),
    };
    written.map_err(|e| e.to_string())?;
    let status = match run.stats.stop {
        StopReason::TargetReached => "complete",
        StopReason::TimeLimit => "timeout",
        StopReason::IterationBudget => "budget",
    };
    eprintln!(
        "{} samples ({status}) in {:.3} s, {} iterations",
        run.samples.len(),
        start.elapsed().as_secs_f64(),
        run.stats.iterations
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_coverage(args: &CoverageArgs) -> Result<ExitCode, String> {
    let problem = load_problem(&args.input)?;
    let samples = load_samples(&args.samples, &problem)?;
    let mut acc = CoverageAccumulator::new(&problem.ast);
    let mut invalid = 0usize;
    for m in &samples {
        if verify_sample(m, &problem.ast) {
            acc.accumulate(&problem.ast, m).map_err(|e| e.to_string())?;
        } else {
            invalid += 1;
        }
    }
    let mut report = serde_json::to_value(acc.report(&problem.ast, args.per_node)).map_err(|e| e.to_string())?;
    report["invalid_samples"] = invalid.into();
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, String> {
    let problem = load_problem(&args.input)?;
    let samples = load_samples(&args.samples, &problem)?;
    let mut invalid = Vec::new();
    for (i, m) in samples.iter().enumerate() {
        if !verify_sample(m, &problem.ast) {
            invalid.push(i + 1);
        }
    }
    let mut out = io::stdout().lock();
    for line in &invalid {
        writeln!(out, "invalid sample on line {line}").map_err(|e| e.to_string())?;
    }
    writeln!(out, "valid: {}, invalid: {}", samples.len() - invalid.len(), invalid.len()).map_err(|e| e.to_string())?;
    Ok(if invalid.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ERROR) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => bench::cmd_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
