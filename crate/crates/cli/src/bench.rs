use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use clap::Args;
use highdiv::coverage::coverage_of;
use highdiv::sampler::{run_instance, RunConfig, SamplerError, StopReason};
use serde::Serialize;

use crate::{load_problem, SamplingOptions};

#[derive(Args)]
pub struct BenchArgs {
    /// Directory scanned (non-recursively) for .smt2 files.
    #[arg(long, value_name = "DIR")]
    dir: PathBuf,
    /// Report path prefix; `.csv` and `.json` are appended.
    #[arg(long, value_name = "PREFIX")]
    out: PathBuf,
    /// Instances sampled concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    options: SamplingOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub file: String,
    pub samples: usize,
    pub coverage: f64,
    pub seconds: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub mean_samples: f64,
    pub mean_coverage: f64,
    pub mean_seconds: f64,
}

impl BenchReport {
    fn new(rows: Vec<BenchRow>) -> Self {
        let n = rows.len().max(1) as f64;
        BenchReport {
            mean_samples: rows.iter().map(|r| r.samples as f64).sum::<f64>() / n,
            mean_coverage: rows.iter().map(|r| r.coverage).sum::<f64>() / n,
            mean_seconds: rows.iter().map(|r| r.seconds).sum::<f64>() / n,
            rows,
        }
    }
}

fn bench_one(path: &Path, cfg: &RunConfig) -> BenchRow {
    let start = Instant::now();
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let (samples, coverage, status) = match load_problem(path) {
        Err(e) => (0, 0.0, format!("error: {e}")),
        Ok(problem) => match run_instance(&problem, cfg, 0) {
            Ok(run) => {
                let status = match run.stats.stop {
                    StopReason::TargetReached => "complete",
                    StopReason::TimeLimit => "timeout",
                    StopReason::IterationBudget => "budget",
                };
                match coverage_of(&problem.ast, &run.samples) {
                    Ok(c) => (run.samples.len(), c, status.to_string()),
                    Err(e) => (run.samples.len(), 0.0, format!("error: {e}")),
                }
            }
            Err(SamplerError::UnsatFormula) => (0, 0.0, "unsat".to_string()),
            Err(e) => (0, 0.0, format!("error: {e}")),
        },
    };
    BenchRow { file, samples, coverage, seconds: start.elapsed().as_secs_f64(), status }
}

fn smt2_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "smt2"))
        .collect();
    files.sort();
    Ok(files)
}

/// Rows in file order regardless of which worker finished first.
pub fn run_bench(files: &[PathBuf], cfg: &RunConfig, jobs: usize) -> Vec<BenchRow> {
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; files.len()]);
    thread::scope(|s| {
        for _ in 0..jobs.clamp(1, files.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = files.get(i) else { break };
                let row = bench_one(path, cfg);
                rows.lock().expect("bench rows poisoned")[i] = Some(row);
            });
        }
    });
    rows.into_inner().expect("bench rows poisoned").into_iter().map(|r| r.expect("every file benchmarked")).collect()
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<ExitCode, String> {
    let cfg = args.options.run_config()?;
    let files = smt2_files(&args.dir)?;
    let report = BenchReport::new(run_bench(&files, &cfg, args.jobs));

    let csv_path = with_extension(&args.out, "csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| format!("{}: {e}", csv_path.display()))?;
    for row in &report.rows {
        w.serialize(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;

    let json_path = with_extension(&args.out, "json");
    let file = File::create(&json_path).map_err(|e| format!("{}: {e}", json_path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &report).map_err(|e| e.to_string())?;

    eprintln!(
        "{} instances, mean coverage {:.4}, mean samples {:.1}",
        report.rows.len(),
        report.mean_coverage,
        report.mean_samples
    );
    Ok(ExitCode::SUCCESS)
}
