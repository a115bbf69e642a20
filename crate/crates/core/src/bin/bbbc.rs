use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bbbc::data::{self, ColumnRef, CsvSchema};
use bbbc::experiment::{self, Algorithm, ExperimentPlan};
use bbbc::optimizer::EarlyStop;
use bbbc::{BenchmarkKind, Error, Matrix, OptimizerConfig, Result};

#[derive(Parser)]
#[command(
    name = "bbbc",
    version,
    about = "Seeded BB-BC / ME-BB-BC experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run optimizers on benchmark functions.
    Bench(BenchArgs),
    /// Cluster one or more CSV datasets.
    Cluster(ClusterArgs),
    /// Welch and Friedman tests between two result tables.
    Compare(CompareArgs),
    /// Recompute summaries and check traces of an output directory.
    Verify { dir: PathBuf },
    /// Write a synthetic Gaussian-blob dataset.
    Blobs(BlobArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated subset of bbbc, mebbbc, kmebb, kmeans.
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 200)]
    stars: usize,
    /// Solution memory capacity.
    #[arg(long, default_value_t = 10)]
    memory: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha_growth: f64,
    /// Base seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Stop a run once best-so-far improves by less than this for `patience` iterations.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write JSON copies of the result tables.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated function names, or `all`.
    #[arg(long, default_value = "sphere")]
    function: String,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ClusterArgs {
    /// CSV file; repeat or comma-separate for several datasets.
    #[arg(long, required = true, value_delimiter = ',')]
    dataset: Vec<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "euclid")]
    metric: String,
    /// Lloyd steps per star for kmebb.
    #[arg(long, default_value_t = 1)]
    refine_steps: usize,
    /// Label column: `last`, `none`, a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    label_column: String,
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
    /// Zero-based columns to ignore, such as record IDs.
    #[arg(long, value_delimiter = ',')]
    skip_columns: Vec<usize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// First results.csv (or the directory holding it).
    a: PathBuf,
    /// Second results.csv (or the directory holding it).
    b: PathBuf,
    #[arg(long)]
    alg_a: Option<String>,
    #[arg(long)]
    alg_b: Option<String>,
    /// Directory for significance.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BlobArgs {
    /// Blob centers as `x,y;x,y;...`.
    #[arg(long)]
    centers: String,
    #[arg(long, default_value_t = 50)]
    per_blob: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_functions(list: &str) -> Result<Vec<BenchmarkKind>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(BenchmarkKind::ALL.to_vec());
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_delimiter(s: &str) -> Result<u8> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(usage(format!(
            "delimiter must be a single ASCII character, got `{s}`"
        ))),
    }
}

fn parse_label_column(s: &str) -> Option<ColumnRef> {
    match s {
        "none" => None,
        "last" => CsvSchema::label_last().label_column,
        _ => Some(
            s.parse::<usize>()
                .map_or_else(|_| ColumnRef::from(s), ColumnRef::from),
        ),
    }
}

fn parse_centers(s: &str) -> Result<Matrix> {
    let rows = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| usage(format!("bad center value `{v}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(usage("centers must be non-empty rows of equal length"));
    }
    Matrix::from_rows(&rows)
}

fn apply_run_args(plan: &mut ExperimentPlan, run: &RunArgs) -> Result<()> {
    if let Some(list) = &run.algorithms {
        plan.algorithms = Algorithm::parse_list(list)?;
    }
    plan.runs = run.runs;
    plan.config = OptimizerConfig {
        num_stars: run.stars,
        max_iters: run.iters,
        memory_capacity: run.memory,
        alpha0: run.alpha0,
        alpha_growth: run.alpha_growth,
        seed: run.seed,
        early_stop: run.tol.map(|tol| EarlyStop {
            tol,
            patience: run.patience,
        }),
        ..OptimizerConfig::default()
    };
    plan.output_dir = run.out.clone();
    plan.json = run.json;
    Ok(())
}

fn run_plan(plan: &ExperimentPlan, jobs: usize) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| experiment::run_experiment(plan))?;
    println!("algorithm,target,best,average,std,n_runs");
    for s in &report.summaries {
        let m = &s.summary;
        println!(
            "{},{},{},{},{},{}",
            s.algorithm, s.target, m.best, m.average, m.std, m.n_runs
        );
    }
    eprintln!("wrote {}", plan.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(args) => {
            let mut plan = ExperimentPlan::bench(&parse_functions(&args.function)?, args.dim, ".")
                .map_err(|e| match e {
                    Error::InvalidArgument(m) => Error::Usage(m),
                    e => e,
                })?;
            apply_run_args(&mut plan, &args.run)?;
            run_plan(&plan, args.run.jobs)
        }
        Command::Cluster(args) => {
            let schema = CsvSchema {
                label_column: parse_label_column(&args.label_column),
                delimiter: parse_delimiter(&args.delimiter)?,
                has_header: args.header,
                skip_columns: args.skip_columns.iter().copied().collect::<BTreeSet<_>>(),
            };
            let datasets = experiment::load_datasets(&args.dataset, &schema)?;
            let mut plan = ExperimentPlan::cluster(datasets, args.k, ".");
            plan.metric = args.metric.parse()?;
            plan.refine_steps = args.refine_steps;
            apply_run_args(&mut plan, &args.run)?;
            run_plan(&plan, args.run.jobs)
        }
        Command::Compare(args) => {
            let parse_alg =
                |s: &Option<String>| s.as_deref().map(str::parse::<Algorithm>).transpose();
            let a = experiment::read_results(&args.a)?;
            let b = experiment::read_results(&args.b)?;
            let comparison =
                experiment::compare(&a, &b, parse_alg(&args.alg_a)?, parse_alg(&args.alg_b)?)?;
            experiment::write_comparison(&args.out, &comparison, args.json)?;
            println!("test,target,statistic,p_value,df");
            let show = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
            for r in &comparison.rows {
                println!(
                    "{},{},{},{},{}",
                    r.test,
                    r.target,
                    show(r.statistic),
                    show(r.p_value),
                    show(r.df)
                );
            }
            for notice in &comparison.notices {
                eprintln!("note: {notice}");
            }
            Ok(())
        }
        Command::Verify { dir } => {
            let v = experiment::verify(&dir)?;
            for p in &v.problems {
                eprintln!("{p}");
            }
            if v.is_ok() {
                println!(
                    "ok: {} summary rows, {} traces",
                    v.summaries_checked, v.traces_checked
                );
                Ok(())
            } else {
                Err(Error::Format(format!(
                    "{} problems in {}",
                    v.problems.len(),
                    dir.display()
                )))
            }
        }
        Command::Blobs(args) => {
            let centers = parse_centers(&args.centers)?;
            let blobs = data::synthetic_blobs(&centers, args.per_blob, args.spread, args.seed)
                .map_err(|e| match e {
                    Error::InvalidArgument(m) => Error::Usage(m),
                    e => e,
                })?;
            blobs.write_csv(&args.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
