//! Seeded multi-run experiments: the batch runner behind the command-line
//! harness, its CSV/JSON outputs, and the checks that re-read them.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusterModel, DistanceMetric};
use crate::data::{self, CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::objective::{BenchmarkFunction, BenchmarkKind, Objective};
use crate::optimizer::{optimize, OptimizerConfig, RunTrace, Variant};
use crate::stats::{self, RunSummary, TestResult};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const PLAN_FILE: &str = "plan.json";
pub const BEST_MODEL_FILE: &str = "best_model.csv";
pub const SIGNIFICANCE_FILE: &str = "significance.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bbbc,
    Mebbbc,
    Kmebb,
    Kmeans,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bbbc => "bbbc",
            Algorithm::Mebbbc => "mebbbc",
            Algorithm::Kmebb => "kmebb",
            Algorithm::Kmeans => "kmeans",
        }
    }

    pub fn clustering_only(self) -> bool {
        matches!(self, Algorithm::Kmebb | Algorithm::Kmeans)
    }

    /// Parses a comma-separated list, rejecting duplicates.
    pub fn parse_list(s: &str) -> Result<Vec<Algorithm>> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let alg: Algorithm = name.parse()?;
            if out.contains(&alg) {
                return Err(Error::Usage(format!("algorithm `{name}` listed twice")));
            }
            out.push(alg);
        }
        if out.is_empty() {
            return Err(Error::Usage("no algorithms given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bbbc" => Ok(Algorithm::Bbbc),
            "mebbbc" => Ok(Algorithm::Mebbbc),
            "kmebb" => Ok(Algorithm::Kmebb),
            "kmeans" => Ok(Algorithm::Kmeans),
            _ => Err(Error::Usage(format!(
                "unknown algorithm `{s}` (expected bbbc, mebbbc, kmebb or kmeans)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bench,
    Cluster,
}

#[derive(Debug, Clone)]
pub enum Target {
    Benchmark(BenchmarkFunction),
    Dataset { data: Dataset, k: usize },
}

impl Target {
    /// Identifier used in result tables and output subdirectories.
    pub fn id(&self) -> String {
        match self {
            Target::Benchmark(f) => f.kind().as_str().to_string(),
            Target::Dataset { data, .. } => data.name.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub mode: Mode,
    pub algorithms: Vec<Algorithm>,
    pub targets: Vec<Target>,
    pub runs: usize,
    /// Shared optimizer settings; `config.seed` is the base seed and run `i`
    /// uses `base + i`.
    pub config: OptimizerConfig,
    pub metric: DistanceMetric,
    /// Lloyd steps applied to every star by `kmebb`.
    pub refine_steps: usize,
    pub output_dir: PathBuf,
    pub json: bool,
}

impl ExperimentPlan {
    pub fn bench(
        kinds: &[BenchmarkKind],
        dim: usize,
        output_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        let targets = kinds
            .iter()
            .map(|&k| BenchmarkFunction::new(k, dim).map(Target::Benchmark))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: Mode::Bench,
            algorithms: vec![Algorithm::Bbbc, Algorithm::Mebbbc],
            targets,
            runs: 50,
            config: OptimizerConfig::default(),
            metric: DistanceMetric::default(),
            refine_steps: 1,
            output_dir: output_dir.into(),
            json: false,
        })
    }

    pub fn cluster(datasets: Vec<Dataset>, k: usize, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            mode: Mode::Cluster,
            algorithms: vec![Algorithm::Mebbbc, Algorithm::Kmebb, Algorithm::Kmeans],
            targets: datasets
                .into_iter()
                .map(|data| Target::Dataset { data, k })
                .collect(),
            runs: 50,
            config: OptimizerConfig::default(),
            metric: DistanceMetric::default(),
            refine_steps: 1,
            output_dir: output_dir.into(),
            json: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Usage("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Usage("no algorithms given".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Usage("no targets given".into()));
        }
        let mut ids: Vec<String> = self.targets.iter().map(Target::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Usage(format!("target `{}` listed twice", w[0])));
        }
        for target in &self.targets {
            match (self.mode, target) {
                (Mode::Bench, Target::Benchmark(_)) => {}
                (Mode::Cluster, Target::Dataset { data, k }) => {
                    if *k < 1 || *k > data.n() {
                        return Err(Error::Usage(format!(
                            "k = {k} is invalid for `{}` with {} points",
                            data.name,
                            data.n()
                        )));
                    }
                }
                _ => return Err(Error::Usage("target does not match the plan mode".into())),
            }
        }
        if self.mode == Mode::Bench {
            if let Some(a) = self.algorithms.iter().find(|a| a.clustering_only()) {
                return Err(Error::Usage(format!(
                    "`{a}` is only available in cluster mode"
                )));
            }
        }
        self.config.validate().map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Usage(msg),
            other => other,
        })
    }

    fn to_json(&self) -> serde_json::Value {
        let targets: Vec<serde_json::Value> = self
            .targets
            .iter()
            .map(|t| match t {
                Target::Benchmark(f) => serde_json::json!({
                    "id": t.id(),
                    "function": f.kind(),
                    "dim": f.dim(),
                }),
                Target::Dataset { data, k } => serde_json::json!({
                    "id": t.id(),
                    "n": data.n(),
                    "d": data.d(),
                    "k": k,
                }),
            })
            .collect();
        serde_json::json!({
            "mode": self.mode,
            "algorithms": self.algorithms,
            "targets": targets,
            "runs": self.runs,
            "config": self.config,
            "metric": self.metric.as_str(),
            "refine_steps": self.refine_steps,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub algorithm: Algorithm,
    pub target: String,
    pub run_index: usize,
    pub seed: u64,
    pub final_cost: f64,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub target: String,
    #[serde(flatten)]
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: ResultRecord,
    /// Absent for k-means, which has no big bang trace.
    pub trace: Option<RunTrace>,
    pub model: Option<ClusterModel>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub outcomes: Vec<RunOutcome>,
    pub summaries: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn records(&self) -> impl Iterator<Item = &ResultRecord> {
        self.outcomes.iter().map(|o| &o.record)
    }

    pub fn costs(&self, algorithm: Algorithm, target: &str) -> Vec<f64> {
        self.records()
            .filter(|r| r.algorithm == algorithm && r.target == target)
            .map(|r| r.final_cost)
            .collect()
    }

    pub fn summary(&self, algorithm: Algorithm, target: &str) -> Option<&RunSummary> {
        self.summaries
            .iter()
            .find(|s| s.algorithm == algorithm && s.target == target)
            .map(|s| &s.summary)
    }
}

fn run_one(
    plan: &ExperimentPlan,
    algorithm: Algorithm,
    target: &Target,
    run_index: usize,
) -> Result<RunOutcome> {
    let seed = plan.config.seed.wrapping_add(run_index as u64);
    let config = plan.config.clone().with_seed(seed);
    let start = Instant::now();
    let (trace, model) = match (target, algorithm) {
        (Target::Benchmark(f), Algorithm::Bbbc) => {
            (Some(optimize(f, &config, Variant::Classic)?), None)
        }
        (Target::Benchmark(f), Algorithm::Mebbbc) => {
            (Some(optimize(f, &config, Variant::MemoryEnriched)?), None)
        }
        (Target::Benchmark(_), a) => {
            return Err(Error::Usage(format!(
                "`{a}` is only available in cluster mode"
            )))
        }
        (Target::Dataset { data, k }, Algorithm::Kmeans) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = clustering::forgy_init(&data.points, *k, &mut rng)?;
            let fit = clustering::kmeans(&data.points, *k, &init, config.max_iters)?;
            (
                None,
                Some(fit.model.with_metric(&data.points, plan.metric)?),
            )
        }
        (Target::Dataset { data, k }, a) => {
            let (variant, refine) = match a {
                Algorithm::Bbbc => (Variant::Classic, 0),
                Algorithm::Kmebb => (Variant::MemoryEnriched, plan.refine_steps),
                _ => (Variant::MemoryEnriched, 0),
            };
            let run = clustering::cluster_search(
                &data.points,
                *k,
                plan.metric,
                &config,
                variant,
                refine,
            )?;
            (Some(run.trace), Some(run.model))
        }
    };
    let final_cost = match (&model, &trace) {
        (Some(m), _) => m.cost,
        (None, Some(t)) => t.final_best_cost,
        (None, None) => unreachable!("every algorithm yields a trace or a model"),
    };
    if !final_cost.is_finite() {
        return Err(Error::invalid(format!(
            "{algorithm} on `{}` run {run_index} produced a non-finite cost",
            target.id()
        )));
    }
    Ok(RunOutcome {
        record: ResultRecord {
            algorithm,
            target: target.id(),
            run_index,
            seed,
            final_cost,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        trace,
        model,
    })
}

/// Runs every (target, algorithm, run) triple of `plan` on the current rayon
/// pool. Outcomes come back ordered by target, then algorithm in plan order,
/// then run index, independent of scheduling.
pub fn execute(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let jobs: Vec<(&Target, Algorithm, usize)> = plan
        .targets
        .iter()
        .flat_map(|t| {
            plan.algorithms
                .iter()
                .flat_map(move |&a| (0..plan.runs).map(move |i| (t, a, i)))
        })
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(t, a, i)| run_one(plan, a, t, i))
        .collect::<Result<Vec<_>>>()?;
    let summaries = summarize_records(outcomes.iter().map(|o| &o.record))?;
    Ok(ExperimentReport {
        outcomes,
        summaries,
    })
}

/// One summary per (algorithm, target) group, in first-appearance order.
pub fn summarize_records<'a>(
    records: impl IntoIterator<Item = &'a ResultRecord>,
) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<((Algorithm, String), Vec<f64>)> = Vec::new();
    for r in records {
        match groups
            .iter_mut()
            .find(|(key, _)| key.0 == r.algorithm && key.1 == r.target)
        {
            Some((_, costs)) => costs.push(r.final_cost),
            None => groups.push(((r.algorithm, r.target.clone()), vec![r.final_cost])),
        }
    }
    groups
        .into_iter()
        .map(|((algorithm, target), costs)| {
            Ok(SummaryRow {
                algorithm,
                target,
                summary: stats::summarize(&costs)?,
            })
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn trace_path(
    output_dir: &Path,
    target: &str,
    algorithm: Algorithm,
    run_index: usize,
) -> PathBuf {
    output_dir
        .join(target)
        .join(format!("trace_{algorithm}_{run_index}.csv"))
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "best_so_far", "center_of_mass_cost"])?;
    for (i, (best, center)) in trace
        .best_cost_per_iter
        .iter()
        .zip(&trace.center_cost_per_iter)
        .enumerate()
    {
        w.serialize((i + 1, best, center))?;
    }
    w.flush()?;
    Ok(())
}

fn write_best_models(
    path: &Path,
    plan: &ExperimentPlan,
    outcomes: &[&RunOutcome],
    data: &Dataset,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["algorithm", "run_index", "record", "index", "cluster"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..data.d()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for &alg in &plan.algorithms {
        let best = outcomes
            .iter()
            .filter(|o| o.record.algorithm == alg && o.model.is_some())
            .min_by(|a, b| a.record.final_cost.total_cmp(&b.record.final_cost));
        let Some(best) = best else { continue };
        let model = best.model.as_ref().expect("filtered on model presence");
        let run = best.record.run_index.to_string();
        for (c, center) in model.centers.rows().enumerate() {
            let mut row = vec![
                alg.to_string(),
                run.clone(),
                "center".into(),
                c.to_string(),
                c.to_string(),
            ];
            row.extend(center.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        for (n, (point, cluster)) in data.points.rows().zip(&model.assignments).enumerate() {
            let mut row = vec![
                alg.to_string(),
                run.clone(),
                "point".into(),
                n.to_string(),
                cluster.to_string(),
            ];
            row.extend(point.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every output file of `report` under `plan.output_dir`. Result and
/// summary tables are byte-identical across reruns; wall-clock timings go to
/// a separate file.
pub fn write_report(plan: &ExperimentPlan, report: &ExperimentReport) -> Result<()> {
    let out = &plan.output_dir;
    fs::create_dir_all(out)?;
    write_json(&out.join(PLAN_FILE), &plan.to_json())?;

    let mut w = csv_writer(&out.join(RESULTS_FILE))?;
    for r in report.records() {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join(TIMINGS_FILE))?;
    w.write_record(["algorithm", "target", "run_index", "wall_time_ms"])?;
    for r in report.records() {
        w.serialize((r.algorithm, &r.target, r.run_index, r.wall_time_ms))?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join(SUMMARY_FILE))?;
    w.write_record(["algorithm", "target", "best", "average", "std", "n_runs"])?;
    for s in &report.summaries {
        let m = &s.summary;
        w.serialize((s.algorithm, &s.target, m.best, m.average, m.std, m.n_runs))?;
    }
    w.flush()?;

    for target in &plan.targets {
        let id = target.id();
        fs::create_dir_all(out.join(&id))?;
        let outcomes: Vec<&RunOutcome> = report
            .outcomes
            .iter()
            .filter(|o| o.record.target == id)
            .collect();
        for o in &outcomes {
            if let Some(trace) = &o.trace {
                write_trace(
                    &trace_path(out, &id, o.record.algorithm, o.record.run_index),
                    trace,
                )?;
            }
        }
        if let Target::Dataset { data, .. } = target {
            write_best_models(&out.join(&id).join(BEST_MODEL_FILE), plan, &outcomes, data)?;
        }
    }

    if plan.json {
        let records: Vec<&ResultRecord> = report.records().collect();
        write_json(&out.join("results.json"), &records)?;
        write_json(&out.join("summary.json"), &report.summaries)?;
    }
    Ok(())
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let report = execute(plan)?;
    write_report(plan, &report)?;
    Ok(report)
}

/// Loads a `results.csv`; a directory argument means the file inside it.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push(RESULTS_FILE);
    }
    let mut reader = csv::Reader::from_reader(fs::File::open(&path)?);
    let mut records = Vec::new();
    for row in reader.deserialize() {
        let record: ResultRecord = row?;
        if !record.final_cost.is_finite() {
            return Err(Error::Format(format!(
                "{}: non-finite final_cost for {} on `{}` run {}",
                path.display(),
                record.algorithm,
                record.target,
                record.run_index
            )));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Format(format!(
            "{} has no result rows",
            path.display()
        )));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub test: String,
    pub target: String,
    pub n_a: usize,
    pub n_b: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub df: Option<f64>,
    pub note: String,
}

impl SignificanceRow {
    fn from_result(
        test: &str,
        target: &str,
        n_a: usize,
        n_b: usize,
        r: Result<TestResult>,
    ) -> Self {
        let (statistic, p_value, df, note) = match r {
            Ok(t) => (
                Some(t.statistic),
                Some(t.p_value),
                Some(t.df),
                String::new(),
            ),
            Err(e) => (None, None, None, format!("skipped: {e}")),
        };
        Self {
            test: test.into(),
            target: target.into(),
            n_a,
            n_b,
            statistic,
            p_value,
            df,
            note,
        }
    }
}

/// Picks the costs of one algorithm out of a result table, per target.
/// `algorithm` may be omitted when the table holds a single algorithm.
fn costs_by_target(
    records: &[ResultRecord],
    algorithm: Option<Algorithm>,
    which: &str,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let algorithm = match algorithm {
        Some(a) => a,
        None => {
            let mut algs: Vec<Algorithm> = records.iter().map(|r| r.algorithm).collect();
            algs.sort();
            algs.dedup();
            match algs.as_slice() {
                [a] => *a,
                _ => {
                    return Err(Error::Usage(format!(
                        "results {which} hold several algorithms; choose one with --alg-{which}"
                    )))
                }
            }
        }
    };
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.algorithm == algorithm) {
        out.entry(r.target.clone()).or_default().push(r.final_cost);
    }
    if out.is_empty() {
        return Err(Error::Usage(format!(
            "results {which} have no rows for `{algorithm}`"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<SignificanceRow>,
    /// Human-readable notices, such as a skipped Friedman test.
    pub notices: Vec<String>,
}

/// Welch t-test per shared target plus a Friedman test with targets as
/// blocks and the two result sets as treatments (scored by mean cost).
pub fn compare(
    a: &[ResultRecord],
    b: &[ResultRecord],
    alg_a: Option<Algorithm>,
    alg_b: Option<Algorithm>,
) -> Result<Comparison> {
    let ca = costs_by_target(a, alg_a, "a")?;
    let cb = costs_by_target(b, alg_b, "b")?;
    let shared: Vec<&String> = ca.keys().filter(|t| cb.contains_key(*t)).collect();
    if shared.is_empty() {
        return Err(Error::Usage("the two result sets share no target".into()));
    }
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    for t in &shared {
        let (xa, xb) = (&ca[*t], &cb[*t]);
        rows.push(SignificanceRow::from_result(
            "welch",
            t,
            xa.len(),
            xb.len(),
            stats::welch_t_test(xa, xb),
        ));
    }
    if shared.len() < 2 {
        notices.push(format!(
            "friedman test skipped: needs at least 2 shared targets, found {}",
            shared.len()
        ));
    } else {
        let blocks: Vec<Vec<f64>> = shared
            .iter()
            .map(|t| {
                let m = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
                vec![m(&ca[*t]), m(&cb[*t])]
            })
            .collect();
        let n_a = shared.iter().map(|t| ca[*t].len()).sum();
        let n_b = shared.iter().map(|t| cb[*t].len()).sum();
        rows.push(SignificanceRow::from_result(
            "friedman",
            "*",
            n_a,
            n_b,
            stats::friedman_test(&blocks),
        ));
    }
    for r in rows.iter().filter(|r| !r.note.is_empty()) {
        notices.push(format!("{} on `{}` {}", r.test, r.target, r.note));
    }
    Ok(Comparison { rows, notices })
}

pub fn write_comparison(dir: &Path, comparison: &Comparison, json: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join(SIGNIFICANCE_FILE))?;
    for row in &comparison.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    if json {
        write_json(&dir.join("significance.json"), &comparison.rows)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Verification {
    pub summaries_checked: usize,
    pub traces_checked: usize,
    pub problems: Vec<String>,
}

impl Verification {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Deserialize)]
struct SummaryLine {
    algorithm: Algorithm,
    target: String,
    best: f64,
    average: f64,
    std: f64,
    n_runs: usize,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Re-derives `summary.csv` from `results.csv` and checks every trace file:
/// exactly `max_iters` rows (at most, when early stopping was enabled) and a
/// non-increasing best-so-far column.
pub fn verify(dir: impl AsRef<Path>) -> Result<Verification> {
    let dir = dir.as_ref();
    let mut v = Verification::default();
    let records = read_results(dir)?;
    let expected = summarize_records(&records)?;

    let mut reader = csv::Reader::from_reader(fs::File::open(dir.join(SUMMARY_FILE))?);
    let mut seen = Vec::new();
    for line in reader.deserialize() {
        let line: SummaryLine = line?;
        v.summaries_checked += 1;
        let key = format!("{} on `{}`", line.algorithm, line.target);
        match expected
            .iter()
            .find(|e| e.algorithm == line.algorithm && e.target == line.target)
        {
            None => v
                .problems
                .push(format!("summary row for {key} has no results")),
            Some(e) => {
                let s = &e.summary;
                if !(same(s.best, line.best)
                    && same(s.average, line.average)
                    && same(s.std, line.std))
                    || s.n_runs != line.n_runs
                {
                    v.problems
                        .push(format!("summary row for {key} does not match results"));
                }
            }
        }
        seen.push((line.algorithm, line.target));
    }
    for e in &expected {
        if !seen
            .iter()
            .any(|(a, t)| *a == e.algorithm && *t == e.target)
        {
            v.problems.push(format!(
                "no summary row for {} on `{}`",
                e.algorithm, e.target
            ));
        }
    }

    let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(PLAN_FILE))?)?;
    let config: OptimizerConfig = serde_json::from_value(plan["config"].clone())?;
    for r in records.iter().filter(|r| r.algorithm != Algorithm::Kmeans) {
        let path = trace_path(dir, &r.target, r.algorithm, r.run_index);
        let label = path.display().to_string();
        let mut reader = match fs::File::open(&path) {
            Ok(f) => csv::Reader::from_reader(f),
            Err(_) => {
                v.problems.push(format!("missing trace {label}"));
                continue;
            }
        };
        v.traces_checked += 1;
        let mut rows = 0;
        let mut prev = f64::INFINITY;
        let mut last = f64::NAN;
        for row in reader.deserialize() {
            let (_, best, _): (usize, f64, f64) = row?;
            if best > prev {
                v.problems.push(format!(
                    "{label}: best_so_far increases at row {}",
                    rows + 1
                ));
            }
            prev = best;
            last = best;
            rows += 1;
        }
        let rows_ok = match config.early_stop {
            None => rows == config.max_iters,
            Some(_) => rows >= 1 && rows <= config.max_iters,
        };
        if !rows_ok {
            v.problems.push(format!(
                "{label}: {rows} rows, expected {}",
                config.max_iters
            ));
        }
        if rows > 0 && !same(last, r.final_cost) {
            v.problems
                .push(format!("{label}: final best_so_far differs from results"));
        }
    }
    Ok(v)
}

/// Loads each dataset path with `schema`.
pub fn load_datasets(paths: &[PathBuf], schema: &CsvSchema) -> Result<Vec<Dataset>> {
    paths
        .iter()
        .map(|p| {
            data::load_csv(p, schema).map_err(|e| match e {
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("{}: {io}", p.display()),
                )),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn small_bench(dir: &Path) -> ExperimentPlan {
        let mut plan =
            ExperimentPlan::bench(&[BenchmarkKind::Sphere, BenchmarkKind::Rastrigin], 5, dir)
                .unwrap();
        plan.runs = 3;
        plan.config.max_iters = 10;
        plan.config.num_stars = 20;
        plan
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            Algorithm::Bbbc,
            Algorithm::Mebbbc,
            Algorithm::Kmebb,
            Algorithm::Kmeans,
        ] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("gwo".parse::<Algorithm>(), Err(Error::Usage(_))));
        assert_eq!(
            Algorithm::parse_list("bbbc, mebbbc").unwrap(),
            vec![Algorithm::Bbbc, Algorithm::Mebbbc]
        );
        assert!(Algorithm::parse_list("bbbc,bbbc").is_err());
        assert!(Algorithm::parse_list(" , ").is_err());
    }

    #[test]
    fn plan_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = small_bench(dir.path());
        assert!(plan.validate().is_ok());
        plan.algorithms.push(Algorithm::Kmeans);
        assert!(matches!(plan.validate(), Err(Error::Usage(_))));
        plan.algorithms.pop();
        plan.runs = 0;
        assert!(matches!(plan.validate(), Err(Error::Usage(_))));
        plan.runs = 1;
        plan.config.num_stars = 1;
        assert!(matches!(plan.validate(), Err(Error::Usage(_))));
    }

    #[test]
    fn records_are_ordered_and_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = small_bench(dir.path());
        plan.config.seed = 40;
        let report = execute(&plan).unwrap();
        let keys: Vec<(String, Algorithm, usize, u64)> = report
            .records()
            .map(|r| (r.target.clone(), r.algorithm, r.run_index, r.seed))
            .collect();
        assert_eq!(keys.len(), 12);
        assert_eq!(keys[0], ("sphere".into(), Algorithm::Bbbc, 0, 40));
        assert_eq!(keys[5], ("sphere".into(), Algorithm::Mebbbc, 2, 42));
        assert_eq!(keys[6], ("rastrigin".into(), Algorithm::Bbbc, 0, 40));
        assert_eq!(report.summaries.len(), 4);
    }

    #[test]
    fn single_run_gives_one_row_per_algorithm() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = small_bench(dir.path());
        plan.targets.truncate(1);
        plan.runs = 1;
        let report = run_experiment(&plan).unwrap();
        assert_eq!(report.outcomes.len(), 2);
        let text = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(
            text.lines().next().unwrap(),
            "algorithm,target,run_index,seed,final_cost"
        );
    }

    #[test]
    fn outputs_verify_and_are_reproducible() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let mut p1 = small_bench(d1.path());
        p1.json = true;
        let mut p2 = p1.clone();
        p2.output_dir = d2.path().to_path_buf();
        run_experiment(&p1).unwrap();
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&p2))
            .unwrap();
        for f in [RESULTS_FILE, SUMMARY_FILE, "sphere/trace_mebbbc_2.csv"] {
            assert_eq!(
                fs::read(d1.path().join(f)).unwrap(),
                fs::read(d2.path().join(f)).unwrap(),
                "{f} differs"
            );
        }
        assert!(d1.path().join("results.json").exists());
        let v = verify(d1.path()).unwrap();
        assert!(v.is_ok(), "{:?}", v.problems);
        assert_eq!(v.summaries_checked, 4);
        assert_eq!(v.traces_checked, 12);
    }

    #[test]
    fn verify_flags_tampered_summary() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&small_bench(dir.path())).unwrap();
        let path = dir.path().join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
        cells[3] = "12345.5".into();
        lines[1] = cells.join(",");
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let v = verify(dir.path()).unwrap();
        assert_eq!(v.problems.len(), 1, "{:?}", v.problems);
    }

    fn blobs_plan(dir: &Path, algorithms: Vec<Algorithm>) -> ExperimentPlan {
        let centers = Matrix::from_rows(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]).unwrap();
        let data = data::synthetic_blobs(&centers, 20, 1e-6, 3).unwrap();
        let mut plan = ExperimentPlan::cluster(vec![data], 3, dir);
        plan.algorithms = algorithms;
        plan.runs = 3;
        plan.config.max_iters = 30;
        plan.config.num_stars = 40;
        plan
    }

    #[test]
    fn separable_blobs_are_recovered() {
        let dir = tempfile::tempdir().unwrap();
        let plan = blobs_plan(dir.path(), vec![Algorithm::Kmebb, Algorithm::Kmeans]);
        let report = run_experiment(&plan).unwrap();
        assert!(report.summary(Algorithm::Kmebb, "blobs").unwrap().best < 1e-3);
        let model = fs::read_to_string(dir.path().join("blobs").join(BEST_MODEL_FILE)).unwrap();
        let mut lines = model.lines();
        assert_eq!(
            lines.next().unwrap(),
            "algorithm,run_index,record,index,cluster,f0,f1"
        );
        // 3 centers and 60 points per algorithm.
        assert_eq!(lines.count(), 2 * 63);
        assert!(!dir.path().join("blobs").join("trace_kmeans_0.csv").exists());
        assert!(verify(dir.path()).unwrap().is_ok());
    }

    #[test]
    fn kmebb_without_refinement_matches_mebbbc() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = blobs_plan(dir.path(), vec![Algorithm::Mebbbc, Algorithm::Kmebb]);
        plan.refine_steps = 0;
        let report = execute(&plan).unwrap();
        assert_eq!(
            report.summary(Algorithm::Mebbbc, "blobs"),
            report.summary(Algorithm::Kmebb, "blobs")
        );
    }

    #[test]
    fn compare_same_file_gives_zero_statistics() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = small_bench(dir.path());
        plan.algorithms = vec![Algorithm::Mebbbc];
        run_experiment(&plan).unwrap();
        let records = read_results(dir.path()).unwrap();
        let c = compare(&records, &records, None, None).unwrap();
        assert_eq!(c.rows.len(), 3);
        for row in &c.rows[..2] {
            assert_eq!(row.statistic, Some(0.0));
            assert!((row.p_value.unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(c.rows[2].test, "friedman");
        assert!(c.notices.is_empty());
    }

    #[test]
    fn compare_single_target_skips_friedman() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = small_bench(dir.path());
        plan.targets.truncate(1);
        let report = execute(&plan).unwrap();
        let records: Vec<ResultRecord> = report.records().cloned().collect();
        assert!(matches!(
            compare(&records, &records, None, None),
            Err(Error::Usage(_))
        ));
        let c = compare(
            &records,
            &records,
            Some(Algorithm::Bbbc),
            Some(Algorithm::Mebbbc),
        )
        .unwrap();
        assert_eq!(c.rows.len(), 1);
        assert!(c.notices[0].contains("friedman test skipped"));
    }

    #[test]
    fn compare_rejects_disjoint_targets() {
        let rec = |target: &str| ResultRecord {
            algorithm: Algorithm::Bbbc,
            target: target.into(),
            run_index: 0,
            seed: 0,
            final_cost: 1.0,
            wall_time_ms: 0.0,
        };
        assert!(matches!(
            compare(&[rec("sphere")], &[rec("levy")], None, None),
            Err(Error::Usage(_))
        ));
    }
}
