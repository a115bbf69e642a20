//! C ABI for the `bbbc` crate.
//!
//! Every function returns a [`BbbcStatus`]; on failure a description is
//! available from [`bbbc_last_error_message`] on the same thread. Objects are
//! handed out as opaque pointers and must be released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::atomic::{AtomicBool, Ordering};

use bbbc::clustering::{self, ClusterModel, DistanceMetric};
use bbbc::data::{self, ColumnRef, CsvSchema, Dataset};
use bbbc::{
    BenchmarkFunction, BenchmarkKind, Bounds, Error, Matrix, Objective, OptimizerConfig, RunTrace,
    Variant,
};

/// No label column.
pub const BBBC_LABEL_NONE: i64 = -1;
/// The label is the last column.
pub const BBBC_LABEL_LAST: i64 = -2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbbcStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    ParseError = 3,
    FormatError = 4,
    IoError = 5,
    UsageError = 6,
    BufferTooSmall = 7,
    CallbackFailed = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbbcVariant {
    Classic = 0,
    MemoryEnriched = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbbcMetric {
    SquaredEuclidean = 0,
    Euclidean = 1,
}

/// Optimizer settings. Obtain defaults from [`bbbc_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BbbcConfig {
    pub num_stars: usize,
    pub max_iters: usize,
    pub memory_capacity: usize,
    pub alpha0: f64,
    pub alpha_growth: f64,
    pub alpha_cap: f64,
    pub seed: u64,
    pub epsilon_cost: f64,
    pub first_iteration_index: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BbbcTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BbbcRunSummary {
    pub best: f64,
    pub average: f64,
    pub std: f64,
    pub n_runs: usize,
}

/// Cost callback: writes the cost of `x` (length `dim`) to `out_cost` and
/// returns 0, or returns nonzero to abort the run.
pub type BbbcCostFn = Option<
    unsafe extern "C" fn(
        x: *const f64,
        dim: usize,
        user_data: *mut c_void,
        out_cost: *mut f64,
    ) -> c_int,
>;

pub struct BbbcObjective {
    inner: ObjectiveKind,
}

enum ObjectiveKind {
    Benchmark(BenchmarkFunction),
    Callback(CallbackObjective),
}

struct CallbackObjective {
    bounds: Bounds,
    cost: unsafe extern "C" fn(*const f64, usize, *mut c_void, *mut f64) -> c_int,
    user_data: *mut c_void,
    failed: AtomicBool,
}

// Runs evaluate stars one after another on the thread that called
// `bbbc_optimize`, so the callback is never entered concurrently.
unsafe impl Send for CallbackObjective {}
unsafe impl Sync for CallbackObjective {}

impl Objective for CallbackObjective {
    fn name(&self) -> String {
        "callback".into()
    }

    fn bounds(&self) -> Bounds {
        self.bounds.clone()
    }

    fn evaluate(&self, x: &[f64]) -> bbbc::Result<f64> {
        let mut cost = f64::NAN;
        let rc = unsafe { (self.cost)(x.as_ptr(), x.len(), self.user_data, &mut cost) };
        if rc != 0 {
            self.failed.store(true, Ordering::Relaxed);
            return Err(Error::InvalidArgument(format!(
                "cost callback returned {rc}"
            )));
        }
        Ok(cost)
    }
}

impl BbbcObjective {
    fn as_objective(&self) -> &dyn Objective {
        match &self.inner {
            ObjectiveKind::Benchmark(f) => f,
            ObjectiveKind::Callback(c) => c,
        }
    }
}

pub struct BbbcTrace(RunTrace);

pub struct BbbcDataset(Dataset);

pub struct BbbcClusterModel(ClusterModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(BbbcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => BbbcStatus::InvalidArgument,
            Error::Parse { .. } => BbbcStatus::ParseError,
            Error::Format(_) => BbbcStatus::FormatError,
            Error::Usage(_) => BbbcStatus::UsageError,
            Error::Io(_) => BbbcStatus::IoError,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: BbbcStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BbbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BbbcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            BbbcStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(BbbcStatus::NullPointer, format!("{what} is null")))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(BbbcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<T: Copy>(src: &[T], dst: *mut T, len: usize, what: &str) -> Result<(), Failure> {
    if len < src.len() {
        return Err(fail(
            BbbcStatus::BufferTooSmall,
            format!("{what} needs room for {} values, got {len}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(fail(BbbcStatus::NullPointer, format!("{what} is null")));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(
            BbbcStatus::NullPointer,
            "output handle pointer is null",
        ));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(BbbcStatus::NullPointer, "output pointer is null"));
    }
    *out = value;
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(BbbcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BbbcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

impl From<&BbbcConfig> for OptimizerConfig {
    fn from(c: &BbbcConfig) -> Self {
        OptimizerConfig {
            num_stars: c.num_stars,
            max_iters: c.max_iters,
            memory_capacity: c.memory_capacity,
            alpha0: c.alpha0,
            alpha_growth: c.alpha_growth,
            alpha_cap: c.alpha_cap,
            seed: c.seed,
            epsilon_cost: c.epsilon_cost,
            first_iteration_index: c.first_iteration_index,
            early_stop: None,
        }
    }
}

impl From<BbbcVariant> for Variant {
    fn from(v: BbbcVariant) -> Self {
        match v {
            BbbcVariant::Classic => Variant::Classic,
            BbbcVariant::MemoryEnriched => Variant::MemoryEnriched,
        }
    }
}

impl From<BbbcMetric> for DistanceMetric {
    fn from(m: BbbcMetric) -> Self {
        match m {
            BbbcMetric::SquaredEuclidean => DistanceMetric::SquaredEuclidean,
            BbbcMetric::Euclidean => DistanceMetric::Euclidean,
        }
    }
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next `bbbc_*` call on this thread.
#[no_mangle]
pub extern "C" fn bbbc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn bbbc_config_default() -> BbbcConfig {
    let d = OptimizerConfig::default();
    BbbcConfig {
        num_stars: d.num_stars,
        max_iters: d.max_iters,
        memory_capacity: d.memory_capacity,
        alpha0: d.alpha0,
        alpha_growth: d.alpha_growth,
        alpha_cap: d.alpha_cap,
        seed: d.seed,
        epsilon_cost: d.epsilon_cost,
        first_iteration_index: d.first_iteration_index,
    }
}

/// Creates one of the built-in benchmark functions by lowercase name
/// (`sphere`, `rastrigin`, `levy`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bbbc_objective_benchmark(
    name: *const c_char,
    dim: usize,
    out: *mut *mut BbbcObjective,
) -> BbbcStatus {
    guard(|| {
        let kind: BenchmarkKind = c_str(name, "name")?.parse()?;
        let f = BenchmarkFunction::new(kind, dim)?;
        put(
            out,
            BbbcObjective {
                inner: ObjectiveKind::Benchmark(f),
            },
        )
    })
}

/// Wraps a C cost function over the box `[lower, upper]`.
///
/// # Safety
/// `lower` and `upper` must point to `dim` doubles. `cost` is called with
/// `user_data` from the thread running the optimizer for as long as the
/// objective lives.
#[no_mangle]
pub unsafe extern "C" fn bbbc_objective_callback(
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    cost: BbbcCostFn,
    user_data: *mut c_void,
    out: *mut *mut BbbcObjective,
) -> BbbcStatus {
    guard(|| {
        let cost = cost.ok_or_else(|| fail(BbbcStatus::NullPointer, "cost callback is null"))?;
        let bounds = Bounds::new(
            input(lower, dim, "lower")?.to_vec(),
            input(upper, dim, "upper")?.to_vec(),
        )?;
        let inner = ObjectiveKind::Callback(CallbackObjective {
            bounds,
            cost,
            user_data,
            failed: AtomicBool::new(false),
        });
        put(out, BbbcObjective { inner })
    })
}

/// # Safety
/// `objective` must be null or a handle from a `bbbc_objective_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bbbc_objective_free(objective: *mut BbbcObjective) {
    free(objective)
}

/// # Safety
/// `objective` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bbbc_objective_dim(
    objective: *const BbbcObjective,
    out: *mut usize,
) -> BbbcStatus {
    guard(|| write(out, handle(objective, "objective")?.as_objective().dim()))
}

/// Evaluates the objective at `x`.
///
/// # Safety
/// `x` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_objective_evaluate(
    objective: *const BbbcObjective,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> BbbcStatus {
    guard(|| {
        let obj = handle(objective, "objective")?;
        let cost = obj.as_objective().evaluate(input(x, dim, "x")?);
        write(out, callback_result(obj, cost)?)
    })
}

fn callback_result<T>(obj: &BbbcObjective, r: bbbc::Result<T>) -> Result<T, Failure> {
    if let ObjectiveKind::Callback(c) = &obj.inner {
        if c.failed.swap(false, Ordering::Relaxed) {
            return Err(fail(
                BbbcStatus::CallbackFailed,
                r.err()
                    .map_or_else(|| "cost callback failed".into(), |e| e.to_string()),
            ));
        }
    }
    Ok(r?)
}

/// Runs one seeded optimization and returns its trace.
///
/// # Safety
/// `objective` and `config` must be valid pointers; `out` receives a handle
/// to release with [`bbbc_trace_free`].
#[no_mangle]
pub unsafe extern "C" fn bbbc_optimize(
    objective: *const BbbcObjective,
    config: *const BbbcConfig,
    variant: BbbcVariant,
    out: *mut *mut BbbcTrace,
) -> BbbcStatus {
    guard(|| {
        let obj = handle(objective, "objective")?;
        let config = OptimizerConfig::from(handle(config, "config")?);
        let trace = bbbc::optimize(obj.as_objective(), &config, variant.into());
        put(out, BbbcTrace(callback_result(obj, trace)?))
    })
}

/// # Safety
/// `trace` must be null or a handle from [`bbbc_optimize`].
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_free(trace: *mut BbbcTrace) {
    free(trace)
}

/// Number of recorded iterations.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_iterations(
    trace: *const BbbcTrace,
    out: *mut usize,
) -> BbbcStatus {
    guard(|| write(out, handle(trace, "trace")?.0.iterations()))
}

/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_dim(trace: *const BbbcTrace, out: *mut usize) -> BbbcStatus {
    guard(|| write(out, handle(trace, "trace")?.0.final_best_point.len()))
}

/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_best_cost(
    trace: *const BbbcTrace,
    out: *mut f64,
) -> BbbcStatus {
    guard(|| write(out, handle(trace, "trace")?.0.final_best_cost))
}

/// Objective evaluations spent on stars and the starting point.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_evaluations(
    trace: *const BbbcTrace,
    out: *mut u64,
) -> BbbcStatus {
    guard(|| write(out, handle(trace, "trace")?.0.evaluations))
}

/// Copies the best point into `out` (room for `len` doubles).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_best_point(
    trace: *const BbbcTrace,
    out: *mut f64,
    len: usize,
) -> BbbcStatus {
    guard(|| {
        output(
            &handle(trace, "trace")?.0.final_best_point,
            out,
            len,
            "best point buffer",
        )
    })
}

/// Copies the best-so-far cost of every iteration into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_best_costs(
    trace: *const BbbcTrace,
    out: *mut f64,
    len: usize,
) -> BbbcStatus {
    guard(|| {
        output(
            &handle(trace, "trace")?.0.best_cost_per_iter,
            out,
            len,
            "cost buffer",
        )
    })
}

/// Copies the center-of-mass cost of every iteration into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_trace_center_costs(
    trace: *const BbbcTrace,
    out: *mut f64,
    len: usize,
) -> BbbcStatus {
    guard(|| {
        output(
            &handle(trace, "trace")?.0.center_cost_per_iter,
            out,
            len,
            "cost buffer",
        )
    })
}

/// Builds a dataset from `n` row-major points of dimension `d`.
///
/// # Safety
/// `values` must point to `n * d` doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_dataset_from_rows(
    values: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut BbbcDataset,
) -> BbbcStatus {
    guard(|| {
        let len = n
            .checked_mul(d)
            .ok_or_else(|| fail(BbbcStatus::InvalidArgument, "n * d overflows"))?;
        let points = Matrix::new(n, d, input(values, len, "values")?.to_vec())?;
        put(out, BbbcDataset(Dataset::new("dataset", points, None)?))
    })
}

/// Loads a numeric CSV. `label_column` is a zero-based index,
/// [`BBBC_LABEL_NONE`], or [`BBBC_LABEL_LAST`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bbbc_dataset_load_csv(
    path: *const c_char,
    label_column: i64,
    delimiter: c_char,
    has_header: bool,
    out: *mut *mut BbbcDataset,
) -> BbbcStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let label_column = match label_column {
            BBBC_LABEL_NONE => None,
            BBBC_LABEL_LAST => CsvSchema::label_last().label_column,
            i if i >= 0 => Some(ColumnRef::Index(i as usize)),
            i => {
                return Err(fail(
                    BbbcStatus::InvalidArgument,
                    format!("bad label column {i}"),
                ))
            }
        };
        let schema = CsvSchema {
            label_column,
            delimiter: delimiter as u8,
            has_header,
            ..CsvSchema::default()
        };
        put(out, BbbcDataset(data::load_csv(path, &schema)?))
    })
}

/// # Safety
/// `dataset` must be null or a handle from a `bbbc_dataset_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bbbc_dataset_free(dataset: *mut BbbcDataset) {
    free(dataset)
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bbbc_dataset_shape(
    dataset: *const BbbcDataset,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> BbbcStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.0;
        write(out_rows, ds.n())?;
        write(out_cols, ds.d())
    })
}

/// Searches for `k` centers. `refine_steps > 0` applies that many Lloyd
/// steps to every star before it is evaluated.
///
/// # Safety
/// `dataset` and `config` must be valid; `out` receives a handle to release
/// with [`bbbc_model_free`].
#[no_mangle]
pub unsafe extern "C" fn bbbc_cluster(
    dataset: *const BbbcDataset,
    k: usize,
    metric: BbbcMetric,
    config: *const BbbcConfig,
    variant: BbbcVariant,
    refine_steps: usize,
    out: *mut *mut BbbcClusterModel,
) -> BbbcStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.0;
        let config = OptimizerConfig::from(handle(config, "config")?);
        let run = clustering::cluster_search(
            &ds.points,
            k,
            metric.into(),
            &config,
            variant.into(),
            refine_steps,
        )?;
        put(out, BbbcClusterModel(run.model))
    })
}

/// # Safety
/// `model` must be null or a handle from [`bbbc_cluster`].
#[no_mangle]
pub unsafe extern "C" fn bbbc_model_free(model: *mut BbbcClusterModel) {
    free(model)
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bbbc_model_cost(
    model: *const BbbcClusterModel,
    out: *mut f64,
) -> BbbcStatus {
    guard(|| write(out, handle(model, "model")?.0.cost))
}

/// Number of centers and their dimension.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bbbc_model_shape(
    model: *const BbbcClusterModel,
    out_k: *mut usize,
    out_dim: *mut usize,
) -> BbbcStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        write(out_k, m.centers.n_rows())?;
        write(out_dim, m.centers.n_cols())
    })
}

/// Copies the `k * dim` row-major centers into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_model_centers(
    model: *const BbbcClusterModel,
    out: *mut f64,
    len: usize,
) -> BbbcStatus {
    guard(|| {
        output(
            handle(model, "model")?.0.centers.as_slice(),
            out,
            len,
            "center buffer",
        )
    })
}

/// Copies the cluster index of every data point into `out`.
///
/// # Safety
/// `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn bbbc_model_assignments(
    model: *const BbbcClusterModel,
    out: *mut usize,
    len: usize,
) -> BbbcStatus {
    guard(|| {
        output(
            &handle(model, "model")?.0.assignments,
            out,
            len,
            "assignment buffer",
        )
    })
}

/// # Safety
/// `costs` must point to `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bbbc_summarize(
    costs: *const f64,
    n: usize,
    out: *mut BbbcRunSummary,
) -> BbbcStatus {
    guard(|| {
        let s = bbbc::summarize(input(costs, n, "costs")?)?;
        write(
            out,
            BbbcRunSummary {
                best: s.best,
                average: s.average,
                std: s.std,
                n_runs: s.n_runs,
            },
        )
    })
}

/// Welch's unequal-variance t-test with a two-sided p-value.
///
/// # Safety
/// `a` and `b` must point to `n_a` and `n_b` doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_welch_t_test(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut BbbcTestResult,
) -> BbbcStatus {
    guard(|| {
        let r = bbbc::welch_t_test(input(a, n_a, "a")?, input(b, n_b, "b")?)?;
        write(
            out,
            BbbcTestResult {
                statistic: r.statistic,
                p_value: r.p_value,
                df: r.df,
            },
        )
    })
}

/// Friedman test over a row-major `blocks x treatments` score table.
///
/// # Safety
/// `scores` must point to `blocks * treatments` doubles.
#[no_mangle]
pub unsafe extern "C" fn bbbc_friedman_test(
    scores: *const f64,
    blocks: usize,
    treatments: usize,
    out: *mut BbbcTestResult,
) -> BbbcStatus {
    guard(|| {
        let len = blocks
            .checked_mul(treatments)
            .ok_or_else(|| fail(BbbcStatus::InvalidArgument, "blocks * treatments overflows"))?;
        let flat = input(scores, len, "scores")?;
        let table: Vec<Vec<f64>> = if treatments == 0 {
            vec![Vec::new(); blocks]
        } else {
            flat.chunks(treatments).map(<[f64]>::to_vec).collect()
        };
        let r = bbbc::friedman_test(&table)?;
        write(
            out,
            BbbcTestResult {
                statistic: r.statistic,
                p_value: r.p_value,
                df: r.df,
            },
        )
    })
}
