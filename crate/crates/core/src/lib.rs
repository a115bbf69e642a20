//! Big Bang-Big Crunch (BB-BC) optimization, its memory-enriched variant
//! (ME-BB-BC), centroid clustering built on top of them, and the statistics
//! used to compare multi-run experiments.

pub mod clustering;
pub mod data;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod objective;
pub mod optimizer;
pub mod stats;

pub use clustering::{ClusterModel, ClusterRun, DistanceMetric};
pub use data::{CsvSchema, Dataset};
pub use error::{Error, Result};
pub use experiment::{Algorithm, ExperimentPlan, ExperimentReport, Mode, ResultRecord, Target};
pub use matrix::Matrix;
pub use objective::{BenchmarkFunction, BenchmarkKind, Bounds, Objective, ObjectiveSpec};
pub use optimizer::{
    optimize, optimize_bbbc, optimize_mebbbc, OptimizerConfig, RunTrace, Search, SolutionMemory,
    Variant,
};
pub use stats::{friedman_test, summarize, welch_t_test, RunSummary, TestResult};
