//! Multi-run summaries and the two significance tests used to compare
//! optimizers: Friedman's rank test and Welch's unequal-variance t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best: f64,
    pub average: f64,
    /// Sample standard deviation (n - 1 denominator), 0 for a single run.
    pub std: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], mean: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::invalid(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

pub fn summarize(costs: &[f64]) -> Result<RunSummary> {
    if costs.is_empty() {
        return Err(Error::invalid("cannot summarize an empty sample"));
    }
    check_finite(costs, "costs")?;
    let average = mean(costs);
    Ok(RunSummary {
        best: costs.iter().copied().fold(f64::INFINITY, f64::min),
        average,
        std: sample_variance(costs, average).sqrt(),
        n_runs: costs.len(),
    })
}

/// Ranks of `values` starting at 1, with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let shared = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Chi-square upper tail probability.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64> {
    let dist = ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sf(x).clamp(0.0, 1.0))
}

/// Two-sided Student t tail probability `P(|T| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Friedman test on a `b x t` table: each inner vector is one block holding
/// one score per treatment. Degrees of freedom are `t - 1`.
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<TestResult> {
    let b = scores.len();
    if b < 2 {
        return Err(Error::invalid(format!(
            "Friedman test needs at least 2 blocks, got {b}"
        )));
    }
    let t = scores[0].len();
    if t < 2 {
        return Err(Error::invalid(format!(
            "Friedman test needs at least 2 treatments, got {t}"
        )));
    }
    let mut rank_sums = vec![0.0; t];
    for (i, block) in scores.iter().enumerate() {
        if block.len() != t {
            return Err(Error::invalid(format!(
                "block {i} has {} treatments, expected {t}",
                block.len()
            )));
        }
        check_finite(block, "score")?;
        for (sum, r) in rank_sums.iter_mut().zip(average_ranks(block)) {
            *sum += r;
        }
    }
    let (bf, tf) = (b as f64, t as f64);
    let mid = (tf + 1.0) / 2.0;
    let spread: f64 = rank_sums.iter().map(|s| (s / bf - mid).powi(2)).sum();
    let statistic = 12.0 * bf / (tf * (tf + 1.0)) * spread;
    let df = tf - 1.0;
    Ok(TestResult {
        statistic,
        p_value: chi_square_sf(statistic, df)?,
        df,
    })
}

/// Welch's two-sample t-test with Welch-Satterthwaite degrees of freedom and
/// a two-sided p-value.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(
            "Welch t-test needs at least 2 observations per sample",
        ));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (ma, mb) = (mean(a), mean(b));
    let va = sample_variance(a, ma) / a.len() as f64;
    let vb = sample_variance(b, mb) / b.len() as f64;
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(Error::invalid(
            "Welch t-test is undefined when both samples have zero variance",
        ));
    }
    let statistic = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(TestResult {
        statistic,
        p_value: student_t_two_sided(statistic, df)?,
        df,
    })
}
