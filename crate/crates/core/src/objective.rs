//! Bounded cost functions and the benchmark suite.
//!
//! Every objective here is minimized. The benchmark functions are total over
//! the reals, so evaluating outside the search range is allowed; keeping
//! candidates inside [`Bounds`] is the optimizer's job.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension box constraints of a search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("bounds need at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "lower has {} dimensions but upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::invalid(format!(
                    "dimension {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same `[lower, upper]` interval replicated `dim` times.
    pub fn uniform(lower: f64, upper: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn clamp(&self, j: usize, value: f64) -> f64 {
        value.clamp(self.lower[j], self.upper[j])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Concatenates `self` with itself `times` times.
    pub fn repeat(&self, times: usize) -> Result<Self> {
        Self::new(self.lower.repeat(times), self.upper.repeat(times))
    }
}

/// A cost function over a bounded real vector space.
pub trait Objective: Sync {
    fn name(&self) -> String;

    fn bounds(&self) -> Bounds;

    /// Cost of `x`. Implementations reject vectors whose length differs from
    /// `self.bounds().dim()`.
    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }
}

type Evaluator = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An objective assembled from a closure and explicit bounds.
pub struct ObjectiveSpec {
    name: String,
    bounds: Bounds,
    evaluator: Box<Evaluator>,
}

impl ObjectiveSpec {
    pub fn new<F>(name: impl Into<String>, bounds: Bounds, evaluator: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            bounds,
            evaluator: Box::new(evaluator),
        }
    }
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl Objective for ObjectiveSpec {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn bounds(&self) -> Bounds {
        self.bounds.clone()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(x.len(), self.bounds.dim())?;
        Ok((self.evaluator)(x))
    }
}

fn check_dim(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(format!(
            "expected a {want}-dimensional point, got {got}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Rastrigin,
    Step,
    Sphere,
    Rosenbrock,
    Zakharov,
    Levy,
    DixonPrice,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 7] = [
        BenchmarkKind::Rastrigin,
        BenchmarkKind::Step,
        BenchmarkKind::Sphere,
        BenchmarkKind::Rosenbrock,
        BenchmarkKind::Zakharov,
        BenchmarkKind::Levy,
        BenchmarkKind::DixonPrice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkKind::Rastrigin => "rastrigin",
            BenchmarkKind::Step => "step",
            BenchmarkKind::Sphere => "sphere",
            BenchmarkKind::Rosenbrock => "rosenbrock",
            BenchmarkKind::Zakharov => "zakharov",
            BenchmarkKind::Levy => "levy",
            BenchmarkKind::DixonPrice => "dixonprice",
        }
    }

    /// The search range shared by every dimension.
    pub fn range(self) -> (f64, f64) {
        match self {
            BenchmarkKind::Rastrigin => (-5.12, 5.12),
            BenchmarkKind::Step | BenchmarkKind::Sphere => (-100.0, 100.0),
            BenchmarkKind::Rosenbrock => (-30.0, 30.0),
            BenchmarkKind::Zakharov => (-5.0, 10.0),
            BenchmarkKind::Levy => (-15.0, 30.0),
            BenchmarkKind::DixonPrice => (-10.0, 10.0),
        }
    }

    fn min_dimension(self) -> usize {
        match self {
            BenchmarkKind::Rosenbrock | BenchmarkKind::DixonPrice => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lowered = s.trim().to_ascii_lowercase();
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.as_str() == lowered)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown benchmark function `{s}` (expected one of: {})",
                    BenchmarkKind::ALL.map(BenchmarkKind::as_str).join(", ")
                ))
            })
    }
}

/// One of the seven benchmark functions at a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BenchmarkFunction {
    kind: BenchmarkKind,
    dimension: usize,
}

impl BenchmarkFunction {
    pub fn new(kind: BenchmarkKind, dimension: usize) -> Result<Self> {
        if dimension < kind.min_dimension() {
            return Err(Error::invalid(format!(
                "{kind} needs dimension >= {}, got {dimension}",
                kind.min_dimension()
            )));
        }
        Ok(Self { kind, dimension })
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds_of(&self) -> Bounds {
        let (lo, hi) = self.kind.range();
        Bounds::uniform(lo, hi, self.dimension).expect("benchmark ranges are valid")
    }

    /// Analytic minimizer and its value (always 0).
    pub fn known_minimum(&self) -> (Vec<f64>, f64) {
        let point = match self.kind {
            BenchmarkKind::Rastrigin
            | BenchmarkKind::Step
            | BenchmarkKind::Sphere
            | BenchmarkKind::Zakharov => vec![0.0; self.dimension],
            BenchmarkKind::Rosenbrock | BenchmarkKind::Levy => vec![1.0; self.dimension],
            // x_i = 2^(-(2^i - 2) / 2^i) = 2^(2^(1-i) - 1), i one-based
            BenchmarkKind::DixonPrice => (1..=self.dimension as i32)
                .map(|i| 2f64.powf(2f64.powi(1 - i) - 1.0))
                .collect(),
        };
        (point, 0.0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(x.len(), self.dimension)?;
        Ok(match self.kind {
            BenchmarkKind::Rastrigin => rastrigin(x),
            BenchmarkKind::Step => step(x),
            BenchmarkKind::Sphere => sphere(x),
            BenchmarkKind::Rosenbrock => rosenbrock(x),
            BenchmarkKind::Zakharov => zakharov(x),
            BenchmarkKind::Levy => levy(x),
            BenchmarkKind::DixonPrice => dixon_price(x),
        })
    }
}

impl Objective for BenchmarkFunction {
    fn name(&self) -> String {
        self.kind.as_str().to_string()
    }

    fn bounds(&self) -> Bounds {
        self.bounds_of()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        BenchmarkFunction::evaluate(self, x)
    }

    fn dim(&self) -> usize {
        self.dimension
    }
}

fn rastrigin(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0)
        .sum()
}

// De Jong's step: the bracket is floor(x + 0.5).
fn step(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| {
            let s = (v + 0.5).floor();
            s * s
        })
        .sum()
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|&v| v * v).sum()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let a = w[1] - w[0] * w[0];
            let b = w[0] - 1.0;
            100.0 * a * a + b * b
        })
        .sum()
}

fn zakharov(x: &[f64]) -> f64 {
    let squares: f64 = x.iter().map(|&v| v * v).sum();
    let weighted: f64 = x
        .iter()
        .enumerate()
        .map(|(i, &v)| 0.5 * (i + 1) as f64 * v)
        .sum();
    let w2 = weighted * weighted;
    squares + w2 + w2 * w2
}

fn levy(x: &[f64]) -> f64 {
    let w = |v: f64| 1.0 + (v - 1.0) / 4.0;
    let n = x.len();
    let first = (PI * w(x[0])).sin().powi(2);
    let middle: f64 = x[..n - 1]
        .iter()
        .map(|&v| {
            let wi = w(v);
            (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2))
        })
        .sum();
    let wn = w(x[n - 1]);
    let last = (wn - 1.0).powi(2) * (1.0 + (2.0 * PI * wn).sin().powi(2));
    first + middle + last
}

fn dixon_price(x: &[f64]) -> f64 {
    let head = (x[0] - 1.0).powi(2);
    let tail: f64 = x
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let t = 2.0 * w[1] * w[1] - w[0];
            (i + 2) as f64 * t * t
        })
        .sum();
    head + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(kind: BenchmarkKind, dim: usize) -> BenchmarkFunction {
        BenchmarkFunction::new(kind, dim).unwrap()
    }

    #[test]
    fn table_values() {
        assert_eq!(
            f(BenchmarkKind::Sphere, 3).evaluate(&[0.0; 3]).unwrap(),
            0.0
        );
        for dim in [1, 7, 50] {
            let x = vec![0.0; dim];
            assert_eq!(f(BenchmarkKind::Rastrigin, dim).evaluate(&x).unwrap(), 0.0);
        }
        assert_eq!(
            f(BenchmarkKind::Rosenbrock, 2)
                .evaluate(&[1.0, 1.0])
                .unwrap(),
            0.0
        );
        assert_eq!(
            f(BenchmarkKind::Step, 2).evaluate(&[0.4, -0.3]).unwrap(),
            0.0
        );
        assert!(f(BenchmarkKind::Levy, 5).evaluate(&[1.0; 5]).unwrap() < 1e-30);
    }

    #[test]
    fn hand_evaluated_points() {
        // floor(1.6)^2 + floor(-1.5)^2 = 1 + 4
        assert_eq!(
            f(BenchmarkKind::Step, 2).evaluate(&[1.1, -2.0]).unwrap(),
            5.0
        );
        // 1 + 1 + (0.5 + 1)^2 + (0.5 + 1)^4
        let z = f(BenchmarkKind::Zakharov, 2).evaluate(&[1.0, 1.0]).unwrap();
        assert!((z - (2.0 + 2.25 + 5.0625)).abs() < 1e-12);
        // (0 - 1)^2 + 2 * (0 - 0)^2
        assert_eq!(
            f(BenchmarkKind::DixonPrice, 2)
                .evaluate(&[0.0, 0.0])
                .unwrap(),
            1.0
        );
        // 100 * (0 - 0)^2 + (0 - 1)^2
        assert_eq!(
            f(BenchmarkKind::Rosenbrock, 2)
                .evaluate(&[0.0, 0.0])
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn ranges() {
        let b = f(BenchmarkKind::Rastrigin, 2).bounds_of();
        assert_eq!(b.lower(), &[-5.12, -5.12]);
        assert_eq!(b.upper(), &[5.12, 5.12]);
        let b = f(BenchmarkKind::Zakharov, 3).bounds_of();
        assert_eq!(b.lower(), &[-5.0; 3]);
        assert_eq!(b.upper(), &[10.0; 3]);
        let b = f(BenchmarkKind::Sphere, 1).bounds_of();
        assert_eq!((b.lower(), b.upper()), (&[-100.0][..], &[100.0][..]));
    }

    #[test]
    fn known_minima_attain_zero() {
        let dp = f(BenchmarkKind::DixonPrice, 2).known_minimum().0;
        assert_eq!(dp[0], 1.0);
        assert!((dp[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            f(BenchmarkKind::Rosenbrock, 4).known_minimum().0,
            vec![1.0; 4]
        );

        for kind in BenchmarkKind::ALL {
            for dim in [2, 10, 50] {
                let func = f(kind, dim);
                let (point, value) = func.known_minimum();
                assert_eq!(value, 0.0);
                let cost = func.evaluate(&point).unwrap();
                assert!(cost <= 1e-12, "{kind} dim {dim}: {cost}");
            }
        }
        let rosen = f(BenchmarkKind::Rosenbrock, 10);
        assert_eq!(rosen.evaluate(&rosen.known_minimum().0).unwrap(), 0.0);
    }

    #[test]
    fn nonnegative_and_finite_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in BenchmarkKind::ALL {
            for dim in [2, 50] {
                let func = f(kind, dim);
                let b = func.bounds_of();
                for _ in 0..1000 {
                    let x: Vec<f64> = (0..dim)
                        .map(|j| rng.random_range(b.lower()[j]..=b.upper()[j]))
                        .collect();
                    let c = func.evaluate(&x).unwrap();
                    assert!(c.is_finite() && c >= 0.0, "{kind}: {c}");
                    assert_eq!(c.to_bits(), func.evaluate(&x).unwrap().to_bits());
                }
            }
        }
    }

    #[test]
    fn dimension_checks() {
        assert!(matches!(
            f(BenchmarkKind::Sphere, 3).evaluate(&[0.0; 2]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(BenchmarkFunction::new(BenchmarkKind::Rosenbrock, 1).is_err());
        assert!(BenchmarkFunction::new(BenchmarkKind::DixonPrice, 1).is_err());
        assert!(BenchmarkFunction::new(BenchmarkKind::Levy, 1).is_ok());
    }

    #[test]
    fn names_round_trip() {
        for kind in BenchmarkKind::ALL {
            assert_eq!(kind.as_str().parse::<BenchmarkKind>().unwrap(), kind);
        }
        assert_eq!(
            "DixonPrice".parse::<BenchmarkKind>().unwrap(),
            BenchmarkKind::DixonPrice
        );
        assert!(matches!(
            "ackley".parse::<BenchmarkKind>(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![], vec![]).is_err());
        assert!(Bounds::new(vec![0.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![f64::NEG_INFINITY], vec![0.0]).is_err());
        let b = Bounds::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!(b.contains(&[0.0, 2.0]));
        assert!(!b.contains(&[0.0, 2.1]));
        assert_eq!(b.clamp(1, 5.0), 2.0);
        assert_eq!(b.repeat(2).unwrap().lower(), &[-1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn closure_objective() {
        let spec = ObjectiveSpec::new("sum", Bounds::uniform(-1.0, 1.0, 2).unwrap(), |x| {
            x.iter().sum::<f64>().abs()
        });
        assert_eq!(spec.evaluate(&[0.25, 0.5]).unwrap(), 0.75);
        assert!(spec.evaluate(&[0.0]).is_err());
        assert_eq!(spec.name(), "sum");
    }
}
