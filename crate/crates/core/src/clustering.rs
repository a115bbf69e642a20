//! Centroid clustering as continuous optimization.
//!
//! A candidate solution is the flat concatenation of `k` centers of
//! dimension `d` (cluster-major). Its fitness is the sum over points of the
//! distance to the nearest center, under either squared or plain Euclidean
//! distance.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::feature_bounds;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objective::{Bounds, Objective};
use crate::optimizer::{OptimizerConfig, RunTrace, Search, StarRefiner, Variant};

/// Component tolerance under which k-means treats centers as unchanged.
pub const KMEANS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    SquaredEuclidean,
    #[default]
    Euclidean,
}

impl DistanceMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::SquaredEuclidean => "sq",
            DistanceMetric::Euclidean => "euclid",
        }
    }

    fn distance(self, squared: f64) -> f64 {
        match self {
            DistanceMetric::SquaredEuclidean => squared,
            DistanceMetric::Euclidean => squared.sqrt(),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sq" | "squared" | "sqeuclidean" => Ok(DistanceMetric::SquaredEuclidean),
            "euclid" | "euclidean" => Ok(DistanceMetric::Euclidean),
            _ => Err(Error::Usage(format!(
                "unknown metric `{s}` (expected `sq` or `euclid`)"
            ))),
        }
    }
}

/// `k` centers of dimension `d` stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEncoding {
    flat: Vec<f64>,
    k: usize,
    d: usize,
}

impl ClusterEncoding {
    pub fn new(flat: Vec<f64>, k: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 || k.checked_mul(d) != Some(flat.len()) {
            return Err(Error::invalid(format!(
                "encoding of length {} does not hold {k} centers of dimension {d}",
                flat.len()
            )));
        }
        Ok(Self { flat, k, d })
    }

    pub fn encode(centers: &Matrix) -> Result<Self> {
        Self::new(
            centers.as_slice().to_vec(),
            centers.n_rows(),
            centers.n_cols(),
        )
    }

    pub fn decode(&self) -> Matrix {
        Matrix::new(self.k, self.d, self.flat.clone()).expect("length checked on construction")
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

fn check_shapes(data: &Matrix, centers: &Matrix) -> Result<()> {
    if centers.n_rows() == 0 {
        return Err(Error::invalid("need at least one center"));
    }
    if centers.n_cols() != data.n_cols() {
        return Err(Error::invalid(format!(
            "centers have {} features, data has {}",
            centers.n_cols(),
            data.n_cols()
        )));
    }
    Ok(())
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center (lowest index on ties) and the squared distance to it.
/// `centers` is flat, `d` values per center.
#[inline]
fn nearest(point: &[f64], centers: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(d).enumerate() {
        let dist = sq_dist(point, center);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn cost_flat(data: &Matrix, centers: &[f64], metric: DistanceMetric) -> f64 {
    let d = data.n_cols();
    data.rows()
        .map(|p| metric.distance(nearest(p, centers, d).1))
        .sum()
}

/// Index of the nearest center for every point.
pub fn assign(data: &Matrix, centers: &Matrix) -> Result<Vec<usize>> {
    check_shapes(data, centers)?;
    let d = data.n_cols();
    Ok(data
        .rows()
        .map(|p| nearest(p, centers.as_slice(), d).0)
        .collect())
}

pub fn clustering_cost(data: &Matrix, centers: &Matrix, metric: DistanceMetric) -> Result<f64> {
    check_shapes(data, centers)?;
    Ok(cost_flat(data, centers.as_slice(), metric))
}

/// One Lloyd iteration: assign, then move each center to its cluster mean.
///
/// A center that receives no points is moved onto the point farthest from
/// its own (updated) center. Ties pick the later point; a point is used for
/// at most one relocation.
pub fn lloyd_step(data: &Matrix, centers: &Matrix) -> Result<Matrix> {
    check_shapes(data, centers)?;
    let (k, d) = (centers.n_rows(), centers.n_cols());
    let labels = assign(data, centers)?;

    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (p, &c) in data.rows().zip(&labels) {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut next = centers.clone();
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let n = count as f64;
            for (dst, s) in next.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / n;
            }
        }
    }

    if counts.contains(&0) {
        let mut spread: Vec<f64> = data
            .rows()
            .zip(&labels)
            .map(|(p, &c)| sq_dist(p, next.row(c)))
            .collect();
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let (far, _) = spread
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("data has rows");
            next.row_mut(c).copy_from_slice(data.row(far));
            spread[far] = f64::NEG_INFINITY;
        }
    }
    Ok(next)
}

/// Centers, memberships, and cost of a clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    pub cost: f64,
    pub metric: DistanceMetric,
}

impl ClusterModel {
    pub fn fit(data: &Matrix, centers: Matrix, metric: DistanceMetric) -> Result<Self> {
        let assignments = assign(data, &centers)?;
        let cost = clustering_cost(data, &centers, metric)?;
        Ok(Self {
            centers,
            assignments,
            cost,
            metric,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.n_rows()
    }

    /// Same centers, cost recomputed under `metric`.
    pub fn with_metric(self, data: &Matrix, metric: DistanceMetric) -> Result<Self> {
        Self::fit(data, self.centers, metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Scored under squared Euclidean distance.
    pub model: ClusterModel,
    /// Cost of the initial centers followed by the cost after every step.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Picks `k` distinct data points as starting centers.
pub fn forgy_init<R: Rng + ?Sized>(data: &Matrix, k: usize, rng: &mut R) -> Result<Matrix> {
    if k == 0 || k > data.n_rows() {
        return Err(Error::invalid(format!(
            "cannot pick {k} centers from {} points",
            data.n_rows()
        )));
    }
    let picks = sample(rng, data.n_rows(), k);
    let rows: Vec<&[f64]> = picks.iter().map(|i| data.row(i)).collect();
    Matrix::from_rows(&rows)
}

/// Lloyd's algorithm from `init` until no center component moves more than
/// [`KMEANS_TOLERANCE`] or `max_iter` steps have run.
pub fn kmeans(data: &Matrix, k: usize, init: &Matrix, max_iter: usize) -> Result<KMeansFit> {
    if k == 0 || k > data.n_rows() {
        return Err(Error::invalid(format!(
            "k = {k} needs 1 <= k <= n = {}",
            data.n_rows()
        )));
    }
    if init.n_rows() != k {
        return Err(Error::invalid(format!(
            "{} initial centers for k = {k}",
            init.n_rows()
        )));
    }
    check_shapes(data, init)?;
    let metric = DistanceMetric::SquaredEuclidean;
    let mut centers = init.clone();
    let mut cost_history = vec![cost_flat(data, centers.as_slice(), metric)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = lloyd_step(data, &centers)?;
        iterations += 1;
        let shift = next
            .as_slice()
            .iter()
            .zip(centers.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centers = next;
        cost_history.push(cost_flat(data, centers.as_slice(), metric));
        if shift <= KMEANS_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(KMeansFit {
        model: ClusterModel::fit(data, centers, metric)?,
        cost_history,
        iterations,
        converged,
    })
}

/// Clustering cost over flat encodings, searchable by the optimizers.
pub struct ClusteringObjective<'a> {
    data: &'a Matrix,
    k: usize,
    metric: DistanceMetric,
    bounds: Bounds,
}

impl<'a> ClusteringObjective<'a> {
    /// Search bounds are each feature's data range, repeated for every center.
    pub fn new(data: &'a Matrix, k: usize, metric: DistanceMetric) -> Result<Self> {
        if k == 0 || k > data.n_rows() {
            return Err(Error::invalid(format!(
                "k = {k} needs 1 <= k <= n = {}",
                data.n_rows()
            )));
        }
        let bounds = feature_bounds(data)?.repeat(k)?;
        Ok(Self {
            data,
            k,
            metric,
            bounds,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Objective for ClusteringObjective<'_> {
    fn name(&self) -> String {
        format!("clustering(k={}, {})", self.k, self.metric)
    }

    fn bounds(&self) -> Bounds {
        self.bounds.clone()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.bounds.dim() {
            return Err(Error::invalid(format!(
                "expected an encoding of length {}, got {}",
                self.bounds.dim(),
                x.len()
            )));
        }
        Ok(cost_flat(self.data, x, self.metric))
    }

    fn dim(&self) -> usize {
        self.bounds.dim()
    }
}

/// Applies `steps` Lloyd iterations to an encoded star in place.
pub struct LloydRefiner<'a> {
    data: &'a Matrix,
    k: usize,
    steps: usize,
}

impl<'a> LloydRefiner<'a> {
    pub fn new(data: &'a Matrix, k: usize, steps: usize) -> Self {
        Self { data, k, steps }
    }
}

impl StarRefiner for LloydRefiner<'_> {
    fn refine(&self, star: &mut [f64]) {
        if self.steps == 0 {
            return;
        }
        let mut centers = Matrix::new(self.k, self.data.n_cols(), star.to_vec())
            .expect("star length matches k * d");
        for _ in 0..self.steps {
            centers = lloyd_step(self.data, &centers).expect("shapes checked");
        }
        star.copy_from_slice(centers.as_slice());
    }
}

/// Best model of an optimizer-driven clustering run, with its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    pub model: ClusterModel,
    pub trace: RunTrace,
}

/// Searches the encoding space with `variant`. With `refine_steps > 0`
/// every star gets that many Lloyd steps before it is evaluated (the kMEBB
/// hybrid when combined with [`Variant::MemoryEnriched`]).
pub fn cluster_search(
    data: &Matrix,
    k: usize,
    metric: DistanceMetric,
    config: &OptimizerConfig,
    variant: Variant,
    refine_steps: usize,
) -> Result<ClusterRun> {
    let objective = ClusteringObjective::new(data, k, metric)?;
    let refiner = LloydRefiner::new(data, k, refine_steps);
    let mut search = Search::new(&objective, config, variant)?;
    if refine_steps > 0 {
        search = search.with_refiner(&refiner);
    }
    let trace = search.run()?;
    let centers = Matrix::new(k, data.n_cols(), trace.final_best_point.clone())?;
    let model = ClusterModel::fit(data, centers, metric)?;
    Ok(ClusterRun { model, trace })
}

pub fn cluster_mebbbc(
    data: &Matrix,
    k: usize,
    metric: DistanceMetric,
    config: &OptimizerConfig,
) -> Result<ClusterRun> {
    cluster_search(data, k, metric, config, Variant::MemoryEnriched, 0)
}

pub fn cluster_kmebb(
    data: &Matrix,
    k: usize,
    metric: DistanceMetric,
    config: &OptimizerConfig,
    refine_steps: usize,
) -> Result<ClusterRun> {
    cluster_search(
        data,
        k,
        metric,
        config,
        Variant::MemoryEnriched,
        refine_steps,
    )
}

pub fn cluster_bbbc(
    data: &Matrix,
    k: usize,
    metric: DistanceMetric,
    config: &OptimizerConfig,
) -> Result<ClusterRun> {
    cluster_search(data, k, metric, config, Variant::Classic, 0)
}
