//! Big Bang-Big Crunch search and its memory-enriched variant.
//!
//! One iteration ("cycle") of either algorithm:
//!
//! 1. **Big bang**: scatter `num_stars` candidates around the current center.
//!    Each component is `center + r * (upper - lower) / (1 + k)` with
//!    `r ~ N(0, 1)` and `k` the iteration index, clamped to the bounds. The
//!    memory-enriched variant instead copies a component from a random memory
//!    entry with probability `alpha`.
//! 2. **Evaluate** every star.
//! 3. **Big crunch**: contract the stars into their inverse-cost weighted
//!    center of mass, which becomes the next center.
//! 4. Memory-enriched only: offer the center of mass to the fixed-capacity
//!    [`SolutionMemory`] and grow `alpha` geometrically.
//!
//! Runs are deterministic for a given [`OptimizerConfig`]: all randomness
//! comes from one ChaCha8 stream seeded with `config.seed`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Bounds, Objective};

/// Stop once best-so-far has improved by less than `tol` over the last
/// `patience` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub tol: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Candidates generated per big bang.
    pub num_stars: usize,
    pub max_iters: usize,
    pub memory_capacity: usize,
    /// Initial memory selection rate.
    pub alpha0: f64,
    /// Relative increase of alpha per iteration.
    pub alpha_growth: f64,
    pub alpha_cap: f64,
    pub seed: u64,
    /// Costs at or below this value short-circuit the center of mass.
    pub epsilon_cost: f64,
    /// Value of `k` on the first big bang.
    pub first_iteration_index: usize,
    pub early_stop: Option<EarlyStop>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            num_stars: 200,
            max_iters: 100,
            memory_capacity: 10,
            alpha0: 0.1,
            alpha_growth: 0.01,
            alpha_cap: 1.0,
            seed: 0,
            epsilon_cost: 1e-12,
            first_iteration_index: 1,
            early_stop: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_stars < 2 {
            return Err(Error::invalid("num_stars must be at least 2"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.memory_capacity < 1 {
            return Err(Error::invalid("memory_capacity must be at least 1"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::invalid(format!(
                "alpha0 must lie in (0, 1), got {}",
                self.alpha0
            )));
        }
        if !(self.alpha_cap >= self.alpha0 && self.alpha_cap <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha_cap must lie in [alpha0, 1], got {}",
                self.alpha_cap
            )));
        }
        if !(self.alpha_growth >= 0.0 && self.alpha_growth.is_finite()) {
            return Err(Error::invalid("alpha_growth must be a nonnegative real"));
        }
        if !(self.epsilon_cost > 0.0 && self.epsilon_cost.is_finite()) {
            return Err(Error::invalid("epsilon_cost must be a small positive real"));
        }
        if self.first_iteration_index < 1 {
            return Err(Error::invalid("first_iteration_index must be at least 1"));
        }
        if let Some(stop) = self.early_stop {
            if stop.patience < 1 || stop.tol.is_nan() || stop.tol < 0.0 {
                return Err(Error::invalid(
                    "early stop needs patience >= 1 and tol >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Plain BB-BC.
    Classic,
    /// BB-BC with a solution memory and growing selection rate.
    MemoryEnriched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub point: Vec<f64>,
    pub cost: f64,
}

/// Outcome of [`SolutionMemory::insert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Insertion {
    Appended,
    Replaced { index: usize, evicted_cost: f64 },
    Rejected,
}

/// Fixed-capacity archive of (point, cost) pairs. Once full, a newcomer
/// replaces the highest-cost entry only if it is strictly cheaper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionMemory {
    capacity: usize,
    entries: Vec<MemoryEntry>,
}

impl SolutionMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("memory capacity must be at least 1"));
        }
        Ok(Self {
            capacity,
            entries: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    /// Index of the highest-cost entry; ties go to the lowest index.
    pub fn worst_index(&self) -> Option<usize> {
        let mut worst: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if worst.is_none_or(|(_, c)| e.cost > c) {
                worst = Some((i, e.cost));
            }
        }
        worst.map(|(i, _)| i)
    }

    pub fn max_cost(&self) -> Option<f64> {
        self.worst_index().map(|i| self.entries[i].cost)
    }

    pub fn min_cost(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.cost).reduce(f64::min)
    }

    pub fn insert(&mut self, point: Vec<f64>, cost: f64) -> Result<Insertion> {
        if cost.is_nan() {
            return Err(Error::invalid("memory entries need a comparable cost"));
        }
        if let Some(first) = self.entries.first() {
            if first.point.len() != point.len() {
                return Err(Error::invalid(format!(
                    "memory holds {}-dimensional points, got {}",
                    first.point.len(),
                    point.len()
                )));
            }
        }
        if !self.is_full() {
            self.entries.push(MemoryEntry { point, cost });
            return Ok(Insertion::Appended);
        }
        let index = self.worst_index().expect("full memory is non-empty");
        let evicted_cost = self.entries[index].cost;
        if cost < evicted_cost {
            self.entries[index] = MemoryEntry { point, cost };
            Ok(Insertion::Replaced {
                index,
                evicted_cost,
            })
        } else {
            Ok(Insertion::Rejected)
        }
    }
}

/// One big-bang component: `center + r * (upper - lower) / (1 + k)`,
/// clamped to `[lower, upper]`.
pub fn bang_component(center: f64, lower: f64, upper: f64, k: usize, r: f64) -> f64 {
    (center + r * (upper - lower) / (1.0 + k as f64)).clamp(lower, upper)
}

fn check_center(center: &[f64], bounds: &Bounds) -> Result<()> {
    if center.len() != bounds.dim() {
        return Err(Error::invalid(format!(
            "center has {} dimensions, bounds have {}",
            center.len(),
            bounds.dim()
        )));
    }
    Ok(())
}

/// Classic big bang. Draws exactly one standard normal per component, star
/// by star.
pub fn big_bang_classic<R: Rng + ?Sized>(
    center: &[f64],
    bounds: &Bounds,
    k: usize,
    rng: &mut R,
    num_stars: usize,
) -> Result<Vec<Vec<f64>>> {
    check_center(center, bounds)?;
    let (lower, upper) = (bounds.lower(), bounds.upper());
    Ok((0..num_stars)
        .map(|_| {
            (0..center.len())
                .map(|j| {
                    let r: f64 = rng.sample(StandardNormal);
                    bang_component(center[j], lower[j], upper[j], k, r)
                })
                .collect()
        })
        .collect())
}

/// Memory-enriched big bang.
///
/// Per component: draw `u ~ U[0, 1)`; if `u < alpha`, copy that component
/// from a uniformly chosen memory entry (index drawn per component),
/// otherwise fall back to the classic rule. With an empty memory or
/// `alpha <= 0` no uniforms are drawn and the output equals
/// [`big_bang_classic`] for the same RNG state.
pub fn big_bang_memory<R: Rng + ?Sized>(
    center: &[f64],
    memory: &SolutionMemory,
    alpha: f64,
    bounds: &Bounds,
    k: usize,
    rng: &mut R,
    num_stars: usize,
) -> Result<Vec<Vec<f64>>> {
    if memory.is_empty() || alpha <= 0.0 {
        return big_bang_classic(center, bounds, k, rng, num_stars);
    }
    check_center(center, bounds)?;
    if let Some(e) = memory.entries().first() {
        if e.point.len() != center.len() {
            return Err(Error::invalid("memory dimension differs from the center"));
        }
    }
    let entries = memory.entries();
    let (lower, upper) = (bounds.lower(), bounds.upper());
    Ok((0..num_stars)
        .map(|_| {
            (0..center.len())
                .map(|j| {
                    let u: f64 = rng.random();
                    if u < alpha {
                        let idx = rng.random_range(0..entries.len());
                        entries[idx].point[j]
                    } else {
                        let r: f64 = rng.sample(StandardNormal);
                        bang_component(center[j], lower[j], upper[j], k, r)
                    }
                })
                .collect()
        })
        .collect())
}

/// Inverse-cost weighted center of mass.
///
/// If any cost is at or below `epsilon_cost` the lowest-cost point is
/// returned as-is. Otherwise weights are `min_cost / cost_i` (a rescaling of
/// `1 / cost_i` that avoids overflow) and each output component is kept in
/// the population's hull.
pub fn center_of_mass<P: AsRef<[f64]>>(
    population: &[P],
    costs: &[f64],
    epsilon_cost: f64,
) -> Result<Vec<f64>> {
    let first = population
        .first()
        .ok_or_else(|| Error::invalid("center of mass of an empty population"))?;
    if costs.len() != population.len() {
        return Err(Error::invalid(format!(
            "{} points but {} costs",
            population.len(),
            costs.len()
        )));
    }
    let dim = first.as_ref().len();
    if population.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::invalid("population points differ in dimension"));
    }
    if costs.iter().any(|c| c.is_nan()) {
        return Err(Error::invalid("cost is NaN"));
    }

    let (argmin, min_cost) =
        costs
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bc), (i, c)| {
                    if c < bc {
                        (i, c)
                    } else {
                        (bi, bc)
                    }
                },
            );
    if min_cost <= epsilon_cost {
        return Ok(population[argmin].as_ref().to_vec());
    }
    if !min_cost.is_finite() {
        return Err(Error::invalid("no finite cost in population"));
    }

    let mut numer = vec![0.0; dim];
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut denom = 0.0;
    for (p, &c) in population.iter().zip(costs) {
        let w = min_cost / c;
        denom += w;
        for (j, &x) in p.as_ref().iter().enumerate() {
            numer[j] += w * x;
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    Ok(numer
        .into_iter()
        .enumerate()
        .map(|(j, s)| (s / denom).clamp(lo[j], hi[j]))
        .collect())
}

/// `alpha + growth * alpha`, capped.
pub fn alpha_update(alpha: f64, growth: f64, cap: f64) -> f64 {
    (alpha + growth * alpha).min(cap)
}

/// Hook applied to every star between generation and evaluation.
pub trait StarRefiner: Sync {
    fn refine(&self, star: &mut [f64]);
}

/// Per-run record of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    /// Best point seen up to and including each iteration.
    pub best_point_per_iter: Vec<Vec<f64>>,
    /// Best-so-far cost after each iteration; non-increasing.
    pub best_cost_per_iter: Vec<f64>,
    /// Cost of each iteration's center of mass.
    pub center_cost_per_iter: Vec<f64>,
    pub final_best_point: Vec<f64>,
    pub final_best_cost: f64,
    /// Star evaluations plus one for the starting point. Center-of-mass
    /// evaluations are counted in `center_evaluations`.
    pub evaluations: u64,
    pub center_evaluations: u64,
    pub seed: u64,
    /// Selection rate after the last update; `None` for classic runs.
    pub final_alpha: Option<f64>,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.best_cost_per_iter.len()
    }
}

/// What happened in one call to [`Search::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub k: usize,
    pub alpha: Option<f64>,
    pub stars: Vec<Vec<f64>>,
    pub star_costs: Vec<f64>,
    pub center: Vec<f64>,
    pub center_cost: f64,
    pub best_cost: f64,
    pub memory_update: Option<Insertion>,
}

/// Step-wise driver shared by both variants.
pub struct Search<'a> {
    objective: &'a dyn Objective,
    refiner: Option<&'a dyn StarRefiner>,
    config: OptimizerConfig,
    variant: Variant,
    bounds: Bounds,
    rng: ChaCha8Rng,
    center: Vec<f64>,
    memory: SolutionMemory,
    alpha: f64,
    iteration: usize,
    best_point: Vec<f64>,
    best_cost: f64,
    evaluations: u64,
    center_evaluations: u64,
    best_points: Vec<Vec<f64>>,
    best_costs: Vec<f64>,
    center_costs: Vec<f64>,
    stopped_early: bool,
}

impl<'a> Search<'a> {
    /// Draws a uniform starting point inside the bounds and evaluates it.
    pub fn new(
        objective: &'a dyn Objective,
        config: &OptimizerConfig,
        variant: Variant,
    ) -> Result<Self> {
        config.validate()?;
        let bounds = objective.bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let center: Vec<f64> = bounds
            .lower()
            .iter()
            .zip(bounds.upper())
            .map(|(&lo, &hi)| rng.random_range(lo..=hi))
            .collect();
        let cost = finite_cost(objective.evaluate(&center)?)?;
        Ok(Self {
            objective,
            refiner: None,
            config: config.clone(),
            variant,
            bounds,
            rng,
            best_point: center.clone(),
            center,
            memory: SolutionMemory::new(config.memory_capacity)?,
            alpha: config.alpha0,
            iteration: 0,
            best_cost: cost,
            evaluations: 1,
            center_evaluations: 0,
            best_points: Vec::with_capacity(config.max_iters),
            best_costs: Vec::with_capacity(config.max_iters),
            center_costs: Vec::with_capacity(config.max_iters),
            stopped_early: false,
        })
    }

    pub fn with_refiner(mut self, refiner: &'a dyn StarRefiner) -> Self {
        self.refiner = Some(refiner);
        self
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn memory(&self) -> &SolutionMemory {
        &self.memory
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.best_point, self.best_cost)
    }

    pub fn is_finished(&self) -> bool {
        self.stopped_early || self.iteration >= self.config.max_iters
    }

    fn observe(&mut self, point: &[f64], cost: f64) {
        if cost < self.best_cost {
            self.best_cost = cost;
            self.best_point.clear();
            self.best_point.extend_from_slice(point);
        }
    }

    /// Runs one big bang / big crunch cycle.
    pub fn step(&mut self) -> Result<IterationReport> {
        if self.is_finished() {
            return Err(Error::invalid("search already finished"));
        }
        let k = self.config.first_iteration_index + self.iteration;
        let n = self.config.num_stars;
        let mut stars = match self.variant {
            Variant::Classic => big_bang_classic(&self.center, &self.bounds, k, &mut self.rng, n)?,
            Variant::MemoryEnriched => big_bang_memory(
                &self.center,
                &self.memory,
                self.alpha,
                &self.bounds,
                k,
                &mut self.rng,
                n,
            )?,
        };
        if let Some(refiner) = self.refiner {
            for star in &mut stars {
                refiner.refine(star);
                for (j, v) in star.iter_mut().enumerate() {
                    *v = self.bounds.clamp(j, *v);
                }
            }
        }

        let mut costs = Vec::with_capacity(stars.len());
        for star in &stars {
            costs.push(finite_cost(self.objective.evaluate(star)?)?);
        }
        self.evaluations += stars.len() as u64;
        for (star, &c) in stars.iter().zip(&costs) {
            self.observe(star, c);
        }

        let center = center_of_mass(&stars, &costs, self.config.epsilon_cost)?;
        let center_cost = finite_cost(self.objective.evaluate(&center)?)?;
        self.center_evaluations += 1;
        self.observe(&center, center_cost);

        let (alpha, memory_update) = match self.variant {
            Variant::Classic => (None, None),
            Variant::MemoryEnriched => {
                let used = self.alpha;
                let update = self.memory.insert(center.clone(), center_cost)?;
                self.alpha =
                    alpha_update(self.alpha, self.config.alpha_growth, self.config.alpha_cap);
                (Some(used), Some(update))
            }
        };
        self.center.clone_from(&center);
        self.iteration += 1;
        self.best_points.push(self.best_point.clone());
        self.best_costs.push(self.best_cost);
        self.center_costs.push(center_cost);

        if let Some(stop) = self.config.early_stop {
            let len = self.best_costs.len();
            if len > stop.patience {
                let before = self.best_costs[len - 1 - stop.patience];
                if before - self.best_cost < stop.tol {
                    self.stopped_early = true;
                }
            }
        }

        Ok(IterationReport {
            iteration: self.iteration - 1,
            k,
            alpha,
            stars,
            star_costs: costs,
            center,
            center_cost,
            best_cost: self.best_cost,
            memory_update,
        })
    }

    pub fn run(mut self) -> Result<RunTrace> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.into_trace())
    }

    pub fn into_trace(self) -> RunTrace {
        RunTrace {
            best_point_per_iter: self.best_points,
            best_cost_per_iter: self.best_costs,
            center_cost_per_iter: self.center_costs,
            final_best_point: self.best_point,
            final_best_cost: self.best_cost,
            evaluations: self.evaluations,
            center_evaluations: self.center_evaluations,
            seed: self.config.seed,
            final_alpha: match self.variant {
                Variant::Classic => None,
                Variant::MemoryEnriched => Some(self.alpha),
            },
        }
    }
}

fn finite_cost(cost: f64) -> Result<f64> {
    if cost.is_nan() {
        return Err(Error::invalid("objective returned NaN"));
    }
    Ok(cost)
}

pub fn optimize(
    objective: &dyn Objective,
    config: &OptimizerConfig,
    variant: Variant,
) -> Result<RunTrace> {
    Search::new(objective, config, variant)?.run()
}

pub fn optimize_bbbc(objective: &dyn Objective, config: &OptimizerConfig) -> Result<RunTrace> {
    optimize(objective, config, Variant::Classic)
}

pub fn optimize_mebbbc(objective: &dyn Objective, config: &OptimizerConfig) -> Result<RunTrace> {
    optimize(objective, config, Variant::MemoryEnriched)
}
