//! Batched successive elimination for K-armed and Lipschitz bandits, with
//! every batch routed through the metric of the arm space.

use crate::domain::BoxDomain;
use crate::error::{input, Result};
use crate::harness::{BatchLog, BatchSchedule, StepRecord, Trace};
use crate::rng::keyed_normal;
use crate::routing::{plan_route, MetricSpec};

/// Failure probability of the confidence radii.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Stochastic arms sitting on a finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmEnvironment {
    means: Vec<f64>,
    noise_std: f64,
    metric: MetricSpec,
}

impl ArmEnvironment {
    /// Arm `k` sits at vertex `k` of a `DiscreteUniform` or `WeightedGraph`
    /// metric with at least as many vertices as arms.
    pub fn new(means: Vec<f64>, noise_std: f64, metric: MetricSpec) -> Result<Self> {
        if means.len() < 2 {
            return input("need at least two arms");
        }
        if means.iter().any(|m| !m.is_finite()) {
            return input("arm means must be finite");
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return input(format!("noise_std must be nonnegative, got {noise_std}"));
        }
        let vertices = match &metric {
            MetricSpec::DiscreteUniform { size } => *size,
            MetricSpec::WeightedGraph(g) => g.size(),
            MetricSpec::EuclideanBox(_) => return input("arm metrics must be finite spaces"),
        };
        if vertices < means.len() {
            return input(format!(
                "metric has {vertices} vertices for {} arms",
                means.len()
            ));
        }
        Ok(Self {
            means,
            noise_std,
            metric,
        })
    }

    /// Arms on the uniform metric, where every move costs 1.
    pub fn uniform(means: Vec<f64>, noise_std: f64) -> Result<Self> {
        let k = means.len();
        Self::new(means, noise_std, MetricSpec::discrete(k.max(1))?)
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }
}

/// Per-arm pull statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmStats {
    pub pulls: usize,
    pub mean: f64,
    pub alive: bool,
}

impl ArmStats {
    fn fresh() -> Self {
        Self {
            pulls: 0,
            mean: 0.0,
            alive: true,
        }
    }

    fn record(&mut self, y: f64) {
        self.pulls += 1;
        self.mean += (y - self.mean) / self.pulls as f64;
    }
}

/// `sqrt(2 σ² log(2 K N / δ) / n)`; infinite for unpulled arms.
pub fn confidence_radius(
    noise_std: f64,
    arms: usize,
    batches: usize,
    delta: f64,
    pulls: usize,
) -> f64 {
    if pulls == 0 {
        return f64::INFINITY;
    }
    let log_term = (2.0 * arms as f64 * batches as f64 / delta).ln();
    (2.0 * noise_std * noise_std * log_term / pulls as f64).sqrt()
}

/// Fewest pulls that bring the radius down to `target`.
fn pulls_for_radius(noise_std: f64, arms: usize, batches: usize, target: f64) -> usize {
    let log_term = (2.0 * arms as f64 * batches as f64 / DEFAULT_DELTA).ln();
    let n = (2.0 * noise_std * noise_std * log_term / (target * target)).ceil();
    if n.is_finite() {
        (n as usize).max(1)
    } else {
        usize::MAX
    }
}

/// Drop every alive arm whose upper bound (plus `slack`) falls below the best
/// lower bound. Arms attaining the best lower bound always survive.
fn eliminate_arms(stats: &mut [ArmStats], radius: impl Fn(usize) -> f64, slack: f64) {
    let bounds: Vec<(f64, f64)> = stats
        .iter()
        .map(|s| {
            let r = radius(s.pulls);
            (s.mean - r, s.mean + r + slack)
        })
        .collect();
    let best_lcb = stats
        .iter()
        .zip(&bounds)
        .filter(|(s, _)| s.alive)
        .map(|(_, b)| b.0)
        .fold(f64::NEG_INFINITY, f64::max);
    for (s, b) in stats.iter_mut().zip(&bounds) {
        if s.alive && b.1 < best_lcb {
            s.alive = false;
        }
    }
}

/// Spread `budget` pulls over `arms` round-robin, starting at `*cursor`.
fn round_robin(arms: &[usize], budget: usize, cursor: &mut usize) -> Vec<usize> {
    let mut pulls = Vec::with_capacity(budget);
    for _ in 0..budget {
        pulls.push(arms[*cursor % arms.len()]);
        *cursor += 1;
    }
    pulls
}

/// Batched successive elimination on a K-armed bandit.
///
/// The first pull is arm 0 (the traveler's starting vertex); each batch of
/// the schedule then pulls the alive arms equally, visiting them along a
/// planned route, and eliminates arms once the batch is complete.
pub fn mab_batched_se(
    env: &ArmEnvironment,
    horizon: usize,
    schedule: &BatchSchedule,
    seed: u64,
) -> Result<Trace> {
    mab_batched_se_with(env, horizon, schedule, seed, DEFAULT_DELTA)
}

pub fn mab_batched_se_with(
    env: &ArmEnvironment,
    horizon: usize,
    schedule: &BatchSchedule,
    seed: u64,
    delta: f64,
) -> Result<Trace> {
    let k = env.arms();
    if horizon < k {
        return input(format!("horizon {horizon} is shorter than the {k} arms"));
    }
    if schedule.horizon() != horizon {
        return input(format!(
            "schedule ends at {} but the horizon is {horizon}",
            schedule.horizon()
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input(format!("delta must lie in (0, 1), got {delta}"));
    }
    let best = (0..k).fold(0, |b, i| if env.means[i] > env.means[b] { i } else { b });
    let f_star = env.means[best];
    let n_batches = schedule.num_batches();
    let radius = |n: usize| confidence_radius(env.noise_std, k, n_batches, delta, n);
    let position = |arm: usize| vec![arm as f64];
    let pull = |arm: usize, t: usize| env.means[arm] + env.noise_std * keyed_normal(seed, t as u64);

    let mut stats = vec![ArmStats::fresh(); k];
    let mut records = Vec::with_capacity(horizon);
    let mut batches = Vec::with_capacity(n_batches);
    let y0 = pull(0, 1);
    stats[0].record(y0);
    records.push(StepRecord {
        t: 1,
        batch: 0,
        x: position(0),
        y: y0,
        regret: f_star - env.means[0],
        move_cost: 0.0,
    });
    let mut current = position(0);
    let mut cursor = 0;

    for (i, size) in schedule.sizes().into_iter().enumerate() {
        let alive: Vec<usize> = (0..k).filter(|&a| stats[a].alive).collect();
        let selected = round_robin(&alive, size, &mut cursor);
        let pts: Vec<Vec<f64>> = selected.iter().map(|&a| position(a)).collect();
        let route = plan_route(&current, &pts, &env.metric)?;
        let mut visited = Vec::with_capacity(size);
        for stop in &route.stops {
            let arm = stop.point[0] as usize;
            for _ in 0..stop.multiplicity {
                let t = records.len() + 1;
                let y = pull(arm, t);
                stats[arm].record(y);
                let move_cost = env.metric.dist(&current, &stop.point);
                records.push(StepRecord {
                    t,
                    batch: i + 1,
                    x: stop.point.clone(),
                    y,
                    regret: f_star - env.means[arm],
                    move_cost,
                });
                visited.push(arm);
                current = stop.point.clone();
            }
        }
        batches.push(BatchLog {
            index: i + 1,
            planned_size: size,
            selected,
            visited,
            alive_before: alive.len(),
            route_length: route.length,
        });
        eliminate_arms(&mut stats, radius, 0.0);
    }

    Ok(Trace {
        records,
        batches,
        seed,
        fingerprint: format!("mab-k{k}-T{horizon}-n{n_batches}"),
        dim: 1,
        f_star,
        best_candidate: best,
        true_optimum: f_star,
        final_alive: stats.iter().map(|s| s.alive).collect(),
    })
}

/// Built-in Lipschitz objectives on `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum LipschitzObjective {
    Constant(f64),
    /// `−‖x − center‖²`.
    Quadratic {
        center: Vec<f64>,
    },
}

impl LipschitzObjective {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            LipschitzObjective::Constant(c) => *c,
            LipschitzObjective::Quadratic { center } => -x
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        }
    }

    /// Maximum over the unit cube.
    pub fn optimum_value(&self) -> f64 {
        match self {
            LipschitzObjective::Constant(c) => *c,
            LipschitzObjective::Quadratic { .. } => 0.0,
        }
    }

    /// Smallest valid Lipschitz constant on `[0, 1]^d`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            LipschitzObjective::Constant(_) => 0.0,
            // |∇f| = 2‖x − c‖, largest at the corner farthest from c.
            LipschitzObjective::Quadratic { center } => {
                2.0 * center
                    .iter()
                    .map(|c| c.max(1.0 - c).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEnvironment {
    objective: LipschitzObjective,
    dim: usize,
    lipschitz: f64,
    noise_std: f64,
}

impl LipschitzEnvironment {
    pub fn new(
        objective: LipschitzObjective,
        dim: usize,
        lipschitz: f64,
        noise_std: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return input("dimension must be positive");
        }
        if let LipschitzObjective::Quadratic { center } = &objective {
            if center.len() != dim || !BoxDomain::unit(dim).contains(center) {
                return input("quadratic center must lie in the unit cube");
            }
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return input(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            ));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return input(format!("noise_std must be nonnegative, got {noise_std}"));
        }
        Ok(Self {
            objective,
            dim,
            lipschitz,
            noise_std,
        })
    }

    pub fn objective(&self) -> &LipschitzObjective {
        &self.objective
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `L` times the half-diagonal of a cell with the given side.
    pub fn cell_slack(&self, side: f64) -> f64 {
        self.lipschitz * side * (self.dim as f64).sqrt() / 2.0
    }
}

/// An axis-aligned cube `[lo, lo + side]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub side: f64,
}

impl Cell {
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().map(|l| l + self.side / 2.0).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .all(|(v, l)| *v >= *l && *v <= l + self.side)
    }

    fn children(&self) -> Vec<Cell> {
        let d = self.lo.len();
        let half = self.side / 2.0;
        (0..1usize << d)
            .map(|mask| Cell {
                lo: (0..d)
                    .map(|k| self.lo[k] + if mask >> k & 1 == 1 { half } else { 0.0 })
                    .collect(),
                side: half,
            })
            .collect()
    }
}

/// Trace plus the region that survived elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzRun {
    pub trace: Trace,
    pub region: Vec<Cell>,
    /// Surviving cells after each batch.
    pub history: Vec<Vec<Cell>>,
    /// Cell side used in each batch.
    pub resolutions: Vec<f64>,
}

impl LipschitzRun {
    /// Largest per-axis extent of the surviving region.
    pub fn region_diameter(&self) -> f64 {
        let d = self.trace.dim;
        (0..d)
            .map(|k| {
                let lo = self
                    .region
                    .iter()
                    .map(|c| c.lo[k])
                    .fold(f64::INFINITY, f64::min);
                let hi = self
                    .region
                    .iter()
                    .map(|c| c.lo[k] + c.side)
                    .fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn region_contains(&self, x: &[f64]) -> bool {
        self.region.iter().any(|c| c.contains(x))
    }
}

/// Batched successive elimination over a dyadic discretization of `[0, 1]^d`.
///
/// Batch `i` works at cell side `2^{-(i+1)}`: surviving cells are halved
/// along every axis, their centers act as arms, statistics restart, and
/// cells are eliminated by the arm rule widened by the Lipschitz slack
/// `L ε_i √d / 2` (how far any point of a cell can beat its center).
/// Refinement waits
/// until the batch can pull every refined cell often enough for its
/// confidence radius to drop to the Lipschitz slack of the finer cells.
pub fn lipschitz_batched_se(
    env: &LipschitzEnvironment,
    horizon: usize,
    schedule: &BatchSchedule,
    seed: u64,
) -> Result<LipschitzRun> {
    if horizon < 2 {
        return input(format!("horizon must be at least 2, got {horizon}"));
    }
    if schedule.horizon() != horizon {
        return input(format!(
            "schedule ends at {} but the horizon is {horizon}",
            schedule.horizon()
        ));
    }
    let d = env.dim;
    let metric = MetricSpec::euclidean(BoxDomain::unit(d));
    let f_star = env.objective.optimum_value();
    let n_batches = schedule.num_batches();
    let observe =
        |x: &[f64], t: usize| env.objective.value(x) + env.noise_std * keyed_normal(seed, t as u64);

    let mut records = Vec::with_capacity(horizon);
    let mut batches = Vec::with_capacity(n_batches);
    let mut resolutions = Vec::with_capacity(n_batches);
    let x0 = vec![0.5; d];
    let y0 = observe(&x0, 1);
    records.push(StepRecord {
        t: 1,
        batch: 0,
        x: x0.clone(),
        y: y0,
        regret: f_star - env.objective.value(&x0),
        move_cost: 0.0,
    });
    let mut current = x0;
    let mut cells = vec![Cell {
        lo: vec![0.0; d],
        side: 1.0,
    }];
    let mut history = Vec::with_capacity(n_batches);

    for (i, size) in schedule.sizes().into_iter().enumerate() {
        let refined: Vec<Cell> = cells.iter().flat_map(Cell::children).collect();
        let slack = env.cell_slack(refined[0].side);
        let needed = pulls_for_radius(env.noise_std, refined.len(), n_batches, slack);
        if i == 0 || refined.len().saturating_mul(needed) <= size {
            cells = refined;
        }
        let eps = cells[0].side;
        resolutions.push(eps);
        let k = cells.len();
        let centers: Vec<Vec<f64>> = cells.iter().map(Cell::center).collect();
        let all: Vec<usize> = (0..k).collect();
        let mut cursor = 0;
        let selected = round_robin(&all, size, &mut cursor);
        let pts: Vec<Vec<f64>> = selected.iter().map(|&c| centers[c].clone()).collect();
        let route = plan_route(&current, &pts, &metric)?;
        let mut stats = vec![ArmStats::fresh(); k];
        let mut visited = Vec::with_capacity(size);
        for stop in &route.stops {
            let cell = selected[stop.members[0]];
            for _ in 0..stop.multiplicity {
                let t = records.len() + 1;
                let y = observe(&stop.point, t);
                stats[cell].record(y);
                let move_cost = metric.dist(&current, &stop.point);
                records.push(StepRecord {
                    t,
                    batch: i + 1,
                    x: stop.point.clone(),
                    y,
                    regret: f_star - env.objective.value(&stop.point),
                    move_cost,
                });
                visited.push(cell);
                current = stop.point.clone();
            }
        }
        batches.push(BatchLog {
            index: i + 1,
            planned_size: size,
            selected,
            visited,
            alive_before: k,
            route_length: route.length,
        });
        let radius = |n: usize| confidence_radius(env.noise_std, k, n_batches, DEFAULT_DELTA, n);
        eliminate_arms(&mut stats, radius, env.cell_slack(eps));
        cells = cells
            .into_iter()
            .zip(&stats)
            .filter(|(_, s)| s.alive)
            .map(|(c, _)| c)
            .collect();
        history.push(cells.clone());
    }

    let trace = Trace {
        records,
        batches,
        seed,
        fingerprint: format!("lipschitz-d{d}-T{horizon}-n{n_batches}"),
        dim: d,
        f_star,
        best_candidate: 0,
        true_optimum: f_star,
        final_alive: vec![true; cells.len()],
    };
    Ok(LipschitzRun {
        trace,
        region: cells,
        history,
        resolutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::build_schedule;

    #[test]
    fn radius_shrinks_with_pulls() {
        assert_eq!(confidence_radius(1.0, 2, 3, 0.05, 0), f64::INFINITY);
        let r1 = confidence_radius(1.0, 2, 3, 0.05, 1);
        let r4 = confidence_radius(1.0, 2, 3, 0.05, 4);
        assert!((r1 / r4 - 2.0).abs() < 1e-12);
        assert!((r1 - (2.0 * (240.0f64).ln()).sqrt()).abs() < 1e-12);
        assert_eq!(confidence_radius(0.0, 2, 3, 0.05, 5), 0.0);
    }

    #[test]
    fn environment_validation() {
        assert!(ArmEnvironment::uniform(vec![1.0], 1.0).is_err());
        assert!(ArmEnvironment::uniform(vec![1.0, f64::NAN], 1.0).is_err());
        assert!(
            ArmEnvironment::new(vec![1.0, 0.0, 0.5], 1.0, MetricSpec::discrete(2).unwrap())
                .is_err()
        );
        let env = ArmEnvironment::uniform(vec![1.0, 0.0], 0.1).unwrap();
        let s = build_schedule(10, 2.0, 2).unwrap();
        assert!(mab_batched_se(&env, 1, &build_schedule(2, 2.0, 1).unwrap(), 0).is_err());
        assert!(mab_batched_se(&env, 20, &s, 0).is_err());
    }

    #[test]
    fn noiseless_arms_keep_only_the_best() {
        let env = ArmEnvironment::uniform(vec![0.2, 0.9, 0.5, 0.9], 0.0).unwrap();
        let s = build_schedule(50, 2.0, 4).unwrap();
        let tr = mab_batched_se(&env, 50, &s, 3).unwrap();
        assert_eq!(tr.final_alive, vec![false, true, false, true]);
        // After the first batch only the tied best arms are pulled.
        assert!(tr.batches[1].selected.iter().all(|a| *a == 1 || *a == 3));
    }

    #[test]
    fn uniform_metric_moves_once_per_arm() {
        let env = ArmEnvironment::uniform(vec![0.1, 0.2, 0.3, 0.4, 0.5], 1.0).unwrap();
        let s = build_schedule(200, 2.0, 5).unwrap();
        let tr = mab_batched_se(&env, 200, &s, 1).unwrap();
        assert_eq!(tr.records.len(), 200);
        for b in &tr.batches {
            assert!(b.route_length <= b.alive_before as f64 + 1e-12);
        }
    }

    #[test]
    fn cells_split_into_children() {
        let c = Cell {
            lo: vec![0.0, 0.0],
            side: 1.0,
        };
        let kids = c.children();
        assert_eq!(kids.len(), 4);
        assert!(kids.iter().all(|k| k.side == 0.5));
        assert_eq!(kids[3].center(), vec![0.75, 0.75]);
    }

    #[test]
    fn one_batch_two_cells_on_the_line() {
        let env =
            LipschitzEnvironment::new(LipschitzObjective::Constant(0.0), 1, 1.0, 0.0).unwrap();
        let s = build_schedule(3, 2.0, 2).unwrap();
        let run = lipschitz_batched_se(&env, 3, &s, 0).unwrap();
        assert_eq!(run.resolutions, vec![0.5]);
        let xs: Vec<f64> = run.trace.records[1..].iter().map(|r| r.x[0]).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![0.25, 0.75]);
        // From 0.5: one quarter to the nearer center, one half to the other.
        assert!((run.trace.cumulative_move() - 0.75).abs() < 1e-12);
        assert!((run.trace.batches[0].route_length - 0.75).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_bound_for_centered_quadratic() {
        let q = LipschitzObjective::Quadratic { center: vec![0.5] };
        assert_eq!(q.lipschitz_bound(), 1.0);
        assert_eq!(q.value(&[0.5]), 0.0);
        assert!(LipschitzEnvironment::new(q, 2, 1.0, 0.0).is_err());
    }
}
