//! The plan-ahead optimization loop and its bookkeeping.
//!
//! Each batch: fit the GP on everything observed so far, let the policy pick
//! a batch from the surviving candidates, route through it from the current
//! location, evaluate one design at a time along the route, then refit and
//! (optionally) eliminate candidates. Routing changes only the visiting
//! order, never which designs are evaluated.

use std::io::{self, Write};

use rand::Rng;

use crate::domain::BoxDomain;
use crate::error::{input, Result};
use crate::policies::{CandidateSet, PolicyConfig, PolicyKind};
use crate::rng::keyed_rng;
use crate::routing::{natural_route, plan_route, MetricSpec, Route};
use crate::surrogate::{fit_posterior, Dataset, KernelFamily, KernelSpec, PosteriorState};
use crate::testbed::{make_grid, GridKind, NoiseReading, NoiseSpec, TestFunction};

/// Batch boundaries `t_0 = 1 < t_1 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSchedule {
    boundaries: Vec<usize>,
    growth: f64,
    initial_size: usize,
}

/// Relative tolerance under which `b₁ cⁱ` counts as an integer before `ceil`.
const CEIL_TOLERANCE: f64 = 1e-9;

impl BatchSchedule {
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// `b_i = t_i − t_{i−1}`.
    pub fn sizes(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `N(T)`.
    pub fn num_batches(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn horizon(&self) -> usize {
        *self.boundaries.last().expect("non-empty")
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn initial_size(&self) -> usize {
        self.initial_size
    }
}

/// Geometric schedule with sizes `⌈b₁ c^{i−1}⌉`, the last one truncated so
/// that `T − 1` evaluations follow the initial design.
pub fn build_schedule(horizon: usize, growth: f64, initial_size: usize) -> Result<BatchSchedule> {
    if horizon < 2 {
        return input(format!("horizon must be at least 2, got {horizon}"));
    }
    if !(growth > 1.0 && growth.is_finite()) {
        return input(format!("growth factor must exceed 1, got {growth}"));
    }
    if initial_size == 0 {
        return input("initial batch size must be at least 1");
    }
    let mut boundaries = vec![1usize];
    let mut t = 1usize;
    let mut i = 0i32;
    while t < horizon {
        let raw = initial_size as f64 * growth.powi(i);
        let size = (raw * (1.0 - CEIL_TOLERANCE)).ceil().max(1.0);
        let size = if size >= (horizon - t) as f64 {
            horizon - t
        } else {
            size as usize
        };
        t += size;
        boundaries.push(t);
        i += 1;
    }
    Ok(BatchSchedule {
        boundaries,
        growth,
        initial_size,
    })
}

/// GP prior settings. Lengthscales are in unit-box coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub family: KernelFamily,
    /// `None` means `0.1 ×` the unit-box diagonal, `0.1 √d`.
    pub lengthscale: Option<f64>,
    pub output_scale: f64,
    /// `None` means the noise variance in standardized units.
    pub nugget: Option<f64>,
    /// Smallest nugget ever used, which keeps noiseless fits factorizable.
    pub min_nugget: f64,
    /// Center and scale observations before fitting.
    pub standardize: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Rbf,
            lengthscale: None,
            output_scale: 1.0,
            nugget: None,
            min_nugget: 1e-6,
            standardize: true,
        }
    }
}

/// Everything needed to reproduce one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub function: TestFunction,
    /// `policy.seed` is replaced by a key derived from `seed`.
    pub policy: PolicyConfig,
    pub routing: bool,
    pub elimination: bool,
    pub horizon: usize,
    pub growth: f64,
    pub initial_batch: usize,
    /// Listed noise level; `None` uses the function's default.
    pub noise_level: Option<f64>,
    pub noise_reading: NoiseReading,
    pub grid_kind: GridKind,
    /// `None` uses the function's default count.
    pub grid_count: Option<usize>,
    pub grid_seed: u64,
    pub surrogate: SurrogateConfig,
    /// Traveler's starting design; `None` is the domain center.
    pub initial: Option<Vec<f64>>,
    /// Drives both the policy randomness and the noise stream.
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults: batched kinds route and eliminate, naive kinds do neither.
    pub fn new(function: TestFunction, kind: PolicyKind, horizon: usize, seed: u64) -> Self {
        Self {
            function,
            policy: PolicyConfig::new(kind),
            routing: kind.is_batched(),
            elimination: kind.is_batched(),
            horizon,
            growth: 1.1,
            initial_batch: 3,
            noise_level: None,
            noise_reading: NoiseReading::StdDev,
            grid_kind: GridKind::LowDiscrepancy,
            grid_count: None,
            grid_seed: 0,
            surrogate: SurrogateConfig::default(),
            initial: None,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return input(format!("horizon must be at least 2, got {}", self.horizon));
        }
        self.policy.validate()?;
        if let Some(x) = &self.initial {
            self.function.domain().check(x)?;
        }
        if let Some(l) = self.surrogate.lengthscale {
            if !(l > 0.0 && l.is_finite()) {
                return input(format!("lengthscale must be positive, got {l}"));
            }
        }
        if let Some(n) = self.surrogate.nugget {
            if !(n > 0.0 && n.is_finite()) {
                return input(format!("nugget must be positive, got {n}"));
            }
        }
        if !(self.surrogate.min_nugget > 0.0) {
            return input("min_nugget must be positive");
        }
        build_schedule(self.horizon, self.growth, self.initial_batch)?;
        self.noise()?;
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let level = self
            .noise_level
            .unwrap_or_else(|| self.function.default_noise());
        NoiseSpec::from_level(level, self.noise_reading, self.seed)
    }

    fn kernel(&self) -> Result<KernelSpec> {
        let d = self.function.input_dim() as f64;
        let l = self.surrogate.lengthscale.unwrap_or(0.1 * d.sqrt());
        KernelSpec::new(self.surrogate.family, l, self.surrogate.output_scale)
    }

    /// Stable hash of the full configuration.
    pub fn fingerprint(&self) -> String {
        // FNV-1a over the Debug rendering, which covers every field.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in format!("{self:?}").bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// One evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub batch: usize,
    pub x: Vec<f64>,
    pub y: f64,
    /// `f* − f(x_t)`.
    pub regret: f64,
    /// `c(x_{t−1}, x_t)`.
    pub move_cost: f64,
}

/// What the policy chose in one batch and the order it was visited in.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLog {
    pub index: usize,
    pub planned_size: usize,
    /// Candidate indices as emitted by the policy.
    pub selected: Vec<usize>,
    /// Candidate indices in evaluation order.
    pub visited: Vec<usize>,
    /// Alive candidates when the batch was selected.
    pub alive_before: usize,
    pub route_length: f64,
}

/// Full record of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<StepRecord>,
    pub batches: Vec<BatchLog>,
    pub seed: u64,
    pub fingerprint: String,
    pub dim: usize,
    /// Best true value over the candidates; regrets are measured against it.
    pub f_star: f64,
    /// Candidate attaining `f_star`, lowest index on ties.
    pub best_candidate: usize,
    /// Continuous optimum, for reporting.
    pub true_optimum: f64,
    /// Alive mask after the last elimination.
    pub final_alive: Vec<bool>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    /// `R_T`.
    pub fn cumulative_regret(&self) -> f64 {
        self.records.iter().map(|r| r.regret).sum()
    }

    /// `C_T`.
    pub fn cumulative_move(&self) -> f64 {
        self.records.iter().map(|r| r.move_cost).sum()
    }

    /// `L_T = R_T + C_T`.
    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_regret() + self.cumulative_move()
    }

    /// CSV with header `t,batch,x_1..x_d,y,regret,move_cost`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = String::from("t,batch");
        for k in 1..=self.dim {
            header.push_str(&format!(",x_{k}"));
        }
        header.push_str(",y,regret,move_cost\n");
        out.write_all(header.as_bytes())?;
        for r in &self.records {
            let mut line = format!("{},{}", r.t, r.batch);
            for v in &r.x {
                line.push_str(&format!(",{v:?}"));
            }
            line.push_str(&format!(",{:?},{:?},{:?}\n", r.y, r.regret, r.move_cost));
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Standardize responses and fit. Noise variance is rescaled with them.
fn fit(
    cfg: &ExperimentConfig,
    kernel: &KernelSpec,
    noise_var: f64,
    data: &Dataset,
) -> Result<PosteriorState> {
    let ys = data.observations();
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let (mean, scale) = if !cfg.surrogate.standardize {
        (0.0, 1.0)
    } else if var.sqrt() > 1e-12 {
        (mean, var.sqrt())
    } else {
        (mean, 1.0)
    };
    let standardized = data.with_observations(ys.iter().map(|y| (y - mean) / scale).collect())?;
    let nugget = cfg
        .surrogate
        .nugget
        .unwrap_or(noise_var / (scale * scale))
        .max(cfg.surrogate.min_nugget);
    fit_posterior(kernel, nugget, &standardized)
}

/// Mixed into the replication seed so policy draws and observation noise
/// come from unrelated streams.
const POLICY_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Run one replication.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Trace> {
    cfg.validate()?;
    let policy = PolicyConfig {
        seed: cfg.seed ^ POLICY_SEED_SALT,
        ..cfg.policy
    };
    let f = cfg.function;
    let domain: BoxDomain = f.domain();
    let metric = MetricSpec::euclidean(domain.clone());
    let schedule = build_schedule(cfg.horizon, cfg.growth, cfg.initial_batch)?;
    let noise = cfg.noise()?;
    let kernel = cfg.kernel()?;
    let count = cfg.grid_count.unwrap_or_else(|| f.default_grid_count());
    let grid = make_grid(f, count, cfg.grid_kind, cfg.grid_seed)?;
    let values: Vec<f64> = grid.points.iter().map(|p| f.value(p)).collect();
    let mut best_candidate = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best_candidate] {
            best_candidate = i;
        }
    }
    let f_star = values[best_candidate];
    let mut candidates = CandidateSet::new(grid.points)?;

    let mut records = Vec::with_capacity(cfg.horizon);
    let mut batches = Vec::new();
    let mut data = Dataset::new(Some(domain.clone()));

    let x0 = cfg.initial.clone().unwrap_or_else(|| domain.center());
    let y0 = crate::testbed::observe(f, &noise, &x0, 1)?;
    records.push(StepRecord {
        t: 1,
        batch: 0,
        x: x0.clone(),
        y: y0,
        regret: f_star - f.value(&x0),
        move_cost: 0.0,
    });
    data.push(x0.clone(), y0)?;
    let mut current = x0;

    // Naive policies decide one design at a time.
    let sizes = if cfg.policy.kind.is_batched() {
        schedule.sizes()
    } else {
        vec![1; cfg.horizon - 1]
    };
    let mut state = fit(cfg, &kernel, noise.variance(), &data)?;
    for (i, &size) in sizes.iter().enumerate() {
        let index = i + 1;
        let alive_before = candidates.alive_count();
        let selected = policy.select(&state, &candidates, size, index)?.members;
        let pts: Vec<Vec<f64>> = selected
            .iter()
            .map(|&k| candidates.point(k).to_vec())
            .collect();
        let route: Route = if cfg.routing {
            plan_route(&current, &pts, &metric)?
        } else {
            natural_route(&current, &pts, &metric)?
        };
        let mut visited = Vec::with_capacity(size);
        for stop in &route.stops {
            for &member in &stop.members {
                let t = records.len() + 1;
                let x = stop.point.clone();
                let y = crate::testbed::observe(f, &noise, &x, t as u64)?;
                let move_cost = metric.dist(&current, &x);
                records.push(StepRecord {
                    t,
                    batch: index,
                    x: x.clone(),
                    y,
                    regret: f_star - f.value(&x),
                    move_cost,
                });
                data.push(x.clone(), y)?;
                visited.push(selected[member]);
                current = x;
            }
        }
        batches.push(BatchLog {
            index,
            planned_size: size,
            selected,
            visited,
            alive_before,
            route_length: route.length,
        });
        state = fit(cfg, &kernel, noise.variance(), &data)?;
        if cfg.elimination {
            candidates =
                crate::policies::eliminate(&state, &candidates, cfg.policy.effective_eta())?;
        }
    }

    Ok(Trace {
        records,
        batches,
        seed: cfg.seed,
        fingerprint: cfg.fingerprint(),
        dim: f.input_dim(),
        f_star,
        best_candidate,
        true_optimum: f.optimum_value(),
        final_alive: candidates.alive_mask().to_vec(),
    })
}

/// Cumulative and last-half metrics up to step `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub at: usize,
    /// Mean regret over the last `⌈at/2⌉` steps.
    pub avg_regret_last_half: f64,
    /// Mean movement cost over the last `⌈at/2⌉` steps.
    pub avg_move_last_half: f64,
    pub cumulative_regret: f64,
    pub cumulative_move: f64,
    pub cumulative_loss: f64,
}

pub fn summarize(trace: &Trace, at: usize) -> Result<Summary> {
    if at == 0 || at > trace.records.len() {
        return input(format!(
            "summary step {at} outside 1..={}",
            trace.records.len()
        ));
    }
    let prefix = &trace.records[..at];
    let half = at.div_ceil(2);
    let tail = &prefix[at - half..];
    let r: f64 = prefix.iter().map(|s| s.regret).sum();
    let c: f64 = prefix.iter().map(|s| s.move_cost).sum();
    Ok(Summary {
        at,
        avg_regret_last_half: tail.iter().map(|s| s.regret).sum::<f64>() / half as f64,
        avg_move_last_half: tail.iter().map(|s| s.move_cost).sum::<f64>() / half as f64,
        cumulative_regret: r,
        cumulative_move: c,
        cumulative_loss: r + c,
    })
}

/// Mean, minimum and maximum across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Band {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        Band {
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// The two reported curves at one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub t: usize,
    pub regret: Band,
    pub movement: Band,
}

/// Last-half regret and movement curves over `t = 1..=T`, across traces.
pub fn aggregate(traces: &[Trace]) -> Result<Vec<AggregateRow>> {
    let Some(first) = traces.first() else {
        return input("aggregate needs at least one trace");
    };
    let horizon = first.horizon();
    if traces.iter().any(|t| t.horizon() != horizon) {
        return input("traces have different lengths");
    }
    (1..=horizon)
        .map(|t| {
            let sums: Vec<Summary> = traces
                .iter()
                .map(|tr| summarize(tr, t))
                .collect::<Result<_>>()?;
            let regret: Vec<f64> = sums.iter().map(|s| s.avg_regret_last_half).collect();
            let movement: Vec<f64> = sums.iter().map(|s| s.avg_move_last_half).collect();
            Ok(AggregateRow {
                t,
                regret: Band::of(&regret),
                movement: Band::of(&movement),
            })
        })
        .collect()
}

/// Length of the planned open route through one uniform sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSample {
    pub n: usize,
    pub seed: u64,
    pub route_length: f64,
}

/// Route `n` uniform points in `[0,1]^dim`, starting from the cube center.
pub fn route_length_sample(dim: usize, n: usize, seed: u64) -> Result<ScalingSample> {
    if dim == 0 || n == 0 {
        return input(format!(
            "need a positive dimension and point count, got dim={dim} n={n}"
        ));
    }
    let mut rng = keyed_rng(seed, n as u64);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let domain = BoxDomain::unit(dim);
    let route = plan_route(
        &domain.center(),
        &points,
        &MetricSpec::euclidean(domain.clone()),
    )?;
    Ok(ScalingSample {
        n,
        seed,
        route_length: route.length,
    })
}

/// Every `(n, seed)` pair, `n`-major.
pub fn scaling_study(dim: usize, ns: &[usize], seeds: &[u64]) -> Result<Vec<ScalingSample>> {
    let mut out = Vec::with_capacity(ns.len() * seeds.len());
    for &n in ns {
        for &seed in seeds {
            out.push(route_length_sample(dim, n, seed)?);
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return input("slope fit needs two or more paired values");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return input("slope fit needs positive finite values");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return input("slope fit needs at least two distinct x values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Pooled log-log slope of route length against `n`. With the same `n` grid
/// for every seed this equals the mean of the per-seed slopes.
pub fn scaling_slope(samples: &[ScalingSample]) -> Result<f64> {
    let xs: Vec<f64> = samples.iter().map(|s| s.n as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.route_length).collect();
    log_log_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_with(regrets: &[f64], moves: &[f64]) -> Trace {
        Trace {
            records: regrets
                .iter()
                .zip(moves)
                .enumerate()
                .map(|(i, (r, m))| StepRecord {
                    t: i + 1,
                    batch: 0,
                    x: vec![0.0],
                    y: 0.0,
                    regret: *r,
                    move_cost: *m,
                })
                .collect(),
            batches: vec![],
            seed: 0,
            fingerprint: String::new(),
            dim: 1,
            f_star: 0.0,
            best_candidate: 0,
            true_optimum: 0.0,
            final_alive: vec![],
        }
    }

    #[test]
    fn schedule_doubling_example() {
        let s = build_schedule(10, 2.0, 1).unwrap();
        assert_eq!(s.sizes(), vec![1, 2, 4, 2]);
        assert_eq!(s.boundaries(), &[1, 2, 4, 8, 10]);
        assert_eq!(s.num_batches(), 4);
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(build_schedule(10, 1.0, 1).is_err());
        assert!(build_schedule(1, 2.0, 1).is_err());
        assert!(build_schedule(10, 2.0, 0).is_err());
        assert_eq!(build_schedule(2, 1.1, 3).unwrap().sizes(), vec![1]);
    }

    #[test]
    fn schedule_default_protocol() {
        let s = build_schedule(100, 1.1, 3).unwrap();
        assert_eq!(s.sizes().iter().sum::<usize>(), 99);
        assert_eq!(s.sizes()[..4], [3, 4, 4, 4]);
    }

    #[test]
    fn last_half_means() {
        let t = trace_with(&[4.0, 2.0, 0.0, 0.0], &[0.0; 4]);
        let s = summarize(&t, 4).unwrap();
        assert_eq!(s.avg_regret_last_half, 0.0);
        assert_eq!(s.avg_move_last_half, 0.0);
        assert_eq!(s.cumulative_regret, 6.0);
        let c = trace_with(&[0.7; 9], &[0.0; 9]);
        for at in 1..=9 {
            assert!((summarize(&c, at).unwrap().avg_regret_last_half - 0.7).abs() < 1e-15);
        }
        assert!(summarize(&c, 0).is_err());
        assert!(summarize(&c, 10).is_err());
    }

    #[test]
    fn aggregate_bands() {
        let a = trace_with(&[1.0, 2.0], &[0.5, 0.5]);
        let b = trace_with(&[-1.0, -2.0], &[0.5, 0.5]);
        let rows = aggregate(&[a.clone(), b]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(
            rows[1].regret,
            Band {
                mean: 0.0,
                min: -2.0,
                max: 2.0
            }
        );
        let single = aggregate(&[a]).unwrap();
        assert_eq!(
            single[0].regret,
            Band {
                mean: 1.0,
                min: 1.0,
                max: 1.0
            }
        );
        let short = trace_with(&[1.0], &[0.0]);
        assert!(aggregate(&[short, trace_with(&[1.0, 1.0], &[0.0, 0.0])]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let mut t = trace_with(&[0.5], &[0.0]);
        t.dim = 1;
        let csv = t.to_csv();
        assert_eq!(csv, "t,batch,x_1,y,regret,move_cost\n1,0,0.0,0.0,0.5,0.0\n");
    }
}
