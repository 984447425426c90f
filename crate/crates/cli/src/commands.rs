//! `run`, `compare` and `scaling`.
//!
//! Every command writes into a staging directory inside the output
//! directory and moves the files into place only once all replications have
//! succeeded, so a failed run leaves no partial results behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tb_core::bandit_ext::{lipschitz_batched_se, mab_batched_se_with, ArmEnvironment};
use tb_core::harness::{
    aggregate, build_schedule, route_length_sample, run_experiment, scaling_slope, summarize,
    ScalingSample, Trace,
};
use tb_core::policies::PolicyKind;

use crate::config::{ExperimentKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{curve_points, summary_csv, summary_json, svg_for_curve};

pub const OUT_ENV: &str = "TB_OUT";
pub const DEFAULT_OUT: &str = "tb-out";

/// Command-line overrides shared by the commands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub parallel: Option<usize>,
}

/// `--out`, then `TB_OUT`, then the config's `[output] dir` (relative to the
/// config file), then `tb-out` in the working directory.
pub fn resolve_out_dir(
    cli: Option<&Path>,
    env: Option<&str>,
    config_path: Option<&Path>,
    cfg_dir: Option<&Path>,
) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|e| !e.is_empty()) {
        return PathBuf::from(e);
    }
    if let Some(d) = cfg_dir {
        if d.is_absolute() {
            return d.to_path_buf();
        }
        let base = config_path.and_then(Path::parent).unwrap_or(Path::new(""));
        return base.join(d);
    }
    PathBuf::from(DEFAULT_OUT)
}

/// Files collected in memory, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, String)>,
}

impl Artifacts {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.files.push((path.into(), contents));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(path))
            .map(|(_, c)| c.as_str())
    }

    /// Write through a staging directory, then move each top-level entry
    /// into `out`, replacing what was there.
    pub fn commit(&self, out: &Path) -> CliResult<()> {
        fs::create_dir_all(out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
        let staging = out.join(format!(".tb-staging-{}", std::process::id()));
        let result = self.stage(&staging).and_then(|_| promote(&staging, out));
        let _ = fs::remove_dir_all(&staging);
        result
    }

    fn stage(&self, staging: &Path) -> CliResult<()> {
        if staging.exists() {
            fs::remove_dir_all(staging)?;
        }
        for (rel, contents) in &self.files {
            let path = staging.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, contents)?;
        }
        Ok(())
    }
}

fn promote(staging: &Path, out: &Path) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(staging)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for src in entries {
        let dst = out.join(src.file_name().expect("staged entries have names"));
        if dst.is_dir() {
            fs::remove_dir_all(&dst)?;
        }
        fs::rename(&src, &dst)?;
    }
    Ok(())
}

fn pool(parallel: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))
}

/// Run `job` for every seed on `parallel` workers; results keep seed order.
fn fan_out<T: Send>(
    seeds: &[u64],
    parallel: usize,
    job: impl Fn(u64) -> CliResult<T> + Sync,
) -> CliResult<Vec<T>> {
    pool(parallel)?.install(|| seeds.par_iter().map(|&s| job(s)).collect())
}

fn runtime(seed: u64) -> impl Fn(tb_core::Error) -> CliError {
    move |e| CliError::Runtime(format!("replication with seed {seed} failed: {e}"))
}

/// All replications of a `bo`, `mab` or `lipschitz` config.
pub fn run_traces(
    cfg: &RunConfig,
    policy: Option<PolicyKind>,
    seeds: &[u64],
    parallel: usize,
) -> CliResult<Vec<Trace>> {
    match cfg.kind {
        ExperimentKind::Bo => fan_out(seeds, parallel, |seed| {
            let exp = match policy {
                Some(k) => cfg.experiment_with_policy(k, seed),
                None => cfg.experiment(seed),
            };
            run_experiment(&exp).map_err(runtime(seed))
        }),
        ExperimentKind::Mab => {
            let arms = cfg.arms.as_ref().expect("mab config has arms");
            let sch = cfg.schedule.as_ref().expect("mab config has a schedule");
            let env = ArmEnvironment::uniform(arms.means.clone(), arms.noise_std)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let schedule = build_schedule(sch.horizon, sch.growth, sch.initial_batch)?;
            fan_out(seeds, parallel, |seed| {
                mab_batched_se_with(&env, sch.horizon, &schedule, seed, arms.delta)
                    .map_err(runtime(seed))
            })
        }
        ExperimentKind::Lipschitz => {
            let lip = cfg
                .lipschitz
                .as_ref()
                .expect("lipschitz config has its section");
            let sch = cfg
                .schedule
                .as_ref()
                .expect("lipschitz config has a schedule");
            let env = lip.environment()?;
            let schedule = build_schedule(sch.horizon, sch.growth, sch.initial_batch)?;
            fan_out(seeds, parallel, |seed| {
                lipschitz_batched_se(&env, sch.horizon, &schedule, seed)
                    .map(|r| r.trace)
                    .map_err(runtime(seed))
            })
        }
        ExperimentKind::Scaling => Err(CliError::Config(
            "scaling configs have no traces; use `tb scaling`".into(),
        )),
    }
}

/// Trace files plus the aggregated summary and plots, under `prefix`.
pub fn run_artifacts(
    label: &str,
    traces: &[Trace],
    prefix: &Path,
    art: &mut Artifacts,
) -> CliResult<()> {
    for tr in traces {
        art.add(prefix.join(format!("trace_{}.csv", tr.seed)), tr.to_csv());
    }
    let rows = aggregate(traces)?;
    let points = curve_points(&rows);
    art.add(prefix.join("summary.csv"), summary_csv(&points));
    art.add(prefix.join("regret.svg"), svg_for_curve("regret", &points));
    art.add(
        prefix.join("movement.svg"),
        svg_for_curve("movement", &points),
    );
    let json = summary_json(label, traces, &rows)?;
    art.add(
        prefix.join("summary.json"),
        format!(
            "{}\n",
            serde_json::to_string_pretty(&json).expect("json values serialize")
        ),
    );
    Ok(())
}

fn seeds_and_parallel(cfg: &RunConfig, ov: &Overrides) -> CliResult<(Vec<u64>, usize)> {
    let seeds = ov.seeds.clone().unwrap_or_else(|| cfg.seeds.clone());
    if seeds.is_empty() {
        return Err(CliError::Config("seed list must not be empty".into()));
    }
    let parallel = ov.parallel.unwrap_or(cfg.parallel);
    if parallel == 0 {
        return Err(CliError::Config("parallel must be at least 1".into()));
    }
    Ok((seeds, parallel))
}

pub fn run(cfg: &RunConfig, ov: &Overrides) -> CliResult<Artifacts> {
    let mut art = Artifacts::default();
    if cfg.kind == ExperimentKind::Scaling {
        let sc = cfg
            .scaling
            .as_ref()
            .expect("scaling config has its section");
        let seeds = ov.seeds.clone().unwrap_or_else(|| cfg.seeds.clone());
        scaling_artifacts(
            sc.dim,
            &sc.ns,
            &seeds,
            ov.parallel.unwrap_or(cfg.parallel),
            &mut art,
        )?;
        return Ok(art);
    }
    let (seeds, parallel) = seeds_and_parallel(cfg, ov)?;
    let traces = run_traces(cfg, None, &seeds, parallel)?;
    let label = match &cfg.policy {
        Some(p) => p.kind.name(),
        None => cfg.kind.name(),
    };
    run_artifacts(label, &traces, Path::new(""), &mut art)?;
    Ok(art)
}

/// Last-half averages of one replication at its horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub regret: f64,
    pub movement: f64,
}

pub fn outcomes(traces: &[Trace]) -> CliResult<Vec<SeedOutcome>> {
    traces
        .iter()
        .map(|tr| {
            let s = summarize(tr, tr.horizon())?;
            Ok(SeedOutcome {
                seed: tr.seed,
                regret: s.avg_regret_last_half,
                movement: s.avg_move_last_half,
            })
        })
        .collect()
}

/// Per-seed differences `a − b` of the last-half averages.
pub fn paired_table(a: &[SeedOutcome], b: &[SeedOutcome]) -> CliResult<String> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.seed != y.seed) {
        return Err(CliError::Runtime(
            "paired runs must share the same seeds".into(),
        ));
    }
    let mut s =
        String::from("seed,regret_a,regret_b,regret_diff,movement_a,movement_b,movement_diff\n");
    for (x, y) in a.iter().zip(b) {
        writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            x.seed,
            x.regret,
            y.regret,
            x.regret - y.regret,
            x.movement,
            y.movement,
            x.movement - y.movement
        )
        .unwrap();
    }
    Ok(s)
}

/// Same seeds, and therefore the same noise keys, for every policy.
pub fn compare(cfg: &RunConfig, policies: &[PolicyKind], ov: &Overrides) -> CliResult<Artifacts> {
    if cfg.kind != ExperimentKind::Bo {
        return Err(CliError::Config(format!(
            "compare needs a `bo` config, got `{}`",
            cfg.kind.name()
        )));
    }
    if policies.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two policies".into(),
        ));
    }
    for (i, p) in policies.iter().enumerate() {
        if policies[..i].contains(p) {
            return Err(CliError::Config(format!(
                "policy `{}` listed twice",
                p.name()
            )));
        }
    }
    let (seeds, parallel) = seeds_and_parallel(cfg, ov)?;
    let mut art = Artifacts::default();
    let mut all = Vec::with_capacity(policies.len());
    let mut table = String::from(
        "policy,seed,avg_regret_last_half,avg_move_last_half,cumulative_regret,cumulative_move\n",
    );
    for &p in policies {
        let traces = run_traces(cfg, Some(p), &seeds, parallel)?;
        run_artifacts(p.name(), &traces, Path::new(p.name()), &mut art)?;
        for tr in &traces {
            let s = summarize(tr, tr.horizon())?;
            writeln!(
                table,
                "{},{},{:?},{:?},{:?},{:?}",
                p.name(),
                tr.seed,
                s.avg_regret_last_half,
                s.avg_move_last_half,
                s.cumulative_regret,
                s.cumulative_move
            )
            .unwrap();
        }
        all.push((p, outcomes(&traces)?));
    }
    art.add("comparison.csv", table);
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let name = format!("paired_{}_vs_{}.csv", all[i].0.name(), all[j].0.name());
            art.add(name, paired_table(&all[i].1, &all[j].1)?);
        }
    }
    Ok(art)
}

pub fn scaling_samples(
    dim: usize,
    ns: &[usize],
    seeds: &[u64],
    parallel: usize,
) -> CliResult<Vec<ScalingSample>> {
    let jobs: Vec<(usize, u64)> = ns
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    pool(parallel)?.install(|| {
        jobs.par_iter()
            .map(|&(n, seed)| {
                route_length_sample(dim, n, seed).map_err(|e| CliError::Runtime(e.to_string()))
            })
            .collect()
    })
}

pub fn scaling_artifacts(
    dim: usize,
    ns: &[usize],
    seeds: &[u64],
    parallel: usize,
    art: &mut Artifacts,
) -> CliResult<f64> {
    if seeds.is_empty() {
        return Err(CliError::Config("seed list must not be empty".into()));
    }
    let samples = scaling_samples(dim, ns, seeds, parallel)?;
    let slope = scaling_slope(&samples).map_err(|e| CliError::Config(e.to_string()))?;
    let mut csv = String::from("n,seed,route_length\n");
    for s in &samples {
        writeln!(csv, "{},{},{:?}", s.n, s.seed, s.route_length).unwrap();
    }
    art.add("scaling.csv", csv);
    let theory = 1.0 - 1.0 / dim as f64;
    art.add(
        "scaling_fit.txt",
        format!(
            "dim {dim}\nslope {slope:.6}\nreference 1 - 1/d = {theory:.6}\nsamples {}\n",
            samples.len()
        ),
    );
    Ok(slope)
}
