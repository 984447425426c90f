//! Sectioned experiment configuration files.
//!
//! Files are TOML with a fixed set of flat sections. Every key is checked:
//! unknown sections, unknown keys, wrong types and unknown enum values are
//! all errors that name the offending `section.key`.

use std::collections::BTreeSet;
use std::path::PathBuf;

use tb_core::harness::{ExperimentConfig, SurrogateConfig};
use tb_core::policies::{EtaRule, PolicyConfig, PolicyKind, UcbScale};
use tb_core::surrogate::{KernelFamily, MaternNu};
use tb_core::testbed::{GridKind, NoiseReading, TestFunction};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Bo,
    Mab,
    Lipschitz,
    Scaling,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bo => "bo",
            ExperimentKind::Mab => "mab",
            ExperimentKind::Lipschitz => "lipschitz",
            ExperimentKind::Scaling => "scaling",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSection {
    pub name: TestFunction,
    pub grid: GridKind,
    pub grid_count: Option<usize>,
    pub grid_seed: u64,
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub beta: f64,
    pub eta: f64,
    pub eta_rule: EtaRule,
    pub ucb_scale: UcbScale,
    /// `None` follows the policy kind's default.
    pub routing: Option<bool>,
    pub elimination: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSection {
    pub horizon: usize,
    pub growth: f64,
    pub initial_batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSection {
    pub level: Option<f64>,
    pub reading: NoiseReading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmsSection {
    pub means: Vec<f64>,
    pub noise_std: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveName {
    Quadratic,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzSection {
    pub objective: ObjectiveName,
    pub dim: usize,
    pub center: Option<Vec<f64>>,
    pub value: f64,
    pub lipschitz: Option<f64>,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSection {
    pub dim: usize,
    pub ns: Vec<usize>,
}

/// A fully validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub parallel: usize,
    /// Absent only for scaling runs.
    pub schedule: Option<ScheduleSection>,
    pub function: Option<FunctionSection>,
    pub policy: Option<PolicySection>,
    pub noise: NoiseSection,
    pub surrogate: SurrogateConfig,
    pub arms: Option<ArmsSection>,
    pub lipschitz: Option<LipschitzSection>,
    pub scaling: Option<ScalingSection>,
    pub output_dir: Option<PathBuf>,
}

fn err<T>(key: &str, msg: impl std::fmt::Display) -> CliResult<T> {
    Err(CliError::Config(format!("`{key}`: {msg}")))
}

/// Key access that remembers which keys were read.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> CliResult<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return err(name, "expected a section"),
        };
        Ok(Self {
            name,
            table,
            used: BTreeSet::new(),
        })
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.used.insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn f64(&mut self, key: &str) -> CliResult<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => err(&self.path(key), "expected a number"),
        }
    }

    fn uint(&mut self, key: &str) -> CliResult<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(_) => err(&self.path(key), "expected a nonnegative integer"),
        }
    }

    fn bool(&mut self, key: &str) -> CliResult<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Boolean(v)) => Ok(Some(*v)),
            Some(_) => err(&self.path(key), "expected true or false"),
        }
    }

    fn string(&mut self, key: &str) -> CliResult<Option<&'a str>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => err(&self.path(key), "expected a string"),
        }
    }

    fn f64_list(&mut self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => err(&self.path(key), "expected a list of numbers"),
                })
                .collect::<CliResult<Vec<f64>>>()
                .map(Some),
            Some(_) => err(&self.path(key), "expected a list of numbers"),
        }
    }

    fn uint_list(&mut self, key: &str) -> CliResult<Option<Vec<u64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                    _ => err(&self.path(key), "expected a list of nonnegative integers"),
                })
                .collect::<CliResult<Vec<u64>>>()
                .map(Some),
            Some(_) => err(&self.path(key), "expected a list of nonnegative integers"),
        }
    }

    fn choice<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> Option<T>,
        allowed: &[&str],
    ) -> CliResult<Option<T>> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) => match parse(s) {
                Some(v) => Ok(Some(v)),
                None => err(
                    &self.path(key),
                    format!(
                        "unknown value `{s}`; expected one of {}",
                        allowed.join(", ")
                    ),
                ),
            },
        }
    }

    fn required<T>(&self, key: &str, value: Option<T>) -> CliResult<T> {
        match value {
            Some(v) => Ok(v),
            None => err(&self.path(key), "missing required key"),
        }
    }

    /// Reject keys that were never read.
    fn finish(self) -> CliResult<()> {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.used.contains(key) {
                    return err(&format!("{}.{key}", self.name), "unknown key");
                }
            }
        }
        Ok(())
    }

    /// Reject the whole section when the experiment kind has no use for it.
    fn forbid(self, kind: ExperimentKind) -> CliResult<()> {
        if self.present() {
            return err(
                self.name,
                format!(
                    "section does not apply to experiment kind `{}`",
                    kind.name()
                ),
            );
        }
        Ok(())
    }
}

const SECTIONS: [&str; 10] = [
    "experiment",
    "function",
    "policy",
    "schedule",
    "noise",
    "surrogate",
    "arms",
    "lipschitz",
    "scaling",
    "output",
];

const KERNELS: [&str; 4] = ["rbf", "matern12", "matern32", "matern52"];

fn kernel_name(f: KernelFamily) -> &'static str {
    match f {
        KernelFamily::Rbf => "rbf",
        KernelFamily::Matern(MaternNu::Half) => "matern12",
        KernelFamily::Matern(MaternNu::ThreeHalves) => "matern32",
        KernelFamily::Matern(MaternNu::FiveHalves) => "matern52",
    }
}

fn kernel_from_name(s: &str) -> Option<KernelFamily> {
    Some(match s {
        "rbf" => KernelFamily::Rbf,
        "matern12" => KernelFamily::Matern(MaternNu::Half),
        "matern32" => KernelFamily::Matern(MaternNu::ThreeHalves),
        "matern52" => KernelFamily::Matern(MaternNu::FiveHalves),
        _ => return None,
    })
}

fn eta_rule_name(r: EtaRule) -> &'static str {
    match r {
        EtaRule::Fixed => "fixed",
        EtaRule::HalfBeta => "half_beta",
    }
}

fn ucb_scale_name(s: UcbScale) -> &'static str {
    match s {
        UcbScale::SqrtBeta => "sqrt_beta",
        UcbScale::Beta => "beta",
    }
}

fn objective_name(o: ObjectiveName) -> &'static str {
    match o {
        ObjectiveName::Quadratic => "quadratic",
        ObjectiveName::Constant => "constant",
    }
}

fn to_usize(key: &str, v: u64) -> CliResult<usize> {
    usize::try_from(v).or_else(|_| err(key, "value too large"))
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let root: Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("malformed file: {e}")))?;
        for key in root.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                return err(
                    key,
                    format!("unknown section; expected one of {}", SECTIONS.join(", ")),
                );
            }
        }

        let mut exp = Section::new(&root, "experiment")?;
        let kind = exp
            .choice(
                "kind",
                |s| match s {
                    "bo" => Some(ExperimentKind::Bo),
                    "mab" => Some(ExperimentKind::Mab),
                    "lipschitz" => Some(ExperimentKind::Lipschitz),
                    "scaling" => Some(ExperimentKind::Scaling),
                    _ => None,
                },
                &["bo", "mab", "lipschitz", "scaling"],
            )?
            .unwrap_or(ExperimentKind::Bo);
        let seeds = match (exp.uint_list("seeds")?, exp.uint("replications")?) {
            (Some(_), Some(_)) => {
                return err(
                    "experiment.seeds",
                    "give either `seeds` or `replications`, not both",
                )
            }
            (Some(s), None) => s,
            (None, Some(n)) => (0..n).collect(),
            (None, None) => vec![0],
        };
        if seeds.is_empty() {
            return err("experiment.seeds", "seed list must not be empty");
        }
        let parallel = to_usize("experiment.parallel", exp.uint("parallel")?.unwrap_or(1))?;
        if parallel == 0 {
            return err("experiment.parallel", "must be at least 1");
        }
        exp.finish()?;

        let sch = Section::new(&root, "schedule")?;
        let schedule = if kind == ExperimentKind::Scaling {
            sch.forbid(kind)?;
            None
        } else {
            Some(parse_schedule(sch)?)
        };
        let horizon = schedule.as_ref().map_or(0, |s| s.horizon);

        let mut out = Section::new(&root, "output")?;
        let output_dir = out.string("dir")?.map(PathBuf::from);
        out.finish()?;

        let mut function = None;
        let mut policy = None;
        let mut noise = NoiseSection {
            level: None,
            reading: NoiseReading::StdDev,
        };
        let mut surrogate = SurrogateConfig::default();
        let mut arms = None;
        let mut lipschitz = None;

        let fun_sec = Section::new(&root, "function")?;
        let pol_sec = Section::new(&root, "policy")?;
        let noise_sec = Section::new(&root, "noise")?;
        let sur_sec = Section::new(&root, "surrogate")?;
        let arms_sec = Section::new(&root, "arms")?;
        let lip_sec = Section::new(&root, "lipschitz")?;
        let scal_sec = Section::new(&root, "scaling")?;
        let mut scaling = None;

        match kind {
            ExperimentKind::Bo => {
                for s in [arms_sec, lip_sec, scal_sec] {
                    s.forbid(kind)?;
                }
                function = Some(parse_function(fun_sec)?);
                policy = Some(parse_policy(pol_sec)?);
                noise = parse_noise(noise_sec)?;
                surrogate = parse_surrogate(sur_sec)?;
            }
            ExperimentKind::Mab => {
                for s in [fun_sec, pol_sec, noise_sec, sur_sec, lip_sec, scal_sec] {
                    s.forbid(kind)?;
                }
                arms = Some(parse_arms(arms_sec, horizon)?);
            }
            ExperimentKind::Lipschitz => {
                for s in [fun_sec, pol_sec, noise_sec, sur_sec, arms_sec, scal_sec] {
                    s.forbid(kind)?;
                }
                lipschitz = Some(parse_lipschitz(lip_sec)?);
            }
            ExperimentKind::Scaling => {
                for s in [fun_sec, pol_sec, noise_sec, sur_sec, arms_sec, lip_sec] {
                    s.forbid(kind)?;
                }
                scaling = Some(parse_scaling(scal_sec)?);
            }
        }

        let cfg = RunConfig {
            kind,
            seeds,
            parallel,
            schedule,
            function,
            policy,
            noise,
            surrogate,
            arms,
            lipschitz,
            scaling,
            output_dir,
        };
        if kind == ExperimentKind::Bo {
            cfg.experiment(cfg.seeds[0])
                .validate()
                .or_else(|e| err("function", e))?;
        }
        Ok(cfg)
    }

    /// The core experiment for one seed of a `bo` run.
    pub fn experiment(&self, seed: u64) -> ExperimentConfig {
        let f = self.function.as_ref().expect("bo config has a function");
        let p = self.policy.as_ref().expect("bo config has a policy");
        self.experiment_for(p.kind, seed, f, p)
    }

    /// Same settings with another policy kind, keeping explicit routing and
    /// elimination choices.
    pub fn experiment_with_policy(&self, kind: PolicyKind, seed: u64) -> ExperimentConfig {
        let f = self.function.as_ref().expect("bo config has a function");
        let p = self.policy.as_ref().expect("bo config has a policy");
        self.experiment_for(kind, seed, f, p)
    }

    fn experiment_for(
        &self,
        kind: PolicyKind,
        seed: u64,
        f: &FunctionSection,
        p: &PolicySection,
    ) -> ExperimentConfig {
        let sch = self.schedule.as_ref().expect("bo config has a schedule");
        let mut cfg = ExperimentConfig::new(f.name, kind, sch.horizon, seed);
        cfg.policy = PolicyConfig {
            kind,
            beta: p.beta,
            eta: p.eta,
            eta_rule: p.eta_rule,
            ucb_scale: p.ucb_scale,
            ..cfg.policy
        };
        if let Some(r) = p.routing {
            cfg.routing = r;
        }
        if let Some(e) = p.elimination {
            cfg.elimination = e;
        }
        cfg.growth = sch.growth;
        cfg.initial_batch = sch.initial_batch;
        cfg.noise_level = self.noise.level;
        cfg.noise_reading = self.noise.reading;
        cfg.grid_kind = f.grid;
        cfg.grid_count = f.grid_count;
        cfg.grid_seed = f.grid_seed;
        cfg.surrogate = self.surrogate;
        cfg.initial = f.initial.clone();
        cfg
    }

    /// Render back to the file format. Parsing the result gives an equal config.
    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        let mut exp = Table::new();
        exp.insert("kind".into(), self.kind.name().into());
        exp.insert(
            "seeds".into(),
            Value::Array(
                self.seeds
                    .iter()
                    .map(|s| Value::Integer(*s as i64))
                    .collect(),
            ),
        );
        exp.insert("parallel".into(), Value::Integer(self.parallel as i64));
        root.insert("experiment".into(), Value::Table(exp));

        if let Some(s) = &self.schedule {
            let mut t = Table::new();
            t.insert("horizon".into(), Value::Integer(s.horizon as i64));
            t.insert("growth".into(), s.growth.into());
            t.insert(
                "initial_batch".into(),
                Value::Integer(s.initial_batch as i64),
            );
            root.insert("schedule".into(), Value::Table(t));
        }

        let floats = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());

        if let Some(f) = &self.function {
            let mut t = Table::new();
            t.insert("name".into(), f.name.name().into());
            t.insert("grid".into(), f.grid.name().into());
            if let Some(c) = f.grid_count {
                t.insert("grid_count".into(), Value::Integer(c as i64));
            }
            t.insert("grid_seed".into(), Value::Integer(f.grid_seed as i64));
            if let Some(x) = &f.initial {
                t.insert("initial".into(), floats(x));
            }
            root.insert("function".into(), Value::Table(t));
        }
        if let Some(p) = &self.policy {
            let mut t = Table::new();
            t.insert("kind".into(), p.kind.name().into());
            t.insert("beta".into(), p.beta.into());
            t.insert("eta".into(), p.eta.into());
            t.insert("eta_rule".into(), eta_rule_name(p.eta_rule).into());
            t.insert("ucb_scale".into(), ucb_scale_name(p.ucb_scale).into());
            if let Some(r) = p.routing {
                t.insert("routing".into(), r.into());
            }
            if let Some(e) = p.elimination {
                t.insert("elimination".into(), e.into());
            }
            root.insert("policy".into(), Value::Table(t));
        }
        if self.kind == ExperimentKind::Bo {
            let mut n = Table::new();
            if let Some(l) = self.noise.level {
                n.insert("level".into(), l.into());
            }
            n.insert("reading".into(), self.noise.reading.name().into());
            root.insert("noise".into(), Value::Table(n));

            let s = &self.surrogate;
            let mut t = Table::new();
            t.insert("kernel".into(), kernel_name(s.family).into());
            if let Some(l) = s.lengthscale {
                t.insert("lengthscale".into(), l.into());
            }
            t.insert("output_scale".into(), s.output_scale.into());
            if let Some(v) = s.nugget {
                t.insert("nugget".into(), v.into());
            }
            t.insert("min_nugget".into(), s.min_nugget.into());
            t.insert("standardize".into(), s.standardize.into());
            root.insert("surrogate".into(), Value::Table(t));
        }
        if let Some(a) = &self.arms {
            let mut t = Table::new();
            t.insert("means".into(), floats(&a.means));
            t.insert("noise_std".into(), a.noise_std.into());
            t.insert("delta".into(), a.delta.into());
            root.insert("arms".into(), Value::Table(t));
        }
        if let Some(l) = &self.lipschitz {
            let mut t = Table::new();
            t.insert("objective".into(), objective_name(l.objective).into());
            t.insert("dim".into(), Value::Integer(l.dim as i64));
            if let Some(c) = &l.center {
                t.insert("center".into(), floats(c));
            }
            t.insert("value".into(), l.value.into());
            if let Some(v) = l.lipschitz {
                t.insert("lipschitz".into(), v.into());
            }
            t.insert("noise_std".into(), l.noise_std.into());
            root.insert("lipschitz".into(), Value::Table(t));
        }
        if let Some(s) = &self.scaling {
            let mut t = Table::new();
            t.insert("dim".into(), Value::Integer(s.dim as i64));
            t.insert(
                "n".into(),
                Value::Array(s.ns.iter().map(|n| Value::Integer(*n as i64)).collect()),
            );
            root.insert("scaling".into(), Value::Table(t));
        }
        if let Some(d) = &self.output_dir {
            let mut t = Table::new();
            t.insert("dir".into(), d.to_string_lossy().into_owned().into());
            root.insert("output".into(), Value::Table(t));
        }
        toml::to_string(&root).expect("tables always serialize")
    }
}

fn parse_schedule(mut s: Section) -> CliResult<ScheduleSection> {
    let horizon = s.uint("horizon")?;
    let horizon = to_usize("schedule.horizon", s.required("horizon", horizon)?)?;
    let growth = s.f64("growth")?.unwrap_or(1.1);
    let initial_batch = to_usize(
        "schedule.initial_batch",
        s.uint("initial_batch")?.unwrap_or(3),
    )?;
    s.finish()?;
    tb_core::harness::build_schedule(horizon, growth, initial_batch)
        .or_else(|e| err("schedule", e))?;
    Ok(ScheduleSection {
        horizon,
        growth,
        initial_batch,
    })
}

fn parse_scaling(mut s: Section) -> CliResult<ScalingSection> {
    let dim = to_usize("scaling.dim", s.uint("dim")?.unwrap_or(2))?;
    if dim == 0 {
        return err("scaling.dim", "must be positive");
    }
    let ns = s
        .uint_list("n")?
        .unwrap_or_else(|| vec![64, 256, 1024, 4096]);
    let ns = ns
        .into_iter()
        .map(|n| to_usize("scaling.n", n))
        .collect::<CliResult<Vec<_>>>()?;
    let distinct: BTreeSet<usize> = ns.iter().copied().collect();
    if ns.contains(&0) || distinct.len() < 2 {
        return err("scaling.n", "need at least two distinct positive sizes");
    }
    s.finish()?;
    Ok(ScalingSection { dim, ns })
}

fn parse_function(mut s: Section) -> CliResult<FunctionSection> {
    let names: Vec<&str> = TestFunction::ALL.iter().map(|f| f.name()).collect();
    let name = s.choice("name", TestFunction::from_name, &names)?;
    let name = s.required("name", name)?;
    let grid = s
        .choice("grid", GridKind::from_name, &["uniform", "low_discrepancy"])?
        .unwrap_or_default();
    let grid_count = match s.uint("grid_count")? {
        Some(c) if c < 2 => return err("function.grid_count", "must be at least 2"),
        Some(c) => Some(to_usize("function.grid_count", c)?),
        None => None,
    };
    let grid_seed = s.uint("grid_seed")?.unwrap_or(0);
    let initial = s.f64_list("initial")?;
    if let Some(x) = &initial {
        if let Err(e) = name.domain().check(x) {
            return err("function.initial", e);
        }
    }
    s.finish()?;
    Ok(FunctionSection {
        name,
        grid,
        grid_count,
        grid_seed,
        initial,
    })
}

fn parse_policy(mut s: Section) -> CliResult<PolicySection> {
    let names: Vec<&str> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
    let kind = s.choice("kind", PolicyKind::from_name, &names)?;
    let kind = s.required("kind", kind)?;
    let beta = s.f64("beta")?.unwrap_or(4.0);
    if !(beta >= 0.0 && beta.is_finite()) {
        return err("policy.beta", "must be a nonnegative number");
    }
    let eta = s.f64("eta")?.unwrap_or(1.0);
    if !(eta >= 0.0 && eta.is_finite()) {
        return err("policy.eta", "must be a nonnegative number");
    }
    let eta_rule = s
        .choice(
            "eta_rule",
            |v| match v {
                "fixed" => Some(EtaRule::Fixed),
                "half_beta" => Some(EtaRule::HalfBeta),
                _ => None,
            },
            &["fixed", "half_beta"],
        )?
        .unwrap_or(EtaRule::Fixed);
    let ucb_scale = s
        .choice(
            "ucb_scale",
            |v| match v {
                "sqrt_beta" => Some(UcbScale::SqrtBeta),
                "beta" => Some(UcbScale::Beta),
                _ => None,
            },
            &["sqrt_beta", "beta"],
        )?
        .unwrap_or(UcbScale::SqrtBeta);
    let routing = s.bool("routing")?;
    let elimination = s.bool("elimination")?;
    s.finish()?;
    Ok(PolicySection {
        kind,
        beta,
        eta,
        eta_rule,
        ucb_scale,
        routing,
        elimination,
    })
}

fn parse_noise(mut s: Section) -> CliResult<NoiseSection> {
    let level = s.f64("level")?;
    if let Some(l) = level {
        if !(l >= 0.0 && l.is_finite()) {
            return err("noise.level", "must be a nonnegative number");
        }
    }
    let reading = s
        .choice("reading", NoiseReading::from_name, &["std_dev", "variance"])?
        .unwrap_or_default();
    s.finish()?;
    Ok(NoiseSection { level, reading })
}

fn parse_surrogate(mut s: Section) -> CliResult<SurrogateConfig> {
    let mut cfg = SurrogateConfig::default();
    if let Some(f) = s.choice("kernel", kernel_from_name, &KERNELS)? {
        cfg.family = f;
    }
    cfg.lengthscale = s.f64("lengthscale")?;
    if let Some(l) = cfg.lengthscale {
        if !(l > 0.0 && l.is_finite()) {
            return err("surrogate.lengthscale", "must be positive");
        }
    }
    if let Some(o) = s.f64("output_scale")? {
        if !(o > 0.0 && o.is_finite()) {
            return err("surrogate.output_scale", "must be positive");
        }
        cfg.output_scale = o;
    }
    cfg.nugget = s.f64("nugget")?;
    if let Some(n) = cfg.nugget {
        if !(n > 0.0 && n.is_finite()) {
            return err("surrogate.nugget", "must be positive");
        }
    }
    if let Some(m) = s.f64("min_nugget")? {
        if !(m > 0.0 && m.is_finite()) {
            return err("surrogate.min_nugget", "must be positive");
        }
        cfg.min_nugget = m;
    }
    if let Some(b) = s.bool("standardize")? {
        cfg.standardize = b;
    }
    s.finish()?;
    Ok(cfg)
}

fn parse_arms(mut s: Section, horizon: usize) -> CliResult<ArmsSection> {
    let means = s.f64_list("means")?;
    let means = s.required("means", means)?;
    if means.len() < 2 {
        return err("arms.means", "need at least two arms");
    }
    if horizon < means.len() {
        return err(
            "schedule.horizon",
            format!("must be at least the number of arms ({})", means.len()),
        );
    }
    let noise_std = s.f64("noise_std")?.unwrap_or(1.0);
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return err("arms.noise_std", "must be a nonnegative number");
    }
    let delta = s
        .f64("delta")?
        .unwrap_or(tb_core::bandit_ext::DEFAULT_DELTA);
    if !(delta > 0.0 && delta < 1.0) {
        return err("arms.delta", "must lie in (0, 1)");
    }
    s.finish()?;
    Ok(ArmsSection {
        means,
        noise_std,
        delta,
    })
}

fn parse_lipschitz(mut s: Section) -> CliResult<LipschitzSection> {
    let objective = s.choice(
        "objective",
        |v| match v {
            "quadratic" => Some(ObjectiveName::Quadratic),
            "constant" => Some(ObjectiveName::Constant),
            _ => None,
        },
        &["quadratic", "constant"],
    )?;
    let objective = s.required("objective", objective)?;
    let dim = to_usize("lipschitz.dim", s.uint("dim")?.unwrap_or(1))?;
    if dim == 0 {
        return err("lipschitz.dim", "must be positive");
    }
    let center = s.f64_list("center")?;
    if let Some(c) = &center {
        if objective != ObjectiveName::Quadratic {
            return err(
                "lipschitz.center",
                "only applies to the quadratic objective",
            );
        }
        if c.len() != dim || c.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return err(
                "lipschitz.center",
                format!("expected {dim} coordinates in [0, 1]"),
            );
        }
    }
    let value = s.f64("value")?.unwrap_or(0.0);
    let lipschitz = s.f64("lipschitz")?;
    if let Some(l) = lipschitz {
        if !(l > 0.0 && l.is_finite()) {
            return err("lipschitz.lipschitz", "must be positive");
        }
    }
    let noise_std = s.f64("noise_std")?.unwrap_or(0.01);
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return err("lipschitz.noise_std", "must be a nonnegative number");
    }
    s.finish()?;
    Ok(LipschitzSection {
        objective,
        dim,
        center,
        value,
        lipschitz,
        noise_std,
    })
}

impl LipschitzSection {
    pub fn environment(&self) -> CliResult<tb_core::bandit_ext::LipschitzEnvironment> {
        use tb_core::bandit_ext::{LipschitzEnvironment, LipschitzObjective};
        let objective = match self.objective {
            ObjectiveName::Quadratic => LipschitzObjective::Quadratic {
                center: self.center.clone().unwrap_or_else(|| vec![0.5; self.dim]),
            },
            ObjectiveName::Constant => LipschitzObjective::Constant(self.value),
        };
        let l = self
            .lipschitz
            .unwrap_or_else(|| objective.lipschitz_bound().max(1.0));
        LipschitzEnvironment::new(objective, self.dim, l, self.noise_std)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}
