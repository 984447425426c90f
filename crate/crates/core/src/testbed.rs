//! Synthetic benchmark objectives, their noise models and candidate grids.
//!
//! Every function is exposed in maximization orientation: the classical
//! minimization forms are negated here so downstream code only ever
//! maximizes.

use std::f64::consts::{E, PI};

use crate::domain::BoxDomain;
use crate::error::{input, Result};
use crate::rng::{keyed_normal, keyed_rng};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    Ackley,
    Branin,
    DropWave,
    Griewank,
    Levy,
    /// `−‖x‖²` on `[−1, 1]²`: one obvious optimum.
    Quadratic2D,
    /// Identically zero on `[−1, 1]²`: every design is optimal.
    Constant2D,
}

impl TestFunction {
    pub const ALL: [TestFunction; 7] = [
        TestFunction::Ackley,
        TestFunction::Branin,
        TestFunction::DropWave,
        TestFunction::Griewank,
        TestFunction::Levy,
        TestFunction::Quadratic2D,
        TestFunction::Constant2D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Ackley => "ackley",
            TestFunction::Branin => "branin",
            TestFunction::DropWave => "dropwave",
            TestFunction::Griewank => "griewank",
            TestFunction::Levy => "levy",
            TestFunction::Quadratic2D => "quadratic2d",
            TestFunction::Constant2D => "constant2d",
        }
    }

    /// Case-insensitive lookup by [`name`](Self::name).
    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        Self::ALL.into_iter().find(|f| f.name() == lower)
    }

    pub fn input_dim(self) -> usize {
        match self {
            TestFunction::Levy => 6,
            _ => 2,
        }
    }

    pub fn domain(self) -> BoxDomain {
        let cube = |a: f64, d: usize| BoxDomain::cube(-a, a, d).expect("valid cube");
        match self {
            TestFunction::Ackley => cube(32.768, 2),
            TestFunction::Branin => {
                BoxDomain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).expect("valid box")
            }
            TestFunction::DropWave => cube(5.12, 2),
            TestFunction::Griewank => cube(20.0, 2),
            TestFunction::Levy => cube(5.0, 6),
            TestFunction::Quadratic2D | TestFunction::Constant2D => cube(1.0, 2),
        }
    }

    /// Noise level listed for the function, in function units.
    pub fn default_noise(self) -> f64 {
        match self {
            TestFunction::Ackley | TestFunction::Levy => 1.0,
            TestFunction::Branin => 3.0,
            TestFunction::DropWave | TestFunction::Griewank => 0.01,
            TestFunction::Quadratic2D | TestFunction::Constant2D => 0.01,
        }
    }

    /// Default candidate-grid size.
    pub fn default_grid_count(self) -> usize {
        if self.input_dim() >= 6 {
            4096
        } else {
            1000
        }
    }

    /// Maximum of the (negated) function over its domain.
    pub fn optimum_value(self) -> f64 {
        match self {
            TestFunction::Branin => -0.397_887_357_729_738_1,
            TestFunction::DropWave => 1.0,
            _ => 0.0,
        }
    }

    /// One global maximizer.
    pub fn optimizer(self) -> Vec<f64> {
        match self {
            TestFunction::Branin => vec![PI, 2.275],
            TestFunction::Levy => vec![1.0; 6],
            _ => vec![0.0; 2],
        }
    }

    /// Function value without the domain check.
    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Ackley => {
                let d = x.len() as f64;
                let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
                let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
                -(-20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E)
            }
            TestFunction::Branin => {
                let (x1, x2) = (x[0], x[1]);
                let b = 5.1 / (4.0 * PI * PI);
                let c = 5.0 / PI;
                let t = 1.0 / (8.0 * PI);
                let q = x2 - b * x1 * x1 + c * x1 - 6.0;
                -(q * q + 10.0 * (1.0 - t) * x1.cos() + 10.0)
            }
            TestFunction::DropWave => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                (1.0 + (12.0 * r2.sqrt()).cos()) / (0.5 * r2 + 2.0)
            }
            TestFunction::Griewank => {
                let sum = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let prod: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                -(sum - prod + 1.0)
            }
            TestFunction::Levy => {
                let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
                let d = w.len();
                let head = (PI * w[0]).sin().powi(2);
                let mid: f64 = w[..d - 1]
                    .iter()
                    .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
                    .sum();
                let wd = w[d - 1];
                let tail = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
                -(head + mid + tail)
            }
            TestFunction::Quadratic2D => -(x[0] * x[0] + x[1] * x[1]),
            TestFunction::Constant2D => 0.0,
        }
    }
}

/// Noise-free value in maximization orientation.
pub fn eval_true(f: TestFunction, x: &[f64]) -> Result<f64> {
    f.domain().check(x)?;
    Ok(f.value(x))
}

/// How a listed noise level is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseReading {
    /// The level is a standard deviation.
    #[default]
    StdDev,
    /// The level is a variance.
    Variance,
}

impl NoiseReading {
    pub fn name(self) -> &'static str {
        match self {
            NoiseReading::StdDev => "std_dev",
            NoiseReading::Variance => "variance",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "std_dev" => Some(NoiseReading::StdDev),
            "variance" => Some(NoiseReading::Variance),
            _ => None,
        }
    }
}

/// Additive Gaussian observation noise with a counter-based stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub std_dev: f64,
    pub seed_stream: u64,
}

impl NoiseSpec {
    pub fn new(std_dev: f64, seed_stream: u64) -> Result<Self> {
        if !(std_dev >= 0.0 && std_dev.is_finite()) {
            return input(format!("noise std_dev must be nonnegative, got {std_dev}"));
        }
        Ok(Self {
            std_dev,
            seed_stream,
        })
    }

    /// Noise from a listed `level` under the given reading.
    pub fn from_level(level: f64, reading: NoiseReading, seed_stream: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return input(format!("noise level must be nonnegative, got {level}"));
        }
        let std_dev = match reading {
            NoiseReading::StdDev => level,
            NoiseReading::Variance => level.sqrt(),
        };
        Self::new(std_dev, seed_stream)
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }

    /// The standard-normal draw used at `step`.
    pub fn z(&self, step: u64) -> f64 {
        keyed_normal(self.seed_stream, step)
    }
}

/// `f(x) + σ z`, with `z` keyed by `(noise.seed_stream, step)`.
pub fn observe(f: TestFunction, noise: &NoiseSpec, x: &[f64], step: u64) -> Result<f64> {
    let clean = eval_true(f, x)?;
    if noise.std_dev == 0.0 {
        return Ok(clean);
    }
    Ok(clean + noise.std_dev * noise.z(step))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridKind {
    /// Full lattice with `⌊count^{1/d}⌋` points per axis, endpoints included.
    UniformGrid,
    /// Randomly shifted Halton points.
    #[default]
    LowDiscrepancy,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::UniformGrid => "uniform",
            GridKind::LowDiscrepancy => "low_discrepancy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(GridKind::UniformGrid),
            "low_discrepancy" => Some(GridKind::LowDiscrepancy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    pub points: Vec<Vec<f64>>,
    pub generation: GridKind,
}

impl CandidateGrid {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// Candidate designs for `f`. Uniform lattices may hold fewer than `count`
/// points when `count` is not a perfect `d`-th power.
pub fn make_grid(
    f: TestFunction,
    count: usize,
    generation: GridKind,
    seed: u64,
) -> Result<CandidateGrid> {
    grid_in(&f.domain(), count, generation, seed)
}

/// [`make_grid`] for an arbitrary box.
pub fn grid_in(
    domain: &BoxDomain,
    count: usize,
    generation: GridKind,
    seed: u64,
) -> Result<CandidateGrid> {
    if count < 2 {
        return input(format!("grid count must be at least 2, got {count}"));
    }
    let d = domain.dim();
    let units: Vec<Vec<f64>> = match generation {
        GridKind::UniformGrid => {
            let mut m = (count as f64).powf(1.0 / d as f64).floor() as usize;
            while (m + 1).checked_pow(d as u32).is_some_and(|p| p <= count) {
                m += 1;
            }
            let m = m.max(2);
            let total = m.pow(d as u32);
            (0..total)
                .map(|mut idx| {
                    (0..d)
                        .map(|_| {
                            let k = idx % m;
                            idx /= m;
                            k as f64 / (m - 1) as f64
                        })
                        .collect()
                })
                .collect()
        }
        GridKind::LowDiscrepancy => {
            if d > PRIMES.len() {
                return input(format!(
                    "low-discrepancy grids support up to {} dimensions",
                    PRIMES.len()
                ));
            }
            let mut rng = keyed_rng(seed, 0);
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            (1..=count as u64)
                .map(|i| {
                    (0..d)
                        .map(|k| {
                            let v = radical_inverse(i, PRIMES[k]) + shift[k];
                            v - v.floor()
                        })
                        .collect()
                })
                .collect()
        }
    };
    let points = units
        .iter()
        .map(|u| {
            let mut x = domain.from_unit(u);
            // Guard the box against rounding in the affine map.
            for (k, v) in x.iter_mut().enumerate() {
                *v = v.clamp(domain.lo()[k], domain.hi()[k]);
            }
            x
        })
        .collect();
    Ok(CandidateGrid { points, generation })
}
