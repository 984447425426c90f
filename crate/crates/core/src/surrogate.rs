//! Gaussian-process regression on a fixed kernel.
//!
//! The posterior is fitted by a Cholesky factorization of `K + λI` where `λ`
//! is the nugget. When the training data carries a domain box, inputs are
//! mapped to the unit cube before any kernel evaluation, so lengthscales are
//! expressed in unit-cube coordinates.
//!
//! Joint draws over a finite candidate set factor the full posterior
//! covariance, adding diagonal jitter from `1e-10` up to `1e-4` (factor 10 per
//! attempt) when the matrix is numerically singular.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::domain::BoxDomain;
use crate::error::{input, Error, Result};
use crate::rng::{keyed_rng, normal_vec};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
/// Negative posterior variance tolerated (and clamped to zero) as round-off.
const VARIANCE_SLACK: f64 = 1e-10;

/// Smoothness of a Matérn kernel with a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(MaternNu::Half),
            1.5 => Ok(MaternNu::ThreeHalves),
            2.5 => Ok(MaternNu::FiveHalves),
            _ => input(format!(
                "unsupported Matérn smoothness {nu}; expected 0.5, 1.5 or 2.5"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Rbf,
    Matern(MaternNu),
}

/// A stationary kernel with fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
    output_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64, output_scale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return input(format!("lengthscale must be positive, got {lengthscale}"));
        }
        if !(output_scale > 0.0 && output_scale.is_finite()) {
            return input(format!("output scale must be positive, got {output_scale}"));
        }
        Ok(Self {
            family,
            lengthscale,
            output_scale,
        })
    }

    pub fn rbf(lengthscale: f64, output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, lengthscale, output_scale)
    }

    pub fn matern(nu: MaternNu, lengthscale: f64, output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern(nu), lengthscale, output_scale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Kernel value without dimension checks.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let l = self.lengthscale;
        let shape = match self.family {
            KernelFamily::Rbf => (-sq / (2.0 * l * l)).exp(),
            KernelFamily::Matern(nu) => {
                let r = sq.sqrt() / l;
                match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let s = 3f64.sqrt() * r;
                        (1.0 + s) * (-s).exp()
                    }
                    MaternNu::FiveHalves => {
                        let s = 5f64.sqrt() * r;
                        (1.0 + s + s * s / 3.0) * (-s).exp()
                    }
                }
            }
        };
        self.output_scale * shape
    }
}

/// `k(x, x')` with a dimension check.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != x_prime.len() {
        return input(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            x_prime.len()
        ));
    }
    Ok(spec.eval_unchecked(x, x_prime))
}

/// Observed designs and their noisy responses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    domain: Option<BoxDomain>,
    points: Vec<Vec<f64>>,
    observations: Vec<f64>,
}

impl Dataset {
    /// An empty dataset; with a domain, points are validated against it and
    /// rescaled to the unit cube for kernel evaluation.
    pub fn new(domain: Option<BoxDomain>) -> Self {
        Self {
            domain,
            points: Vec::new(),
            observations: Vec::new(),
        }
    }

    pub fn from_parts(
        domain: Option<BoxDomain>,
        points: Vec<Vec<f64>>,
        observations: Vec<f64>,
    ) -> Result<Self> {
        if points.len() != observations.len() {
            return input(format!(
                "{} points but {} observations",
                points.len(),
                observations.len()
            ));
        }
        let mut data = Self::new(domain);
        for (x, y) in points.into_iter().zip(observations) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if let Some(d) = &self.domain {
            d.check(&x)?;
        } else if let Some(first) = self.points.first() {
            if first.len() != x.len() {
                return input(format!(
                    "dimension mismatch: {} vs {}",
                    first.len(),
                    x.len()
                ));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return input("design coordinates must be finite");
        }
        self.points.push(x);
        self.observations.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// Same designs with responses replaced.
    pub fn with_observations(&self, observations: Vec<f64>) -> Result<Self> {
        if observations.len() != self.len() {
            return input("replacement observations must match the number of points");
        }
        Ok(Self {
            observations,
            ..self.clone()
        })
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        match &self.domain {
            Some(d) => d.to_unit(x),
            None => x.to_vec(),
        }
    }
}

/// A fitted GP posterior. Immutable once built.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    kernel: KernelSpec,
    nugget: f64,
    data: Dataset,
    inputs: Vec<Vec<f64>>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

/// Fit the posterior of a zero-mean GP with nugget `λ` on `data`.
pub fn fit_posterior(kernel: &KernelSpec, nugget: f64, data: &Dataset) -> Result<PosteriorState> {
    if !(nugget > 0.0 && nugget.is_finite()) {
        return input(format!("nugget must be positive, got {nugget}"));
    }
    if data.observations.iter().any(|y| !y.is_finite()) {
        return input("observations must be finite");
    }
    let inputs: Vec<Vec<f64>> = data.points.iter().map(|x| data.scaled(x)).collect();
    let n = inputs.len();
    if n == 0 {
        return Ok(PosteriorState {
            kernel: *kernel,
            nugget,
            data: data.clone(),
            inputs,
            chol: None,
            alpha: DVector::zeros(0),
        });
    }
    let gram = DMatrix::from_fn(n, n, |i, j| {
        let k = kernel.eval_unchecked(&inputs[i], &inputs[j]);
        if i == j {
            k + nugget
        } else {
            k
        }
    });
    let diag = gram.diagonal();
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::Numerical(format!(
            "Cholesky of the {n}x{n} Gram matrix failed (nugget {nugget:e}, diagonal range [{:e}, {:e}])",
            diag.min(),
            diag.max()
        ))
    })?;
    let alpha = chol.solve(&DVector::from_column_slice(&data.observations));
    Ok(PosteriorState {
        kernel: *kernel,
        nugget,
        data: data.clone(),
        inputs,
        chol: Some(chol),
        alpha,
    })
}

/// Posterior mean and variance at `x`.
pub fn predict(state: &PosteriorState, x: &[f64]) -> Result<(f64, f64)> {
    state.predict(x)
}

impl PosteriorState {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Lower Cholesky factor of `K + λI` (empty for the prior).
    pub fn chol_factor(&self) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.l(),
            None => DMatrix::zeros(0, 0),
        }
    }

    /// `(K + λI)^{-1} y`.
    pub fn alpha(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    fn check_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.data.domain {
            Some(d) => {
                d.check(x)?;
                Ok(d.to_unit(x))
            }
            None => {
                if let Some(first) = self.inputs.first() {
                    if first.len() != x.len() {
                        return input(format!(
                            "dimension mismatch: {} vs {}",
                            first.len(),
                            x.len()
                        ));
                    }
                }
                Ok(x.to_vec())
            }
        }
    }

    fn cross(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|xi| self.kernel.eval_unchecked(u, xi)),
        )
    }

    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let u = self.check_point(x)?;
        let prior = self.kernel.eval_unchecked(&u, &u);
        let Some(chol) = &self.chol else {
            return Ok((0.0, prior));
        };
        let k = self.cross(&u);
        let mean = k.dot(&self.alpha);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("nonsingular factor");
        let var = clamp_variance(prior - v.dot(&v))?;
        Ok((mean, var))
    }

    /// Posterior moments and cross-covariance structure on a finite point set.
    pub fn on_points(&self, points: &[Vec<f64>]) -> Result<CandidatePosterior> {
        let scaled: Vec<Vec<f64>> = points
            .iter()
            .map(|x| self.check_point(x))
            .collect::<Result<_>>()?;
        let m = scaled.len();
        let n = self.inputs.len();
        let (mean, whitened) = match &self.chol {
            None => (vec![0.0; m], DMatrix::zeros(0, m)),
            Some(chol) => {
                let kx = DMatrix::from_fn(n, m, |i, j| {
                    self.kernel.eval_unchecked(&self.inputs[i], &scaled[j])
                });
                let mean = (kx.transpose() * &self.alpha).as_slice().to_vec();
                let v = chol
                    .l_dirty()
                    .solve_lower_triangular(&kx)
                    .expect("nonsingular factor");
                (mean, v)
            }
        };
        let mut variance = Vec::with_capacity(m);
        for j in 0..m {
            let prior = self.kernel.eval_unchecked(&scaled[j], &scaled[j]);
            let col = whitened.column(j);
            variance.push(clamp_variance(prior - col.dot(&col))?);
        }
        Ok(CandidatePosterior {
            kernel: self.kernel,
            scaled,
            mean,
            variance,
            whitened,
        })
    }

    /// `log det(I + λ⁻¹ K)`, the information gain of the observed designs.
    pub fn information_gain(&self) -> f64 {
        match &self.chol {
            None => 0.0,
            Some(c) => {
                let n = self.inputs.len() as f64;
                2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
                    - n * self.nugget.ln()
            }
        }
    }
}

fn clamp_variance(var: f64) -> Result<f64> {
    if var >= 0.0 {
        Ok(var)
    } else if var >= -VARIANCE_SLACK {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "posterior variance {var:e} is negative"
        )))
    }
}

/// Posterior restricted to a finite point set.
#[derive(Debug, Clone)]
pub struct CandidatePosterior {
    kernel: KernelSpec,
    scaled: Vec<Vec<f64>>,
    mean: Vec<f64>,
    variance: Vec<f64>,
    /// `L⁻¹ K(X_train, X_cand)`, one column per point.
    whitened: DMatrix<f64>,
}

impl CandidatePosterior {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn std_dev(&self, i: usize) -> f64 {
        self.variance[i].sqrt()
    }

    /// Posterior covariance between points `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let prior = self.kernel.eval_unchecked(&self.scaled[i], &self.scaled[j]);
        if self.whitened.nrows() == 0 {
            return prior;
        }
        prior - self.whitened.column(i).dot(&self.whitened.column(j))
    }

    /// Joint posterior covariance over the chosen subset of points.
    pub fn joint_covariance(&self, subset: &[usize]) -> DMatrix<f64> {
        let m = subset.len();
        let mut cov = DMatrix::from_fn(m, m, |a, b| {
            self.kernel
                .eval_unchecked(&self.scaled[subset[a]], &self.scaled[subset[b]])
        });
        if self.whitened.nrows() > 0 {
            let cols: Vec<usize> = subset.to_vec();
            let w = self.whitened.select_columns(&cols);
            cov -= w.transpose() * &w;
        }
        cov
    }
}

/// Reusable factorization of the joint posterior on a point subset.
#[derive(Debug, Clone)]
pub struct JointSampler {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl JointSampler {
    /// Factor the joint posterior covariance over `subset` of `posterior`.
    pub fn new(posterior: &CandidatePosterior, subset: &[usize]) -> Result<Self> {
        if subset.is_empty() {
            return input("joint sampling needs at least one point");
        }
        let cov = posterior.joint_covariance(subset);
        let mean = subset.iter().map(|&i| posterior.mean[i]).collect();
        let mut jitter = JITTER_START;
        loop {
            let mut m = cov.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(m) {
                return Ok(Self {
                    mean,
                    factor: c.unpack(),
                    jitter,
                });
            }
            jitter *= 10.0;
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::Numerical(format!(
                    "posterior covariance over {} points not factorizable with jitter up to {JITTER_MAX:e}",
                    subset.len()
                )));
            }
        }
    }

    /// Jitter that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `μ + L z` with `z` drawn from the `(seed, stream)` keyed generator.
    pub fn draw(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = keyed_rng(seed, stream);
        let z = DVector::from_vec(normal_vec(&mut rng, self.mean.len()));
        let lz = &self.factor * z;
        self.mean
            .iter()
            .zip(lz.iter())
            .map(|(m, v)| m + v)
            .collect()
    }
}

/// One joint posterior draw on `points`, reproducible from `seed`.
pub fn sample_joint(state: &PosteriorState, points: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
    let post = state.on_points(points)?;
    let all: Vec<usize> = (0..points.len()).collect();
    Ok(JointSampler::new(&post, &all)?.draw(seed, 0))
}
