//! Batched design-selection policies and successive elimination.
//!
//! All policies act on the alive subset of a finite [`CandidateSet`] and are
//! pure functions of their inputs. Ties are broken towards the lowest
//! candidate index.

use rand::RngCore;

use crate::error::{input, Result};
use crate::rng::keyed_rng;
use crate::surrogate::{CandidatePosterior, JointSampler, PosteriorState};

/// Finite discretization of the design space with an elimination mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    points: Vec<Vec<f64>>,
    alive: Vec<bool>,
}

impl CandidateSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return input("candidate set must contain at least one point");
        }
        let alive = vec![true; points.len()];
        Ok(Self { points, alive })
    }

    /// Build with an explicit mask; at least one point must be alive.
    pub fn with_mask(points: Vec<Vec<f64>>, alive: Vec<bool>) -> Result<Self> {
        if points.len() != alive.len() {
            return input("alive mask length must match the number of points");
        }
        if !alive.iter().any(|a| *a) {
            return input("at least one candidate must be alive");
        }
        Ok(Self { points, alive })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn alive_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.alive[i]).collect()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    fn alive_points(&self) -> (Vec<usize>, Vec<Vec<f64>>) {
        let idx = self.alive_indices();
        let pts = idx.iter().map(|&i| self.points[i].clone()).collect();
        (idx, pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    BatchedTs,
    BatchedUcb,
    Bpe,
    NaiveTs,
    NaiveUcb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::BatchedTs,
        PolicyKind::BatchedUcb,
        PolicyKind::Bpe,
        PolicyKind::NaiveTs,
        PolicyKind::NaiveUcb,
    ];

    /// Short name used in configs and file names.
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::BatchedTs => "tts",
            PolicyKind::BatchedUcb => "tucb",
            PolicyKind::Bpe => "bpe",
            PolicyKind::NaiveTs => "ts",
            PolicyKind::NaiveUcb => "ucb",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Naive kinds select one design per decision.
    pub fn is_batched(self) -> bool {
        !matches!(self, PolicyKind::NaiveTs | PolicyKind::NaiveUcb)
    }
}

/// How the elimination width `η` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRule {
    /// Use the configured `eta` as is.
    Fixed,
    /// `η = β / 2`.
    HalfBeta,
}

/// Multiplier applied to `σ` in UCB scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcbScale {
    /// `μ + √β σ`
    SqrtBeta,
    /// `μ + β σ`
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub beta: f64,
    pub eta: f64,
    pub eta_rule: EtaRule,
    pub ucb_scale: UcbScale,
    pub seed: u64,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            beta: 4.0,
            eta: 1.0,
            eta_rule: EtaRule::Fixed,
            ucb_scale: UcbScale::SqrtBeta,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return input(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return input(format!("eta must be nonnegative, got {}", self.eta));
        }
        Ok(())
    }

    pub fn effective_eta(&self) -> f64 {
        match self.eta_rule {
            EtaRule::Fixed => self.eta,
            EtaRule::HalfBeta => self.beta / 2.0,
        }
    }

    pub fn ucb_width(&self) -> f64 {
        match self.ucb_scale {
            UcbScale::SqrtBeta => self.beta.sqrt(),
            UcbScale::Beta => self.beta,
        }
    }

    /// Select the `batch_index`-th batch. Naive kinds ignore `batch_size`
    /// and return a single design.
    pub fn select(
        &self,
        state: &PosteriorState,
        candidates: &CandidateSet,
        batch_size: usize,
        batch_index: usize,
    ) -> Result<Batch> {
        let size = if self.kind.is_batched() {
            batch_size
        } else {
            1
        };
        let mut batch = match self.kind {
            PolicyKind::BatchedTs | PolicyKind::NaiveTs => {
                let seed = keyed_rng(self.seed, batch_index as u64).next_u64();
                batched_ts(state, candidates, size, seed)?
            }
            PolicyKind::BatchedUcb | PolicyKind::NaiveUcb => {
                batched_ucb_width(state, candidates, size, self.ucb_width())?
            }
            PolicyKind::Bpe => bpe_batch(state, candidates, size)?,
        };
        batch.batch_index = batch_index;
        Ok(batch)
    }
}

/// Designs chosen for one decision epoch, as indices into a [`CandidateSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub members: Vec<usize>,
    pub batch_index: usize,
    pub planned_size: usize,
}

fn check_request(candidates: &CandidateSet, batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return input("batch size must be at least 1");
    }
    if candidates.alive_count() == 0 {
        return input("no alive candidates");
    }
    Ok(())
}

/// Index of the largest score, lowest index on ties.
fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_val {
            best = i;
            best_val = s;
        }
    }
    best
}

/// Batched Thompson sampling: member `j` maximizes the `j`-th independent
/// joint posterior draw over the alive candidates.
pub fn batched_ts(
    state: &PosteriorState,
    candidates: &CandidateSet,
    batch_size: usize,
    seed: u64,
) -> Result<Batch> {
    check_request(candidates, batch_size)?;
    let (idx, pts) = candidates.alive_points();
    let post = state.on_points(&pts)?;
    let all: Vec<usize> = (0..idx.len()).collect();
    let sampler = JointSampler::new(&post, &all)?;
    let members = (0..batch_size)
        .map(|j| idx[argmax(sampler.draw(seed, j as u64))])
        .collect();
    Ok(Batch {
        members,
        batch_index: 0,
        planned_size: batch_size,
    })
}

/// Sequential variance hallucination: conditioning on a picked point without
/// observing it leaves the mean unchanged and shrinks the covariance.
struct Hallucinated<'a> {
    post: &'a CandidatePosterior,
    variance: Vec<f64>,
    updates: Vec<Vec<f64>>,
}

impl<'a> Hallucinated<'a> {
    fn new(post: &'a CandidatePosterior) -> Self {
        Self {
            post,
            variance: post.variance().to_vec(),
            updates: Vec::new(),
        }
    }

    fn condition_on(&mut self, pick: usize) {
        let m = self.post.len();
        let col: Vec<f64> = (0..m)
            .map(|i| {
                self.post.covariance(i, pick)
                    - self.updates.iter().map(|u| u[i] * u[pick]).sum::<f64>()
            })
            .collect();
        let pivot = col[pick];
        if pivot <= 1e-14 {
            self.variance[pick] = 0.0;
            return;
        }
        let scale = pivot.sqrt();
        let u: Vec<f64> = col.iter().map(|c| c / scale).collect();
        for (v, ui) in self.variance.iter_mut().zip(&u) {
            *v = (*v - ui * ui).max(0.0);
        }
        self.variance[pick] = 0.0;
        self.updates.push(u);
    }
}

/// Batched GP-UCB with `μ + √β σ` scores and hallucinated variance updates.
pub fn batched_ucb(
    state: &PosteriorState,
    candidates: &CandidateSet,
    batch_size: usize,
    beta: f64,
) -> Result<Batch> {
    if !(beta >= 0.0) {
        return input(format!("beta must be nonnegative, got {beta}"));
    }
    batched_ucb_width(state, candidates, batch_size, beta.sqrt())
}

/// Batched UCB with an explicit multiplier on `σ`.
pub fn batched_ucb_width(
    state: &PosteriorState,
    candidates: &CandidateSet,
    batch_size: usize,
    width: f64,
) -> Result<Batch> {
    check_request(candidates, batch_size)?;
    let (idx, pts) = candidates.alive_points();
    let post = state.on_points(&pts)?;
    let mut hall = Hallucinated::new(&post);
    let mut members = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let pick = argmax(
            post.mean()
                .iter()
                .zip(&hall.variance)
                .map(|(m, v)| m + width * v.sqrt()),
        );
        members.push(idx[pick]);
        hall.condition_on(pick);
    }
    Ok(Batch {
        members,
        batch_index: 0,
        planned_size: batch_size,
    })
}

/// Pure exploration: repeatedly pick the largest hallucinated variance.
pub fn bpe_batch(
    state: &PosteriorState,
    candidates: &CandidateSet,
    batch_size: usize,
) -> Result<Batch> {
    check_request(candidates, batch_size)?;
    let (idx, pts) = candidates.alive_points();
    let post = state.on_points(&pts)?;
    let mut hall = Hallucinated::new(&post);
    let mut members = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let pick = argmax(hall.variance.iter().copied());
        members.push(idx[pick]);
        hall.condition_on(pick);
    }
    Ok(Batch {
        members,
        batch_index: 0,
        planned_size: batch_size,
    })
}

/// Successive elimination: keep `x` while `μ(x) + ησ(x) ≥ max LCB`.
///
/// Points tying the maximum lower bound survive, so the maximizer of the
/// lower bound is always kept and the alive set never empties.
pub fn eliminate(
    state: &PosteriorState,
    candidates: &CandidateSet,
    eta: f64,
) -> Result<CandidateSet> {
    if !(eta >= 0.0) {
        return input(format!("eta must be nonnegative, got {eta}"));
    }
    let (idx, pts) = candidates.alive_points();
    let post = state.on_points(&pts)?;
    let sd: Vec<f64> = post.variance().iter().map(|v| v.sqrt()).collect();
    let lcb: Vec<f64> = post
        .mean()
        .iter()
        .zip(&sd)
        .map(|(m, s)| m - eta * s)
        .collect();
    let best = argmax(lcb.iter().copied());
    let max_lcb = lcb[best];
    let mut alive = vec![false; candidates.len()];
    for (k, &i) in idx.iter().enumerate() {
        let ucb = post.mean()[k] + eta * sd[k];
        alive[i] = k == best || ucb >= max_lcb;
    }
    CandidateSet::with_mask(candidates.points.clone(), alive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{fit_posterior, Dataset, KernelSpec};

    fn prior(lengthscale: f64) -> PosteriorState {
        let k = KernelSpec::rbf(lengthscale, 1.0).unwrap();
        fit_posterior(&k, 1e-6, &Dataset::new(None)).unwrap()
    }

    fn line(xs: &[f64]) -> CandidateSet {
        CandidateSet::new(xs.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    #[test]
    fn candidate_set_requires_alive_point() {
        assert!(CandidateSet::new(vec![]).is_err());
        assert!(CandidateSet::with_mask(vec![vec![0.0]], vec![false]).is_err());
    }

    #[test]
    fn ts_size_one_matches_naive_selection() {
        let state = prior(0.2);
        let cands = line(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let naive = PolicyConfig {
            seed: 42,
            ..PolicyConfig::new(PolicyKind::NaiveTs)
        };
        let batched = PolicyConfig {
            seed: 42,
            ..PolicyConfig::new(PolicyKind::BatchedTs)
        };
        for b in 0..10 {
            assert_eq!(
                naive.select(&state, &cands, 7, b).unwrap().members,
                batched.select(&state, &cands, 1, b).unwrap().members
            );
        }
    }

    #[test]
    fn ts_is_deterministic() {
        let state = prior(0.2);
        let cands = line(&[0.0, 0.3, 0.6, 0.9]);
        let a = batched_ts(&state, &cands, 6, 17).unwrap();
        assert_eq!(a, batched_ts(&state, &cands, 6, 17).unwrap());
        assert_eq!(a.members.len(), 6);
    }

    #[test]
    fn ts_concentrates_on_dominant_candidate() {
        let k = KernelSpec::rbf(0.01, 1.0).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, y) in [(0.0, 0.0), (0.5, 10.0), (1.0, 0.0)] {
            for _ in 0..20 {
                xs.push(vec![x]);
                ys.push(y);
            }
        }
        let state = fit_posterior(&k, 1e-6, &Dataset::from_parts(None, xs, ys).unwrap()).unwrap();
        let cands = line(&[0.0, 0.5, 1.0]);
        let post = state.on_points(cands.points()).unwrap();
        assert!(post.variance().iter().all(|v| *v < 1e-6));
        let batch = batched_ts(&state, &cands, 5, 3).unwrap();
        assert_eq!(batch.members, vec![1; 5]);
    }

    #[test]
    fn ucb_single_pick_is_gp_ucb() {
        let k = KernelSpec::rbf(0.2, 1.0).unwrap();
        let data = Dataset::from_parts(None, vec![vec![0.1], vec![0.4]], vec![1.0, -0.5]).unwrap();
        let state = fit_posterior(&k, 0.01, &data).unwrap();
        let cands = line(&[0.0, 0.1, 0.2, 0.5, 0.9]);
        let scores: Vec<f64> = cands
            .points()
            .iter()
            .map(|x| {
                let (m, v) = state.predict(x).unwrap();
                m + 2.0 * v.sqrt()
            })
            .collect();
        let expected = argmax(scores);
        assert_eq!(
            batched_ucb(&state, &cands, 1, 4.0).unwrap().members,
            vec![expected]
        );
    }

    #[test]
    fn ucb_zero_beta_repeats_best_mean() {
        let k = KernelSpec::rbf(0.2, 1.0).unwrap();
        let data = Dataset::from_parts(None, vec![vec![0.3]], vec![2.0]).unwrap();
        let state = fit_posterior(&k, 0.01, &data).unwrap();
        let cands = line(&[0.0, 0.3, 0.9]);
        assert_eq!(
            batched_ucb(&state, &cands, 4, 0.0).unwrap().members,
            vec![1; 4]
        );
    }

    #[test]
    fn ucb_hallucination_splits_symmetric_pair() {
        // Far apart under a short lengthscale: zero cross-covariance.
        let state = prior(0.01);
        let cands = line(&[0.0, 1.0]);
        let post = state.on_points(cands.points()).unwrap();
        assert!(post.covariance(0, 1).abs() < 1e-300);
        let mut members = batched_ucb(&state, &cands, 2, 4.0).unwrap().members;
        members.sort_unstable();
        assert_eq!(members, vec![0, 1]);
    }

    #[test]
    fn bpe_walks_through_uncorrelated_prior() {
        let state = prior(0.01);
        let cands = line(&[0.0, 0.5, 1.0]);
        assert_eq!(bpe_batch(&state, &cands, 3).unwrap().members, vec![0, 1, 2]);
    }

    #[test]
    fn bpe_prefers_point_far_from_data() {
        let k = KernelSpec::rbf(0.1, 1.0).unwrap();
        let data = Dataset::from_parts(None, vec![vec![0.0], vec![0.1]], vec![0.0, 0.0]).unwrap();
        let state = fit_posterior(&k, 0.01, &data).unwrap();
        let cands = line(&[0.05, 0.2, 0.9]);
        let sd: Vec<f64> = cands
            .points()
            .iter()
            .map(|x| state.predict(x).unwrap().1)
            .collect();
        assert_eq!(
            bpe_batch(&state, &cands, 1).unwrap().members,
            vec![argmax(sd)]
        );
        assert_eq!(bpe_batch(&state, &cands, 1).unwrap().members, vec![2]);
    }

    #[test]
    fn single_alive_candidate_is_repeated() {
        let state = prior(0.3);
        let cands = CandidateSet::with_mask(
            vec![vec![0.0], vec![0.5], vec![1.0]],
            vec![false, true, false],
        )
        .unwrap();
        assert_eq!(bpe_batch(&state, &cands, 3).unwrap().members, vec![1, 1, 1]);
        assert_eq!(
            batched_ucb(&state, &cands, 2, 4.0).unwrap().members,
            vec![1, 1]
        );
        assert_eq!(
            batched_ts(&state, &cands, 2, 0).unwrap().members,
            vec![1, 1]
        );
    }

    #[test]
    fn zero_batch_is_rejected() {
        let state = prior(0.3);
        assert!(bpe_batch(&state, &line(&[0.0]), 0).is_err());
    }

    #[test]
    fn wide_intervals_keep_everything() {
        let k = KernelSpec::rbf(0.2, 1.0).unwrap();
        let data = Dataset::from_parts(None, vec![vec![0.2], vec![0.7]], vec![3.0, -3.0]).unwrap();
        let state = fit_posterior(&k, 0.01, &data).unwrap();
        let cands = line(&[0.0, 0.2, 0.45, 0.7, 1.0]);
        let out = eliminate(&state, &cands, 1e6).unwrap();
        assert_eq!(out.alive_count(), 5);
    }

    #[test]
    fn clear_gap_eliminates_worse_candidate() {
        // Means 0 and 10 with σ = 0.1: UCB_A = 0.1 < LCB_B = 9.9.
        let k = KernelSpec::rbf(0.01, 1.0).unwrap();
        // Single observation with nugget λ gives σ² = λ/(1+λ) and μ = y/(1+λ).
        let lambda: f64 = 0.01 / 0.99;
        let data = Dataset::from_parts(
            None,
            vec![vec![0.0], vec![1.0]],
            vec![0.0, 10.0 * (1.0 + lambda)],
        )
        .unwrap();
        let state = fit_posterior(&k, lambda, &data).unwrap();
        let (m, v) = state.predict(&[1.0]).unwrap();
        assert!((m - 10.0).abs() < 1e-9 && (v.sqrt() - 0.1).abs() < 1e-9);
        let out = eliminate(&state, &line(&[0.0, 1.0]), 1.0).unwrap();
        assert_eq!(out.alive_mask(), &[false, true]);
    }

    #[test]
    fn max_lcb_point_survives_degenerate_posterior() {
        let k = KernelSpec::rbf(0.01, 1.0).unwrap();
        let data = Dataset::from_parts(None, vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let state = fit_posterior(&k, 1e-9, &data).unwrap();
        let out = eliminate(&state, &line(&[0.0, 1.0]), 0.0).unwrap();
        assert!(out.is_alive(0) && out.is_alive(1));
    }

    #[test]
    fn elimination_only_shrinks() {
        let k = KernelSpec::rbf(0.1, 1.0).unwrap();
        let data = Dataset::from_parts(
            None,
            vec![vec![0.1], vec![0.5], vec![0.9]],
            vec![0.0, 2.0, 0.0],
        )
        .unwrap();
        let state = fit_posterior(&k, 0.01, &data).unwrap();
        let cands = CandidateSet::with_mask(
            (0..11).map(|i| vec![i as f64 / 10.0]).collect(),
            (0..11).map(|i| i != 5).collect(),
        )
        .unwrap();
        let out = eliminate(&state, &cands, 1.0).unwrap();
        assert!(!out.is_alive(5));
        for i in 0..11 {
            assert!(!out.is_alive(i) || cands.is_alive(i));
        }
    }

    #[test]
    fn policy_names_roundtrip() {
        for k in PolicyKind::ALL {
            assert_eq!(PolicyKind::from_name(k.name()), Some(k));
        }
        let cfg = PolicyConfig {
            eta_rule: EtaRule::HalfBeta,
            ..PolicyConfig::new(PolicyKind::Bpe)
        };
        assert_eq!(cfg.effective_eta(), 2.0);
        let cfg = PolicyConfig {
            ucb_scale: UcbScale::Beta,
            ..cfg
        };
        assert_eq!(cfg.ucb_width(), 4.0);
    }
}
