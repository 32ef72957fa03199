//! Mixture probability law and categorical sampling over arms.
//!
//! All probability functions are pure. Sampling is deterministic given the
//! state of the supplied RNG.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for probability-vector sum checks.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Scalar hyperparameters of the scheduling loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    /// Exploitation sharpness.
    pub beta: f64,
    /// Uniformity factor: weight of the uniform floor.
    pub gamma: f64,
    /// EMA smoothing factor.
    pub alpha: f64,
    /// Reward denominator stabilizer.
    pub epsilon: f64,
    pub total_steps: u64,
    pub update_interval: u64,
    pub batch_size: usize,
    pub num_arms: usize,
}

impl BanditConfig {
    pub const DEFAULT_BETA: f64 = 4.0;
    pub const DEFAULT_GAMMA: f64 = 0.3;
    pub const DEFAULT_ALPHA: f64 = 0.95;
    pub const DEFAULT_EPSILON: f64 = 1e-8;
    pub const DEFAULT_UPDATE_INTERVAL: u64 = 50;
    pub const DEFAULT_BATCH_SIZE: usize = 128;

    /// Default hyperparameters for `num_arms` arms over `total_steps` steps.
    pub fn with_defaults(num_arms: usize, total_steps: u64) -> Self {
        Self {
            beta: Self::DEFAULT_BETA,
            gamma: Self::DEFAULT_GAMMA,
            alpha: Self::DEFAULT_ALPHA,
            epsilon: Self::DEFAULT_EPSILON,
            total_steps,
            update_interval: Self::DEFAULT_UPDATE_INTERVAL.min(total_steps.max(1)),
            batch_size: Self::DEFAULT_BATCH_SIZE,
            num_arms,
        }
    }

    /// Checks every field invariant. Errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::config(
                "bandit.beta",
                format!("must be finite and >= 0, got {}", self.beta),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(
                "bandit.gamma",
                format!("must lie in [0, 1], got {}", self.gamma),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(
                "bandit.alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config(
                "bandit.epsilon",
                format!("must be finite and > 0, got {}", self.epsilon),
            ));
        }
        if self.update_interval == 0 {
            return Err(Error::config("bandit.update_interval", "must be >= 1"));
        }
        // total_steps = 0 is the degenerate (empty) run and is allowed.
        if self.total_steps > 0 && self.update_interval > self.total_steps {
            return Err(Error::config(
                "bandit.update_interval",
                format!(
                    "must not exceed total_steps ({} > {})",
                    self.update_interval, self.total_steps
                ),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("bandit.batch_size", "must be >= 1"));
        }
        if self.num_arms == 0 {
            return Err(Error::config("bandit.num_arms", "must be >= 1"));
        }
        Ok(())
    }

    /// True when step `t` (1-based) triggers a reward round.
    pub fn is_update_step(&self, t: u64) -> bool {
        t > 0 && t % self.update_interval == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    pub instance_count: u64,
}

impl Arm {
    pub fn new(name: impl Into<String>, instance_count: u64) -> Self {
        Self {
            name: name.into(),
            instance_count,
        }
    }
}

/// The arms of the bandit (datasets) and their prior mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmRegistry {
    arms: Vec<Arm>,
    prior: Vec<f64>,
}

impl ArmRegistry {
    /// Builds a registry with an explicit prior.
    pub fn new(arms: Vec<Arm>, prior: Vec<f64>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::invalid("registry must contain at least one arm"));
        }
        let mut seen = HashSet::with_capacity(arms.len());
        for arm in &arms {
            if arm.instance_count == 0 {
                return Err(Error::invalid(format!(
                    "arm `{}` has zero instances",
                    arm.name
                )));
            }
            if !seen.insert(arm.name.as_str()) {
                return Err(Error::invalid(format!("duplicate arm name `{}`", arm.name)));
            }
        }
        if prior.len() != arms.len() {
            return Err(Error::invalid(format!(
                "prior has {} entries but registry has {} arms",
                prior.len(),
                arms.len()
            )));
        }
        check_probability_vector(&prior, "prior")?;
        Ok(Self { arms, prior })
    }

    /// Builds a registry whose prior is proportional to instance counts.
    pub fn proportional(arms: Vec<Arm>) -> Result<Self> {
        let total: u64 = arms.iter().map(|a| a.instance_count).sum();
        if total == 0 {
            // Let `new` produce the precise diagnostic.
            return Self::new(arms, Vec::new());
        }
        let prior = arms
            .iter()
            .map(|a| a.instance_count as f64 / total as f64)
            .collect();
        Self::new(arms, prior)
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm(&self, k: usize) -> &Arm {
        &self.arms[k]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn names(&self) -> Vec<String> {
        self.arms.iter().map(|a| a.name.clone()).collect()
    }

    pub fn instance_counts(&self) -> Vec<u64> {
        self.arms.iter().map(|a| a.instance_count).collect()
    }

    pub fn total_instances(&self) -> u64 {
        self.arms.iter().map(|a| a.instance_count).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.arms.iter().position(|a| a.name == name)
    }

    /// Same arms, uniform prior.
    pub fn with_uniform_prior(&self) -> Self {
        let k = self.arms.len();
        Self {
            arms: self.arms.clone(),
            prior: vec![1.0 / k as f64; k],
        }
    }
}

/// EMA reward estimates, one per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QState {
    pub q: Vec<f64>,
    /// Training step at which `q` was last written.
    pub step: u64,
}

impl QState {
    pub fn new(num_arms: usize) -> Self {
        Self {
            q: vec![0.0; num_arms],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// A validated sampling distribution over arms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureDistribution {
    p: Vec<f64>,
}

impl MixtureDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("distribution must have at least one entry"));
        }
        check_probability_vector(&p, "distribution")?;
        Ok(Self { p })
    }

    pub fn uniform(num_arms: usize) -> Self {
        Self {
            p: vec![1.0 / num_arms as f64; num_arms],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    /// Total-variation distance to another distribution of the same size.
    pub fn total_variation(&self, other: &Self) -> f64 {
        total_variation(&self.p, &other.p)
    }
}

/// Half the L1 distance between two vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if let Some((k, v)) = p
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::invalid(format!(
            "{what}[{k}] = {v} is not a finite nonnegative value"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::invalid(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::invalid(format!("{what}[{k}] is not finite"))),
        None => Ok(()),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "beta must be finite and >= 0, got {beta}"
        )))
    }
}

/// Plain Boltzmann law: `softmax(beta * q)`, max-shift stabilized.
pub fn boltzmann_probs(q: &[f64], beta: f64) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(Error::invalid("q must be nonempty"));
    }
    check_finite(q, "q")?;
    check_beta(beta)?;
    let scaled: Vec<f64> = q.iter().map(|v| beta * v).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Boltzmann law scaled by a prior: `exp(beta q_k) prior_k / sum_j exp(beta q_j) prior_j`.
///
/// Arms with zero prior get probability zero. The shift is taken over the
/// prior's support only so that zero-prior arms cannot force underflow.
pub fn prior_scaled_probs(q: &[f64], prior: &[f64], beta: f64) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(Error::invalid("q must be nonempty"));
    }
    if q.len() != prior.len() {
        return Err(Error::invalid(format!(
            "q has {} entries but prior has {}",
            q.len(),
            prior.len()
        )));
    }
    check_finite(q, "q")?;
    check_beta(beta)?;
    if let Some(k) = prior.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid(format!(
            "prior[{k}] must be finite and >= 0"
        )));
    }
    let max = q
        .iter()
        .zip(prior)
        .filter(|(_, &p)| p > 0.0)
        .map(|(v, _)| beta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::invalid("prior is all zero"));
    }
    let weights: Vec<f64> = q
        .iter()
        .zip(prior)
        .map(|(v, &p)| {
            if p > 0.0 {
                (beta * v - max).exp() * p
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Final sampling law: prior-scaled Boltzmann mixed with a `gamma / K` floor.
pub fn mixture_probs(q: &[f64], prior: &[f64], cfg: &BanditConfig) -> Result<MixtureDistribution> {
    if !(0.0..=1.0).contains(&cfg.gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1], got {}",
            cfg.gamma
        )));
    }
    let scaled = prior_scaled_probs(q, prior, cfg.beta)?;
    let k = scaled.len() as f64;
    let floor = cfg.gamma / k;
    let p = scaled
        .into_iter()
        .map(|s| (1.0 - cfg.gamma) * s + floor)
        .collect();
    Ok(MixtureDistribution { p })
}

/// One sampled training example: an arm and an index into that arm's data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Draw {
    pub arm: usize,
    pub example: u64,
}

/// Inverse-CDF sampler over a fixed arm order.
#[derive(Debug, Clone)]
pub struct CdfSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl CdfSampler {
    pub fn new(dist: &MixtureDistribution) -> Self {
        let mut acc = 0.0;
        let cumulative = dist
            .p
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = dist.p.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    /// First arm whose cumulative mass exceeds `u`.
    pub fn index_for(&self, u: f64) -> usize {
        // Cumulative sums may fall short of 1 by rounding; such draws go to
        // the last arm with positive mass.
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.last_positive)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(rng.random::<f64>())
    }
}

/// Draws one arm index with probability `p_k`.
pub fn sample_arm<R: Rng + ?Sized>(dist: &MixtureDistribution, rng: &mut R) -> usize {
    CdfSampler::new(dist).sample(rng)
}

/// Draws `batch_size` (arm, example) pairs. For each element the arm is drawn
/// first, then an example uniformly with replacement from that arm.
pub fn sample_batch<R: Rng + ?Sized>(
    dist: &MixtureDistribution,
    registry: &ArmRegistry,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Draw>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    if dist.len() != registry.len() {
        return Err(Error::invalid(format!(
            "distribution has {} arms, registry has {}",
            dist.len(),
            registry.len()
        )));
    }
    let sampler = CdfSampler::new(dist);
    Ok((0..batch_size)
        .map(|_| {
            let arm = sampler.sample(rng);
            let example = rng.random_range(0..registry.arm(arm).instance_count);
            Draw { arm, example }
        })
        .collect())
}

/// Draws `batch_size` examples uniformly with replacement from a single arm.
pub fn sample_from_arm<R: Rng + ?Sized>(
    registry: &ArmRegistry,
    arm: usize,
    batch_size: usize,
    rng: &mut R,
) -> Vec<Draw> {
    let count = registry.arm(arm).instance_count;
    (0..batch_size)
        .map(|_| Draw {
            arm,
            example: rng.random_range(0..count),
        })
        .collect()
}
