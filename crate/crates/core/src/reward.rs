//! The learner contract and one-step look-ahead rewards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{sample_from_arm, ArmRegistry, BanditConfig, Draw, QState};

/// What the scheduler needs from a model.
///
/// `restore(snapshot())` with nothing in between must leave every observable
/// loss unchanged, and `loss`/`entropy` must not mutate state.
pub trait Learner {
    /// Opaque token returned by [`Learner::snapshot`].
    type Checkpoint;

    fn snapshot(&mut self) -> Self::Checkpoint;

    /// Rolls back to `checkpoint`. Stale or foreign tokens are rejected.
    fn restore(&mut self, checkpoint: Self::Checkpoint) -> Result<()>;

    /// Per-example losses, all `>= 0`.
    fn loss(&self, batch: &[Draw]) -> Vec<f64>;

    /// One plain gradient step that bypasses any optimizer state.
    fn virtual_step(&mut self, batch: &[Draw], learning_rate: f64) -> Result<()>;

    /// One permanent optimizer step.
    fn train_step(&mut self, batch: &[Draw], learning_rate: f64) -> Result<()>;

    /// Per-example mean token entropies; `None` if unsupported.
    fn entropy(&self, _batch: &[Draw]) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    #[default]
    DeltaLoss,
    DeltaEntropy,
}

/// Outcome of one arm's look-ahead.
///
/// `pre_losses` / `post_losses` hold the measured reward signal: losses for
/// [`RewardKind::DeltaLoss`], entropies for [`RewardKind::DeltaEntropy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub arm: usize,
    pub pre_losses: Vec<f64>,
    pub post_losses: Vec<f64>,
    pub reward: f64,
    pub q_after: f64,
    pub step: u64,
}

fn relative_decrease(pre: &[f64], post: &[f64], epsilon: f64, what: &str) -> Result<f64> {
    if pre.is_empty() {
        return Err(Error::invalid(format!("{what}: empty batch")));
    }
    if pre.len() != post.len() {
        return Err(Error::invalid(format!(
            "{what}: pre has {} entries, post has {}",
            pre.len(),
            post.len()
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "{what}: epsilon must be > 0, got {epsilon}"
        )));
    }
    if let Some(k) = pre.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!(
            "{what}: pre[{k}] must be finite and >= 0"
        )));
    }
    if let Some(k) = post.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: post[{k}] is not finite")));
    }
    let total: f64 = pre
        .iter()
        .zip(post)
        .map(|(a, b)| (a - b) / (a + epsilon))
        .sum();
    Ok(total / pre.len() as f64)
}

/// Mean relative loss decrease over the batch.
pub fn delta_loss_reward(pre_losses: &[f64], post_losses: &[f64], epsilon: f64) -> Result<f64> {
    relative_decrease(pre_losses, post_losses, epsilon, "delta_loss_reward")
}

/// Mean relative entropy decrease over the batch, same form as [`delta_loss_reward`].
pub fn delta_entropy_reward(
    pre_entropies: &[f64],
    post_entropies: &[f64],
    epsilon: f64,
) -> Result<f64> {
    relative_decrease(
        pre_entropies,
        post_entropies,
        epsilon,
        "delta_entropy_reward",
    )
}

#[inline]
pub fn ema_update(q_k: f64, reward: f64, alpha: f64) -> f64 {
    alpha * q_k + (1.0 - alpha) * reward
}

fn measure<L: Learner>(learner: &L, batch: &[Draw], kind: RewardKind) -> Result<Vec<f64>> {
    match kind {
        RewardKind::DeltaLoss => Ok(learner.loss(batch)),
        RewardKind::DeltaEntropy => learner
            .entropy(batch)
            .ok_or_else(|| Error::invalid("learner does not provide entropies")),
    }
}

/// Runs one look-ahead round over every arm in registry order and folds the
/// rewards into `q`.
///
/// Each arm gets a fresh batch of `cfg.batch_size` examples drawn from `rng`.
/// The learner is snapshotted around every virtual step, so its permanent
/// state is unchanged afterwards. On any failure the learner is restored and
/// `q` is left untouched.
#[allow(clippy::too_many_arguments)]
pub fn lookahead_round<L, R>(
    learner: &mut L,
    registry: &ArmRegistry,
    q: &mut QState,
    cfg: &BanditConfig,
    kind: RewardKind,
    learning_rate: f64,
    step: u64,
    rng: &mut R,
) -> Result<Vec<RewardReport>>
where
    L: Learner,
    R: Rng + ?Sized,
{
    if q.len() != registry.len() {
        return Err(Error::invalid(format!(
            "q has {} entries but registry has {} arms",
            q.len(),
            registry.len()
        )));
    }
    let mut reports = Vec::with_capacity(registry.len());
    for arm in 0..registry.len() {
        let batch = sample_from_arm(registry, arm, cfg.batch_size, rng);
        let pre = measure(learner, &batch, kind)?;
        let token = learner.snapshot();
        if let Err(err) = learner.virtual_step(&batch, learning_rate) {
            learner.restore(token)?;
            return Err(err);
        }
        let post = measure(learner, &batch, kind);
        learner.restore(token)?;
        let post = post?;
        let reward = match kind {
            RewardKind::DeltaLoss => delta_loss_reward(&pre, &post, cfg.epsilon)?,
            RewardKind::DeltaEntropy => delta_entropy_reward(&pre, &post, cfg.epsilon)?,
        };
        reports.push(RewardReport {
            arm,
            pre_losses: pre,
            post_losses: post,
            reward,
            q_after: ema_update(q.q[arm], reward, cfg.alpha),
            step,
        });
    }
    for report in &reports {
        q.q[report.arm] = report.q_after;
    }
    q.step = step;
    Ok(reports)
}

/// Contract checks every [`Learner`] implementation should pass.
///
/// Each function returns a description of the first violation found.
pub mod contract {
    use super::*;

    /// `restore(snapshot())` leaves losses on `probe` bit-identical.
    pub fn round_trip_identity<L: Learner>(learner: &mut L, probe: &[Draw]) -> Result<(), String> {
        let before = learner.loss(probe);
        let token = learner.snapshot();
        learner.restore(token).map_err(|e| e.to_string())?;
        let after = learner.loss(probe);
        bit_equal(&before, &after, "round trip")
    }

    /// Two consecutive `loss` (and `entropy`) calls agree exactly.
    pub fn loss_purity<L: Learner>(learner: &L, probe: &[Draw]) -> Result<(), String> {
        bit_equal(&learner.loss(probe), &learner.loss(probe), "loss purity")?;
        match (learner.entropy(probe), learner.entropy(probe)) {
            (Some(a), Some(b)) => bit_equal(&a, &b, "entropy purity"),
            (None, None) => Ok(()),
            _ => Err("entropy availability changed between calls".into()),
        }
    }

    /// Snapshot, mutate with `mutation`, restore: losses on `probe` are unchanged.
    pub fn mutate_restore<L, F>(learner: &mut L, probe: &[Draw], mutation: F) -> Result<(), String>
    where
        L: Learner,
        F: FnOnce(&mut L) -> Result<()>,
    {
        let before = learner.loss(probe);
        let token = learner.snapshot();
        mutation(learner).map_err(|e| e.to_string())?;
        learner.restore(token).map_err(|e| e.to_string())?;
        bit_equal(&before, &learner.loss(probe), "mutate/restore")
    }

    fn bit_equal(a: &[f64], b: &[f64], what: &str) -> Result<(), String> {
        if a.len() != b.len() {
            return Err(format!("{what}: length {} vs {}", a.len(), b.len()));
        }
        match a
            .iter()
            .zip(b)
            .position(|(x, y)| x.to_bits() != y.to_bits())
        {
            Some(i) => Err(format!(
                "{what}: element {i} changed from {} to {}",
                a[i], b[i]
            )),
            None => Ok(()),
        }
    }
}
