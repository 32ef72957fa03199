//! Mixture policies behind a single state type.
//!
//! The dynamic variants follow the bandit law with the registry prior
//! (`Dynamix`) or a uniform prior (`DynamixNoPrior`). The static variants
//! never change their distribution and ignore rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{mixture_probs, ArmRegistry, BanditConfig, MixtureDistribution, QState};
use crate::reward::{RewardKind, RewardReport};

/// Tolerance for user-supplied static weight vectors before renormalization.
const STATIC_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    Dynamix,
    DynamixNoPrior,
    /// Proportional to dataset size, i.e. the registry prior.
    FullCoverage,
    Uniform,
    Static(Vec<f64>),
}

impl PolicyVariant {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyVariant::Dynamix => "dynamix",
            PolicyVariant::DynamixNoPrior => "dynamix_no_prior",
            PolicyVariant::FullCoverage => "full_coverage",
            PolicyVariant::Uniform => "uniform",
            PolicyVariant::Static(_) => "static",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyKind {
    pub variant: PolicyVariant,
    /// Only meaningful for the dynamic variants.
    pub reward: RewardKind,
}

impl PolicyKind {
    pub fn new(variant: PolicyVariant) -> Self {
        Self {
            variant,
            reward: RewardKind::DeltaLoss,
        }
    }

    pub fn with_reward(mut self, reward: RewardKind) -> Self {
        self.reward = reward;
        self
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(
            self.variant,
            PolicyVariant::Dynamix | PolicyVariant::DynamixNoPrior
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    kind: PolicyKind,
    q: QState,
    /// Prior the dynamic law is anchored to.
    anchor: Vec<f64>,
    current: MixtureDistribution,
}

impl PolicyState {
    pub fn new(kind: PolicyKind, registry: &ArmRegistry, cfg: &BanditConfig) -> Result<Self> {
        let k = registry.len();
        if cfg.num_arms != k {
            return Err(Error::invalid(format!(
                "config has {} arms, registry has {k}",
                cfg.num_arms
            )));
        }
        let q = QState::new(k);
        let (anchor, current) = match &kind.variant {
            PolicyVariant::Dynamix => {
                let anchor = registry.prior().to_vec();
                let current = mixture_probs(&q.q, &anchor, cfg)?;
                (anchor, current)
            }
            PolicyVariant::DynamixNoPrior => {
                let anchor = vec![1.0 / k as f64; k];
                let current = mixture_probs(&q.q, &anchor, cfg)?;
                (anchor, current)
            }
            PolicyVariant::FullCoverage => {
                let prior = registry.prior().to_vec();
                (prior.clone(), MixtureDistribution::new(prior)?)
            }
            PolicyVariant::Uniform => (vec![1.0 / k as f64; k], MixtureDistribution::uniform(k)),
            PolicyVariant::Static(weights) => {
                let p = normalize_static(weights, k)?;
                (p.clone(), MixtureDistribution::new(p)?)
            }
        };
        Ok(Self {
            kind,
            q,
            anchor,
            current,
        })
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn q(&self) -> &QState {
        &self.q
    }

    /// Sampling distribution for the upcoming batch.
    pub fn next_distribution(&self) -> &MixtureDistribution {
        &self.current
    }

    /// Folds a full reward round into the state. Static policies ignore it.
    pub fn on_reward_round(&mut self, reports: &[RewardReport], cfg: &BanditConfig) -> Result<()> {
        if !self.kind.is_dynamic() {
            return Ok(());
        }
        let k = self.q.len();
        let mut seen = vec![false; k];
        for r in reports {
            if r.arm >= k {
                return Err(Error::invalid(format!("report for unknown arm {}", r.arm)));
            }
            if std::mem::replace(&mut seen[r.arm], true) {
                return Err(Error::invalid(format!(
                    "duplicate report for arm {}",
                    r.arm
                )));
            }
            if !r.q_after.is_finite() {
                return Err(Error::invalid(format!("non-finite q for arm {}", r.arm)));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("missing report for arm {missing}")));
        }
        let mut q = self.q.clone();
        for r in reports {
            q.q[r.arm] = r.q_after;
            q.step = q.step.max(r.step);
        }
        self.current = mixture_probs(&q.q, &self.anchor, cfg)?;
        self.q = q;
        Ok(())
    }
}

fn normalize_static(weights: &[f64], k: usize) -> Result<Vec<f64>> {
    if weights.len() != k {
        return Err(Error::config(
            "policy.weights",
            format!("expected {k} entries, got {}", weights.len()),
        ));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::config(
            "policy.weights",
            "entries must be finite and >= 0",
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > STATIC_SUM_TOLERANCE {
        return Err(Error::config(
            "policy.weights",
            format!("must sum to 1, got {sum}"),
        ));
    }
    let mut p: Vec<f64> = weights.iter().map(|w| w / sum).collect();
    // Push any residual rounding onto the largest entry.
    let residual = 1.0 - p.iter().sum::<f64>();
    if let Some(imax) = (0..k).max_by(|&a, &b| p[a].total_cmp(&p[b])) {
        p[imax] += residual;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Arm;

    fn registry() -> ArmRegistry {
        ArmRegistry::proportional(vec![
            Arm::new("big", 80),
            Arm::new("mid", 15),
            Arm::new("small", 5),
        ])
        .unwrap()
    }

    fn cfg() -> BanditConfig {
        BanditConfig::with_defaults(3, 1000)
    }

    fn reports(q_after: &[f64]) -> Vec<RewardReport> {
        q_after
            .iter()
            .enumerate()
            .map(|(arm, &q)| RewardReport {
                arm,
                pre_losses: vec![1.0],
                post_losses: vec![1.0],
                reward: q,
                q_after: q,
                step: 50,
            })
            .collect()
    }

    #[test]
    fn uniform_sixteen() {
        let arms = (0..16).map(|i| Arm::new(format!("d{i}"), 10 + i)).collect();
        let reg = ArmRegistry::proportional(arms).unwrap();
        let s = PolicyState::new(
            PolicyKind::new(PolicyVariant::Uniform),
            &reg,
            &BanditConfig::with_defaults(16, 10),
        )
        .unwrap();
        assert!(s.next_distribution().probs().iter().all(|&p| p == 0.0625));
    }

    #[test]
    fn full_coverage_is_prior() {
        let s = PolicyState::new(
            PolicyKind::new(PolicyVariant::FullCoverage),
            &registry(),
            &cfg(),
        )
        .unwrap();
        assert_eq!(s.next_distribution().probs(), registry().prior());
    }

    #[test]
    fn dynamix_initial_is_floored_prior() {
        let s =
            PolicyState::new(PolicyKind::new(PolicyVariant::Dynamix), &registry(), &cfg()).unwrap();
        let expected: Vec<f64> = registry().prior().iter().map(|p| 0.7 * p + 0.1).collect();
        for (a, b) in s.next_distribution().probs().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn no_prior_starts_uniform() {
        let s = PolicyState::new(
            PolicyKind::new(PolicyVariant::DynamixNoPrior),
            &registry(),
            &cfg(),
        )
        .unwrap();
        for p in s.next_distribution().probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn static_policies_ignore_rewards() {
        for variant in [
            PolicyVariant::Uniform,
            PolicyVariant::FullCoverage,
            PolicyVariant::Static(vec![0.2, 0.3, 0.5]),
        ] {
            let mut s = PolicyState::new(PolicyKind::new(variant), &registry(), &cfg()).unwrap();
            let before = s.clone();
            s.on_reward_round(&reports(&[0.9, -0.4, 0.1]), &cfg())
                .unwrap();
            assert_eq!(s, before);
        }
    }

    #[test]
    fn equal_rewards_keep_distribution() {
        let mut s =
            PolicyState::new(PolicyKind::new(PolicyVariant::Dynamix), &registry(), &cfg()).unwrap();
        let before = s.next_distribution().clone();
        s.on_reward_round(&reports(&[0.37, 0.37, 0.37]), &cfg())
            .unwrap();
        for (a, b) in s.next_distribution().probs().iter().zip(before.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_reward_raises_probability() {
        let mut s =
            PolicyState::new(PolicyKind::new(PolicyVariant::Dynamix), &registry(), &cfg()).unwrap();
        let before = s.next_distribution().probs()[2];
        s.on_reward_round(&reports(&[0.0, 0.0, 0.5]), &cfg())
            .unwrap();
        assert!(s.next_distribution().probs()[2] > before);
        assert_eq!(s.q().q, vec![0.0, 0.0, 0.5]);
        assert_eq!(s.q().step, 50);
    }

    #[test]
    fn incomplete_or_duplicate_reports_rejected() {
        let mut s =
            PolicyState::new(PolicyKind::new(PolicyVariant::Dynamix), &registry(), &cfg()).unwrap();
        let before = s.clone();
        let mut r = reports(&[0.1, 0.2, 0.3]);
        r.pop();
        assert!(s.on_reward_round(&r, &cfg()).is_err());
        let mut r = reports(&[0.1, 0.2, 0.3]);
        r[2].arm = 1;
        assert!(s.on_reward_round(&r, &cfg()).is_err());
        let mut r = reports(&[0.1, 0.2, 0.3]);
        r[0].arm = 7;
        assert!(s.on_reward_round(&r, &cfg()).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn static_weights_validated() {
        let bad = |w: Vec<f64>| {
            PolicyState::new(
                PolicyKind::new(PolicyVariant::Static(w)),
                &registry(),
                &cfg(),
            )
            .is_err()
        };
        assert!(bad(vec![0.5, 0.5]));
        assert!(bad(vec![0.5, 0.6, 0.1]));
        assert!(bad(vec![-0.1, 0.6, 0.5]));
        let s = PolicyState::new(
            PolicyKind::new(PolicyVariant::Static(vec![0.1, 0.2, 0.7])),
            &registry(),
            &cfg(),
        )
        .unwrap();
        assert!((s.next_distribution().probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn arm_count_mismatch_rejected() {
        assert!(PolicyState::new(
            PolicyKind::new(PolicyVariant::Uniform),
            &registry(),
            &BanditConfig::with_defaults(4, 10)
        )
        .is_err());
    }
}
