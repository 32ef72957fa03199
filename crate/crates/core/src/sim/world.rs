use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LrSchedule;
use crate::error::{Error, Result};
use crate::mixture::Draw;
use crate::reward::Learner;
use crate::rng::{self, mix64, unit_symmetric, RunRng, Stream};

static NEXT_WORLD_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_WORLD_ID.fetch_add(1, Ordering::Relaxed)
}

/// World parameters as they appear in experiment configs. Anything left
/// unset is drawn from the world's seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub initial_loss: Option<Vec<f64>>,
    pub floor: Option<Vec<f64>>,
    /// Row k, column j: how much training on arm j moves arm k.
    pub transfer: Option<Vec<Vec<f64>>>,
    /// Range of the initial improvable gap `loss - floor`.
    pub gap_range: [f64; 2],
    pub floor_range: [f64; 2],
    /// Off-diagonal transfer entries are drawn from `[0, max_transfer]`.
    pub max_transfer: f64,
    pub noise_scale: f64,
    /// Entropy proxy: `H = entropy_ratio * loss`.
    pub entropy_ratio: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            initial_loss: None,
            floor: None,
            transfer: None,
            gap_range: [1.0, 3.0],
            floor_range: [0.5, 1.5],
            max_transfer: 0.3,
            noise_scale: 0.05,
            entropy_ratio: 0.5,
        }
    }
}

/// Fully resolved, serializable world state. Used for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldState {
    pub seed: u64,
    pub loss: Vec<f64>,
    pub floor: Vec<f64>,
    pub transfer: Vec<Vec<f64>>,
    pub noise_scale: f64,
    pub entropy_ratio: f64,
    pub schedule: LrSchedule,
    /// Position of the noise stream, in 32-bit words.
    pub noise_word_pos: u128,
}

/// Token returned by [`SimWorld`]'s `snapshot`.
#[derive(Debug, Clone)]
pub struct SimCheckpoint {
    world_id: u64,
    serial: u64,
    loss: Vec<f64>,
    noise_rng: RunRng,
}

#[derive(Debug)]
pub struct SimWorld {
    id: u64,
    seed: u64,
    loss: Vec<f64>,
    floor: Vec<f64>,
    transfer: Vec<Vec<f64>>,
    noise_scale: f64,
    entropy_ratio: f64,
    schedule: LrSchedule,
    noise_rng: RunRng,
    next_serial: u64,
    live: Vec<u64>,
}

impl Clone for SimWorld {
    /// A clone is a separate world: it gets its own id and no live snapshots.
    fn clone(&self) -> Self {
        Self {
            id: fresh_id(),
            seed: self.seed,
            loss: self.loss.clone(),
            floor: self.floor.clone(),
            transfer: self.transfer.clone(),
            noise_scale: self.noise_scale,
            entropy_ratio: self.entropy_ratio,
            schedule: self.schedule.clone(),
            noise_rng: self.noise_rng.clone(),
            next_serial: 0,
            live: Vec::new(),
        }
    }
}

fn draw_in<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl SimWorld {
    pub fn new(
        params: &SimParams,
        num_arms: usize,
        schedule: LrSchedule,
        seed: u64,
    ) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::invalid("world needs at least one arm"));
        }
        check_range(params.gap_range, "world.gap_range")?;
        check_range(params.floor_range, "world.floor_range")?;
        if !(0.0..=1.0).contains(&params.max_transfer) {
            return Err(Error::config("world.max_transfer", "must lie in [0, 1]"));
        }
        let mut init = rng::stream(seed, Stream::WorldInit);
        let floor = match &params.floor {
            Some(v) => v.clone(),
            None => (0..num_arms)
                .map(|_| draw_in(&mut init, params.floor_range))
                .collect(),
        };
        let loss = match &params.initial_loss {
            Some(v) => v.clone(),
            None => floor
                .iter()
                .map(|f| f + draw_in(&mut init, params.gap_range))
                .collect(),
        };
        let transfer = match &params.transfer {
            Some(t) => t.clone(),
            None => (0..num_arms)
                .map(|k| {
                    (0..num_arms)
                        .map(|j| {
                            if j == k {
                                1.0
                            } else {
                                draw_in(&mut init, [0.0, params.max_transfer])
                            }
                        })
                        .collect()
                })
                .collect(),
        };
        if loss.len() != num_arms {
            return Err(Error::config(
                "world.initial_loss",
                format!("expected {num_arms} entries, got {}", loss.len()),
            ));
        }
        let state = WorldState {
            seed,
            loss,
            floor,
            transfer,
            noise_scale: params.noise_scale,
            entropy_ratio: params.entropy_ratio,
            schedule,
            noise_word_pos: 0,
        };
        Self::from_state(state)
    }

    /// Rebuilds a world from a checkpointed state, validating every invariant.
    pub fn from_state(state: WorldState) -> Result<Self> {
        let k = state.loss.len();
        if k == 0 {
            return Err(Error::config("world.initial_loss", "must be nonempty"));
        }
        if state.floor.len() != k {
            return Err(Error::config(
                "world.floor",
                format!("expected {k} entries, got {}", state.floor.len()),
            ));
        }
        for i in 0..k {
            let (l, f) = (state.loss[i], state.floor[i]);
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::config(
                    "world.floor",
                    format!("entry {i} must be finite and >= 0"),
                ));
            }
            if !(l.is_finite() && l >= f) {
                return Err(Error::config(
                    "world.initial_loss",
                    format!("entry {i} ({l}) must be finite and >= floor ({f})"),
                ));
            }
        }
        if state.transfer.len() != k || state.transfer.iter().any(|row| row.len() != k) {
            return Err(Error::config(
                "world.transfer",
                format!("must be a {k}x{k} matrix"),
            ));
        }
        if state
            .transfer
            .iter()
            .flatten()
            .any(|t| !(0.0..=1.0).contains(t))
        {
            return Err(Error::config(
                "world.transfer",
                "entries must lie in [0, 1]",
            ));
        }
        for j in 0..k {
            let diag = state.transfer[j][j];
            if (0..k).any(|i| state.transfer[i][j] > diag) {
                return Err(Error::config(
                    "world.transfer",
                    format!("column {j}: diagonal must dominate"),
                ));
            }
        }
        if !(state.noise_scale.is_finite() && state.noise_scale >= 0.0) {
            return Err(Error::config(
                "world.noise_scale",
                "must be finite and >= 0",
            ));
        }
        if !(state.entropy_ratio.is_finite() && state.entropy_ratio > 0.0) {
            return Err(Error::config(
                "world.entropy_ratio",
                "must be finite and > 0",
            ));
        }
        state.schedule.validate()?;
        let mut noise_rng = rng::stream(state.seed, Stream::WorldNoise);
        noise_rng.set_word_pos(state.noise_word_pos);
        Ok(Self {
            id: fresh_id(),
            seed: state.seed,
            loss: state.loss,
            floor: state.floor,
            transfer: state.transfer,
            noise_scale: state.noise_scale,
            entropy_ratio: state.entropy_ratio,
            schedule: state.schedule,
            noise_rng,
            next_serial: 0,
            live: Vec::new(),
        })
    }

    pub fn state(&self) -> WorldState {
        WorldState {
            seed: self.seed,
            loss: self.loss.clone(),
            floor: self.floor.clone(),
            transfer: self.transfer.clone(),
            noise_scale: self.noise_scale,
            entropy_ratio: self.entropy_ratio,
            schedule: self.schedule.clone(),
            noise_word_pos: self.noise_rng.get_word_pos(),
        }
    }

    pub fn num_arms(&self) -> usize {
        self.loss.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Current expected loss per arm.
    pub fn losses(&self) -> &[f64] {
        &self.loss
    }

    pub fn floors(&self) -> &[f64] {
        &self.floor
    }

    pub fn transfer(&self) -> &[Vec<f64>] {
        &self.transfer
    }

    pub fn schedule(&self) -> &LrSchedule {
        &self.schedule
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn mean_loss(&self) -> f64 {
        self.loss.iter().sum::<f64>() / self.loss.len() as f64
    }

    /// Per-example offset in `[-noise_scale, noise_scale)`, fixed for the
    /// lifetime of the world.
    pub fn jitter(&self, draw: Draw) -> f64 {
        if self.noise_scale == 0.0 {
            return 0.0;
        }
        let h = mix64(self.seed ^ mix64((draw.arm as u64) ^ mix64(draw.example)));
        self.noise_scale * unit_symmetric(h)
    }

    fn check_batch(&self, batch: &[Draw]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("batch must be nonempty"));
        }
        if let Some(d) = batch.iter().find(|d| d.arm >= self.loss.len()) {
            return Err(Error::invalid(format!(
                "batch references unknown arm {}",
                d.arm
            )));
        }
        Ok(())
    }

    /// Deterministic part of a step: every element from arm j pulls every
    /// arm k toward its floor by `lr * T[k][j] * gap_k / B`.
    fn descend(&mut self, batch: &[Draw], lr: f64) {
        let b = batch.len() as f64;
        for d in batch {
            let j = d.arm;
            for k in 0..self.loss.len() {
                let gap = self.loss[k] - self.floor[k];
                let next = self.loss[k] - lr * self.transfer[k][j] * gap / b;
                self.loss[k] = next.max(self.floor[k]);
            }
        }
    }

    /// One training step at learning rate `lr`, with process noise.
    pub fn train_with_rate(&mut self, batch: &[Draw], lr: f64) -> Result<()> {
        self.check_batch(batch)?;
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be finite and >= 0, got {lr}"
            )));
        }
        if lr == 0.0 {
            return Ok(());
        }
        self.descend(batch, lr);
        if self.noise_scale > 0.0 {
            let scale = self.noise_scale * lr;
            for k in 0..self.loss.len() {
                let z: f64 = self.noise_rng.sample(StandardNormal);
                self.loss[k] = (self.loss[k] + scale * z).max(self.floor[k]);
            }
        }
        Ok(())
    }

    /// One training step at the scheduled rate for step `t`.
    pub fn train_step_at(&mut self, batch: &[Draw], t: u64) -> Result<()> {
        let lr = self.schedule.rate(t);
        self.train_with_rate(batch, lr)
    }
}

fn check_range([lo, hi]: [f64; 2], key: &str) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be a finite range with 0 <= lo <= hi, got [{lo}, {hi}]"),
        ))
    }
}

impl Learner for SimWorld {
    type Checkpoint = SimCheckpoint;

    fn snapshot(&mut self) -> SimCheckpoint {
        let serial = self.next_serial;
        self.next_serial += 1;
        self.live.push(serial);
        SimCheckpoint {
            world_id: self.id,
            serial,
            loss: self.loss.clone(),
            noise_rng: self.noise_rng.clone(),
        }
    }

    /// Restoring a checkpoint also invalidates every checkpoint taken after it.
    fn restore(&mut self, checkpoint: SimCheckpoint) -> Result<()> {
        if checkpoint.world_id != self.id {
            return Err(Error::invalid("checkpoint belongs to a different world"));
        }
        let pos = self
            .live
            .iter()
            .rposition(|&s| s == checkpoint.serial)
            .ok_or_else(|| Error::invalid("stale checkpoint"))?;
        self.live.truncate(pos);
        self.loss = checkpoint.loss;
        self.noise_rng = checkpoint.noise_rng;
        Ok(())
    }

    fn loss(&self, batch: &[Draw]) -> Vec<f64> {
        batch
            .iter()
            .map(|&d| (self.loss[d.arm] + self.jitter(d)).max(0.0))
            .collect()
    }

    /// Noise-free step; optimizer state does not exist in the simulator.
    fn virtual_step(&mut self, batch: &[Draw], learning_rate: f64) -> Result<()> {
        self.check_batch(batch)?;
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::Learner(format!(
                "invalid learning rate {learning_rate}"
            )));
        }
        self.descend(batch, learning_rate);
        Ok(())
    }

    fn train_step(&mut self, batch: &[Draw], learning_rate: f64) -> Result<()> {
        self.train_with_rate(batch, learning_rate)
    }

    fn entropy(&self, batch: &[Draw]) -> Option<Vec<f64>> {
        Some(
            self.loss(batch)
                .into_iter()
                .map(|l| self.entropy_ratio * l)
                .collect(),
        )
    }
}
