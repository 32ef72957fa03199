//! Experiment configuration and the run / compare / sweep drivers.
//!
//! Configs are TOML with strict key checking:
//!
//! ```toml
//! seed = 7
//!
//! [bandit]
//! beta = 4.0
//! gamma = 0.3
//! alpha = 0.95
//! update_interval = 50
//! batch_size = 128
//! # total_steps defaults to ceil(epochs * total_instances / batch_size)
//! epochs = 2.0
//!
//! [policy]
//! variant = "dynamix"     # dynamix_no_prior | full_coverage | uniform | static
//! reward = "delta_loss"   # delta_entropy
//!
//! [registry]
//! builtin = "tulu_v2"     # or: arms = [{ name = "a", count = 10 }, ...]
//!
//! [world]
//! noise_scale = 0.05
//!
//! [schedule]
//! base_rate = 0.01
//! warmup_fraction = 0.03
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mixture::{sample_batch, Arm, ArmRegistry, BanditConfig};
use crate::policy::{PolicyKind, PolicyState, PolicyVariant};
use crate::reward::{lookahead_round, Learner, RewardKind};
use crate::rng::{self, Stream};
use crate::sim::{make_tulu_registry, make_tulu_registry_merged, LrSchedule, SimParams, SimWorld};
use crate::trace::{
    summarize, MemoryTrace, RunSummary, Tee, TraceHeader, TraceRecord, TraceSink, TraceWriter,
    SCHEMA_VERSION,
};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DEFAULT_EPOCHS: f64 = 2.0;
/// Simulator learning rate; dimensionless in simulator units.
pub const DEFAULT_BASE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditSection {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub update_interval: u64,
    pub batch_size: usize,
    pub total_steps: Option<u64>,
    pub epochs: f64,
    pub num_arms: Option<usize>,
}

impl Default for BanditSection {
    fn default() -> Self {
        Self {
            beta: BanditConfig::DEFAULT_BETA,
            gamma: BanditConfig::DEFAULT_GAMMA,
            alpha: BanditConfig::DEFAULT_ALPHA,
            epsilon: BanditConfig::DEFAULT_EPSILON,
            update_interval: BanditConfig::DEFAULT_UPDATE_INTERVAL,
            batch_size: BanditConfig::DEFAULT_BATCH_SIZE,
            total_steps: None,
            epochs: DEFAULT_EPOCHS,
            num_arms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Dynamix,
    DynamixNoPrior,
    FullCoverage,
    Uniform,
    Static,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub variant: VariantName,
    pub reward: RewardKind,
    /// Mixture weights; required for `static`, rejected otherwise.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinRegistry {
    /// 16 arms, science bundle split into its constituents.
    TuluV2,
    /// 11 arms, science bundle as one arm.
    TuluV2Merged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmEntry {
    pub name: String,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrySection {
    pub builtin: Option<BuiltinRegistry>,
    pub arms: Option<Vec<ArmEntry>>,
    /// Explicit prior for inline arms; defaults to normalized counts.
    pub prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub base_rate: f64,
    pub warmup_fraction: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            base_rate: DEFAULT_BASE_RATE,
            warmup_fraction: LrSchedule::DEFAULT_WARMUP_FRACTION,
        }
    }
}

/// Experiment config file, as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub label: Option<String>,
    pub output_dir: Option<PathBuf>,
    /// Record elapsed milliseconds in traces. Off by default so that traces
    /// are byte-reproducible.
    pub record_wall_time: bool,
    pub bandit: BanditSection,
    pub policy: PolicySection,
    pub registry: RegistrySection,
    pub world: SimParams,
    pub schedule: ScheduleSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            Error::config(key, e.into_inner().message().trim().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Validates every section and builds the concrete experiment.
    pub fn resolve(&self) -> Result<Experiment> {
        let registry = self.resolve_registry()?;
        let k = registry.len();
        let b = &self.bandit;
        if let Some(n) = b.num_arms {
            if n != k {
                return Err(Error::config(
                    "bandit.num_arms",
                    format!("is {n} but the registry has {k} arms"),
                ));
            }
        }
        if b.batch_size == 0 {
            return Err(Error::config("bandit.batch_size", "must be >= 1"));
        }
        let total_steps = match b.total_steps {
            Some(t) => t,
            None => {
                if !(b.epochs.is_finite() && b.epochs >= 0.0) {
                    return Err(Error::config("bandit.epochs", "must be finite and >= 0"));
                }
                (b.epochs * registry.total_instances() as f64 / b.batch_size as f64).ceil() as u64
            }
        };
        let bandit = BanditConfig {
            beta: b.beta,
            gamma: b.gamma,
            alpha: b.alpha,
            epsilon: b.epsilon,
            total_steps,
            update_interval: b.update_interval,
            batch_size: b.batch_size,
            num_arms: k,
        };
        bandit.validate()?;

        let variant = match (self.policy.variant, &self.policy.weights) {
            (VariantName::Static, Some(w)) => PolicyVariant::Static(w.clone()),
            (VariantName::Static, None) => {
                return Err(Error::config(
                    "policy.weights",
                    "required for the static policy",
                ));
            }
            (_, Some(_)) => {
                return Err(Error::config(
                    "policy.weights",
                    "only allowed for the static policy",
                ));
            }
            (VariantName::Dynamix, None) => PolicyVariant::Dynamix,
            (VariantName::DynamixNoPrior, None) => PolicyVariant::DynamixNoPrior,
            (VariantName::FullCoverage, None) => PolicyVariant::FullCoverage,
            (VariantName::Uniform, None) => PolicyVariant::Uniform,
        };
        let policy = PolicyKind::new(variant).with_reward(self.policy.reward);

        let schedule = LrSchedule::new(
            self.schedule.base_rate,
            self.schedule.warmup_fraction,
            total_steps,
        )?;

        let exp = Experiment {
            label: self
                .label
                .clone()
                .unwrap_or_else(|| policy.variant.name().to_string()),
            seed: self.seed,
            record_wall_time: self.record_wall_time,
            bandit,
            policy,
            registry,
            world: self.world.clone(),
            schedule,
        };
        // Surface policy and world errors now rather than mid-run.
        PolicyState::new(exp.policy.clone(), &exp.registry, &exp.bandit)?;
        exp.build_world(exp.seed)?;
        Ok(exp)
    }

    fn resolve_registry(&self) -> Result<ArmRegistry> {
        let r = &self.registry;
        let key = |e: Error, k: &str| match e {
            Error::InvalidArgument(m) => Error::config(k, m),
            other => other,
        };
        match (&r.builtin, &r.arms) {
            (Some(_), Some(_)) => Err(Error::config(
                "registry",
                "set either `builtin` or `arms`, not both",
            )),
            (Some(_) | None, None) => {
                if r.prior.is_some() {
                    return Err(Error::config(
                        "registry.prior",
                        "only allowed with inline `arms`",
                    ));
                }
                Ok(match r.builtin.unwrap_or(BuiltinRegistry::TuluV2) {
                    BuiltinRegistry::TuluV2 => make_tulu_registry(),
                    BuiltinRegistry::TuluV2Merged => make_tulu_registry_merged(),
                })
            }
            (None, Some(entries)) => {
                let arms: Vec<Arm> = entries
                    .iter()
                    .map(|e| Arm::new(e.name.clone(), e.count))
                    .collect();
                match &r.prior {
                    Some(prior) => {
                        ArmRegistry::new(arms, prior.clone()).map_err(|e| key(e, "registry.prior"))
                    }
                    None => ArmRegistry::proportional(arms).map_err(|e| key(e, "registry.arms")),
                }
            }
        }
    }
}

/// A validated, ready-to-run experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub label: String,
    pub seed: u64,
    pub record_wall_time: bool,
    pub bandit: BanditConfig,
    pub policy: PolicyKind,
    pub registry: ArmRegistry,
    pub world: SimParams,
    pub schedule: LrSchedule,
}

impl Experiment {
    /// SHA-256 over everything that influences the run except the seed.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            bandit: &'a BanditConfig,
            policy: &'a PolicyKind,
            registry: &'a ArmRegistry,
            world: &'a SimParams,
            schedule: &'a LrSchedule,
        }
        let bytes = serde_json::to_vec(&Hashed {
            bandit: &self.bandit,
            policy: &self.policy,
            registry: &self.registry,
            world: &self.world,
            schedule: &self.schedule,
        })
        .expect("experiment is serializable");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn build_world(&self, seed: u64) -> Result<SimWorld> {
        SimWorld::new(
            &self.world,
            self.registry.len(),
            self.schedule.clone(),
            seed,
        )
    }

    pub fn trace_header(&self) -> TraceHeader {
        TraceHeader {
            schema_version: SCHEMA_VERSION,
            policy: self.policy.variant.name().to_string(),
            arms: self.registry.names(),
            instance_counts: self.registry.instance_counts(),
            batch_size: self.bandit.batch_size,
            seed: self.seed,
            config_hash: self.config_hash(),
        }
    }
}

/// Drives the scheduling loop for any learner.
///
/// Per step `t = 1..=T`: sample a batch from the policy's distribution,
/// train on it, and when `t` is a multiple of the update interval run a
/// look-ahead round and update the policy. One record per step goes to
/// `sink`.
pub struct Scheduler<'a, L: Learner> {
    pub learner: &'a mut L,
    pub registry: &'a ArmRegistry,
    pub bandit: &'a BanditConfig,
    pub schedule: &'a LrSchedule,
    pub policy: PolicyState,
    pub seed: u64,
    pub record_wall_time: bool,
}

impl<L: Learner> Scheduler<'_, L> {
    pub fn run<S: TraceSink>(mut self, sink: &mut S) -> Result<PolicyState> {
        let k = self.registry.len();
        let mut train_rng = rng::stream(self.seed, Stream::Training);
        let mut reward_rng = rng::stream(self.seed, Stream::RewardBatches);
        let mut counts = vec![0u64; k];
        let started = Instant::now();
        let reward_kind: RewardKind = self.policy.kind().reward;
        for t in 1..=self.bandit.total_steps {
            let dist = self.policy.next_distribution().clone();
            let batch = sample_batch(&dist, self.registry, self.bandit.batch_size, &mut train_rng)?;
            for d in &batch {
                counts[d.arm] += 1;
            }
            let lr = self.schedule.rate(t);
            self.learner.train_step(&batch, lr)?;

            let mut rewards = None;
            if self.policy.kind().is_dynamic() && self.bandit.is_update_step(t) {
                let mut q = self.policy.q().clone();
                let reports = lookahead_round(
                    self.learner,
                    self.registry,
                    &mut q,
                    self.bandit,
                    reward_kind,
                    lr,
                    t,
                    &mut reward_rng,
                )?;
                self.policy.on_reward_round(&reports, self.bandit)?;
                rewards = Some(reports.iter().map(|r| r.reward).collect());
            }

            sink.append(TraceRecord {
                step: t,
                probabilities: dist.into_vec(),
                q: self.policy.q().q.clone(),
                rewards,
                learning_rate: lr,
                cumulative_counts: counts.clone(),
                wall_time_ms: if self.record_wall_time {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            })?;
        }
        Ok(self.policy)
    }
}

/// Runs `exp` against a fresh simulator, streaming records into `sink`.
pub fn run_with_sink<S: TraceSink>(exp: &Experiment, sink: &mut S) -> Result<RunSummary> {
    let mut world = exp.build_world(exp.seed)?;
    let policy = PolicyState::new(exp.policy.clone(), &exp.registry, &exp.bandit)?;
    let initial = policy.next_distribution().clone();
    let mut memory = MemoryTrace::default();
    Scheduler {
        learner: &mut world,
        registry: &exp.registry,
        bandit: &exp.bandit,
        schedule: &exp.schedule,
        policy,
        seed: exp.seed,
        record_wall_time: exp.record_wall_time,
    }
    .run(&mut Tee(&mut memory, sink))?;

    let mut summary = if memory.records.is_empty() {
        let k = exp.registry.len();
        let uniform = vec![1.0 / k as f64; k];
        RunSummary {
            final_losses: Vec::new(),
            final_mean_loss: 0.0,
            coverage_ratio: vec![0.0; k],
            coverage_variance: 0.0,
            mean_step_tv: 0.0,
            mean_tv_from_uniform: crate::mixture::total_variation(initial.probs(), &uniform),
            config_hash: String::new(),
            seed: 0,
        }
    } else {
        summarize(&memory.records, &exp.registry)?
    };
    summary.config_hash = exp.config_hash();
    summary.seed = exp.seed;
    Ok(summary.with_final_losses(world.losses().to_vec()))
}

/// Result of [`run`]: the summary plus the full in-memory trace.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

/// Runs `exp` in memory.
pub fn run(exp: &Experiment) -> Result<RunOutcome> {
    let mut trace = MemoryTrace::default();
    let summary = run_with_sink(exp, &mut trace)?;
    Ok(RunOutcome {
        summary,
        header: exp.trace_header(),
        records: trace.records,
    })
}

/// Runs `exp`, writing `trace.jsonl` and `summary.json` into `dir`.
pub fn run_to_dir(exp: &Experiment, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut writer = TraceWriter::create(dir.join(TRACE_FILE), &exp.trace_header())?;
    let summary = run_with_sink(exp, &mut writer)?;
    let summary_path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub policy: String,
    pub final_mean_loss: f64,
    pub coverage_variance: f64,
    pub mean_step_tv: f64,
    pub summary: RunSummary,
}

/// Runs every experiment on an identically seeded world.
pub fn compare(experiments: &[Experiment], seed: u64) -> Result<Vec<ComparisonRow>> {
    let first = experiments
        .first()
        .ok_or_else(|| Error::invalid("compare needs at least one config"))?;
    for (i, e) in experiments.iter().enumerate().skip(1) {
        let mismatch = if e.registry != first.registry {
            Some("registry")
        } else if e.world != first.world {
            Some("world")
        } else if e.schedule != first.schedule {
            Some("schedule")
        } else if e.bandit.total_steps != first.bandit.total_steps {
            Some("bandit.total_steps")
        } else {
            None
        };
        if let Some(field) = mismatch {
            return Err(Error::invalid(format!(
                "config #{} differs from config #0 in `{field}`",
                i
            )));
        }
    }
    experiments
        .par_iter()
        .map(|e| {
            let summary = run(&e.with_seed(seed))?.summary;
            Ok(ComparisonRow {
                label: e.label.clone(),
                policy: e.policy.variant.name().to_string(),
                final_mean_loss: summary.final_mean_loss,
                coverage_variance: summary.coverage_variance,
                mean_step_tv: summary.mean_step_tv,
                summary,
            })
        })
        .collect()
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<24} {:<18} {:>16} {:>18} {:>14}\n",
        "label", "policy", "final_mean_loss", "coverage_variance", "mean_step_tv"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<24} {:<18} {:>16.6} {:>18.6} {:>14.8}\n",
            r.label, r.policy, r.final_mean_loss, r.coverage_variance, r.mean_step_tv
        ));
    }
    out
}

/// Hyperparameter grid; omitted axes keep the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub beta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub update_interval: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub update_interval: u64,
}

impl GridSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text)
            .map_err(|e| Error::config("<grid>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = format!("grid.{}", e.path());
            Error::config(key, e.into_inner().message().trim().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Cartesian product in beta, gamma, alpha, update_interval order.
    pub fn points(&self, base: &BanditConfig) -> Result<Vec<GridPoint>> {
        fn axis<T: Copy>(values: &Option<Vec<T>>, default: T, key: &str) -> Result<Vec<T>> {
            match values {
                Some(v) if v.is_empty() => {
                    Err(Error::config(format!("grid.{key}"), "must not be empty"))
                }
                Some(v) => Ok(v.clone()),
                None => Ok(vec![default]),
            }
        }
        let betas = axis(&self.beta, base.beta, "beta")?;
        let gammas = axis(&self.gamma, base.gamma, "gamma")?;
        let alphas = axis(&self.alpha, base.alpha, "alpha")?;
        let intervals = axis(
            &self.update_interval,
            base.update_interval,
            "update_interval",
        )?;
        let mut points =
            Vec::with_capacity(betas.len() * gammas.len() * alphas.len() * intervals.len());
        for &beta in &betas {
            for &gamma in &gammas {
                for &alpha in &alphas {
                    for &update_interval in &intervals {
                        points.push(GridPoint {
                            beta,
                            gamma,
                            alpha,
                            update_interval,
                        });
                    }
                }
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub point_index: usize,
    pub point: GridPoint,
    pub seed: u64,
    /// `Err` holds the reason an invalid point was skipped.
    pub result: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub point_index: usize,
    pub point: GridPoint,
    pub runs: usize,
    pub mean_final_loss: f64,
    pub std_final_loss: f64,
    pub mean_step_tv: f64,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
    pub points: Vec<PointStats>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (grid point, seed) pair. Invalid points are skipped, logged,
/// and reported in the outcome.
pub fn sweep(base: &Experiment, grid: &GridSpec, seeds: &[u64]) -> Result<SweepOutcome> {
    if seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one seed"));
    }
    let points = grid.points(&base.bandit)?;
    let prepared: Vec<(usize, GridPoint, std::result::Result<Experiment, String>)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut e = base.clone();
            e.bandit.beta = p.beta;
            e.bandit.gamma = p.gamma;
            e.bandit.alpha = p.alpha;
            e.bandit.update_interval = p.update_interval;
            let checked = e
                .bandit
                .validate()
                .map(|_| e)
                .map_err(|err| err.to_string());
            if let Err(reason) = &checked {
                log::warn!("skipping grid point {i} ({p:?}): {reason}");
            }
            (i, *p, checked)
        })
        .collect();
    let jobs: Vec<(
        usize,
        GridPoint,
        u64,
        &std::result::Result<Experiment, String>,
    )> = prepared
        .iter()
        .flat_map(|(i, p, e)| seeds.iter().map(move |&s| (*i, *p, s, e)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .into_par_iter()
        .map(|(point_index, point, seed, exp)| {
            let result = match exp {
                Ok(e) => Ok(run(&e.with_seed(seed))?.summary),
                Err(reason) => Err(format!("skipped: {reason}")),
            };
            Ok(SweepRun {
                point_index,
                point,
                seed,
                result,
            })
        })
        .collect::<Result<_>>()?;
    let points = prepared
        .iter()
        .map(|(i, p, e)| {
            let mine: Vec<&SweepRun> = runs.iter().filter(|r| r.point_index == *i).collect();
            let losses: Vec<f64> = mine
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .map(|s| s.final_mean_loss)
                .collect();
            let tvs: Vec<f64> = mine
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .map(|s| s.mean_step_tv)
                .collect();
            let (mean, std) = mean_std(&losses);
            PointStats {
                point_index: *i,
                point: *p,
                runs: losses.len(),
                mean_final_loss: mean,
                std_final_loss: std,
                mean_step_tv: mean_std(&tvs).0,
                skipped: e.as_ref().err().cloned(),
            }
        })
        .collect();
    Ok(SweepOutcome { runs, points })
}

pub fn format_sweep(outcome: &SweepOutcome) -> String {
    let mut out = format!(
        "{:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>16} {:>14}  {}\n",
        "point",
        "beta",
        "gamma",
        "alpha",
        "interval",
        "seed",
        "final_mean_loss",
        "mean_step_tv",
        "status"
    );
    for r in &outcome.runs {
        let p = &r.point;
        let (loss, tv, status) = match &r.result {
            Ok(s) => (
                format!("{:.6}", s.final_mean_loss),
                format!("{:.8}", s.mean_step_tv),
                "ok".to_string(),
            ),
            Err(reason) => ("-".into(), "-".into(), reason.clone()),
        };
        out.push_str(&format!(
            "{:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>16} {:>14}  {}\n",
            r.point_index, p.beta, p.gamma, p.alpha, p.update_interval, r.seed, loss, tv, status
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "{:>5} {:>8} {:>8} {:>8} {:>8} {:>6} {:>16} {:>16} {:>14}\n",
        "point",
        "beta",
        "gamma",
        "alpha",
        "interval",
        "runs",
        "mean_final_loss",
        "std_final_loss",
        "mean_step_tv"
    ));
    for s in &outcome.points {
        let p = &s.point;
        out.push_str(&format!(
            "{:>5} {:>8} {:>8} {:>8} {:>8} {:>6} {:>16.6} {:>16.6} {:>14.8}\n",
            s.point_index,
            p.beta,
            p.gamma,
            p.alpha,
            p.update_interval,
            s.runs,
            s.mean_final_loss,
            s.std_final_loss,
            s.mean_step_tv
        ));
    }
    out
}
