//! Trace persistence, run summaries and plot exports.
//!
//! A trace file is line-delimited JSON. The first line is a [`TraceHeader`]
//! carrying `schema_version`; every following line is one [`TraceRecord`].
//! Records are appended one per training step and flushed as they are
//! written, so a reader may tail the file while a run is in progress.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{total_variation, ArmRegistry};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub policy: String,
    pub arms: Vec<String>,
    pub instance_counts: Vec<u64>,
    pub batch_size: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub step: u64,
    /// Distribution the step's batch was drawn from.
    pub probabilities: Vec<f64>,
    /// EMA estimates after any reward round at this step.
    pub q: Vec<f64>,
    /// Raw rewards; present only on reward-round steps.
    pub rewards: Option<Vec<f64>>,
    pub learning_rate: f64,
    /// Examples drawn per arm up to and including this step.
    pub cumulative_counts: Vec<u64>,
    pub wall_time_ms: u64,
}

/// Append-only destination for trace records.
pub trait TraceSink {
    fn append(&mut self, record: TraceRecord) -> Result<()>;
}

fn check_order(last: Option<u64>, record: &TraceRecord) -> Result<()> {
    match last {
        Some(prev) if record.step <= prev => Err(Error::invalid(format!(
            "trace step {} is not after last step {prev}",
            record.step
        ))),
        _ => Ok(()),
    }
}

/// Writes a trace file.
pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
    last_step: Option<u64>,
}

impl TraceWriter {
    /// Creates (truncating) `path` and writes the header line.
    pub fn create(path: impl AsRef<Path>, header: &TraceHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut writer = Self {
            path,
            out: BufWriter::new(file),
            last_step: None,
        };
        writer.write_line(header)?;
        Ok(writer)
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let line = serde_json::to_string(value)
            .map_err(|e| Error::invalid(format!("cannot encode trace line: {e}")))?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl TraceSink for TraceWriter {
    fn append(&mut self, record: TraceRecord) -> Result<()> {
        check_order(self.last_step, &record)?;
        self.write_line(&record)?;
        self.last_step = Some(record.step);
        Ok(())
    }
}

/// In-memory trace with the same ordering contract as [`TraceWriter`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryTrace {
    pub records: Vec<TraceRecord>,
}

impl TraceSink for MemoryTrace {
    fn append(&mut self, record: TraceRecord) -> Result<()> {
        check_order(self.records.last().map(|r| r.step), &record)?;
        self.records.push(record);
        Ok(())
    }
}

impl<S: TraceSink + ?Sized> TraceSink for &mut S {
    fn append(&mut self, record: TraceRecord) -> Result<()> {
        (**self).append(record)
    }
}

/// Fans records out to two sinks.
pub struct Tee<A, B>(pub A, pub B);

impl<A: TraceSink, B: TraceSink> TraceSink for Tee<A, B> {
    fn append(&mut self, record: TraceRecord) -> Result<()> {
        self.0.append(record.clone())?;
        self.1.append(record)
    }
}

/// Parses a trace from any line source.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    let mut lines = reader.lines().enumerate();
    let header_line = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::Trace {
            line: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Trace {
                line: 1,
                message: "empty trace".into(),
            })
        }
    };
    let header: TraceHeader = serde_json::from_str(&header_line).map_err(|e| Error::Trace {
        line: 1,
        message: e.to_string(),
    })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Trace {
            line: 1,
            message: format!("unsupported schema_version {}", header.schema_version),
        });
    }
    let mut records: Vec<TraceRecord> = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::Trace {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Trace {
            line: i + 1,
            message: e.to_string(),
        })?;
        check_order(records.last().map(|r| r.step), &record).map_err(|e| Error::Trace {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok((header, records))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(BufReader::new(file))
}

/// Aggregate view of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Expected loss per arm at the end of the run; filled in by the runner.
    pub final_losses: Vec<f64>,
    pub final_mean_loss: f64,
    /// Examples drawn per arm divided by the arm's instance count.
    pub coverage_ratio: Vec<f64>,
    /// Population variance of `coverage_ratio`.
    pub coverage_variance: f64,
    /// Mean total-variation distance between consecutive distributions.
    pub mean_step_tv: f64,
    /// Time-averaged total-variation distance from the uniform distribution.
    pub mean_tv_from_uniform: f64,
    pub config_hash: String,
    pub seed: u64,
}

impl RunSummary {
    pub fn with_final_losses(mut self, losses: Vec<f64>) -> Self {
        self.final_mean_loss = if losses.is_empty() {
            0.0
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        self.final_losses = losses;
        self
    }
}

pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Coverage and volatility statistics of a nonempty, step-ordered trace.
pub fn summarize(trace: &[TraceRecord], registry: &ArmRegistry) -> Result<RunSummary> {
    let last = trace
        .last()
        .ok_or_else(|| Error::invalid("cannot summarize an empty trace"))?;
    let k = registry.len();
    if let Some(bad) = trace
        .iter()
        .find(|r| r.probabilities.len() != k || r.cumulative_counts.len() != k)
    {
        return Err(Error::invalid(format!(
            "record at step {} does not have {k} arms",
            bad.step
        )));
    }
    if trace.windows(2).any(|w| w[1].step <= w[0].step) {
        return Err(Error::invalid("trace is not step-ordered"));
    }
    let coverage_ratio: Vec<f64> = last
        .cumulative_counts
        .iter()
        .zip(registry.arms())
        .map(|(&c, arm)| c as f64 / arm.instance_count as f64)
        .collect();
    let mean_step_tv = if trace.len() > 1 {
        trace
            .windows(2)
            .map(|w| total_variation(&w[0].probabilities, &w[1].probabilities))
            .sum::<f64>()
            / (trace.len() - 1) as f64
    } else {
        0.0
    };
    let uniform = vec![1.0 / k as f64; k];
    let mean_tv_from_uniform = trace
        .iter()
        .map(|r| total_variation(&r.probabilities, &uniform))
        .sum::<f64>()
        / trace.len() as f64;
    Ok(RunSummary {
        final_losses: Vec::new(),
        final_mean_loss: 0.0,
        coverage_variance: variance(&coverage_ratio),
        coverage_ratio,
        mean_step_tv,
        mean_tv_from_uniform,
        config_hash: String::new(),
        seed: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ProportionsOverTime,
    /// Cumulative examples drawn per arm.
    InstanceCoverage,
    QOverTime,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [
        PlotKind::ProportionsOverTime,
        PlotKind::InstanceCoverage,
        PlotKind::QOverTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::ProportionsOverTime => "proportions_over_time",
            PlotKind::InstanceCoverage => "instance_coverage",
            PlotKind::QOverTime => "q_over_time",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown plot kind `{s}`")))
    }
}

/// CSV table with header `step,<arm_1>,...,<arm_K>` and one row per record.
pub fn export_plot_data(
    arm_names: &[String],
    trace: &[TraceRecord],
    kind: PlotKind,
) -> Result<String> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::invalid(format!("csv encoding failed: {e}"));
    let header = std::iter::once("step".to_string()).chain(arm_names.iter().cloned());
    out.write_record(header).map_err(to_err)?;
    for r in trace {
        let values: Vec<String> = match kind {
            PlotKind::ProportionsOverTime => r.probabilities.iter().map(f64::to_string).collect(),
            PlotKind::InstanceCoverage => r.cumulative_counts.iter().map(u64::to_string).collect(),
            PlotKind::QOverTime => r.q.iter().map(f64::to_string).collect(),
        };
        if values.len() != arm_names.len() {
            return Err(Error::invalid(format!(
                "record at step {} has {} columns, expected {}",
                r.step,
                values.len(),
                arm_names.len()
            )));
        }
        out.write_record(std::iter::once(r.step.to_string()).chain(values))
            .map_err(to_err)?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv flush failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}
