use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynamix_core::experiment::{format_comparison, format_sweep, SUMMARY_FILE, TRACE_FILE};
use dynamix_core::trace::{export_plot_data, read_trace};
use dynamix_core::{
    compare, run_to_dir, sweep, Error, ExperimentConfig, GridSpec, PlotKind, RunSummary,
};

const OUT_DIR_ENV: &str = "DYNAMIX_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "runs";

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dynamix",
    version,
    about = "Bandit data-mixture scheduling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write trace.jsonl and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory. Falls back to the config's output_dir, then
        /// $DYNAMIX_OUT_DIR, then ./runs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several policies on an identically seeded world.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: u64,
    },
    /// Run a hyperparameter grid over several seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Number of seeds, counting up from the config's seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Convert a trace into CSV plot data.
    Export {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        kind: PlotKind,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn format_summary(s: &RunSummary, dir: &Path) -> String {
    format!(
        "trace             {}\nsummary           {}\nseed              {}\nconfig_hash       {}\nfinal_mean_loss   {:.6}\ncoverage_variance {:.6}\nmean_step_tv      {:.8}\nmean_tv_uniform   {:.6}\n",
        dir.join(TRACE_FILE).display(),
        dir.join(SUMMARY_FILE).display(),
        s.seed,
        s.config_hash,
        s.final_mean_loss,
        s.coverage_variance,
        s.mean_step_tv,
        s.mean_tv_from_uniform,
    )
}

fn execute(command: Command) -> dynamix_core::Result<String> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dir = out_dir(out, &cfg);
            let exp = cfg.resolve()?;
            log::info!(
                "running {} for {} steps into {}",
                exp.label,
                exp.bandit.total_steps,
                dir.display()
            );
            let summary = run_to_dir(&exp, &dir)?;
            Ok(format_summary(&summary, &dir))
        }
        Command::Compare { configs, seed } => {
            let experiments = configs
                .iter()
                .map(|p| ExperimentConfig::load(p)?.resolve())
                .collect::<dynamix_core::Result<Vec<_>>>()?;
            Ok(format_comparison(&compare(&experiments, seed)?))
        }
        Command::Sweep {
            config,
            grid,
            seeds,
        } => {
            if seeds == 0 {
                return Err(Error::config("--seeds", "must be >= 1"));
            }
            let exp = ExperimentConfig::load(&config)?.resolve()?;
            let grid = GridSpec::load(&grid)?;
            let seeds: Vec<u64> = (0..seeds).map(|i| exp.seed.wrapping_add(i)).collect();
            Ok(format_sweep(&sweep(&exp, &grid, &seeds)?))
        }
        Command::Export { trace, kind, out } => {
            let (header, records) = read_trace(&trace)?;
            let csv = export_plot_data(&header.arms, &records, kind)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
        Command::Validate { config } => {
            let exp = ExperimentConfig::load(&config)?.resolve()?;
            Ok(format!(
                "ok: {} arms, {} steps, policy {}, config_hash {}\n",
                exp.registry.len(),
                exp.bandit.total_steps,
                exp.policy.variant.name(),
                exp.config_hash()
            ))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            match stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
            {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: writing output: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            })
        }
    }
}
