use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::{load_config, oracle_report, run, sweep, OracleSpec, RunConfig};
use crate::agentstate::Configuration;
use crate::error::{Error, Result};
use crate::exactlab::stability_report;

#[derive(Debug, Parser)]
#[command(name = "triadyn", version, about = "Triadic hypergraph agent dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Run the Cartesian product of the [sweep] axes.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Exact enumeration report for a small spin instance (TOML).
    Oracle {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear stability report of a snapshot under a config's parameters.
    Stability {
        snapshot: PathBuf,
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gamma_c: f64,
        #[arg(long, default_value_t = 100)]
        lyapunov_steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a snapshot's invariants.
    Validate { snapshot: PathBuf },
}

fn with_overrides(path: &Path, seed: Option<u64>, stride: Option<u64>, out: Option<PathBuf>) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = stride {
        cfg.stride = s;
    }
    let out = out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Config("no output directory (use --out or set `out`)".into()))?;
    cfg.validate()?;
    Ok((cfg, out))
}

/// Writes `text` to `out` (refusing to overwrite) or to stdout.
fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) if p.exists() => Err(Error::Refused(format!("{} already exists", p.display()))),
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Ok(fs::write(p, text)?)
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_snapshot(path: &Path) -> Result<Configuration> {
    Configuration::from_json(&fs::read_to_string(path)?)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, seed, out, stride } => {
            let (cfg, out) = with_overrides(&config, seed, stride, out)?;
            let o = run(&cfg, &out)?;
            eprintln!("{} steps, {} samples, {} events -> {}", o.summary.steps, o.summary.samples, o.summary.events, out.display());
            Ok(0)
        }
        Command::Sweep { config, seed, out, stride, workers } => {
            let (cfg, out) = with_overrides(&config, seed, stride, out)?;
            let o = sweep(&cfg, &out, workers)?;
            eprintln!("{} points, {} failed -> {}", o.points.len(), o.failures.len(), out.display());
            if let Some(t) = &o.c_trend {
                eprintln!("c trend along {}: {t}", o.axes[0]);
            }
            Ok(if o.failures.is_empty() { 0 } else { 1 })
        }
        Command::Oracle { spec, out } => {
            let text = fs::read_to_string(&spec)?;
            let spec: OracleSpec =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", spec.display())))?;
            emit(&serde_json::to_string_pretty(&oracle_report(&spec)?)?, out.as_deref())?;
            Ok(0)
        }
        Command::Stability { snapshot, config, gamma_c, lyapunov_steps, out } => {
            let cfg = load_config(&config)?;
            let snap = load_snapshot(&snapshot)?;
            let report = stability_report(&snap, &cfg.model, gamma_c, lyapunov_steps)?;
            emit(&serde_json::to_string_pretty(&report)?, out.as_deref())?;
            Ok(0)
        }
        Command::Validate { snapshot } => {
            let snap = load_snapshot(&snapshot)?;
            let v = snap.validate();
            for x in &v {
                println!("{}: {}", x.code, x.detail);
            }
            if v.is_empty() {
                println!("ok");
                Ok(0)
            } else {
                Ok(1)
            }
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
