//! Config loading, single runs, parameter sweeps and the command line.

mod cli;
mod config;

pub use cli::{main_with_args, Cli};
pub use config::{apply_override, load_config, parse_config, RunConfig};

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agentstate::{init_configuration, Configuration};
use crate::dynamics::{EventLog, Simulation};
use crate::error::{Error, Result};
use crate::exactlab::{basin_decomposition, build_rate_matrix, enumerate_gibbs, Rule, SpinModel};
use crate::observables::{summarize, Recorder, SeriesSummary};

/// Dynamics RNG: the run seed on stream 1 (stream 0 builds the initial state).
pub fn dynamics_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Creates `dir`, refusing an existing non-empty directory.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir)?;
        if entries.next().is_some() {
            return Err(Error::Refused(format!("output directory {} is not empty", dir.display())));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Drift {
    pub q1_final: f64,
    pub q1_max_abs: f64,
    pub q2_final: Vec<i64>,
    pub q2_max_abs: i64,
    pub q3_final: f64,
    pub q3_max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub steps: u64,
    pub final_time: f64,
    pub samples: usize,
    pub events: usize,
    pub conservation: Option<Drift>,
    pub observables: Vec<SeriesSummary>,
}

/// Result of [`simulate_run`]; configurations are absent when the run
/// failed before they existed.
pub struct RunOutcome {
    pub summary: RunSummary,
    pub initial: Option<Configuration>,
    pub last: Option<Configuration>,
    pub recorder: Recorder,
    pub log: EventLog,
}

fn drift(rec: &Recorder, cfg: &Configuration) -> Drift {
    let col = |name: &str| rec.table.column(name).unwrap_or_default();
    let max_abs = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Drift {
        q1_final: cfg.q1() - cfg.reference.q1,
        q1_max_abs: max_abs(col("q1_drift")),
        q2_final: cfg.q2().iter().zip(&cfg.reference.q2).map(|(a, b)| a - b).collect(),
        q2_max_abs: max_abs(col("q2_drift")) as i64,
        q3_final: cfg.q3() - cfg.reference.q3,
        q3_max_abs: max_abs(col("q3_drift")),
    }
}

/// Simulates one configuration without touching the filesystem. The error,
/// if any, is returned beside whatever was produced before it.
pub fn simulate_run(cfg: &RunConfig) -> (RunOutcome, Option<Error>) {
    let p = &cfg.model;
    let recorder = Recorder::new(p.energy.clone());
    let fail = |e: Error, initial: Option<Configuration>, recorder: Recorder| {
        let summary = failed_summary(cfg, &e);
        (RunOutcome { summary, last: initial.clone(), initial, recorder, log: EventLog::default() }, Some(e))
    };
    let initial = match init_configuration(p, cfg.seed) {
        Ok(c) => c,
        Err(e) => return fail(e, None, recorder),
    };
    let mut sim = match Simulation::new(initial.clone(), p.clone(), dynamics_rng(cfg.seed)) {
        Ok(s) => s,
        Err(e) => return fail(e, Some(initial), recorder),
    };
    let mut recorder = recorder;
    let res = sim.run(cfg.horizon, cfg.stride, &mut [&mut recorder]);
    let rows = recorder.table.rows.len();
    let burn = (cfg.burn_fraction * rows as f64).floor() as usize;
    let observables = summarize(&recorder.table, burn, p.n_agents, p.dynamics.t0).unwrap_or_default();
    let summary = RunSummary {
        run_id: cfg.run_id.clone(),
        seed: cfg.seed,
        status: if res.is_ok() { "ok" } else { "failed" }.into(),
        error: res.as_ref().err().map(|e| e.to_string()),
        steps: sim.steps,
        final_time: sim.cfg.time,
        samples: rows,
        events: sim.log.len(),
        conservation: Some(drift(&recorder, &sim.cfg)),
        observables,
    };
    let outcome = RunOutcome { summary, initial: Some(initial), last: Some(sim.cfg), recorder, log: sim.log };
    (outcome, res.err())
}

fn failed_summary(cfg: &RunConfig, e: &Error) -> RunSummary {
    RunSummary {
        run_id: cfg.run_id.clone(),
        seed: cfg.seed,
        status: "failed".into(),
        error: Some(e.to_string()),
        steps: 0,
        final_time: 0.0,
        samples: 0,
        events: 0,
        conservation: None,
        observables: Vec::new(),
    }
}

/// Runs one configuration into `out`: `config.toml`, `events.csv`,
/// `observables.csv`, `summary.json`, `snapshot_initial.json` and
/// `snapshot_final.json`. A failing run still writes what it has, with
/// `"status": "failed"` in the summary.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    prepare_out_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let (outcome, err) = simulate_run(cfg);
    outcome.log.write_csv(fs::File::create(out.join("events.csv"))?)?;
    outcome.recorder.table.write_csv(fs::File::create(out.join("observables.csv"))?)?;
    if let Some(c) = &outcome.initial {
        fs::write(out.join("snapshot_initial.json"), c.to_json()?)?;
    }
    if let Some(c) = &outcome.last {
        fs::write(out.join("snapshot_final.json"), c.to_json()?)?;
    }
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&outcome.summary)?)?;
    match err {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub seed: u64,
    pub values: Vec<serde_json::Value>,
    pub dir: PathBuf,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub axes: Vec<String>,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<usize>,
    /// Direction of the mean edge coherence along a single axis.
    pub c_trend: Option<String>,
}

/// Cartesian product of the sweep axes, first axis slowest.
pub fn sweep_points(cfg: &RunConfig) -> Vec<Vec<serde_json::Value>> {
    let mut points = vec![Vec::new()];
    for (_, values) in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

/// Runs every sweep point into `out/point_NNNN` on `workers` threads, then
/// writes `sweep.csv` and `sweep.json`. Point `k` uses seed `seed ^ k`.
pub fn sweep(cfg: &RunConfig, out: &Path, workers: usize) -> Result<SweepOutcome> {
    if cfg.sweep.is_empty() {
        return Err(Error::Config("sweep needs at least one [sweep] axis".into()));
    }
    cfg.validate()?;
    prepare_out_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let grid = sweep_points(cfg);
    let points: Vec<SweepPoint> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(index, values)| {
                let seed = cfg.seed ^ index as u64;
                let dir = out.join(format!("point_{index:04}"));
                let result = (|| {
                    let mut model = cfg.model.clone();
                    for ((path, _), v) in cfg.sweep.iter().zip(values) {
                        model = apply_override(&model, path, v)?;
                    }
                    let point = RunConfig {
                        model,
                        seed,
                        run_id: format!("{}_{index:04}", cfg.run_id),
                        sweep: Vec::new(),
                        out: None,
                        ..cfg.clone()
                    };
                    run(&point, &dir).map(|o| o.summary)
                })();
                let (summary, error) = match result {
                    Ok(s) => (Some(s), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SweepPoint { index, seed, values: values.clone(), dir, summary, error }
            })
            .collect()
    });
    let failures = points.iter().filter(|p| p.error.is_some()).map(|p| p.index).collect();
    let c_trend = if cfg.sweep.len() == 1 { trend(&points, "c") } else { None };
    let outcome = SweepOutcome { axes: cfg.sweep.iter().map(|(k, _)| k.clone()).collect(), points, failures, c_trend };
    write_sweep_csv(&outcome, &out.join("sweep.csv"))?;
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&outcome)?)?;
    Ok(outcome)
}

fn mean_of(s: &RunSummary, name: &str) -> Option<f64> {
    s.observables.iter().find(|o| o.name == name).map(|o| o.mean)
}

fn trend(points: &[SweepPoint], name: &str) -> Option<String> {
    let means: Vec<f64> = points.iter().map(|p| p.summary.as_ref().and_then(|s| mean_of(s, name))).collect::<Option<_>>()?;
    let up = means.windows(2).all(|w| w[1] >= w[0]);
    let down = means.windows(2).all(|w| w[1] <= w[0]);
    Some(match (up, down) {
        (true, true) => "constant",
        (true, false) => "increasing",
        (false, true) => "decreasing",
        _ => "non-monotone",
    }
    .into())
}

fn write_sweep_csv(o: &SweepOutcome, path: &Path) -> Result<()> {
    let names: Vec<String> = o
        .points
        .iter()
        .find_map(|p| p.summary.as_ref())
        .map(|s| s.observables.iter().map(|x| x.name.clone()).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["index".to_string(), "seed".to_string()];
    header.extend(o.axes.iter().cloned());
    header.push("status".into());
    for n in &names {
        header.extend([format!("{n}_mean"), format!("{n}_ci_lo"), format!("{n}_ci_hi"), format!("{n}_chi")]);
    }
    w.write_record(&header)?;
    for p in &o.points {
        let mut rec = vec![p.index.to_string(), p.seed.to_string()];
        rec.extend(p.values.iter().map(|v| v.to_string()));
        match &p.summary {
            Some(s) => {
                rec.push(s.status.clone());
                for n in &names {
                    match s.observables.iter().find(|x| &x.name == n) {
                        Some(x) => rec.extend([
                            x.mean.to_string(),
                            x.ci99.0.to_string(),
                            x.ci99.1.to_string(),
                            x.susceptibility.map_or(String::new(), |c| c.to_string()),
                        ]),
                        None => rec.extend(std::iter::repeat(String::new()).take(4)),
                    }
                }
            }
            None => {
                rec.push("failed".into());
                rec.extend(std::iter::repeat(String::new()).take(4 * names.len()));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Oracle instance: a spin model, the chain rule and a start state for
/// exchange rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub model: SpinModel,
    #[serde(default = "default_rule")]
    pub rule: Rule,
    #[serde(default)]
    pub start: u64,
    /// Temperature of the Gibbs enumeration; defaults to the first model
    /// temperature.
    #[serde(default)]
    pub temperature: Option<f64>,
}

fn default_rule() -> Rule {
    Rule::HeatBath
}

/// JSON report: Gibbs law, chain states, stationary law, spectrum,
/// entropy production and basins.
pub fn oracle_report(spec: &OracleSpec) -> Result<serde_json::Value> {
    let m = &spec.model;
    let t = spec.temperature.unwrap_or(m.temperature(0));
    let gibbs = enumerate_gibbs(m, t)?;
    let chain = build_rate_matrix(m, spec.rule, spec.start)?;
    let spectrum = chain.spectrum();
    let basins = basin_decomposition(m)?;
    Ok(serde_json::json!({
        "temperature": t,
        "z": gibbs.z,
        "gibbs": gibbs.probabilities,
        "rule": spec.rule,
        "states": chain.states,
        "energies": chain.energies,
        "pi": chain.pi,
        "stationarity_residual": chain.stationarity_residual(),
        "balance_residual": chain.balance_residual,
        "reversible": chain.is_reversible(),
        "entropy_production": chain.entropy_production()?,
        "spectrum": spectrum.iter().map(|s| serde_json::json!({"re": s.re, "im": s.im, "tau": if s.tau.is_finite() { Some(s.tau) } else { None }})).collect::<Vec<_>>(),
        "basins": basins,
    }))
}
