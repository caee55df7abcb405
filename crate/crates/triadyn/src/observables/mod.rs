//! Measurements on configurations and trajectories.

mod correlation;
mod information;
mod patterns;
mod scales;
mod stats;

pub use correlation::{c_global, connected_correlation, correlation_by_distance, DistanceBin};
pub use information::{
    binned_entropy, entropy_production_jump, hierarchical_entropy, mutual_information, spectral_capacity,
    HierarchicalEntropy, Spectrum,
};
pub use patterns::{capacity_bound_fit, pattern_overlap, CapacityFit, PatternBank, PatternOverlap};
pub use scales::{estimate_j_mix, scale_projections, JMix, MesoView, NodeView, Projections};
pub use stats::{autocorrelation, batch_mean_ci, fit_relaxation_time, mean_ci, susceptibility, MeanCi, RelaxationFit};

use std::io::Write;

use serde::Serialize;

use crate::agentstate::{dot, Configuration, RoleAssignment};
use crate::dynamics::Observer;
use crate::energy::{group_hamiltonian, triad_alignment, EnergyParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderParameters {
    pub psi_form: f64,
    pub phi_align: f64,
    pub c: f64,
    pub psi_mem: f64,
    pub phi_role: f64,
    pub phi_sync: f64,
}

impl OrderParameters {
    pub const NAMES: [&'static str; 6] = ["psi_form", "phi_align", "c", "psi_mem", "phi_role", "phi_sync"];

    pub fn values(&self) -> [f64; 6] {
        [self.psi_form, self.phi_align, self.c, self.psi_mem, self.phi_role, self.phi_sync]
    }
}

/// Mean edge coherence `(1/m) s_i . s_j`; 0 without edges.
pub fn edge_coherence(cfg: &Configuration) -> f64 {
    let m = cfg.opinion_dim().max(1) as f64;
    let (sum, n) = cfg
        .hyper
        .edges()
        .fold((0.0, 0usize), |(s, n), (i, j)| (s + dot(&cfg.agents[i].opinion, &cfg.agents[j].opinion) as f64 / m, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// All order parameters. `reference` is the role map at the start of the
/// measurement window; without one the role stability is 1.
pub fn order_parameters(cfg: &Configuration, reference: Option<&RoleAssignment>) -> OrderParameters {
    let triads = cfg.hyper.triad_list();
    let nt = triads.len().max(1) as f64;
    let psi_form = triads.iter().map(|t| t.iter().map(|&a| cfg.agents[a].phi).product::<f64>()).sum::<f64>() / nt;
    let phi_align = triads.iter().map(|t| triad_alignment(cfg, t)).sum::<f64>() / nt;
    let n = cfg.n_agents() as f64;
    let mean_m = cfg.agents.iter().map(|a| a.memory).sum::<f64>() / n;
    let psi_mem = cfg.agents.iter().map(|a| (a.memory - mean_m).powi(2)).sum::<f64>() / n;
    let phi_role = match reference {
        Some(r0) if !cfg.roles.is_empty() => {
            cfg.roles.iter().filter(|((a, t), r)| r0.get(*a, t) == Some(**r)).count() as f64 / cfg.roles.len() as f64
        }
        Some(_) => 0.0,
        None => 1.0,
    };
    let (cs, sn) = cfg.agents.iter().fold((0.0, 0.0), |(c, s), a| (c + a.theta.cos(), s + a.theta.sin()));
    let phi_sync = ((cs * cs + sn * sn).sqrt() / n).min(1.0);
    OrderParameters { psi_form, phi_align, c: edge_coherence(cfg), psi_mem, phi_role, phi_sync }
}

/// Named scalar time series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub run_id: String,
    pub seed: u64,
}

/// Column table of observables sampled on the observer stride.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn series(&self, name: &str, run_id: &str, seed: u64) -> Option<ObservableSeries> {
        Some(ObservableSeries {
            name: name.into(),
            times: self.times.clone(),
            values: self.column(name)?,
            run_id: run_id.into(),
            seed,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.names.iter().cloned());
        out.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            let mut rec = vec![format!("{t}")];
            rec.extend(row.iter().map(|x| format!("{x}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Observer recording order parameters, group energy, structure size and
/// conservation drifts.
pub struct Recorder {
    pub energy: EnergyParams,
    pub reference: Option<RoleAssignment>,
    pub table: SeriesTable,
}

impl Recorder {
    pub fn new(energy: EnergyParams) -> Self {
        let mut names: Vec<String> = OrderParameters::NAMES.iter().map(|s| s.to_string()).collect();
        names.extend(["h_group", "n_triads", "reservoir", "q1_drift", "q2_drift", "q3_drift"].map(String::from));
        Recorder { energy, reference: None, table: SeriesTable { names, ..Default::default() } }
    }
}

impl Observer for Recorder {
    fn observe(&mut self, cfg: &Configuration, _step: u64) {
        if self.reference.is_none() {
            self.reference = Some(cfg.roles.clone());
        }
        let op = order_parameters(cfg, self.reference.as_ref());
        let q2: i64 = cfg.q2().iter().zip(&cfg.reference.q2).map(|(a, b)| (a - b).abs()).sum();
        let mut row = op.values().to_vec();
        row.extend([
            group_hamiltonian(cfg, &self.energy),
            cfg.hyper.n_triads() as f64,
            cfg.reservoir,
            cfg.q1() - cfg.reference.q1,
            q2 as f64,
            cfg.q3() - cfg.reference.q3,
        ]);
        self.table.times.push(cfg.time);
        self.table.rows.push(row);
    }
}

/// Per-observable summary over a stationary window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub susceptibility: Option<f64>,
    pub ci99: (f64, f64),
}

/// Summaries of every column over samples from index `burn` on.
pub fn summarize(table: &SeriesTable, burn: usize, n_agents: usize, temperature: f64) -> Result<Vec<SeriesSummary>> {
    if table.rows.len() < burn + 2 {
        return Err(Error::Parameter(format!("{} samples leave no window after burn-in {burn}", table.rows.len())));
    }
    table
        .names
        .iter()
        .map(|name| {
            let v = &table.column(name).unwrap()[burn..];
            let ci = batch_mean_ci(v, 20, 0.99);
            Ok(SeriesSummary {
                name: name.clone(),
                mean: ci.mean,
                variance: stats::variance(v),
                susceptibility: susceptibility(v, n_agents, temperature).ok(),
                ci99: (ci.lo, ci.hi),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
