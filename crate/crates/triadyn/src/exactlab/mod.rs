//! Exact enumeration on small spin instances and a small stability toolkit.
//!
//! States are bit codes: component `l` of agent `i` sits at bit `i * m + l`,
//! a set bit meaning `+1`. Energies here are computed from the instance
//! description alone, without going through [`crate::energy`], so the two can
//! check each other.

mod basins;
mod chain;
mod stability;

pub use basins::{basin_decomposition, BasinDecomposition};
pub use chain::{build_rate_matrix, Acceptance, Mode, RateModel, Rule, MAX_DENSE_STATES};
pub use stability::{
    arrhenius_rate, barrier_scan, char_poly, hurwitz_minors, jacobian_fd, lyapunov_check, lyapunov_value, master_stability,
    memory_operator_bound, routh_hurwitz4, routh_hurwitz4_exact, stability_report, BarrierScan, LyapunovSeries,
    MasterStability, MemoryBound, RouthHurwitz, StabilityReport, Trace,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agentstate::Configuration;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::hypergraph::{edge, triad, Edge, Triad};

/// Largest number of spin bits enumerated.
pub const MAX_BITS: usize = 20;

/// A frozen-structure spin instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinModel {
    pub n_agents: usize,
    #[serde(default = "one")]
    pub m: usize,
    pub triads: Vec<[usize; 3]>,
    /// Weight overrides keyed `"i-j"`; other 2-section pairs weigh 1.
    #[serde(default)]
    pub edge_weights: BTreeMap<String, f64>,
    #[serde(default = "one_f")]
    pub j: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub lambda_tau: f64,
    /// Per-agent temperatures (a single entry broadcasts).
    #[serde(default = "unit_temps")]
    pub temperatures: Vec<f64>,
    /// Base rate of each single-site flip channel.
    #[serde(default = "one_f")]
    pub flip_rate: f64,
    /// Total exchange rate, shared evenly over 2-section edges.
    #[serde(default = "ten")]
    pub rate_exchange: f64,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn unit_temps() -> Vec<f64> {
    vec![1.0]
}

impl SpinModel {
    pub fn ising(n_agents: usize, triads: Vec<[usize; 3]>, j: f64, h: f64, t: f64) -> Self {
        SpinModel {
            n_agents,
            m: 1,
            triads,
            edge_weights: BTreeMap::new(),
            j,
            h,
            kappa: 0.0,
            lambda_tau: 0.0,
            temperatures: vec![t],
            flip_rate: 1.0,
            rate_exchange: 10.0,
        }
    }

    /// Instance matching a configuration's structure, weights and temperatures.
    pub fn from_configuration(cfg: &Configuration, e: &EnergyParams, rate_exchange: f64) -> Self {
        let edge_weights = cfg
            .hyper
            .edges()
            .filter(|&(i, j)| cfg.hyper.weight(i, j) != 1.0)
            .map(|(i, j)| (format!("{i}-{j}"), cfg.hyper.weight(i, j)))
            .collect();
        SpinModel {
            n_agents: cfg.n_agents(),
            m: cfg.opinion_dim(),
            triads: cfg.hyper.triad_list(),
            edge_weights,
            j: e.j,
            h: e.h,
            kappa: e.kappa,
            lambda_tau: e.lambda_tau,
            temperatures: cfg.temperature_field(),
            flip_rate: 1.0,
            rate_exchange,
        }
    }

    pub fn bits(&self) -> usize {
        self.n_agents * self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.m == 0 {
            return Err(Error::Parameter("spin model needs agents and m >= 1".into()));
        }
        if self.bits() > MAX_BITS {
            return Err(Error::StateSpace(1u128 << self.bits()));
        }
        for t in &self.triads {
            let s = triad(t[0], t[1], t[2])?;
            if s.iter().any(|&a| a >= self.n_agents) {
                return Err(Error::AgentOutOfRange(s[2], self.n_agents));
            }
        }
        if !(self.temperatures.len() == 1 || self.temperatures.len() == self.n_agents)
            || self.temperatures.iter().any(|t| !(*t > 0.0) || !t.is_finite())
        {
            return Err(Error::Parameter(format!("temperatures {:?}", self.temperatures)));
        }
        if !(self.flip_rate >= 0.0) || !(self.rate_exchange >= 0.0) {
            return Err(Error::Parameter("rates must be nonnegative".into()));
        }
        self.weighted_edges().map(|_| ())
    }

    pub fn temperature(&self, i: usize) -> f64 {
        if self.temperatures.len() == 1 {
            self.temperatures[0]
        } else {
            self.temperatures[i]
        }
    }

    fn sorted_triads(&self) -> Result<Vec<Triad>> {
        let set: BTreeSet<Triad> = self.triads.iter().map(|t| triad(t[0], t[1], t[2])).collect::<Result<_>>()?;
        Ok(set.into_iter().collect())
    }

    /// 2-section edges with weights.
    pub fn weighted_edges(&self) -> Result<Vec<(Edge, f64)>> {
        let mut edges = BTreeMap::new();
        for t in self.sorted_triads()? {
            for (a, b) in [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])] {
                edges.insert(edge(a, b), 1.0);
            }
        }
        for (key, &w) in &self.edge_weights {
            let e = key
                .split_once('-')
                .and_then(|(a, b)| Some(edge(a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| Error::Parameter(format!("bad edge key '{key}'")))?;
            match edges.get_mut(&e) {
                Some(slot) if w >= 0.0 && w.is_finite() => *slot = w,
                _ => return Err(Error::Parameter(format!("edge weight {key} = {w} (pair must be a 2-section edge)"))),
            }
        }
        Ok(edges.into_iter().collect())
    }

    pub fn spin(&self, code: u64, i: usize, l: usize) -> i8 {
        if code >> (i * self.m + l) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn decode(&self, code: u64) -> Vec<Vec<i8>> {
        (0..self.n_agents).map(|i| (0..self.m).map(|l| self.spin(code, i, l)).collect()).collect()
    }

    pub fn encode(&self, spins: &[Vec<i8>]) -> Result<u64> {
        if spins.len() != self.n_agents {
            return Err(Error::Dimension { expected: self.n_agents, got: spins.len() });
        }
        let mut code = 0u64;
        for (i, s) in spins.iter().enumerate() {
            if s.len() != self.m {
                return Err(Error::Dimension { expected: self.m, got: s.len() });
            }
            for (l, &x) in s.iter().enumerate() {
                if x > 0 {
                    code |= 1 << (i * self.m + l);
                }
            }
        }
        Ok(code)
    }

    pub fn encode_configuration(&self, cfg: &Configuration) -> Result<u64> {
        let spins: Vec<Vec<i8>> = cfg.agents.iter().map(|a| a.opinion.clone()).collect();
        self.encode(&spins)
    }

    /// Total opinion per component.
    pub fn magnetization(&self, code: u64) -> Vec<i64> {
        (0..self.m).map(|l| (0..self.n_agents).map(|i| self.spin(code, i, l) as i64).sum()).collect()
    }

    /// Energy evaluator with the edge list and triads resolved once.
    pub fn energy_fn(&self) -> Result<impl Fn(u64) -> f64 + '_> {
        let edges = self.weighted_edges()?;
        let triads = self.sorted_triads()?;
        Ok(move |code: u64| {
            let mut e = 0.0;
            for &((i, j), w) in &edges {
                for l in 0..self.m {
                    let (a, b) = (self.spin(code, i, l) as f64, self.spin(code, j, l) as f64);
                    e += w * (-self.j * a * b + 0.5 * self.kappa * (a - b) * (a - b));
                }
            }
            for i in 0..self.n_agents {
                for l in 0..self.m {
                    e -= self.h * self.spin(code, i, l) as f64;
                }
            }
            for t in &triads {
                for l in 0..self.m {
                    e -= self.lambda_tau * t.iter().map(|&a| self.spin(code, a, l) as f64).product::<f64>();
                }
            }
            e
        })
    }

    pub fn energy(&self, code: u64) -> Result<f64> {
        Ok(self.energy_fn()?(code))
    }

    /// Mean edge coherence `(1/m) s_i . s_j` over 2-section edges.
    pub fn edge_coherence(&self, code: u64) -> Result<f64> {
        let edges = self.weighted_edges()?;
        if edges.is_empty() {
            return Ok(0.0);
        }
        let sum: f64 = edges
            .iter()
            .map(|&((i, j), _)| (0..self.m).map(|l| (self.spin(code, i, l) * self.spin(code, j, l)) as f64).sum::<f64>())
            .sum();
        Ok(sum / (self.m * edges.len()) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gibbs {
    pub temperature: f64,
    pub z: f64,
    pub energies: Vec<f64>,
    /// Boltzmann probabilities indexed by state code.
    pub probabilities: Vec<f64>,
}

/// Partition function and Boltzmann law over all `2^(N m)` states at a
/// uniform temperature.
pub fn enumerate_gibbs(model: &SpinModel, t: f64) -> Result<Gibbs> {
    model.validate()?;
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("temperature {t}")));
    }
    let energy = model.energy_fn()?;
    let energies: Vec<f64> = (0..1u64 << model.bits()).map(&energy).collect();
    let weights = boltzmann_weights(&energies, t);
    let shift = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = weights.iter().sum();
    let z = sum * (-shift / t).exp();
    Ok(Gibbs { temperature: t, z, probabilities: weights.iter().map(|w| w / sum).collect(), energies })
}

/// `exp(-(E - E_min) / T)`, finite for any temperature.
fn boltzmann_weights(energies: &[f64], t: f64) -> Vec<f64> {
    let shift = energies.iter().copied().fold(f64::INFINITY, f64::min);
    energies.iter().map(|e| (-(e - shift) / t).exp()).collect()
}

/// Gibbs law restricted to the states with the given total opinion.
pub fn conditional_gibbs(model: &SpinModel, t: f64, magnetization: &[i64]) -> Result<BTreeMap<u64, f64>> {
    let g = enumerate_gibbs(model, t)?;
    let states: Vec<u64> = (0..g.energies.len() as u64).filter(|&c| model.magnetization(c) == magnetization).collect();
    let w = boltzmann_weights(&states.iter().map(|&c| g.energies[c as usize]).collect::<Vec<_>>(), t);
    let sum: f64 = w.iter().sum();
    Ok(states.into_iter().zip(w).map(|(c, w)| (c, w / sum)).collect())
}

/// Total variation distance between two laws on state codes.
pub fn total_variation(p: &BTreeMap<u64, f64>, q: &BTreeMap<u64, f64>) -> f64 {
    let keys: BTreeSet<u64> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys.iter().map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

/// Empirical law of a list of state codes.
pub fn empirical(codes: &[u64]) -> BTreeMap<u64, f64> {
    let mut m = BTreeMap::new();
    for &c in codes {
        *m.entry(c).or_insert(0.0) += 1.0;
    }
    let n = codes.len() as f64;
    m.values_mut().for_each(|v| *v /= n);
    m
}
