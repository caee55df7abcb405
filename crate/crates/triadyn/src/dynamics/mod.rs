//! Stochastic evolution: jump events and diffusion sub-steps composed by
//! operator splitting.

mod diffusion;
mod jumps;
pub mod noise;

pub use diffusion::{
    deterministic_drift, embeddings_step, gan_step, knowledge_step, memory_forcing, memory_step, phi_drift, phi_step,
    temperature_drift, temperature_step, theta_step,
};
pub use jumps::{
    birth_candidates, glauber_flip, kawasaki_exchange, role_probabilities, role_update, triad_birth, triad_death,
    CANDIDATE_POOL,
};

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::agentstate::Configuration;
use crate::error::{Error, Result};
use crate::hypergraph::Triad;
use crate::params::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynParams {
    pub dt: f64,
    /// Base thermal diffusivity.
    pub kappa_t: f64,
    /// Relaxation rate towards `t0`.
    pub gamma_relax: f64,
    pub t0: f64,
    /// Formation dissipation prefactor and activation energy.
    pub eta0: f64,
    pub e_a: f64,
    /// Memory modulation of the thermal diffusivity.
    pub alpha_mem: f64,
    pub d_phi: f64,
    pub sigma_phi: f64,
    pub sigma_g: f64,
    pub sigma_d: f64,
    /// Poisson event rates per unit time.
    pub rate_role: f64,
    pub rate_exchange: f64,
    pub rate_birth: f64,
    pub rate_death: f64,
    /// Phase coupling, natural frequency and noise scale.
    pub k_theta: f64,
    pub omega: f64,
    pub sigma_theta: f64,
    /// Multiplier on the `sqrt(2 gamma T dt)` temperature noise.
    pub temperature_noise: f64,
    /// Memory-field diffusivity.
    pub kappa_mem: f64,
    /// Knowledge drift rate towards the triad barycentre; 0 keeps knowledge static.
    pub kappa_k: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for DynParams {
    fn default() -> Self {
        DynParams {
            dt: 0.01,
            kappa_t: 0.1,
            gamma_relax: 1.0,
            t0: 1.0,
            eta0: 0.1,
            e_a: 1.0,
            alpha_mem: 0.1,
            d_phi: 1.0,
            sigma_phi: 0.1,
            sigma_g: 0.1,
            sigma_d: 0.1,
            rate_role: 1.0,
            rate_exchange: 10.0,
            rate_birth: 0.1,
            rate_death: 0.1,
            k_theta: 1.0,
            omega: 0.0,
            sigma_theta: 0.1,
            temperature_noise: 1.0,
            kappa_mem: 0.1,
            kappa_k: 0.0,
            t_min: 1e-3,
            t_max: 1e3,
        }
    }
}

impl DynParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dynamics.dt = {} must be positive", self.dt));
        }
        if !(self.t_min > 0.0) || !(self.t_max > self.t_min) {
            return bad(format!("temperature clamp [{}, {}] is empty or not positive", self.t_min, self.t_max));
        }
        if !(self.t0 >= self.t_min && self.t0 <= self.t_max) {
            return bad(format!("dynamics.t0 = {} outside [{}, {}]", self.t0, self.t_min, self.t_max));
        }
        let nonneg = [
            ("kappa_t", self.kappa_t),
            ("gamma_relax", self.gamma_relax),
            ("eta0", self.eta0),
            ("e_a", self.e_a),
            ("alpha_mem", self.alpha_mem),
            ("d_phi", self.d_phi),
            ("sigma_phi", self.sigma_phi),
            ("sigma_g", self.sigma_g),
            ("sigma_d", self.sigma_d),
            ("rate_role", self.rate_role),
            ("rate_exchange", self.rate_exchange),
            ("rate_birth", self.rate_birth),
            ("rate_death", self.rate_death),
            ("sigma_theta", self.sigma_theta),
            ("temperature_noise", self.temperature_noise),
            ("kappa_mem", self.kappa_mem),
            ("kappa_k", self.kappa_k),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("dynamics.{name} = {v} must be finite and nonnegative"));
            }
        }
        if !self.k_theta.is_finite() || !self.omega.is_finite() {
            return bad("dynamics.k_theta and dynamics.omega must be finite".into());
        }
        Ok(())
    }

    pub fn total_rate(&self) -> f64 {
        self.rate_role + self.rate_exchange + self.rate_birth + self.rate_death
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Role,
    Exchange,
    Birth,
    BirthRejected,
    Death,
    Flip,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Role => "role",
            EventKind::Exchange => "exchange",
            EventKind::Birth => "birth",
            EventKind::BirthRejected => "birth_rejected",
            EventKind::Death => "death",
            EventKind::Flip => "flip",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub agent: Option<usize>,
    pub triad: Option<Triad>,
    pub detail: String,
}

impl Event {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Event { time, kind, agent: None, triad: None, detail: String::new() }
    }

    pub fn agent(mut self, a: usize) -> Self {
        self.agent = Some(a);
        self
    }

    pub fn triad(mut self, t: Triad) -> Self {
        self.triad = Some(t);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

/// Jump events in execution order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, e: Event) {
        debug_assert!(self.events.last().map_or(true, |l| l.time <= e.time));
        self.events.push(e);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "kind", "agent", "triad", "detail"])?;
        for e in &self.events {
            out.write_record([
                format!("{}", e.time),
                e.kind.to_string(),
                e.agent.map_or(String::new(), |a| a.to_string()),
                e.triad.map_or(String::new(), |t| format!("{}-{}-{}", t[0], t[1], t[2])),
                e.detail.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Receives read-only snapshots on the observer stride.
pub trait Observer {
    fn observe(&mut self, cfg: &Configuration, step: u64);
}

/// One simulation instance: configuration, parameters, RNG and event log.
pub struct Simulation {
    pub cfg: Configuration,
    pub params: ModelParams,
    pub rng: ChaCha8Rng,
    pub log: EventLog,
    /// Record jump events in `log`.
    pub log_events: bool,
    pub steps: u64,
}

impl Simulation {
    pub fn new(cfg: Configuration, params: ModelParams, rng: ChaCha8Rng) -> Result<Self> {
        params.validate()?;
        if cfg.n_agents() != params.n_agents {
            return Err(Error::Dimension { expected: params.n_agents, got: cfg.n_agents() });
        }
        Ok(Simulation { cfg, params, rng, log: EventLog::default(), log_events: true, steps: 0 })
    }

    /// Diffusion sub-steps in fixed order.
    pub fn diffuse(&mut self) -> Result<()> {
        let (p, dt) = (&self.params, self.params.dynamics.dt);
        temperature_step(&mut self.cfg, &p.energy, &p.dynamics, &mut self.rng, dt)?;
        phi_step(&mut self.cfg, &p.energy, &p.dynamics, &mut self.rng, dt)?;
        theta_step(&mut self.cfg, &p.dynamics, &mut self.rng, dt);
        gan_step(&mut self.cfg, &p.energy, &p.dynamics, &mut self.rng, dt);
        memory_step(&mut self.cfg, &p.dynamics, dt)?;
        embeddings_step(&mut self.cfg, &p.kernel, dt);
        knowledge_step(&mut self.cfg, &p.dynamics, dt);
        Ok(())
    }

    /// Poisson number of jumps over one step, each kind drawn in proportion to
    /// its rate; equivalent to independent Poisson channels.
    pub fn jumps(&mut self) -> Result<()> {
        let d = &self.params.dynamics;
        let total = d.total_rate();
        if total == 0.0 {
            return Ok(());
        }
        let count = Poisson::new(total * d.dt).map_err(|e| Error::Parameter(e.to_string()))?.sample(&mut self.rng) as u64;
        let rates = [d.rate_role, d.rate_exchange, d.rate_birth, d.rate_death];
        for _ in 0..count {
            let mut u = self.rng.gen::<f64>() * total;
            let mut kind = 3;
            for (k, r) in rates.iter().enumerate() {
                if u < *r {
                    kind = k;
                    break;
                }
                u -= r;
            }
            let ev = self.jump(kind)?;
            if let (Some(e), true) = (ev, self.log_events) {
                self.log.push(e);
            }
        }
        Ok(())
    }

    fn jump(&mut self, kind: usize) -> Result<Option<Event>> {
        let (cfg, p, rng) = (&mut self.cfg, &self.params, &mut self.rng);
        match kind {
            0 => {
                let n = cfg.roles.len();
                if n == 0 {
                    return Ok(None);
                }
                let (a, t) = *cfg.roles.iter().nth(rng.gen_range(0..n)).unwrap().0;
                role_update(cfg, &p.energy, a, &t, rng).map(Some)
            }
            1 => {
                let n = cfg.hyper.n_edges();
                if n == 0 {
                    return Ok(None);
                }
                let (i, j) = cfg.hyper.edges().nth(rng.gen_range(0..n)).unwrap();
                kawasaki_exchange(cfg, &p.energy, i, j, rng).map(Some)
            }
            2 => triad_birth(cfg, p, rng),
            _ => triad_death(cfg, p, rng),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        self.diffuse()?;
        self.jumps()?;
        self.steps += 1;
        self.cfg.time = self.steps as f64 * self.params.dynamics.dt;
        Ok(())
    }

    /// Runs `round(horizon / dt)` steps, sampling observers at step 0 and
    /// every `stride` steps.
    pub fn run(&mut self, horizon: f64, stride: u64, observers: &mut [&mut dyn Observer]) -> Result<()> {
        if !(horizon >= 0.0) {
            return Err(Error::Parameter(format!("horizon = {horizon}")));
        }
        let stride = stride.max(1);
        let n = (horizon / self.params.dynamics.dt).round() as u64;
        let start = self.steps;
        if start == 0 {
            observers.iter_mut().for_each(|o| o.observe(&self.cfg, 0));
        }
        for _ in 0..n {
            self.step()?;
            if (self.steps - start) % stride == 0 {
                observers.iter_mut().for_each(|o| o.observe(&self.cfg, self.steps));
            }
        }
        Ok(())
    }
}

/// Builds a simulation from `cfg`, runs it to `horizon` and returns the final
/// configuration and event log.
pub fn simulate(
    cfg: Configuration,
    params: &ModelParams,
    rng: ChaCha8Rng,
    horizon: f64,
    stride: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<(Configuration, EventLog)> {
    let mut sim = Simulation::new(cfg, params.clone(), rng)?;
    sim.run(horizon, stride, observers)?;
    Ok((sim.cfg, sim.log))
}

/// Scale-separation diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timescales {
    pub tau_group: f64,
    pub tau_form: Option<f64>,
    pub tau_mem: f64,
    pub tau_slow: f64,
    pub eps: [Option<f64>; 3],
    pub warnings: Vec<String>,
}

/// `tau_group = 1/J`, `tau_form = 1/|J_mix|` when an estimate is supplied,
/// `tau_mem = max tau_n`, `tau_slow = 1/(kappa_T lambda_2)`.
pub fn timescales(cfg: &Configuration, p: &ModelParams, j_mix_norm: Option<f64>) -> Timescales {
    let tau_group = 1.0 / p.energy.j.abs();
    let tau_form = j_mix_norm.map(|x| 1.0 / x);
    let tau_mem = p.kernel.max_tau();
    let spec = cfg.hyper.laplacian_spectrum();
    let lambda2 = spec.get(1).copied().unwrap_or(0.0);
    let tau_slow = 1.0 / (p.dynamics.kappa_t * lambda2);
    let eps = [tau_form.map(|f| tau_group / f), tau_form.map(|f| f / tau_mem), Some(tau_mem / tau_slow)];
    let warnings = eps
        .iter()
        .enumerate()
        .filter_map(|(k, e)| match e {
            Some(v) if !(*v < 1.0) => Some(format!("eps{} = {v:.3} is not below 1; timescales are not separated", k + 1)),
            _ => None,
        })
        .collect();
    Timescales { tau_group, tau_form, tau_mem, tau_slow, eps, warnings }
}

#[cfg(test)]
mod tests;
