//! Agent state, incidence roles, adversarial parameter blocks and the full
//! system configuration with its conserved quantities.

mod knowledge;
mod opinion;

pub use knowledge::{
    barycenter2, displacement_interpolate, grid_point, wasserstein2, wasserstein2_sq, KnowledgeState,
};
pub use opinion::{dot, hamming_to_median, median_opinion, TIE};

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hypergraph::{triad, triad_map, Triad, TriadicHypergraph};
use crate::memory::{compensated_sum, Embeddings};
use crate::params::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub knowledge: KnowledgeState,
    pub opinion: Vec<i8>,
    pub temperature: f64,
    pub phi: f64,
    pub theta: f64,
    pub memory: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    G1,
    G2,
    D,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::G1, Role::G2, Role::D];

    pub fn index(self) -> usize {
        match self {
            Role::G1 => 0,
            Role::G2 => 1,
            Role::D => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::G1 => "G1",
            Role::G2 => "G2",
            Role::D => "D",
        }
    }
}

/// Role per `(agent, triad)` incidence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoleAssignment(BTreeMap<(usize, Triad), Role>);

impl RoleAssignment {
    pub fn get(&self, agent: usize, t: &Triad) -> Option<Role> {
        self.0.get(&(agent, *t)).copied()
    }

    pub fn set(&mut self, agent: usize, t: Triad, r: Role) {
        self.0.insert((agent, t), r);
    }

    pub fn remove_triad(&mut self, t: &Triad) {
        for &a in t {
            self.0.remove(&(a, *t));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, Triad), &Role)> + '_ {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for RoleAssignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|(&(a, t), r)| (a, t, r)))
    }
}

impl<'de> Deserialize<'de> for RoleAssignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<(usize, Triad, Role)>::deserialize(d)?;
        Ok(RoleAssignment(v.into_iter().map(|(a, t, r)| ((a, t), r)).collect()))
    }
}

/// Two generator vectors and one discriminator vector of a triad.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanBlock {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub d: Vec<f64>,
}

impl GanBlock {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, p: usize, c_g: f64, c_d: f64) -> Self {
        let g1 = sphere_vector(rng, p, c_g.sqrt());
        let g2 = sphere_vector(rng, p, c_g.sqrt());
        let d = sphere_vector(rng, p, c_d.sqrt());
        GanBlock { g1, g2, d }
    }

    pub fn generators(&self) -> [&Vec<f64>; 2] {
        [&self.g1, &self.g2]
    }

    pub fn norm_sq_total(&self) -> f64 {
        norm_sq(&self.g1) + norm_sq(&self.g2) + norm_sq(&self.d)
    }
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Uniform direction scaled to `radius`.
pub fn sphere_vector<R: Rng + ?Sized>(rng: &mut R, p: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm_sq(&v).sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x * radius / n).collect();
        }
    }
}

/// Rescales `v` in place to exact `radius`.
pub fn renormalize(v: &mut [f64], radius: f64) {
    let n = norm_sq(v).sqrt();
    v.iter_mut().for_each(|x| *x *= radius / n);
}

/// Reference values of the conserved quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub q1: f64,
    pub q2: Vec<i64>,
    pub q3: f64,
}

/// Initial-state options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitParams {
    /// `ring`, `random`, `explicit` or `empty`.
    pub structure: String,
    pub random_triads: usize,
    pub triads: Vec<[usize; 3]>,
    pub phi: f64,
    pub memory: f64,
    /// Draw phases uniformly on `[0, 2pi)`; otherwise all equal `theta`.
    pub theta_random: bool,
    pub theta: f64,
    pub reservoir: f64,
    /// Extra reservoir, in units of one birth cost.
    pub birth_headroom: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams {
            structure: "ring".into(),
            random_triads: 0,
            triads: Vec::new(),
            phi: 0.0,
            memory: 0.0,
            theta_random: true,
            theta: 0.0,
            reservoir: 0.0,
            birth_headroom: 4.0,
        }
    }
}

impl InitParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.structure.as_str() {
            "ring" | "empty" => {}
            "random" => {
                let possible = n * (n - 1) * (n - 2) / 6;
                if self.random_triads > possible {
                    return Err(Error::Parameter(format!("random_triads = {} exceeds C(N,3)", self.random_triads)));
                }
            }
            "explicit" => {
                let mut h = TriadicHypergraph::new(n);
                for t in &self.triads {
                    h.add_triad(*t)?;
                }
            }
            other => return Err(Error::Parameter(format!("unknown init.structure '{other}'"))),
        }
        if !(self.reservoir >= 0.0) || !(self.birth_headroom >= 0.0) {
            return Err(Error::Parameter("reservoir and birth_headroom must be nonnegative".into()));
        }
        if !self.phi.is_finite() || !self.memory.is_finite() || !self.theta.is_finite() {
            return Err(Error::Parameter("initial fields must be finite".into()));
        }
        Ok(())
    }

    fn structure<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Triad>> {
        Ok(match self.structure.as_str() {
            "ring" => {
                let mut h = TriadicHypergraph::new(n);
                for k in 0..n / 2 {
                    let t = triad(2 * k, 2 * k + 1, (2 * k + 2) % n)?;
                    if !h.contains(&t) {
                        h.add_triad(t)?;
                    }
                }
                h.triad_list()
            }
            "random" => {
                let mut h = TriadicHypergraph::new(n);
                while h.n_triads() < self.random_triads {
                    let pick = rand::seq::index::sample(rng, n, 3);
                    let t = triad(pick.index(0), pick.index(1), pick.index(2))?;
                    if !h.contains(&t) {
                        h.add_triad(t)?;
                    }
                }
                h.triad_list()
            }
            "explicit" => self.triads.iter().map(|t| triad(t[0], t[1], t[2])).collect::<Result<_>>()?,
            _ => Vec::new(),
        })
    }
}

/// Full system state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub agents: Vec<AgentState>,
    pub hyper: TriadicHypergraph,
    pub roles: RoleAssignment,
    #[serde(with = "triad_map")]
    pub gan: BTreeMap<Triad, GanBlock>,
    pub reservoir: f64,
    pub embeddings: Embeddings,
    pub time: f64,
    pub c_g: f64,
    pub c_d: f64,
    pub reference: Conserved,
}

/// One failed invariant, with a short stable code.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

pub const NORM_TOL: f64 = 1e-9;

/// Builds the initial configuration deterministically from `seed`.
pub fn init_configuration(p: &ModelParams, seed: u64) -> Result<Configuration> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.n_agents;
    let agents = (0..n)
        .map(|_| {
            let opinion = (0..p.opinion_dim).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let theta = if p.init.theta_random { rng.gen_range(0.0..TAU) } else { p.init.theta.rem_euclid(TAU) };
            AgentState {
                knowledge: KnowledgeState::uniform(p.grid_points),
                opinion,
                temperature: p.dynamics.t0,
                phi: p.init.phi,
                theta,
                memory: p.init.memory,
            }
        })
        .collect();
    let triads = p.init.structure(n, &mut rng)?;
    let hyper = TriadicHypergraph::from_triads(n, &triads)?;
    let mut roles = RoleAssignment::default();
    let mut gan = BTreeMap::new();
    for t in &triads {
        gan.insert(*t, GanBlock::random(&mut rng, p.gan_dim, p.c_g, p.c_d));
        let mut rs = Role::ALL;
        rs.shuffle(&mut rng);
        for (&a, r) in t.iter().zip(rs) {
            roles.set(a, *t, r);
        }
    }
    let mut cfg = Configuration {
        agents,
        hyper,
        roles,
        gan,
        reservoir: p.init.reservoir + p.init.birth_headroom * p.birth_cost(),
        embeddings: Embeddings::new(&p.kernel, n, &triads),
        time: 0.0,
        c_g: p.c_g,
        c_d: p.c_d,
        reference: Conserved { q1: 0.0, q2: Vec::new(), q3: 0.0 },
    };
    cfg.reset_reference();
    Ok(cfg)
}

impl Configuration {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn opinion_dim(&self) -> usize {
        self.agents.first().map_or(0, |a| a.opinion.len())
    }

    pub fn gan_dim(&self) -> usize {
        self.gan.values().next().map_or(0, |b| b.g1.len())
    }

    pub fn q1(&self) -> f64 {
        let mut parts = vec![self.reservoir];
        parts.extend(self.gan.values().map(GanBlock::norm_sq_total));
        compensated_sum(&parts)
    }

    pub fn q2(&self) -> Vec<i64> {
        let mut q = vec![0i64; self.opinion_dim()];
        for a in &self.agents {
            for (qi, &s) in q.iter_mut().zip(&a.opinion) {
                *qi += s as i64;
            }
        }
        q
    }

    pub fn q3(&self) -> f64 {
        let m: Vec<f64> = self.agents.iter().map(|a| a.memory).collect();
        compensated_sum(&m)
    }

    /// Makes the current conserved values the reference.
    pub fn reset_reference(&mut self) {
        self.reference = Conserved { q1: self.q1(), q2: self.q2(), q3: self.q3() };
    }

    pub fn memory_field(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.memory).collect()
    }

    pub fn phi_field(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.phi).collect()
    }

    pub fn temperature_field(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.temperature).collect()
    }

    /// Mean member temperature.
    pub fn triad_temperature(&self, t: &Triad) -> f64 {
        t.iter().map(|&a| self.agents[a].temperature).sum::<f64>() / 3.0
    }

    /// Checks every invariant; empty iff valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut flag = |code: &'static str, detail: String| out.push(Violation { code, detail });
        let n = self.n_agents();
        if self.hyper.n_agents() != n {
            flag("agents", format!("{} agents but hypergraph has {}", n, self.hyper.n_agents()));
            return out;
        }
        if let Some(msg) = self.hyper.check_cache() {
            flag("2-section cache", msg);
        }
        let m = self.opinion_dim();
        let grid = self.agents.first().map_or(0, |a| a.knowledge.len());
        for (i, a) in self.agents.iter().enumerate() {
            if a.opinion.len() != m || a.opinion.iter().any(|&s| s != 1 && s != -1) {
                flag("opinion", format!("agent {i} opinion {:?}", a.opinion));
            }
            if let Some(msg) = a.knowledge.check() {
                flag("knowledge", format!("agent {i}: {msg}"));
            }
            if a.knowledge.len() != grid {
                flag("knowledge", format!("agent {i} on a different grid"));
            }
            if !(a.temperature > 0.0) || !a.temperature.is_finite() {
                flag("temperature", format!("agent {i} T = {}", a.temperature));
            }
            if !(0.0..TAU).contains(&a.theta) {
                flag("phase", format!("agent {i} theta = {}", a.theta));
            }
            if !a.phi.is_finite() || !a.memory.is_finite() {
                flag("field", format!("agent {i} phi or memory not finite"));
            }
        }
        let triads = self.hyper.triad_list();
        let mut incidences = 0;
        for t in &triads {
            for &a in t {
                incidences += 1;
                if self.roles.get(a, t).is_none() {
                    flag("roles", format!("incidence ({a}, {t:?}) has no role"));
                }
            }
        }
        if self.roles.len() != incidences {
            flag("roles", format!("{} roles for {} active incidences", self.roles.len(), incidences));
        }
        if self.gan.len() != triads.len() || triads.iter().any(|t| !self.gan.contains_key(t)) {
            flag("gan", "parameter blocks do not match active triads".into());
        }
        let p = self.gan_dim();
        for (t, b) in &self.gan {
            if b.g1.len() != p || b.g2.len() != p || b.d.len() != p {
                flag("gan", format!("triad {t:?} block dimension"));
            }
            for (name, v, c) in [("G1", &b.g1, self.c_g), ("G2", &b.g2, self.c_g), ("D", &b.d, self.c_d)] {
                let e = norm_sq(v) - c;
                if !(e.abs() <= NORM_TOL) {
                    flag("C1 norm", format!("triad {t:?} {name}: |v|^2 - c = {e:e}"));
                }
            }
        }
        let e = &self.embeddings;
        if e.node.len() != n
            || e.role.len() != 3
            || e.success.len() != triads.len()
            || e.nonlocal.len() != triads.len()
            || triads.iter().any(|t| !e.success.contains_key(t) || !e.nonlocal.contains_key(t))
        {
            flag("embeddings", "filter channels do not match agents and triads".into());
        }
        if !e.all_finite() {
            flag("embeddings", "non-finite filter state".into());
        }
        if !(self.reservoir >= -NORM_TOL) {
            flag("reservoir", format!("reservoir = {}", self.reservoir));
        }
        let d1 = self.q1() - self.reference.q1;
        if !(d1.abs() <= NORM_TOL) {
            flag("Q1 drift", format!("{d1:e}"));
        }
        let q2 = self.q2();
        if q2 != self.reference.q2 {
            flag("Q2 drift", format!("{:?} != reference {:?}", q2, self.reference.q2));
        }
        let d3 = self.q3() - self.reference.q3;
        if !(d3.abs() <= NORM_TOL * (1.0 + self.reference.q3.abs())) {
            flag("Q3 drift", format!("{d3:e}"));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
