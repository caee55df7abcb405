//! Hamiltonian components, role and formation energies, and the bilinear
//! adversarial objective of a triad.
//!
//! Edge coefficients are the scalar parameter times the edge weight, so a
//! weighted 2-section modulates every pair term consistently.

use serde::{Deserialize, Serialize};

use crate::agentstate::{
    barycenter2, dot, hamming_to_median, median_opinion, norm_sq, wasserstein2_sq, Configuration, GanBlock,
    Role,
};
use crate::error::{Error, Result};
use crate::hypergraph::{Triad, TriadicHypergraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Opinion coupling `J`.
    pub j: f64,
    /// Uniform external field, applied to every opinion component.
    pub h: f64,
    /// Edge penalty on `|s_i - s_j|^2`.
    pub kappa: f64,
    /// Triadic product coupling.
    pub lambda_tau: f64,
    /// Memory stiffness.
    pub kappa_m: f64,
    /// Formation/coherence coupling strength.
    pub gamma_tau: f64,
    /// Role-energy weights.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Formation potential: on-site, triad product, pair quartic.
    pub a: f64,
    pub g: f64,
    pub h_pair: f64,
    /// Curvature weights.
    pub kappa_curv: f64,
    pub lambda_curv: f64,
    /// History weight.
    pub gamma_h: f64,
    /// Direct, indirect and global memory couplings of the effective
    /// formation energy.
    pub alpha_m: f64,
    pub beta_m: f64,
    pub gamma_m: f64,
    pub beta_val: f64,
    pub lambda_mem: f64,
    /// Generator alignment coupling between neighbouring triads.
    pub j_form: f64,
    /// Weight of filtered memory in barrier-lowering terms (birth/death,
    /// frustration, validation).
    pub gamma_mem: f64,
    /// Role compatibility `J(r', r_j)`, rows and columns in G1, G2, D order.
    pub role_compat: [[f64; 3]; 3],
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            j: 1.0,
            h: 0.0,
            kappa: 0.0,
            lambda_tau: 0.0,
            kappa_m: 1.0,
            gamma_tau: 0.5,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            lambda: 0.5,
            a: 0.1,
            g: -0.5,
            h_pair: 0.05,
            kappa_curv: 0.1,
            lambda_curv: 0.0,
            gamma_h: 0.5,
            alpha_m: 0.1,
            beta_m: 0.1,
            gamma_m: 0.1,
            beta_val: 1.0,
            lambda_mem: 0.1,
            j_form: 1.0,
            gamma_mem: 1.0,
            role_compat: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.j, self.h, self.kappa, self.lambda_tau, self.kappa_m, self.gamma_tau, self.alpha, self.beta,
            self.gamma, self.lambda, self.a, self.g, self.h_pair, self.kappa_curv, self.lambda_curv, self.gamma_h,
            self.alpha_m, self.beta_m, self.gamma_m, self.beta_val, self.lambda_mem, self.j_form, self.gamma_mem,
        ];
        if all.iter().chain(self.role_compat.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("energy coefficients must be finite".into()));
        }
        for (name, v) in [("kappa", self.kappa), ("kappa_m", self.kappa_m), ("h_pair", self.h_pair)] {
            if v < 0.0 {
                return Err(Error::Parameter(format!("energy.{name} = {v} must be nonnegative")));
            }
        }
        Ok(())
    }
}

fn check_incidence(cfg: &Configuration, i: usize, t: &Triad) -> Result<()> {
    if !cfg.hyper.contains(t) {
        return Err(Error::InactiveTriad(*t));
    }
    if !t.contains(&i) {
        return Err(Error::Parameter(format!("agent {i} is not a member of {t:?}")));
    }
    Ok(())
}

fn others(t: &Triad, i: usize) -> [usize; 2] {
    let mut o = [0; 2];
    let mut k = 0;
    for &a in t {
        if a != i {
            o[k] = a;
            k += 1;
        }
    }
    o
}

/// `alpha W2^2(K_i, Bar(K_j, K_k)) + beta d_H(s_i, Med(s_j, s_k))`.
pub fn role_local_energy(cfg: &Configuration, p: &EnergyParams, i: usize, t: &Triad) -> Result<f64> {
    check_incidence(cfg, i, t)?;
    let [j, k] = others(t, i);
    let (ai, aj, ak) = (&cfg.agents[i], &cfg.agents[j], &cfg.agents[k]);
    let bar = barycenter2(&aj.knowledge, &ak.knowledge);
    let med = median_opinion(&aj.opinion, &ak.opinion)?;
    Ok(p.alpha * wasserstein2_sq(&ai.knowledge, &bar) + p.beta * hamming_to_median(&ai.opinion, &med)?)
}

/// Assignment energies for G1, G2, D at incidence `(i, t)`.
pub fn role_delta_energies(cfg: &Configuration, p: &EnergyParams, i: usize, t: &Triad) -> Result<[f64; 3]> {
    let local = role_local_energy(cfg, p, i, t)?;
    let others = others(t, i);
    Ok(Role::ALL.map(|r| {
        let compat: f64 = others
            .iter()
            .filter_map(|&j| cfg.roles.get(j, t))
            .map(|rj| p.role_compat[r.index()][rj.index()])
            .sum();
        local + p.gamma * compat + p.lambda * cfg.embeddings.role_value(r)
    }))
}

pub fn role_delta_energy(cfg: &Configuration, p: &EnergyParams, i: usize, t: &Triad, r: Role) -> Result<f64> {
    Ok(role_delta_energies(cfg, p, i, t)?[r.index()])
}

fn triad_product(cfg: &Configuration, t: &Triad, l: usize) -> f64 {
    t.iter().map(|&a| cfg.agents[a].opinion[l] as f64).product()
}

fn pair_group_energy(cfg: &Configuration, p: &EnergyParams, i: usize, j: usize) -> f64 {
    let w = cfg.hyper.weight(i, j);
    let (si, sj) = (&cfg.agents[i].opinion, &cfg.agents[j].opinion);
    let diff_sq: i32 = si.iter().zip(sj).map(|(&a, &b)| (a - b) as i32 * (a - b) as i32).sum();
    -p.j * w * dot(si, sj) as f64 + 0.5 * p.kappa * w * diff_sq as f64
}

fn site_group_energy(cfg: &Configuration, p: &EnergyParams, i: usize) -> f64 {
    -p.h * cfg.agents[i].opinion.iter().map(|&s| s as f64).sum::<f64>()
}

fn triad_group_energy(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> f64 {
    if p.lambda_tau == 0.0 {
        return 0.0;
    }
    -p.lambda_tau * (0..cfg.opinion_dim()).map(|l| triad_product(cfg, t, l)).sum::<f64>()
}

/// Opinion Hamiltonian: pair coupling, field, edge penalty, triad products.
pub fn group_hamiltonian(cfg: &Configuration, p: &EnergyParams) -> f64 {
    let pairs: f64 = cfg.hyper.edges().map(|(i, j)| pair_group_energy(cfg, p, i, j)).sum();
    let sites: f64 = (0..cfg.n_agents()).map(|i| site_group_energy(cfg, p, i)).sum();
    let triads: f64 = cfg.hyper.triads().map(|t| triad_group_energy(cfg, p, t)).sum();
    pairs + sites + triads
}

/// Sum of the opinion-Hamiltonian terms that involve any of `nodes`.
/// Differences of this quantity equal differences of the full Hamiltonian
/// for moves that only change those nodes.
pub fn group_energy_touching(cfg: &Configuration, p: &EnergyParams, nodes: &[usize]) -> f64 {
    let mut e = 0.0;
    let h = &cfg.hyper;
    for (k, &i) in nodes.iter().enumerate() {
        e += site_group_energy(cfg, p, i);
        for j in h.neighbors(i) {
            // pairs inside the node set are counted from their first member
            if let Some(pos) = nodes.iter().position(|&x| x == j) {
                if pos < k {
                    continue;
                }
            }
            e += pair_group_energy(cfg, p, i, j);
        }
        for t in h.triads_of(i) {
            if t.iter().any(|a| nodes[..k].contains(a)) {
                continue;
            }
            e += triad_group_energy(cfg, p, t);
        }
    }
    e
}

/// `1/2 sum_edges kappa_M w (M_i - M_j)^2`.
pub fn memory_hamiltonian(cfg: &Configuration, p: &EnergyParams) -> f64 {
    cfg.hyper
        .edges()
        .map(|(i, j)| {
            let d = cfg.agents[i].memory - cfg.agents[j].memory;
            0.5 * p.kappa_m * cfg.hyper.weight(i, j) * d * d
        })
        .sum()
}

/// Triad opinion coherence `|(1/3) sum_a s_a|`.
pub fn triad_coherence(cfg: &Configuration, t: &Triad) -> f64 {
    (0..cfg.opinion_dim())
        .map(|l| {
            let s: f64 = t.iter().map(|&a| cfg.agents[a].opinion[l] as f64).sum::<f64>() / 3.0;
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (norm_sq(a) * norm_sq(b)).sqrt()
}

/// Generator alignment of an active triad with its overlapping neighbours;
/// 0 when it has none.
pub fn triad_alignment(cfg: &Configuration, t: &Triad) -> f64 {
    let nb = cfg.hyper.triad_neighbors(t);
    let Some(bt) = cfg.gan.get(t) else { return 0.0 };
    let total: f64 = nb
        .iter()
        .filter_map(|u| cfg.gan.get(u))
        .map(|bu| cosine(&bt.g1, &bu.g1) + cosine(&bt.g2, &bu.g2))
        .sum();
    total / (2.0 * nb.len().max(1) as f64)
}

/// `-sum_t gamma_tau * alignment_t * coherence_t`.
pub fn coupling_hamiltonian(cfg: &Configuration, p: &EnergyParams) -> f64 {
    -cfg.hyper
        .triads()
        .map(|t| p.gamma_tau * triad_alignment(cfg, t) * triad_coherence(cfg, t))
        .sum::<f64>()
}

/// Triad data summary: mean of member knowledge means in coordinate 0.
pub fn data_summary(cfg: &Configuration, t: &Triad, dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    x[0] = t.iter().map(|&a| cfg.agents[a].knowledge.mean()).sum::<f64>() / 3.0;
    x
}

/// Objective value and gradients of one triad block.
#[derive(Clone, Debug, PartialEq)]
pub struct GanEval {
    pub value: f64,
    pub grad_g1: Vec<f64>,
    pub grad_g2: Vec<f64>,
    pub grad_d: Vec<f64>,
}

/// `sum_m D.(x - G_m) - |D|^2/2 - lambda_mem * m_tilde`.
pub fn gan_objective(b: &GanBlock, xbar: &[f64], m_tilde: f64, lambda_mem: f64) -> GanEval {
    let p = b.d.len();
    let mut value = -0.5 * norm_sq(&b.d) - lambda_mem * m_tilde;
    let mut grad_d = vec![0.0; p];
    for g in b.generators() {
        for k in 0..p {
            value += b.d[k] * (xbar[k] - g[k]);
            grad_d[k] += xbar[k] - g[k];
        }
    }
    for k in 0..p {
        grad_d[k] -= b.d[k];
    }
    let neg_d: Vec<f64> = b.d.iter().map(|x| -x).collect();
    GanEval { value, grad_g1: neg_d.clone(), grad_g2: neg_d, grad_d }
}

/// Sum of triad objectives over active triads.
pub fn formation_hamiltonian(cfg: &Configuration, p: &EnergyParams) -> f64 {
    cfg.gan
        .iter()
        .map(|(t, b)| {
            let x = data_summary(cfg, t, b.d.len());
            gan_objective(b, &x, cfg.embeddings.success_value(t), p.lambda_mem).value
        })
        .sum()
}

pub fn total_hamiltonian(cfg: &Configuration, p: &EnergyParams) -> f64 {
    formation_hamiltonian(cfg, p) + group_hamiltonian(cfg, p) + memory_hamiltonian(cfg, p) + coupling_hamiltonian(cfg, p)
}

/// Formation potential of a node field and its gradient.
pub fn potential_of(h: &TriadicHypergraph, p: &EnergyParams, phi: &[f64]) -> (f64, Vec<f64>) {
    let mut v = 0.0;
    let mut grad = vec![0.0; phi.len()];
    for (i, &x) in phi.iter().enumerate() {
        v += p.a * x * x;
        grad[i] += 2.0 * p.a * x;
    }
    for t in h.triads() {
        let [a, b, c] = *t;
        v += p.g * phi[a] * phi[b] * phi[c];
        grad[a] += p.g * phi[b] * phi[c];
        grad[b] += p.g * phi[a] * phi[c];
        grad[c] += p.g * phi[a] * phi[b];
    }
    for (i, j) in h.edges() {
        let hij = p.h_pair * h.weight(i, j);
        let (x, y) = (phi[i], phi[j]);
        v += hij * x * x * y * y;
        grad[i] += 2.0 * hij * x * y * y;
        grad[j] += 2.0 * hij * y * x * x;
    }
    (v, grad)
}

pub fn formation_potential(cfg: &Configuration, p: &EnergyParams) -> (f64, Vec<f64>) {
    potential_of(&cfg.hyper, p, &cfg.phi_field())
}

pub fn triad_phi(cfg: &Configuration, t: &Triad) -> f64 {
    t.iter().map(|&a| cfg.agents[a].phi).sum::<f64>() / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TopoEnergy {
    pub local: f64,
    pub nonlocal: f64,
    pub curvature: f64,
    pub total: f64,
}

/// Edge-sharing neighbours of `s` within the active set plus `extra`.
fn augmented_edge_neighbors(h: &TriadicHypergraph, s: &Triad, extra: Option<&Triad>) -> Vec<Triad> {
    let mut nb = h.triad_edge_neighbors(s);
    if let Some(x) = extra {
        if x != s && !h.contains(x) && crate::hypergraph::overlap(s, x) == 2 {
            nb.push(*x);
        }
    }
    nb
}

/// Curvature energy of `t`, computed as if `t` were active.
pub fn curvature_energy(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> f64 {
    let extra = (!cfg.hyper.contains(t)).then_some(t);
    let l3 = |s: &Triad| -> f64 {
        let f = triad_phi(cfg, s);
        augmented_edge_neighbors(&cfg.hyper, s, extra).iter().map(|u| f - triad_phi(cfg, u)).sum()
    };
    let first = l3(t);
    let mut e = p.kappa_curv * first * first;
    if p.lambda_curv != 0.0 {
        let second: f64 = augmented_edge_neighbors(&cfg.hyper, t, extra).iter().map(|u| first - l3(u)).sum();
        e += p.lambda_curv * second * second;
    }
    e
}

/// Local generator alignment, filtered nonlocal signal and curvature of an
/// active triad.
pub fn topo_energy(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> Result<TopoEnergy> {
    if !cfg.hyper.contains(t) {
        return Err(Error::InactiveTriad(*t));
    }
    Ok(topo_energy_unchecked(cfg, p, t))
}

fn topo_energy_unchecked(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> TopoEnergy {
    let local = match cfg.gan.get(t) {
        Some(bt) => {
            -p.j_form
                * cfg
                    .hyper
                    .triad_neighbors(t)
                    .iter()
                    .filter_map(|u| cfg.gan.get(u))
                    .map(|bu| {
                        bt.g1.iter().zip(&bu.g1).map(|(x, y)| x * y).sum::<f64>()
                            + bt.g2.iter().zip(&bu.g2).map(|(x, y)| x * y).sum::<f64>()
                    })
                    .sum::<f64>()
        }
        None => 0.0,
    };
    let nonlocal = cfg.embeddings.nonlocal_value(t);
    let curvature = curvature_energy(cfg, p, t);
    TopoEnergy { local, nonlocal, curvature, total: local + nonlocal + curvature }
}

/// Drive of the nonlocal channel of `t`: `sum_t' w phibar_t phibar_t'`.
pub fn nonlocal_drive(cfg: &Configuration, t: &Triad) -> f64 {
    let f = triad_phi(cfg, t);
    cfg.hyper.triad_edge_neighbors(t).iter().map(|u| f * triad_phi(cfg, u)).sum()
}

/// Sum of pairwise squared W2 distances among the members.
pub fn compatibility_energy(cfg: &Configuration, t: &Triad) -> f64 {
    let k = |a: usize| &cfg.agents[a].knowledge;
    wasserstein2_sq(k(t[0]), k(t[1])) + wasserstein2_sq(k(t[0]), k(t[2])) + wasserstein2_sq(k(t[1]), k(t[2]))
}

/// `exp(-E_comp)`.
pub fn triad_compatibility(cfg: &Configuration, t: &Triad) -> f64 {
    (-compatibility_energy(cfg, t)).exp()
}

/// `E_comp + E_hist + E_topo` for any candidate triad. For inactive
/// candidates the history, generator and nonlocal parts vanish.
pub fn formation_energy(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> f64 {
    let hist = -p.gamma_h * cfg.embeddings.success_value(t);
    let topo = if cfg.hyper.contains(t) {
        topo_energy_unchecked(cfg, p, t).total
    } else {
        curvature_energy(cfg, p, t)
    };
    compatibility_energy(cfg, t) + hist + topo
}

/// Memory components: triad mean, neighbour-triad mean, global mean.
pub fn memory_components(cfg: &Configuration, t: &Triad) -> (f64, f64, f64) {
    let triad_mean = |s: &Triad| s.iter().map(|&a| cfg.agents[a].memory).sum::<f64>() / 3.0;
    let direct = triad_mean(t);
    let nb = cfg.hyper.triad_neighbors(t);
    let indirect = if nb.is_empty() { 0.0 } else { nb.iter().map(triad_mean).sum::<f64>() / nb.len() as f64 };
    let global = cfg.agents.iter().map(|a| a.memory).sum::<f64>() / cfg.n_agents() as f64;
    (direct, indirect, global)
}

pub fn effective_formation_energy(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> f64 {
    let (d, i, g) = memory_components(cfg, t);
    formation_energy(cfg, p, t) + p.alpha_m * d + p.beta_m * i + p.gamma_m * g
}

/// `[J_t - cos(theta_i + theta_j + theta_k)] + gamma_mem * filtered triad memory`.
pub fn frustration(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> Result<f64> {
    if !cfg.hyper.contains(t) {
        return Err(Error::InactiveTriad(*t));
    }
    let phase: f64 = t.iter().map(|&a| cfg.agents[a].theta).sum();
    Ok(triad_compatibility(cfg, t) - phase.cos() + p.gamma_mem * cfg.embeddings.triad_mean_value(t))
}

/// Validation energy of the pair `(i, j)`.
pub fn validation_energy(cfg: &Configuration, p: &EnergyParams, i: usize, j: usize) -> Result<f64> {
    if !cfg.hyper.has_edge(i, j) {
        return Err(Error::Parameter(format!("({i}, {j}) is not a 2-section edge")));
    }
    let base = p.alpha * wasserstein2_sq(&cfg.agents[i].knowledge, &cfg.agents[j].knowledge);
    let lowered = base - p.gamma_mem * cfg.embeddings.pair_value(i, j);
    let mut shared = 0.0;
    for t in cfg.hyper.triads_of(i) {
        if t.contains(&j) {
            let k = t.iter().copied().find(|&a| a != i && a != j).unwrap();
            shared += (cfg.agents[i].phi + cfg.agents[j].phi + cfg.agents[k].phi) / 3.0;
        }
    }
    Ok(lowered + p.beta_val * shared)
}

/// Boltzmann distribution over the neighbours of `i` at temperature `T_i`.
/// An isolated agent keeps all mass on itself.
pub fn validation_distribution(cfg: &Configuration, p: &EnergyParams, i: usize) -> Result<Vec<(usize, f64)>> {
    let nb: Vec<usize> = cfg.hyper.neighbors(i).collect();
    if nb.is_empty() {
        return Ok(vec![(i, 1.0)]);
    }
    let t = cfg.agents[i].temperature;
    let e: Vec<f64> = nb.iter().map(|&j| validation_energy(cfg, p, i, j)).collect::<Result<_>>()?;
    let w = softmax(&e.iter().map(|x| -x / t).collect::<Vec<_>>());
    Ok(nb.into_iter().zip(w).collect())
}

/// Probability of the transition `i -> j`. The query tag labels the request
/// and does not enter the energy.
pub fn validation_transition_prob(
    cfg: &Configuration,
    p: &EnergyParams,
    i: usize,
    j: usize,
    _query: &str,
) -> Result<f64> {
    Ok(validation_distribution(cfg, p, i)?.into_iter().find(|&(k, _)| k == j).map_or(0.0, |(_, w)| w))
}

/// Numerically stable softmax of log-weights.
pub fn softmax(logw: &[f64]) -> Vec<f64> {
    let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logw.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agentstate::{init_configuration, KnowledgeState};
    use crate::params::ModelParams;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(n: usize, m: usize, triads: Vec<[usize; 3]>, seed: u64) -> Configuration {
        let mut p = ModelParams { n_agents: n, opinion_dim: m, ..Default::default() };
        p.init.structure = "explicit".into();
        p.init.triads = triads;
        init_configuration(&p, seed).unwrap()
    }

    fn set_spins(cfg: &mut Configuration, s: &[i8]) {
        for (a, &x) in cfg.agents.iter_mut().zip(s) {
            a.opinion = vec![x];
        }
    }

    fn ising(j: f64, lambda_tau: f64) -> EnergyParams {
        EnergyParams { j, h: 0.0, kappa: 0.0, lambda_tau, ..Default::default() }
    }

    #[test]
    fn group_hamiltonian_examples() {
        let mut cfg = config(3, 1, vec![[0, 1, 2]], 1);
        set_spins(&mut cfg, &[1, 1, 1]);
        assert_eq!(group_hamiltonian(&cfg, &ising(1.0, 0.0)), -3.0);
        set_spins(&mut cfg, &[1, 1, -1]);
        assert_eq!(group_hamiltonian(&cfg, &ising(1.0, 0.0)), 1.0);
        assert_eq!(group_hamiltonian(&cfg, &ising(1.0, 1.0)), 2.0);
    }

    #[test]
    fn role_local_examples() {
        let mut cfg = config(3, 3, vec![[0, 1, 2]], 2);
        for a in &mut cfg.agents {
            a.opinion = vec![1, 1, -1];
        }
        let p = EnergyParams::default();
        assert_eq!(role_local_energy(&cfg, &p, 0, &[0, 1, 2]).unwrap(), 0.0);
        cfg.agents[0].opinion = vec![-1, -1, -1];
        assert_eq!(role_local_energy(&cfg, &p, 0, &[0, 1, 2]).unwrap(), 2.0 * p.beta);
        assert!(role_local_energy(&cfg, &p, 0, &[0, 1, 3]).is_err());
    }

    /// Straight-line recomputation of the local role energy from raw
    /// quantile functions and componentwise votes.
    fn local_energy_oracle(cfg: &Configuration, p: &EnergyParams, i: usize, j: usize, k: usize) -> f64 {
        let n = 1 << 14;
        let q = |s: &KnowledgeState, u: f64| {
            let mut c = 0.0;
            for (x, pr) in s.probs().iter().enumerate() {
                c += pr;
                if u <= c {
                    return x as f64 / s.len() as f64;
                }
            }
            (s.len() - 1) as f64 / s.len() as f64
        };
        let (ki, kj, kk) = (&cfg.agents[i].knowledge, &cfg.agents[j].knowledge, &cfg.agents[k].knowledge);
        // the barycentre binned to the grid, rebuilt independently: each quantile
        // midpoint split linearly between neighbouring grid points
        let grid = ki.len();
        let mut bar = vec![0.0; grid];
        for s in 0..n {
            let u = (s as f64 + 0.5) / n as f64;
            let pos = 0.5 * (q(kj, u) + q(kk, u)) * grid as f64;
            let lo = pos.floor().min((grid - 1) as f64);
            let frac = if (pos - pos.round()).abs() < 1e-9 { 0.0 } else { pos - lo };
            let lo = if frac == 0.0 { pos.round() as usize } else { lo as usize };
            bar[lo] += (1.0 - frac) / n as f64;
            if frac > 0.0 {
                bar[(lo + 1).min(grid - 1)] += frac / n as f64;
            }
        }
        let bar = KnowledgeState::from_weights(&bar).unwrap();
        let w2: f64 = (0..n)
            .map(|s| {
                let u = (s as f64 + 0.5) / n as f64;
                (q(ki, u) - q(&bar, u)).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let mut dh = 0.0;
        for l in 0..cfg.opinion_dim() {
            let (si, sj, sk) = (cfg.agents[i].opinion[l], cfg.agents[j].opinion[l], cfg.agents[k].opinion[l]);
            dh += if sj != sk { 0.5 } else if si != sj { 1.0 } else { 0.0 };
        }
        p.alpha * w2 + p.beta * dh
    }

    #[test]
    fn role_local_matches_oracle_on_random_triads() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..10 {
            let mut cfg = config(5, 3, vec![[0, 2, 4]], seed);
            for a in &mut cfg.agents {
                let w: Vec<f64> = (0..16).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() }).collect();
                a.knowledge = KnowledgeState::from_weights(&w).unwrap();
            }
            let p = EnergyParams::default();
            let got = role_local_energy(&cfg, &p, 2, &[0, 2, 4]).unwrap();
            let want = local_energy_oracle(&cfg, &p, 2, 0, 4);
            assert!((got - want).abs() < 2e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn role_delta_examples() {
        let mut cfg = config(3, 1, vec![[0, 1, 2]], 3);
        let t = [0, 1, 2];
        cfg.roles.set(1, t, Role::G1);
        cfg.roles.set(2, t, Role::G2);
        let p = EnergyParams { lambda: 0.0, ..Default::default() };
        let local = role_local_energy(&cfg, &p, 0, &t).unwrap();
        assert_eq!(role_delta_energy(&cfg, &p, 0, &t, Role::D).unwrap(), local);
        assert_eq!(role_delta_energy(&cfg, &p, 0, &t, Role::G1).unwrap(), local + p.gamma);
        let p0 = EnergyParams { lambda: 0.0, gamma: 0.0, ..Default::default() };
        let e = role_delta_energies(&cfg, &p0, 0, &t).unwrap();
        assert!(e[0] == e[1] && e[1] == e[2]);
    }

    #[test]
    fn memory_and_coupling_examples() {
        let mut cfg = config(6, 1, vec![[0, 1, 2]], 4);
        let p = EnergyParams::default();
        for a in &mut cfg.agents {
            a.memory = 0.7;
        }
        assert_eq!(memory_hamiltonian(&cfg, &p), 0.0);
        assert_eq!(triad_alignment(&cfg, &[0, 1, 2]), 0.0);
        assert_eq!(coupling_hamiltonian(&cfg, &p), 0.0);

        let mut cfg = config(4, 1, vec![[0, 1, 2], [1, 2, 3]], 5);
        let b = cfg.gan[&[0, 1, 2]].clone();
        cfg.gan.insert([1, 2, 3], b);
        assert!((triad_alignment(&cfg, &[0, 1, 2]) - 1.0).abs() < 1e-12);
        assert!((triad_alignment(&cfg, &[1, 2, 3]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gan_objective_examples() {
        let b = GanBlock { g1: vec![0.3, 0.4], g2: vec![-0.1, 0.2], d: vec![0.0, 0.0] };
        let e = gan_objective(&b, &[0.5, 0.0], 0.0, 0.1);
        assert_eq!(e.value, 0.0);
        assert!(e.grad_g1.iter().all(|&x| x == 0.0));
        let x = vec![0.5, -0.2];
        let b = GanBlock { g1: x.clone(), g2: x.clone(), d: vec![0.7, -1.1] };
        let e = gan_objective(&b, &x, 0.0, 0.0);
        assert_eq!(e.grad_d, vec![-0.7, 1.1]);
    }

    #[test]
    fn potential_examples() {
        let mut cfg = config(3, 1, vec![[0, 1, 2]], 6);
        let p = EnergyParams { a: 0.0, h_pair: 0.0, g: 1.0, ..Default::default() };
        let (v, g) = formation_potential(&cfg, &p);
        assert_eq!((v, g.clone()), (0.0, vec![0.0; 3]));
        for a in &mut cfg.agents {
            a.phi = 1.0;
        }
        let (v, g) = formation_potential(&cfg, &p);
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![1.0; 3]);
    }

    #[test]
    fn topo_examples() {
        let mut cfg = config(6, 1, vec![[0, 1, 2]], 7);
        let p = EnergyParams::default();
        let e = topo_energy(&cfg, &p, &[0, 1, 2]).unwrap();
        assert_eq!((e.local, e.curvature), (0.0, 0.0));
        assert!(topo_energy(&cfg, &p, &[3, 4, 5]).is_err());

        cfg = config(4, 1, vec![[0, 1, 2], [1, 2, 3]], 8);
        let b = cfg.gan[&[0, 1, 2]].clone();
        cfg.gan.insert([1, 2, 3], b);
        let p1 = EnergyParams { j_form: 1.0, ..Default::default() };
        for t in [[0, 1, 2], [1, 2, 3]] {
            let e = topo_energy(&cfg, &p1, &t).unwrap();
            assert!((e.local + 2.0 * cfg.c_g).abs() < 1e-12);
        }
        for a in &mut cfg.agents {
            a.phi = 0.4;
        }
        let p2 = EnergyParams { lambda_curv: 0.3, ..Default::default() };
        assert_eq!(topo_energy(&cfg, &p2, &[0, 1, 2]).unwrap().curvature, 0.0);
    }

    #[test]
    fn formation_examples() {
        let mut cfg = config(6, 1, vec![[0, 1, 2], [2, 3, 4]], 9);
        let p = EnergyParams::default();
        assert_eq!(compatibility_energy(&cfg, &[0, 1, 5]), 0.0);
        assert_eq!(triad_compatibility(&cfg, &[0, 1, 2]), 1.0);
        for a in &mut cfg.agents {
            a.theta = 0.0;
        }
        assert_eq!(frustration(&cfg, &p, &[0, 1, 2]).unwrap(), 0.0);
        for a in &mut cfg.agents {
            a.memory = 0.25;
        }
        let t = [2, 3, 4];
        let expected = formation_energy(&cfg, &p, &t) + (p.alpha_m + p.beta_m + p.gamma_m) * 0.25;
        assert!((effective_formation_energy(&cfg, &p, &t) - expected).abs() < 1e-15);
    }

    #[test]
    fn validation_examples() {
        let cfg = config(5, 1, vec![[0, 1, 2], [0, 3, 4]], 10);
        let p = EnergyParams::default();
        let dist = validation_distribution(&cfg, &p, 0).unwrap();
        assert_eq!(dist.len(), 4);
        assert!(dist.iter().all(|&(_, w)| (w - 0.25).abs() < 1e-15));
        assert!((dist.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);

        let mut cfg = cfg;
        cfg.agents[1].knowledge = KnowledgeState::delta(16, 0);
        cfg.agents[3].knowledge = KnowledgeState::delta(16, 15);
        let p = EnergyParams { beta_val: 0.0, gamma_mem: 0.0, ..Default::default() };
        let dist = validation_distribution(&cfg, &p, 0).unwrap();
        let t = cfg.agents[0].temperature;
        let e: Vec<f64> = dist.iter().map(|&(j, _)| p.alpha * wasserstein2_sq(&cfg.agents[0].knowledge, &cfg.agents[j].knowledge)).collect();
        let z: f64 = e.iter().map(|x| (-x / t).exp()).sum();
        for ((_, w), x) in dist.iter().zip(&e) {
            assert!((w - (-x / t).exp() / z).abs() < 1e-14);
        }
        let isolated = config(6, 1, vec![[0, 1, 2]], 11);
        assert_eq!(validation_distribution(&isolated, &p, 5).unwrap(), vec![(5, 1.0)]);
        assert_eq!(validation_transition_prob(&isolated, &p, 5, 0, "q").unwrap(), 0.0);
    }

    #[test]
    fn local_group_energy_differences_match_full() {
        let mut cfg = config(7, 2, vec![[0, 1, 2], [1, 2, 3], [3, 4, 5], [0, 5, 6]], 12);
        let p = EnergyParams { h: 0.3, kappa: 0.2, lambda_tau: 0.7, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (i, j) = (rng.gen_range(0..7), rng.gen_range(0..7));
            if i == j {
                continue;
            }
            let full0 = group_hamiltonian(&cfg, &p);
            let loc0 = group_energy_touching(&cfg, &p, &[i, j]);
            let si = cfg.agents[i].opinion.clone();
            cfg.agents[i].opinion = cfg.agents[j].opinion.clone();
            cfg.agents[j].opinion = vec![-si[0], si[1]];
            let d_full = group_hamiltonian(&cfg, &p) - full0;
            let d_loc = group_energy_touching(&cfg, &p, &[i, j]) - loc0;
            assert!((d_full - d_loc).abs() < 1e-12);
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn gan_gradients_match_finite_differences(
            v in prop::collection::vec(-2.0f64..2.0, 12), x0 in 0.0f64..1.0, m in 0.0f64..2.0
        ) {
            let b = GanBlock { g1: v[0..4].to_vec(), g2: v[4..8].to_vec(), d: v[8..12].to_vec() };
            let x = vec![x0, 0.0, 0.0, 0.0];
            let e = gan_objective(&b, &x, m, 0.1);
            let h = 1e-6;
            for k in 0..4 {
                for (which, grad) in [(0, &e.grad_g1), (1, &e.grad_g2), (2, &e.grad_d)] {
                    let mut bp = b.clone();
                    let mut bm = b.clone();
                    let (vp, vm) = match which { 0 => (&mut bp.g1, &mut bm.g1), 1 => (&mut bp.g2, &mut bm.g2), _ => (&mut bp.d, &mut bm.d) };
                    vp[k] += h;
                    vm[k] -= h;
                    let fd = (gan_objective(&bp, &x, m, 0.1).value - gan_objective(&bm, &x, m, 0.1).value) / (2.0 * h);
                    prop_assert!(rel_err(fd, grad[k]) < 1e-6);
                }
            }
        }

        #[test]
        fn potential_gradient_matches_finite_differences(phi in prop::collection::vec(-1.5f64..1.5, 6)) {
            let h = TriadicHypergraph::from_triads(6, &[[0, 1, 2], [1, 2, 3], [3, 4, 5]]).unwrap();
            let p = EnergyParams::default();
            let (_, g) = potential_of(&h, &p, &phi);
            let eps = 1e-6;
            for i in 0..6 {
                let mut a = phi.clone();
                let mut b = phi.clone();
                a[i] += eps;
                b[i] -= eps;
                let fd = (potential_of(&h, &p, &a).0 - potential_of(&h, &p, &b).0) / (2.0 * eps);
                prop_assert!(rel_err(fd, g[i]) < 1e-7);
            }
        }

        #[test]
        fn spin_flip_symmetry(seed in any::<u64>()) {
            let mut cfg = config(6, 2, vec![[0, 1, 2], [2, 3, 4], [1, 4, 5]], seed);
            let p0 = EnergyParams { h: 0.0, lambda_tau: 0.0, kappa: 0.4, ..Default::default() };
            let p1 = EnergyParams { lambda_tau: 0.8, ..p0.clone() };
            let e0 = group_hamiltonian(&cfg, &p0);
            let triadic = group_hamiltonian(&cfg, &p1) - e0;
            for a in &mut cfg.agents {
                a.opinion.iter_mut().for_each(|s| *s = -*s);
            }
            prop_assert!((group_hamiltonian(&cfg, &p0) - e0).abs() < 1e-12);
            prop_assert!(((group_hamiltonian(&cfg, &p1) - group_hamiltonian(&cfg, &p0)) + triadic).abs() < 1e-12);
        }
    }
}
