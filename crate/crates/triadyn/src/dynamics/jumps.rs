use rand::Rng;

use super::{Event, EventKind};
use crate::agentstate::{Configuration, GanBlock, Role};
use crate::energy::{formation_energy, group_energy_touching, role_delta_energies, softmax, EnergyParams};
use crate::error::{Error, Result};
use crate::hypergraph::{triad, Triad};
use crate::params::ModelParams;

/// Largest birth candidate pool; beyond this a fresh uniform sample of this
/// size is drawn per event.
pub const CANDIDATE_POOL: usize = 20_000;

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>();
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    probs.len() - 1
}

/// Heat-bath probabilities over G1, G2, D at incidence `(i, t)`.
pub fn role_probabilities(cfg: &Configuration, p: &EnergyParams, i: usize, t: &Triad) -> Result<[f64; 3]> {
    let e = role_delta_energies(cfg, p, i, t)?;
    let temp = cfg.agents[i].temperature;
    let w = softmax(&e.map(|x| -x / temp));
    Ok([w[0], w[1], w[2]])
}

pub fn role_update<R: Rng + ?Sized>(
    cfg: &mut Configuration,
    p: &EnergyParams,
    i: usize,
    t: &Triad,
    rng: &mut R,
) -> Result<Event> {
    let probs = role_probabilities(cfg, p, i, t)?;
    let new = Role::ALL[sample_index(&probs, rng)];
    let old = cfg.roles.get(i, t);
    cfg.roles.set(i, *t, new);
    let from = old.map_or("-", Role::name);
    Ok(Event::new(cfg.time, EventKind::Role).agent(i).triad(*t).detail(format!("{from}->{}", new.name())))
}

/// Metropolis swap of the full opinion vectors of `i` and `j` at the edge-mean
/// temperature.
pub fn kawasaki_exchange<R: Rng + ?Sized>(
    cfg: &mut Configuration,
    p: &EnergyParams,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<Event> {
    if !cfg.hyper.has_edge(i, j) {
        return Err(Error::Parameter(format!("({i}, {j}) is not a 2-section edge")));
    }
    let ev = Event::new(cfg.time, EventKind::Exchange).agent(i);
    if cfg.agents[i].opinion == cfg.agents[j].opinion {
        return Ok(ev.detail(format!("{j} identity")));
    }
    let before = group_energy_touching(cfg, p, &[i, j]);
    swap_opinions(cfg, i, j);
    let delta = group_energy_touching(cfg, p, &[i, j]) - before;
    let t_bar = 0.5 * (cfg.agents[i].temperature + cfg.agents[j].temperature);
    let accept = delta <= 0.0 || rng.gen::<f64>() < (-delta / t_bar).exp();
    if !accept {
        swap_opinions(cfg, i, j);
    }
    Ok(ev.detail(format!("{j} {}", if accept { "accepted" } else { "rejected" })))
}

fn swap_opinions(cfg: &mut Configuration, i: usize, j: usize) {
    let si = std::mem::take(&mut cfg.agents[i].opinion);
    let sj = std::mem::replace(&mut cfg.agents[j].opinion, si);
    cfg.agents[i].opinion = sj;
}

/// Single-site heat-bath update of one opinion component. Does not conserve
/// the total opinion; intended for unconstrained sampling checks.
pub fn glauber_flip<R: Rng + ?Sized>(cfg: &mut Configuration, p: &EnergyParams, i: usize, l: usize, rng: &mut R) -> Event {
    cfg.agents[i].opinion[l] = 1;
    let e_up = group_energy_touching(cfg, p, &[i]);
    cfg.agents[i].opinion[l] = -1;
    let e_down = group_energy_touching(cfg, p, &[i]);
    let t = cfg.agents[i].temperature;
    let p_up = 1.0 / (1.0 + ((e_up - e_down) / t).exp());
    let s = if rng.gen::<f64>() < p_up { 1 } else { -1 };
    cfg.agents[i].opinion[l] = s;
    Event::new(cfg.time, EventKind::Flip).agent(i).detail(format!("{l} {s}"))
}

/// Inactive birth candidates: every inactive 3-subset when there are at most
/// `CANDIDATE_POOL` subsets, otherwise a uniform sample of that size.
pub fn birth_candidates<R: Rng + ?Sized>(cfg: &Configuration, rng: &mut R) -> Vec<Triad> {
    let n = cfg.n_agents();
    let total = n * n.saturating_sub(1) * n.saturating_sub(2) / 6;
    if total <= CANDIDATE_POOL {
        let mut out = Vec::with_capacity(total - cfg.hyper.n_triads());
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if !cfg.hyper.contains(&[a, b, c]) {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        return out;
    }
    let mut out = Vec::with_capacity(CANDIDATE_POOL);
    while out.len() < CANDIDATE_POOL {
        let pick = rand::seq::index::sample(rng, n, 3);
        let t = triad(pick.index(0), pick.index(1), pick.index(2)).unwrap();
        if !cfg.hyper.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn structural_energy(cfg: &Configuration, p: &EnergyParams, t: &Triad) -> f64 {
    formation_energy(cfg, p, t) + p.gamma_mem * cfg.embeddings.success_value(t)
}

/// Boltzmann birth of an inactive triad funded from the reservoir. Returns
/// `None` when no candidate exists.
pub fn triad_birth<R: Rng + ?Sized>(cfg: &mut Configuration, p: &ModelParams, rng: &mut R) -> Result<Option<Event>> {
    let cost = p.birth_cost();
    if cfg.reservoir < cost {
        return Ok(Some(
            Event::new(cfg.time, EventKind::BirthRejected).detail(format!("reservoir {} < {}", cfg.reservoir, cost)),
        ));
    }
    let cands = birth_candidates(cfg, rng);
    if cands.is_empty() {
        return Ok(None);
    }
    let logw: Vec<f64> =
        cands.iter().map(|t| -structural_energy(cfg, &p.energy, t) / cfg.triad_temperature(t)).collect();
    let t = cands[sample_index(&softmax(&logw), rng)];
    let block = GanBlock::random(rng, p.gan_dim, p.c_g, p.c_d);
    cfg.reservoir -= block.norm_sq_total();
    cfg.hyper.add_triad(t)?;
    cfg.gan.insert(t, block);
    cfg.embeddings.add_triad(&p.kernel, t);
    let mut roles = Vec::with_capacity(3);
    for &a in &t {
        let probs = role_probabilities(cfg, &p.energy, a, &t)?;
        let r = Role::ALL[sample_index(&probs, rng)];
        cfg.roles.set(a, t, r);
        roles.push(r.name());
    }
    Ok(Some(Event::new(cfg.time, EventKind::Birth).triad(t).detail(roles.join(" "))))
}

/// Removes an active triad drawn with weight `exp(+E/T)` and returns its norm
/// budget to the reservoir.
pub fn triad_death<R: Rng + ?Sized>(cfg: &mut Configuration, p: &ModelParams, rng: &mut R) -> Result<Option<Event>> {
    let active = cfg.hyper.triad_list();
    if active.is_empty() {
        return Ok(None);
    }
    let logw: Vec<f64> =
        active.iter().map(|t| structural_energy(cfg, &p.energy, t) / cfg.triad_temperature(t)).collect();
    let t = active[sample_index(&softmax(&logw), rng)];
    let block = cfg.gan.remove(&t).ok_or(Error::InactiveTriad(t))?;
    cfg.reservoir += block.norm_sq_total();
    cfg.hyper.remove_triad(t)?;
    cfg.roles.remove_triad(&t);
    cfg.embeddings.drop_triad(&t);
    Ok(Some(Event::new(cfg.time, EventKind::Death).triad(t)))
}
