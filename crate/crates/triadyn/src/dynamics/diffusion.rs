use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::DynParams;
use crate::agentstate::{barycenter2, displacement_interpolate, renormalize, Configuration};
use crate::energy::{data_summary, gan_objective, nonlocal_drive, potential_of, triad_coherence, EnergyParams};
use crate::error::{Error, Result};
use crate::hypergraph::TriadicHypergraph;
use crate::memory::{check_explicit_stability, forcing_apply, memory_field_step, role_class_memory, KernelSpec};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Memory-modulated diffusivity `kappa_T (1 + alpha sum_j w (M_i - M_j)^2)`.
fn thermal_diffusivity(h: &TriadicHypergraph, d: &DynParams, m: &[f64]) -> Vec<f64> {
    (0..m.len())
        .map(|i| {
            let s: f64 = h.neighbors(i).map(|j| h.weight(i, j) * (m[i] - m[j]).powi(2)).sum();
            d.kappa_t * (1.0 + d.alpha_mem * s)
        })
        .collect()
}

/// Deterministic temperature drift.
pub fn temperature_drift(h: &TriadicHypergraph, d: &DynParams, t: &[f64], phi: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    let kappa = thermal_diffusivity(h, d, m);
    let lt = h.laplacian_apply(t)?;
    let t_bar = t.iter().sum::<f64>() / t.len() as f64;
    let eta_f = d.eta0 * (-d.e_a / t_bar).exp();
    Ok((0..t.len())
        .map(|i| {
            let grad: f64 = h.neighbors(i).map(|j| h.weight(i, j) * (phi[i] - phi[j]).powi(2)).sum();
            -kappa[i] * lt[i] - d.gamma_relax * (t[i] - d.t0) - eta_f * grad
        })
        .collect())
}

/// Euler-Maruyama step with Ito noise `sqrt(2 gamma T dt)`, clamped to
/// `[t_min, t_max]`.
pub fn temperature_step<R: Rng + ?Sized>(
    cfg: &mut Configuration,
    _e: &EnergyParams,
    d: &DynParams,
    rng: &mut R,
    dt: f64,
) -> Result<()> {
    let (t, phi, m) = (cfg.temperature_field(), cfg.phi_field(), cfg.memory_field());
    let kmax = thermal_diffusivity(&cfg.hyper, d, &m).into_iter().fold(0.0, f64::max);
    check_explicit_stability(&cfg.hyper, kmax, dt)?;
    if d.gamma_relax * dt >= 2.0 {
        return Err(Error::StepSize(d.gamma_relax * dt));
    }
    let drift = temperature_drift(&cfg.hyper, d, &t, &phi, &m)?;
    for (a, (ti, f)) in cfg.agents.iter_mut().zip(t.iter().zip(drift)) {
        let mut x = ti + dt * f;
        if d.temperature_noise > 0.0 && d.gamma_relax > 0.0 {
            x += d.temperature_noise * (2.0 * d.gamma_relax * ti * dt).sqrt() * normal(rng);
        }
        a.temperature = x.clamp(d.t_min, d.t_max);
    }
    Ok(())
}

/// `-D_phi (L phi)_i - dV/dphi_i`.
pub fn phi_drift(h: &TriadicHypergraph, e: &EnergyParams, d: &DynParams, phi: &[f64]) -> Result<Vec<f64>> {
    let lphi = h.laplacian_apply(phi)?;
    let (_, grad) = potential_of(h, e, phi);
    Ok(lphi.iter().zip(grad).map(|(l, g)| -d.d_phi * l - g).collect())
}

pub fn phi_step<R: Rng + ?Sized>(
    cfg: &mut Configuration,
    e: &EnergyParams,
    d: &DynParams,
    rng: &mut R,
    dt: f64,
) -> Result<()> {
    check_explicit_stability(&cfg.hyper, d.d_phi, dt)?;
    let drift = phi_drift(&cfg.hyper, e, d, &cfg.phi_field())?;
    let amp = (2.0 * d.sigma_phi * d.sigma_phi * dt).sqrt();
    for (a, f) in cfg.agents.iter_mut().zip(drift) {
        a.phi += dt * f;
        if amp > 0.0 {
            a.phi += amp * normal(rng);
        }
    }
    Ok(())
}

fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Noisy Kuramoto step, wrapped to `[0, 2pi)`.
pub fn theta_step<R: Rng + ?Sized>(cfg: &mut Configuration, d: &DynParams, rng: &mut R, dt: f64) {
    let theta: Vec<f64> = cfg.agents.iter().map(|a| a.theta).collect();
    let h = &cfg.hyper;
    let drift: Vec<f64> = (0..theta.len())
        .map(|i| d.omega + d.k_theta * h.neighbors(i).map(|j| h.weight(i, j) * (theta[j] - theta[i]).sin()).sum::<f64>())
        .collect();
    for (a, f) in cfg.agents.iter_mut().zip(drift) {
        let mut x = a.theta + dt * f;
        if d.sigma_theta > 0.0 {
            x += d.sigma_theta * (2.0 * a.temperature * dt).sqrt() * normal(rng);
        }
        a.theta = wrap_phase(x);
    }
}

/// Removes the component of `u` along `v`.
fn project_tangent(u: &mut [f64], v: &[f64]) {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    u.iter_mut().zip(v).for_each(|(a, b)| *a -= uv / vv * b);
}

fn sphere_update<R: Rng + ?Sized>(v: &mut [f64], drift: &[f64], sigma: f64, temp: f64, radius: f64, dt: f64, rng: &mut R) {
    let amp = sigma * (2.0 * temp * dt).sqrt();
    let mut u: Vec<f64> = drift.iter().map(|g| dt * g).collect();
    if amp > 0.0 {
        u.iter_mut().for_each(|x| *x += amp * normal(rng));
    }
    if u.iter().all(|x| *x == 0.0) {
        return;
    }
    project_tangent(&mut u, v);
    v.iter_mut().zip(&u).for_each(|(a, b)| *a += b);
    renormalize(v, radius);
}

/// Projected descent for generators and ascent for the discriminator, each
/// update kept on its sphere.
pub fn gan_step<R: Rng + ?Sized>(cfg: &mut Configuration, e: &EnergyParams, d: &DynParams, rng: &mut R, dt: f64) {
    let triads: Vec<_> = cfg.gan.keys().copied().collect();
    let (rg, rd) = (cfg.c_g.sqrt(), cfg.c_d.sqrt());
    for t in triads {
        let temp = cfg.triad_temperature(&t);
        let p = cfg.gan[&t].d.len();
        let x = data_summary(cfg, &t, p);
        let m = cfg.embeddings.success_value(&t);
        let b = cfg.gan.get_mut(&t).unwrap();
        let ev = gan_objective(b, &x, m, e.lambda_mem);
        let neg = |g: &[f64]| g.iter().map(|v| -v).collect::<Vec<_>>();
        sphere_update(&mut b.g1, &neg(&ev.grad_g1), d.sigma_g, temp, rg, dt, rng);
        sphere_update(&mut b.g2, &neg(&ev.grad_g2), d.sigma_g, temp, rg, dt, rng);
        sphere_update(&mut b.d, &ev.grad_d, d.sigma_d, temp, rd, dt, rng);
    }
}

/// Node forcing `B u` with `u` the filtered triad success signals.
pub fn memory_forcing(cfg: &Configuration) -> Vec<f64> {
    let triads = cfg.hyper.triad_list();
    let u: Vec<f64> = triads.iter().map(|t| cfg.embeddings.success_value(t)).collect();
    forcing_apply(cfg.n_agents(), &triads, &u)
}

pub fn memory_step(cfg: &mut Configuration, d: &DynParams, dt: f64) -> Result<()> {
    let forcing = memory_forcing(cfg);
    let mut m = cfg.memory_field();
    memory_field_step(&mut m, &cfg.hyper, &forcing, d.kappa_mem, dt)?;
    cfg.agents.iter_mut().zip(m).for_each(|(a, x)| a.memory = x);
    Ok(())
}

/// Advances every filter channel with its input held over the step.
pub fn embeddings_step(cfg: &mut Configuration, k: &KernelSpec, dt: f64) {
    let node: Vec<f64> = cfg.memory_field();
    let role = role_class_memory(cfg);
    let triads = cfg.hyper.triad_list();
    let success: Vec<f64> = triads.iter().map(|t| triad_coherence(cfg, t)).collect();
    let nonlocal: Vec<f64> = triads.iter().map(|t| nonlocal_drive(cfg, t)).collect();
    let e = &mut cfg.embeddings;
    e.node.iter_mut().zip(node).for_each(|(c, u)| c.step(k, u, dt));
    e.role.iter_mut().zip(role).for_each(|(c, r)| c.step(k, r.value, dt));
    for ((t, s), n) in triads.iter().zip(success).zip(nonlocal) {
        e.success.get_mut(t).unwrap().step(k, s, dt);
        e.nonlocal.get_mut(t).unwrap().step(k, n, dt);
    }
}

/// Optional drift of each knowledge state along the displacement geodesic
/// towards the barycentre of its partners in its first triad.
pub fn knowledge_step(cfg: &mut Configuration, d: &DynParams, dt: f64) {
    if d.kappa_k == 0.0 {
        return;
    }
    let s = -(-d.kappa_k * dt).exp_m1();
    let targets: Vec<_> = (0..cfg.n_agents())
        .map(|i| {
            cfg.hyper.triads_of(i).next().map(|t| {
                let mut o = t.iter().filter(|&&a| a != i);
                let (j, k) = (*o.next().unwrap(), *o.next().unwrap());
                barycenter2(&cfg.agents[j].knowledge, &cfg.agents[k].knowledge)
            })
        })
        .collect();
    for (a, target) in cfg.agents.iter_mut().zip(targets) {
        if let Some(b) = target {
            a.knowledge = displacement_interpolate(&a.knowledge, &b, s);
        }
    }
}

/// Zero-noise drift of the node state `[phi; T; M]` with the triad forcing
/// frozen at its current value.
pub fn deterministic_drift(cfg: &Configuration, e: &EnergyParams, d: &DynParams, x: &[f64]) -> Result<Vec<f64>> {
    let n = cfg.n_agents();
    if x.len() != 3 * n {
        return Err(Error::Dimension { expected: 3 * n, got: x.len() });
    }
    let (phi, rest) = x.split_at(n);
    let (t, m) = rest.split_at(n);
    let h = &cfg.hyper;
    let mut out = phi_drift(h, e, d, phi)?;
    out.extend(temperature_drift(h, d, t, phi, m)?);
    let lm = h.laplacian_apply(m)?;
    out.extend(lm.iter().zip(memory_forcing(cfg)).map(|(l, f)| -d.kappa_mem * l + f));
    Ok(out)
}
