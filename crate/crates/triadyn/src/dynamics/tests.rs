use super::*;
use crate::agentstate::{init_configuration, KnowledgeState, Role};
use crate::energy::{softmax, EnergyParams};
use rand::SeedableRng;

fn quiet(n: usize, m: usize, triads: Vec<[usize; 3]>) -> ModelParams {
    let mut p = ModelParams { n_agents: n, opinion_dim: m, ..Default::default() };
    p.init.structure = "explicit".into();
    p.init.triads = triads;
    let d = &mut p.dynamics;
    d.sigma_phi = 0.0;
    d.sigma_g = 0.0;
    d.sigma_d = 0.0;
    d.sigma_theta = 0.0;
    d.temperature_noise = 0.0;
    d.rate_role = 0.0;
    d.rate_exchange = 0.0;
    d.rate_birth = 0.0;
    d.rate_death = 0.0;
    p
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn defaults_validate_and_ranges_are_enforced() {
    assert!(DynParams::default().validate().is_ok());
    let bad = DynParams { t0: -1.0, ..Default::default() };
    assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
    assert!(DynParams { dt: 0.0, ..Default::default() }.validate().is_err());
    assert!(DynParams { rate_birth: -0.1, ..Default::default() }.validate().is_err());
}

#[test]
fn role_probabilities_follow_the_softmax() {
    let p = quiet(3, 1, vec![[0, 1, 2]]);
    let mut cfg = init_configuration(&p, 1).unwrap();
    let t = [0, 1, 2];
    let flat = EnergyParams { gamma: 0.0, lambda: 0.0, ..Default::default() };
    let pr = role_probabilities(&cfg, &flat, 0, &t).unwrap();
    assert!(pr.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));

    cfg.roles.set(1, t, Role::G1);
    cfg.roles.set(2, t, Role::G2);
    let temp = cfg.agents[0].temperature;
    let e = EnergyParams { gamma: temp * 2f64.ln(), lambda: 0.0, ..Default::default() };
    let pr = role_probabilities(&cfg, &e, 0, &t).unwrap();
    for (x, want) in pr.iter().zip([0.25, 0.25, 0.5]) {
        assert!((x - want).abs() < 1e-14);
    }
    let w = softmax(&[0.0, -2f64.ln(), -2f64.ln()]);
    assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
}

#[test]
fn cold_role_update_picks_the_minimiser() {
    let p = quiet(3, 1, vec![[0, 1, 2]]);
    let mut cfg = init_configuration(&p, 2).unwrap();
    let t = [0, 1, 2];
    cfg.roles.set(1, t, Role::G1);
    cfg.roles.set(2, t, Role::G2);
    cfg.agents[0].temperature = 1e-3;
    let e = EnergyParams { lambda: 0.0, ..Default::default() };
    let mut r = rng(3);
    let hits = (0..10_000)
        .filter(|_| {
            role_update(&mut cfg, &e, 0, &t, &mut r).unwrap();
            cfg.roles.get(0, &t) == Some(Role::D)
        })
        .count();
    assert!(hits as f64 / 1e4 >= 0.999);
}

#[test]
fn exchange_conserves_total_opinion() {
    let mut p = quiet(12, 3, vec![]);
    p.init.structure = "ring".into();
    let mut cfg = init_configuration(&p, 4).unwrap();
    let q2 = cfg.q2();
    let edges: Vec<_> = cfg.hyper.edges().collect();
    let mut r = rng(5);
    for _ in 0..100_000 {
        let (i, j) = edges[r.gen_range(0..edges.len())];
        kawasaki_exchange(&mut cfg, &p.energy, i, j, &mut r).unwrap();
        assert_eq!(cfg.q2(), q2);
    }
    assert!(kawasaki_exchange(&mut cfg, &p.energy, 0, 11, &mut r).is_err() || cfg.hyper.has_edge(0, 11));
}

#[test]
fn exchange_identity_and_downhill_moves() {
    let p = quiet(4, 1, vec![[0, 1, 2], [1, 2, 3]]);
    let mut cfg = init_configuration(&p, 6).unwrap();
    let set = |cfg: &mut Configuration, s: [i8; 4]| cfg.agents.iter_mut().zip(s).for_each(|(a, x)| a.opinion = vec![x]);
    set(&mut cfg, [1, 1, -1, -1]);
    let before = cfg.clone();
    let ev = kawasaki_exchange(&mut cfg, &p.energy, 2, 3, &mut rng(1)).unwrap();
    assert!(ev.detail.ends_with("identity"));
    assert_eq!(cfg, before);
    // swapping 0 and 1 lowers the energy by 2
    for seed in 0..200 {
        set(&mut cfg, [-1, 1, 1, -1]);
        let ev = kawasaki_exchange(&mut cfg, &p.energy, 0, 1, &mut rng(seed)).unwrap();
        assert!(ev.detail.ends_with("accepted"), "{}", ev.detail);
    }
}

#[test]
fn glauber_flip_breaks_only_opinion_conservation() {
    let p = quiet(3, 1, vec![[0, 1, 2]]);
    let mut cfg = init_configuration(&p, 7).unwrap();
    let mut r = rng(8);
    let mut changed = false;
    for _ in 0..200 {
        let q = cfg.q2();
        glauber_flip(&mut cfg, &p.energy, r.gen_range(0..3), 0, &mut r);
        changed |= cfg.q2() != q;
    }
    assert!(changed);
}

#[test]
fn equal_energy_births_are_uniform() {
    let mut p = quiet(5, 1, vec![]);
    p.init.structure = "empty".into();
    let cfg = init_configuration(&p, 9).unwrap();
    let cands = birth_candidates(&cfg, &mut rng(0));
    assert_eq!(cands.len(), 10);
    let mut counts = std::collections::BTreeMap::new();
    let mut r = rng(10);
    let trials = 20_000;
    for _ in 0..trials {
        let mut c = cfg.clone();
        let ev = triad_birth(&mut c, &p, &mut r).unwrap().unwrap();
        *counts.entry(ev.triad.unwrap()).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 10);
    for n in counts.values() {
        let f = *n as f64 / trials as f64;
        assert!((f - 0.1).abs() < 5.0 * (0.09 / trials as f64).sqrt(), "{f}");
    }
}

#[test]
fn empty_reservoir_blocks_births() {
    let mut p = quiet(6, 1, vec![]);
    p.init.structure = "empty".into();
    p.init.birth_headroom = 0.0;
    let mut cfg = init_configuration(&p, 11).unwrap();
    let q1 = cfg.q1();
    let mut r = rng(12);
    for _ in 0..100 {
        let ev = triad_birth(&mut cfg, &p, &mut r).unwrap().unwrap();
        assert_eq!(ev.kind, EventKind::BirthRejected);
    }
    assert_eq!(cfg.hyper.n_triads(), 0);
    assert_eq!(cfg.q1(), q1);
}

#[test]
fn births_and_deaths_conserve_the_budget() {
    let mut p = quiet(8, 2, vec![]);
    p.init.structure = "ring".into();
    p.init.birth_headroom = 6.0;
    let mut cfg = init_configuration(&p, 13).unwrap();
    let mut r = rng(14);
    let mut births = 0;
    for k in 0..10_000 {
        let ev = if r.gen_bool(0.5) { triad_birth(&mut cfg, &p, &mut r) } else { triad_death(&mut cfg, &p, &mut r) };
        if let Some(e) = ev.unwrap() {
            births += (e.kind == EventKind::Birth) as usize;
        }
        if k % 500 == 0 {
            assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        }
    }
    assert!(births > 1000);
    assert!((cfg.q1() - cfg.reference.q1).abs() <= 1e-9);
    assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
}

#[test]
fn temperature_fixed_point_and_relaxation() {
    let p = quiet(6, 1, vec![[0, 1, 2], [2, 3, 4]]);
    let mut cfg = init_configuration(&p, 15).unwrap();
    let before = cfg.temperature_field();
    for _ in 0..100 {
        temperature_step(&mut cfg, &p.energy, &p.dynamics, &mut rng(0), 0.01).unwrap();
    }
    assert_eq!(cfg.temperature_field(), before);

    let mut p1 = quiet(3, 1, vec![]);
    p1.init.structure = "empty".into();
    let mut cfg = init_configuration(&p1, 16).unwrap();
    cfg.agents[0].temperature = p1.dynamics.t0 + 1.0;
    let dt = 1e-5;
    let gamma = p1.dynamics.gamma_relax;
    for _ in 0..(5.0 / gamma / dt).round() as usize {
        temperature_step(&mut cfg, &p1.energy, &p1.dynamics, &mut rng(0), dt).unwrap();
    }
    let want = p1.dynamics.t0 + (-5.0f64).exp();
    assert!((cfg.agents[0].temperature - want).abs() < 1e-6);
}

#[test]
fn temperature_noise_keeps_the_mean() {
    let mut p = quiet(3, 1, vec![]);
    p.init.structure = "empty".into();
    p.dynamics.temperature_noise = 1.0;
    let mut cfg = init_configuration(&p, 17).unwrap();
    let mut r = rng(18);
    let dt = 0.01;
    let (mut sum, mut sum2, mut n) = (0.0, 0.0, 0.0);
    for k in 0..400_000 {
        temperature_step(&mut cfg, &p.energy, &p.dynamics, &mut r, dt).unwrap();
        if k % 100 == 0 {
            let t = cfg.agents[0].temperature;
            sum += t;
            sum2 += t * t;
            n += 1.0;
        }
    }
    let mean = sum / n;
    let se = ((sum2 / n - mean * mean) / n).sqrt();
    assert!((mean - p.dynamics.t0).abs() < 3.0 * se, "{mean} +- {se}");
}

#[test]
fn phi_is_constant_without_potential() {
    let mut p = quiet(6, 1, vec![[0, 1, 2], [3, 4, 5]]);
    p.energy.a = 0.0;
    p.energy.g = 0.0;
    p.energy.h_pair = 0.0;
    p.init.phi = 0.3;
    let mut cfg = init_configuration(&p, 19).unwrap();
    for _ in 0..100 {
        phi_step(&mut cfg, &p.energy, &p.dynamics, &mut rng(0), 0.01).unwrap();
    }
    assert!(cfg.agents.iter().all(|a| a.phi == 0.3));
}

#[test]
fn phi_descends_to_a_stationary_point() {
    let mut p = quiet(6, 1, vec![[0, 1, 2], [1, 2, 3], [3, 4, 5]]);
    p.energy.a = -0.5;
    p.energy.g = 0.2;
    p.energy.h_pair = 0.3;
    p.dynamics.d_phi = 1.0;
    let mut cfg = init_configuration(&p, 20).unwrap();
    let mut r = rng(21);
    cfg.agents.iter_mut().for_each(|a| a.phi = r.gen_range(-1.0..1.0));
    for _ in 0..200_000 {
        phi_step(&mut cfg, &p.energy, &p.dynamics, &mut r, 0.01).unwrap();
    }
    let res = phi_drift(&cfg.hyper, &p.energy, &p.dynamics, &cfg.phi_field()).unwrap();
    let norm = res.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm <= 1e-8, "{norm}");
    assert!(cfg.agents.iter().any(|a| a.phi.abs() > 0.1));
}

#[test]
fn strong_phase_coupling_synchronises() {
    let mut p = quiet(6, 1, vec![]);
    p.init.structure = "explicit".into();
    p.init.triads = vec![[0, 1, 2], [0, 1, 3], [0, 1, 4], [0, 1, 5], [2, 3, 4], [2, 3, 5], [2, 4, 5], [3, 4, 5]];
    p.dynamics.k_theta = 5.0;
    let mut cfg = init_configuration(&p, 22).unwrap();
    for (k, w) in [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5)] {
        assert!(cfg.hyper.has_edge(k, w));
    }
    let mut r = rng(23);
    cfg.agents.iter_mut().for_each(|a| a.theta = r.gen_range(0.0..1.5));
    for _ in 0..5_000 {
        theta_step(&mut cfg, &p.dynamics, &mut r, 0.01);
    }
    let (c, s) = cfg.agents.iter().fold((0.0, 0.0), |(c, s), a| (c + a.theta.cos(), s + a.theta.sin()));
    let sync = (c * c + s * s).sqrt() / 6.0;
    assert!((1.0 - sync) < 1e-3);
}

#[test]
fn gan_zero_step_is_identity_and_norms_hold() {
    let mut p = quiet(6, 1, vec![[0, 1, 2], [2, 3, 4]]);
    let mut cfg = init_configuration(&p, 24).unwrap();
    let before = cfg.gan.clone();
    gan_step(&mut cfg, &p.energy, &p.dynamics, &mut rng(0), 0.0);
    assert_eq!(cfg.gan, before);

    p.dynamics.sigma_g = 0.5;
    p.dynamics.sigma_d = 0.5;
    let mut r = rng(25);
    for _ in 0..100_000 {
        gan_step(&mut cfg, &p.energy, &p.dynamics, &mut r, 0.01);
    }
    for b in cfg.gan.values() {
        for v in [&b.g1, &b.g2] {
            assert!((crate::agentstate::norm_sq(v) - p.c_g).abs() <= 1e-9);
        }
        assert!((crate::agentstate::norm_sq(&b.d) - p.c_d).abs() <= 1e-9);
    }
}

#[test]
fn projected_gan_flow_reaches_its_fixed_point() {
    // on the sphere both players align with the data direction; D cannot vanish
    let p = quiet(3, 1, vec![[0, 1, 2]]);
    let mut cfg = init_configuration(&p, 26).unwrap();
    cfg.agents.iter_mut().for_each(|a| a.knowledge = KnowledgeState::delta(16, 13));
    for _ in 0..20_000 {
        gan_step(&mut cfg, &p.energy, &p.dynamics, &mut rng(0), 0.01);
    }
    let b = &cfg.gan[&[0, 1, 2]];
    let target = |r: f64| [r, 0.0, 0.0, 0.0];
    for (v, r) in [(&b.g1, p.c_g.sqrt()), (&b.g2, p.c_g.sqrt()), (&b.d, p.c_d.sqrt())] {
        let err: f64 = v.iter().zip(target(r)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{v:?}");
    }
}

#[test]
fn memory_step_conserves_total() {
    let p = ModelParams::default();
    let mut cfg = init_configuration(&p, 27).unwrap();
    let mut r = rng(28);
    cfg.agents.iter_mut().for_each(|a| a.memory = r.gen_range(-1.0..1.0));
    cfg.reset_reference();
    for _ in 0..10_000 {
        embeddings_step(&mut cfg, &p.kernel, 0.01);
        memory_step(&mut cfg, &p.dynamics, 0.01).unwrap();
    }
    assert!((cfg.q3() - cfg.reference.q3).abs() <= 1e-9 * (1.0 + cfg.reference.q3.abs()));
    assert!(memory_forcing(&cfg).iter().any(|x| x.abs() > 1e-3));
}

#[test]
fn step_size_violations_are_reported() {
    let p = quiet(6, 1, vec![[0, 1, 2], [2, 3, 4]]);
    let mut cfg = init_configuration(&p, 29).unwrap();
    assert!(matches!(phi_step(&mut cfg, &p.energy, &p.dynamics, &mut rng(0), 10.0), Err(Error::StepSize(_))));
    let d = DynParams { kappa_t: 100.0, ..p.dynamics.clone() };
    assert!(matches!(temperature_step(&mut cfg, &p.energy, &d, &mut rng(0), 0.1), Err(Error::StepSize(_))));
}

#[test]
fn knowledge_drift_moves_towards_partners() {
    let mut p = quiet(3, 1, vec![[0, 1, 2]]);
    p.dynamics.kappa_k = 1.0;
    let mut cfg = init_configuration(&p, 30).unwrap();
    cfg.agents[0].knowledge = KnowledgeState::delta(16, 0);
    cfg.agents[1].knowledge = KnowledgeState::delta(16, 8);
    cfg.agents[2].knowledge = KnowledgeState::delta(16, 8);
    let before = cfg.agents[0].knowledge.mean();
    knowledge_step(&mut cfg, &p.dynamics, 0.1);
    assert!(cfg.agents[0].knowledge.mean() > before);
    assert!(cfg.agents[0].knowledge.check().is_none());
}

#[test]
fn quiet_run_is_a_fixed_point() {
    let mut p = quiet(3, 1, vec![[0, 1, 2]]);
    p.energy.a = 0.0;
    p.energy.g = 0.0;
    p.energy.h_pair = 0.0;
    p.init.theta_random = false;
    p.init.theta = 1.0;
    let mut cfg = init_configuration(&p, 31).unwrap();
    cfg.agents.iter_mut().for_each(|a| a.knowledge = KnowledgeState::delta(16, 13));
    let b = cfg.gan.get_mut(&[0, 1, 2]).unwrap();
    b.g1 = vec![1.0, 0.0, 0.0, 0.0];
    b.g2 = vec![1.0, 0.0, 0.0, 0.0];
    b.d = vec![1.0, 0.0, 0.0, 0.0];
    cfg.reset_reference();
    let (fin, log) = simulate(cfg.clone(), &p, rng(32), 5.0, 10, &mut []).unwrap();
    assert!(log.is_empty());
    assert_eq!(fin.agents, cfg.agents);
    assert_eq!((&fin.hyper, &fin.roles, &fin.gan, fin.reservoir), (&cfg.hyper, &cfg.roles, &cfg.gan, cfg.reservoir));
}

struct Check {
    bad: Vec<String>,
    samples: usize,
}

impl Observer for Check {
    fn observe(&mut self, cfg: &Configuration, step: u64) {
        self.samples += 1;
        for v in cfg.validate() {
            self.bad.push(format!("step {step}: {v}"));
        }
    }
}

#[test]
fn mixed_run_keeps_every_invariant_and_is_deterministic() {
    let mut p = ModelParams { n_agents: 10, ..Default::default() };
    p.dynamics.rate_birth = 2.0;
    p.dynamics.rate_death = 2.0;
    let cfg = init_configuration(&p, 33).unwrap();
    let mut check = Check { bad: Vec::new(), samples: 0 };
    let (a, log_a) = simulate(cfg.clone(), &p, rng(34), 100.0, 50, &mut [&mut check]).unwrap();
    assert!(check.bad.is_empty(), "{:?}", &check.bad[..check.bad.len().min(5)]);
    assert_eq!(check.samples, 201);
    assert!(log_a.count(EventKind::Birth) + log_a.count(EventKind::Death) > 100);
    let (b, log_b) = simulate(cfg, &p, rng(34), 100.0, 50, &mut []).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    log_a.write_csv(&mut ca).unwrap();
    log_b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert!(String::from_utf8(ca).unwrap().starts_with("time,kind,agent,triad,detail\n"));
}

#[test]
fn timescale_diagnostics() {
    let p = ModelParams::default();
    let cfg = init_configuration(&p, 35).unwrap();
    let ts = timescales(&cfg, &p, Some(2.0));
    assert_eq!(ts.tau_group, 1.0);
    assert_eq!(ts.tau_form, Some(0.5));
    assert_eq!(ts.tau_mem, 10.0);
    assert!(ts.tau_slow.is_finite() && ts.tau_slow > 0.0);
    assert_eq!(ts.eps[0], Some(2.0));
    assert!(ts.warnings.iter().any(|w| w.starts_with("eps1")));
}
