use std::collections::BTreeMap;
use std::f64::consts::{LN_2, TAU};

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::agentstate::{init_configuration, RoleAssignment};
use crate::hypergraph::{triad, TriadicHypergraph};
use crate::memory::Embeddings;
use crate::params::ModelParams;

fn config(n: usize, m: usize, triads: Vec<[usize; 3]>, seed: u64) -> Configuration {
    let mut p = ModelParams { n_agents: n, opinion_dim: m, ..Default::default() };
    p.init.structure = "explicit".into();
    p.init.triads = triads;
    init_configuration(&p, seed).unwrap()
}

#[test]
fn order_parameter_examples() {
    let mut cfg = config(6, 2, vec![[0, 1, 2], [2, 3, 4], [3, 4, 5]], 1);
    cfg.agents.iter_mut().for_each(|a| {
        a.opinion = vec![1, -1];
        a.theta = 0.7;
        a.memory = 0.3;
    });
    let op = order_parameters(&cfg, Some(&cfg.roles.clone()));
    assert_eq!(op.c, 1.0);
    assert!((op.phi_sync - 1.0).abs() < 1e-15);
    assert_eq!(op.psi_mem, 0.0);
    assert_eq!(op.phi_role, 1.0);
    for (k, a) in cfg.agents.iter_mut().enumerate() {
        a.theta = TAU * k as f64 / 6.0;
    }
    assert!(order_parameters(&cfg, None).phi_sync.abs() < 1e-12);
    let empty = config(4, 1, vec![], 2);
    let op = order_parameters(&empty, None);
    assert_eq!((op.psi_form, op.phi_align, op.c), (0.0, 0.0, 0.0));
}

fn relabel(cfg: &Configuration, perm: &[usize]) -> Configuration {
    let map = |t: &[usize; 3]| triad(perm[t[0]], perm[t[1]], perm[t[2]]).unwrap();
    let n = cfg.n_agents();
    let mut agents = cfg.agents.clone();
    for (i, a) in cfg.agents.iter().enumerate() {
        agents[perm[i]] = a.clone();
    }
    let triads: Vec<_> = cfg.hyper.triads().map(map).collect();
    let hyper = TriadicHypergraph::from_triads(n, &triads).unwrap();
    let mut roles = RoleAssignment::default();
    for ((a, t), r) in cfg.roles.iter() {
        roles.set(perm[*a], map(t), *r);
    }
    let gan = cfg.gan.iter().map(|(t, b)| (map(t), b.clone())).collect();
    let mut node = cfg.embeddings.node.clone();
    for (i, e) in cfg.embeddings.node.iter().enumerate() {
        node[perm[i]] = e.clone();
    }
    let embeddings = Embeddings {
        node,
        role: cfg.embeddings.role.clone(),
        success: cfg.embeddings.success.iter().map(|(t, e)| (map(t), e.clone())).collect(),
        nonlocal: cfg.embeddings.nonlocal.iter().map(|(t, e)| (map(t), e.clone())).collect(),
    };
    Configuration { agents, hyper, roles, gan, embeddings, ..cfg.clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn order_parameters_ignore_labels(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = config(7, 2, vec![[0, 1, 2], [1, 2, 3], [3, 4, 5], [0, 5, 6]], seed);
        cfg.agents.iter_mut().for_each(|a| {
            a.phi = rng.gen_range(-1.0..1.0);
            a.memory = rng.gen_range(-1.0..1.0);
        });
        cfg.reset_reference();
        let mut perm: Vec<usize> = (0..7).collect();
        perm.shuffle(&mut rng);
        let other = relabel(&cfg, &perm);
        prop_assert!(other.validate().is_empty(), "{:?}", other.validate());
        let r0 = cfg.roles.clone();
        let a = order_parameters(&cfg, Some(&r0)).values();
        let b = order_parameters(&other, Some(&other.roles.clone())).values();
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let op = order_parameters(&cfg, Some(&r0));
        prop_assert!((-1.0..=1.0).contains(&op.c) && (0.0..=1.0).contains(&op.phi_sync) && op.psi_mem >= 0.0);
    }
}

#[test]
fn susceptibility_examples() {
    assert!(susceptibility(&[0.4; 50], 3, 1.0).unwrap() < 1e-30);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let v: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let chi = susceptibility(&v, 1, 1.0).unwrap();
    // variance of the sample variance of +-1 draws is (1 - mean^4 ...) ~ 0; use the mean's SE
    assert!((chi - 1.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
    let half = susceptibility(&v, 1, 2.0).unwrap();
    assert!((half - chi / 2.0).abs() < 1e-15);
    assert!(susceptibility(&[1.0], 1, 1.0).is_err());
}

#[test]
fn intervals_cover_their_mean() {
    let ci = mean_ci(&[1.0, 2.0, 3.0, 4.0], 0.99);
    assert_eq!(ci.mean, 2.5);
    // t_{0.995, 3} = 5.8409
    assert!((ci.hi - 2.5 - 5.840909 * ci.se).abs() < 1e-5);
    let v: Vec<f64> = (0..1000).map(|k| (k % 7) as f64).collect();
    let b = batch_mean_ci(&v, 20, 0.99);
    assert!(b.lo < b.mean && b.mean < b.hi);
}

#[test]
fn correlation_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let snaps: Vec<Vec<Vec<i8>>> = (0..20_000)
        .map(|_| (0..3).map(|_| vec![if rng.gen::<bool>() { 1 } else { -1 }]).collect())
        .collect();
    let c = connected_correlation(&snaps).unwrap();
    let se = 1.0 / (20_000f64).sqrt();
    assert!(c[(0, 1)].abs() < 3.0 * se && c[(1, 2)].abs() < 3.0 * se);
    assert!((c[(0, 0)] - 1.0).abs() < 3.0 * se * 2.0);

    // agents 0 and 1 always equal, biased towards +1, m = 2
    let snaps: Vec<Vec<Vec<i8>>> = (0..5_000)
        .map(|_| {
            let s: Vec<i8> = (0..2).map(|_| if rng.gen_bool(0.8) { 1 } else { -1 }).collect();
            vec![s.clone(), s, vec![1, 1]]
        })
        .collect();
    let c = connected_correlation(&snaps).unwrap();
    let k = snaps.len() as f64;
    let mean: Vec<f64> = (0..2).map(|l| snaps.iter().map(|s| s[0][l] as f64).sum::<f64>() / k).collect();
    let direct = 2.0 - mean.iter().map(|x| x * x).sum::<f64>();
    assert!((c[(0, 1)] - direct).abs() < 1e-12);
    assert!(c[(0, 2)].abs() < 1e-12);
    assert!((c_global(&c) - c.iter().sum::<f64>() / 9.0).abs() < 1e-15);
    assert!(connected_correlation(&snaps[..1]).is_err());

    let h = TriadicHypergraph::from_triads(5, &[[0, 1, 2], [2, 3, 4]]).unwrap();
    let c = DMatrix::from_fn(5, 5, |i, j| (i + j) as f64);
    let bins = correlation_by_distance(&h, &c);
    assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 15);
    assert_eq!(bins[0].distance, 0);
    assert_eq!(bins[0].count, 5);
    assert_eq!(bins.last().unwrap().distance, 2);
}

#[test]
fn pattern_overlap_examples() {
    let mut cfg = config(4, 2, vec![[0, 1, 2]], 5);
    let pattern: Vec<Vec<i8>> = cfg.agents.iter().map(|a| a.opinion.clone()).collect();
    let mut orth = pattern.clone();
    orth[0] = orth[0].iter().map(|x| -x).collect();
    orth[1] = orth[1].iter().map(|x| -x).collect();
    let bank = PatternBank::new(vec![pattern, orth]).unwrap();
    let q = pattern_overlap(&cfg, &bank, 0.5).unwrap();
    assert_eq!(q[0].raw, 1.0);
    assert_eq!(q[0].q, 1.0);
    assert_eq!(q[1].raw, 0.0);
    cfg.embeddings.node[0].m[0] = 0.4;
    let q = pattern_overlap(&cfg, &bank, 0.5).unwrap();
    assert!((q[0].q - (1.0 + 0.5 * 0.1)).abs() < 1e-15);
    assert!(pattern_overlap(&cfg, &PatternBank::new(vec![]).unwrap(), 0.5).is_err());
    assert!(PatternBank::new(vec![vec![vec![0]]]).is_err());

    let fit = capacity_bound_fit(&[(0.5, 0.2), (1.0, 0.9), (2.0, 1.5)], 1.0).unwrap();
    assert!(fit.holds);
    assert!(fit.curve.iter().any(|&(_, p, b)| (p - b).abs() < 1e-12));
}

#[test]
fn mutual_information_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 20_000;
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let hx = binned_entropy(&x, 16);
    assert!((mutual_information(&x, &x, 16).unwrap() - hx).abs() < 1e-12);
    let nonempty = 16f64;
    assert!(hx >= 0.5 * nonempty.ln() * 0.5);
    let mi = mutual_information(&x, &y, 16).unwrap();
    assert!(mi >= 0.0 && mi <= 256.0 / (2.0 * n as f64) * 1.5, "{mi}");
    assert!(mutual_information(&x[..50], &y[..50], 4).is_err());
}

#[test]
fn spectral_examples() {
    let dt = 0.1;
    let n = 1000;
    let f0 = 0.5;
    let sine: Vec<f64> = (0..n).map(|k| (TAU * f0 * k as f64 * dt).sin()).collect();
    let s = spectral_capacity(&sine, dt).unwrap();
    let peak = (0..s.power.len()).max_by(|&a, &b| s.power[a].total_cmp(&s.power[b])).unwrap();
    assert!((s.freqs[peak] - f0).abs() < s.df / 2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for len in [4096usize, 4095] {
        let noise: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let s = spectral_capacity(&noise, dt).unwrap();
        let var = super::stats::variance(&noise);
        assert!((s.power.iter().sum::<f64>() * s.df - var).abs() < 1e-6);
        // smoothed over 64-bin blocks the white spectrum is flat
        let blocks: Vec<f64> = s.power[1..].chunks(64).filter(|c| c.len() == 64).map(|c| c.iter().sum::<f64>() / 64.0).collect();
        let mut sorted = blocks.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert!(blocks.iter().all(|b| *b < 3.0 * median && *b > median / 3.0));
    }
}

#[test]
fn hierarchical_entropy_examples() {
    let cfg = config(6, 1, vec![[0, 1, 2], [3, 4, 5]], 8);
    let frozen = vec![cfg.clone(); 50];
    let h = hierarchical_entropy(&frozen).unwrap();
    assert_eq!((h.s_global, h.s_local_mean, h.s_meso_mean, h.s_hier), (0.0, 0.0, 0.0, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let window: Vec<Configuration> = (0..40_000)
        .map(|_| {
            let mut c = cfg.clone();
            c.agents.iter_mut().for_each(|a| a.opinion = vec![if rng.gen::<bool>() { 1 } else { -1 }]);
            c
        })
        .collect();
    let h = hierarchical_entropy(&window).unwrap();
    assert!((h.s_local_mean - LN_2).abs() < 0.01);
    assert!((h.s_meso_mean - 3.0 * LN_2).abs() < 0.01);

    let big = config(4, 4, vec![[0, 1, 2]], 10);
    assert!(matches!(hierarchical_entropy(&[big]), Err(crate::Error::Refused(_))));
}

fn three_cycle(cw: f64, ccw: f64) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(3, 3);
    for x in 0..3 {
        k[(x, (x + 1) % 3)] = cw;
        k[(x, (x + 2) % 3)] = ccw;
        k[(x, x)] = -(cw + ccw);
    }
    k
}

#[test]
fn entropy_production_examples() {
    let pi = [1.0 / 3.0; 3];
    assert!(entropy_production_jump(&three_cycle(1.5, 1.5), &pi).unwrap().abs() < 1e-12);
    // uniform stationary law; each of the three edges carries (2 - 1)/3 * ln 2
    let s = entropy_production_jump(&three_cycle(2.0, 1.0), &pi).unwrap();
    assert!((s - LN_2).abs() < 1e-14);
    let s2 = entropy_production_jump(&three_cycle(4.0, 2.0), &pi).unwrap();
    assert!((s2 - 2.0 * s).abs() < 1e-14);
    assert_eq!(entropy_production_jump(&three_cycle(1.0, 0.0), &pi).unwrap(), f64::INFINITY);
}

#[test]
fn projection_examples() {
    let mut cfg = config(6, 1, vec![[0, 1, 2], [2, 3, 4]], 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    cfg.agents.iter_mut().for_each(|a| a.phi = rng.gen_range(-1.0..1.0));
    let p0 = scale_projections(&cfg, 0.0).unwrap();
    for (a, b) in p0.micro.iter().zip(&p0.macro_field) {
        assert!((a - b).abs() < 1e-12);
    }
    let p = scale_projections(&cfg, 1.3).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&p.micro) - mean(&p.macro_field)).abs() < 1e-12);
    cfg.agents[0].phi = 0.25;
    cfg.agents[1].phi = 0.25;
    cfg.agents[2].phi = 0.25;
    assert!((scale_projections(&cfg, 0.5).unwrap().meso[0] - 0.25).abs() < 1e-15);
}

#[test]
fn j_mix_recovers_a_linear_drift() {
    let a = [[-0.5, 0.2], [0.1, -0.8]];
    let dt: f64 = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut u, mut v) = (0.0, 0.0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..200_000 {
        xs.push(u);
        ys.push(v);
        let nu = u + dt * (a[0][0] * u + a[0][1] * v) + 0.1 * dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let nv = v + dt * (a[1][0] * u + a[1][1] * v) + 0.1 * dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        u = nu;
        v = nv;
    }
    let j = estimate_j_mix(&xs, &ys, dt).unwrap();
    for r in 0..2 {
        for c in 0..2 {
            assert!((j.matrix[r][c] - a[r][c]).abs() < 4.0 * j.stderr[r][c] + 1e-3, "{:?}", j.matrix);
        }
    }
    assert!(estimate_j_mix(&[0.0; 10], &[1.0; 10], dt).is_err());
}

#[test]
fn relaxation_fit_on_ar1() {
    let tau: f64 = 2.0;
    let dt = 0.1;
    let r = (-dt / tau).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut x = 0.0;
    let v: Vec<f64> = (0..400_000)
        .map(|_| {
            x = r * x + (1.0 - r * r).sqrt() * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect();
    let acf = autocorrelation(&v, 40);
    assert_eq!(acf[0], 1.0);
    let fit = fit_relaxation_time(&acf, dt, 0.2).unwrap();
    assert!((fit.tau - tau).abs() / tau < 0.05, "{fit:?}");
}

#[test]
fn recorder_writes_one_row_per_sample() {
    let p = ModelParams { n_agents: 6, ..Default::default() };
    let cfg = init_configuration(&p, 15).unwrap();
    let mut rec = Recorder::new(p.energy.clone());
    let (_, _) = crate::dynamics::simulate(cfg, &p, ChaCha8Rng::seed_from_u64(1), 1.0, 10, &mut [&mut rec]).unwrap();
    assert_eq!(rec.table.rows.len(), 11);
    let mut buf = Vec::new();
    rec.table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time,psi_form,phi_align,c,psi_mem,phi_role,phi_sync,h_group"));
    assert_eq!(text.lines().count(), 12);
    let s = summarize(&rec.table, 2, 6, 1.0).unwrap();
    let by: BTreeMap<_, _> = s.iter().map(|x| (x.name.as_str(), x)).collect();
    assert_eq!(by["q2_drift"].mean, 0.0);
    assert!(rec.table.series("c", "r", 1).unwrap().times.windows(2).all(|w| w[0] < w[1]));
}
