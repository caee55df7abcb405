use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agentstate::Configuration;
use crate::dynamics::{deterministic_drift, simulate, DynParams, Observer};
use crate::energy::potential_of;
use crate::error::{Error, Result};
use crate::memory::KernelSpec;
use crate::params::ModelParams;

/// `nu0 exp(-max(dF0 - memory_term, 0) / T) * transmission`.
pub fn arrhenius_rate(barrier: f64, t: f64, nu0: f64, memory_term: f64, transmission: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("temperature {t}")));
    }
    let eff = (barrier - memory_term).max(0.0);
    Ok(nu0 * (-eff / t).exp() * transmission)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierScan {
    /// Highest point of the profile above the start.
    pub barrier: f64,
    pub profile: Vec<f64>,
}

/// Straight-line energy profile from `a` to `b` on `points` nodes.
pub fn barrier_scan<F: Fn(&[f64]) -> f64>(f: F, a: &[f64], b: &[f64], points: usize) -> Result<BarrierScan> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    if points < 2 {
        return Err(Error::Parameter("barrier scan needs at least 2 points".into()));
    }
    let profile: Vec<f64> = (0..points)
        .map(|k| {
            let s = k as f64 / (points - 1) as f64;
            let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect();
            f(&x)
        })
        .collect();
    let top = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BarrierScan { barrier: top - profile[0], profile })
}

/// Central-difference Jacobian with steps `eps * max(1, |x_k|)`.
pub fn jacobian_fd<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: F, x: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let f0 = f(x)?;
    let mut j = DMatrix::zeros(f0.len(), n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = eps * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let up = f(&xp)?;
        xp[k] = x[k] - h;
        let down = f(&xp)?;
        xp[k] = x[k];
        for r in 0..f0.len() {
            let d = (up[r] - down[r]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::Parameter(format!("non-finite drift derivative at ({r}, {k})")));
            }
            j[(r, k)] = d;
        }
    }
    Ok(j)
}

/// Coefficients `a_1..a_n` of `det(lambda I - J) = lambda^n + a_1 lambda^{n-1} + ... + a_n`
/// (Faddeev-LeVerrier).
pub fn char_poly(j: &DMatrix<f64>) -> Vec<f64> {
    let n = j.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut c = 1.0;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        m = j * &m + &id * c;
        c = -(j * &m).trace() / k as f64;
        out.push(c);
    }
    out
}

/// Leading principal minors of the Hurwitz matrix of `lambda^n + a_1 ... + a_n`.
pub fn hurwitz_minors(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let coef = |k: isize| -> f64 {
        match k {
            0 => 1.0,
            k if k > 0 && (k as usize) <= n => a[k as usize - 1],
            _ => 0.0,
        }
    };
    let h = DMatrix::from_fn(n, n, |r, c| coef(2 * (c as isize + 1) - (r as isize + 1)));
    (1..=n).map(|k| h.view((0, 0), (k, k)).determinant()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RouthHurwitz<T> {
    pub coefficients: [T; 4],
    /// `(a1, a1 a2 - a3, a3 (a1 a2 - a3) - a1^2 a4, a4)`.
    pub margins: [T; 4],
    pub stable: bool,
    /// Third condition holds with equality: a purely imaginary root pair.
    pub boundary: bool,
}

pub fn routh_hurwitz4(a: [f64; 4]) -> RouthHurwitz<f64> {
    let [a1, a2, a3, a4] = a;
    let m2 = a1 * a2 - a3;
    let lhs = a3 * m2;
    let rhs = a1 * a1 * a4;
    let margins = [a1, m2, lhs - rhs, a4];
    let boundary = (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0);
    RouthHurwitz { coefficients: a, margins, stable: margins.iter().all(|&m| m > 0.0) && !boundary, boundary }
}

/// Integer version with every margin computed exactly.
pub fn routh_hurwitz4_exact(a: [i64; 4]) -> RouthHurwitz<i128> {
    let [a1, a2, a3, a4] = a.map(i128::from);
    let m2 = a1 * a2 - a3;
    let m3 = a3 * m2 - a1 * a1 * a4;
    let margins = [a1, m2, m3, a4];
    RouthHurwitz {
        coefficients: [a1, a2, a3, a4],
        margins,
        stable: margins.iter().all(|&m| m > 0),
        boundary: m3 == 0,
    }
}

/// `(D_phi/2) sum_edges w (dphi)^2 + V(phi) + (c_v/2) sum T^2 + (gamma/2) sum M^2`
/// with `V` the full formation potential.
pub fn lyapunov_value(cfg: &Configuration, p: &ModelParams, c_v: f64, gamma: f64) -> f64 {
    let h = &cfg.hyper;
    let phi = cfg.phi_field();
    let grad: f64 = h.edges().map(|(i, j)| h.weight(i, j) * (phi[i] - phi[j]).powi(2)).sum();
    let (v, _) = potential_of(h, &p.energy, &phi);
    let t2: f64 = cfg.agents.iter().map(|a| a.temperature * a.temperature).sum();
    let m2: f64 = cfg.agents.iter().map(|a| a.memory * a.memory).sum();
    0.5 * p.dynamics.d_phi * grad + v + 0.5 * c_v * t2 + 0.5 * gamma * m2
}

fn is_deterministic(d: &DynParams) -> bool {
    [
        d.sigma_phi,
        d.sigma_g,
        d.sigma_d,
        d.sigma_theta,
        d.temperature_noise,
        d.rate_role,
        d.rate_exchange,
        d.rate_birth,
        d.rate_death,
    ]
    .iter()
    .all(|&x| x == 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    /// Forward differences, one fewer than `v`.
    pub dvdt: Vec<f64>,
    pub max_dvdt: f64,
    /// Indices with `dV/dt > 1e-8`.
    pub violations: Vec<usize>,
}

/// Lyapunov values along a zero-noise trajectory.
pub fn lyapunov_check(traj: &[Configuration], p: &ModelParams, c_v: f64, gamma: f64) -> Result<LyapunovSeries> {
    if !is_deterministic(&p.dynamics) {
        return Err(Error::Refused("Lyapunov check needs zero noise amplitudes and zero jump rates".into()));
    }
    if traj.len() < 2 {
        return Err(Error::Parameter("trajectory needs at least 2 snapshots".into()));
    }
    let times: Vec<f64> = traj.iter().map(|c| c.time).collect();
    let v: Vec<f64> = traj.iter().map(|c| lyapunov_value(c, p, c_v, gamma)).collect();
    let dvdt: Vec<f64> = (1..v.len()).map(|k| (v[k] - v[k - 1]) / (times[k] - times[k - 1])).collect();
    let max_dvdt = dvdt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations = dvdt.iter().enumerate().filter(|(_, &d)| d > 1e-8).map(|(k, _)| k).collect();
    Ok(LyapunovSeries { times, v, dvdt, max_dvdt, violations })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MasterStability {
    /// `(alpha, Lambda(alpha))`.
    pub curve: Vec<(f64, f64)>,
    pub synchronizes: bool,
}

/// `Lambda(alpha) = max Re eig(J - alpha C)` on the given grid.
pub fn master_stability(j: &DMatrix<f64>, c: &DMatrix<f64>, alphas: &[f64]) -> Result<MasterStability> {
    if !j.is_square() || j.shape() != c.shape() {
        return Err(Error::Dimension { expected: j.nrows(), got: c.nrows() });
    }
    let curve: Vec<(f64, f64)> = alphas
        .iter()
        .map(|&a| {
            let m = j - c * a;
            (a, m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let synchronizes = curve.iter().all(|&(_, l)| l < 0.0);
    Ok(MasterStability { curve, synchronizes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoryBound {
    pub j_norm: f64,
    /// `int_0^t K`.
    pub kernel_mass: f64,
    /// Frozen-coefficient bound `|J|_2 int_0^t K`.
    pub m_norm: f64,
    pub gamma_c: f64,
    pub m_ok: bool,
    /// `exp(J int_0^t K)`.
    pub s_mem: Vec<Vec<f64>>,
    pub s_mem_norm: f64,
    pub s_ok: bool,
}

pub fn memory_operator_bound(j: &DMatrix<f64>, kernel: &KernelSpec, t: f64, gamma_c: f64) -> Result<MemoryBound> {
    if !j.is_square() {
        return Err(Error::Dimension { expected: j.nrows(), got: j.ncols() });
    }
    kernel.validate()?;
    let j_norm = spectral_norm(j);
    let kernel_mass = kernel.mass(t);
    let m_norm = j_norm * kernel_mass;
    let s = (j * kernel_mass).exp();
    let s_mem_norm = spectral_norm(&s);
    Ok(MemoryBound {
        j_norm,
        kernel_mass,
        m_norm,
        gamma_c,
        m_ok: m_norm <= gamma_c,
        s_mem: s.row_iter().map(|r| r.iter().copied().collect()).collect(),
        s_mem_norm,
        s_ok: s_mem_norm < 1.0,
    })
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Variable order of the Jacobian: all `phi`, then all `T`, then all `M`.
    pub variables: Vec<String>,
    /// Blocks left out of the linearization.
    pub excluded: Vec<String>,
    pub jacobian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<(f64, f64)>,
    pub char_poly: Vec<f64>,
    pub hurwitz_minors: Vec<f64>,
    pub hurwitz_stable: bool,
    /// Per-node `(phi, T, M)` block with the diffusive coupling
    /// `diag(D_phi, kappa_T, kappa_M)` added back, against the Laplacian
    /// spectrum.
    pub master_stability: MasterStability,
    pub lyapunov: Option<LyapunovSeries>,
    pub memory: MemoryBound,
}

/// Linear stability of the continuous `(phi, T, M)` sector at `cfg`, plus a
/// Lyapunov trace over `lyapunov_steps` zero-noise steps.
pub fn stability_report(cfg: &Configuration, p: &ModelParams, gamma_c: f64, lyapunov_steps: u64) -> Result<StabilityReport> {
    let n = cfg.n_agents();
    let mut x = cfg.phi_field();
    x.extend(cfg.temperature_field());
    x.extend(cfg.memory_field());
    let j = jacobian_fd(|y| deterministic_drift(cfg, &p.energy, &p.dynamics, y), &x, 1e-5)?;
    let eigenvalues: Vec<(f64, f64)> = j.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    let poly = char_poly(&j);
    let minors = hurwitz_minors(&poly);
    let hurwitz_stable = minors.iter().all(|&m| m > 0.0);

    let d = &p.dynamics;
    let coupling = Matrix3::from_diagonal(&nalgebra::Vector3::new(d.d_phi, d.kappa_t, d.kappa_mem));
    let mean_degree = (0..n).map(|i| cfg.hyper.weighted_degree(i)).sum::<f64>() / n as f64;
    let mut node = Matrix3::zeros();
    for i in 0..n {
        let idx = [i, n + i, 2 * n + i];
        node += Matrix3::from_fn(|r, c| j[(idx[r], idx[c])]) / n as f64;
    }
    node += coupling * mean_degree;
    let msf = master_stability(
        &DMatrix::from_column_slice(3, 3, node.as_slice()),
        &DMatrix::from_column_slice(3, 3, coupling.as_slice()),
        &cfg.hyper.laplacian_spectrum(),
    )?;

    let lyapunov = if lyapunov_steps > 0 {
        let mut q = p.clone();
        let d = &mut q.dynamics;
        for x in [
            &mut d.sigma_phi,
            &mut d.sigma_g,
            &mut d.sigma_d,
            &mut d.sigma_theta,
            &mut d.temperature_noise,
            &mut d.rate_role,
            &mut d.rate_exchange,
            &mut d.rate_birth,
            &mut d.rate_death,
        ] {
            *x = 0.0;
        }
        let mut trace = Trace::default();
        let horizon = lyapunov_steps as f64 * q.dynamics.dt;
        simulate(cfg.clone(), &q, ChaCha8Rng::seed_from_u64(0), horizon, 1, &mut [&mut trace])?;
        Some(lyapunov_check(&trace.0, &q, 1.0, 1.0)?)
    } else {
        None
    };

    let memory = memory_operator_bound(&j, &p.kernel, f64::INFINITY, gamma_c)?;
    let variables = (0..n)
        .map(|i| format!("phi_{i}"))
        .chain((0..n).map(|i| format!("T_{i}")))
        .chain((0..n).map(|i| format!("M_{i}")))
        .collect();
    Ok(StabilityReport {
        variables,
        excluded: vec!["incidence roles (discrete)".into()],
        jacobian: j.row_iter().map(|r| r.iter().copied().collect()).collect(),
        eigenvalues,
        char_poly: poly,
        hurwitz_minors: minors,
        hurwitz_stable,
        master_stability: msf,
        lyapunov,
        memory,
    })
}

/// Observer keeping every sampled configuration.
#[derive(Default)]
pub struct Trace(pub Vec<Configuration>);

impl Observer for Trace {
    fn observe(&mut self, cfg: &Configuration, _step: u64) {
        self.0.push(cfg.clone());
    }
}
