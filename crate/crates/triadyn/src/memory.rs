//! Exponential-mixture memory kernel, its Markovian embedding, and the
//! conservative node-memory field.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::agentstate::{Configuration, Role};
use crate::error::{Error, Result};
use crate::hypergraph::{triad_map, Triad, TriadicHypergraph};

/// `K(t) = sum_n a_n / tau_n * exp(-t / tau_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub a: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { a: vec![0.6, 0.3, 0.1], tau: vec![0.1, 1.0, 10.0] }
    }
}

impl KernelSpec {
    pub fn new(a: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        let k = KernelSpec { a, tau };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.a.len() != self.tau.len() {
            return Err(Error::Parameter("kernel.a and kernel.tau must be nonempty and paired".into()));
        }
        if self.a.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::Parameter("kernel weights must be nonnegative".into()));
        }
        if self.tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::Parameter("kernel timescales must be positive".into()));
        }
        let s: f64 = self.a.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("kernel weights sum to {s}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!("kernel evaluated at t = {t}")));
        }
        Ok(self.a.iter().zip(&self.tau).map(|(a, tau)| a / tau * (-t / tau).exp()).sum())
    }

    /// `int_0^t K`.
    pub fn mass(&self, t: f64) -> f64 {
        self.a.iter().zip(&self.tau).map(|(a, tau)| a * -(-t / tau).exp_m1()).sum()
    }

    pub fn max_tau(&self) -> f64 {
        self.tau.iter().copied().fold(0.0, f64::max)
    }
}

/// Auxiliary filter states of one channel; the filtered value is their sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    pub m: Vec<f64>,
}

impl Embedding {
    pub fn new(k: &KernelSpec) -> Self {
        Embedding { m: vec![0.0; k.len()] }
    }

    pub fn value(&self) -> f64 {
        self.m.iter().sum()
    }

    /// Exact update for an input held constant over the step.
    pub fn step(&mut self, k: &KernelSpec, u: f64, dt: f64) {
        for ((m, a), tau) in self.m.iter_mut().zip(&k.a).zip(&k.tau) {
            let decay = (-dt / tau).exp();
            *m = *m * decay + a * -(-dt / tau).exp_m1() * u;
        }
    }

    /// Exact update for an input varying linearly from `u0` to `u1` over the
    /// step. This is the right update for sampled continuous signals.
    pub fn step_linear(&mut self, k: &KernelSpec, u0: f64, u1: f64, dt: f64) {
        for ((m, a), tau) in self.m.iter_mut().zip(&k.a).zip(&k.tau) {
            let x = dt / tau;
            let decay = (-x).exp();
            let one_minus = -(-x).exp_m1();
            // int_0^dt e^{-(dt-s)/tau} s/dt ds / tau = 1 - (1 - e^{-x}) / x
            let ramp = if x > 1e-4 { 1.0 - one_minus / x } else { x / 2.0 - x * x / 6.0 + x * x * x / 24.0 };
            *m = *m * decay + a * (one_minus * u0 + ramp * (u1 - u0));
        }
    }
}

/// Trapezoid-rule `int_0^t K(t - s) u(s) ds` at every sample. Quadratic cost.
pub fn direct_convolution(k: &KernelSpec, u: &[f64], dt: f64) -> Vec<f64> {
    (0..u.len()).map(|n| direct_convolution_at(k, u, dt, n)).collect()
}

/// Trapezoid convolution evaluated at sample `n` only.
pub fn direct_convolution_at(k: &KernelSpec, u: &[f64], dt: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let kern = |j: usize| k.eval((n - j) as f64 * dt).unwrap();
    let mut s = 0.5 * (kern(0) * u[0] + kern(n) * u[n]);
    for j in 1..n {
        s += kern(j) * u[j];
    }
    s * dt
}

/// All filtered channels carried by a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    /// Node memory `M_i`; pair and triad averages follow by linearity.
    pub node: Vec<Embedding>,
    /// Role-class averages in `Role::ALL` order.
    pub role: Vec<Embedding>,
    /// Triad success signal (opinion coherence of the triad).
    #[serde(with = "triad_map")]
    pub success: BTreeMap<Triad, Embedding>,
    /// Triad nonlocal topology signal.
    #[serde(with = "triad_map")]
    pub nonlocal: BTreeMap<Triad, Embedding>,
}

impl Embeddings {
    pub fn new(k: &KernelSpec, n_agents: usize, triads: &[Triad]) -> Self {
        let mut e = Embeddings {
            node: vec![Embedding::new(k); n_agents],
            role: vec![Embedding::new(k); 3],
            success: BTreeMap::new(),
            nonlocal: BTreeMap::new(),
        };
        for t in triads {
            e.add_triad(k, *t);
        }
        e
    }

    pub fn add_triad(&mut self, k: &KernelSpec, t: Triad) {
        self.success.insert(t, Embedding::new(k));
        self.nonlocal.insert(t, Embedding::new(k));
    }

    pub fn drop_triad(&mut self, t: &Triad) {
        self.success.remove(t);
        self.nonlocal.remove(t);
    }

    pub fn node_value(&self, i: usize) -> f64 {
        self.node[i].value()
    }

    pub fn pair_value(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.node_value(i) + self.node_value(j))
    }

    pub fn triad_mean_value(&self, t: &Triad) -> f64 {
        t.iter().map(|&a| self.node_value(a)).sum::<f64>() / 3.0
    }

    pub fn global_value(&self) -> f64 {
        if self.node.is_empty() {
            return 0.0;
        }
        self.node.iter().map(Embedding::value).sum::<f64>() / self.node.len() as f64
    }

    pub fn success_value(&self, t: &Triad) -> f64 {
        self.success.get(t).map_or(0.0, Embedding::value)
    }

    pub fn nonlocal_value(&self, t: &Triad) -> f64 {
        self.nonlocal.get(t).map_or(0.0, Embedding::value)
    }

    pub fn role_value(&self, r: Role) -> f64 {
        self.role[r.index()].value()
    }

    pub fn all_finite(&self) -> bool {
        let fin = |e: &Embedding| e.m.iter().all(|x| x.is_finite());
        self.node.iter().all(fin)
            && self.role.iter().all(fin)
            && self.success.values().all(fin)
            && self.nonlocal.values().all(fin)
    }
}

/// Node-by-triad forcing matrix: `+1/3` on members, `-1/N` everywhere.
/// Columns follow the hypergraph's triad order.
pub fn build_zero_sum_forcing(h: &TriadicHypergraph) -> DMatrix<f64> {
    let n = h.n_agents();
    let triads = h.triad_list();
    let mut b = DMatrix::from_element(n, triads.len(), -1.0 / n as f64);
    for (c, t) in triads.iter().enumerate() {
        for &a in t {
            b[(a, c)] += 1.0 / 3.0;
        }
    }
    b
}

/// `B u` without forming `B`.
pub fn forcing_apply(n_agents: usize, triads: &[Triad], u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n_agents];
    let mut total = 0.0;
    for (t, &x) in triads.iter().zip(u) {
        for &a in t {
            out[a] += x / 3.0;
        }
        total += x;
    }
    let shift = total / n_agents as f64;
    out.iter_mut().for_each(|o| *o -= shift);
    out
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Checks `dt * rate * lambda_max(L) < 2`, using the Gershgorin bound first
/// and the exact spectrum only when the bound is inconclusive.
pub fn check_explicit_stability(h: &TriadicHypergraph, rate: f64, dt: f64) -> Result<()> {
    let bound = dt * rate * h.lambda_max_bound();
    if bound < 2.0 {
        return Ok(());
    }
    let exact = dt * rate * h.laplacian_spectrum().last().copied().unwrap_or(0.0);
    if exact < 2.0 {
        Ok(())
    } else {
        Err(Error::StepSize(exact))
    }
}

/// Explicit Euler step of `dM/dt = -kappa L M + f` with the increment
/// projected onto zero sum, so `sum M` changes only by final rounding.
pub fn memory_field_step(
    m: &mut [f64],
    h: &TriadicHypergraph,
    forcing: &[f64],
    kappa: f64,
    dt: f64,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt = {dt}")));
    }
    if forcing.len() != m.len() {
        return Err(Error::Dimension { expected: m.len(), got: forcing.len() });
    }
    check_explicit_stability(h, kappa, dt)?;
    let lm = h.laplacian_apply(m)?;
    let mut inc: Vec<f64> = lm.iter().zip(forcing).map(|(l, f)| dt * (-kappa * l + f)).collect();
    let drift = compensated_sum(&inc) / m.len() as f64;
    inc.iter_mut().for_each(|x| *x -= drift);
    for (mi, d) in m.iter_mut().zip(&inc) {
        *mi += d;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoleMemory {
    pub value: f64,
    /// No incidence currently holds the role; `value` is then 0.
    pub empty: bool,
}

/// Mean node memory over incidences holding each role, in `Role::ALL` order.
pub fn role_class_memory(cfg: &Configuration) -> [RoleMemory; 3] {
    let mut sum = [0.0; 3];
    let mut count = [0usize; 3];
    for (&(a, _), &r) in cfg.roles.iter() {
        sum[r.index()] += cfg.agents[a].memory;
        count[r.index()] += 1;
    }
    std::array::from_fn(|k| RoleMemory {
        value: if count[k] > 0 { sum[k] / count[k] as f64 } else { 0.0 },
        empty: count[k] == 0,
    })
}
