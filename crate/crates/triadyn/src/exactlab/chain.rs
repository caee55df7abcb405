use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::SpinModel;
use crate::error::{Error, Result};

/// Dense generators are limited to this many states.
pub const MAX_DENSE_STATES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    Metropolis,
    HeatBath,
}

impl Acceptance {
    fn prob(self, delta: f64, t: f64) -> f64 {
        match self {
            Acceptance::Metropolis => {
                if delta <= 0.0 {
                    1.0
                } else {
                    (-delta / t).exp()
                }
            }
            Acceptance::HeatBath => 1.0 / (1.0 + (delta / t).exp()),
        }
    }
}

/// Jump rule of the oracle chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Single-component flips at the flipping agent's temperature.
    HeatBath,
    Metropolis,
    /// Whole-vector swaps across 2-section edges at the mean temperature of
    /// the pair.
    Kawasaki(Acceptance),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mode {
    pub re: f64,
    pub im: f64,
    /// `-1 / re`; infinite for the stationary mode.
    pub tau: f64,
    /// Squared projection of the queried observable (reversible chains).
    pub weight: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateModel {
    pub rule: Rule,
    /// State codes in ascending order.
    pub states: Vec<u64>,
    pub energies: Vec<f64>,
    /// `k[(x, y)]` is the rate from `x` to `y`; rows sum to zero.
    #[serde(serialize_with = "ser_matrix")]
    pub k: DMatrix<f64>,
    pub pi: Vec<f64>,
    /// Largest `|pi_x k_xy - pi_y k_yx|`.
    pub balance_residual: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

/// Outgoing `(target, rate)` moves of a state.
fn moves(model: &SpinModel, rule: Rule, edges: &[((usize, usize), f64)], energy: &dyn Fn(u64) -> f64, x: u64) -> Vec<(u64, f64)> {
    let ex = energy(x);
    let mut out = Vec::new();
    match rule {
        Rule::HeatBath | Rule::Metropolis => {
            let acc = if rule == Rule::HeatBath { Acceptance::HeatBath } else { Acceptance::Metropolis };
            for i in 0..model.n_agents {
                for l in 0..model.m {
                    let y = x ^ (1 << (i * model.m + l));
                    let r = model.flip_rate * acc.prob(energy(y) - ex, model.temperature(i));
                    if r > 0.0 {
                        out.push((y, r));
                    }
                }
            }
        }
        Rule::Kawasaki(acc) => {
            let per_edge = model.rate_exchange / edges.len().max(1) as f64;
            let mask = (1u64 << model.m) - 1;
            for &((i, j), _) in edges {
                let (si, sj) = (x >> (i * model.m) & mask, x >> (j * model.m) & mask);
                if si == sj {
                    continue;
                }
                let y = x & !(mask << (i * model.m)) & !(mask << (j * model.m)) | sj << (i * model.m) | si << (j * model.m);
                let t = 0.5 * (model.temperature(i) + model.temperature(j));
                let r = per_edge * acc.prob(energy(y) - ex, t);
                if r > 0.0 {
                    out.push((y, r));
                }
            }
        }
    }
    out
}

/// Generator of `rule` on the communicating class of `start`. Single-site
/// rules reach every state; exchange rules stay in the class of `start`,
/// which is its total-opinion sector when `m = 1`.
pub fn build_rate_matrix(model: &SpinModel, rule: Rule, start: u64) -> Result<RateModel> {
    model.validate()?;
    if start >> model.bits() != 0 {
        return Err(Error::Parameter(format!("start state {start} has more than {} bits", model.bits())));
    }
    let edges = model.weighted_edges()?;
    let energy = model.energy_fn()?;
    // forward closure
    let mut seen = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    seen.insert(start, ());
    let mut out_moves: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    while let Some(x) = queue.pop_front() {
        let mv = moves(model, rule, &edges, &energy, x);
        for &(y, _) in &mv {
            if seen.insert(y, ()).is_none() {
                if seen.len() > MAX_DENSE_STATES {
                    return Err(Error::StateSpace(seen.len() as u128));
                }
                queue.push_back(y);
            }
        }
        out_moves.insert(x, mv);
    }
    let states: Vec<u64> = out_moves.keys().copied().collect();
    let index: BTreeMap<u64, usize> = states.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let n = states.len();
    let mut k = DMatrix::zeros(n, n);
    for (&x, mv) in &out_moves {
        let a = index[&x];
        for &(y, r) in mv {
            k[(a, index[&y])] += r;
        }
    }
    for a in 0..n {
        let s: f64 = k.row(a).iter().enumerate().filter(|&(b, _)| b != a).map(|(_, v)| v).sum();
        k[(a, a)] = -s;
    }
    check_irreducible(&k)?;
    let pi = stationary(&k)?;
    let balance_residual = (0..n)
        .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
        .map(|(x, y)| (pi[x] * k[(x, y)] - pi[y] * k[(y, x)]).abs())
        .fold(0.0, f64::max);
    Ok(RateModel { rule, energies: states.iter().map(|&c| energy(c)).collect(), states, k, pi, balance_residual })
}

fn check_irreducible(k: &DMatrix<f64>) -> Result<()> {
    let n = k.nrows();
    for transpose in [false, true] {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(x) = stack.pop() {
            for y in 0..n {
                let r = if transpose { k[(y, x)] } else { k[(x, y)] };
                if y != x && r > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        if let Some(bad) = seen.iter().position(|s| !s) {
            return Err(Error::Reducible(format!("state index {bad} is not mutually reachable from index 0")));
        }
    }
    Ok(())
}

/// Solves `pi K = 0`, `sum pi = 1`.
fn stationary(k: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = k.nrows();
    let mut a = k.transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or_else(|| Error::Reducible("singular stationary system".into()))?;
    Ok(pi.iter().map(|&p| p.max(0.0)).collect())
}

impl RateModel {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, code: u64) -> Option<usize> {
        self.states.binary_search(&code).ok()
    }

    /// Largest entry of `|pi K|`.
    pub fn stationarity_residual(&self) -> f64 {
        let pi = DVector::from_vec(self.pi.clone());
        (self.k.transpose() * pi).amax()
    }

    pub fn max_row_sum(&self) -> f64 {
        self.k.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    pub fn is_reversible(&self) -> bool {
        self.balance_residual <= 1e-12 * self.k.amax().max(1.0)
    }

    pub fn stationary_map(&self) -> BTreeMap<u64, f64> {
        self.states.iter().copied().zip(self.pi.iter().copied()).collect()
    }

    pub fn entropy_production(&self) -> Result<f64> {
        crate::observables::entropy_production_jump(&self.k, &self.pi)
    }

    /// Symmetrized generator `D^{1/2} K D^{-1/2}` of a reversible chain.
    fn symmetric_eigen(&self) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        if !self.is_reversible() {
            return Err(Error::Refused("observable decomposition needs a reversible chain".into()));
        }
        let n = self.len();
        let sq: Vec<f64> = self.pi.iter().map(|p| p.sqrt()).collect();
        let mut s = DMatrix::from_fn(n, n, |x, y| sq[x] * self.k[(x, y)] / sq[y]);
        s = 0.5 * (&s + s.transpose());
        Ok(SymmetricEigen::new(s))
    }

    /// Generator eigenvalues sorted by decreasing real part, stationary mode
    /// first.
    pub fn spectrum(&self) -> Vec<Mode> {
        let mut modes: Vec<Mode> = match self.symmetric_eigen() {
            Ok(e) => e.eigenvalues.iter().map(|&re| mode(re, 0.0, None)).collect(),
            Err(_) => self.k.complex_eigenvalues().iter().map(|z| mode(z.re, z.im, None)).collect(),
        };
        modes.sort_by(|a, b| b.re.total_cmp(&a.re));
        modes
    }

    /// Modes carrying the fluctuations of `f` (one value per state), with
    /// squared projections summing to `Var_pi(f)`.
    pub fn observable_modes(&self, f: &[f64]) -> Result<Vec<Mode>> {
        if f.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: f.len() });
        }
        let e = self.symmetric_eigen()?;
        let sq: Vec<f64> = self.pi.iter().map(|p| p.sqrt()).collect();
        let mut modes: Vec<Mode> = e
            .eigenvalues
            .iter()
            .zip(e.eigenvectors.column_iter())
            .map(|(&re, u)| {
                let c: f64 = u.iter().zip(&sq).zip(f).map(|((u, s), f)| u * s * f).sum();
                mode(re, 0.0, Some(c * c))
            })
            .collect();
        modes.sort_by(|a, b| b.re.total_cmp(&a.re));
        // the stationary mode carries the squared mean
        modes[0].weight = Some(0.0);
        Ok(modes)
    }

    /// Slowest nonstationary relaxation time.
    pub fn slowest_relaxation(&self) -> f64 {
        self.spectrum().get(1).map_or(f64::INFINITY, |m| m.tau)
    }

    /// Slowest mode whose share of `Var_pi(f)` exceeds `min_share`.
    pub fn slowest_visible(&self, f: &[f64], min_share: f64) -> Result<Option<Mode>> {
        let modes = self.observable_modes(f)?;
        let var: f64 = modes.iter().filter_map(|m| m.weight).sum();
        if var == 0.0 {
            return Ok(None);
        }
        Ok(modes.into_iter().skip(1).find(|m| m.weight.unwrap() / var > min_share))
    }

    /// Normalized stationary autocorrelation of `f` at lag `t`.
    pub fn autocorrelation(&self, f: &[f64], t: f64) -> Result<f64> {
        let modes = self.observable_modes(f)?;
        let var: f64 = modes.iter().filter_map(|m| m.weight).sum();
        Ok(modes.iter().map(|m| m.weight.unwrap() * (m.re * t).exp()).sum::<f64>() / var)
    }
}

fn mode(re: f64, im: f64, weight: Option<f64>) -> Mode {
    // the stationary eigenvalue comes out at roundoff level
    let tau = if re.abs() < 1e-10 { f64::INFINITY } else { -1.0 / re };
    Mode { re, im, tau, weight }
}
