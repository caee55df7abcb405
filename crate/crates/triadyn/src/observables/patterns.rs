use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agentstate::Configuration;
use crate::error::{Error, Result};

/// Stored opinion patterns, each `N x m` with entries `+-1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternBank {
    pub patterns: Vec<Vec<Vec<i8>>>,
}

impl PatternBank {
    pub fn new(patterns: Vec<Vec<Vec<i8>>>) -> Result<Self> {
        if patterns.iter().flatten().flatten().any(|&x| x != 1 && x != -1) {
            return Err(Error::Parameter("pattern entries must be +1 or -1".into()));
        }
        Ok(PatternBank { patterns })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, count: usize, n: usize, m: usize) -> Self {
        let patterns = (0..count)
            .map(|_| (0..n).map(|_| (0..m).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()).collect())
            .collect();
        PatternBank { patterns }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatternOverlap {
    /// Cosine between pattern and opinion matrix, clipped to `[-1, 1]`.
    pub raw: f64,
    /// Raw cosine times `1 + gamma * filtered global memory`.
    pub q: f64,
}

pub fn pattern_overlap(cfg: &Configuration, bank: &PatternBank, gamma: f64) -> Result<Vec<PatternOverlap>> {
    if bank.is_empty() {
        return Err(Error::Parameter("empty pattern bank".into()));
    }
    let s_norm = cfg.agents.iter().map(|a| a.opinion.len()).sum::<usize>() as f64;
    if s_norm == 0.0 {
        return Err(Error::Parameter("zero-norm opinion state".into()));
    }
    let factor = 1.0 + gamma * cfg.embeddings.global_value();
    bank.patterns
        .iter()
        .map(|w| {
            if w.len() != cfg.n_agents() {
                return Err(Error::Dimension { expected: cfg.n_agents(), got: w.len() });
            }
            let mut xi = 0i64;
            let mut w_norm = 0usize;
            for (wi, a) in w.iter().zip(&cfg.agents) {
                if wi.len() != a.opinion.len() {
                    return Err(Error::Dimension { expected: a.opinion.len(), got: wi.len() });
                }
                xi += wi.iter().zip(&a.opinion).map(|(&x, &s)| x as i64 * s as i64).sum::<i64>();
                w_norm += wi.len();
            }
            let raw = (xi as f64 / (w_norm as f64 * s_norm).sqrt()).clamp(-1.0, 1.0);
            Ok(PatternOverlap { raw, q: raw * factor })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityFit {
    pub p_max: f64,
    pub beta: f64,
    /// `(T, P_eff, bound)` per sweep point.
    pub curve: Vec<(f64, f64, f64)>,
    pub holds: bool,
}

/// Smallest `P_max` with `P_eff(T) <= P_max exp(-beta / T)` over the sweep,
/// and the resulting bound curve.
pub fn capacity_bound_fit(points: &[(f64, f64)], beta: f64) -> Result<CapacityFit> {
    if points.is_empty() || points.iter().any(|&(t, _)| !(t > 0.0)) {
        return Err(Error::Parameter("capacity fit needs points with T > 0".into()));
    }
    let p_max = points.iter().map(|&(t, p)| p * (beta / t).exp()).fold(f64::NEG_INFINITY, f64::max);
    let curve: Vec<_> = points.iter().map(|&(t, p)| (t, p, p_max * (-beta / t).exp())).collect();
    let holds = curve.iter().all(|&(_, p, b)| p <= b * (1.0 + 1e-12));
    Ok(CapacityFit { p_max, beta, curve, holds })
}
