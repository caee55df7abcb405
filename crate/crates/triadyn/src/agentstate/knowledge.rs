//! Knowledge states: discrete probability vectors on the grid `x_k = k / n`.
//!
//! In one dimension optimal transport is monotone, so distances and
//! barycentres reduce to walking the two cumulative distributions together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeState {
    probs: Vec<f64>,
}

pub fn grid_point(k: usize, n: usize) -> f64 {
    k as f64 / n as f64
}

impl KnowledgeState {
    pub fn uniform(n: usize) -> Self {
        KnowledgeState { probs: vec![1.0 / n as f64; n] }
    }

    pub fn delta(n: usize, k: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[k] = 1.0;
        KnowledgeState { probs }
    }

    /// Accepts a probability vector summing to 1 within 1e-12.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let s = KnowledgeState { probs };
        match s.check() {
            None => Ok(s),
            Some(msg) => Err(Error::Parameter(msg)),
        }
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if w.is_empty() || !(total > 0.0) || w.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Parameter("knowledge weights must be nonnegative with positive sum".into()));
        }
        Ok(KnowledgeState { probs: w.iter().map(|x| x / total).collect() })
    }

    pub fn check(&self) -> Option<String> {
        if self.probs.is_empty() {
            return Some("empty knowledge state".into());
        }
        if self.probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Some("negative or non-finite knowledge mass".into());
        }
        let s: f64 = self.probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Some(format!("knowledge mass sums to {s}"));
        }
        None
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mean(&self) -> f64 {
        let n = self.len();
        self.probs.iter().enumerate().map(|(k, p)| p * grid_point(k, n)).sum()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Monotone coupling of two grid measures as `(mass, x_a, x_b)` segments.
fn coupling(a: &KnowledgeState, b: &KnowledgeState) -> Vec<(f64, f64, f64)> {
    let n = a.len();
    let (mut ca, mut cb) = (a.probs[0], b.probs[0]);
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut out = Vec::with_capacity(2 * n);
    while i < n && j < n {
        let next = ca.min(cb);
        let m = next - u;
        if m > 0.0 {
            out.push((m, grid_point(i, n), grid_point(j, n)));
        }
        u = next;
        if ca <= next {
            i += 1;
            if i < n {
                ca += a.probs[i];
            }
        }
        if cb <= next {
            j += 1;
            if j < n {
                cb += b.probs[j];
            }
        }
    }
    out
}

fn same_grid(a: &KnowledgeState, b: &KnowledgeState) {
    assert_eq!(a.len(), b.len(), "knowledge states on different grids");
}

/// Squared 2-Wasserstein distance.
pub fn wasserstein2_sq(a: &KnowledgeState, b: &KnowledgeState) -> f64 {
    same_grid(a, b);
    coupling(a, b).iter().map(|(m, x, y)| m * (x - y) * (x - y)).sum()
}

pub fn wasserstein2(a: &KnowledgeState, b: &KnowledgeState) -> f64 {
    wasserstein2_sq(a, b).sqrt()
}

/// McCann interpolation at fraction `t`, binned back to the grid by
/// splitting each atom linearly between its two neighbouring grid points.
pub fn displacement_interpolate(a: &KnowledgeState, b: &KnowledgeState, t: f64) -> KnowledgeState {
    same_grid(a, b);
    let n = a.len();
    let mut probs = vec![0.0; n];
    for (m, x, y) in coupling(a, b) {
        let pos = ((1.0 - t) * x + t * y) * n as f64;
        let r = pos.round();
        if (pos - r).abs() < 1e-9 {
            probs[(r as usize).min(n - 1)] += m;
            continue;
        }
        let k = (pos.floor() as usize).min(n - 1);
        let frac = pos - k as f64;
        probs[k] += m * (1.0 - frac);
        if k + 1 < n {
            probs[k + 1] += m * frac;
        } else {
            probs[k] += m * frac;
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    KnowledgeState { probs }
}

/// Two-point barycentre: average of the quantile functions.
pub fn barycenter2(a: &KnowledgeState, b: &KnowledgeState) -> KnowledgeState {
    displacement_interpolate(a, b, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Quantile integral by midpoint sampling of `u` on a fine grid.
    fn w2_sq_by_quantiles(a: &KnowledgeState, b: &KnowledgeState, samples: usize) -> f64 {
        let q = |s: &KnowledgeState, u: f64| {
            let mut c = 0.0;
            for (k, p) in s.probs().iter().enumerate() {
                c += p;
                if u <= c {
                    return grid_point(k, s.len());
                }
            }
            grid_point(s.len() - 1, s.len())
        };
        (0..samples)
            .map(|k| {
                let u = (k as f64 + 0.5) / samples as f64;
                (q(a, u) - q(b, u)).powi(2)
            })
            .sum::<f64>()
            / samples as f64
    }

    #[test]
    fn uniform_init_mass() {
        let u = KnowledgeState::uniform(16);
        assert!(u.probs().iter().all(|&p| p == 0.0625));
    }

    #[test]
    fn w2_examples() {
        let u = KnowledgeState::uniform(16);
        assert_eq!(wasserstein2(&u, &u), 0.0);
        let a = KnowledgeState::delta(16, 4);
        let b = KnowledgeState::delta(16, 12);
        assert!((wasserstein2(&a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w2_uniform_vs_delta_matches_quantile_integral() {
        let u = KnowledgeState::uniform(16);
        let d = KnowledgeState::delta(16, 8);
        let oracle = w2_sq_by_quantiles(&u, &d, 1 << 20);
        // sum_k (k/16 - 1/2)^2 / 16 = 43 / 512 in closed form
        assert!((oracle - 43.0 / 512.0).abs() < 1e-9);
        assert!((wasserstein2_sq(&u, &d) - oracle).abs() < 1e-9);
        assert!((wasserstein2(&u, &d) - (43.0f64 / 512.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn barycenter_examples() {
        let a = KnowledgeState::delta(16, 4);
        let b = KnowledgeState::delta(16, 12);
        assert_eq!(barycenter2(&a, &b), KnowledgeState::delta(16, 8));
        let w = KnowledgeState::from_weights(&[3.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.0, 4.0]).unwrap();
        assert!(barycenter2(&w, &w).total_variation(&w) <= 1e-12);
    }

    #[test]
    fn from_probs_rejects_bad_mass() {
        assert!(KnowledgeState::from_probs(vec![0.5, 0.6]).is_err());
        assert!(KnowledgeState::from_probs(vec![1.5, -0.5]).is_err());
        assert!(KnowledgeState::from_probs(vec![0.25, 0.75]).is_ok());
    }

    fn arb_state(n: usize) -> impl Strategy<Value = KnowledgeState> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], n)
            .prop_filter("positive", |w| w.iter().sum::<f64>() > 1e-3)
            .prop_map(|w| KnowledgeState::from_weights(&w).unwrap())
    }

    proptest! {
        #[test]
        fn w2_metric_laws(a in arb_state(16), b in arb_state(16), c in arb_state(16)) {
            prop_assert_eq!(wasserstein2(&a, &b), wasserstein2(&b, &a));
            prop_assert!(wasserstein2(&a, &c) <= wasserstein2(&a, &b) + wasserstein2(&b, &c) + 1e-10);
            prop_assert!(wasserstein2(&a, &a) == 0.0);
        }

        #[test]
        fn w2_matches_quantile_oracle(a in arb_state(8), b in arb_state(8)) {
            let fine = w2_sq_by_quantiles(&a, &b, 1 << 16);
            prop_assert!((wasserstein2_sq(&a, &b) - fine).abs() < 5e-4);
        }

        #[test]
        fn barycenter_beats_random_candidates(a in arb_state(16), b in arb_state(16),
                                             mus in prop::collection::vec(arb_state(16), 100)) {
            let bar = barycenter2(&a, &b);
            prop_assert!(bar.check().is_none());
            let cost = |m: &KnowledgeState| wasserstein2_sq(m, &a) + wasserstein2_sq(m, &b);
            let best = cost(&bar);
            for mu in &mus {
                prop_assert!(best <= cost(mu) + 1e-12);
            }
        }

        #[test]
        fn barycenter_preserves_mean(a in arb_state(16), b in arb_state(16)) {
            let bar = barycenter2(&a, &b);
            prop_assert!((bar.mean() - 0.5 * (a.mean() + b.mean())).abs() < 1e-12);
        }
    }
}
