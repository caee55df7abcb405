use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::agentstate::{dot, Configuration};
use crate::error::{Error, Result};

fn bin_indices(x: &[f64], bins: usize) -> Vec<usize> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    x.iter()
        .map(|&v| if width > 0.0 { (((v - lo) / width * bins as f64) as usize).min(bins - 1) } else { 0 })
        .collect()
}

fn entropy_of_counts<K>(counts: &BTreeMap<K, usize>, total: usize) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

fn counts<K: Ord, I: IntoIterator<Item = K>>(it: I) -> (BTreeMap<K, usize>, usize) {
    let mut m = BTreeMap::new();
    let mut n = 0;
    for k in it {
        *m.entry(k).or_insert(0) += 1;
        n += 1;
    }
    (m, n)
}

/// Plug-in entropy (nats) of `x` on `bins` equal-width bins spanning its range.
pub fn binned_entropy(x: &[f64], bins: usize) -> f64 {
    let (c, n) = counts(bin_indices(x, bins));
    entropy_of_counts(&c, n)
}

/// Histogram plug-in mutual information in nats.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() || x.len() < 100 {
        return Err(Error::Parameter(format!("series lengths {} and {} (need equal, >= 100)", x.len(), y.len())));
    }
    if bins == 0 {
        return Err(Error::Parameter("bins must be positive".into()));
    }
    let (bx, by) = (bin_indices(x, bins), bin_indices(y, bins));
    let (cx, n) = counts(bx.iter().copied());
    let (cy, _) = counts(by.iter().copied());
    let (cxy, _) = counts(bx.iter().copied().zip(by.iter().copied()));
    let mi = entropy_of_counts(&cx, n) + entropy_of_counts(&cy, n) - entropy_of_counts(&cxy, n);
    Ok(mi.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    /// Ordinary frequencies `k / (n dt)` up to Nyquist.
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub df: f64,
}

/// One-sided periodogram of the demeaned series; `sum(power) * df` equals the
/// plug-in variance.
pub fn spectral_capacity(series: &[f64], dt: f64) -> Result<Spectrum> {
    let n = series.len();
    if n < 2 || !(dt > 0.0) {
        return Err(Error::Parameter(format!("spectral capacity of {n} samples at dt = {dt}")));
    }
    let m = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let df = 1.0 / (n as f64 * dt);
    let power = (0..=half)
        .map(|k| {
            let p = dt / n as f64 * buf[k].norm_sqr();
            let interior = k != 0 && !(n % 2 == 0 && k == half);
            if interior {
                2.0 * p
            } else {
                p
            }
        })
        .collect();
    Ok(Spectrum { freqs: (0..=half).map(|k| k as f64 * df).collect(), power, df })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HierarchicalEntropy {
    pub s_global: f64,
    pub s_local_mean: f64,
    pub s_meso_mean: f64,
    pub s_hier: f64,
}

fn encode(v: &[i8]) -> u64 {
    v.iter().fold(0u64, |acc, &s| (acc << 1) | (s > 0) as u64)
}

/// `S_global - mean S_local - mean S_meso` over a window of snapshots. Local
/// alphabets are agent opinion vectors, meso alphabets the joint triad
/// pattern (triads of the first snapshot), and the global observable is the
/// total edge agreement.
pub fn hierarchical_entropy(window: &[Configuration]) -> Result<HierarchicalEntropy> {
    let first = window.first().ok_or_else(|| Error::Parameter("empty window".into()))?;
    let m = first.opinion_dim();
    if m > 3 {
        return Err(Error::Refused(format!(
            "triad pattern alphabet 2^(3m) with m = {m} is too large for plug-in estimates; use m <= 3"
        )));
    }
    let n = first.n_agents();
    let s_local: f64 = (0..n)
        .map(|i| {
            let (c, k) = counts(window.iter().map(|g| encode(&g.agents[i].opinion)));
            entropy_of_counts(&c, k)
        })
        .sum::<f64>()
        / n as f64;
    let triads = first.hyper.triad_list();
    let s_meso = if triads.is_empty() {
        0.0
    } else {
        triads
            .iter()
            .map(|t| {
                let (c, k) = counts(window.iter().map(|g| {
                    let mut code = 0u64;
                    for &a in t {
                        code = (code << m) | encode(&g.agents[a].opinion);
                    }
                    code
                }));
                entropy_of_counts(&c, k)
            })
            .sum::<f64>()
            / triads.len() as f64
    };
    let (c, k) = counts(window.iter().map(|g| {
        g.hyper.edges().map(|(i, j)| dot(&g.agents[i].opinion, &g.agents[j].opinion) as i64).sum::<i64>()
    }));
    let s_global = entropy_of_counts(&c, k);
    Ok(HierarchicalEntropy { s_global, s_local_mean: s_local, s_meso_mean: s_meso, s_hier: s_global - s_local - s_meso })
}

/// `sum_{x != y} pi_x k_xy ln(pi_x k_xy / (pi_y k_yx))`. Returns infinity
/// when a used transition has no reverse.
pub fn entropy_production_jump(k: &DMatrix<f64>, pi: &[f64]) -> Result<f64> {
    let n = pi.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Dimension { expected: n, got: k.nrows() });
    }
    // pair the two directions so every term is nonnegative
    let mut s = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            let fwd = pi[x] * k[(x, y)];
            let back = pi[y] * k[(y, x)];
            match (fwd > 0.0, back > 0.0) {
                (true, true) => s += (fwd - back) * (fwd / back).ln(),
                (false, false) => {}
                _ => return Ok(f64::INFINITY),
            }
        }
    }
    Ok(s)
}
