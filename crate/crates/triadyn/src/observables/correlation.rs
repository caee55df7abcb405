use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::TriadicHypergraph;

/// `<s_i . s_j> - <s_i> . <s_j>` over an ensemble of opinion snapshots
/// (`snapshots[k][i]` is agent `i`'s vector in sample `k`).
pub fn connected_correlation(snapshots: &[Vec<Vec<i8>>]) -> Result<DMatrix<f64>> {
    if snapshots.len() < 2 {
        return Err(Error::Parameter("connected correlations need at least 2 snapshots".into()));
    }
    let n = snapshots[0].len();
    let m = snapshots[0].first().map_or(0, Vec::len);
    if snapshots.iter().any(|s| s.len() != n || s.iter().any(|v| v.len() != m)) {
        return Err(Error::Parameter("snapshots differ in shape".into()));
    }
    let k = snapshots.len() as f64;
    let mut mean = vec![vec![0.0; m]; n];
    let mut second = DMatrix::<f64>::zeros(n, n);
    for s in snapshots {
        for i in 0..n {
            for l in 0..m {
                mean[i][l] += s[i][l] as f64 / k;
            }
            for j in i..n {
                let d: i32 = s[i].iter().zip(&s[j]).map(|(&a, &b)| a as i32 * b as i32).sum();
                second[(i, j)] += d as f64 / k;
            }
        }
    }
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mm: f64 = mean[i].iter().zip(&mean[j]).map(|(a, b)| a * b).sum();
            c[(i, j)] = second[(i, j)] - mm;
            c[(j, i)] = c[(i, j)];
        }
    }
    Ok(c)
}

/// Mean of all entries of the connected correlation matrix.
pub fn c_global(c: &DMatrix<f64>) -> f64 {
    c.mean()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceBin {
    pub distance: usize,
    pub mean: f64,
    pub count: usize,
}

/// Correlations averaged by hop distance on the 2-section; unreachable pairs
/// are skipped.
pub fn correlation_by_distance(h: &TriadicHypergraph, c: &DMatrix<f64>) -> Vec<DistanceBin> {
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for i in 0..h.n_agents() {
        for (j, d) in h.distances_from(i).into_iter().enumerate().skip(i) {
            if let Some(d) = d {
                if sums.len() <= d {
                    sums.resize(d + 1, (0.0, 0));
                }
                sums[d].0 += c[(i, j)];
                sums[d].1 += 1;
            }
        }
    }
    sums.into_iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(d, (s, n))| DistanceBin { distance: d, mean: s / n as f64, count: n })
        .collect()
}
