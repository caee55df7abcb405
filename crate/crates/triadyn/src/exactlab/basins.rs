use std::collections::VecDeque;

use serde::Serialize;

use super::SpinModel;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasinDecomposition {
    /// Attractor state codes in ascending order.
    pub attractors: Vec<u64>,
    /// Basin index of every state code.
    pub basin_of: Vec<usize>,
    pub sizes: Vec<usize>,
    /// 1 when a single flip crosses between the two basins.
    pub connectivity: Vec<Vec<u8>>,
    /// Hop distance between basins on the connectivity graph.
    pub hierarchy: Vec<Vec<Option<usize>>>,
}

/// Zero-temperature steepest single-flip descent. Each state moves to its
/// lowest-energy single-flip neighbour if that lowers the energy (ties go to
/// the lowest code); states without a strictly downhill flip are attractors.
pub fn basin_decomposition(model: &SpinModel) -> Result<BasinDecomposition> {
    model.validate()?;
    let bits = model.bits();
    let n = 1usize << bits;
    let energy = model.energy_fn()?;
    let e: Vec<f64> = (0..n as u64).map(&energy).collect();
    let next: Vec<usize> = (0..n)
        .map(|x| {
            let mut best = x;
            for b in 0..bits {
                let y = x ^ (1 << b);
                if e[y] < e[best] || (e[y] == e[best] && best != x && y < best) {
                    best = y;
                }
            }
            best
        })
        .collect();
    let attractors: Vec<u64> = (0..n).filter(|&x| next[x] == x).map(|x| x as u64).collect();
    let mut basin_of = vec![usize::MAX; n];
    for (k, &a) in attractors.iter().enumerate() {
        basin_of[a as usize] = k;
    }
    for x in 0..n {
        let mut path = Vec::new();
        let mut y = x;
        while basin_of[y] == usize::MAX {
            path.push(y);
            y = next[y];
        }
        let b = basin_of[y];
        path.into_iter().for_each(|z| basin_of[z] = b);
    }
    let k = attractors.len();
    let mut sizes = vec![0; k];
    basin_of.iter().for_each(|&b| sizes[b] += 1);
    let mut connectivity = vec![vec![0u8; k]; k];
    for x in 0..n {
        for b in 0..bits {
            let (p, q) = (basin_of[x], basin_of[x ^ (1 << b)]);
            if p != q {
                connectivity[p][q] = 1;
            }
        }
    }
    let hierarchy = (0..k)
        .map(|s| {
            let mut d = vec![None; k];
            d[s] = Some(0);
            let mut queue = VecDeque::from([s]);
            while let Some(a) = queue.pop_front() {
                for b in 0..k {
                    if connectivity[a][b] == 1 && d[b].is_none() {
                        d[b] = Some(d[a].unwrap() + 1);
                        queue.push_back(b);
                    }
                }
            }
            d
        })
        .collect();
    Ok(BasinDecomposition { attractors, basin_of, sizes, connectivity, hierarchy })
}
