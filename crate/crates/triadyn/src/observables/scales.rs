use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::agentstate::Configuration;
use crate::energy::{triad_coherence, triad_phi};
use crate::error::{Error, Result};
use crate::hypergraph::Triad;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeView {
    pub phi: f64,
    pub temperature: f64,
    pub memory: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MesoView {
    pub triad: Triad,
    pub phi: f64,
    pub coherence: f64,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projections {
    pub micro: Vec<f64>,
    /// Triad-mean field in hypergraph triad order.
    pub meso: Vec<f64>,
    /// Heat-kernel smoothed field `exp(-ell L) phi`.
    pub macro_field: Vec<f64>,
    pub local: Vec<NodeView>,
    pub meso_view: Vec<MesoView>,
}

pub fn scale_projections(cfg: &Configuration, ell: f64) -> Result<Projections> {
    let micro = cfg.phi_field();
    let macro_field = cfg.hyper.heat_kernel_smooth(&micro, ell)?;
    let triads = cfg.hyper.triad_list();
    let meso_view: Vec<MesoView> = triads
        .iter()
        .map(|t| MesoView {
            triad: *t,
            phi: triad_phi(cfg, t),
            coherence: triad_coherence(cfg, t),
            temperature: cfg.triad_temperature(t),
        })
        .collect();
    let local = cfg.agents.iter().map(|a| NodeView { phi: a.phi, temperature: a.temperature, memory: a.memory }).collect();
    Ok(Projections { meso: meso_view.iter().map(|v| v.phi).collect(), micro, macro_field, local, meso_view })
}

/// Least-squares linear drift of `u = (phi_align, c)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JMix {
    pub matrix: [[f64; 2]; 2],
    pub stderr: [[f64; 2]; 2],
    /// 95% normal intervals per entry.
    pub ci95: [[(f64, f64); 2]; 2],
    /// Spectral norm of `matrix`.
    pub norm: f64,
    pub samples: usize,
}

/// Regresses `(u_{k+1} - u_k) / dt` on `[1, u_k - mean(u)]`.
pub fn estimate_j_mix(align: &[f64], c: &[f64], dt: f64) -> Result<JMix> {
    let n = align.len().min(c.len());
    if n < 5 || align.len() != c.len() {
        return Err(Error::Parameter("J_mix regression needs two equal series of at least 5 samples".into()));
    }
    let (ma, mc) = (align.iter().sum::<f64>() / n as f64, c.iter().sum::<f64>() / n as f64);
    let rows = n - 1;
    let x = DMatrix::from_fn(rows, 3, |k, j| match j {
        0 => 1.0,
        1 => align[k] - ma,
        _ => c[k] - mc,
    });
    let y = DMatrix::from_fn(rows, 2, |k, j| if j == 0 { (align[k + 1] - align[k]) / dt } else { (c[k + 1] - c[k]) / dt });
    let xtx = x.transpose() * &x;
    let inv = xtx.try_inverse().ok_or_else(|| Error::Parameter("degenerate regressors (constant series)".into()))?;
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let dof = (rows as f64 - 3.0).max(1.0);
    let mut matrix = [[0.0; 2]; 2];
    let mut stderr = [[0.0; 2]; 2];
    let mut ci95 = [[(0.0, 0.0); 2]; 2];
    for out in 0..2 {
        let s2 = resid.column(out).norm_squared() / dof;
        for inp in 0..2 {
            let b = beta[(inp + 1, out)];
            let se = (s2 * inv[(inp + 1, inp + 1)]).sqrt();
            matrix[out][inp] = b;
            stderr[out][inp] = se;
            ci95[out][inp] = (b - 1.96 * se, b + 1.96 * se);
        }
    }
    let m = Matrix2::new(matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]);
    let norm = m.singular_values().max();
    Ok(JMix { matrix, stderr, ci95, norm, samples: rows })
}
