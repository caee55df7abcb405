use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Plug-in (population) variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// `Var(Psi) / (N T)` over the window.
pub fn susceptibility(v: &[f64], n_agents: usize, temperature: f64) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::Parameter("susceptibility needs at least 2 samples".into()));
    }
    if !(temperature > 0.0) || n_agents == 0 {
        return Err(Error::Parameter(format!("susceptibility with N = {n_agents}, T = {temperature}")));
    }
    Ok(variance(v) / (n_agents as f64 * temperature))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Student-t interval for the mean of independent samples.
pub fn mean_ci(v: &[f64], level: f64) -> MeanCi {
    let n = v.len();
    let m = mean(v);
    if n < 2 {
        return MeanCi { mean: m, se: f64::NAN, lo: f64::NAN, hi: f64::NAN };
    }
    let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (s2 / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap().inverse_cdf(0.5 + level / 2.0);
    MeanCi { mean: m, se, lo: m - t * se, hi: m + t * se }
}

/// Interval from means of `batches` contiguous blocks, for correlated series.
pub fn batch_mean_ci(v: &[f64], batches: usize, level: f64) -> MeanCi {
    let b = batches.min(v.len()).max(1);
    let size = v.len() / b;
    if size == 0 || b < 2 {
        return mean_ci(v, level);
    }
    let means: Vec<f64> = (0..b).map(|k| mean(&v[k * size..(k + 1) * size])).collect();
    let mut ci = mean_ci(&means, level);
    let shift = mean(v) - ci.mean;
    ci.mean += shift;
    ci.lo += shift;
    ci.hi += shift;
    ci
}

/// Normalised autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(v: &[f64], max_lag: usize) -> Vec<f64> {
    let n = v.len();
    let m = mean(v);
    let c0 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            let ck = (0..n - k).map(|i| (v[i] - m) * (v[i + k] - m)).sum::<f64>() / (n - k) as f64;
            ck / c0
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelaxationFit {
    pub tau: f64,
    pub lags_used: usize,
}

/// Fits `acf(k) = exp(-k dt / tau)` through the origin in log space over the
/// leading lags with `acf >= floor`.
pub fn fit_relaxation_time(acf: &[f64], dt: f64, floor: f64) -> Result<RelaxationFit> {
    let (mut sxy, mut sxx, mut used) = (0.0, 0.0, 0);
    for (k, &a) in acf.iter().enumerate().skip(1) {
        if !(a >= floor) {
            break;
        }
        let x = k as f64 * dt;
        sxy += x * a.ln();
        sxx += x * x;
        used += 1;
    }
    if used == 0 || !(sxy < 0.0) {
        return Err(Error::Parameter("autocorrelation has no decaying leading lags".into()));
    }
    Ok(RelaxationFit { tau: -sxx / sxy, lags_used: used })
}
