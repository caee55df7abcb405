//! Standalone noise generators for the temperature-dependent cross-correlated
//! and temporally coloured noise model. Not used by `simulate`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::memory::{Embedding, KernelSpec};

/// Cross-component correlation `sigma_0 tanh(T_c / T)`.
pub fn sigma_gd(t: f64, sigma_0: f64, t_c: f64) -> f64 {
    sigma_0 * (t_c / t).tanh()
}

/// Pair of unit-variance normals with correlation `rho`, clamped to `[-1, 1]`.
pub fn correlated_pair<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> (f64, f64) {
    let rho = rho.clamp(-1.0, 1.0);
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (a, rho * a + (1.0 - rho * rho).sqrt() * b)
}

/// Noise with temporal correlations shaped by an exponential-mixture
/// kernel: each component is an Ornstein-Uhlenbeck process with unit
/// stationary variance, weighted by `sqrt(a_n)`.
#[derive(Clone, Debug)]
pub struct ColoredNoise {
    kernel: KernelSpec,
    state: Embedding,
}

impl ColoredNoise {
    pub fn new<R: Rng + ?Sized>(kernel: KernelSpec, rng: &mut R) -> Self {
        let state = Embedding { m: (0..kernel.len()).map(|_| rng.sample(StandardNormal)).collect() };
        ColoredNoise { kernel, state }
    }

    /// Advances by `dt` with the exact OU transition and returns the sample.
    /// The stationary autocovariance is `sum_n a_n exp(-|s| / tau_n)`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R, dt: f64) -> f64 {
        for (m, tau) in self.state.m.iter_mut().zip(&self.kernel.tau) {
            let r = (-dt / tau).exp();
            *m = *m * r + (1.0 - r * r).sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
        self.value()
    }

    pub fn value(&self) -> f64 {
        self.state.m.iter().zip(&self.kernel.a).map(|(m, a)| a.sqrt() * m).sum()
    }
}
