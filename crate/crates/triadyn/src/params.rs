use serde::{Deserialize, Serialize};

use crate::agentstate::InitParams;
use crate::dynamics::DynParams;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::memory::KernelSpec;

/// Every model coefficient, grouped per module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    #[serde(alias = "N")]
    pub n_agents: usize,
    /// Opinion vector length `m`.
    #[serde(alias = "m")]
    pub opinion_dim: usize,
    /// Length `p` of the generator and discriminator vectors.
    #[serde(alias = "p")]
    pub gan_dim: usize,
    /// Knowledge grid size.
    pub grid_points: usize,
    pub c_g: f64,
    pub c_d: f64,
    pub init: InitParams,
    pub kernel: KernelSpec,
    pub energy: EnergyParams,
    pub dynamics: DynParams,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_agents: 12,
            opinion_dim: 3,
            gan_dim: 4,
            grid_points: 16,
            c_g: 1.0,
            c_d: 1.0,
            init: InitParams::default(),
            kernel: KernelSpec::default(),
            energy: EnergyParams::default(),
            dynamics: DynParams::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.n_agents < 3 {
            return bad(format!("n_agents = {} (need at least 3)", self.n_agents));
        }
        if self.opinion_dim == 0 || self.gan_dim == 0 {
            return bad("opinion_dim and gan_dim must be positive".into());
        }
        if self.grid_points < 2 {
            return bad(format!("grid_points = {}", self.grid_points));
        }
        if !(self.c_g > 0.0) || !(self.c_d > 0.0) || !self.c_g.is_finite() || !self.c_d.is_finite() {
            return bad(format!("norm budgets c_g = {}, c_d = {} must be positive", self.c_g, self.c_d));
        }
        self.kernel.validate()?;
        self.energy.validate()?;
        self.dynamics.validate()?;
        self.init.validate(self.n_agents)?;
        Ok(())
    }

    /// Reservoir debit of one triad birth.
    pub fn birth_cost(&self) -> f64 {
        2.0 * self.c_g + self.c_d
    }
}
