use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agentstate::InitParams;
use crate::dynamics::DynParams;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::memory::KernelSpec;
use crate::params::ModelParams;

/// Axis names accepted as shorthands for dotted parameter paths.
const AXIS_ALIASES: [(&str, &str); 4] = [("T", "dynamics.t0"), ("N", "n_agents"), ("m", "opinion_dim"), ("p", "gan_dim")];

/// On-disk layout: run keys and scalar model keys at top level, one table
/// per module, optional `[sweep]` of dotted paths to value lists.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    seed: u64,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default = "default_stride")]
    stride: u64,
    #[serde(default = "default_burn")]
    burn_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run_id: Option<String>,
    #[serde(alias = "N", default, skip_serializing_if = "Option::is_none")]
    n_agents: Option<usize>,
    #[serde(alias = "m", default, skip_serializing_if = "Option::is_none")]
    opinion_dim: Option<usize>,
    #[serde(alias = "p", default, skip_serializing_if = "Option::is_none")]
    gan_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<InitParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy: Option<EnergyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dynamics: Option<DynParams>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    sweep: BTreeMap<String, Vec<toml::Value>>,
}

fn default_horizon() -> f64 {
    10.0
}
fn default_stride() -> u64 {
    10
}
fn default_burn() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub seed: u64,
    pub horizon: f64,
    /// Observer stride in steps.
    pub stride: u64,
    /// Leading share of observer samples dropped from summaries.
    pub burn_fraction: f64,
    pub out: Option<PathBuf>,
    pub run_id: String,
    /// Dotted parameter path to values, in file order of keys.
    pub sweep: Vec<(String, Vec<serde_json::Value>)>,
}

impl RunConfig {
    pub fn new(model: ModelParams, seed: u64) -> Self {
        RunConfig {
            model,
            seed,
            horizon: default_horizon(),
            stride: default_stride(),
            burn_fraction: default_burn(),
            out: None,
            run_id: "run".into(),
            sweep: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!("horizon = {} must be finite and nonnegative", self.horizon)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_fraction) {
            return Err(Error::Config(format!("burn_fraction = {} must lie in [0, 1)", self.burn_fraction)));
        }
        for (path, values) in &self.sweep {
            if values.is_empty() {
                return Err(Error::Config(format!("sweep axis '{path}' is empty")));
            }
            for v in values {
                apply_override(&self.model, path, v)?;
            }
        }
        Ok(())
    }

    /// TOML echo that reproduces the run (output directory omitted).
    pub fn to_toml(&self) -> Result<String> {
        let m = &self.model;
        let file = RunFile {
            seed: self.seed,
            horizon: self.horizon,
            stride: self.stride,
            burn_fraction: self.burn_fraction,
            out: None,
            run_id: Some(self.run_id.clone()),
            n_agents: Some(m.n_agents),
            opinion_dim: Some(m.opinion_dim),
            gan_dim: Some(m.gan_dim),
            grid_points: Some(m.grid_points),
            c_g: Some(m.c_g),
            c_d: Some(m.c_d),
            init: Some(m.init.clone()),
            kernel: Some(m.kernel.clone()),
            energy: Some(m.energy.clone()),
            dynamics: Some(m.dynamics.clone()),
            sweep: self
                .sweep
                .iter()
                .map(|(k, v)| Ok((k.clone(), v.iter().map(json_to_toml).collect::<Result<_>>()?)))
                .collect::<Result<_>>()?,
        };
        toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))
    }
}

fn json_to_toml(v: &serde_json::Value) -> Result<toml::Value> {
    toml::Value::try_from(v).map_err(|e| Error::Config(e.to_string()))
}

/// Parses, defaults and validates a config text. Errors carry line
/// information from the TOML parser.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: RunFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut model = ModelParams::default();
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = file.$f { model.$f = v; })* };
    }
    take!(n_agents, opinion_dim, gan_dim, grid_points, c_g, c_d, init, kernel, energy, dynamics);
    let sweep = file
        .sweep
        .into_iter()
        .map(|(k, vs)| {
            let path = AXIS_ALIASES.iter().find(|(a, _)| *a == k).map_or(k.clone(), |(_, p)| p.to_string());
            let vs = vs.into_iter().map(|v| serde_json::to_value(v).map_err(Error::from)).collect::<Result<_>>()?;
            Ok((path, vs))
        })
        .collect::<Result<_>>()?;
    let cfg = RunConfig {
        model,
        seed: file.seed,
        horizon: file.horizon,
        stride: file.stride,
        burn_fraction: file.burn_fraction,
        out: file.out,
        run_id: file.run_id.unwrap_or_else(|| "run".into()),
        sweep,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Copy of `model` with the dotted `path` set to `value`. The path must name
/// an existing parameter.
pub fn apply_override(model: &ModelParams, path: &str, value: &serde_json::Value) -> Result<ModelParams> {
    let mut tree = serde_json::to_value(model)?;
    let mut slot = &mut tree;
    for key in path.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(key))
            .ok_or_else(|| Error::Config(format!("unknown parameter '{path}'")))?;
    }
    *slot = value.clone();
    let out: ModelParams =
        serde_json::from_value(tree).map_err(|e| Error::Config(format!("bad value {value} for '{path}': {e}")))?;
    out.validate()?;
    Ok(out)
}
