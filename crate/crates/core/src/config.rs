//! File-backed run configuration (TOML). Every section is optional and
//! defaults to the worked example.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{EpgState, IntegratorOptions};
use crate::edm::{PopulationState, Protocol};
use crate::equilibrium::{optimal_allocation, OptimalAllocation};
use crate::error::Error;
use crate::params::{validate, Model, ModelParams, PolicyConfig, StrategySpec};
use crate::payoff::{build_mechanism, PayoffMechanism};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolConfig {
    Smith { lambda: f64, cap: f64 },
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig::Smith { lambda: 0.1, cap: 0.1 }
    }
}

impl ProtocolConfig {
    pub fn build(&self) -> Result<Protocol, Error> {
        match *self {
            ProtocolConfig::Smith { lambda, cap } => {
                if !(lambda > 0.0 && cap > 0.0 && lambda.is_finite() && cap.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "smith protocol needs lambda > 0 and cap > 0, got {lambda}, {cap}"
                    )));
                }
                Ok(Protocol::smith(lambda, cap))
            }
        }
    }
}

/// How the initial closed-loop state is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// `(I, R)` at the endemic equilibrium of `betas' x`.
    Endemic {
        x: Vec<f64>,
        #[serde(default)]
        q: f64,
        #[serde(default)]
        population: Option<f64>,
    },
    Explicit {
        i: f64,
        r: f64,
        x: Vec<f64>,
        #[serde(default)]
        q: f64,
        #[serde(default)]
        population: Option<f64>,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Endemic { x: vec![1.0, 0.0], q: 0.0, population: None }
    }
}

/// One curve of a bound-versus-gain sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepVariant {
    pub beta_star: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsConfig {
    pub grid_points: usize,
    pub upsilons: Vec<f64>,
    pub variants: Vec<SweepVariant>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            grid_points: crate::bounds::DEFAULT_GRID,
            upsilons: (1..=24).map(|k| 0.25 * k as f64).collect(),
            variants: vec![
                SweepVariant { beta_star: 0.16, delta: 0.005 },
                SweepVariant { beta_star: 0.17, delta: 0.005 },
                SweepVariant { beta_star: 0.18, delta: 0.005 },
                SweepVariant { beta_star: 0.17, delta: 0.001 },
                SweepVariant { beta_star: 0.17, delta: 0.01 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub strategies: StrategySpec,
    pub policy: PolicyConfig,
    pub protocol: ProtocolConfig,
    pub integrator: IntegratorOptions,
    pub initial: InitialSpec,
    pub bounds: BoundsConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::example(),
            strategies: StrategySpec::example(),
            policy: PolicyConfig::example(),
            protocol: ProtocolConfig::default(),
            integrator: IntegratorOptions::default(),
            initial: InitialSpec::default(),
            bounds: BoundsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<Model, Error> {
        Ok(validate(self.model, self.strategies.clone(), self.policy)?)
    }

    /// Validates everything and builds the objects a run needs.
    pub fn resolve(&self) -> Result<Resolved, Error> {
        let model = self.model()?;
        let protocol = self.protocol.build()?;
        let alloc = optimal_allocation(&model)?;
        let mechanism = build_mechanism(&alloc, &model);
        let initial = self.initial_state(&model)?;
        Ok(Resolved { model, protocol, alloc, mechanism, initial })
    }

    pub fn initial_state(&self, model: &Model) -> Result<EpgState, Error> {
        let n = model.n();
        let (state, population) = match &self.initial {
            InitialSpec::Endemic { x, q, population } => {
                check_len(x, n)?;
                (EpgState::endemic(model, PopulationState::new(x.clone())?, *q)?, *population)
            }
            InitialSpec::Explicit { i, r, x, q, population } => {
                check_len(x, n)?;
                (EpgState::new(*i, *r, PopulationState::new(x.clone())?, *q)?, *population)
            }
        };
        Ok(match population {
            Some(size) if !(size > 0.0 && size.is_finite()) => {
                return Err(Error::InvalidArgument(format!("population size {size} must be positive")))
            }
            Some(size) => state.with_population(size),
            None => state,
        })
    }
}

fn check_len(x: &[f64], n: usize) -> Result<(), Error> {
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("initial population state has {} entries, expected {n}", x.len())));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: Model,
    pub protocol: Protocol,
    pub alloc: OptimalAllocation,
    pub mechanism: PayoffMechanism,
    pub initial: EpgState,
}
