//! Run configuration: one TOML document per run.

use serde::{Deserialize, Serialize};

use irlv::channel::ChannelParams;
use irlv::eval::{Experiment, ModelSpec};
use irlv::geometry::{RingScenario, Scenario, UrbanLayout, UrbanScenario};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub channel: ChannelParams,
    pub model: ModelSpec,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioConfig {
    Ring {
        #[serde(default = "r_min")]
        r_min: f64,
        #[serde(default = "r_in")]
        r_in: f64,
        #[serde(default = "r_out")]
        r_out: f64,
    },
    Urban(UrbanLayout),
}

fn r_min() -> f64 {
    0.1
}
fn r_in() -> f64 {
    2.0
}
fn r_out() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Training points per map, validation split included.
    pub n_points: usize,
    pub k_f: usize,
    pub fading: bool,
    pub validation_fraction: f64,
    /// Let one-class trainers discard H1 rows instead of failing.
    pub drop_h1_rows: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { n_points: 1000, k_f: 1, fading: true, validation_fraction: 0.2, drop_h1_rows: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Test points per class per map.
    pub n_test: usize,
    pub n_maps: usize,
    pub target_fa: Vec<f64>,
    /// ROC threshold cap; 0 keeps every distinct score.
    pub n_thresholds: usize,
    pub map_spacing: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_test: 10_000, n_maps: 1, target_fa: vec![0.05, 0.1, 0.2], n_thresholds: 2001, map_spacing: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<std::path::PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.experiment()?;
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        Ok(match &self.scenario {
            ScenarioConfig::Ring { r_min, r_in, r_out } => Scenario::Ring(RingScenario::new(*r_min, *r_in, *r_out)?),
            ScenarioConfig::Urban(layout) => Scenario::Urban(UrbanScenario::crossroads(layout)?),
        })
    }

    /// The equivalent experiment, fully validated.
    pub fn experiment(&self) -> Result<Experiment, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        let t = &self.training;
        let e = &self.eval;
        if t.n_points < 2 {
            return Err(CliError::Config(format!("training.n_points must be at least 2, got {}", t.n_points)));
        }
        let exp = Experiment {
            n_train: t.n_points,
            k_f: t.k_f,
            fading: t.fading,
            validation_fraction: t.validation_fraction,
            n_maps: e.n_maps,
            n_test: e.n_test,
            target_fa: e.target_fa.clone(),
            n_thresholds: (e.n_thresholds > 0).then_some(e.n_thresholds),
            map_spacing: e.map_spacing,
            seed: self.seed,
            ..Experiment::new(self.scenario()?, self.channel.clone(), self.model.clone())
        };
        exp.validate()?;
        Ok(exp)
    }
}
