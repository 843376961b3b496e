//! Versioned JSON experiment configuration.
//!
//! Every section is optional and falls back to the reference parameters;
//! unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{Experiment, Planner, SuperchargeStage, TargetPattern, TimingParams};
use crate::error::{Error, Result};
use crate::geometry::{InterleavedLayout, MaskSpec, TrapArrayParams};
use crate::stochastic::{LoadingModel, NoiseParams};
use crate::supercharge::ReservoirPolicy;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub layout: LayoutConfig,
    pub loading: LoadingConfig,
    pub noise: NoiseParams,
    pub timing: TimingParams,
    pub target: TargetConfig,
    pub supercharge: SuperchargeConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub main: TrapArrayParams,
    pub secondary: TrapArrayParams,
    /// Secondary-array displacement in µm; half the main pitch on both axes if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_um: Option<[f64; 2]>,
    /// Relative depth below which a trap is not counted as usable.
    pub min_depth_ratio: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            main: TrapArrayParams::default(),
            secondary: TrapArrayParams::default(),
            offset_um: None,
            min_depth_ratio: (-1f64).exp(),
        }
    }
}

impl LayoutConfig {
    pub fn build(&self) -> Result<InterleavedLayout> {
        let half = self.main.pitch_um / 2.0;
        InterleavedLayout::new(
            self.main.clone(),
            self.secondary.clone(),
            self.offset_um.unwrap_or([half, half]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingConfig {
    pub main: LoadingModel,
    pub secondary: LoadingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub name: String,
    pub mask: MaskSpec,
    pub op_range: MaskSpec,
    pub planner: Planner,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            name: "compact-15x15".into(),
            mask: MaskSpec::Square { k: 15 },
            op_range: MaskSpec::Square { k: 32 },
            planner: Planner::Assignment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperchargeConfig {
    pub enabled: bool,
    pub region: MaskSpec,
    pub reservoir: ReservoirPolicy,
}

impl Default for SuperchargeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            region: MaskSpec::Square { k: 26 },
            reservoir: ReservoirPolicy::Interior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub max_cycles: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores. Results do not depend on it.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_cycles: 50,
            trials: 2000,
            master_seed: 1,
            workers: 0,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            layout: LayoutConfig::default(),
            loading: LoadingConfig::default(),
            noise: NoiseParams::default(),
            timing: TimingParams::default(),
            target: TargetConfig::default(),
            supercharge: SuperchargeConfig::default(),
            run: RunConfig::default(),
        }
    }
}

fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{section}.{field}"),
            reason,
        },
        Error::MaskOutOfBounds(msg) => Error::InvalidParameter {
            field: section.to_string(),
            reason: msg,
        },
        other => other,
    })
}

impl ExperimentConfig {
    /// Parses and validates. Syntax and schema errors carry line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    /// Validates every section and builds the runtime experiment.
    pub fn resolve(&self) -> Result<Experiment> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        in_section("layout.main", self.layout.main.validate())?;
        in_section("layout.secondary", self.layout.secondary.validate())?;
        if !(self.layout.min_depth_ratio > 0.0 && self.layout.min_depth_ratio <= 1.0) {
            return Err(Error::invalid("layout.min_depth_ratio", "must lie in (0, 1]"));
        }
        let layout = in_section("layout", self.layout.build())?;
        in_section("loading.main", self.loading.main.validate())?;
        in_section("loading.secondary", self.loading.secondary.validate())?;
        in_section("noise", self.noise.validate())?;
        in_section("timing", self.timing.validate())?;

        let grid = layout.main();
        let op_range = in_section("target.op_range", self.target.op_range.build(grid))?;
        let mask = in_section("target.mask", self.target.mask.build(grid))?;
        let target = in_section(
            "target.mask",
            TargetPattern::new(self.target.name.clone(), mask, &op_range),
        )?;
        let supercharge = if self.supercharge.enabled {
            let region = in_section("supercharge.region", self.supercharge.region.build(grid))?;
            Some(SuperchargeStage {
                region,
                reservoir: self.supercharge.reservoir,
            })
        } else {
            None
        };
        if self.run.trials == 0 {
            return Err(Error::invalid("run.trials", "must be at least 1"));
        }

        Ok(Experiment {
            layout,
            main_loading: self.loading.main.clone(),
            secondary_loading: self.loading.secondary.clone(),
            noise: self.noise.clone(),
            timing: self.timing.clone(),
            target,
            op_range,
            planner: self.target.planner,
            supercharge,
            max_cycles: self.run.max_cycles,
        })
    }

    /// The config as recorded in outputs. `run.workers` is reset to 0 since
    /// it only affects scheduling, never results.
    pub fn provenance(&self) -> Self {
        let mut c = self.clone();
        c.run.workers = 0;
        c
    }

    /// SHA-256 of the compact JSON serialization of [`Self::provenance`], hex encoded.
    pub fn digest(&self) -> Result<String> {
        let bytes = serde_json::to_vec(&self.provenance())?;
        let hash = Sha256::digest(&bytes);
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }
}
