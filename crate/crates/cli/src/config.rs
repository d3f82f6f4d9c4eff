//! Run configuration. Every field has a default except `master_seed`; the
//! resolved configuration is echoed into each output bundle so that feeding
//! the echo back reproduces the bundle.

use ensemble_lab::dynamics::{ForceField, PhysParams};
use ensemble_lab::epr::{DisturbanceLaw, MeasurementModel, PairConfig};
use ensemble_lab::packet::PacketConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub verify_theorem: VerifySection,
    #[serde(default)]
    pub chsh_scan: ScanSection,
    #[serde(default)]
    pub epr: EprSection,
    #[serde(default)]
    pub swap: SwapSection,
    #[serde(default)]
    pub density: PacketConfig,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: None,
            verify_theorem: VerifySection::default(),
            chsh_scan: ScanSection::default(),
            epr: EprSection::default(),
            swap: SwapSection::default(),
            density: PacketConfig::default(),
            disturbance: DisturbanceSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.master_seed
            .ok_or_else(|| CliError::Config("master_seed is required (config file or --seed)".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub grid_step: f64,
    pub battery_models: usize,
    /// `[μ, μ′, ν, ν′]` in degrees for the quantum-model audit.
    pub chsh_angles: [f64; 4],
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            battery_models: 1000,
            chsh_angles: [0.0, 90.0, 45.0, 315.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub grid_step: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { grid_step: 0.05 }
    }
}

/// Flight parameters shared by the pair experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightSection {
    pub flight_time: f64,
    pub dt: f64,
    pub ensemble_size: usize,
    pub bin_width: f64,
    pub physics: PhysParams,
    pub force: ForceField,
}

impl Default for FlightSection {
    fn default() -> Self {
        let c = PairConfig::new(1, 0, MeasurementModel::SharedStreamThreshold);
        Self {
            flight_time: c.flight_time,
            dt: c.dt,
            ensemble_size: c.ensemble_size,
            bin_width: c.bin_width,
            physics: c.physics,
            force: c.force,
        }
    }
}

impl FlightSection {
    pub fn pair_config(
        &self,
        pairs: usize,
        master_seed: u64,
        model: MeasurementModel,
        record_trajectories: bool,
    ) -> PairConfig {
        PairConfig {
            pairs,
            master_seed,
            flight_time: self.flight_time,
            dt: self.dt,
            measurement_model: model,
            physics: self.physics,
            ensemble_size: self.ensemble_size,
            bin_width: self.bin_width,
            force: self.force,
            record_trajectories,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EprSection {
    /// Pairs measured under each setting.
    pub pairs: usize,
    pub measurement_model: MeasurementModel,
    /// `[μ, ν]` pairs in degrees.
    pub settings: Vec<[f64; 2]>,
    /// `[μ, μ′, ν, ν′]` in degrees; the four combinations are added to
    /// `settings`. Empty for none.
    pub chsh_angles: Vec<f64>,
    /// Also run the pairs once with settings assigned cyclically and write
    /// per-pair records, spin trajectories and swap logs.
    pub record_trajectories: bool,
    pub flight: FlightSection,
}

impl Default for EprSection {
    fn default() -> Self {
        Self {
            pairs: 10_000,
            measurement_model: MeasurementModel::SharedStreamThreshold,
            settings: vec![[0.0, 0.0], [0.0, 90.0], [90.0, 0.0], [90.0, 90.0]],
            chsh_angles: vec![0.0, 90.0, 45.0, 315.0],
            record_trajectories: false,
            flight: FlightSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwapSection {
    pub pairs: usize,
    pub measurement_model: MeasurementModel,
    /// Seed of the source producing wing 1; absent means `master_seed`.
    pub seed_alpha: Option<u64>,
    /// Seed of the source producing wing 2; absent means `master_seed`.
    pub seed_beta: Option<u64>,
    pub settings: Vec<[f64; 2]>,
    pub flight: FlightSection,
}

impl Default for SwapSection {
    fn default() -> Self {
        Self {
            pairs: 10_000,
            measurement_model: MeasurementModel::SharedStreamThreshold,
            seed_alpha: None,
            seed_beta: None,
            settings: vec![[0.0, 0.0], [0.0, 90.0]],
            flight: FlightSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSection {
    pub pairs: usize,
    pub measurement_model: MeasurementModel,
    pub target_wing: u8,
    pub law: DisturbanceLaw,
    /// Disturbance magnitudes as fractions of the velocity half-width.
    pub relative_magnitudes: Vec<f64>,
    pub flight: FlightSection,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        Self {
            pairs: 10_000,
            measurement_model: MeasurementModel::SharedStreamThreshold,
            target_wing: 2,
            law: DisturbanceLaw::Gaussian,
            relative_magnitudes: vec![0.001, 0.01, 0.1, 1.0],
            flight: FlightSection::default(),
        }
    }
}
