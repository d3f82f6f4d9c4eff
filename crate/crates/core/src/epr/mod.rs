//! Paired-source EPR experiments on top of the ensemble engine.
//!
//! Every pair `j` gets a seed `λ_j`. Each wing rebuilds its trajectory and its
//! Brownian force stream from `λ_j` alone, so the two wings evolve in lockstep
//! without exchanging any information after emission. Detection at the end of
//! the flight is delegated to a [`MeasurementModel`].

mod disturbance;
mod simulate;
mod stats;

pub use disturbance::{
    disturbance_sweep, velocity_half_width, DisturbanceLaw, DisturbanceRow, DisturbanceSpec,
};
pub use simulate::{entanglement_swap_scenario, run_epr, run_epr_settings, EprRun};
pub use stats::{
    chsh_estimate, estimate_correlation, no_signaling_test, passive_factorization_test,
    Estimate, FactorizationReport, NoSignalingReport, RunStats, SettingCounts, MIN_COUNTS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynError, ForceField, PhysParams};
use crate::probspace::SettingPair;
use crate::rng::{derive_seed, domain};
use crate::spin::Spin;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EprError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{expected} pairs need {expected} setting assignments, got {got}")]
    AssignmentCount { expected: usize, got: usize },
    #[error("setting {0} has {1} samples, at least {MIN_COUNTS} are needed")]
    InsufficientCounts(SettingPair, u64),
    #[error("setting {0} was not sampled")]
    SettingMissing(SettingPair),
    #[error("no two settings share a local axis, so no marginal can be compared")]
    NoComparableSettings,
    #[error(transparent)]
    Dynamics(#[from] DynError),
}

/// How a detector turns the final spin label into an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementModel {
    /// Born probabilities for the final spin label, sampled with randomness
    /// private to the station.
    IndependentBorn,
    /// The spin label is kept when `Φ(g) < cos²(θ/2)` and flipped otherwise,
    /// where `g` is the shared Brownian draw at detection time and `θ` the
    /// local axis angle from z. Equal axes therefore make equal decisions.
    SharedStreamThreshold,
    /// Joint sampling from the singlet table. Not a wing-local procedure; a
    /// reference for the estimators.
    AnalyticQuantumOracle,
}

/// The source event of a pair: wing 1's initial spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceEvent {
    /// Wing 1 starts ↑, wing 2 ↓.
    S1,
    /// Wing 1 starts ↓, wing 2 ↑.
    S2,
}

impl SourceEvent {
    pub fn index(self) -> usize {
        match self {
            SourceEvent::S1 => 0,
            SourceEvent::S2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            SourceEvent::S1
        } else {
            SourceEvent::S2
        }
    }

    pub fn wing1_spin(self) -> Spin {
        match self {
            SourceEvent::S1 => Spin::Up,
            SourceEvent::S2 => Spin::Down,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SourceEvent::S1 => "S1",
            SourceEvent::S2 => "S2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub pairs: usize,
    pub master_seed: u64,
    pub flight_time: f64,
    pub dt: f64,
    pub measurement_model: MeasurementModel,
    pub physics: PhysParams,
    /// Pairs simulated together; each wing of a batch is one ensemble.
    pub ensemble_size: usize,
    /// Side of the cubic exchange bins.
    pub bin_width: f64,
    /// External force, identical in both wings.
    pub force: ForceField,
    /// Keep per-pair spin trajectories and swap logs in the result.
    pub record_trajectories: bool,
}

impl PairConfig {
    /// Natural units `ħ = m₀ = k_B = 1`, `τ = 1`, `τ_coll = ½`.
    pub fn new(pairs: usize, master_seed: u64, measurement_model: MeasurementModel) -> Self {
        Self {
            pairs,
            master_seed,
            flight_time: 1.0,
            dt: 0.05,
            measurement_model,
            physics: PhysParams::new(1.0, 1.0, 1.0, 0.5, 1.0).expect("default parameters are valid"),
            ensemble_size: 1000,
            bin_width: 0.25,
            force: ForceField::Zero,
            record_trajectories: false,
        }
    }

    pub fn validate(&self) -> Result<(), EprError> {
        let bad = |m: &str| Err(EprError::Config(m.to_string()));
        if self.pairs == 0 {
            return bad("pairs must be at least 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive and finite");
        }
        if !(self.flight_time >= self.dt && self.flight_time.is_finite()) {
            return bad("flight_time must be finite and at least dt");
        }
        if self.dt > self.physics.tau {
            return bad("dt must not exceed tau");
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be at least 1");
        }
        if !(self.bin_width > 0.0) {
            return bad("bin_width must be positive");
        }
        self.physics.validate()?;
        Ok(())
    }

    /// Number of flight steps, `round(flight_time / dt)`.
    pub fn steps(&self) -> u64 {
        ((self.flight_time / self.dt).round() as u64).max(1)
    }
}

/// `λ_j` for `j = 0..pairs`: independent children of the master seed.
pub fn generate_pair_seeds(master_seed: u64, pairs: usize) -> Vec<u64> {
    (0..pairs as u64)
        .map(|j| derive_seed(master_seed, domain::PAIR_SEEDS, j))
        .collect()
}

/// Outcomes of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRecord {
    pub pair: u64,
    pub setting: SettingPair,
    pub out1: Spin,
    pub out2: Spin,
    pub source: SourceEvent,
}

/// The spin label of one wing of one pair over the flight, stored as the
/// initial label and the steps after which it flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTrajectoryRecord {
    pub pair: u64,
    pub wing: u8,
    pub initial: Spin,
    pub flip_steps: Vec<u64>,
}

impl SpinTrajectoryRecord {
    /// Label after `step` completed steps.
    pub fn label_at(&self, step: u64) -> Spin {
        let flips = self.flip_steps.iter().filter(|&&s| s <= step).count();
        if flips % 2 == 0 {
            self.initial
        } else {
            self.initial.flipped()
        }
    }

    /// Every label from step 0 to `steps`.
    pub fn labels(&self, steps: u64) -> Vec<Spin> {
        (0..=steps).map(|s| self.label_at(s)).collect()
    }
}
