//! Ensemble dynamics: two Langevin sub-ensembles with opposite friction signs,
//! Gaussian Brownian forces, binned field estimates and the velocity-ordered
//! trajectory exchange that couples the sub-ensembles.

mod bins;
mod brownian;
mod evolve;
mod exchange;
mod fields;
mod io;

pub use bins::{BinGrid, BinKey};
pub use brownian::BrownianSource;
pub use evolve::{evolve, step_langevin, ForceField, StepDiagnostics};
pub use exchange::{exchange_procedure, ExchangeOptions, ExchangeOutcome, SwapRecord};
pub use fields::{estimate_fields, FieldEstimate};
pub use io::{
    read_snapshot, write_diagnostics, write_snapshot, write_swap_log, DIAGNOSTICS_HEADER,
    SNAPSHOT_HEADER,
};

use std::collections::HashSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::Spin;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("time step {dt} must be positive and at most tau = {tau}")]
    InvalidTimeStep { dt: f64, tau: f64 },
    #[error("non-finite force on trajectory {id}")]
    NonFiniteForce { id: u64 },
    #[error("trajectory id {0} appears twice")]
    DuplicateId(u64),
    #[error("no trajectory falls in any bin")]
    EmptyGrid,
    #[error("evolve needs at least one step")]
    NoSteps,
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// Physical constants of the model. `nu = hbar / (2 m0) = kB T tau / m0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub m0: f64,
    pub hbar: f64,
    /// Coarse time scale; `f64::INFINITY` switches friction off.
    pub tau: f64,
    /// Momentum-transfer time of the Brownian force.
    pub tau_coll: f64,
    pub kb: f64,
    pub temperature: f64,
    /// Speed cap; trajectories faster than this are scaled back.
    pub c_max: f64,
}

impl PhysParams {
    /// Fixes the temperature from `kB T tau = hbar / 2` and sets `c_max` to
    /// 100 thermal speeds (unbounded when the temperature is zero).
    pub fn new(m0: f64, hbar: f64, tau: f64, tau_coll: f64, kb: f64) -> Result<Self, DynError> {
        let temperature = if tau.is_infinite() {
            0.0
        } else {
            hbar / (2.0 * kb * tau)
        };
        let mut p = Self {
            m0,
            hbar,
            tau,
            tau_coll,
            kb,
            temperature,
            c_max: f64::INFINITY,
        };
        let v = p.thermal_speed();
        if v > 0.0 {
            p.c_max = 100.0 * v;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn with_speed_cap(mut self, c_max: f64) -> Self {
        self.c_max = c_max;
        self
    }

    pub fn validate(&self) -> Result<(), DynError> {
        let bad = |what: &str| Err(DynError::InvalidParams(what.to_string()));
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return bad("m0 must be positive and finite");
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad("hbar must be positive and finite");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.tau_coll > 0.0 && self.tau_coll.is_finite()) {
            return bad("tau_coll must be positive and finite");
        }
        if !(self.kb > 0.0 && self.kb.is_finite()) {
            return bad("kb must be positive and finite");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be nonnegative and finite");
        }
        if !(self.c_max > 0.0) {
            return bad("c_max must be positive");
        }
        if self.tau.is_finite() {
            let lhs = self.kb * self.temperature * self.tau;
            let rhs = self.hbar / 2.0;
            if (lhs - rhs).abs() > 1e-9 * rhs {
                return Err(DynError::InvalidParams(format!(
                    "kB·T·tau = {lhs} disagrees with hbar/2 = {rhs}"
                )));
            }
        }
        Ok(())
    }

    /// Diffusion coefficient `hbar / (2 m0)`.
    pub fn nu(&self) -> f64 {
        self.hbar / (2.0 * self.m0)
    }

    /// `sqrt(kB T / m0)`.
    pub fn thermal_speed(&self) -> f64 {
        (self.kb * self.temperature / self.m0).sqrt()
    }

    /// Standard deviation of each Brownian force component,
    /// `sqrt(m0 kB T / 2) / tau_coll`.
    pub fn brownian_sigma(&self) -> f64 {
        (self.m0 * self.kb * self.temperature / 2.0).sqrt() / self.tau_coll
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    /// Friction term enters with a plus sign; these trajectories speed up.
    A,
    /// Ordinary damped Brownian motion.
    B,
}

impl Ensemble {
    pub fn other(self) -> Ensemble {
        match self {
            Ensemble::A => Ensemble::B,
            Ensemble::B => Ensemble::A,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Ensemble::A => "A",
            Ensemble::B => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub ensemble: Ensemble,
    pub spin: Spin,
}

impl Trajectory {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// All trajectories of a run together with the clock and the bin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    trajectories: Vec<Trajectory>,
    pub time: f64,
    /// Number of completed steps; indexes the Brownian force streams.
    pub step: u64,
    pub bins: BinGrid,
}

impl EnsembleState {
    pub fn new(trajectories: Vec<Trajectory>, bins: BinGrid) -> Result<Self, DynError> {
        let mut seen = HashSet::with_capacity(trajectories.len());
        for t in &trajectories {
            if !seen.insert(t.id) {
                return Err(DynError::DuplicateId(t.id));
            }
        }
        Ok(Self {
            trajectories,
            time: 0.0,
            step: 0,
            bins,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    /// Mutable access for callers that only change positions, velocities or
    /// labels; ids must stay as they are.
    pub fn trajectories_mut(&mut self) -> &mut [Trajectory] {
        &mut self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn count(&self, ensemble: Ensemble) -> usize {
        self.trajectories
            .iter()
            .filter(|t| t.ensemble == ensemble)
            .count()
    }

    /// Mean speed of one sub-ensemble, `None` when it is empty.
    pub fn mean_speed(&self, ensemble: Ensemble) -> Option<f64> {
        let (sum, n) = self
            .trajectories
            .iter()
            .filter(|t| t.ensemble == ensemble)
            .fold((0.0, 0usize), |(s, n), t| (s + t.speed(), n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Sub-ensemble sizes for a weighted superposition `Σ aᵢ |i⟩`: `total·aᵢ²`
/// after normalising the amplitudes, rounded by largest remainder so the
/// sizes add up to `total`.
pub fn superposition_sizes(total: usize, amplitudes: &[f64]) -> Result<Vec<usize>, DynError> {
    let norm: f64 = amplitudes.iter().map(|a| a * a).sum();
    if amplitudes.is_empty() || !(norm > 0.0 && norm.is_finite()) {
        return Err(DynError::InvalidParams(
            "amplitudes must be finite and not all zero".into(),
        ));
    }
    let exact: Vec<f64> = amplitudes
        .iter()
        .map(|a| total as f64 * a * a / norm)
        .collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = exact[i] - exact[i].floor();
        let rj = exact[j] - exact[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let missing = total - sizes.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        sizes[i] += 1;
    }
    Ok(sizes)
}
