//! Gaussian packet released into a one-dimensional potential, simulated with
//! the trajectory ensemble and compared against the Schrödinger oracle.
//!
//! Positions start as `N(x₀, σ₀²)` and velocities as `ħk₀/m₀ + N(0, (ħ/(2m₀σ₀))²)`
//! along x, uncorrelated. For force fields at most linear in x this phase
//! space cloud evolves into exactly `|ψ(x,t)|²`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    evolve, BinGrid, BrownianSource, DynError, Ensemble, EnsembleState, ExchangeOptions,
    ForceField, PhysParams, StepDiagnostics, Trajectory,
};
use crate::oracle::{
    compare_density, evolve_schrodinger, free_gaussian_variance, Grid1D, Histogram1D, OracleError,
    WaveFunction,
};
use crate::par::Execution;
use crate::rng::{derive_seed, domain, CounterStream};

#[derive(Debug, Error)]
pub enum PacketError {
    #[error("invalid packet configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub trajectories: usize,
    pub seed: u64,
    pub sigma0: f64,
    pub x0: f64,
    pub k0: f64,
    /// Final time; `None` runs until the free variance has doubled,
    /// `t = 2m₀σ₀²/ħ`.
    pub t_final: Option<f64>,
    pub dt: f64,
    pub physics: PhysParams,
    /// Width of the exchange bins along x.
    pub bin_width: f64,
    /// External force; only its x component enters the oracle potential.
    pub force: ForceField,
    pub grid_points: usize,
    /// The oracle grid spans this many final widths either side of the
    /// classical centre.
    pub grid_half_width_sigmas: f64,
    pub histogram_bins: usize,
}

impl Default for PacketConfig {
    /// Weak friction (`τ = 1000`) so the bath barely heats the packet.
    fn default() -> Self {
        Self {
            trajectories: 100_000,
            seed: 0,
            sigma0: 1.0,
            x0: 0.0,
            k0: 0.0,
            t_final: None,
            dt: 0.01,
            physics: PhysParams::new(1.0, 1.0, 1000.0, 1.0, 1.0)
                .expect("default parameters are valid")
                .with_speed_cap(f64::INFINITY),
            bin_width: 0.2,
            force: ForceField::Zero,
            grid_points: 2048,
            grid_half_width_sigmas: 10.0,
            histogram_bins: 200,
        }
    }
}

impl PacketConfig {
    pub fn validate(&self) -> Result<(), PacketError> {
        let bad = |m: &str| Err(PacketError::Config(m.to_string()));
        if self.trajectories < 2 {
            return bad("trajectories must be at least 2");
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be positive and finite");
        }
        if !(self.x0.is_finite() && self.k0.is_finite()) {
            return bad("x0 and k0 must be finite");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive and finite");
        }
        if self.t_final.is_some_and(|t| !(t >= self.dt && t.is_finite())) {
            return bad("t_final must be finite and at least dt");
        }
        if !(self.bin_width > 0.0) {
            return bad("bin_width must be positive");
        }
        if self.grid_points < 16 || self.histogram_bins == 0 {
            return bad("grid_points must be at least 16 and histogram_bins at least 1");
        }
        if !(self.grid_half_width_sigmas >= 4.0 && self.grid_half_width_sigmas.is_finite()) {
            return bad("grid_half_width_sigmas must be at least 4");
        }
        self.physics.validate()?;
        Ok(())
    }

    pub fn final_time(&self) -> f64 {
        self.t_final
            .unwrap_or(2.0 * self.physics.m0 * self.sigma0 * self.sigma0 / self.physics.hbar)
    }

    pub fn steps(&self) -> u64 {
        ((self.final_time() / self.dt).round() as u64).max(1)
    }

    /// Initial spread of the velocity, `ħ/(2m₀σ₀)`.
    pub fn velocity_spread(&self) -> f64 {
        self.physics.hbar / (2.0 * self.physics.m0 * self.sigma0)
    }

    /// Oracle potential along x: `V(x) = −F_x·x` for a constant force,
    /// `½k(x − c)²` for a harmonic one.
    pub fn potential(&self, x: f64) -> f64 {
        match self.force {
            ForceField::Zero => 0.0,
            ForceField::Constant { force } => -force[0] * x,
            ForceField::Harmonic { k, center } => 0.5 * k * (x - center[0]).powi(2),
        }
    }

    /// The oracle grid: centred on the classical position at the final time
    /// and wide enough for both the initial and the final packet.
    pub fn grid(&self, points: usize) -> Result<Grid1D, PacketError> {
        let t = self.final_time();
        let v0 = self.physics.hbar * self.k0 / self.physics.m0;
        let a = self.force.force(&Vector3::new(self.x0, 0.0, 0.0))[0] / self.physics.m0;
        let centre_end = self.x0 + v0 * t + 0.5 * a * t * t;
        let width = free_gaussian_variance(self.sigma0, t, self.physics.hbar, self.physics.m0)
            .sqrt()
            .max(self.sigma0);
        let h = self.grid_half_width_sigmas * width;
        let lo = self.x0.min(centre_end) - h;
        let hi = self.x0.max(centre_end) + h;
        Ok(Grid1D::new(lo, hi, points)?)
    }
}

/// Samples the initial ensemble.
pub fn initial_packet(cfg: &PacketConfig) -> Result<(EnsembleState, Vec<BrownianSource>), PacketError> {
    let v0 = cfg.physics.hbar * cfg.k0 / cfg.physics.m0;
    let sv = cfg.velocity_spread();
    let sigma_b = cfg.physics.brownian_sigma();
    let mut trajectories = Vec::with_capacity(cfg.trajectories);
    let mut sources = Vec::with_capacity(cfg.trajectories);
    for j in 0..cfg.trajectories as u64 {
        let seed = derive_seed(cfg.seed, domain::PAIR_SEEDS, j);
        let mut s = CounterStream::new(seed, domain::INITIAL_CONDITIONS);
        let ensemble = if s.next_unit() < 0.5 { Ensemble::A } else { Ensemble::B };
        let x = cfg.x0 + cfg.sigma0 * s.next_standard_normal();
        let v = v0 + sv * s.next_standard_normal();
        trajectories.push(Trajectory {
            id: j,
            position: Vector3::new(x, 0.0, 0.0),
            velocity: Vector3::new(v, 0.0, 0.0),
            ensemble,
            spin: crate::spin::Spin::Up,
        });
        sources.push(BrownianSource::new(seed, sigma_b));
    }
    Ok((EnsembleState::new(trajectories, BinGrid::along_x(cfg.bin_width))?, sources))
}

pub struct PacketRun {
    pub state: EnsembleState,
    pub diagnostics: Vec<StepDiagnostics>,
    pub psi: WaveFunction,
    pub histogram: Histogram1D,
    pub report: PacketReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketReport {
    pub t_final: f64,
    pub steps: u64,
    pub ensemble_mean: f64,
    pub ensemble_variance: f64,
    pub oracle_mean: f64,
    pub oracle_variance: f64,
    /// `σ₀² + (ħt/(2m₀σ₀))²`; the exact variance for zero and constant
    /// forces.
    pub free_variance: f64,
    /// Oracle variance on a grid with twice the points.
    pub refined_oracle_variance: f64,
    pub ks_distance: f64,
    pub l1_distance: f64,
}

impl PacketReport {
    pub fn variance_rel_error(&self) -> f64 {
        (self.ensemble_variance - self.oracle_variance).abs() / self.oracle_variance
    }

    pub fn refinement_rel_change(&self) -> f64 {
        (self.refined_oracle_variance - self.oracle_variance).abs() / self.oracle_variance
    }
}

fn oracle_state(cfg: &PacketConfig, points: usize) -> Result<WaveFunction, PacketError> {
    let grid = cfg.grid(points)?;
    let v = grid.sample(|x| cfg.potential(x));
    let psi0 = WaveFunction::gaussian(grid, cfg.x0, cfg.sigma0, cfg.k0)?;
    Ok(evolve_schrodinger(&psi0, &v, &cfg.physics, cfg.final_time(), cfg.dt, None)?.final_state)
}

/// Evolves the ensemble and the oracle to the final time and compares them.
pub fn run_packet(cfg: &PacketConfig, exec: Execution) -> Result<PacketRun, PacketError> {
    cfg.validate()?;
    let (mut state, sources) = initial_packet(cfg)?;
    let force = |x: &Vector3<f64>, _t: f64| cfg.force.force(x);
    let (diagnostics, _) = evolve(
        &mut state,
        &sources,
        &force,
        &cfg.physics,
        cfg.steps(),
        cfg.dt,
        ExchangeOptions::default(),
        exec,
        |_, t: &Trajectory| t.speed(),
    )?;

    let psi = oracle_state(cfg, cfg.grid_points)?;
    let refined = oracle_state(cfg, 2 * cfg.grid_points)?;
    let g = psi.grid();
    let xs: Vec<f64> = state.trajectories().iter().map(|t| t.position.x).collect();
    let histogram = Histogram1D::from_samples(
        &xs,
        g.x_min() - 0.5 * g.dx(),
        g.x_max() + 0.5 * g.dx(),
        cfg.histogram_bins,
    )?;
    let distance = compare_density(&histogram, &psi)?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = cfg.final_time();
    let report = PacketReport {
        t_final: t,
        steps: cfg.steps(),
        ensemble_mean: mean,
        ensemble_variance: variance,
        oracle_mean: psi.mean_x(),
        oracle_variance: psi.variance_x(),
        free_variance: free_gaussian_variance(cfg.sigma0, t, cfg.physics.hbar, cfg.physics.m0),
        refined_oracle_variance: refined.variance_x(),
        ks_distance: distance.ks_distance,
        l1_distance: distance.l1_distance,
    };
    Ok(PacketRun { state, diagnostics, psi, histogram, report })
}
