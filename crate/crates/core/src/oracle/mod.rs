//! One-dimensional Schrödinger reference solutions used to validate the
//! ensemble engine: a Crank–Nicolson propagator with hard walls, analytic
//! Gaussian results, density distances and an Ehrenfest residual.

mod compare;
mod crank_nicolson;
mod io;

pub use compare::{compare_density, ehrenfest_check, expectation_velocity, DensityDistance, EhrenfestReport, Histogram1D};
pub use crank_nicolson::{crank_nicolson_step, evolve_schrodinger, CrankNicolson, Evolution};
pub use io::{write_wavefunction, WAVEFUNCTION_HEADER};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid needs n >= 16 and x_max > x_min (got n = {n}, [{x_min}, {x_max}])")]
    InvalidGrid { x_min: f64, x_max: f64, n: usize },
    #[error("time step {dt} must be positive and finite")]
    InvalidTimeStep { dt: f64 },
    #[error("t_final = {t_final} is shorter than one step of {dt}")]
    TooShort { t_final: f64, dt: f64 },
    #[error("potential is not finite at grid point {index}")]
    NonFinitePotential { index: usize },
    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("tridiagonal solve hit a vanishing pivot at row {row}")]
    SingularSolve { row: usize },
    #[error("wave function has zero or non-finite norm")]
    ZeroNorm,
    #[error("need at least 3 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("incompatible densities: {0}")]
    Incompatible(String),
    #[error("histogram: {0}")]
    Histogram(String),
    #[error("snapshot output: {0}")]
    Io(String),
}

/// Uniform grid `x_i = x_min + i·dx`, `i = 0..n`, with `ψ = 0` beyond both
/// ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, OracleError> {
        if n < 16 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(OracleError::InvalidGrid { x_min, x_max, n });
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }
}

/// Amplitudes on a grid with `Σ |ψ_i|² dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    amps: Vec<Complex64>,
}

impl WaveFunction {
    /// Normalises the given amplitudes.
    pub fn new(grid: Grid1D, amps: Vec<Complex64>) -> Result<Self, OracleError> {
        if amps.len() != grid.len() {
            return Err(OracleError::LengthMismatch {
                what: "amplitudes",
                expected: grid.len(),
                got: amps.len(),
            });
        }
        let mut psi = Self { grid, amps };
        let norm = psi.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(OracleError::ZeroNorm);
        }
        let s = 1.0 / norm.sqrt();
        psi.amps.iter_mut().for_each(|a| *a *= s);
        Ok(psi)
    }

    /// `exp(−(x−x0)²/(4σ²) + i k0 x)`, normalised on the grid.
    pub fn gaussian(grid: Grid1D, x0: f64, sigma: f64, k0: f64) -> Result<Self, OracleError> {
        let amps = grid
            .points()
            .map(|x| {
                let d = x - x0;
                Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), k0 * x)
            })
            .collect();
        Self::new(grid, amps)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `|ψ_i|²` per grid point.
    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_x(&self) -> f64 {
        let dx = self.grid.dx();
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| self.grid.x(i) * a.norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn variance_x(&self) -> f64 {
        let m = self.mean_x();
        let dx = self.grid.dx();
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| (self.grid.x(i) - m).powi(2) * a.norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn conjugate(&self) -> Self {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }

    /// `max_i |ψ_i − φ_i|`.
    pub fn max_difference(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Position variance of a free Gaussian packet of initial width `sigma0`:
/// `σ₀² + (ħ t / (2 m₀ σ₀))²`.
pub fn free_gaussian_variance(sigma0: f64, t: f64, hbar: f64, m0: f64) -> f64 {
    sigma0 * sigma0 + (hbar * t / (2.0 * m0 * sigma0)).powi(2)
}
