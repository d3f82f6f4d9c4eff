use num_complex::Complex64;

use super::{OracleError, WaveFunction};
use crate::dynamics::PhysParams;

/// A factorised Crank–Nicolson step for one potential and time step.
///
/// Solves `(1 + i dt H/2ħ) ψ' = (1 − i dt H/2ħ) ψ` with the three-point
/// Laplacian, so `H` is a real symmetric tridiagonal matrix and the step is
/// unitary.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    /// Diagonal of `i dt H / 2ħ`.
    diag: Vec<Complex64>,
    /// Off-diagonal of `i dt H / 2ħ`.
    off: Complex64,
    /// Forward-sweep coefficients of the Thomas algorithm.
    c_prime: Vec<Complex64>,
    inv_denom: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(potential: &[f64], p: &PhysParams, dx: f64, dt: f64) -> Result<Self, OracleError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(OracleError::InvalidTimeStep { dt });
        }
        if let Some(index) = potential.iter().position(|v| !v.is_finite()) {
            return Err(OracleError::NonFinitePotential { index });
        }
        let kinetic = p.hbar * p.hbar / (2.0 * p.m0 * dx * dx);
        let scale = Complex64::new(0.0, dt / (2.0 * p.hbar));
        let diag: Vec<Complex64> = potential.iter().map(|v| scale * (2.0 * kinetic + v)).collect();
        let off = scale * (-kinetic);

        let n = diag.len();
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_denom = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let prev = if i == 0 { Complex64::new(0.0, 0.0) } else { c_prime[i - 1] };
            let denom = 1.0 + diag[i] - off * prev;
            if denom.norm() < 1e-300 {
                return Err(OracleError::SingularSolve { row: i });
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = off * inv_denom[i];
        }
        Ok(Self { diag, off, c_prime, inv_denom })
    }

    pub fn step(&self, psi: &WaveFunction) -> Result<WaveFunction, OracleError> {
        let a = psi.amplitudes();
        let n = self.diag.len();
        if a.len() != n {
            return Err(OracleError::LengthMismatch {
                what: "potential",
                expected: a.len(),
                got: n,
            });
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut d = vec![zero; n];
        for i in 0..n {
            let left = if i > 0 { a[i - 1] } else { zero };
            let right = if i + 1 < n { a[i + 1] } else { zero };
            let rhs = (1.0 - self.diag[i]) * a[i] - self.off * (left + right);
            let prev = if i > 0 { d[i - 1] } else { zero };
            d[i] = (rhs - self.off * prev) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = d[i + 1];
            d[i] -= self.c_prime[i] * next;
        }
        Ok(WaveFunction {
            grid: *psi.grid(),
            amps: d,
        })
    }
}

/// One Crank–Nicolson step of `iħ ∂ψ/∂t = (−ħ²/2m₀ ∂²/∂x² + V) ψ`.
pub fn crank_nicolson_step(
    psi: &WaveFunction,
    potential: &[f64],
    p: &PhysParams,
    dt: f64,
) -> Result<WaveFunction, OracleError> {
    CrankNicolson::new(potential, p, psi.grid().dx(), dt)?.step(psi)
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub final_state: WaveFunction,
    /// The step actually used: `t_final` divided by a whole number of steps.
    pub dt: f64,
    pub steps: usize,
    /// `(time, ψ)` including `t = 0` and the final time, when requested.
    pub snapshots: Vec<(f64, WaveFunction)>,
}

/// Propagates `psi0` to `t_final` in `round(t_final/dt)` equal steps.
///
/// With `snapshot_every = Some(k)`, every `k`-th state is kept (the initial and
/// final states always are).
pub fn evolve_schrodinger(
    psi0: &WaveFunction,
    potential: &[f64],
    p: &PhysParams,
    t_final: f64,
    dt: f64,
    snapshot_every: Option<usize>,
) -> Result<Evolution, OracleError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OracleError::InvalidTimeStep { dt });
    }
    if !(t_final >= dt * (1.0 - 1e-12)) {
        return Err(OracleError::TooShort { t_final, dt });
    }
    let steps = ((t_final / dt).round() as usize).max(1);
    let dt = t_final / steps as f64;
    let cn = CrankNicolson::new(potential, p, psi0.grid().dx(), dt)?;
    let mut psi = psi0.clone();
    let mut snapshots = Vec::new();
    let every = snapshot_every.map(|k| k.max(1));
    if every.is_some() {
        snapshots.push((0.0, psi.clone()));
    }
    for s in 1..=steps {
        psi = cn.step(&psi)?;
        if let Some(k) = every {
            if s % k == 0 || s == steps {
                snapshots.push((s as f64 * dt, psi.clone()));
            }
        }
    }
    Ok(Evolution {
        final_state: psi,
        dt,
        steps,
        snapshots,
    })
}
