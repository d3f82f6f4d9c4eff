use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{
    exchange_procedure, BrownianSource, DynError, Ensemble, EnsembleState, ExchangeOptions,
    PhysParams, SwapRecord, Trajectory,
};
use crate::par::{self, Execution};

/// Conservative external force fields that can be named in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceField {
    #[default]
    Zero,
    /// Spatially constant force, e.g. `F = −∇(f·x)` for a linear potential.
    Constant { force: [f64; 3] },
    /// `F = −k (x − center)`.
    Harmonic { k: f64, center: [f64; 3] },
}

impl ForceField {
    pub fn force(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match *self {
            ForceField::Zero => Vector3::zeros(),
            ForceField::Constant { force } => Vector3::from(force),
            ForceField::Harmonic { k, center } => -k * (x - Vector3::from(center)),
        }
    }
}

/// One explicit Euler step: velocity first, then position with the new
/// velocity.
///
/// The friction term is `−v/τ` for ensemble B and `+v/τ` for ensemble A. The
/// returned flag reports whether the speed had to be capped at `c_max`.
pub fn step_langevin(
    traj: &Trajectory,
    f_ext: &Vector3<f64>,
    f_brown: &Vector3<f64>,
    p: &PhysParams,
    dt: f64,
) -> Result<(Trajectory, bool), DynError> {
    if !(dt > 0.0 && dt <= p.tau) {
        return Err(DynError::InvalidTimeStep { dt, tau: p.tau });
    }
    if !(f_ext.iter().all(|c| c.is_finite()) && f_brown.iter().all(|c| c.is_finite())) {
        return Err(DynError::NonFiniteForce { id: traj.id });
    }
    let sign = match traj.ensemble {
        Ensemble::A => 1.0,
        Ensemble::B => -1.0,
    };
    let friction = if p.tau.is_finite() {
        sign * traj.velocity / p.tau
    } else {
        Vector3::zeros()
    };
    let mut v = traj.velocity + dt * ((f_ext + f_brown) / p.m0 + friction);
    let speed = v.norm();
    let capped = speed > p.c_max;
    if capped {
        v *= p.c_max / speed;
    }
    let mut out = *traj;
    out.velocity = v;
    out.position += dt * v;
    Ok((out, capped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    /// Completed steps, counting this one.
    pub step: u64,
    /// Time after the step.
    pub time: f64,
    pub mean_speed_a: f64,
    pub mean_speed_b: f64,
    /// `Σ_bins |mean speed A − mean speed B|` before and after the exchange.
    pub bin_gap_before: f64,
    pub bin_gap_after: f64,
    pub swaps: usize,
    pub capped: usize,
}

/// Runs `steps` rounds of Brownian forces, Langevin updates and exchange.
///
/// `sources[i]` drives `state.trajectories()[i]`. Forces for step `t` are read
/// from position `state.step` of each stream, so a run split into several
/// `evolve` calls reproduces one long call exactly.
#[allow(clippy::too_many_arguments)]
pub fn evolve<F, S>(
    state: &mut EnsembleState,
    sources: &[BrownianSource],
    f_ext: &F,
    p: &PhysParams,
    steps: u64,
    dt: f64,
    opts: ExchangeOptions,
    exec: Execution,
    perceived_speed: S,
) -> Result<(Vec<StepDiagnostics>, Vec<SwapRecord>), DynError>
where
    F: Fn(&Vector3<f64>, f64) -> Vector3<f64> + Sync,
    S: Fn(usize, &Trajectory) -> f64 + Sync + Send,
{
    if steps == 0 {
        return Err(DynError::NoSteps);
    }
    if sources.len() != state.len() {
        return Err(DynError::LengthMismatch {
            what: "Brownian sources",
            expected: state.len(),
            got: sources.len(),
        });
    }
    p.validate()?;
    let mut diagnostics = Vec::with_capacity(steps as usize);
    let mut log = Vec::new();
    for _ in 0..steps {
        let (step, time) = (state.step, state.time);
        let results = par::map_range(exec, state.len(), |i| {
            let t = &state.trajectories()[i];
            let fb = sources[i].sample(step);
            step_langevin(t, &f_ext(&t.position, time), &fb, p, dt)
        });
        let mut capped = 0;
        let trajectories = state.trajectories_mut();
        for (slot, r) in trajectories.iter_mut().zip(results) {
            let (t, c) = r?;
            *slot = t;
            capped += usize::from(c);
        }
        state.time = time + dt;
        state.step = step + 1;
        let out = exchange_procedure(state, opts, exec, &perceived_speed);
        diagnostics.push(StepDiagnostics {
            step: state.step,
            time: state.time,
            mean_speed_a: state.mean_speed(Ensemble::A).unwrap_or(f64::NAN),
            mean_speed_b: state.mean_speed(Ensemble::B).unwrap_or(f64::NAN),
            bin_gap_before: out.gap_before,
            bin_gap_after: out.gap_after,
            swaps: out.swaps.len(),
            capped,
        });
        log.extend(out.swaps);
    }
    Ok((diagnostics, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BinGrid;
    use crate::rng::{derive_seed, domain, CounterStream};
    use crate::spin::Spin;
    use approx::assert_abs_diff_eq;

    fn t(v: [f64; 3], e: Ensemble) -> Trajectory {
        Trajectory {
            id: 0,
            position: Vector3::zeros(),
            velocity: Vector3::from(v),
            ensemble: e,
            spin: Spin::Up,
        }
    }

    #[test]
    fn friction_signs() {
        let p = PhysParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let z = Vector3::zeros();
        let (b, _) = step_langevin(&t([1.0, 0.0, 0.0], Ensemble::B), &z, &z, &p, 0.1).unwrap();
        assert_abs_diff_eq!(b.velocity.x, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(b.position.x, 0.09, epsilon = 1e-15);
        let (a, _) = step_langevin(&t([1.0, 0.0, 0.0], Ensemble::A), &z, &z, &p, 0.1).unwrap();
        assert_abs_diff_eq!(a.velocity.x, 1.1, epsilon = 1e-15);
    }

    #[test]
    fn newtonian_without_friction() {
        let p = PhysParams::new(2.0, 1.0, f64::INFINITY, 1.0, 1.0).unwrap();
        let f = Vector3::new(0.0, 4.0, 0.0);
        let (n, capped) =
            step_langevin(&t([1.0, 0.0, 0.0], Ensemble::A), &f, &Vector3::zeros(), &p, 0.5).unwrap();
        assert_eq!(n.velocity, Vector3::new(1.0, 1.0, 0.0));
        assert!(!capped);
    }

    #[test]
    fn invalid_inputs() {
        let p = PhysParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let z = Vector3::zeros();
        let tr = t([0.0; 3], Ensemble::A);
        assert!(matches!(step_langevin(&tr, &z, &z, &p, 2.0), Err(DynError::InvalidTimeStep { .. })));
        assert!(matches!(step_langevin(&tr, &z, &z, &p, 0.0), Err(DynError::InvalidTimeStep { .. })));
        let nan = Vector3::new(f64::NAN, 0.0, 0.0);
        assert_eq!(step_langevin(&tr, &nan, &z, &p, 0.1).unwrap_err(), DynError::NonFiniteForce { id: 0 });
    }

    #[test]
    fn speed_cap_is_enforced_and_counted() {
        let p = PhysParams::new(1.0, 1.0, f64::INFINITY, 1.0, 1.0).unwrap().with_speed_cap(2.0);
        let (n, capped) =
            step_langevin(&t([3.0, 4.0, 0.0], Ensemble::B), &Vector3::zeros(), &Vector3::zeros(), &p, 0.1)
                .unwrap();
        assert!(capped);
        assert_abs_diff_eq!(n.speed(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn harmonic_force_points_home() {
        let f = ForceField::Harmonic { k: 2.0, center: [1.0, 0.0, 0.0] };
        assert_eq!(f.force(&Vector3::new(3.0, 0.0, 0.0)), Vector3::new(-4.0, 0.0, 0.0));
        assert_eq!(ForceField::Zero.force(&Vector3::new(1.0, 1.0, 1.0)), Vector3::zeros());
    }

    fn cloud(n: usize, seed: u64, p: &PhysParams) -> (EnsembleState, Vec<BrownianSource>) {
        let mut rng = CounterStream::new(seed, domain::INITIAL_CONDITIONS);
        let ts = (0..n)
            .map(|i| Trajectory {
                id: i as u64,
                position: Vector3::from_fn(|_, _| rng.next_standard_normal()),
                velocity: Vector3::from_fn(|_, _| rng.next_standard_normal()),
                ensemble: if rng.next_unit() < 0.5 { Ensemble::A } else { Ensemble::B },
                spin: Spin::Up,
            })
            .collect();
        let sources = (0..n)
            .map(|i| BrownianSource::new(derive_seed(seed, domain::BROWNIAN, i as u64), p.brownian_sigma()))
            .collect();
        (EnsembleState::new(ts, BinGrid::uniform(0.5)).unwrap(), sources)
    }

    #[test]
    fn exchange_never_widens_the_gap_during_evolution() {
        let p = PhysParams::new(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let (mut s, src) = cloud(2000, 1, &p);
        let (diag, _) = evolve(&mut s, &src, &|_, _| Vector3::zeros(), &p, 20, 0.05,
            ExchangeOptions::default(), Execution::Parallel, |_, t| t.speed()).unwrap();
        assert_eq!(diag.len(), 20);
        for d in diag {
            assert!(d.bin_gap_after <= d.bin_gap_before, "{d:?}");
        }
    }

    #[test]
    fn evolution_is_execution_independent_and_resumable() {
        let p = PhysParams::new(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let (s0, src) = cloud(500, 2, &p);
        let zero = |_: &Vector3<f64>, _: f64| Vector3::zeros();
        let opts = ExchangeOptions { superposition_mode: true };
        let mut a = s0.clone();
        let ra = evolve(&mut a, &src, &zero, &p, 10, 0.05, opts, Execution::Sequential, |_, t| t.speed()).unwrap();
        let mut b = s0.clone();
        let rb = evolve(&mut b, &src, &zero, &p, 10, 0.05, opts, Execution::Parallel, |_, t| t.speed()).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        let mut c = s0;
        let r1 = evolve(&mut c, &src, &zero, &p, 4, 0.05, opts, Execution::Parallel, |_, t| t.speed()).unwrap();
        let r2 = evolve(&mut c, &src, &zero, &p, 6, 0.05, opts, Execution::Parallel, |_, t| t.speed()).unwrap();
        assert_eq!(c.trajectories(), a.trajectories());
        assert_eq!([r1.1, r2.1].concat(), ra.1);
    }

    #[test]
    fn errors_propagate() {
        let p = PhysParams::new(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let (mut s, src) = cloud(10, 3, &p);
        let zero = |_: &Vector3<f64>, _: f64| Vector3::zeros();
        let r = evolve(&mut s, &src, &zero, &p, 0, 0.05, ExchangeOptions::default(), Execution::Sequential, |_, t| t.speed());
        assert_eq!(r.unwrap_err(), DynError::NoSteps);
        let r = evolve(&mut s, &src[..5], &zero, &p, 1, 0.05, ExchangeOptions::default(), Execution::Sequential, |_, t| t.speed());
        assert!(matches!(r, Err(DynError::LengthMismatch { .. })));
        let bad = |_: &Vector3<f64>, _: f64| Vector3::new(f64::INFINITY, 0.0, 0.0);
        let r = evolve(&mut s, &src, &bad, &p, 1, 0.05, ExchangeOptions::default(), Execution::Sequential, |_, t| t.speed());
        assert!(matches!(r, Err(DynError::NonFiniteForce { .. })));
    }
}
