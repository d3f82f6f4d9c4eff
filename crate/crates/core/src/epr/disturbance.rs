use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::simulate::{batches, measure_pair, simulate_wing_batch};
use super::{EprError, PairConfig};
use crate::dynamics::{PhysParams, Trajectory};
use crate::par::{self, Execution};
use crate::probspace::SettingPair;
use crate::rng::{derive_seed, domain, CounterStream};

/// Magnitudes above this fraction of the half-width are not small.
pub const SMALLNESS_FRACTION: f64 = 0.1;

/// Zero-mean law of the per-step velocity perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceLaw {
    /// Isotropic Gaussian vector with `E|δ|² = magnitude²`.
    Gaussian,
    /// Vector of length `magnitude` in a uniformly random direction.
    RandomDirection,
    /// `±magnitude` added to the speed with equal probability.
    SignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub magnitude: f64,
    pub target_wing: u8,
    pub law: DisturbanceLaw,
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<(), EprError> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(EprError::Config("disturbance magnitude must be finite and non-negative".into()));
        }
        if self.target_wing != 1 && self.target_wing != 2 {
            return Err(EprError::Config("target_wing must be 1 or 2".into()));
        }
        Ok(())
    }
}

/// Half width at half maximum of one velocity component's thermal
/// distribution, `√(2 ln 2)·v_th`.
pub fn velocity_half_width(p: &PhysParams) -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt() * p.thermal_speed()
}

/// Perturbation of the speed a trajectory presents to the exchange. The
/// velocity itself is left alone: the disturbance only shifts which side of
/// the threshold a particle appears to be on.
pub(crate) struct Perturbation {
    pub magnitude: f64,
    law: DisturbanceLaw,
    master: u64,
}

impl Perturbation {
    pub fn perceived_speed(&self, pair: u64, step: u64, t: &Trajectory) -> f64 {
        let mut s = CounterStream::new(derive_seed(self.master, domain::DISTURBANCE, pair), step);
        let g = Vector3::from_fn(|_, _| s.next_standard_normal());
        match self.law {
            DisturbanceLaw::Gaussian => (t.velocity + g * (self.magnitude / 3f64.sqrt())).norm(),
            DisturbanceLaw::RandomDirection => {
                let n = g.norm();
                if n == 0.0 {
                    t.speed()
                } else {
                    (t.velocity + g * (self.magnitude / n)).norm()
                }
            }
            DisturbanceLaw::SignFlip => t.speed() + self.magnitude * g.x.signum(),
        }
    }
}

/// One row of a disturbance sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisturbanceRow {
    pub magnitude: f64,
    pub relative_to_half_width: f64,
    /// Equal-axis anticorrelation fraction.
    pub efficiency: f64,
    /// Undisturbed efficiency minus `efficiency`.
    pub efficiency_drop: f64,
    /// Swaps in the disturbed wing.
    pub swaps: usize,
    /// Swaps where a partner's true speed lay within `magnitude` of the
    /// threshold, the only ones a perturbation of that size can reverse.
    pub near_threshold_swaps: usize,
    pub altered_fraction: f64,
    pub violates_smallness: bool,
}

struct BatchResult {
    anticorrelated: Vec<u64>,
    swaps: Vec<usize>,
    near: Vec<usize>,
}

/// Repeats the equal-axis experiment once per magnitude with the target wing
/// perturbed, each row using `spec` with its magnitude replaced. The first
/// row of the output is always the undisturbed reference (magnitude 0) unless
/// `magnitudes` already starts with 0.
pub fn disturbance_sweep(
    config: &PairConfig,
    spec: &DisturbanceSpec,
    magnitudes: &[f64],
    exec: Execution,
) -> Result<Vec<DisturbanceRow>, EprError> {
    config.validate()?;
    spec.validate()?;
    let mut mags = Vec::with_capacity(magnitudes.len() + 1);
    if magnitudes.first() != Some(&0.0) {
        mags.push(0.0);
    }
    mags.extend_from_slice(magnitudes);
    for &m in &mags {
        DisturbanceSpec { magnitude: m, ..*spec }.validate()?;
    }

    let master = config.master_seed;
    let setting = SettingPair::from_degrees(0.0, 0.0);
    let target = spec.target_wing;
    let ranges = batches(config);
    let results = par::map(exec, &ranges, |range| -> Result<BatchResult, EprError> {
        let other = 3 - target;
        let fixed = simulate_wing_batch(config, master, other, range.clone(), None)?;
        let mut out = BatchResult { anticorrelated: Vec::new(), swaps: Vec::new(), near: Vec::new() };
        for &m in &mags {
            let pert = Perturbation { magnitude: m, law: spec.law, master };
            let moved = simulate_wing_batch(
                config,
                master,
                target,
                range.clone(),
                (m > 0.0).then_some(&pert),
            )?;
            let (w1, w2) = if target == 1 { (&moved, &fixed) } else { (&fixed, &moved) };
            let anti = range
                .clone()
                .enumerate()
                .filter(|&(k, _)| {
                    let (a, b) = measure_pair(config, w1, w2, k, &setting);
                    a != b
                })
                .count();
            out.anticorrelated.push(anti as u64);
            out.swaps.push(moved.swap_count);
            out.near.push(moved.near_threshold_swaps);
        }
        Ok(out)
    });

    let mut anti = vec![0u64; mags.len()];
    let mut swaps = vec![0usize; mags.len()];
    let mut near = vec![0usize; mags.len()];
    for r in results {
        let r = r?;
        for i in 0..mags.len() {
            anti[i] += r.anticorrelated[i];
            swaps[i] += r.swaps[i];
            near[i] += r.near[i];
        }
    }
    let half_width = velocity_half_width(&config.physics);
    let baseline = anti[0] as f64 / config.pairs as f64;
    Ok(mags
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let efficiency = anti[i] as f64 / config.pairs as f64;
            DisturbanceRow {
                magnitude: m,
                relative_to_half_width: m / half_width,
                efficiency,
                efficiency_drop: baseline - efficiency,
                swaps: swaps[i],
                near_threshold_swaps: near[i],
                altered_fraction: if swaps[i] == 0 { 0.0 } else { near[i] as f64 / swaps[i] as f64 },
                violates_smallness: m > SMALLNESS_FRACTION * half_width,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epr::MeasurementModel;

    fn cfg() -> PairConfig {
        let mut c = PairConfig::new(2000, 3, MeasurementModel::SharedStreamThreshold);
        c.ensemble_size = 500;
        c
    }

    #[test]
    fn half_width_of_unit_thermal_speed() {
        let p = PhysParams::new(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        // v_th = √(ħ/2m₀τ) = √½ in these units.
        let hw = velocity_half_width(&p);
        assert!((hw - (2.0 * 2f64.ln()).sqrt() * 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_disturbance_is_the_reference() {
        let spec = DisturbanceSpec { magnitude: 0.0, target_wing: 2, law: DisturbanceLaw::Gaussian };
        let rows = disturbance_sweep(&cfg(), &spec, &[0.0], Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].efficiency, 1.0);
        assert_eq!(rows[0].altered_fraction, 0.0);
        assert!(!rows[0].violates_smallness);
    }

    #[test]
    fn altered_fraction_grows_with_the_magnitude() {
        let c = cfg();
        let hw = velocity_half_width(&c.physics);
        for law in [DisturbanceLaw::Gaussian, DisturbanceLaw::RandomDirection, DisturbanceLaw::SignFlip] {
            let spec = DisturbanceSpec { magnitude: 0.0, target_wing: 2, law };
            let mags = [1e-4 * hw, 0.01 * hw, 0.05 * hw, 0.5 * hw];
            let rows = disturbance_sweep(&c, &spec, &mags, Execution::Parallel).unwrap();
            assert_eq!(rows.len(), 5);
            assert_eq!(rows[0].efficiency, 1.0);
            for w in rows.windows(2) {
                assert!(w[1].altered_fraction >= w[0].altered_fraction, "{law:?} {rows:?}");
            }
            assert!(rows[1].altered_fraction < 0.01, "{law:?} {rows:?}");
            assert!(rows[4].violates_smallness && !rows[2].violates_smallness);
            assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.efficiency)));
        }
    }

    #[test]
    fn sweep_is_independent_of_execution() {
        let spec = DisturbanceSpec { magnitude: 0.0, target_wing: 1, law: DisturbanceLaw::SignFlip };
        let a = disturbance_sweep(&cfg(), &spec, &[0.01], Execution::Sequential).unwrap();
        let b = disturbance_sweep(&cfg(), &spec, &[0.01], Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_perturbation_path_matches_the_undisturbed_wing() {
        let c = cfg();
        for law in [DisturbanceLaw::Gaussian, DisturbanceLaw::RandomDirection, DisturbanceLaw::SignFlip] {
            let pert = Perturbation { magnitude: 0.0, law, master: c.master_seed };
            let a = simulate_wing_batch(&c, c.master_seed, 2, 0..500, Some(&pert)).unwrap();
            let b = simulate_wing_batch(&c, c.master_seed, 2, 0..500, None).unwrap();
            assert_eq!(a.final_spin, b.final_spin, "{law:?}");
            assert_eq!(a.swap_count, b.swap_count);
            assert_eq!(a.near_threshold_swaps, 0);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = DisturbanceSpec { magnitude: 0.0, target_wing: 3, law: DisturbanceLaw::SignFlip };
        assert!(disturbance_sweep(&cfg(), &spec, &[0.1], Execution::Sequential).is_err());
        let spec = DisturbanceSpec { target_wing: 1, ..spec };
        assert!(disturbance_sweep(&cfg(), &spec, &[-0.1], Execution::Sequential).is_err());
    }
}
