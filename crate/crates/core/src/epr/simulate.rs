use std::ops::Range;

use nalgebra::Vector3;
use statrs::distribution::{ContinuousCDF, Normal};

use super::disturbance::Perturbation;
use super::{
    DetectorRecord, EprError, MeasurementModel, PairConfig, RunStats, SourceEvent,
    SpinTrajectoryRecord,
};
use crate::dynamics::{
    evolve, BinGrid, BrownianSource, Ensemble, EnsembleState, ExchangeOptions, SwapRecord,
    Trajectory,
};
use crate::par::{self, Execution};
use crate::probspace::SettingPair;
use crate::rng::{derive_seed, domain, CounterStream};
use crate::spin::{measurement_probs, quantum_joint_probs, Axis, Spin};

/// Final state of one wing for a batch of consecutive pairs.
pub(crate) struct WingBatch {
    pub source: Vec<SourceEvent>,
    pub final_spin: Vec<Spin>,
    /// Per pair, the steps after which the spin flipped; empty unless recorded.
    pub flips: Vec<Vec<u64>>,
    pub swaps: Vec<SwapRecord>,
    pub swap_count: usize,
    /// Per pair, the uniform number the detector compares against: `Φ(g)` of
    /// the shared Brownian draw, the station's private draw, or the joint
    /// oracle draw, depending on the measurement model.
    pub detector_u: Vec<f64>,
    /// Swaps in which a partner's true speed lay within the perturbation
    /// magnitude of the threshold.
    pub near_threshold_swaps: usize,
}

fn initial_trajectory(lambda: u64, id: u64, wing: u8, thermal_speed: f64) -> (Trajectory, SourceEvent) {
    let mut s = CounterStream::new(lambda, domain::INITIAL_CONDITIONS);
    let source = if s.next_unit() < 0.5 { SourceEvent::S1 } else { SourceEvent::S2 };
    let ensemble = if s.next_unit() < 0.5 { Ensemble::A } else { Ensemble::B };
    let velocity = Vector3::from_fn(|_, _| thermal_speed * s.next_standard_normal());
    let spin = if wing == 1 {
        source.wing1_spin()
    } else {
        source.wing1_spin().flipped()
    };
    (
        Trajectory {
            id,
            position: Vector3::zeros(),
            velocity,
            ensemble,
            spin,
        },
        source,
    )
}

/// Simulates pairs `range` of one wing. Everything is derived from
/// `wing_master` (through `λ_j`), the wing index and the configuration.
pub(crate) fn simulate_wing_batch(
    cfg: &PairConfig,
    wing_master: u64,
    wing: u8,
    range: Range<usize>,
    perturbation: Option<&Perturbation>,
) -> Result<WingBatch, EprError> {
    let p = &cfg.physics;
    let lambdas: Vec<u64> = range
        .clone()
        .map(|j| derive_seed(wing_master, domain::PAIR_SEEDS, j as u64))
        .collect();
    let (trajectories, source): (Vec<_>, Vec<_>) = range
        .clone()
        .zip(&lambdas)
        .map(|(j, &l)| initial_trajectory(l, j as u64, wing, p.thermal_speed()))
        .unzip();
    let n = trajectories.len();
    let record = cfg.record_trajectories;
    let mut batch = WingBatch {
        source,
        final_spin: trajectories.iter().map(|t| t.spin).collect(),
        flips: if record { vec![Vec::new(); n] } else { Vec::new() },
        swaps: Vec::new(),
        swap_count: 0,
        detector_u: range
            .clone()
            .zip(&lambdas)
            .map(|(j, &l)| detector_uniform(cfg, wing_master, wing, j as u64, l))
            .collect(),
        near_threshold_swaps: 0,
    };
    if cfg.measurement_model == MeasurementModel::AnalyticQuantumOracle {
        // The oracle samples jointly and never looks at the trajectories.
        return Ok(batch);
    }

    let w = cfg.bin_width;
    let grid = BinGrid::new([-0.5 * w; 3], [w; 3]);
    let mut state = EnsembleState::new(trajectories, grid)?;
    let sources: Vec<BrownianSource> = lambdas
        .iter()
        .map(|&l| BrownianSource::new(l, p.brownian_sigma()))
        .collect();
    let force = |x: &Vector3<f64>, _t: f64| cfg.force.force(x);
    let opts = ExchangeOptions { superposition_mode: true };
    let first = range.start as u64;
    for _ in 0..cfg.steps() {
        let exchange_step = state.step + 1;
        let perceived = |i: usize, t: &Trajectory| match perturbation {
            Some(pert) => pert.perceived_speed(first + i as u64, exchange_step, t),
            None => t.speed(),
        };
        let (_, swaps) = evolve(&mut state, &sources, &force, p, 1, cfg.dt, opts, Execution::Sequential, perceived)?;
        batch.swap_count += swaps.len();
        for s in &swaps {
            let ia = (s.a_id - first) as usize;
            let ib = (s.b_id - first) as usize;
            if let Some(pert) = perturbation {
                let ts = state.trajectories();
                let near = |i: usize| (ts[i].speed() - s.threshold).abs() < pert.magnitude;
                if near(ia) || near(ib) {
                    batch.near_threshold_swaps += 1;
                }
            }
            if record {
                batch.flips[ia].push(s.step);
                batch.flips[ib].push(s.step);
            }
        }
        if record {
            batch.swaps.extend(swaps);
        }
    }
    batch.final_spin = state.trajectories().iter().map(|t| t.spin).collect();
    Ok(batch)
}

/// Polar angle of a planar axis measured from z, folded into `[0, π]`.
fn polar_angle(deg: f64) -> f64 {
    let a = deg.rem_euclid(360.0);
    (if a <= 180.0 { a } else { 360.0 - a }).to_radians()
}

fn detector_uniform(cfg: &PairConfig, wing_master: u64, wing: u8, pair: u64, lambda: u64) -> f64 {
    match cfg.measurement_model {
        MeasurementModel::SharedStreamThreshold => {
            let g = BrownianSource::new(lambda, 1.0).unit_draw(cfg.steps());
            Normal::standard().cdf(g)
        }
        MeasurementModel::IndependentBorn => {
            let seed = derive_seed(wing_master, domain::STATION_LOCAL, pair);
            CounterStream::new(seed, u64::from(wing)).next_unit()
        }
        MeasurementModel::AnalyticQuantumOracle => {
            CounterStream::new(lambda, domain::JOINT_ORACLE).next_unit()
        }
    }
}

/// One station's outcome under a wing-local model.
fn local_outcome(model: MeasurementModel, u: f64, axis_deg: f64, final_spin: Spin) -> Spin {
    let theta = polar_angle(axis_deg);
    match model {
        MeasurementModel::SharedStreamThreshold => {
            if u < measurement_probs(Spin::Up, theta).0 {
                final_spin
            } else {
                final_spin.flipped()
            }
        }
        MeasurementModel::IndependentBorn => {
            if u < measurement_probs(final_spin, theta).0 {
                Spin::Up
            } else {
                Spin::Down
            }
        }
        MeasurementModel::AnalyticQuantumOracle => unreachable!("joint model"),
    }
}

fn joint_outcome(u: f64, s: &SettingPair) -> (Spin, Spin) {
    let t = quantum_joint_probs(&Axis::in_xz_plane(s.mu()), &Axis::in_xz_plane(s.nu()));
    let mut acc = 0.0;
    for (a, row) in t.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return (Spin::from_index(a), Spin::from_index(b));
            }
        }
    }
    (Spin::Down, Spin::Down)
}

/// Outcomes of pair `k` of a batch under setting `s`.
pub(crate) fn measure_pair(
    cfg: &PairConfig,
    w1: &WingBatch,
    w2: &WingBatch,
    k: usize,
    s: &SettingPair,
) -> (Spin, Spin) {
    let model = cfg.measurement_model;
    if model == MeasurementModel::AnalyticQuantumOracle {
        return joint_outcome(w1.detector_u[k], s);
    }
    (
        local_outcome(model, w1.detector_u[k], s.mu_deg(), w1.final_spin[k]),
        local_outcome(model, w2.detector_u[k], s.nu_deg(), w2.final_spin[k]),
    )
}

pub(crate) fn batches(cfg: &PairConfig) -> Vec<Range<usize>> {
    (0..cfg.pairs)
        .step_by(cfg.ensemble_size)
        .map(|a| a..(a + cfg.ensemble_size).min(cfg.pairs))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EprRun {
    pub stats: RunStats,
    pub records: Vec<DetectorRecord>,
    /// Wing 1 then wing 2 for each pair; empty unless recording was enabled.
    pub spin_trajectories: Vec<SpinTrajectoryRecord>,
    /// Per wing; empty unless recording was enabled.
    pub swap_logs: [Vec<SwapRecord>; 2],
    pub swap_counts: [usize; 2],
}

struct BatchOutput {
    records: Vec<DetectorRecord>,
    spin_trajectories: Vec<SpinTrajectoryRecord>,
    swaps: [Vec<SwapRecord>; 2],
    swap_counts: [usize; 2],
}

fn run_pairs(
    cfg: &PairConfig,
    masters: [u64; 2],
    assignments: &[SettingPair],
    exec: Execution,
) -> Result<EprRun, EprError> {
    cfg.validate()?;
    if assignments.len() != cfg.pairs {
        return Err(EprError::AssignmentCount {
            expected: cfg.pairs,
            got: assignments.len(),
        });
    }
    let ranges = batches(cfg);
    let outputs = par::map(exec, &ranges, |range| -> Result<BatchOutput, EprError> {
        let w1 = simulate_wing_batch(cfg, masters[0], 1, range.clone(), None)?;
        let w2 = simulate_wing_batch(cfg, masters[1], 2, range.clone(), None)?;
        let mut out = BatchOutput {
            records: Vec::with_capacity(range.len()),
            spin_trajectories: Vec::new(),
            swaps: [Vec::new(), Vec::new()],
            swap_counts: [w1.swap_count, w2.swap_count],
        };
        for (k, j) in range.clone().enumerate() {
            let s = assignments[j];
            let (out1, out2) = measure_pair(cfg, &w1, &w2, k, &s);
            out.records.push(DetectorRecord {
                pair: j as u64,
                setting: s,
                out1,
                out2,
                source: w1.source[k],
            });
            if cfg.record_trajectories {
                for (wing, wb) in [(1u8, &w1), (2u8, &w2)] {
                    let initial = if wing == 1 {
                        wb.source[k].wing1_spin()
                    } else {
                        wb.source[k].wing1_spin().flipped()
                    };
                    out.spin_trajectories.push(SpinTrajectoryRecord {
                        pair: j as u64,
                        wing,
                        initial,
                        flip_steps: wb.flips.get(k).cloned().unwrap_or_default(),
                    });
                }
            }
        }
        out.swaps = [w1.swaps, w2.swaps];
        Ok(out)
    });

    let mut run = EprRun {
        stats: RunStats::default(),
        records: Vec::with_capacity(cfg.pairs),
        spin_trajectories: Vec::new(),
        swap_logs: [Vec::new(), Vec::new()],
        swap_counts: [0, 0],
    };
    for out in outputs {
        let out = out?;
        for r in &out.records {
            run.stats.add(r.setting, r.source, r.out1, r.out2);
        }
        run.records.extend(out.records);
        run.spin_trajectories.extend(out.spin_trajectories);
        let [s1, s2] = out.swaps;
        run.swap_logs[0].extend(s1);
        run.swap_logs[1].extend(s2);
        run.swap_counts[0] += out.swap_counts[0];
        run.swap_counts[1] += out.swap_counts[1];
    }
    Ok(run)
}

/// Runs `config.pairs` pairs, pair `j` measured under `assignments[j]`.
pub fn run_epr(
    config: &PairConfig,
    assignments: &[SettingPair],
    exec: Execution,
) -> Result<EprRun, EprError> {
    run_pairs(config, [config.master_seed; 2], assignments, exec)
}

/// Two sources whose wings meet: wing 1 is produced from `seed_alpha`, wing 2
/// from `seed_beta`. Equal seeds stand for a common past in which the `λ_j`
/// were fixed, and reproduce [`run_epr`]; unrelated seeds give independent
/// wings.
pub fn entanglement_swap_scenario(
    config: &PairConfig,
    assignments: &[SettingPair],
    seed_alpha: u64,
    seed_beta: u64,
    exec: Execution,
) -> Result<EprRun, EprError> {
    run_pairs(config, [seed_alpha, seed_beta], assignments, exec)
}

/// Measures every pair under every setting in `settings`.
///
/// The flight does not depend on the detector settings, so each batch is
/// simulated once and then measured repeatedly. The result equals merging
/// [`run_epr`] runs with the same seed and a constant assignment per setting.
pub fn run_epr_settings(
    config: &PairConfig,
    settings: &[SettingPair],
    exec: Execution,
) -> Result<RunStats, EprError> {
    config.validate()?;
    let masters = [config.master_seed; 2];
    let ranges = batches(config);
    let parts = par::map(exec, &ranges, |range| -> Result<RunStats, EprError> {
        let w1 = simulate_wing_batch(config, masters[0], 1, range.clone(), None)?;
        let w2 = simulate_wing_batch(config, masters[1], 2, range.clone(), None)?;
        let mut stats = RunStats::default();
        for s in settings {
            for k in 0..range.len() {
                let (o1, o2) = measure_pair(config, &w1, &w2, k, s);
                stats.add(*s, w1.source[k], o1, o2);
            }
        }
        Ok(stats)
    });
    let mut stats = RunStats::default();
    for p in parts {
        stats.merge(&p?);
    }
    Ok(stats)
}
