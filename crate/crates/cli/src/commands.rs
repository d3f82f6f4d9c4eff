use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use ensemble_lab::dynamics::{write_diagnostics, write_snapshot, write_swap_log};
use ensemble_lab::epr::{
    chsh_estimate, disturbance_sweep, entanglement_swap_scenario, estimate_correlation,
    no_signaling_test, passive_factorization_test, run_epr, run_epr_settings, velocity_half_width,
    DisturbanceSpec, EprError, MeasurementModel, PairConfig, RunStats, SourceEvent,
};
use ensemble_lab::oracle::write_wavefunction;
use ensemble_lab::packet::run_packet;
use ensemble_lab::probspace::{
    build_quantum_epr_model, chsh, conditional_chsh_bound_scan, is_actively_local,
    is_passively_local, lemma_battery, ModelDocument, SettingPair, EQ_TOL,
};
use ensemble_lab::spin::Spin;
use ensemble_lab::Execution;

use crate::config::RunConfig;
use crate::output::{cell, num, Bundle};
use crate::{CliError, Command};

/// Largest conditional CHSH value accepted as "at most 2".
pub const CHSH_LOCAL_TOL: f64 = 1e-12;
/// KS distance above which a density run is flagged.
pub const DENSITY_KS_WARNING: f64 = 0.05;

const EXEC: Execution = Execution::Parallel;

/// What a command reports back: whether its invariants held and a short
/// human-readable summary.
#[derive(Debug, Default)]
pub struct Report {
    pub invariants_hold: bool,
    pub lines: Vec<String>,
}

pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    match command {
        Command::VerifyTheorem => verify_theorem(cfg, out),
        Command::ChshScan => chsh_scan(cfg, out),
        Command::Epr => epr(cfg, out),
        Command::Swap => swap(cfg, out),
        Command::Density => density(cfg, out),
        Command::Disturbance => disturbance(cfg, out),
    }
}

struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
    /// `None` for quantities that are reported but not asserted.
    passed: Option<bool>,
}

fn write_checks(bundle: &Bundle, checks: &[Check]) -> Result<(), CliError> {
    bundle.csv(
        "checks.csv",
        &["check", "value", "bound", "asserted", "passed"],
        checks.iter().map(|c| {
            vec![
                cell(c.name),
                num(c.value),
                num(c.bound),
                cell(c.passed.is_some()),
                c.passed.map(cell).unwrap_or_default(),
            ]
        }),
    )
}

fn check_lines(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .map(|c| {
            let verdict = match c.passed {
                Some(true) => "ok",
                Some(false) => "FAILED",
                None => "reported",
            };
            format!("{}: {} (bound {}) {verdict}", c.name, c.value, c.bound)
        })
        .collect()
}

fn verify_theorem(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let seed = cfg.seed()?;
    let v = &cfg.verify_theorem;
    let scan = conditional_chsh_bound_scan(v.grid_step, EXEC).map_err(CliError::config)?;
    let battery = lemma_battery(v.battery_models, seed, EXEC);
    let [a, ap, b, bp] = v.chsh_angles;
    let settings: Vec<SettingPair> = [(a, b), (a, bp), (ap, b), (ap, bp)]
        .iter()
        .map(|&(x, y)| SettingPair::from_degrees(x, y))
        .collect();
    let model = build_quantum_epr_model(&settings).map_err(CliError::config)?;
    let quantum_chsh = chsh(&model, a, ap, b, bp).map_err(CliError::config)?;
    let active = is_actively_local(&model, EQ_TOL);
    let passive = is_passively_local(&model, EQ_TOL);

    let checks = [
        Check {
            name: "conditional_chsh_max",
            value: scan.max_value,
            bound: 2.0,
            passed: Some(scan.max_value <= 2.0 + CHSH_LOCAL_TOL),
        },
        Check {
            name: "lemma_battery_deterministic_fraction",
            value: battery.deterministic as f64 / battery.models.max(1) as f64,
            bound: 1.0,
            passed: Some(battery.passed()),
        },
        Check {
            name: "quantum_chsh",
            value: quantum_chsh,
            bound: 2.0 * 2f64.sqrt(),
            passed: Some(quantum_chsh <= 2.0 * 2f64.sqrt() + 1e-10),
        },
        Check {
            name: "quantum_active_locality_deviation",
            value: active.max_deviation,
            bound: EQ_TOL,
            passed: Some(active.ok),
        },
        Check {
            name: "quantum_passive_locality_gap",
            value: passive.max_deviation,
            bound: EQ_TOL,
            passed: None,
        },
    ];

    let bundle = Bundle::create(out, cfg)?;
    write_checks(&bundle, &checks)?;
    write_scan(&bundle, v.grid_step, &scan)?;
    bundle.csv(
        "battery.csv",
        &["models", "candidates_drawn", "deterministic", "with_witness", "max_indicator_distance", "first_failure"],
        [vec![
            cell(battery.models),
            cell(battery.candidates_drawn),
            cell(battery.deterministic),
            cell(battery.with_witness),
            num(battery.max_indicator_distance),
            battery.first_failure.map(cell).unwrap_or_default(),
        ]],
    )?;
    let mut w = bundle.writer("quantum_model.toml")?;
    w.write_all(ModelDocument::from_model(&model).to_toml().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&bundle.path("quantum_model.toml"), e))?;

    Ok(Report {
        invariants_hold: checks.iter().all(|c| c.passed != Some(false)),
        lines: check_lines(&checks),
    })
}

fn write_scan(
    bundle: &Bundle,
    grid_step: f64,
    scan: &ensemble_lab::probspace::ScanResult,
) -> Result<(), CliError> {
    bundle.csv(
        "chsh_scan.csv",
        &["grid_step", "points", "max_value", "argmax_p_mu", "argmax_p_mu_prime", "argmax_p_nu", "argmax_p_nu_prime", "bound", "passed"],
        [vec![
            num(grid_step),
            cell(scan.points),
            num(scan.max_value),
            num(scan.argmax[0]),
            num(scan.argmax[1]),
            num(scan.argmax[2]),
            num(scan.argmax[3]),
            num(2.0),
            cell(scan.max_value <= 2.0 + CHSH_LOCAL_TOL),
        ]],
    )
}

fn chsh_scan(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let step = cfg.chsh_scan.grid_step;
    let scan = conditional_chsh_bound_scan(step, EXEC).map_err(CliError::config)?;
    let bundle = Bundle::create(out, cfg)?;
    write_scan(&bundle, step, &scan)?;
    let ok = scan.max_value <= 2.0 + CHSH_LOCAL_TOL;
    Ok(Report {
        invariants_hold: ok,
        lines: vec![format!(
            "conditional CHSH maximum over {} grid points: {} at {:?}",
            scan.points, scan.max_value, scan.argmax
        )],
    })
}

fn epr_error(e: EprError) -> CliError {
    CliError::Config(e.to_string())
}

fn settings_from(pairs: &[[f64; 2]], chsh_angles: &[f64]) -> Result<Vec<SettingPair>, CliError> {
    let mut set: BTreeSet<SettingPair> =
        pairs.iter().map(|&[a, b]| SettingPair::from_degrees(a, b)).collect();
    match chsh_angles {
        [] => {}
        &[a, ap, b, bp] => {
            for (x, y) in [(a, b), (a, bp), (ap, b), (ap, bp)] {
                set.insert(SettingPair::from_degrees(x, y));
            }
        }
        _ => return Err(CliError::Config("chsh_angles needs exactly four angles or none".into())),
    }
    if set.is_empty() {
        return Err(CliError::Config("at least one setting is required".into()));
    }
    Ok(set.into_iter().collect())
}

fn spin_cell(s: Spin) -> String {
    cell(s.symbol())
}

fn write_counts(bundle: &Bundle, stats: &RunStats) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for (s, c) in &stats.settings {
        for src in [SourceEvent::S1, SourceEvent::S2] {
            for o1 in [Spin::Up, Spin::Down] {
                for o2 in [Spin::Up, Spin::Down] {
                    rows.push(vec![
                        num(s.mu_deg()),
                        num(s.nu_deg()),
                        cell(src.label()),
                        spin_cell(o1),
                        spin_cell(o2),
                        cell(c.counts[src.index()][o1.index()][o2.index()]),
                    ]);
                }
            }
        }
    }
    bundle.csv("counts.csv", &["mu_deg", "nu_deg", "source", "out1", "out2", "count"], rows)
}

fn write_correlations(bundle: &Bundle, stats: &RunStats) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for (s, c) in &stats.settings {
        let (e, se) = match estimate_correlation(stats, s) {
            Ok(e) => (num(e.value), num(e.stderr)),
            Err(_) => (String::new(), String::new()),
        };
        let n = c.total() as f64;
        rows.push(vec![
            num(s.mu_deg()),
            num(s.nu_deg()),
            cell(c.total()),
            e,
            se,
            num(c.anticorrelation_fraction()),
            num(c.marginal_count(1, Spin::Up) as f64 / n),
            num(c.marginal_count(2, Spin::Up) as f64 / n),
            num(c.source_total(SourceEvent::S1) as f64 / n),
        ]);
    }
    bundle.csv(
        "correlations.csv",
        &["mu_deg", "nu_deg", "n", "e_hat", "stderr", "anticorrelation", "p_up_wing1", "p_up_wing2", "p_source_s1"],
        rows,
    )
}

/// Writes the no-signaling and factorization reports; returns whether the
/// no-signaling test passed (vacuously when nothing is comparable).
fn write_locality_reports(bundle: &Bundle, stats: &RunStats) -> Result<(bool, Vec<String>), CliError> {
    let mut lines = Vec::new();
    let passed = match no_signaling_test(stats) {
        Ok(r) => {
            let (wing, a, b) = match r.worst {
                Some((w, a, b)) => (cell(w), cell(a), cell(b)),
                None => Default::default(),
            };
            bundle.csv(
                "no_signaling.csv",
                &["comparisons", "max_shift", "max_z", "passed", "worst_wing", "worst_setting_a", "worst_setting_b"],
                [vec![cell(r.comparisons), num(r.max_shift), num(r.max_z), cell(r.passed), wing, a, b]],
            )?;
            lines.push(format!(
                "no-signaling: {} comparisons, max shift {} ({} stderr), {}",
                r.comparisons,
                r.max_shift,
                r.max_z,
                if r.passed { "ok" } else { "FAILED" }
            ));
            r.passed
        }
        Err(EprError::NoComparableSettings) => {
            bundle.csv(
                "no_signaling.csv",
                &["comparisons", "max_shift", "max_z", "passed", "worst_wing", "worst_setting_a", "worst_setting_b"],
                [vec![cell(0), String::new(), String::new(), cell(true), String::new(), String::new(), String::new()]],
            )?;
            lines.push("no-signaling: no settings share an axis".into());
            true
        }
        Err(e) => return Err(epr_error(e)),
    };
    let f = passive_factorization_test(stats);
    let w = f.witness.map(|(s, src, a, b)| {
        vec![num(s.mu_deg()), num(s.nu_deg()), cell(src.label()), spin_cell(a), spin_cell(b)]
    });
    let mut row = vec![num(f.max_gap)];
    row.extend(w.unwrap_or_else(|| vec![String::new(); 5]));
    bundle.csv(
        "factorization.csv",
        &["max_gap", "mu_deg", "nu_deg", "source", "out1", "out2"],
        [row],
    )?;
    lines.push(format!("passive factorization gap: {}", f.max_gap));
    Ok((passed, lines))
}

/// Equal-axis anticorrelation must be exact when the detectors share the
/// Brownian value. Returns the smallest fraction seen, if any setting has
/// equal axes.
fn equal_axis_anticorrelation(stats: &RunStats) -> Option<f64> {
    stats
        .settings
        .iter()
        .filter(|(s, _)| s.is_equal_axis())
        .map(|(_, c)| c.anticorrelation_fraction())
        .reduce(f64::min)
}

fn epr(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let seed = cfg.seed()?;
    let e = &cfg.epr;
    let settings = settings_from(&e.settings, &e.chsh_angles)?;
    let pc = e.flight.pair_config(e.pairs, seed, e.measurement_model, false);
    let stats = run_epr_settings(&pc, &settings, EXEC).map_err(epr_error)?;

    let bundle = Bundle::create(out, cfg)?;
    write_counts(&bundle, &stats)?;
    write_correlations(&bundle, &stats)?;
    let mut lines = Vec::new();
    if let &[a, ap, b, bp] = e.chsh_angles.as_slice() {
        let s = chsh_estimate(&stats, a, ap, b, bp).map_err(epr_error)?;
        bundle.csv(
            "chsh.csv",
            &["mu_deg", "mu_prime_deg", "nu_deg", "nu_prime_deg", "s_hat", "stderr"],
            [vec![num(a), num(ap), num(b), num(bp), num(s.value), num(s.stderr)]],
        )?;
        lines.push(format!("CHSH at ({a}, {ap}, {b}, {bp}): {} ± {}", s.value, s.stderr));
    }
    let (no_signaling, more) = write_locality_reports(&bundle, &stats)?;
    lines.extend(more);
    let mut ok = no_signaling;
    if let Some(anti) = equal_axis_anticorrelation(&stats) {
        lines.push(format!("equal-axis anticorrelation: {anti}"));
        if e.measurement_model == MeasurementModel::SharedStreamThreshold && anti != 1.0 {
            ok = false;
        }
    }

    if e.record_trajectories {
        let pc = PairConfig { record_trajectories: true, ..pc };
        let assignments: Vec<SettingPair> = (0..pc.pairs).map(|j| settings[j % settings.len()]).collect();
        let run = run_epr(&pc, &assignments, EXEC).map_err(epr_error)?;
        bundle.csv(
            "records.csv",
            &["pair", "mu_deg", "nu_deg", "source", "out1", "out2"],
            run.records.iter().map(|r| {
                vec![
                    cell(r.pair),
                    num(r.setting.mu_deg()),
                    num(r.setting.nu_deg()),
                    cell(r.source.label()),
                    spin_cell(r.out1),
                    spin_cell(r.out2),
                ]
            }),
        )?;
        bundle.csv(
            "spin_trajectories.csv",
            &["pair", "wing", "initial", "flip_steps"],
            run.spin_trajectories.iter().map(|r| {
                let flips: Vec<String> = r.flip_steps.iter().map(u64::to_string).collect();
                vec![cell(r.pair), cell(r.wing), spin_cell(r.initial), flips.join(";")]
            }),
        )?;
        for (i, log) in run.swap_logs.iter().enumerate() {
            let name = format!("swap_log_wing{}.csv", i + 1);
            write_swap_log(log, bundle.writer(&name)?)
                .map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        }
    }
    Ok(Report { invariants_hold: ok, lines })
}

fn swap(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let seed = cfg.seed()?;
    let s = &cfg.swap;
    let alpha = s.seed_alpha.unwrap_or(seed);
    let beta = s.seed_beta.unwrap_or(seed);
    let settings = settings_from(&s.settings, &[])?;
    let pc = s.flight.pair_config(s.pairs, seed, s.measurement_model, false);
    let mut stats = RunStats::default();
    for setting in &settings {
        let run = entanglement_swap_scenario(&pc, &vec![*setting; pc.pairs], alpha, beta, EXEC)
            .map_err(epr_error)?;
        stats.merge(&run.stats);
    }

    let bundle = Bundle::create(out, cfg)?;
    write_counts(&bundle, &stats)?;
    write_correlations(&bundle, &stats)?;
    let anti = equal_axis_anticorrelation(&stats);
    let common_past = alpha == beta;
    bundle.csv(
        "summary.csv",
        &["seed_alpha", "seed_beta", "common_past", "equal_axis_anticorrelation"],
        [vec![cell(alpha), cell(beta), cell(common_past), anti.map(num).unwrap_or_default()]],
    )?;
    let ok = !(common_past
        && s.measurement_model == MeasurementModel::SharedStreamThreshold
        && anti.is_some_and(|a| a != 1.0));
    Ok(Report {
        invariants_hold: ok,
        lines: vec![format!(
            "sources {alpha} and {beta} ({}): equal-axis anticorrelation {}",
            if common_past { "common past" } else { "independent" },
            anti.map(num).unwrap_or_else(|| "n/a".into())
        )],
    })
}

fn density(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let seed = cfg.seed()?;
    let pc = ensemble_lab::packet::PacketConfig { seed, ..cfg.density.clone() };
    let run = run_packet(&pc, EXEC).map_err(CliError::config)?;
    let r = run.report;
    let flagged = r.ks_distance >= DENSITY_KS_WARNING;

    let bundle = Bundle::create(out, cfg)?;
    bundle.csv(
        "summary.csv",
        &[
            "trajectories", "t_final", "steps", "ensemble_mean", "ensemble_variance", "oracle_mean",
            "oracle_variance", "free_variance", "refined_oracle_variance", "variance_rel_error",
            "refinement_rel_change", "ks_distance", "l1_distance", "ks_warning",
        ],
        [vec![
            cell(pc.trajectories),
            num(r.t_final),
            cell(r.steps),
            num(r.ensemble_mean),
            num(r.ensemble_variance),
            num(r.oracle_mean),
            num(r.oracle_variance),
            num(r.free_variance),
            num(r.refined_oracle_variance),
            num(r.variance_rel_error()),
            num(r.refinement_rel_change()),
            num(r.ks_distance),
            num(r.l1_distance),
            cell(flagged),
        ]],
    )?;
    let h = &run.histogram;
    bundle.csv(
        "histogram.csv",
        &["x_left", "x_right", "density"],
        h.density.iter().enumerate().map(|(i, d)| {
            let a = h.x_min + i as f64 * h.width;
            vec![num(a), num(a + h.width), num(*d)]
        }),
    )?;
    let io = |name: &str, e: &dyn std::fmt::Display| CliError::Output(format!("{name}: {e}"));
    write_wavefunction(&run.psi, bundle.writer("wavefunction.csv")?).map_err(|e| io("wavefunction.csv", &e))?;
    write_snapshot(&run.state, bundle.writer("snapshot.csv")?).map_err(|e| io("snapshot.csv", &e))?;
    write_diagnostics(&run.diagnostics, bundle.writer("diagnostics.csv")?).map_err(|e| io("diagnostics.csv", &e))?;

    let mut lines = vec![
        format!("KS distance to the oracle: {}", r.ks_distance),
        format!(
            "variance: ensemble {}, oracle {}, free-packet formula {}",
            r.ensemble_variance, r.oracle_variance, r.free_variance
        ),
    ];
    if flagged {
        lines.push(format!("warning: KS distance is at least {DENSITY_KS_WARNING}"));
    }
    Ok(Report { invariants_hold: true, lines })
}

fn disturbance(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let seed = cfg.seed()?;
    let d = &cfg.disturbance;
    let pc = d.flight.pair_config(d.pairs, seed, d.measurement_model, false);
    let hw = velocity_half_width(&pc.physics);
    let magnitudes: Vec<f64> = d.relative_magnitudes.iter().map(|r| r * hw).collect();
    let spec = DisturbanceSpec { magnitude: 0.0, target_wing: d.target_wing, law: d.law };
    let rows = disturbance_sweep(&pc, &spec, &magnitudes, EXEC).map_err(epr_error)?;

    let bundle = Bundle::create(out, cfg)?;
    bundle.csv(
        "disturbance.csv",
        &[
            "magnitude", "relative_to_half_width", "efficiency", "efficiency_drop", "swaps",
            "near_threshold_swaps", "altered_fraction", "violates_smallness",
        ],
        rows.iter().map(|r| {
            vec![
                num(r.magnitude),
                num(r.relative_to_half_width),
                num(r.efficiency),
                num(r.efficiency_drop),
                cell(r.swaps),
                cell(r.near_threshold_swaps),
                num(r.altered_fraction),
                cell(r.violates_smallness),
            ]
        }),
    )?;
    let ok = d.measurement_model != MeasurementModel::SharedStreamThreshold || rows[0].efficiency == 1.0;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "|δ| = {} half-widths: efficiency {}, altered fraction {}{}",
                r.relative_to_half_width,
                r.efficiency,
                r.altered_fraction,
                if r.violates_smallness { " (not small)" } else { "" }
            )
        })
        .collect();
    Ok(Report { invariants_hold: ok, lines })
}
