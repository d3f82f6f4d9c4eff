use super::model::{SettingIndexedModel, SettingPair};
use super::{ProbError, EQ_TOL, LEMMA_TOL};
use crate::spin::Spin;

const SPINS: [Spin; 2] = [Spin::Up, Spin::Down];

/// Where a locality predicate is violated the most.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityWitness {
    pub setting: SettingPair,
    /// The setting compared against, for checks across settings.
    pub compared_with: Option<SettingPair>,
    /// Source cell, for conditional checks.
    pub cell: Option<usize>,
    /// Detector outcomes involved; `None` where a wing plays no part.
    pub out1: Option<Spin>,
    pub out2: Option<Spin>,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub ok: bool,
    pub max_deviation: f64,
    /// Number of elementary comparisons made.
    pub comparisons: usize,
    pub witness: Option<LocalityWitness>,
}

impl LocalityReport {
    fn new() -> Self {
        Self {
            ok: true,
            max_deviation: 0.0,
            comparisons: 0,
            witness: None,
        }
    }

    fn record(&mut self, w: LocalityWitness) {
        self.comparisons += 1;
        if self.witness.is_none() || w.deviation > self.max_deviation {
            self.max_deviation = w.deviation;
            self.witness = Some(w);
        }
    }

    fn finish(mut self, tol: f64) -> Self {
        self.ok = self.max_deviation <= tol;
        self
    }
}

/// Checks that each detector's outcome distribution ignores the far axis.
///
/// For every two settings sharing wing 1's axis the wing-1 marginals must
/// agree within `tol`, both unconditionally and conditioned on each source
/// cell; likewise for wing 2. A model with no two settings sharing an axis
/// passes vacuously with `comparisons == 0`.
pub fn is_actively_local(model: &SettingIndexedModel, tol: f64) -> LocalityReport {
    let mut report = LocalityReport::new();
    let entries = model.entries();
    for (i, (s, t)) in entries.iter().enumerate() {
        for (s2, t2) in &entries[i + 1..] {
            for wing in [1u8, 2] {
                if s.local_deg(wing) != s2.local_deg(wing) {
                    continue;
                }
                for spin in SPINS {
                    let (out1, out2) = if wing == 1 {
                        (Some(spin), None)
                    } else {
                        (None, Some(spin))
                    };
                    report.record(LocalityWitness {
                        setting: *s,
                        compared_with: Some(*s2),
                        cell: None,
                        out1,
                        out2,
                        deviation: (t.marginal(wing, spin) - t2.marginal(wing, spin)).abs(),
                    });
                    for (c, &w) in model.source_weights().iter().enumerate() {
                        let a = t.cell_marginal(c, wing, spin) / w;
                        let b = t2.cell_marginal(c, wing, spin) / w;
                        report.record(LocalityWitness {
                            setting: *s,
                            compared_with: Some(*s2),
                            cell: Some(c),
                            out1,
                            out2,
                            deviation: (a - b).abs(),
                        });
                    }
                }
            }
        }
    }
    report.finish(tol)
}

/// Checks that, given the source cell, the two detector outcomes are
/// independent: `P(σ₁ ∩ σ₂ | cell) = P(σ₁ | cell)·P(σ₂ | cell)`.
pub fn is_passively_local(model: &SettingIndexedModel, tol: f64) -> LocalityReport {
    let mut report = LocalityReport::new();
    for (s, t) in model.entries() {
        for (c, &w) in model.source_weights().iter().enumerate() {
            for a in SPINS {
                for b in SPINS {
                    let joint = t.get(c, a, b) / w;
                    let product =
                        (t.cell_marginal(c, 1, a) / w) * (t.cell_marginal(c, 2, b) / w);
                    report.record(LocalityWitness {
                        setting: *s,
                        compared_with: None,
                        cell: Some(c),
                        out1: Some(a),
                        out2: Some(b),
                        deviation: (joint - product).abs(),
                    });
                }
            }
        }
    }
    report.finish(tol)
}

/// For one equal-axis setting: the source cells on which wing 1 certainly
/// reads ↑. Their union is the source event equivalent to `{out1 = ↑}` (and to
/// `{out2 = ↓}`).
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminismWitness {
    pub setting: SettingPair,
    pub up_cells: Vec<usize>,
    /// `P(out1 = ↑ | cell)` for every cell.
    pub conditionals: Vec<f64>,
}

impl DeterminismWitness {
    /// Whether `{out1 = ↑}` coincides with the union of `up_cells` up to
    /// `tol`: conditionals near 1 on those cells and near 0 elsewhere.
    pub fn is_equivalent(&self, tol: f64) -> bool {
        self.conditionals.iter().enumerate().all(|(c, &p)| {
            let target = if self.up_cells.contains(&c) { 1.0 } else { 0.0 };
            (p - target).abs() <= tol
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminismReport {
    pub is_deterministic: bool,
    /// Largest distance of an equal-axis conditional from {0, 1}.
    pub max_indicator_distance: f64,
    pub witnesses: Vec<DeterminismWitness>,
}

/// Checks that perfect equal-axis anticorrelation plus passive locality forces
/// every equal-axis detector conditional to be 0 or 1.
///
/// Errors when the model has no equal-axis setting, when an equal-axis setting
/// is not perfectly anticorrelated, or when the model is not passively local.
pub fn deterministic_passive_locality_check(
    model: &SettingIndexedModel,
) -> Result<DeterminismReport, ProbError> {
    let equal: Vec<_> = model
        .entries()
        .iter()
        .filter(|(s, _)| s.is_equal_axis())
        .collect();
    if equal.is_empty() {
        return Err(ProbError::NoEqualAxisSetting);
    }
    for (s, t) in &equal {
        let deviation = t
            .joint(Spin::Up, Spin::Up)
            .max(t.joint(Spin::Down, Spin::Down))
            .max((t.marginal(1, Spin::Up) - t.marginal(2, Spin::Down)).abs());
        if deviation > EQ_TOL {
            return Err(ProbError::EquivalenceViolated {
                mu_deg: s.mu_deg(),
                deviation,
            });
        }
    }
    let passive = is_passively_local(model, EQ_TOL);
    if !passive.ok {
        return Err(ProbError::NotPassivelyLocal {
            deviation: passive.max_deviation,
        });
    }

    let mut max_indicator_distance: f64 = 0.0;
    let mut witnesses = Vec::with_capacity(equal.len());
    for (s, t) in equal {
        let mut up_cells = Vec::new();
        let mut conditionals = Vec::with_capacity(model.num_cells());
        for (c, &w) in model.source_weights().iter().enumerate() {
            for wing in [1u8, 2] {
                let p = t.cell_marginal(c, wing, Spin::Up) / w;
                max_indicator_distance = max_indicator_distance.max(p.min(1.0 - p).abs());
            }
            let p1 = t.cell_marginal(c, 1, Spin::Up) / w;
            if p1 > 0.5 {
                up_cells.push(c);
            }
            conditionals.push(p1);
        }
        witnesses.push(DeterminismWitness {
            setting: *s,
            up_cells,
            conditionals,
        });
    }
    Ok(DeterminismReport {
        is_deterministic: max_indicator_distance <= LEMMA_TOL,
        max_indicator_distance,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::{
        build_quantum_epr_model, conditional_probability, JointTable, SettingIndexedModel,
    };
    use approx::assert_abs_diff_eq;

    fn product_cell(w: f64, p: f64, q: f64) -> [[f64; 2]; 2] {
        [
            [w * p * q, w * p * (1.0 - q)],
            [w * (1.0 - p) * q, w * (1.0 - p) * (1.0 - q)],
        ]
    }

    fn deterministic_model() -> SettingIndexedModel {
        // Cell 0 carries ↑ to wing 1 and ↓ to wing 2, cell 1 the reverse.
        let s = SettingPair::from_degrees(0.0, 0.0);
        let t = JointTable::new(vec![product_cell(0.5, 1.0, 0.0), product_cell(0.5, 0.0, 1.0)]);
        SettingIndexedModel::new(vec![0.5, 0.5], vec![(s, t)]).unwrap()
    }

    #[test]
    fn marginal_shift_is_detected() {
        let s = SettingPair::from_degrees(0.0, 0.0);
        let s2 = SettingPair::from_degrees(0.0, 90.0);
        let t = JointTable::new(vec![product_cell(1.0, 0.6, 0.5)]);
        let t2 = JointTable::new(vec![product_cell(1.0, 0.4, 0.5)]);
        let m = SettingIndexedModel::new(vec![1.0], vec![(s, t), (s2, t2)]).unwrap();
        let r = is_actively_local(&m, EQ_TOL);
        assert!(!r.ok);
        assert_abs_diff_eq!(r.max_deviation, 0.2, epsilon = 1e-12);
        let w = r.witness.unwrap();
        assert!(w.out1.is_some() && w.out2.is_none());
        assert!(is_passively_local(&m, EQ_TOL).ok);
    }

    #[test]
    fn quantum_model_is_actively_but_not_passively_local() {
        let settings: Vec<_> = [(0.0, 0.0), (0.0, 45.0), (90.0, 45.0), (90.0, 0.0)]
            .iter()
            .map(|&(a, b)| SettingPair::from_degrees(a, b))
            .collect();
        let m = build_quantum_epr_model(&settings).unwrap();
        let active = is_actively_local(&m, EQ_TOL);
        assert!(active.ok, "{active:?}");
        assert!(active.comparisons > 0);

        let only45 = build_quantum_epr_model(&[SettingPair::from_degrees(0.0, 45.0)]).unwrap();
        let r = is_passively_local(&only45, EQ_TOL);
        assert!(!r.ok);
        let expected = 0.5 * (22.5f64.to_radians()).cos().powi(2) - 0.25;
        assert_abs_diff_eq!(r.max_deviation, expected, epsilon = 1e-12);

        let only0 = build_quantum_epr_model(&[SettingPair::from_degrees(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(is_passively_local(&only0, EQ_TOL).max_deviation, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn passive_check_agrees_with_generic_conditioning() {
        let only45 = build_quantum_epr_model(&[SettingPair::from_degrees(0.0, 45.0)]).unwrap();
        let s = SettingPair::from_degrees(0.0, 45.0);
        let space = only45.space(&s).unwrap();
        let part = only45.source_partition();
        let mut worst: f64 = 0.0;
        for a in SPINS {
            for b in SPINS {
                let e1 = only45.detector_event(1, a);
                let e2 = only45.detector_event(2, b);
                let j = conditional_probability(&space, &e1.intersection(&e2), &part).unwrap();
                let p1 = conditional_probability(&space, &e1, &part).unwrap();
                let p2 = conditional_probability(&space, &e2, &part).unwrap();
                for o in 0..space.len() {
                    worst = worst.max((j.value(o) - p1.value(o) * p2.value(o)).abs());
                }
            }
        }
        assert_abs_diff_eq!(worst, is_passively_local(&only45, EQ_TOL).max_deviation, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_model_reports_its_source_event() {
        let r = deterministic_passive_locality_check(&deterministic_model()).unwrap();
        assert!(r.is_deterministic);
        assert_eq!(r.witnesses[0].up_cells, vec![0]);
        assert_eq!(r.max_indicator_distance, 0.0);
    }

    #[test]
    fn quantum_model_fails_the_precondition() {
        let m = build_quantum_epr_model(&[SettingPair::from_degrees(0.0, 0.0)]).unwrap();
        assert!(matches!(
            deterministic_passive_locality_check(&m),
            Err(ProbError::NotPassivelyLocal { .. })
        ));
        let m = build_quantum_epr_model(&[SettingPair::from_degrees(0.0, 30.0)]).unwrap();
        assert_eq!(
            deterministic_passive_locality_check(&m).unwrap_err(),
            ProbError::NoEqualAxisSetting
        );
    }

    #[test]
    fn correlated_equal_axis_fails_equivalence() {
        let s = SettingPair::from_degrees(10.0, 10.0);
        let t = JointTable::new(vec![product_cell(1.0, 0.5, 0.5)]);
        let m = SettingIndexedModel::new(vec![1.0], vec![(s, t)]).unwrap();
        assert!(matches!(
            deterministic_passive_locality_check(&m),
            Err(ProbError::EquivalenceViolated { .. })
        ));
    }
}
