//! Finite probability spaces with partition-generated sigma-algebras.
//!
//! Everything here is exhaustively checkable: outcomes are indices, events are
//! membership masks and a sigma-algebra is given by the partition generating
//! it. On top of that sit the setting-indexed detector models
//! ([`SettingIndexedModel`]), the locality predicates and the Bell functionals.

mod battery;
mod bell;
mod io;
mod locality;
mod model;

pub use battery::{lemma_battery, random_passively_local_model, BatteryReport};
pub use bell::{
    bell_original, chsh, conditional_chsh_bound_scan, conditional_correlation,
    correlation_coefficient, ScanResult,
};
pub use io::{ModelDocument, SettingEntry};
pub use locality::{
    deterministic_passive_locality_check, is_actively_local, is_passively_local,
    DeterminismReport, DeterminismWitness, LocalityReport, LocalityWitness,
};
pub use model::{build_quantum_epr_model, JointTable, SettingIndexedModel, SettingPair};

use thiserror::Error;

/// Tolerance for identities that hold exactly in rational arithmetic.
pub const EQ_TOL: f64 = 1e-12;
/// Tolerance for the {0, 1}-valuedness check in the determinism lemma.
pub const LEMMA_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("probability space has no outcomes")]
    EmptySpace,
    #[error("weight {value} of outcome {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("outcome {outcome} is outside a space of {size} outcomes")]
    OutcomeOutOfRange { outcome: usize, size: usize },
    #[error("outcome {outcome} appears in more than one partition cell")]
    PartitionOverlap { outcome: usize },
    #[error("outcome {outcome} is not covered by the partition")]
    PartitionIncomplete { outcome: usize },
    #[error("partition cell {cell} has zero probability")]
    ZeroProbabilityCell { cell: usize },
    #[error("setting ({mu_deg}°, {nu_deg}°) is not part of the model")]
    SettingNotPresent { mu_deg: f64, nu_deg: f64 },
    #[error("setting ({mu_deg}°, {nu_deg}°) appears twice")]
    DuplicateSetting { mu_deg: f64, nu_deg: f64 },
    #[error("model declares no settings")]
    NoSettings,
    #[error("table for ({mu_deg}°, {nu_deg}°) is invalid: {reason}")]
    InvalidTable {
        mu_deg: f64,
        nu_deg: f64,
        reason: String,
    },
    #[error("grid step {step} must lie in (0, 0.5]")]
    InvalidGridStep { step: f64 },
    #[error("model has no equal-axis setting")]
    NoEqualAxisSetting,
    #[error("equal-axis equivalence fails at {mu_deg}° (deviation {deviation:e})")]
    EquivalenceViolated { mu_deg: f64, deviation: f64 },
    #[error("model is not passively local (deviation {deviation:e})")]
    NotPassivelyLocal { deviation: f64 },
    #[error("model document: {0}")]
    Document(String),
}

/// A finite outcome set with one nonnegative weight per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProbSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl FiniteProbSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self, ProbError> {
        let labels = (0..weights.len()).map(|i| format!("w{i}")).collect();
        Self::with_labels(labels, weights)
    }

    pub fn with_labels(labels: Vec<String>, weights: Vec<f64>) -> Result<Self, ProbError> {
        if weights.is_empty() {
            return Err(ProbError::EmptySpace);
        }
        assert_eq!(labels.len(), weights.len(), "one label per outcome");
        for (index, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ProbError::InvalidWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > EQ_TOL {
            return Err(ProbError::NotNormalized { sum });
        }
        Ok(Self { labels, weights })
    }

    /// Equal weights over `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self, ProbError> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probability(&self, event: &Event) -> f64 {
        event.outcomes().map(|i| self.weights[i]).sum()
    }
}

/// A subset of the outcomes of a finite space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    members: Vec<bool>,
}

impl Event {
    pub fn from_outcomes(size: usize, outcomes: &[usize]) -> Result<Self, ProbError> {
        let mut members = vec![false; size];
        for &o in outcomes {
            if o >= size {
                return Err(ProbError::OutcomeOutOfRange { outcome: o, size });
            }
            members[o] = true;
        }
        Ok(Self { members })
    }

    pub fn from_predicate(size: usize, f: impl Fn(usize) -> bool) -> Self {
        Self {
            members: (0..size).map(f).collect(),
        }
    }

    pub fn all(size: usize) -> Self {
        Self {
            members: vec![true; size],
        }
    }

    pub fn empty(size: usize) -> Self {
        Self {
            members: vec![false; size],
        }
    }

    pub fn contains(&self, outcome: usize) -> bool {
        self.members.get(outcome).copied().unwrap_or(false)
    }

    pub fn outcomes(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn intersection(&self, other: &Event) -> Event {
        Event {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn union(&self, other: &Event) -> Event {
        Event {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }
}

/// Disjoint cells covering every outcome; generates a finite sigma-algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
    allow_degenerate: bool,
}

impl Partition {
    pub fn new(size: usize, cells: Vec<Vec<usize>>) -> Result<Self, ProbError> {
        let mut cell_of = vec![usize::MAX; size];
        for (c, cell) in cells.iter().enumerate() {
            for &o in cell {
                if o >= size {
                    return Err(ProbError::OutcomeOutOfRange { outcome: o, size });
                }
                if cell_of[o] != usize::MAX {
                    return Err(ProbError::PartitionOverlap { outcome: o });
                }
                cell_of[o] = c;
            }
        }
        if let Some(o) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(ProbError::PartitionIncomplete { outcome: o });
        }
        Ok(Self {
            cells,
            cell_of,
            allow_degenerate: false,
        })
    }

    /// Marks zero-probability cells as acceptable. Conditioning on them still
    /// fails; only validation against a space tolerates them.
    pub fn degenerate(mut self) -> Self {
        self.allow_degenerate = true;
        self
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, outcome: usize) -> usize {
        self.cell_of[outcome]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_event(&self, cell: usize) -> Event {
        Event::from_predicate(self.cell_of.len(), |o| self.cell_of[o] == cell)
    }

    /// Checks the partition against a space: matching size, and positive cell
    /// probabilities unless flagged degenerate.
    pub fn validate_for(&self, space: &FiniteProbSpace) -> Result<(), ProbError> {
        if self.cell_of.len() != space.len() {
            return Err(ProbError::OutcomeOutOfRange {
                outcome: self.cell_of.len().max(space.len()) - 1,
                size: self.cell_of.len().min(space.len()),
            });
        }
        if !self.allow_degenerate {
            for c in 0..self.num_cells() {
                if space.probability(&self.cell_event(c)) <= 0.0 {
                    return Err(ProbError::ZeroProbabilityCell { cell: c });
                }
            }
        }
        Ok(())
    }
}

/// `P(A | F)` for a partition-generated `F`: a random variable, one value per
/// outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalRV {
    values: Vec<f64>,
}

impl ConditionalRV {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, outcome: usize) -> f64 {
        self.values[outcome]
    }

    /// `E[P(A|F)]`, which must equal `P(A)`.
    pub fn expectation(&self, space: &FiniteProbSpace) -> f64 {
        self.values
            .iter()
            .zip(space.weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Whether the variable is constant on every cell of `partition`.
    pub fn is_measurable(&self, partition: &Partition, tol: f64) -> bool {
        partition.cells().iter().all(|cell| {
            let first = cell.first().map(|&o| self.values[o]);
            cell.iter()
                .all(|&o| (self.values[o] - first.unwrap_or(0.0)).abs() <= tol)
        })
    }
}

/// Conditional probability of `event` given the sigma-algebra generated by
/// `partition`: on each cell it is `P(event ∩ cell) / P(cell)`.
pub fn conditional_probability(
    space: &FiniteProbSpace,
    event: &Event,
    partition: &Partition,
) -> Result<ConditionalRV, ProbError> {
    if partition.cell_of.len() != space.len() {
        return Err(ProbError::OutcomeOutOfRange {
            outcome: partition.cell_of.len(),
            size: space.len(),
        });
    }
    let mut per_cell = Vec::with_capacity(partition.num_cells());
    for c in 0..partition.num_cells() {
        let cell = partition.cell_event(c);
        let p_cell = space.probability(&cell);
        if p_cell <= 0.0 {
            return Err(ProbError::ZeroProbabilityCell { cell: c });
        }
        per_cell.push(space.probability(&event.intersection(&cell)) / p_cell);
    }
    Ok(ConditionalRV {
        values: (0..space.len())
            .map(|o| per_cell[partition.cell_of(o)])
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abcd() -> (FiniteProbSpace, Partition) {
        let space = FiniteProbSpace::uniform(4).unwrap();
        let part = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        (space, part)
    }

    #[test]
    fn sure_and_impossible_events() {
        let (space, part) = abcd();
        let sure = conditional_probability(&space, &Event::all(4), &part).unwrap();
        assert!(sure.values().iter().all(|&v| v == 1.0));
        let none = conditional_probability(&space, &Event::empty(4), &part).unwrap();
        assert!(none.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ratio_on_cells() {
        let (space, part) = abcd();
        let a = Event::from_outcomes(4, &[0]).unwrap();
        let rv = conditional_probability(&space, &a, &part).unwrap();
        assert_eq!(rv.values(), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn zero_cell_is_named() {
        let space = FiniteProbSpace::new(vec![0.5, 0.5, 0.0]).unwrap();
        let part = Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let err = conditional_probability(&space, &Event::all(3), &part).unwrap_err();
        assert_eq!(err, ProbError::ZeroProbabilityCell { cell: 1 });
        assert!(part.validate_for(&space).is_err());
        assert!(part.clone().degenerate().validate_for(&space).is_ok());
    }

    #[test]
    fn invalid_spaces_and_partitions() {
        assert!(matches!(
            FiniteProbSpace::new(vec![0.5, -0.1, 0.6]),
            Err(ProbError::InvalidWeight { index: 1, .. })
        ));
        assert!(matches!(
            FiniteProbSpace::new(vec![0.5, 0.4]),
            Err(ProbError::NotNormalized { .. })
        ));
        assert_eq!(
            Partition::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap_err(),
            ProbError::PartitionOverlap { outcome: 1 }
        );
        assert_eq!(
            Partition::new(3, vec![vec![0, 1]]).unwrap_err(),
            ProbError::PartitionIncomplete { outcome: 2 }
        );
    }

    fn arb_setup() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, Vec<bool>, Vec<bool>)> {
        (2usize..10).prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..1.0, n),
                prop::collection::vec(0usize..3, n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        /// Measurability, bounds, additivity over disjoint events, the
        /// expectation identity and the intersection rule for an event already
        /// in the sigma-algebra.
        #[test]
        fn conditional_probability_properties((raw, labels, a, b) in arb_setup()) {
            let n = raw.len();
            let total: f64 = raw.iter().sum();
            let space = FiniteProbSpace::new(raw.iter().map(|w| w / total).collect()).unwrap();
            let mut cells: Vec<Vec<usize>> = vec![Vec::new(); 3];
            for (o, &c) in labels.iter().enumerate() { cells[c].push(o); }
            cells.retain(|c| !c.is_empty());
            let part = Partition::new(n, cells).unwrap();

            let ea = Event::from_predicate(n, |o| a[o]);
            let eb = Event::from_predicate(n, |o| b[o] && !a[o]);
            let pa = conditional_probability(&space, &ea, &part).unwrap();
            let pb = conditional_probability(&space, &eb, &part).unwrap();
            let pab = conditional_probability(&space, &ea.union(&eb), &part).unwrap();

            prop_assert!(pa.is_measurable(&part, 0.0));
            prop_assert!(pa.values().iter().all(|&v| (0.0..=1.0 + 1e-15).contains(&v)));
            for o in 0..n {
                prop_assert!((pab.value(o) - pa.value(o) - pb.value(o)).abs() < 1e-12);
            }
            prop_assert!((pa.expectation(&space) - space.probability(&ea)).abs() < 1e-12);

            let cell0 = part.cell_event(0);
            let both = conditional_probability(&space, &ea.intersection(&cell0), &part).unwrap();
            for o in 0..n {
                let indicator = if cell0.contains(o) { 1.0 } else { 0.0 };
                prop_assert!((both.value(o) - indicator * pa.value(o)).abs() < 1e-12);
            }
        }
    }
}
