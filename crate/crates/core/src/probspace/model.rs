use std::cmp::Ordering;
use std::fmt;

use super::{Event, FiniteProbSpace, Partition, ProbError, EQ_TOL};
use crate::spin::{quantum_joint_probs, Axis, Spin};

/// Detector axes for the two wings, as planar angles.
///
/// Angles are stored in degrees normalised to `[0, 360)` so that settings read
/// from documents compare and round-trip exactly; [`mu`](Self::mu) and
/// [`nu`](Self::nu) give radians in `[0, 2π)`.
#[derive(Debug, Clone, Copy)]
pub struct SettingPair {
    mu_deg: f64,
    nu_deg: f64,
}

fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    // rem_euclid can round up to the modulus for tiny negative inputs.
    if r >= 360.0 {
        0.0
    } else {
        r + 0.0
    }
}

impl SettingPair {
    pub fn from_degrees(mu_deg: f64, nu_deg: f64) -> Self {
        Self {
            mu_deg: normalize_deg(mu_deg),
            nu_deg: normalize_deg(nu_deg),
        }
    }

    pub fn from_radians(mu: f64, nu: f64) -> Self {
        Self::from_degrees(mu.to_degrees(), nu.to_degrees())
    }

    pub fn mu_deg(&self) -> f64 {
        self.mu_deg
    }

    pub fn nu_deg(&self) -> f64 {
        self.nu_deg
    }

    pub fn mu(&self) -> f64 {
        self.mu_deg.to_radians()
    }

    pub fn nu(&self) -> f64 {
        self.nu_deg.to_radians()
    }

    pub fn is_equal_axis(&self) -> bool {
        self.mu_deg == self.nu_deg
    }

    /// Axis angle of `wing` (1 or 2), in degrees.
    pub fn local_deg(&self, wing: u8) -> f64 {
        if wing == 1 {
            self.mu_deg
        } else {
            self.nu_deg
        }
    }

    fn not_present(&self) -> ProbError {
        ProbError::SettingNotPresent {
            mu_deg: self.mu_deg,
            nu_deg: self.nu_deg,
        }
    }
}

impl PartialEq for SettingPair {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SettingPair {}

impl PartialOrd for SettingPair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SettingPair {
    fn cmp(&self, other: &Self) -> Ordering {
        self.mu_deg
            .total_cmp(&other.mu_deg)
            .then(self.nu_deg.total_cmp(&other.nu_deg))
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}°, {}°)", self.mu_deg, self.nu_deg)
    }
}

/// Joint probabilities `P(source cell ∧ out1 ∧ out2)`, indexed
/// `[cell][out1][out2]` with `0 = ↑`, `1 = ↓`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    cells: Vec<[[f64; 2]; 2]>,
}

impl JointTable {
    pub fn new(cells: Vec<[[f64; 2]; 2]>) -> Self {
        Self { cells }
    }

    /// Builds a table from a flat list in `(cell, out1, out2)` row-major order.
    pub fn from_flat(flat: &[f64]) -> Option<Self> {
        if flat.is_empty() || flat.len() % 4 != 0 {
            return None;
        }
        Some(Self {
            cells: flat
                .chunks(4)
                .map(|c| [[c[0], c[1]], [c[2], c[3]]])
                .collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.cells
            .iter()
            .flat_map(|c| [c[0][0], c[0][1], c[1][0], c[1][1]])
            .collect()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, cell: usize, out1: Spin, out2: Spin) -> f64 {
        self.cells[cell][out1.index()][out2.index()]
    }

    pub fn cell_weight(&self, cell: usize) -> f64 {
        self.cells[cell].iter().flatten().sum()
    }

    /// Unconditional `P(out1, out2)`.
    pub fn joint(&self, out1: Spin, out2: Spin) -> f64 {
        (0..self.num_cells()).map(|c| self.get(c, out1, out2)).sum()
    }

    /// `P(out of wing = s)`; `wing` is 1 or 2.
    pub fn marginal(&self, wing: u8, s: Spin) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell_marginal(c, wing, s))
            .sum()
    }

    /// `P(out of wing = s ∧ cell)`.
    pub fn cell_marginal(&self, cell: usize, wing: u8, s: Spin) -> f64 {
        let t = &self.cells[cell];
        if wing == 1 {
            t[s.index()][0] + t[s.index()][1]
        } else {
            t[0][s.index()] + t[1][s.index()]
        }
    }
}

/// A family of detector-outcome distributions, one per setting pair, sharing
/// a source partition whose distribution does not depend on the setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingIndexedModel {
    source_weights: Vec<f64>,
    entries: Vec<(SettingPair, JointTable)>,
}

impl SettingIndexedModel {
    pub fn new(
        source_weights: Vec<f64>,
        entries: Vec<(SettingPair, JointTable)>,
    ) -> Result<Self, ProbError> {
        if entries.is_empty() {
            return Err(ProbError::NoSettings);
        }
        FiniteProbSpace::new(source_weights.clone())?;
        if let Some(c) = source_weights.iter().position(|&w| w <= 0.0) {
            return Err(ProbError::ZeroProbabilityCell { cell: c });
        }
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ProbError::DuplicateSetting {
                    mu_deg: w[0].0.mu_deg,
                    nu_deg: w[0].0.nu_deg,
                });
            }
        }
        for (s, table) in &entries {
            let invalid = |reason: String| ProbError::InvalidTable {
                mu_deg: s.mu_deg,
                nu_deg: s.nu_deg,
                reason,
            };
            if table.num_cells() != source_weights.len() {
                return Err(invalid(format!(
                    "{} source cells, expected {}",
                    table.num_cells(),
                    source_weights.len()
                )));
            }
            if let Some(p) = table.to_flat().iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(invalid(format!("entry {p} is not a probability")));
            }
            for (c, &w) in source_weights.iter().enumerate() {
                let got = table.cell_weight(c);
                if (got - w).abs() > EQ_TOL {
                    return Err(invalid(format!(
                        "source cell {c} has weight {got}, source declares {w}"
                    )));
                }
            }
        }
        Ok(Self {
            source_weights,
            entries,
        })
    }

    pub fn source_weights(&self) -> &[f64] {
        &self.source_weights
    }

    pub fn num_cells(&self) -> usize {
        self.source_weights.len()
    }

    pub fn settings(&self) -> impl Iterator<Item = SettingPair> + '_ {
        self.entries.iter().map(|(s, _)| *s)
    }

    pub fn entries(&self) -> &[(SettingPair, JointTable)] {
        &self.entries
    }

    pub fn table(&self, s: &SettingPair) -> Result<&JointTable, ProbError> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(s))
            .map(|i| &self.entries[i].1)
            .map_err(|_| s.not_present())
    }

    /// The per-setting probability space over `4 × cells` outcomes, outcome
    /// index `cell·4 + out1·2 + out2`.
    pub fn space(&self, s: &SettingPair) -> Result<FiniteProbSpace, ProbError> {
        let t = self.table(s)?;
        let labels = (0..t.num_cells())
            .flat_map(|c| {
                [Spin::Up, Spin::Down].into_iter().flat_map(move |a| {
                    [Spin::Up, Spin::Down]
                        .into_iter()
                        .map(move |b| format!("S{}:{}{}", c + 1, a.symbol(), b.symbol()))
                })
            })
            .collect();
        FiniteProbSpace::with_labels(labels, t.to_flat())
    }

    /// The partition generated by the source events.
    pub fn source_partition(&self) -> Partition {
        let cells = (0..self.num_cells())
            .map(|c| (c * 4..c * 4 + 4).collect())
            .collect();
        Partition::new(self.num_cells() * 4, cells).expect("cells tile the space")
    }

    /// The detector event `{out of wing = s}` in the per-setting space.
    pub fn detector_event(&self, wing: u8, s: Spin) -> Event {
        Event::from_predicate(self.num_cells() * 4, |o| {
            let bit = if wing == 1 { (o >> 1) & 1 } else { o & 1 };
            bit == s.index()
        })
    }
}

/// The singlet statistics for each requested setting pair, attached to a
/// two-cell source partition of weight ½ each.
///
/// Tables come from [`quantum_joint_probs`] evaluated on axes in the x–z plane.
pub fn build_quantum_epr_model(
    settings: &[SettingPair],
) -> Result<SettingIndexedModel, ProbError> {
    if settings.is_empty() {
        return Err(ProbError::NoSettings);
    }
    let mut unique: Vec<SettingPair> = settings.to_vec();
    unique.sort();
    unique.dedup();
    let entries = unique
        .into_iter()
        .map(|s| {
            let joint = quantum_joint_probs(&Axis::in_xz_plane(s.mu()), &Axis::in_xz_plane(s.nu()));
            let half = joint.map(|row| row.map(|p| 0.5 * p));
            (s, JointTable::new(vec![half, half]))
        })
        .collect();
    SettingIndexedModel::new(vec![0.5, 0.5], entries)
}
