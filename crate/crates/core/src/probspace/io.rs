//! Text form of a [`SettingIndexedModel`].
//!
//! ```toml
//! source_weights = [0.5, 0.5]
//!
//! [[settings]]
//! mu_deg = 0.0
//! nu_deg = 90.0
//! # (cell, out1, out2) row-major, 0 = up: S1↑↑ S1↑↓ S1↓↑ S1↓↓ S2↑↑ ...
//! table = [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125]
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a document and
//! writing it back reproduces every value bit for bit.

use serde::{Deserialize, Serialize};

use super::model::{JointTable, SettingIndexedModel, SettingPair};
use super::ProbError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub source_weights: Vec<f64>,
    pub settings: Vec<SettingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingEntry {
    pub mu_deg: f64,
    pub nu_deg: f64,
    pub table: Vec<f64>,
}

impl ModelDocument {
    pub fn from_model(model: &SettingIndexedModel) -> Self {
        Self {
            source_weights: model.source_weights().to_vec(),
            settings: model
                .entries()
                .iter()
                .map(|(s, t)| SettingEntry {
                    mu_deg: s.mu_deg(),
                    nu_deg: s.nu_deg(),
                    table: t.to_flat(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<SettingIndexedModel, ProbError> {
        let entries = self
            .settings
            .iter()
            .map(|e| {
                let s = SettingPair::from_degrees(e.mu_deg, e.nu_deg);
                let t = JointTable::from_flat(&e.table).ok_or_else(|| ProbError::InvalidTable {
                    mu_deg: s.mu_deg(),
                    nu_deg: s.nu_deg(),
                    reason: format!("{} entries is not a positive multiple of 4", e.table.len()),
                })?;
                Ok((s, t))
            })
            .collect::<Result<Vec<_>, ProbError>>()?;
        SettingIndexedModel::new(self.source_weights.clone(), entries)
    }

    pub fn from_toml(text: &str) -> Result<Self, ProbError> {
        toml::from_str(text).map_err(|e| ProbError::Document(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain numeric document serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::build_quantum_epr_model;
    use proptest::prelude::*;

    #[test]
    fn quantum_model_round_trips() {
        let settings: Vec<_> = [(0.0, 45.0), (90.0, 315.0), (0.0, 0.0)]
            .iter()
            .map(|&(a, b)| SettingPair::from_degrees(a, b))
            .collect();
        let m = build_quantum_epr_model(&settings).unwrap();
        let text = ModelDocument::from_model(&m).to_toml();
        let back = ModelDocument::from_toml(&text).unwrap().to_model().unwrap();
        assert_eq!(back, m);
        assert_eq!(ModelDocument::from_model(&back).to_toml(), text);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(matches!(ModelDocument::from_toml("source_weights = 3"), Err(ProbError::Document(_))));
        let doc = ModelDocument::from_toml(
            "source_weights = [1.0]\n[[settings]]\nmu_deg = 0.0\nnu_deg = 0.0\ntable = [0.5, 0.5]\n",
        )
        .unwrap();
        assert!(matches!(doc.to_model(), Err(ProbError::InvalidTable { .. })));
    }

    fn decimal() -> impl Strategy<Value = f64> {
        // Decimal fractions with up to 12 significant digits.
        (0i64..1_000_000_000_000, 0i32..12).prop_map(|(m, e)| m as f64 / 10f64.powi(e))
    }

    proptest! {
        #[test]
        fn decimal_values_survive_text(values in prop::collection::vec(decimal(), 1..20),
                                       mu in decimal(), nu in decimal()) {
            let doc = ModelDocument {
                source_weights: values.clone(),
                settings: vec![SettingEntry { mu_deg: mu, nu_deg: nu, table: values }],
            };
            let back = ModelDocument::from_toml(&doc.to_toml()).unwrap();
            for (a, b) in back.source_weights.iter().zip(&doc.source_weights) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back.settings[0].mu_deg.to_bits(), mu.to_bits());
            prop_assert_eq!(back.settings[0].nu_deg.to_bits(), nu.to_bits());
            prop_assert_eq!(back, doc);
        }
    }
}
