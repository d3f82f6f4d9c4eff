use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::locality::{deterministic_passive_locality_check, DeterminismReport};
use super::model::{JointTable, SettingIndexedModel, SettingPair};
use super::{EQ_TOL, LEMMA_TOL};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, domain};
use crate::spin::Spin;

/// A per-cell `P(↑)`: 0 or 1 with probability 0.45 each, otherwise uniform.
fn draw_conditional<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u < 0.45 {
        0.0
    } else if u < 0.9 {
        1.0
    } else {
        rng.random()
    }
}

fn product_cell(w: f64, p: f64, q: f64) -> [[f64; 2]; 2] {
    [
        [w * p * q, w * p * (1.0 - q)],
        [w * (1.0 - p) * q, w * (1.0 - p) * (1.0 - q)],
    ]
}

/// Draws one candidate model whose tables factorise per source cell.
///
/// Returns `None` when an equal-axis setting is not perfectly anticorrelated.
/// Nothing in the sampler forces the per-cell conditionals to be 0 or 1; the
/// anticorrelation requirement alone selects them.
fn candidate<R: Rng>(rng: &mut R) -> Option<SettingIndexedModel> {
    let cells = rng.random_range(1..=4usize);
    let raw: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // Put the rounding residue on the last cell so the weights sum to 1.
    let head: f64 = weights[..cells - 1].iter().sum();
    weights[cells - 1] = 1.0 - head;

    let mut settings = vec![SettingPair::from_degrees(15.0 * rng.random_range(0..24) as f64, 0.0)];
    let mu = settings[0].mu_deg();
    settings[0] = SettingPair::from_degrees(mu, mu);
    for _ in 0..rng.random_range(0..4) {
        let s = SettingPair::from_degrees(
            15.0 * rng.random_range(0..24) as f64,
            15.0 * rng.random_range(0..24) as f64,
        );
        if !settings.contains(&s) {
            settings.push(s);
        }
    }

    let mut entries = Vec::with_capacity(settings.len());
    for s in settings {
        let cells: Vec<_> = weights
            .iter()
            .map(|&w| product_cell(w, draw_conditional(rng), draw_conditional(rng)))
            .collect();
        let t = JointTable::new(cells);
        if s.is_equal_axis()
            && (t.joint(Spin::Up, Spin::Up) > EQ_TOL
                || t.joint(Spin::Down, Spin::Down) > EQ_TOL)
        {
            return None;
        }
        entries.push((s, t));
    }
    SettingIndexedModel::new(weights, entries).ok()
}

/// Samples until a passively local model with perfect equal-axis
/// anticorrelation turns up; also returns the number of candidates drawn.
pub fn random_passively_local_model<R: Rng>(rng: &mut R) -> (SettingIndexedModel, usize) {
    let mut drawn = 0;
    loop {
        drawn += 1;
        if let Some(m) = candidate(rng) {
            return (m, drawn);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub models: usize,
    pub candidates_drawn: usize,
    /// Models whose equal-axis conditionals are all 0 or 1 within tolerance.
    pub deterministic: usize,
    /// Models where a source event equivalent to the detector event was found.
    pub with_witness: usize,
    pub max_indicator_distance: f64,
    /// Index of the first model that failed, if any.
    pub first_failure: Option<usize>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.deterministic == self.models && self.with_witness == self.models
    }
}

fn check_one(seed: u64, i: usize) -> (usize, Result<DeterminismReport, super::ProbError>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain::PREPARATION, i as u64));
    let (m, drawn) = random_passively_local_model(&mut rng);
    (drawn, deterministic_passive_locality_check(&m))
}

/// Samples `n` models satisfying equal-axis anticorrelation and passive
/// locality and checks that every one of them is deterministic.
pub fn lemma_battery(n: usize, seed: u64, exec: Execution) -> BatteryReport {
    let results = par::map_range(exec, n, |i| check_one(seed, i));
    let mut report = BatteryReport {
        models: n,
        candidates_drawn: 0,
        deterministic: 0,
        with_witness: 0,
        max_indicator_distance: 0.0,
        first_failure: None,
    };
    for (i, (drawn, r)) in results.into_iter().enumerate() {
        report.candidates_drawn += drawn;
        let ok = match r {
            Ok(r) => {
                report.max_indicator_distance =
                    report.max_indicator_distance.max(r.max_indicator_distance);
                let witnessed = !r.witnesses.is_empty()
                    && r.witnesses.iter().all(|w| w.is_equivalent(LEMMA_TOL));
                report.deterministic += usize::from(r.is_deterministic);
                report.with_witness += usize::from(witnessed);
                r.is_deterministic && witnessed
            }
            Err(_) => false,
        };
        if !ok && report.first_failure.is_none() {
            report.first_failure = Some(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::{is_passively_local, EQ_TOL};

    #[test]
    fn sampled_models_meet_the_hypotheses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (m, _) = random_passively_local_model(&mut rng);
            assert!(is_passively_local(&m, EQ_TOL).ok);
            assert!(m.settings().any(|s| s.is_equal_axis()));
        }
    }

    #[test]
    fn battery_passes_and_is_execution_independent() {
        let a = lemma_battery(200, 11, Execution::Sequential);
        let b = lemma_battery(200, 11, Execution::Parallel);
        assert_eq!(a, b);
        assert!(a.passed(), "{a:?}");
        assert!(a.candidates_drawn > a.models, "rejection must have happened");
    }
}
