use std::collections::BTreeMap;

use super::{EprError, SourceEvent};
use crate::probspace::SettingPair;
use crate::spin::Spin;

/// Fewest samples a setting needs before its correlation is estimated.
pub const MIN_COUNTS: u64 = 100;

/// Outcome counts of one setting, indexed `[source][out1][out2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SettingCounts {
    pub counts: [[[u64; 2]; 2]; 2],
}

impl SettingCounts {
    pub fn add(&mut self, source: SourceEvent, out1: Spin, out2: Spin) {
        self.counts[source.index()][out1.index()][out2.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    pub fn joint(&self, out1: Spin, out2: Spin) -> u64 {
        self.counts.iter().map(|c| c[out1.index()][out2.index()]).sum()
    }

    pub fn source_total(&self, source: SourceEvent) -> u64 {
        self.counts[source.index()].iter().flatten().sum()
    }

    /// Samples with outcome `s` at `wing`.
    pub fn marginal_count(&self, wing: u8, s: Spin) -> u64 {
        let mut n = 0;
        for c in &self.counts {
            for (a, row) in c.iter().enumerate() {
                for (b, &k) in row.iter().enumerate() {
                    let o = if wing == 1 { a } else { b };
                    if o == s.index() {
                        n += k;
                    }
                }
            }
        }
        n
    }

    pub fn anticorrelated(&self) -> u64 {
        self.joint(Spin::Up, Spin::Down) + self.joint(Spin::Down, Spin::Up)
    }

    pub fn anticorrelation_fraction(&self) -> f64 {
        self.anticorrelated() as f64 / self.total() as f64
    }

    pub fn merge(&mut self, other: &SettingCounts) {
        for (i, c) in other.counts.iter().enumerate() {
            for (a, row) in c.iter().enumerate() {
                for (b, &k) in row.iter().enumerate() {
                    self.counts[i][a][b] += k;
                }
            }
        }
    }
}

/// Counts per setting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub settings: BTreeMap<SettingPair, SettingCounts>,
}

impl RunStats {
    pub fn add(&mut self, setting: SettingPair, source: SourceEvent, out1: Spin, out2: Spin) {
        self.settings.entry(setting).or_default().add(source, out1, out2);
    }

    pub fn merge(&mut self, other: &RunStats) {
        for (s, c) in &other.settings {
            self.settings.entry(*s).or_default().merge(c);
        }
    }

    pub fn get(&self, s: &SettingPair) -> Result<&SettingCounts, EprError> {
        self.settings.get(s).ok_or(EprError::SettingMissing(*s))
    }

    pub fn total(&self) -> u64 {
        self.settings.values().map(SettingCounts::total).sum()
    }
}

/// A sampled quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

/// `Ê = (N_same − N_opposite) / N` with standard error `√((1 − Ê²)/N)`.
pub fn estimate_correlation(stats: &RunStats, s: &SettingPair) -> Result<Estimate, EprError> {
    let c = stats.get(s)?;
    let n = c.total();
    if n < MIN_COUNTS {
        return Err(EprError::InsufficientCounts(*s, n));
    }
    let opposite = c.anticorrelated();
    let value = (n as f64 - 2.0 * opposite as f64) / n as f64;
    Ok(Estimate {
        value,
        stderr: ((1.0 - value * value).max(0.0) / n as f64).sqrt(),
        n,
    })
}

/// `|Ê(μ,ν) + Ê(μ,ν′) + Ê(μ′,ν) − Ê(μ′,ν′)|`, angles in degrees, with the
/// standard errors added in quadrature.
pub fn chsh_estimate(
    stats: &RunStats,
    mu_deg: f64,
    mu_p_deg: f64,
    nu_deg: f64,
    nu_p_deg: f64,
) -> Result<Estimate, EprError> {
    let terms = [
        (mu_deg, nu_deg, 1.0),
        (mu_deg, nu_p_deg, 1.0),
        (mu_p_deg, nu_deg, 1.0),
        (mu_p_deg, nu_p_deg, -1.0),
    ];
    let mut value = 0.0;
    let mut var = 0.0;
    let mut n = 0;
    for (a, b, sign) in terms {
        let e = estimate_correlation(stats, &SettingPair::from_degrees(a, b))?;
        value += sign * e.value;
        var += e.stderr * e.stderr;
        n += e.n;
    }
    Ok(Estimate { value: value.abs(), stderr: var.sqrt(), n })
}

/// Largest shift of a wing's `P(↑)` between settings that share that wing's
/// axis.
#[derive(Debug, Clone, PartialEq)]
pub struct NoSignalingReport {
    pub max_shift: f64,
    /// Largest shift in units of its standard error.
    pub max_z: f64,
    pub comparisons: usize,
    /// No shift exceeds four standard errors.
    pub passed: bool,
    /// The comparison with the largest shift: wing and the two settings.
    pub worst: Option<(u8, SettingPair, SettingPair)>,
}

pub fn no_signaling_test(stats: &RunStats) -> Result<NoSignalingReport, EprError> {
    let mut report = NoSignalingReport {
        max_shift: 0.0,
        max_z: 0.0,
        comparisons: 0,
        passed: true,
        worst: None,
    };
    let entries: Vec<(&SettingPair, &SettingCounts)> =
        stats.settings.iter().filter(|(_, c)| c.total() > 0).collect();
    for wing in [1u8, 2] {
        for (i, (s, c)) in entries.iter().enumerate() {
            for (s2, c2) in &entries[i + 1..] {
                if s.local_deg(wing) != s2.local_deg(wing) {
                    continue;
                }
                let (n, n2) = (c.total() as f64, c2.total() as f64);
                let p = c.marginal_count(wing, Spin::Up) as f64 / n;
                let p2 = c2.marginal_count(wing, Spin::Up) as f64 / n2;
                let shift = (p - p2).abs();
                let se = (p * (1.0 - p) / n + p2 * (1.0 - p2) / n2).sqrt();
                let z = if se > 0.0 {
                    shift / se
                } else if shift > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                report.comparisons += 1;
                if shift > 4.0 * se {
                    report.passed = false;
                }
                report.max_z = report.max_z.max(z);
                if report.worst.is_none() || shift > report.max_shift {
                    report.max_shift = shift;
                    report.worst = Some((wing, **s, **s2));
                }
            }
        }
    }
    if report.comparisons == 0 {
        return Err(EprError::NoComparableSettings);
    }
    Ok(report)
}

/// Largest `|P̂(o₁,o₂|s,S) − P̂(o₁|s,S)·P̂(o₂|s,S)|` over settings, source
/// events and joint outcomes. Zero in expectation for a passively local
/// source.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub max_gap: f64,
    pub witness: Option<(SettingPair, SourceEvent, Spin, Spin)>,
}

pub fn passive_factorization_test(stats: &RunStats) -> FactorizationReport {
    let mut report = FactorizationReport { max_gap: 0.0, witness: None };
    for (s, c) in &stats.settings {
        for (src, table) in c.counts.iter().enumerate() {
            let n: u64 = table.iter().flatten().sum();
            if n == 0 {
                continue;
            }
            let n = n as f64;
            for a in 0..2 {
                for b in 0..2 {
                    let joint = table[a][b] as f64 / n;
                    let p1 = (table[a][0] + table[a][1]) as f64 / n;
                    let p2 = (table[0][b] + table[1][b]) as f64 / n;
                    let gap = (joint - p1 * p2).abs();
                    if report.witness.is_none() || gap > report.max_gap {
                        report.max_gap = gap;
                        report.witness = Some((
                            *s,
                            SourceEvent::from_index(src),
                            Spin::from_index(a),
                            Spin::from_index(b),
                        ));
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filled(s: SettingPair, table: [[[u64; 2]; 2]; 2]) -> RunStats {
        let mut st = RunStats::default();
        st.settings.insert(s, SettingCounts { counts: table });
        st
    }

    #[test]
    fn correlation_from_counts() {
        let s = SettingPair::from_degrees(0.0, 0.0);
        let st = filled(s, [[[10, 40], [40, 10]], [[0, 50], [50, 0]]]);
        let e = estimate_correlation(&st, &s).unwrap();
        assert_eq!(e.n, 200);
        assert!((e.value - (20.0 - 180.0) / 200.0).abs() < 1e-15);
        assert!((e.stderr - ((1.0 - 0.64) / 200.0f64).sqrt()).abs() < 1e-15);
        let small = filled(s, [[[1, 0], [0, 0]], [[0; 2]; 2]]);
        assert!(matches!(estimate_correlation(&small, &s), Err(EprError::InsufficientCounts(_, 1))));
        assert!(matches!(
            estimate_correlation(&st, &SettingPair::from_degrees(1.0, 0.0)),
            Err(EprError::SettingMissing(_))
        ));
    }

    #[test]
    fn factorization_gap_of_a_perfect_anticorrelation() {
        let s = SettingPair::from_degrees(90.0, 90.0);
        let st = filled(s, [[[0, 50], [50, 0]], [[0, 30], [30, 0]]]);
        let r = passive_factorization_test(&st);
        assert!((r.max_gap - 0.25).abs() < 1e-15);
        let product = filled(s, [[[25, 25], [25, 25]], [[9, 3], [3, 1]]]);
        assert!(passive_factorization_test(&product).max_gap < 1e-15);
    }

    #[test]
    fn no_signaling_needs_shared_axes() {
        let st = filled(SettingPair::from_degrees(0.0, 10.0), [[[25, 25], [25, 25]], [[0; 2]; 2]]);
        assert!(matches!(no_signaling_test(&st), Err(EprError::NoComparableSettings)));
        let mut st = st;
        st.settings.insert(
            SettingPair::from_degrees(0.0, 50.0),
            SettingCounts { counts: [[[100, 0], [0, 0]], [[0; 2]; 2]] },
        );
        let r = no_signaling_test(&st).unwrap();
        assert_eq!(r.comparisons, 1);
        assert!((r.max_shift - 0.5).abs() < 1e-15);
        assert!(!r.passed);
    }

    proptest! {
        #[test]
        fn merge_adds_counts(a in prop::array::uniform8(0u64..1000), b in prop::array::uniform8(0u64..1000)) {
            let unflat = |x: [u64; 8]| [[[x[0], x[1]], [x[2], x[3]]], [[x[4], x[5]], [x[6], x[7]]]];
            let s = SettingPair::from_degrees(0.0, 45.0);
            let mut m = filled(s, unflat(a));
            m.merge(&filled(s, unflat(b)));
            let c = m.get(&s).unwrap();
            prop_assert_eq!(c.total(), a.iter().sum::<u64>() + b.iter().sum::<u64>());
            prop_assert_eq!(
                c.marginal_count(1, Spin::Up) + c.marginal_count(1, Spin::Down),
                c.total()
            );
        }
    }
}
