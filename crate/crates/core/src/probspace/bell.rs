use super::model::{SettingIndexedModel, SettingPair};
use super::ProbError;
use crate::par::{self, Execution};
use crate::spin::Spin;

/// `E = P(↑↑) + P(↓↓) − P(↑↓) − P(↓↑)` for one setting.
pub fn correlation_coefficient(
    model: &SettingIndexedModel,
    s: &SettingPair,
) -> Result<f64, ProbError> {
    let t = model.table(s)?;
    Ok(t.joint(Spin::Up, Spin::Up) + t.joint(Spin::Down, Spin::Down)
        - t.joint(Spin::Up, Spin::Down)
        - t.joint(Spin::Down, Spin::Up))
}

fn e(model: &SettingIndexedModel, a_deg: f64, b_deg: f64) -> Result<f64, ProbError> {
    correlation_coefficient(model, &SettingPair::from_degrees(a_deg, b_deg))
}

/// `|E(μ,ν) + E(μ,ν′) + E(μ′,ν) − E(μ′,ν′)|`, angles in degrees.
pub fn chsh(
    model: &SettingIndexedModel,
    mu_deg: f64,
    mu_p_deg: f64,
    nu_deg: f64,
    nu_p_deg: f64,
) -> Result<f64, ProbError> {
    Ok((e(model, mu_deg, nu_deg)? + e(model, mu_deg, nu_p_deg)? + e(model, mu_p_deg, nu_deg)?
        - e(model, mu_p_deg, nu_p_deg)?)
        .abs())
}

/// `|E(μ,ν) − E(μ,ν′)| − E(ν,ν′)`, angles in degrees. At most 1 for local
/// models.
pub fn bell_original(
    model: &SettingIndexedModel,
    mu_deg: f64,
    nu_deg: f64,
    nu_p_deg: f64,
) -> Result<f64, ProbError> {
    Ok((e(model, mu_deg, nu_deg)? - e(model, mu_deg, nu_p_deg)?).abs()
        - e(model, nu_deg, nu_p_deg)?)
}

/// Correlation of two independent ±1 outcomes with `P(↑)` equal to `p_mu` and
/// `p_nu`: `P_μ(1−P_ν) + (1−P_μ)P_ν − P_μP_ν − (1−P_μ)(1−P_ν)`.
///
/// This is the anticorrelation-counting convention, so perfectly opposite
/// deterministic outcomes give +1.
pub fn conditional_correlation(p_mu: f64, p_nu: f64) -> f64 {
    p_mu * (1.0 - p_nu) + (1.0 - p_mu) * p_nu - p_mu * p_nu - (1.0 - p_mu) * (1.0 - p_nu)
}

fn conditional_chsh(p: [f64; 4]) -> f64 {
    let [pm, pmp, pn, pnp] = p;
    (conditional_correlation(pm, pn) + conditional_correlation(pm, pnp)
        + conditional_correlation(pmp, pn)
        - conditional_correlation(pmp, pnp))
    .abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanResult {
    pub max_value: f64,
    /// `(P_μ, P_μ′, P_ν, P_ν′)` at the first maximum in scan order.
    pub argmax: [f64; 4],
    pub points: usize,
}

fn grid(step: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&p| p < 1.0 - 1e-12)
        .collect();
    g.push(1.0);
    g
}

/// Maximises the CHSH combination of [`conditional_correlation`] over a grid
/// on `[0,1]⁴` with spacing `grid_step`; the grid always contains 1.
///
/// `grid_step` must lie in `(0, 0.5]`.
pub fn conditional_chsh_bound_scan(grid_step: f64, exec: Execution) -> Result<ScanResult, ProbError> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(ProbError::InvalidGridStep { step: grid_step });
    }
    let g = grid(grid_step);
    let n = g.len();
    let per_first = par::map_range(exec, n, |i| {
        let mut best = (f64::NEG_INFINITY, [0.0; 4]);
        for &b in &g {
            for &c in &g {
                for &d in &g {
                    let p = [g[i], b, c, d];
                    let v = conditional_chsh(p);
                    if v > best.0 {
                        best = (v, p);
                    }
                }
            }
        }
        best
    });
    let (max_value, argmax) = per_first
        .into_iter()
        .fold((f64::NEG_INFINITY, [0.0; 4]), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(ScanResult {
        max_value,
        argmax,
        points: n.pow(4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::{build_quantum_epr_model, JointTable};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model(pairs: &[(f64, f64)]) -> SettingIndexedModel {
        let s: Vec<_> = pairs.iter().map(|&(a, b)| SettingPair::from_degrees(a, b)).collect();
        build_quantum_epr_model(&s).unwrap()
    }

    fn constant_model(pairs: &[(f64, f64)], cell: [[f64; 2]; 2]) -> SettingIndexedModel {
        let entries = pairs
            .iter()
            .map(|&(a, b)| (SettingPair::from_degrees(a, b), JointTable::new(vec![cell])))
            .collect();
        SettingIndexedModel::new(vec![1.0], entries).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let m = model(&[(0.0, 60.0)]);
        let e = correlation_coefficient(&m, &SettingPair::from_degrees(0.0, 60.0)).unwrap();
        assert_abs_diff_eq!(e, -0.5, epsilon = 1e-15);
        let anti = constant_model(&[(0.0, 0.0)], [[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(correlation_coefficient(&anti, &SettingPair::from_degrees(0.0, 0.0)).unwrap(), -1.0);
        let uniform = constant_model(&[(0.0, 0.0)], [[0.25; 2]; 2]);
        assert_eq!(correlation_coefficient(&uniform, &SettingPair::from_degrees(0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn quantum_chsh_reaches_two_root_two() {
        let m = model(&[(0.0, 45.0), (0.0, 315.0), (90.0, 45.0), (90.0, 315.0)]);
        let v = chsh(&m, 0.0, 90.0, 45.0, 315.0).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(chsh(&m, 0.0, 90.0, 45.0, 10.0), Err(ProbError::SettingNotPresent { .. })));
    }

    #[test]
    fn bell_original_examples() {
        let m = model(&[(0.0, 60.0), (0.0, 120.0), (60.0, 120.0)]);
        assert_abs_diff_eq!(bell_original(&m, 0.0, 60.0, 120.0).unwrap(), 1.5, epsilon = 1e-12);
        let pairs = [(0.0, 60.0), (0.0, 120.0), (60.0, 120.0)];
        let anti = constant_model(&pairs, [[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(bell_original(&anti, 0.0, 60.0, 120.0).unwrap(), 1.0);
        let flat = constant_model(&pairs, [[0.25; 2]; 2]);
        assert_eq!(bell_original(&flat, 0.0, 60.0, 120.0).unwrap(), 0.0);
        let flat = constant_model(&[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)], [[0.25; 2]; 2]);
        assert_eq!(chsh(&flat, 0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn coarse_scan_hits_two_at_a_corner() {
        let r = conditional_chsh_bound_scan(0.5, Execution::Sequential).unwrap();
        assert_eq!(r.points, 81);
        assert_eq!(r.max_value, 2.0);
        assert!(r.argmax.iter().all(|&p| p == 0.0 || p == 1.0));
        assert_eq!(conditional_chsh([0.5; 4]), 0.0);
    }

    #[test]
    fn scan_rejects_bad_steps() {
        for s in [0.0, -0.1, 0.6, f64::NAN] {
            assert!(conditional_chsh_bound_scan(s, Execution::Sequential).is_err());
        }
    }

    #[test]
    fn scan_is_execution_independent() {
        let a = conditional_chsh_bound_scan(0.1, Execution::Sequential).unwrap();
        let b = conditional_chsh_bound_scan(0.1, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.max_value <= 2.0 + 1e-12);
    }

    proptest! {
        #[test]
        fn conditional_chsh_never_exceeds_two(p in prop::array::uniform4(0.0f64..=1.0)) {
            prop_assert!(conditional_chsh(p) <= 2.0 + 1e-12);
        }

        #[test]
        fn conditional_correlation_factorises(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let expected = -(2.0 * a - 1.0) * (2.0 * b - 1.0);
            prop_assert!((conditional_correlation(a, b) - expected).abs() < 1e-15);
        }
    }
}
