use super::{OracleError, WaveFunction};
use crate::dynamics::PhysParams;

/// A normalised histogram on equal bins starting at `x_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    pub x_min: f64,
    pub width: f64,
    /// Density per bin; `Σ density · width = 1`.
    pub density: Vec<f64>,
}

impl Histogram1D {
    pub fn new(x_min: f64, width: f64, density: Vec<f64>) -> Result<Self, OracleError> {
        if !(width > 0.0 && width.is_finite()) || density.is_empty() {
            return Err(OracleError::Histogram("needs a positive width and at least one bin".into()));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(OracleError::Histogram("densities must be finite and nonnegative".into()));
        }
        let mass: f64 = density.iter().sum::<f64>() * width;
        if (mass - 1.0).abs() > 1e-9 {
            return Err(OracleError::Histogram(format!("total mass {mass} is not 1")));
        }
        Ok(Self { x_min, width, density })
    }

    /// Bins `samples` over `[x_min, x_max)`; every sample must fall inside.
    pub fn from_samples(samples: &[f64], x_min: f64, x_max: f64, bins: usize) -> Result<Self, OracleError> {
        if bins == 0 || !(x_max > x_min) || samples.is_empty() {
            return Err(OracleError::Histogram("empty range, no bins or no samples".into()));
        }
        let width = (x_max - x_min) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in samples {
            let b = ((x - x_min) / width).floor();
            if !(b >= 0.0 && (b as usize) < bins) {
                return Err(OracleError::Histogram(format!("sample {x} outside [{x_min}, {x_max})")));
            }
            counts[b as usize] += 1;
        }
        let scale = 1.0 / (samples.len() as f64 * width);
        Self::new(x_min, width, counts.iter().map(|&c| c as f64 * scale).collect())
    }

    /// One bin per grid point, centred on it, holding `|ψ_i|²`.
    pub fn from_wavefunction(psi: &WaveFunction) -> Self {
        let g = psi.grid();
        Self {
            x_min: g.x_min() - 0.5 * g.dx(),
            width: g.dx(),
            density: psi.density(),
        }
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width * self.density.len() as f64
    }

    /// Density at `x`; zero outside the histogram.
    pub fn at(&self, x: f64) -> f64 {
        let b = ((x - self.x_min) / self.width).floor();
        if b >= 0.0 && (b as usize) < self.density.len() {
            self.density[b as usize]
        } else {
            0.0
        }
    }

    /// Piecewise-linear CDF knots at the bin edges.
    fn cdf_knots(&self) -> Vec<(f64, f64)> {
        let mut knots = Vec::with_capacity(self.density.len() + 1);
        let mut acc = 0.0;
        knots.push((self.x_min, 0.0));
        for (i, d) in self.density.iter().enumerate() {
            acc += d * self.width;
            knots.push((self.x_min + (i + 1) as f64 * self.width, acc));
        }
        knots
    }
}

fn cdf_at(knots: &[(f64, f64)], x: f64) -> f64 {
    let pos = knots.partition_point(|k| k.0 <= x);
    if pos == 0 {
        return 0.0;
    }
    if pos == knots.len() {
        return knots[pos - 1].1;
    }
    let (x0, f0) = knots[pos - 1];
    let (x1, f1) = knots[pos];
    f0 + (f1 - f0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDistance {
    /// `Σ_i |ρ_ens(x_i) − |ψ_i|²| dx` over the grid points.
    pub l1_distance: f64,
    /// Largest gap between the two cumulative distributions.
    pub ks_distance: f64,
}

/// Distances between an ensemble histogram and `|ψ|²`.
///
/// `|ψ|²` is read as a histogram with one cell of width `dx` per grid point;
/// both CDFs are then piecewise linear, so the KS distance is attained at a
/// knot of one of them. The histogram must not put mass outside the grid.
pub fn compare_density(ensemble: &Histogram1D, psi: &WaveFunction) -> Result<DensityDistance, OracleError> {
    let g = psi.grid();
    let lo = g.x_min() - 0.5 * g.dx();
    let hi = g.x_max() + 0.5 * g.dx();
    for (i, &d) in ensemble.density.iter().enumerate() {
        let a = ensemble.x_min + i as f64 * ensemble.width;
        let b = a + ensemble.width;
        if d > 0.0 && (a < lo - 1e-12 * g.dx() || b > hi + 1e-12 * g.dx()) {
            return Err(OracleError::Incompatible(format!(
                "histogram bin [{a}, {b}] carries mass outside the grid [{lo}, {hi}]"
            )));
        }
    }
    let dx = g.dx();
    let rho = psi.density();
    let l1_distance = g
        .points()
        .zip(&rho)
        .map(|(x, r)| (ensemble.at(x) - r).abs())
        .sum::<f64>()
        * dx;

    let a = ensemble.cdf_knots();
    let b = Histogram1D::from_wavefunction(psi).cdf_knots();
    let ks_distance = a
        .iter()
        .chain(&b)
        .map(|&(x, _)| (cdf_at(&a, x) - cdf_at(&b, x)).abs())
        .fold(0.0, f64::max);
    Ok(DensityDistance { l1_distance, ks_distance })
}

/// `⟨v⟩ = (ħ/m₀) Im Σ ψ* ∂ψ/∂x dx` with central differences and `ψ = 0` past
/// the walls.
pub fn expectation_velocity(psi: &WaveFunction, p: &PhysParams) -> f64 {
    // The dx of the difference quotient cancels the dx of the sum.
    let a = psi.amplitudes();
    let n = a.len();
    let mut acc = 0.0;
    for i in 0..n {
        let right = if i + 1 < n { a[i + 1] } else { 0.0.into() };
        let left = if i > 0 { a[i - 1] } else { 0.0.into() };
        acc += (a[i].conj() * (right - left)).im;
    }
    p.hbar / p.m0 * acc * 0.5
}

fn expectation_force(psi: &WaveFunction, potential: &[f64]) -> f64 {
    let dx = psi.grid().dx();
    let n = potential.len();
    psi.density()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let dv = if i == 0 {
                (potential[1] - potential[0]) / dx
            } else if i + 1 == n {
                (potential[n - 1] - potential[n - 2]) / dx
            } else {
                (potential[i + 1] - potential[i - 1]) / (2.0 * dx)
            };
            -r * dv
        })
        .sum::<f64>()
        * dx
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhrenfestReport {
    /// `d⟨v⟩/dt − ⟨F⟩/m₀` at every interior snapshot.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Checks `d⟨v⟩/dt = ⟨−V′⟩/m₀` along snapshots spaced `dt` apart.
pub fn ehrenfest_check(
    snapshots: &[WaveFunction],
    dt: f64,
    potential: &[f64],
    p: &PhysParams,
) -> Result<EhrenfestReport, OracleError> {
    if snapshots.len() < 3 {
        return Err(OracleError::TooFewSnapshots(snapshots.len()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OracleError::InvalidTimeStep { dt });
    }
    let n = snapshots[0].grid().len();
    if potential.len() != n {
        return Err(OracleError::LengthMismatch {
            what: "potential",
            expected: n,
            got: potential.len(),
        });
    }
    let v: Vec<f64> = snapshots.iter().map(|s| expectation_velocity(s, p)).collect();
    let residuals: Vec<f64> = (1..snapshots.len() - 1)
        .map(|k| (v[k + 1] - v[k - 1]) / (2.0 * dt) - expectation_force(&snapshots[k], potential) / p.m0)
        .collect();
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(EhrenfestReport { residuals, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{evolve_schrodinger, Grid1D};
    use crate::rng::CounterStream;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn units() -> PhysParams {
        PhysParams::new(1.0, 1.0, f64::INFINITY, 1.0, 1.0).unwrap()
    }

    fn snapshots(v: &[f64], psi: &WaveFunction, steps: usize, dt: f64) -> Vec<WaveFunction> {
        evolve_schrodinger(psi, v, &units(), steps as f64 * dt, dt, Some(1))
            .unwrap()
            .snapshots
            .into_iter()
            .map(|(_, s)| s)
            .collect()
    }

    #[test]
    fn identical_inputs_are_at_zero_distance() {
        let g = Grid1D::new(-10.0, 10.0, 401).unwrap();
        let psi = WaveFunction::gaussian(g, 0.5, 1.0, 0.0).unwrap();
        let d = compare_density(&Histogram1D::from_wavefunction(&psi), &psi).unwrap();
        assert_eq!(d.l1_distance, 0.0);
        assert!(d.ks_distance < 1e-15);
    }

    #[test]
    fn doubled_width_is_detected() {
        let g = Grid1D::new(-20.0, 20.0, 2001).unwrap();
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.0).unwrap();
        let mut rng = CounterStream::new(1, 0);
        let wide: Vec<f64> = (0..100_000).map(|_| 2.0 * rng.next_standard_normal()).collect();
        let h = Histogram1D::from_samples(&wide, -19.0, 19.0, 380).unwrap();
        let d = compare_density(&h, &psi).unwrap();
        // sup |Φ(x) − Φ(x/2)| for unit and doubled widths.
        let n = Normal::standard();
        let x = (8.0 * 2f64.ln() / 3.0).sqrt();
        let expected = n.cdf(x) - n.cdf(x / 2.0);
        assert!(expected > 0.15);
        assert!((d.ks_distance - expected).abs() < 0.01, "{} vs {expected}", d.ks_distance);
        assert!(d.l1_distance > 0.3 && d.l1_distance <= 2.0);

        let same: Vec<f64> = (0..100_000).map(|_| rng.next_standard_normal()).collect();
        let h = Histogram1D::from_samples(&same, -19.0, 19.0, 380).unwrap();
        assert!(compare_density(&h, &psi).unwrap().ks_distance < 0.01);
    }

    #[test]
    fn mass_outside_the_grid_is_incompatible() {
        let g = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let psi = WaveFunction::gaussian(g, 0.0, 0.3, 0.0).unwrap();
        let h = Histogram1D::new(5.0, 1.0, vec![1.0]).unwrap();
        assert!(matches!(compare_density(&h, &psi), Err(OracleError::Incompatible(_))));
        assert!(Histogram1D::new(0.0, 1.0, vec![0.5]).is_err());
    }

    #[test]
    fn free_particle_keeps_its_velocity() {
        let g = Grid1D::new(-20.0, 20.0, 801).unwrap();
        let v = vec![0.0; g.len()];
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.8).unwrap();
        let r = ehrenfest_check(&snapshots(&v, &psi, 50, 0.01), 0.01, &v, &units()).unwrap();
        assert!(r.max_residual < 1e-6, "{}", r.max_residual);
    }

    #[test]
    fn linear_potential_accelerates_uniformly() {
        let f = 0.1;
        let g = Grid1D::new(-20.0, 20.0, 1601).unwrap();
        let v = g.sample(|x| -f * x);
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.0).unwrap();
        let snaps = snapshots(&v, &psi, 100, 0.01);
        let r = ehrenfest_check(&snaps, 0.01, &v, &units()).unwrap();
        assert!(r.max_residual < 1e-4, "{}", r.max_residual);
        let dv = expectation_velocity(&snaps[100], &units()) - expectation_velocity(&snaps[0], &units());
        assert!((dv - f * 1.0).abs() < 1e-4, "{dv}");
    }

    #[test]
    fn harmonic_coherent_state_obeys_ehrenfest() {
        let g = Grid1D::new(-12.0, 12.0, 2401).unwrap();
        let v = g.sample(|x| 0.5 * x * x);
        // Ground-state width displaced by 1: a coherent state for m = ω = ħ = 1.
        let psi = WaveFunction::gaussian(g, 1.0, std::f64::consts::FRAC_1_SQRT_2, 0.0).unwrap();
        let r = ehrenfest_check(&snapshots(&v, &psi, 200, 0.005), 0.005, &v, &units()).unwrap();
        assert!(r.max_residual < 1e-4, "{}", r.max_residual);
    }

    #[test]
    fn too_few_snapshots() {
        let g = Grid1D::new(-1.0, 1.0, 16).unwrap();
        let psi = WaveFunction::gaussian(g, 0.0, 0.3, 0.0).unwrap();
        assert_eq!(
            ehrenfest_check(&[psi.clone(), psi], 0.1, &[0.0; 16], &units()).unwrap_err(),
            OracleError::TooFewSnapshots(2)
        );
    }
}
