//! Spinor algebra for spin-½ particles: Pauli matrices, the Euler-angle SU(2)
//! rotation, Stern–Gerlach amplitude transforms, spin operators and the
//! two-particle singlet.
//!
//! Matrices are `nalgebra` types over `Complex64`. The reduced Planck constant
//! is an explicit argument wherever it enters (natural units use `1.0`).

use nalgebra::{Matrix2, Matrix4, Vector2, Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Magnitude of the spin angular momentum in units of ħ.
///
/// The heuristic estimate of the rotational angular momentum lands near
/// ħ/2π; the model fixes it to the measured value ħ/2.
pub const SPIN_MAGNITUDE_IN_HBAR: f64 = 0.5;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, PartialEq)]
pub enum SpinError {
    #[error("spinor amplitudes have zero norm")]
    ZeroNorm,
    #[error("two-spinor amplitudes have zero norm")]
    ZeroNormPair,
}

/// A spin label along the source quantisation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    /// `0` for up, `1` for down; the index convention used by every table.
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn from_index(i: usize) -> Spin {
        if i == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    /// `+1` for up, `-1` for down.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Spin::Up => "up",
            Spin::Down => "down",
        }
    }
}

/// Returns `[σx, σy, σz]`.
pub fn pauli() -> [Mat2; 3] {
    [
        Mat2::new(ZERO, ONE, ONE, ZERO),
        Mat2::new(ZERO, -I, I, ZERO),
        Mat2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

/// A normalised two-component spinor over the basis `{|+⟩, |−⟩}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor(Vector2<C64>);

impl Spinor {
    /// Builds a spinor, normalising the amplitudes.
    pub fn new(up: C64, down: C64) -> Result<Self, SpinError> {
        let v = Vector2::new(up, down);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(SpinError::ZeroNorm);
        }
        Ok(Spinor(v.unscale(n)))
    }

    pub fn up() -> Self {
        Spinor(Vector2::new(ONE, ZERO))
    }

    pub fn down() -> Self {
        Spinor(Vector2::new(ZERO, ONE))
    }

    pub fn basis(spin: Spin) -> Self {
        match spin {
            Spin::Up => Self::up(),
            Spin::Down => Self::down(),
        }
    }

    pub fn amplitudes(&self) -> (C64, C64) {
        (self.0[0], self.0[1])
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Probabilities of finding `|+⟩` and `|−⟩`.
    pub fn probabilities(&self) -> (f64, f64) {
        (self.0[0].norm_sqr(), self.0[1].norm_sqr())
    }

    /// Applies a unitary. The result is not renormalised, so the norm reports
    /// any loss of unitarity faithfully.
    pub fn apply(&self, u: &Mat2) -> Spinor {
        Spinor(u * self.0)
    }

    pub fn as_vector(&self) -> &Vector2<C64> {
        &self.0
    }
}

/// A direction in spherical coordinates: polar angle `theta ∈ [0, π]` and
/// azimuth `phi ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub theta: f64,
    pub phi: f64,
}

impl Axis {
    pub fn new(theta: f64, phi: f64) -> Self {
        Axis {
            theta,
            phi: phi.rem_euclid(TAU),
        }
    }

    pub fn z() -> Self {
        Axis::new(0.0, 0.0)
    }

    /// A detector axis rotated by `angle` within the x–z plane, measured from +z.
    pub fn in_xz_plane(angle: f64) -> Self {
        let a = angle.rem_euclid(TAU);
        if a <= PI {
            Axis::new(a, 0.0)
        } else {
            Axis::new(TAU - a, PI)
        }
    }

    /// `(cos φ sin θ, sin φ sin θ, cos θ)`.
    pub fn vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(cp * st, sp * st, ct)
    }
}

/// The SU(2) image of the Euler rotation `(ψ, φ, θ)`.
pub fn rotation_matrix(psi: f64, phi: f64, theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let plus = 0.5 * (psi + phi);
    let minus = 0.5 * (psi - phi);
    Mat2::new(
        C64::from_polar(c, plus),
        I * C64::from_polar(s, minus),
        I * C64::from_polar(s, -minus),
        C64::from_polar(c, -plus),
    )
}

/// `B·σ = Bx σx + By σy + Bz σz`.
pub fn field_matrix(b: &Vector3<f64>) -> Mat2 {
    let [sx, sy, sz] = pauli();
    sx * C64::from(b.x) + sy * C64::from(b.y) + sz * C64::from(b.z)
}

/// Applies `Q†(ψ, φ, θ)` with full control over the Euler angles.
pub fn transform_spinor_euler(s: &Spinor, psi: f64, phi: f64, theta: f64) -> Spinor {
    s.apply(&rotation_matrix(psi, phi, theta).adjoint())
}

/// Expresses `s` in the frame of a magnet whose axis has polar angle `theta`
/// and in-plane angle `varphi`, using `ψ = −π/2` and `φ = varphi + π/2`.
pub fn transform_spinor(s: &Spinor, theta: f64, varphi: f64) -> Spinor {
    transform_spinor_euler(s, -FRAC_PI_2, varphi + FRAC_PI_2, theta)
}

/// Outcome probabilities `(p_up, p_down)` for a basis state measured along an
/// axis at relative polar angle `theta`.
///
/// The smaller probability is computed directly and the larger one as its
/// complement, which makes the sum exactly `1.0` in floating point.
pub fn measurement_probs(spin: Spin, theta: f64) -> (f64, f64) {
    let c2 = (theta / 2.0).cos().powi(2);
    let s2 = (theta / 2.0).sin().powi(2);
    let (keep, flip) = if c2 >= s2 { (1.0 - s2, s2) } else { (c2, 1.0 - c2) };
    match spin {
        Spin::Up => (keep, flip),
        Spin::Down => (flip, keep),
    }
}

/// `(ħ/2)(a·σ)`.
pub fn spin_operator(a: &Axis, hbar: f64) -> Mat2 {
    field_matrix(&a.vector()) * C64::from(0.5 * hbar)
}

/// A normalised state over `{++, +−, −+, −−}` (wing 1 first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinorState(Vector4<C64>);

impl TwoSpinorState {
    pub fn new(amps: [C64; 4]) -> Result<Self, SpinError> {
        let v = Vector4::from(amps);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(SpinError::ZeroNormPair);
        }
        Ok(TwoSpinorState(v.unscale(n)))
    }

    /// `(|−+⟩ − |+−⟩)/√2`: wing 1 down with wing 2 up, minus the exchange.
    pub fn singlet() -> Self {
        let h = C64::from(FRAC_1_SQRT_2);
        TwoSpinorState(Vector4::new(ZERO, -h, h, ZERO))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_vector(&self) -> &Vector4<C64> {
        &self.0
    }

    /// `⟨Ψ|op|Ψ⟩` (real part; `op` is expected to be Hermitian).
    pub fn expectation(&self, op: &Mat4) -> f64 {
        (self.0.adjoint() * op * self.0)[(0, 0)].re
    }
}

/// `⟨Ψ|(μ·σ)⊗(ν·σ)|Ψ⟩` on the singlet, by explicit 4×4 expectation.
pub fn singlet_correlation(mu: &Axis, nu: &Axis) -> f64 {
    let op = field_matrix(&mu.vector()).kronecker(&field_matrix(&nu.vector()));
    TwoSpinorState::singlet().expectation(&op)
}

/// Projector onto outcome `s` along axis `a`: `(I ± a·σ)/2`.
pub fn projector(a: &Axis, s: Spin) -> Mat2 {
    (Mat2::identity() + field_matrix(&a.vector()) * C64::from(s.sign())) * C64::from(0.5)
}

/// Joint outcome probabilities on the singlet, indexed `[out1][out2]` with
/// `0 = up`, `1 = down`.
///
/// `P(↑↑)` comes from the 4×4 projector expectation. The singlet's symmetry
/// `P(↑↑) = P(↓↓)`, `P(↑↓) = P(↓↑) = ½ − P(↑↑)` fills in the rest, which keeps
/// every marginal at exactly ½ in floating point.
pub fn quantum_joint_probs(mu: &Axis, nu: &Axis) -> [[f64; 2]; 2] {
    let op = projector(mu, Spin::Up).kronecker(&projector(nu, Spin::Up));
    let same = TwoSpinorState::singlet().expectation(&op).clamp(0.0, 0.5);
    let opposite = 0.5 - same;
    [[same, opposite], [opposite, same]]
}

/// Correlation coefficient `P(↑↑)+P(↓↓)−P(↑↓)−P(↓↑)` of a joint table.
pub fn recombine_correlation(t: &[[f64; 2]; 2]) -> f64 {
    t[0][0] + t[1][1] - t[0][1] - t[1][0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn max_abs(m: &Mat2) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Goldstein's x-convention Euler rotation, written out independently.
    fn euler_3x3(psi: f64, phi: f64, theta: f64) -> nalgebra::Matrix3<f64> {
        let (sps, cps) = psi.sin_cos();
        let (sph, cph) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        nalgebra::Matrix3::new(
            cps * cph - ct * sph * sps,
            cps * sph + ct * cph * sps,
            sps * st,
            -sps * cph - ct * sph * cps,
            -sps * sph + ct * cph * cps,
            cps * st,
            st * sph,
            -st * cph,
            ct,
        )
    }

    #[test]
    fn zero_rotation_is_identity() {
        assert!(max_abs(&(rotation_matrix(0.0, 0.0, 0.0) - Mat2::identity())) < 1e-15);
    }

    #[test]
    fn rotation_determinant_is_one() {
        let q = rotation_matrix(PI / 4.0, PI / 3.0, PI / 5.0);
        let det = q.determinant();
        assert_abs_diff_eq!(det.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(det.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn field_matrix_examples() {
        let b = 0.7;
        let m = field_matrix(&Vector3::new(0.0, 0.0, b));
        assert!(max_abs(&(m - Mat2::new(C64::from(b), ZERO, ZERO, C64::from(-b)))) < 1e-15);
        let m = field_matrix(&Vector3::new(b, 0.0, 0.0));
        assert!(max_abs(&(m - Mat2::new(ZERO, C64::from(b), C64::from(b), ZERO))) < 1e-15);
    }

    #[test]
    fn transform_examples() {
        let phi = 0.83;
        let s = transform_spinor(&Spinor::up(), 0.0, phi);
        let (a, b) = s.amplitudes();
        assert!((a - C64::from_polar(1.0, -phi / 2.0)).norm() < 1e-12);
        assert!(b.norm() < 1e-12);

        let (pu, pd) = transform_spinor(&Spinor::up(), PI, phi).probabilities();
        assert_abs_diff_eq!(pu, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pd, 1.0, epsilon = 1e-12);

        let (pu, pd) = transform_spinor(&Spinor::down(), PI / 2.0, phi).probabilities();
        assert_abs_diff_eq!(pu, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pd, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn transform_matches_closed_form_amplitudes() {
        let (theta, varphi) = (1.1, 2.3);
        let (a, b) = transform_spinor(&Spinor::up(), theta, varphi).amplitudes();
        assert!((a - C64::from_polar((theta / 2.0).cos(), -varphi / 2.0)).norm() < 1e-12);
        assert!((b - C64::from_polar((theta / 2.0).sin(), varphi / 2.0)).norm() < 1e-12);
        let (a, b) = transform_spinor(&Spinor::down(), theta, varphi).amplitudes();
        assert!((a + C64::from_polar((theta / 2.0).sin(), -varphi / 2.0)).norm() < 1e-12);
        assert!((b - C64::from_polar((theta / 2.0).cos(), varphi / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn measurement_examples() {
        assert_eq!(measurement_probs(Spin::Up, 0.0), (1.0, 0.0));
        assert_eq!(measurement_probs(Spin::Down, 0.0), (0.0, 1.0));
        let (pu, pd) = measurement_probs(Spin::Up, 2.0 * PI / 3.0);
        assert_abs_diff_eq!(pu, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(pd, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn spin_operator_along_z() {
        let hbar = 1.3;
        let s = spin_operator(&Axis::z(), hbar);
        let expect = pauli()[2] * C64::from(hbar / 2.0);
        assert!(max_abs(&(s - expect)) < 1e-15);
    }

    #[test]
    fn singlet_examples() {
        let z = Axis::z();
        assert_abs_diff_eq!(singlet_correlation(&z, &z), -1.0, epsilon = 1e-12);
        let x = Axis::new(PI / 2.0, 0.0);
        assert_abs_diff_eq!(singlet_correlation(&z, &x), 0.0, epsilon = 1e-12);
        let a60 = Axis::in_xz_plane(PI / 3.0);
        assert_abs_diff_eq!(singlet_correlation(&z, &a60), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn joint_prob_examples() {
        let z = Axis::z();
        let t = quantum_joint_probs(&z, &z);
        assert_abs_diff_eq!(t[0][0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t[0][1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][1], 0.0, epsilon = 1e-15);

        let t = quantum_joint_probs(&z, &Axis::in_xz_plane(PI / 2.0));
        for row in t {
            for p in row {
                assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
            }
        }

        let t = quantum_joint_probs(&z, &Axis::in_xz_plane(PI / 4.0));
        assert_abs_diff_eq!(recombine_correlation(&t), -(PI / 4.0).cos(), epsilon = 1e-12);
    }

    #[test]
    fn planar_axis_wraps_past_pi() {
        let a = Axis::in_xz_plane(1.5 * PI);
        let v = a.vector();
        assert_abs_diff_eq!(v.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_spinor_rejected() {
        assert_eq!(Spinor::new(ZERO, ZERO), Err(SpinError::ZeroNorm));
    }

    fn arb_axis() -> impl Strategy<Value = Axis> {
        (0.0..PI, 0.0..TAU).prop_map(|(t, p)| Axis::new(t, p))
    }

    proptest! {
        #[test]
        fn rotation_is_unitary(psi in -TAU..TAU, phi in -TAU..TAU, theta in -TAU..TAU) {
            let q = rotation_matrix(psi, phi, theta);
            prop_assert!(max_abs(&(q * q.adjoint() - Mat2::identity())) < 1e-12);
        }

        #[test]
        fn conjugated_field_matches_rotated_vector(
            psi in -PI..PI, phi in -PI..PI, theta in 0.0..PI,
            bx in -2.0..2.0f64, by in -2.0..2.0f64, bz in -2.0..2.0f64,
        ) {
            let b = Vector3::new(bx, by, bz);
            let q = rotation_matrix(psi, phi, theta);
            let lhs = q * field_matrix(&b) * q.adjoint();
            let rhs = field_matrix(&(euler_3x3(psi, phi, theta) * b));
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }

        #[test]
        fn transform_preserves_norm(re0 in -1.0..1.0f64, im0 in -1.0..1.0f64,
                                    re1 in -1.0..1.0f64, im1 in -1.0..1.0f64,
                                    theta in 0.0..PI, varphi in 0.0..TAU) {
            prop_assume!(re0.abs() + im0.abs() + re1.abs() + im1.abs() > 1e-3);
            let s = Spinor::new(C64::new(re0, im0), C64::new(re1, im1)).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
            let t = transform_spinor(&s, theta, varphi);
            prop_assert!((t.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn measurement_probs_sum_to_one_exactly(theta in 0.0..PI) {
            for s in [Spin::Up, Spin::Down] {
                let (u, d) = measurement_probs(s, theta);
                prop_assert_eq!(u + d, 1.0);
            }
        }

        #[test]
        fn spin_operator_spectrum(a in arb_axis(), hbar in 0.1..3.0f64) {
            let s = spin_operator(&a, hbar);
            // Hermitian and traceless; eigenvalues from λ² − tr·λ + det = 0.
            prop_assert!(max_abs(&(s - s.adjoint())) < 1e-15);
            let tr = s.trace();
            prop_assert!(tr.norm() < 1e-14);
            let det = s.determinant();
            let disc = (tr * tr - det * C64::from(4.0)).sqrt();
            let l1 = ((tr + disc) * C64::from(0.5)).re;
            let l2 = ((tr - disc) * C64::from(0.5)).re;
            let (hi, lo) = if l1 > l2 { (l1, l2) } else { (l2, l1) };
            prop_assert!((hi - hbar / 2.0).abs() < 1e-12);
            prop_assert!((lo + hbar / 2.0).abs() < 1e-12);
        }

        #[test]
        fn singlet_correlation_is_minus_dot(mu in arb_axis(), nu in arb_axis()) {
            let e = singlet_correlation(&mu, &nu);
            prop_assert!((e + mu.vector().dot(&nu.vector())).abs() < 1e-10);
            let t = quantum_joint_probs(&mu, &nu);
            prop_assert!((recombine_correlation(&t) - e).abs() < 1e-12);
            for i in 0..2 {
                prop_assert_eq!(t[i][0] + t[i][1], 0.5);
                prop_assert_eq!(t[0][i] + t[1][i], 0.5);
            }
            let psi = TwoSpinorState::singlet();
            for (a, b) in [(Spin::Down, Spin::Down), (Spin::Up, Spin::Down), (Spin::Down, Spin::Up)] {
                let direct = psi.expectation(&projector(&mu, a).kronecker(&projector(&nu, b)));
                prop_assert!((direct - t[a.index()][b.index()]).abs() < 1e-12);
            }
        }
    }
}
