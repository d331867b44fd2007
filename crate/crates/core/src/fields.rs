//! Magnetic-field parametrizations in angular-frequency units (γB).
//!
//! A single spin is driven around a cone of opening angle θ at loop
//! frequency ω. Adding `b₀ × ∂ₜb₀` to the root field `γB₀` gives the
//! transitionless (counterdiabatic) field that keeps the spin locked to the
//! instantaneous eigenstates of the root Hamiltonian.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::Hermitian;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FieldVector {
    pub const ZERO: FieldVector = FieldVector::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs_diff(self, other: Self) -> f64 {
        let d = self - other;
        d.x.abs().max(d.y.abs()).max(d.z.abs())
    }

    /// Rotation about the y axis by `angle` (right-handed).
    pub fn rotate_y(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x + s * self.z, self.y, -s * self.x + c * self.z)
    }

    /// `F·S = ½ F·σ`.
    pub fn spin_hamiltonian(self) -> Hermitian {
        Hermitian::spin(self.to_array())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for FieldVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for FieldVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for FieldVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<FieldVector> for f64 {
    type Output = FieldVector;
    fn mul(self, v: FieldVector) -> FieldVector {
        FieldVector::new(self * v.x, self * v.y, self * v.z)
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be finite"))
    }
}

/// Cone loop: opening angle, signed loop frequency (ω > 0 traces C,
/// ω < 0 traces C̄), and Larmor frequency ω₀ = γB₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopParams {
    pub theta: f64,
    pub omega: f64,
    pub omega0: f64,
}

impl LoopParams {
    pub fn new(theta: f64, omega: f64, omega0: f64) -> Result<Self> {
        let p = Self {
            theta,
            omega,
            omega0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("theta", self.theta)?;
        check_finite("omega", self.omega)?;
        check_finite("omega0", self.omega0)?;
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::invalid("theta", "must lie in [0, π]"));
        }
        if self.omega == 0.0 {
            return Err(Error::invalid("omega", "omega must be nonzero"));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::invalid("omega0", "must be positive"));
        }
        Ok(())
    }

    /// Duration of one loop, 2π/|ω|.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega.abs()
    }

    /// The same cone traced in the opposite direction.
    pub fn reversed(&self) -> Self {
        Self {
            omega: -self.omega,
            ..*self
        }
    }

    /// Unit direction `b₀(t)` of the root field.
    pub fn direction(&self, t: f64) -> FieldVector {
        let (st, ct) = self.theta.sin_cos();
        let (sw, cw) = (self.omega * t).sin_cos();
        FieldVector::new(st * cw, st * sw, ct)
    }

    /// Analytic `∂ₜb₀(t)`.
    pub fn direction_rate(&self, t: f64) -> FieldVector {
        let st = self.theta.sin();
        let (sw, cw) = (self.omega * t).sin_cos();
        FieldVector::new(-self.omega * st * sw, self.omega * st * cw, 0.0)
    }
}

/// Root field `γB₀(t) = ω₀(sinθ cos ωt, sinθ sin ωt, cosθ)`.
pub fn root_field(p: &LoopParams, t: f64) -> FieldVector {
    p.omega0 * p.direction(t)
}

/// A time-parametrized unit vector.
pub trait DirectionCurve {
    fn direction(&self, t: f64) -> FieldVector;

    /// Analytic derivative, when the parametrization knows it.
    fn rate(&self, _t: f64) -> Option<FieldVector> {
        None
    }

    /// Characteristic time scale used to size finite-difference steps.
    fn time_scale(&self) -> f64 {
        1.0
    }
}

impl DirectionCurve for LoopParams {
    fn direction(&self, t: f64) -> FieldVector {
        LoopParams::direction(self, t)
    }

    fn rate(&self, t: f64) -> Option<FieldVector> {
        Some(self.direction_rate(t))
    }

    fn time_scale(&self) -> f64 {
        self.period()
    }
}

/// Direction curve backed by a closure; derivatives come from finite
/// differences.
pub struct SampledCurve<F> {
    f: F,
    time_scale: f64,
}

impl<F: Fn(f64) -> FieldVector> SampledCurve<F> {
    pub fn new(f: F, time_scale: f64) -> Self {
        Self { f, time_scale }
    }
}

impl<F: Fn(f64) -> FieldVector> DirectionCurve for SampledCurve<F> {
    fn direction(&self, t: f64) -> FieldVector {
        (self.f)(t)
    }

    fn time_scale(&self) -> f64 {
        self.time_scale
    }
}

const UNIT_TOL: f64 = 1e-9;
const FD_STABILITY: f64 = 1e-9;

/// Counterdiabatic correction `b₀ × ∂ₜb₀`.
///
/// Uses the analytic derivative when the curve provides one; otherwise a
/// central difference with `h = 1e-6·time_scale`, halved until two
/// successive estimates agree to 1e-9.
pub fn tqd_correction(b0: &impl DirectionCurve, t: f64) -> Result<FieldVector> {
    let b = b0.direction(t);
    if (b.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(
            "b0",
            format!("direction has norm {} at t = {t}", b.norm()),
        ));
    }
    let rate = match b0.rate(t) {
        Some(r) => r,
        None => finite_difference_rate(b0, t)?,
    };
    Ok(b.cross(rate))
}

fn finite_difference_rate(b0: &impl DirectionCurve, t: f64) -> Result<FieldVector> {
    let central = |h: f64| (0.5 / h) * (b0.direction(t + h) - b0.direction(t - h));
    let mut h = 1e-6 * b0.time_scale();
    let mut prev = central(h);
    for _ in 0..12 {
        h *= 0.5;
        let next = central(h);
        if next.max_abs_diff(prev) <= FD_STABILITY {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::UnstableDerivative(t))
}

/// Transitionless field
/// `(ω₀ − ω cosθ) sinθ (cos ωt, sin ωt, 0) + (ω₀ cosθ + ω sin²θ) e_z`.
pub fn tqd_field(p: &LoopParams, t: f64) -> FieldVector {
    let (st, ct) = p.theta.sin_cos();
    let (sw, cw) = (p.omega * t).sin_cos();
    let radial = (p.omega0 - p.omega * ct) * st;
    FieldVector::new(radial * cw, radial * sw, p.omega0 * ct + p.omega * st * st)
}

/// `γΔB = γB(ω) − γB(−ω) = 2 sinθ (−ω cosθ cos ωt, ω₀ sin ωt, ω sinθ)`.
///
/// Both loops are compared at the same local time `t`; the `cos ωt`
/// and `sin ωt` factors are those of the forward loop.
pub fn delta_field(p: &LoopParams, t: f64) -> FieldVector {
    let (st, ct) = p.theta.sin_cos();
    let (sw, cw) = (p.omega * t).sin_cos();
    (2.0 * st) * FieldVector::new(-p.omega * ct * cw, p.omega0 * sw, p.omega * st)
}

/// `|γB| = ω₀ √(1 + (ω sinθ / ω₀)²)`, the same for both loop directions.
pub fn tqd_field_magnitude(p: &LoopParams) -> f64 {
    let r = p.omega * p.theta.sin() / p.omega0;
    p.omega0 * (1.0 + r * r).sqrt()
}

/// Two-qubit Ising setting seen by the target qubit I.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitParams {
    /// ω_I = γ_I B₀.
    pub omega_i: f64,
    /// Ising coupling J.
    pub j: f64,
    /// Signed loop frequency.
    pub omega: f64,
    /// Rabi frequency of the π pulses.
    pub omega_pi: f64,
}

impl TwoQubitParams {
    pub fn new(omega_i: f64, j: f64, omega: f64, omega_pi: f64) -> Result<Self> {
        let p = Self {
            omega_i,
            j,
            omega,
            omega_pi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with the default π-pulse rate 50|ω|.
    pub fn with_default_pulse(omega_i: f64, j: f64, omega: f64) -> Result<Self> {
        Self::new(omega_i, j, omega, 50.0 * omega.abs())
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("omega_i", self.omega_i)?;
        check_finite("j", self.j)?;
        check_finite("omega", self.omega)?;
        check_finite("omega_pi", self.omega_pi)?;
        if self.omega_i <= 0.0 {
            return Err(Error::invalid("omega_i", "must be positive"));
        }
        if self.j == 0.0 {
            return Err(Error::invalid("j", "coupling must be nonzero"));
        }
        if self.omega == 0.0 {
            return Err(Error::invalid("omega", "omega must be nonzero"));
        }
        if self.omega_pi <= 0.0 {
            return Err(Error::invalid("omega_pi", "must be positive"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega.abs()
    }

    pub fn reversed(&self) -> Self {
        Self {
            omega: -self.omega,
            ..*self
        }
    }

    /// Effective Larmor frequency of each conditional block, √(ω_I² + J²).
    pub fn block_frequency(&self) -> f64 {
        self.omega_i.hypot(self.j)
    }

    /// cos θ̃ = J / √(ω_I² + J²).
    pub fn cos_theta_tilde(&self) -> f64 {
        self.j / self.block_frequency()
    }

    /// sin θ̃ = ω_I / √(ω_I² + J²).
    pub fn sin_theta_tilde(&self) -> f64 {
        self.omega_i / self.block_frequency()
    }

    /// θ̃ ∈ (0, π); it falls in (0, π/2) for J > 0.
    pub fn theta_tilde(&self) -> f64 {
        self.sin_theta_tilde().atan2(self.cos_theta_tilde())
    }

    /// Polar angle θ_q of the conditional root field: θ̃ for q = 0, π − θ̃ for q = 1.
    pub fn theta_q(&self, q: u8) -> f64 {
        if q == 0 {
            self.theta_tilde()
        } else {
            PI - self.theta_tilde()
        }
    }

    /// The single-spin loop that block `q` traces.
    pub fn block_loop(&self, q: u8) -> LoopParams {
        LoopParams {
            theta: self.theta_q(q),
            omega: self.omega,
            omega0: self.block_frequency(),
        }
    }
}

fn sign_q(q: u8) -> f64 {
    1.0 - 2.0 * f64::from(q)
}

/// Root field of block `q`: `ω_I (cos ωt, sin ωt, (1−2q) J/ω_I)`.
pub fn conditional_root_field(p: &TwoQubitParams, q: u8, t: f64) -> FieldVector {
    let (sw, cw) = (p.omega * t).sin_cos();
    FieldVector::new(p.omega_i * cw, p.omega_i * sw, sign_q(q) * p.j)
}

/// Transitionless field seen by qubit I when qubit II is in `|q⟩`:
/// `[ω_I − (1−2q) ω sinθ̃ cosθ̃](cos ωt, sin ωt, 0) + [(1−2q)J + ω sin²θ̃] e_z`.
pub fn two_qubit_conditional_field(p: &TwoQubitParams, q: u8, t: f64) -> FieldVector {
    let (s, c) = (p.sin_theta_tilde(), p.cos_theta_tilde());
    let (sw, cw) = (p.omega * t).sin_cos();
    let radial = p.omega_i - sign_q(q) * p.omega * s * c;
    FieldVector::new(radial * cw, radial * sw, sign_q(q) * p.j + p.omega * s * s)
}

/// Coefficients of the static laboratory Hamiltonian
/// `ω_I′ sinθ′ S_x⊗1 + ω_I′ cosθ′ S_z⊗1 + 2J_zz S_z⊗S_z + 2J_xz S_x⊗S_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpParams {
    pub j_xz: f64,
    pub j_zz: f64,
    pub theta_prime: f64,
    pub omega_i_prime: f64,
}

/// Field on qubit I in the frame rotating at ω about z:
/// `[ω_I′ sinθ′ + (1−2q)J_xz](cos ωt, sin ωt, 0) + [ω_I′ cosθ′ + ω + (1−2q)J_zz] e_z`.
pub fn exp_rotating_field(e: &ExpParams, omega: f64, q: u8, t: f64) -> FieldVector {
    let (sp, cp) = e.theta_prime.sin_cos();
    let (sw, cw) = (omega * t).sin_cos();
    let radial = e.omega_i_prime * sp + sign_q(q) * e.j_xz;
    FieldVector::new(
        radial * cw,
        radial * sw,
        e.omega_i_prime * cp + omega + sign_q(q) * e.j_zz,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn close(a: FieldVector, b: FieldVector, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn root_field_examples() {
        let p = LoopParams::new(0.0, 0.7, 2.0).unwrap();
        assert!(close(root_field(&p, 1.3), FieldVector::new(0.0, 0.0, 2.0), EPS));
        let p = LoopParams::new(PI / 2.0, 1.0, 1.0).unwrap();
        assert!(close(root_field(&p, 0.0), FieldVector::new(1.0, 0.0, 0.0), EPS));
        assert!(close(root_field(&p, PI / 2.0), FieldVector::new(0.0, 1.0, 0.0), EPS));
    }

    #[test]
    fn correction_examples() {
        let constant = SampledCurve::new(|_| FieldVector::new(0.0, 0.6, 0.8), 1.0);
        assert!(close(tqd_correction(&constant, 0.3).unwrap(), FieldVector::ZERO, EPS));

        let w = 1.7;
        let equator = LoopParams::new(PI / 2.0, w, 5.0).unwrap();
        assert!(close(
            tqd_correction(&equator, 0.0).unwrap(),
            FieldVector::new(0.0, 0.0, w),
            EPS
        ));

        let generic = LoopParams::new(PI / 3.0, 2.0, 1.0).unwrap();
        let c = tqd_correction(&generic, 0.0).unwrap();
        assert!(close(c, FieldVector::new(-(3.0f64).sqrt() / 2.0, 0.0, 1.5), EPS));
    }

    #[test]
    fn finite_difference_matches_analytic() {
        let p = LoopParams::new(1.1, -0.8, 3.0).unwrap();
        let sampled = SampledCurve::new(move |t| p.direction(t), p.period());
        for t in [0.0, 0.4, 2.9, 7.0] {
            let fd = tqd_correction(&sampled, t).unwrap();
            let exact = tqd_correction(&p, t).unwrap();
            assert!(close(fd, exact, 1e-8), "t = {t}: {fd:?} vs {exact:?}");
        }
    }

    #[test]
    fn correction_rejects_non_unit_direction() {
        let bad = SampledCurve::new(|_| FieldVector::new(0.0, 0.0, 1.1), 1.0);
        assert!(matches!(
            tqd_correction(&bad, 0.0),
            Err(Error::InvalidParameter { name: "b0", .. })
        ));
    }

    #[test]
    fn tqd_field_examples() {
        let pole = LoopParams::new(0.0, 3.0, 2.0).unwrap();
        for t in [0.0, 0.5, 1.9] {
            assert!(close(tqd_field(&pole, t), FieldVector::new(0.0, 0.0, 2.0), EPS));
        }
        let eq = LoopParams::new(PI / 2.0, 0.5, 1.0).unwrap();
        assert!(close(tqd_field(&eq, 0.0), FieldVector::new(1.0, 0.0, 0.5), EPS));
        for t in [0.0, 1.0, 4.0] {
            assert!((tqd_field(&eq, t).norm() - 1.25f64.sqrt()).abs() < EPS);
            assert!((tqd_field(&eq.reversed(), t).norm() - 1.25f64.sqrt()).abs() < EPS);
        }
        assert!((tqd_field_magnitude(&eq) - 1.118034).abs() < 1e-6);
    }

    #[test]
    fn delta_field_examples() {
        let pole = LoopParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(close(delta_field(&pole, 0.7), FieldVector::ZERO, EPS));
        let eq = LoopParams::new(PI / 2.0, 0.3, 1.0).unwrap();
        assert!(close(delta_field(&eq, 0.0), FieldVector::new(0.0, 0.0, 0.6), EPS));

        // Doubling ω at fixed phase ωt doubles x and z but not y.
        let p = LoopParams::new(0.9, 0.4, 1.5).unwrap();
        let fast = LoopParams { omega: 0.8, ..p };
        let phase = 1.2;
        let slow_d = delta_field(&p, phase / p.omega);
        let fast_d = delta_field(&fast, phase / fast.omega);
        assert!((fast_d.x - 2.0 * slow_d.x).abs() < EPS);
        assert!((fast_d.z - 2.0 * slow_d.z).abs() < EPS);
        assert!((fast_d.y - slow_d.y).abs() < EPS);
    }

    #[test]
    fn rotation_examples() {
        let w0 = 2.5;
        assert!(close(
            FieldVector::new(0.0, 0.0, w0).rotate_y(PI / 2.0),
            FieldVector::new(w0, 0.0, 0.0),
            EPS
        ));
        let (theta, vartheta): (f64, f64) = (0.6, 1.9);
        let n = FieldVector::new(theta.sin(), 0.0, theta.cos());
        assert!(close(
            n.rotate_y(vartheta - theta),
            FieldVector::new(vartheta.sin(), 0.0, vartheta.cos()),
            EPS
        ));
    }

    #[test]
    fn conditional_field_examples() {
        let p = TwoQubitParams::new(1.0, 1.0, 0.2, 10.0).unwrap();
        assert!(close(
            two_qubit_conditional_field(&p, 0, 0.0),
            FieldVector::new(0.9, 0.0, 1.1),
            EPS
        ));
        assert!(close(
            two_qubit_conditional_field(&p, 1, 0.0),
            FieldVector::new(1.1, 0.0, -0.9),
            EPS
        ));

        // Large coupling: θ̃ → 0 removes the correction.
        let strong = TwoQubitParams::new(1.0, 1e9, 0.2, 10.0).unwrap();
        for q in [0, 1] {
            let f = two_qubit_conditional_field(&strong, q, 0.0);
            assert!((f.x - 1.0).abs() < 1e-9);
            assert!((f.z - sign_q(q) * 1e9).abs() < 1e-6);
        }
    }

    #[test]
    fn conditional_field_is_block_loop_tqd_field() {
        let p = TwoQubitParams::new(0.7, -1.3, 0.45, 10.0).unwrap();
        for q in [0, 1] {
            for t in [0.0, 1.0, 5.5] {
                let via_block = tqd_field(&p.block_loop(q), t);
                assert!(close(two_qubit_conditional_field(&p, q, t), via_block, 1e-12));
                let root = root_field(&p.block_loop(q), t);
                assert!(close(conditional_root_field(&p, q, t), root, 1e-12));
            }
        }
    }

    #[test]
    fn exp_field_without_couplings_ignores_q() {
        let e = ExpParams {
            j_xz: 0.0,
            j_zz: 0.0,
            theta_prime: 2.0,
            omega_i_prime: 1.3,
        };
        for t in [0.0, 0.3] {
            assert_eq!(exp_rotating_field(&e, 0.5, 0, t), exp_rotating_field(&e, 0.5, 1, t));
        }
        let e = ExpParams { j_zz: 0.4, ..e };
        let dz = exp_rotating_field(&e, 0.5, 0, 0.1).z - exp_rotating_field(&e, 0.5, 1, 0.1).z;
        assert!((dz - 0.8).abs() < EPS);
    }

    #[test]
    fn parameter_validation() {
        assert!(LoopParams::new(4.0, 1.0, 1.0).is_err());
        assert!(LoopParams::new(1.0, 0.0, 1.0).is_err());
        assert!(LoopParams::new(1.0, 1.0, 0.0).is_err());
        assert!(LoopParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(TwoQubitParams::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(TwoQubitParams::new(1.0, 1.0, 1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn field_consistency_and_magnitude(
            theta in 0.0f64..PI,
            omega in prop_oneof![-5.0f64..-0.05, 0.05f64..5.0],
            omega0 in 0.1f64..5.0,
            frac in 0.0f64..1.0,
        ) {
            let p = LoopParams::new(theta, omega, omega0).unwrap();
            let t = frac * p.period();
            let corr = tqd_correction(&p, t).unwrap();
            prop_assert!(close(tqd_field(&p, t), root_field(&p, t) + corr, 1e-9));
            prop_assert!(corr.dot(p.direction(t)).abs() < 1e-10);
            let mag = tqd_field_magnitude(&p);
            prop_assert!((tqd_field(&p, t).norm() - mag).abs() < 1e-10 * mag.max(1.0));
            prop_assert!((tqd_field(&p.reversed(), t).norm() - mag).abs() < 1e-10 * mag.max(1.0));
            let delta = tqd_field(&p, t) - tqd_field(&p.reversed(), t);
            prop_assert!(close(delta_field(&p, t), delta, 1e-10 * mag.max(1.0)));
        }

        #[test]
        fn control_state_flip_only_flips_signed_terms(
            omega_i in 0.1f64..3.0,
            j in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
            omega in prop_oneof![-2.0f64..-0.05, 0.05f64..2.0],
            t in 0.0f64..10.0,
        ) {
            let p = TwoQubitParams::new(omega_i, j, omega, 1.0).unwrap();
            let (s, c) = (p.sin_theta_tilde(), p.cos_theta_tilde());
            let f0 = two_qubit_conditional_field(&p, 0, t);
            let f1 = two_qubit_conditional_field(&p, 1, t);
            let (sw, cw) = (omega * t).sin_cos();
            // Sum cancels every (1−2q) term.
            let even = FieldVector::new(2.0 * omega_i * cw, 2.0 * omega_i * sw, 2.0 * omega * s * s);
            prop_assert!(close(f0 + f1, even, 1e-10));
            let odd = FieldVector::new(-2.0 * omega * s * c * cw, -2.0 * omega * s * c * sw, 2.0 * j);
            prop_assert!(close(f0 - f1, odd, 1e-10));
        }
    }
}
