//! Closed-form gates, universality and synthesis by echo sequences.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{exp_rotating_field, two_qubit_conditional_field, ExpParams, LoopParams, TwoQubitParams};
use crate::phase::{
    delta_omega, sequence_phases, solid_angle, EigenFrame, EigenLabel, LoopFrame, PhaseDecomposition,
};
use crate::propagate::{convergence_report, propagate_schedule, ConvergenceReport, StepPolicy, DEFAULT_SAMPLES};
use crate::quantum::{gate_distance, Dim, Matrix, SpinState, Unitary, C64};
use crate::schedule::{
    build_echo_sequence, default_omega_pi, rotate_schedule, ConditionalDrive, SegmentSchedule, TwoQubitSequence,
};

/// Threshold separating vanishing from non-vanishing universality witnesses.
pub const UNIVERSALITY_THRESHOLD: f64 = 1e-9;

/// `U(ϑ, Ω) = e^{−iΩ n′·σ}` with `n′ = (sinϑ, 0, cosϑ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleGateSpec {
    pub vartheta: f64,
    pub solid_angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitGateSpec {
    pub vartheta0: f64,
    pub vartheta1: f64,
    pub delta_omega: f64,
}

/// How `closed_form_two_qubit` treats nonzero `ϑ_q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisMode {
    /// Only `ϑ₀ = ϑ₁ = 0` is accepted.
    #[default]
    PhaseGate,
    /// Phases are attached to `φ_p(ϑ_q) ⊗ |q⟩`.
    Substitution,
}

pub fn closed_form_single(spec: &SingleGateSpec) -> Unitary {
    let (c2, s2) = ((0.5 * spec.vartheta).cos().powi(2), (0.5 * spec.vartheta).sin().powi(2));
    let (minus, plus) = (C64::from_polar(1.0, -spec.solid_angle), C64::from_polar(1.0, spec.solid_angle));
    let off = C64::new(0.0, -spec.vartheta.sin() * spec.solid_angle.sin());
    Unitary::from_trusted(Matrix::from_2x2([
        [minus * c2 + plus * s2, off],
        [off, minus * s2 + plus * c2],
    ]))
}

/// `Σ_pq e^{(−1)^{p+q} 2iΔΩ} |φ_p(ϑ_q)⟩⟨φ_p(ϑ_q)| ⊗ |q⟩⟨q|`.
pub fn closed_form_two_qubit(spec: &TwoQubitGateSpec, mode: BasisMode) -> Result<Unitary> {
    if mode == BasisMode::PhaseGate && (spec.vartheta0 != 0.0 || spec.vartheta1 != 0.0) {
        return Err(Error::Unsupported(
            "general-vartheta two-qubit gates need the basis-substitution mode".into(),
        ));
    }
    let vartheta = [spec.vartheta0, spec.vartheta1];
    let mut m = Matrix::zeros(Dim::Four);
    for q in 0..2u8 {
        for p in 0..2u8 {
            let (phi0, phi1) = crate::phase::instantaneous_eigenvectors(vartheta[usize::from(q)], 0.0, 0.0);
            let phi = if p == 0 { phi0 } else { phi1 };
            let v = phi.kron(&SpinState::basis(Dim::Two, usize::from(q))?)?;
            let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
            let w = C64::from_polar(1.0, sign * 2.0 * spec.delta_omega);
            let a = v.amplitudes();
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] += w * a[i] * a[j].conj();
                }
            }
        }
    }
    Ok(Unitary::from_trusted(m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    /// `sinΩ₁ sinΩ₂ sin(ϑ₁−ϑ₂)`.
    pub witness: f64,
    /// Frobenius norm of `[U₁, U₂]`.
    pub commutator_norm: f64,
    pub universal: bool,
    pub commutator_verdict: bool,
}

pub fn universality_check(g1: &SingleGateSpec, g2: &SingleGateSpec) -> UniversalityReport {
    let witness = g1.solid_angle.sin() * g2.solid_angle.sin() * (g1.vartheta - g2.vartheta).sin();
    let (u1, u2) = (*closed_form_single(g1).matrix(), *closed_form_single(g2).matrix());
    let commutator_norm = (u1 * u2 - u2 * u1).frobenius_norm();
    UniversalityReport {
        witness,
        commutator_norm,
        universal: witness.abs() > UNIVERSALITY_THRESHOLD,
        commutator_verdict: commutator_norm > UNIVERSALITY_THRESHOLD,
    }
}

/// Real and imaginary parts of a matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixParts {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Matrix> for MatrixParts {
    fn from(m: &Matrix) -> Self {
        let rows = m.rows();
        Self {
            re: rows.iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
            im: rows.iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GateSpec {
    Single(SingleGateSpec),
    TwoQubit(TwoQubitGateSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub spec: GateSpec,
    /// Loop angles, frequencies and pulse settings used for the run.
    pub derived: BTreeMap<String, f64>,
    pub simulated: MatrixParts,
    pub target: MatrixParts,
    pub distance: f64,
    pub phases: Vec<PhaseDecomposition>,
    pub convergence: Option<ConvergenceReport>,
    /// Largest off-diagonal element in the tracked eigenbasis.
    pub leakage: Option<f64>,
    /// `arg⟨φ_pq|U|φ_pq⟩` minus its closed form, wrapped, in label order.
    pub phase_errors: Option<Vec<f64>>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub simulated_unitary: Option<Unitary>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisOptions {
    /// Defaults to 50|ω|.
    pub omega_pi: Option<f64>,
    pub policy: StepPolicy,
    pub samples: usize,
    /// Base substep count of the convergence report; `None` skips it.
    pub convergence_base: Option<usize>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            omega_pi: None,
            policy: StepPolicy::default(),
            samples: DEFAULT_SAMPLES,
            convergence_base: Some(200),
        }
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Cone angle with solid angle `|Ω|`: `θ = arccos(1 − |Ω|/2π)`.
pub fn cone_angle_for(solid: f64) -> Result<f64> {
    let a = solid.abs();
    if !solid.is_finite() || a == 0.0 || a >= 4.0 * PI {
        return Err(Error::invalid(
            "solid_angle",
            format!("|{solid}| must lie in (0, 4π) to be enclosed by a cone loop"),
        ));
    }
    Ok((1.0 - a / (2.0 * PI)).acos())
}

/// Echo schedule realizing `U(ϑ, Ω)` and the frame it starts in. Negative
/// `Ω` runs the first loop clockwise.
pub fn single_gate_schedule(
    spec: &SingleGateSpec,
    omega: f64,
    omega0: f64,
    omega_pi: Option<f64>,
) -> Result<(SegmentSchedule, LoopFrame)> {
    if !spec.vartheta.is_finite() {
        return Err(Error::invalid("vartheta", "must be finite"));
    }
    let theta = cone_angle_for(spec.solid_angle)?;
    let w = omega.abs() * spec.solid_angle.signum();
    let params = LoopParams::new(theta, w, omega0)?;
    let omega_pi = omega_pi.unwrap_or_else(|| default_omega_pi(omega));
    let tilt = spec.vartheta - theta;
    let s = rotate_schedule(&build_echo_sequence(&params, omega_pi, [0.0; 3])?, tilt)?;
    Ok((s, LoopFrame { params, tilt }))
}

pub fn synthesize_single_gate(
    spec: &SingleGateSpec,
    omega: f64,
    omega0: f64,
    options: &SynthesisOptions,
) -> Result<GateReport> {
    let (s, frame) = single_gate_schedule(spec, omega, omega0, options.omega_pi)?;
    let phi0 = frame.eigenvector(EigenLabel::Single(0), 0.0)?;
    let traj = propagate_schedule(&s, &phi0, options.policy, options.samples)?;
    let simulated = *traj.final_propagator();
    let target = closed_form_single(spec);

    let mut phases = Vec::new();
    for label in EigenLabel::all(Dim::Two) {
        let t = traj.with_initial(&frame.eigenvector(label, 0.0)?)?;
        let measured = sequence_phases(&t, &s, label)?;
        let sign = 2.0 * f64::from(label.p()) - 1.0;
        phases.push(PhaseDecomposition::new(&measured, sign * spec.solid_angle, 0.0));
    }
    let convergence = options.convergence_base.map(|n| convergence_report(&s, n)).transpose()?;

    let mut derived = BTreeMap::new();
    derived.insert("theta".into(), frame.params.theta);
    derived.insert("omega".into(), frame.params.omega);
    derived.insert("omega0".into(), omega0);
    derived.insert("omega_pi".into(), options.omega_pi.unwrap_or_else(|| default_omega_pi(omega)));
    derived.insert("tilt".into(), frame.tilt);
    derived.insert("solid_angle_of_loop".into(), solid_angle(frame.params.theta));

    Ok(GateReport {
        spec: GateSpec::Single(*spec),
        derived,
        simulated: simulated.matrix().into(),
        target: target.matrix().into(),
        distance: gate_distance(&simulated, &target)?,
        phases,
        convergence,
        leakage: None,
        phase_errors: None,
        notes: Vec::new(),
        simulated_unitary: Some(simulated),
    })
}

/// Target of the eight-element sequence: phases `(−1)^{p+q} 2ΔΩ` on the
/// conditional eigenvectors at `t = 0`.
pub fn two_qubit_target(p: &TwoQubitParams) -> Result<Unitary> {
    closed_form_two_qubit(
        &TwoQubitGateSpec {
            vartheta0: p.theta_q(0),
            vartheta1: p.theta_q(1),
            delta_omega: delta_omega(p),
        },
        BasisMode::Substitution,
    )
}

/// Matrix of `u` in the eigenbasis `φ_pq(0)`.
pub fn in_eigenbasis(p: &TwoQubitParams, u: &Unitary) -> Result<Matrix> {
    let basis = crate::phase::two_qubit_eigenvectors(p, 0.0)?;
    Ok(Matrix::from_fn(Dim::Four, |k, l| u.matrix().matrix_element(&basis[k], &basis[l])))
}

pub fn synthesize_two_qubit_gate(p: &TwoQubitParams, options: &SynthesisOptions) -> Result<GateReport> {
    synthesize_two_qubit_sequence(&TwoQubitSequence::new(*p), options)
}

pub fn synthesize_two_qubit_sequence(seq: &TwoQubitSequence, options: &SynthesisOptions) -> Result<GateReport> {
    let p = seq.params;
    let s = seq.build()?;
    let phi00 = p.eigenvector(EigenLabel::Pair(0, 0), 0.0)?;
    let traj = propagate_schedule(&s, &phi00, options.policy, options.samples)?;
    let simulated = *traj.final_propagator();
    let target = two_qubit_target(&p)?;
    let m = in_eigenbasis(&p, &simulated)?;
    let dw = delta_omega(&p);

    let mut leakage: f64 = 0.0;
    let mut phase_errors = Vec::new();
    for (k, label) in EigenLabel::all(Dim::Four).into_iter().enumerate() {
        let EigenLabel::Pair(a, b) = label else { unreachable!() };
        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
        phase_errors.push(wrap(m[(k, k)].arg() - sign * 2.0 * dw));
        for l in 0..4 {
            if l != k {
                leakage = leakage.max(m[(k, l)].norm());
            }
        }
    }

    let mut phases = Vec::new();
    let mut notes = Vec::new();
    for label in EigenLabel::all(Dim::Four) {
        let EigenLabel::Pair(a, b) = label else { unreachable!() };
        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
        let t = traj.with_initial(&p.eigenvector(label, 0.0)?)?;
        match sequence_phases(&t, &s, label) {
            Ok(measured) => phases.push(PhaseDecomposition::new(&measured, sign * 2.0 * dw, 0.0)),
            Err(e) => notes.push(format!("label {label}: {e}")),
        }
    }
    let convergence = options.convergence_base.map(|n| convergence_report(&s, n)).transpose()?;

    let mut derived = BTreeMap::new();
    derived.insert("omega_i".into(), p.omega_i);
    derived.insert("j".into(), p.j);
    derived.insert("omega".into(), p.omega);
    derived.insert("omega_pi".into(), p.omega_pi);
    derived.insert("theta_tilde".into(), p.theta_tilde());
    derived.insert("delta_omega".into(), dw);
    derived.insert("control_field".into(), seq.control_field);

    Ok(GateReport {
        spec: GateSpec::TwoQubit(TwoQubitGateSpec {
            vartheta0: p.theta_q(0),
            vartheta1: p.theta_q(1),
            delta_omega: dw,
        }),
        derived,
        simulated: simulated.matrix().into(),
        target: target.matrix().into(),
        distance: gate_distance(&simulated, &target)?,
        phases,
        convergence,
        leakage: Some(leakage),
        phase_errors: Some(phase_errors),
        notes,
        simulated_unitary: Some(simulated),
    })
}

/// Static laboratory coefficients whose rotating-frame image reproduces the
/// transitionless conditional field.
pub fn experimental_parameter_map(p: &TwoQubitParams) -> ExpParams {
    let (wi, j, w) = (p.omega_i, p.j, p.omega);
    let c = p.cos_theta_tilde();
    let z = -w * c * c;
    ExpParams {
        j_xz: -w * wi * j / (wi * wi + j * j),
        j_zz: j,
        theta_prime: wi.atan2(z),
        omega_i_prime: wi.hypot(z),
    }
}

/// Largest componentwise gap between the rotating-frame field built from
/// `e` and the conditional field, over both `q` and `samples` times in one
/// period.
pub fn exp_field_deviation(e: &ExpParams, p: &TwoQubitParams, samples: usize) -> Result<f64> {
    p.validate()?;
    if samples == 0 {
        return Err(Error::invalid("samples", "must be positive"));
    }
    let mut worst: f64 = 0.0;
    for q in 0..2u8 {
        for k in 0..samples {
            let t = p.period() * k as f64 / samples as f64;
            let a = exp_rotating_field(e, p.omega, q, t);
            let b = two_qubit_conditional_field(p, q, t);
            worst = worst.max(a.max_abs_diff(b));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpEquivalence {
    pub params: ExpParams,
    pub field_deviation: f64,
    /// Distance between the final propagators of the rotating-frame run
    /// (frame term included) and the transitionless run.
    pub gate_distance: f64,
    pub transitionless: GateReport,
    pub experimental: GateReport,
}

pub fn verify_exp_equivalence(p: &TwoQubitParams, samples: usize, options: &SynthesisOptions) -> Result<ExpEquivalence> {
    let params = experimental_parameter_map(p);
    let field_deviation = exp_field_deviation(&params, p, samples)?;
    let transitionless = synthesize_two_qubit_gate(p, options)?;
    let experimental = synthesize_two_qubit_sequence(
        &TwoQubitSequence {
            drive: ConditionalDrive::Experimental,
            ..TwoQubitSequence::new(*p)
        },
        options,
    )?;
    let gate_distance = gate_distance(
        transitionless.simulated_unitary.as_ref().expect("set by synthesis"),
        experimental.simulated_unitary.as_ref().expect("set by synthesis"),
    )?;
    Ok(ExpEquivalence {
        params,
        field_deviation,
        gate_distance,
        transitionless,
        experimental,
    })
}

/// Effect of the qubit-II Zeeman term that the block model drops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlFieldProbe {
    pub control_field: f64,
    pub distance_to_block_model: f64,
    pub leakage: f64,
}

pub fn control_field_probe(p: &TwoQubitParams, control_field: f64, options: &SynthesisOptions) -> Result<ControlFieldProbe> {
    if !control_field.is_finite() {
        return Err(Error::invalid("control_field", "must be finite"));
    }
    let report = synthesize_two_qubit_sequence(
        &TwoQubitSequence {
            control_field,
            ..TwoQubitSequence::new(*p)
        },
        options,
    )?;
    Ok(ControlFieldProbe {
        control_field,
        distance_to_block_model: report.distance,
        leakage: report.leakage.unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{expm_hermitian, Hermitian};
    use crate::schedule::PulseTarget;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fast() -> SynthesisOptions {
        SynthesisOptions {
            policy: StepPolicy::TargetError(1e-8),
            convergence_base: None,
            ..SynthesisOptions::default()
        }
    }

    #[test]
    fn named_closed_forms() {
        let w1 = 0.7;
        let phase = closed_form_single(&SingleGateSpec { vartheta: 0.0, solid_angle: w1 });
        let expected = Matrix::from_2x2([[C64::from_polar(1.0, -w1), c(0.0, 0.0)], [c(0.0, 0.0), C64::from_polar(1.0, w1)]]);
        assert!(phase.matrix().max_abs_diff(&expected) < 1e-15);

        let flip = closed_form_single(&SingleGateSpec { vartheta: PI / 2.0, solid_angle: PI / 2.0 });
        let expected = Matrix::from_2x2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, -1.0), c(0.0, 0.0)]]);
        assert!(flip.matrix().max_abs_diff(&expected) < 1e-15);

        let h = closed_form_single(&SingleGateSpec { vartheta: PI / 2.0, solid_angle: PI / 4.0 });
        let r = FRAC_1_SQRT_2;
        let expected = Matrix::from_2x2([[c(r, 0.0), c(0.0, -r)], [c(0.0, -r), c(r, 0.0)]]);
        assert!(h.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn two_qubit_closed_forms() {
        let id = closed_form_two_qubit(&TwoQubitGateSpec { vartheta0: 0.0, vartheta1: 0.0, delta_omega: 0.0 }, BasisMode::PhaseGate).unwrap();
        assert!(id.matrix().max_abs_diff(&Matrix::identity(Dim::Four)) < 1e-15);

        let g = closed_form_two_qubit(&TwoQubitGateSpec { vartheta0: 0.0, vartheta1: 0.0, delta_omega: PI / 8.0 }, BasisMode::PhaseGate).unwrap();
        let diff = g.matrix()[(0, 0)].arg() - g.matrix()[(1, 1)].arg();
        assert!((diff - PI / 2.0).abs() < 1e-15);
        assert!(g.matrix().is_diagonal(0.0));

        let minus = closed_form_two_qubit(&TwoQubitGateSpec { vartheta0: 0.0, vartheta1: 0.0, delta_omega: PI / 2.0 }, BasisMode::PhaseGate).unwrap();
        assert!(minus.matrix().max_abs_diff(&Matrix::identity(Dim::Four).scale_real(-1.0)) < 1e-15);
        assert!(gate_distance(&minus, &Unitary::identity(Dim::Four)).unwrap() < 1e-15);

        let tilted = TwoQubitGateSpec { vartheta0: 0.3, vartheta1: 0.0, delta_omega: 0.2 };
        assert!(matches!(closed_form_two_qubit(&tilted, BasisMode::PhaseGate), Err(Error::Unsupported(_))));
        let u = closed_form_two_qubit(&tilted, BasisMode::Substitution).unwrap();
        assert!(u.matrix().unitarity_defect() < 1e-14);
    }

    #[test]
    fn universality_examples() {
        let a = SingleGateSpec { vartheta: 0.0, solid_angle: PI / 3.0 };
        let b = SingleGateSpec { vartheta: PI / 2.0, solid_angle: PI / 3.0 };
        let r = universality_check(&a, &b);
        assert!((r.witness.abs() - 0.75).abs() < 1e-12);
        assert!(r.universal && r.commutator_verdict);

        let r = universality_check(&a, &a);
        assert!(!r.universal && !r.commutator_verdict);

        let pi_gate = SingleGateSpec { vartheta: 0.0, solid_angle: PI };
        let r = universality_check(&pi_gate, &b);
        assert!(!r.universal && !r.commutator_verdict);
    }

    #[test]
    fn cone_angle_range() {
        assert!((cone_angle_for(PI).unwrap() - PI / 3.0).abs() < 1e-15);
        assert!((cone_angle_for(PI / 2.0).unwrap() - 0.75f64.acos()).abs() < 1e-15);
        assert!(cone_angle_for(0.0).is_err());
        assert!(cone_angle_for(4.0 * PI).is_err());
        assert!(cone_angle_for(-PI).is_ok());
    }

    #[test]
    fn synthesized_minus_identity() {
        let spec = SingleGateSpec { vartheta: PI / 3.0, solid_angle: PI };
        let r = synthesize_single_gate(&spec, 1.0, 1.0, &fast()).unwrap();
        assert!(r.distance < 1e-6, "{}", r.distance);
        let minus = Unitary::new(Matrix::identity(Dim::Two).scale_real(-1.0), 1e-12).unwrap();
        assert!(gate_distance(r.simulated_unitary.as_ref().unwrap(), &minus).unwrap() < 1e-6);
    }

    #[test]
    fn synthesized_spin_flip_and_negative_solid_angle() {
        for solid in [PI / 2.0, -PI / 2.0] {
            let spec = SingleGateSpec { vartheta: PI / 2.0, solid_angle: solid };
            let r = synthesize_single_gate(&spec, 1.0, 1.0, &fast()).unwrap();
            assert!(r.distance < 1e-6, "{solid}: {}", r.distance);
            for row in &r.phases {
                assert!(row.geometric_deviation < 1e-6);
                assert!(row.dynamical.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn two_qubit_gate_matches_sign_pattern() {
        let p = TwoQubitParams::new(1.0, 1.0, 0.5, 25.0).unwrap();
        let r = synthesize_two_qubit_gate(&p, &fast()).unwrap();
        assert!(r.leakage.unwrap() < 1e-6);
        assert!(r.phase_errors.as_ref().unwrap().iter().all(|e| e.abs() < 1e-5), "{:?}", r.phase_errors);
        assert!(r.distance < 1e-6);
        assert!((wrap(2.0 * delta_omega(&p)) - 2.602581).abs() < 1e-6);
        assert!(r.notes.is_empty());
    }

    #[test]
    fn bare_qubit_ii_half_turn_leaks() {
        let p = TwoQubitParams::new(1.0, 1.0, 0.5, 25.0).unwrap();
        let seq = TwoQubitSequence {
            control_pulse: PulseTarget::QubitII,
            ..TwoQubitSequence::new(p)
        };
        let r = synthesize_two_qubit_sequence(&seq, &fast()).unwrap();
        assert!(r.leakage.unwrap() > 0.1, "{:?}", r.leakage);
    }

    #[test]
    fn parameter_map_examples() {
        let e = experimental_parameter_map(&TwoQubitParams::new(1.0, 1.0, 0.1, 5.0).unwrap());
        assert!((e.j_xz + 0.05).abs() < 1e-15);
        assert_eq!(e.j_zz, 1.0);
        assert!((e.theta_prime.tan() + 20.0).abs() < 1e-9);
        assert!(e.theta_prime > PI / 2.0 && e.theta_prime < PI);
        assert!((e.omega_i_prime - 1.0025f64.sqrt()).abs() < 1e-15);

        let slow = experimental_parameter_map(&TwoQubitParams::new(1.0, 1.0, 1e-12, 5.0).unwrap());
        assert!(slow.j_xz.abs() < 1e-11 && (slow.omega_i_prime - 1.0).abs() < 1e-12);
        assert!((slow.theta_prime - PI / 2.0).abs() < 1e-11);

        let decoupled = experimental_parameter_map(&TwoQubitParams::new(1.0, 1e-12, 0.4, 20.0).unwrap());
        assert!(decoupled.j_xz.abs() < 1e-12);
        assert!((decoupled.omega_i_prime - 1.0).abs() < 1e-15);
        assert!((decoupled.theta_prime - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_map_deviates_linearly() {
        let p = TwoQubitParams::new(1.0, 1.0, 0.2, 10.0).unwrap();
        let mut e = experimental_parameter_map(&p);
        assert!(exp_field_deviation(&e, &p, 64).unwrap() < 1e-12);
        e.theta_prime += 1e-3;
        let d = exp_field_deviation(&e, &p, 64).unwrap();
        assert!((d / 1e-3 - 1.0).abs() < 0.01, "{d}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn closed_form_is_exponential(vartheta in -PI..PI, solid in -4.0 * PI..4.0 * PI) {
            let u = closed_form_single(&SingleGateSpec { vartheta, solid_angle: solid });
            // e^{−iΩ n′·σ} = exp(−i H t) with H = n′·σ/2 and t = 2Ω.
            let h = Hermitian::spin([vartheta.sin(), 0.0, vartheta.cos()]);
            let v = expm_hermitian(&h, 2.0 * solid);
            prop_assert!(u.matrix().max_abs_diff(v.matrix()) < 1e-12);
        }

        #[test]
        fn witness_tracks_commutator(
            t1 in -PI..PI, w1 in 0.0..4.0 * PI, t2 in -PI..PI, w2 in 0.0..4.0 * PI,
        ) {
            let r = universality_check(
                &SingleGateSpec { vartheta: t1, solid_angle: w1 },
                &SingleGateSpec { vartheta: t2, solid_angle: w2 },
            );
            prop_assert!((r.commutator_norm - 2.0 * 2f64.sqrt() * r.witness.abs()).abs() < 1e-12);
        }

        #[test]
        fn map_reproduces_conditional_field(wi in 0.1f64..3.0, j in -3.0f64..3.0, ratio in 0.01f64..10.0) {
            let p = TwoQubitParams::new(wi, j, ratio * wi, 50.0 * ratio * wi).unwrap();
            let e = experimental_parameter_map(&p);
            prop_assert!(exp_field_deviation(&e, &p, 32).unwrap() < 1e-10);
        }
    }
}
