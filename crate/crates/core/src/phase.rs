//! Instantaneous eigenbases, tracking fidelity and the split of accumulated
//! phase into dynamical, pulse and geometric parts.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldVector, LoopParams, TwoQubitParams};
use crate::propagate::{propagate_schedule, StepPolicy, Trajectory};
use crate::quantum::{Dim, Hermitian, SpinState, C64};
use crate::schedule::{build_echo_sequence, loop_segment, Generator, LoopDrive, SegmentLabel, SegmentSchedule};

/// Largest accepted phase step between adjacent samples.
pub const UNWRAP_LIMIT: f64 = PI / 4.0;
/// Fidelity floor below which a phase is not attributed to an eigenstate.
pub const PHASE_FIDELITY_FLOOR: f64 = 1.0 - 1e-6;
pub const INITIAL_MISMATCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenLabel {
    Single(u8),
    Pair(u8, u8),
}

impl EigenLabel {
    pub fn validate(self) -> Result<Self> {
        let ok = match self {
            EigenLabel::Single(p) => p < 2,
            EigenLabel::Pair(p, q) => p < 2 && q < 2,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::invalid("label", format!("{self} is out of range")))
        }
    }

    pub fn p(self) -> u8 {
        match self {
            EigenLabel::Single(p) | EigenLabel::Pair(p, _) => p,
        }
    }

    pub fn dim(self) -> Dim {
        match self {
            EigenLabel::Single(_) => Dim::Two,
            EigenLabel::Pair(..) => Dim::Four,
        }
    }

    pub fn all(dim: Dim) -> Vec<EigenLabel> {
        match dim {
            Dim::Two => vec![EigenLabel::Single(0), EigenLabel::Single(1)],
            Dim::Four => vec![
                EigenLabel::Pair(0, 0),
                EigenLabel::Pair(0, 1),
                EigenLabel::Pair(1, 0),
                EigenLabel::Pair(1, 1),
            ],
        }
    }
}

impl fmt::Display for EigenLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EigenLabel::Single(p) => write!(f, "{p}"),
            EigenLabel::Pair(p, q) => write!(f, "{p}{q}"),
        }
    }
}

/// `φ₀ = (cos θ/2, e^{iωt} sin θ/2)`, `φ₁ = (−sin θ/2, e^{iωt} cos θ/2)`.
pub fn instantaneous_eigenvectors(theta: f64, omega: f64, t: f64) -> (SpinState, SpinState) {
    let (s, c) = (0.5 * theta).sin_cos();
    let e = C64::from_polar(1.0, omega * t);
    let phi0 = SpinState::new(&[C64::new(c, 0.0), e * s]).expect("unit norm");
    let phi1 = SpinState::new(&[C64::new(-s, 0.0), e * c]).expect("unit norm");
    (phi0, phi1)
}

/// Spinor image of a rotation by `angle` about y.
fn rotate_spinor(state: &SpinState, angle: f64) -> SpinState {
    if angle == 0.0 {
        return *state;
    }
    let (s, c) = (0.5 * angle).sin_cos();
    let a = state.amplitudes();
    SpinState::new(&[c * a[0] - s * a[1], s * a[0] + c * a[1]]).expect("rotations preserve norm")
}

/// Family of root eigenvectors that a segment is meant to follow.
pub trait EigenFrame {
    fn dim(&self) -> Dim;
    fn eigenvector(&self, label: EigenLabel, t: f64) -> Result<SpinState>;
    fn energy(&self, label: EigenLabel) -> Result<f64>;
    fn root_hamiltonian(&self, t: f64) -> Hermitian;
}

fn check_label(label: EigenLabel, dim: Dim) -> Result<EigenLabel> {
    let label = label.validate()?;
    if label.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: dim.size(),
            right: label.dim().size(),
        });
    }
    Ok(label)
}

/// Single-spin cone loop, optionally tilted about y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopFrame {
    pub params: LoopParams,
    pub tilt: f64,
}

impl LoopFrame {
    pub fn new(params: LoopParams) -> Self {
        Self { params, tilt: 0.0 }
    }
}

impl EigenFrame for LoopFrame {
    fn dim(&self) -> Dim {
        Dim::Two
    }

    fn eigenvector(&self, label: EigenLabel, t: f64) -> Result<SpinState> {
        let p = check_label(label, Dim::Two)?.p();
        let (phi0, phi1) = instantaneous_eigenvectors(self.params.theta, self.params.omega, t);
        let phi = if p == 0 { phi0 } else { phi1 };
        Ok(rotate_spinor(&phi, self.tilt))
    }

    fn energy(&self, label: EigenLabel) -> Result<f64> {
        let p = check_label(label, Dim::Two)?.p();
        Ok((0.5 - f64::from(p)) * self.params.omega0)
    }

    fn root_hamiltonian(&self, t: f64) -> Hermitian {
        crate::fields::root_field(&self.params, t)
            .rotate_y(self.tilt)
            .spin_hamiltonian()
    }
}

/// `φ_pq(t) = φ_p(θ_q, ω, t) ⊗ |q⟩`.
impl EigenFrame for TwoQubitParams {
    fn dim(&self) -> Dim {
        Dim::Four
    }

    fn eigenvector(&self, label: EigenLabel, t: f64) -> Result<SpinState> {
        let EigenLabel::Pair(p, q) = check_label(label, Dim::Four)? else {
            unreachable!("checked above")
        };
        let (phi0, phi1) = instantaneous_eigenvectors(self.theta_q(q), self.omega, t);
        let target = if p == 0 { phi0 } else { phi1 };
        target.kron(&SpinState::basis(Dim::Two, usize::from(q))?)
    }

    fn energy(&self, label: EigenLabel) -> Result<f64> {
        let p = check_label(label, Dim::Four)?.p();
        Ok((0.5 - f64::from(p)) * self.block_frequency())
    }

    fn root_hamiltonian(&self, t: f64) -> Hermitian {
        Generator::Conditional {
            params: *self,
            drive: crate::schedule::ConditionalDrive::Root,
            control_field: 0.0,
        }
        .root_hamiltonian(t)
        .expect("conditional generators have a root")
    }
}

/// The four two-qubit eigenvectors in the order 00, 01, 10, 11.
pub fn two_qubit_eigenvectors(p: &TwoQubitParams, t: f64) -> Result<[SpinState; 4]> {
    p.validate()?;
    let v = |l| p.eigenvector(l, t);
    Ok([
        v(EigenLabel::Pair(0, 0))?,
        v(EigenLabel::Pair(0, 1))?,
        v(EigenLabel::Pair(1, 0))?,
        v(EigenLabel::Pair(1, 1))?,
    ])
}

/// Eigenframe attached to a generator, if it tracks one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentFrame {
    Loop(LoopFrame),
    Pair(TwoQubitParams),
}

impl SegmentFrame {
    pub fn of(generator: &Generator) -> Option<Self> {
        match *generator {
            Generator::Loop { params, tilt, .. } => Some(SegmentFrame::Loop(LoopFrame { params, tilt })),
            Generator::Conditional { params, .. } => Some(SegmentFrame::Pair(params)),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn EigenFrame {
        match self {
            SegmentFrame::Loop(f) => f,
            SegmentFrame::Pair(p) => p,
        }
    }
}

impl EigenFrame for SegmentFrame {
    fn dim(&self) -> Dim {
        self.inner().dim()
    }
    fn eigenvector(&self, label: EigenLabel, t: f64) -> Result<SpinState> {
        self.inner().eigenvector(label, t)
    }
    fn energy(&self, label: EigenLabel) -> Result<f64> {
        self.inner().energy(label)
    }
    fn root_hamiltonian(&self, t: f64) -> Hermitian {
        self.inner().root_hamiltonian(t)
    }
}

fn check_initial(traj: &Trajectory, reference: &SpinState) -> Result<()> {
    let infidelity = 1.0 - reference.fidelity(traj.initial_state());
    if infidelity > INITIAL_MISMATCH_TOL {
        return Err(Error::InitialMismatch(infidelity));
    }
    Ok(())
}

/// `|⟨φ_label(t)|ψ(t)⟩|²` at every sample of a trajectory that runs through
/// a single frame starting at `t = 0`.
pub fn tracking_fidelity(traj: &Trajectory, frame: &impl EigenFrame, label: EigenLabel) -> Result<Vec<f64>> {
    check_initial(traj, &frame.eigenvector(label, 0.0)?)?;
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| Ok(frame.eigenvector(label, t)?.fidelity(psi)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyReference {
    /// Root Hamiltonian of each segment; pulses and idle gaps count as zero.
    Root,
    /// The full Hamiltonian that drove the evolution.
    Driving,
}

/// `δ = −∫⟨ψ|H|ψ⟩dt` by the trapezoid rule over the trajectory samples.
pub fn dynamical_phase(traj: &Trajectory, s: &SegmentSchedule, reference: EnergyReference) -> Result<f64> {
    if traj.dim != s.dim() || traj.spans.len() != s.segments().len() {
        return Err(Error::invalid("trajectory", "does not belong to this schedule"));
    }
    let mut delta = 0.0;
    for (seg, span) in s.segments().iter().zip(&traj.spans) {
        delta += segment_dynamical_phase(traj, &seg.generator, span.first_sample, span.last_sample, span.start, reference);
    }
    Ok(delta)
}

fn segment_dynamical_phase(
    traj: &Trajectory,
    generator: &Generator,
    first: usize,
    last: usize,
    start: f64,
    reference: EnergyReference,
) -> f64 {
    let energy = |k: usize| {
        let t = traj.times[k] - start;
        let h = match reference {
            EnergyReference::Root => generator.root_hamiltonian(t),
            EnergyReference::Driving => Some(generator.hamiltonian(t)),
        };
        h.map_or(0.0, |h| h.expectation(&traj.states[k]))
    };
    let mut integral = 0.0;
    let mut prev = energy(first);
    for k in first + 1..=last {
        let next = energy(k);
        integral += 0.5 * (prev + next) * (traj.times[k] - traj.times[k - 1]);
        prev = next;
    }
    -integral
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Continuous phase `f(t)` with `ψ(t) = e^{if(t)} φ_label(t)` over a
/// trajectory that follows one frame from `t = 0`.
pub fn total_phase(traj: &Trajectory, frame: &impl EigenFrame, label: EigenLabel) -> Result<f64> {
    check_initial(traj, &frame.eigenvector(label, 0.0)?)?;
    let overlaps = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| Ok((t, frame.eigenvector(label, t)?.inner(psi))))
        .collect::<Result<Vec<_>>>()?;
    unwrap_overlaps(&overlaps, 0)
}

/// Sum of adjacent phase steps of `(t, ⟨φ|ψ⟩)` pairs; `offset` is the
/// sample index of the first pair for error reporting.
fn unwrap_overlaps(overlaps: &[(f64, C64)], offset: usize) -> Result<f64> {
    let mut phase = 0.0;
    for (k, w) in overlaps.windows(2).enumerate() {
        for &(time, z) in w {
            let fidelity = z.norm_sqr();
            if fidelity < PHASE_FIDELITY_FLOOR {
                return Err(Error::TrackingLost { time, fidelity });
            }
        }
        let jump = wrap(w[1].1.arg() - w[0].1.arg());
        if jump.abs() >= UNWRAP_LIMIT {
            return Err(Error::UnwrapTooCoarse { index: offset + k, jump });
        }
        phase += jump;
    }
    if let Some(&(_, z)) = overlaps.first() {
        phase += z.arg();
    }
    Ok(phase)
}

/// `Ω(θ) = 2π(1 − cosθ)`.
pub fn solid_angle(theta: f64) -> f64 {
    2.0 * PI * (1.0 - theta.cos())
}

/// `Ω_q = 2π[1 − (1−2q) cosθ̃]`.
pub fn solid_angle_q(p: &TwoQubitParams, q: u8) -> f64 {
    2.0 * PI * (1.0 - (1.0 - 2.0 * f64::from(q)) * p.cos_theta_tilde())
}

/// `ΔΩ = (Ω₁ − Ω₀)/2 = 2π cosθ̃`.
pub fn delta_omega(p: &TwoQubitParams) -> f64 {
    2.0 * PI * p.cos_theta_tilde()
}

/// Dynamical phase of eigenlabel `p` over one loop: `(2p−1)πω₀/|ω|`.
pub fn loop_dynamical_phase(p: &LoopParams, label: u8) -> f64 {
    (2.0 * f64::from(label) - 1.0) * PI * p.omega0 / p.omega.abs()
}

/// Berry phase of eigenlabel `p` over one loop: `(2p−1) sgn(ω) Ω/2`.
pub fn loop_berry_phase(p: &LoopParams, label: u8) -> f64 {
    (2.0 * f64::from(label) - 1.0) * p.omega.signum() * solid_angle(p.theta) / 2.0
}

/// `Tr{[b₀ × ∂_t b₀]·σ ρ_p(t)}` for the unit field direction `b₀`.
pub fn correction_energy_check(p: &LoopParams, label: EigenLabel, t: f64) -> Result<f64> {
    let frame = LoopFrame::new(*p);
    let phi = frame.eigenvector(label, t)?;
    let v: FieldVector = p.direction(t).cross(p.direction_rate(t));
    Ok(Hermitian::spin(v.to_array()).expectation(&phi) * 2.0)
}

/// Phase bookkeeping for an eigenstate carried through a whole schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequencePhases {
    pub initial_label: EigenLabel,
    pub final_label: EigenLabel,
    /// Unwrapped `arg⟨φ_final|ψ(τ)⟩`, summed segment by segment.
    pub total: f64,
    pub dynamical: f64,
    /// Phase picked up across pulses and idle gaps.
    pub flip: f64,
    pub geometric: f64,
    /// Smallest `|⟨φ|ψ⟩|²` over samples inside loop segments.
    pub min_loop_fidelity: f64,
    /// Per-sample overlap with the tracked eigenvector; inside pulses and
    /// gaps, with the closest eigenvector of the current frame.
    #[serde(skip)]
    pub fidelity: Vec<f64>,
}

/// Follows `label` through every segment of `s`. Loop segments are unwrapped
/// against their own eigenframe; across pulses and gaps the label moves to
/// the eigenvector of largest overlap and the overlap phase is booked as a
/// pulse phase.
pub fn sequence_phases(traj: &Trajectory, s: &SegmentSchedule, label: EigenLabel) -> Result<SequencePhases> {
    let label = check_label(label, s.dim())?;
    if traj.spans.len() != s.segments().len() {
        return Err(Error::invalid("trajectory", "does not belong to this schedule"));
    }
    let frames: Vec<Option<SegmentFrame>> = s.segments().iter().map(|seg| SegmentFrame::of(&seg.generator)).collect();
    let Some(first_frame) = frames.iter().flatten().next().copied() else {
        return Err(Error::Unsupported("schedule has no loop segment to define an eigenframe".into()));
    };
    check_initial(traj, &first_frame.eigenvector(label, 0.0)?)?;

    // Frame and local time that the current label refers to.
    let mut frame = first_frame;
    let mut frame_time = 0.0;
    let mut current = label;
    let mut total = first_frame.eigenvector(label, 0.0)?.inner(traj.initial_state()).arg();
    let (mut flip, mut dynamical) = (0.0, 0.0);
    let mut min_fidelity: f64 = 1.0;
    let mut fidelity = vec![first_frame.eigenvector(label, 0.0)?.fidelity(traj.initial_state()); traj.len()];

    for (i, (seg, span)) in s.segments().iter().zip(&traj.spans).enumerate() {
        dynamical += segment_dynamical_phase(
            traj,
            &seg.generator,
            span.first_sample,
            span.last_sample,
            span.start,
            EnergyReference::Root,
        );
        if let Some(f) = frames[i] {
            if span.last_sample == span.first_sample {
                continue;
            }
            // Entering a loop: the label must already sit on this frame.
            let entry = f.eigenvector(current, 0.0)?;
            let handover = entry.fidelity(&frame.eigenvector(current, frame_time)?);
            if handover < PHASE_FIDELITY_FLOOR {
                return Err(Error::TrackingLost {
                    time: span.start,
                    fidelity: handover,
                });
            }
            total += entry.inner(&frame.eigenvector(current, frame_time)?).arg();
            let overlaps = (span.first_sample..=span.last_sample)
                .map(|k| {
                    let t = traj.times[k] - span.start;
                    Ok((traj.times[k], f.eigenvector(current, t)?.inner(&traj.states[k])))
                })
                .collect::<Result<Vec<_>>>()?;
            for (k, &(_, z)) in overlaps.iter().enumerate() {
                min_fidelity = min_fidelity.min(z.norm_sqr());
                fidelity[span.first_sample + k] = z.norm_sqr();
            }
            let start_arg = overlaps[0].1.arg();
            total += unwrap_overlaps(&overlaps, span.first_sample)? - start_arg;
            frame = f;
            frame_time = span.duration;
        } else {
            for (f, state) in fidelity[span.first_sample + 1..=span.last_sample]
                .iter_mut()
                .zip(&traj.states[span.first_sample + 1..=span.last_sample])
            {
                *f = EigenLabel::all(s.dim())
                    .into_iter()
                    .map(|l| Ok(frame.eigenvector(l, frame_time)?.fidelity(state)))
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
            }
            let u = span.unitary;
            let before = frame.eigenvector(current, frame_time)?;
            let moved = u.apply(&before);
            let (best, overlap) = EigenLabel::all(s.dim())
                .into_iter()
                .map(|l| Ok((l, frame.eigenvector(l, frame_time)?.inner(&moved))))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
                .expect("at least two labels");
            if overlap.norm_sqr() < PHASE_FIDELITY_FLOOR {
                return Err(Error::TrackingLost {
                    time: span.start + span.duration,
                    fidelity: overlap.norm_sqr(),
                });
            }
            flip += overlap.arg();
            total += overlap.arg();
            current = best;
        }
    }
    Ok(SequencePhases {
        initial_label: label,
        final_label: current,
        total,
        dynamical,
        flip,
        geometric: total - dynamical - flip,
        min_loop_fidelity: min_fidelity,
        fidelity,
    })
}

/// Measured phases next to their closed-form values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub label: EigenLabel,
    pub total: f64,
    pub dynamical: f64,
    pub flip: f64,
    pub geometric: f64,
    pub closed_form_geometric: f64,
    pub closed_form_dynamical: f64,
    pub geometric_deviation: f64,
    pub dynamical_deviation: f64,
}

impl PhaseDecomposition {
    pub fn new(phases: &SequencePhases, closed_form_geometric: f64, closed_form_dynamical: f64) -> Self {
        Self {
            label: phases.initial_label,
            total: phases.total,
            dynamical: phases.dynamical,
            flip: phases.flip,
            geometric: phases.geometric,
            closed_form_geometric,
            closed_form_dynamical,
            geometric_deviation: wrap(phases.geometric - closed_form_geometric).abs(),
            dynamical_deviation: (phases.dynamical - closed_form_dynamical).abs(),
        }
    }
}

/// One TQD loop started in eigenstate `label`.
pub fn loop_decomposition(
    p: &LoopParams,
    label: u8,
    policy: StepPolicy,
    samples: usize,
) -> Result<(PhaseDecomposition, Trajectory)> {
    let seg = loop_segment(p, LoopDrive::Tqd, SegmentLabel::LoopC)?;
    let s = SegmentSchedule::from_segments(Dim::Two, [seg])?;
    let l = EigenLabel::Single(label).validate()?;
    let initial = LoopFrame::new(*p).eigenvector(l, 0.0)?;
    let traj = propagate_schedule(&s, &initial, policy, samples)?;
    let phases = sequence_phases(&traj, &s, l)?;
    Ok((
        PhaseDecomposition::new(
            &phases,
            loop_berry_phase(p, label),
            loop_dynamical_phase(p, label),
        ),
        traj,
    ))
}

/// Both eigenlabels carried through the four-element echo.
pub fn echo_phase_table(
    p: &LoopParams,
    omega_pi: f64,
    policy: StepPolicy,
    samples: usize,
) -> Result<(Vec<PhaseDecomposition>, Trajectory)> {
    let s = build_echo_sequence(p, omega_pi, [0.0; 3])?;
    let frame = LoopFrame::new(*p);
    let traj = propagate_schedule(&s, &frame.eigenvector(EigenLabel::Single(0), 0.0)?, policy, samples)?;
    let mut rows = Vec::new();
    for label in 0..2u8 {
        let l = EigenLabel::Single(label);
        let t = traj.with_initial(&frame.eigenvector(l, 0.0)?)?;
        let phases = sequence_phases(&t, &s, l)?;
        let geometric = (2.0 * f64::from(label) - 1.0) * p.omega.signum() * solid_angle(p.theta);
        rows.push(PhaseDecomposition::new(&phases, geometric, 0.0));
    }
    Ok((rows, traj))
}
