//! Piecewise field timelines: loops, π pulses and idle gaps assembled into
//! echo sequences for one and two spins.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::fmt_f64;
use crate::fields::{
    conditional_root_field, exp_rotating_field, root_field, tqd_field,
    two_qubit_conditional_field, FieldVector, LoopParams, TwoQubitParams,
};
use crate::gates::experimental_parameter_map;
use crate::quantum::{pauli_x, pauli_y, pauli_z, Dim, Hermitian, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentLabel {
    #[serde(rename = "loop-C")]
    LoopC,
    #[serde(rename = "loop-Cbar")]
    LoopCbar,
    #[serde(rename = "pi-pulse")]
    PiPulse,
    #[serde(rename = "pi-pulse-I")]
    PiPulseI,
    #[serde(rename = "pi-pulse-II")]
    PiPulseII,
    #[serde(rename = "idle")]
    Idle,
}

impl SegmentLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentLabel::LoopC => "loop-C",
            SegmentLabel::LoopCbar => "loop-Cbar",
            SegmentLabel::PiPulse => "pi-pulse",
            SegmentLabel::PiPulseI => "pi-pulse-I",
            SegmentLabel::PiPulseII => "pi-pulse-II",
            SegmentLabel::Idle => "idle",
        }
    }

    pub fn is_loop(self) -> bool {
        matches!(self, SegmentLabel::LoopC | SegmentLabel::LoopCbar)
    }

    pub fn is_pulse(self) -> bool {
        matches!(
            self,
            SegmentLabel::PiPulse | SegmentLabel::PiPulseI | SegmentLabel::PiPulseII
        )
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which spin a π pulse acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseTarget {
    /// `½ω_π σ_y` on a lone spin.
    Single,
    /// y half-turn on qubit I.
    QubitI,
    /// y half-turn on qubit II only.
    QubitII,
    /// y half-turn on qubit II together with an x half-turn on qubit I.
    ///
    /// Flipping the control qubit reverses the sign of the Ising field seen
    /// by qubit I; the simultaneous x half-turn carries the Bloch vector of
    /// qubit I from the `q` cone axis onto the `q⊕1` cone axis, so each
    /// conditional eigenvector lands on its partner eigenvector.
    ControlFlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopDrive {
    /// Root field plus the counterdiabatic correction.
    Tqd,
    /// Root field only.
    Root,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionalDrive {
    Tqd,
    Root,
    /// Rotating-frame image of the static laboratory Hamiltonian, including
    /// the `ω 1⊗S_z` frame term.
    Experimental,
}

/// Time-parametrized Hamiltonian of one segment; `t` is segment-local.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Generator {
    Idle(Dim),
    Pulse {
        target: PulseTarget,
        omega_pi: f64,
    },
    Loop {
        params: LoopParams,
        drive: LoopDrive,
        /// Rotation angle about y applied to every field vector.
        tilt: f64,
    },
    Conditional {
        params: TwoQubitParams,
        drive: ConditionalDrive,
        /// Field amplitude (γ_II B₀) on qubit II, co-rotating in the xy plane.
        control_field: f64,
    },
}

impl Generator {
    pub fn dim(&self) -> Dim {
        match self {
            Generator::Idle(dim) => *dim,
            Generator::Pulse { target, .. } => match target {
                PulseTarget::Single => Dim::Two,
                _ => Dim::Four,
            },
            Generator::Loop { .. } => Dim::Two,
            Generator::Conditional { .. } => Dim::Four,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Generator::Idle(_) | Generator::Pulse { .. })
    }

    /// Driving field of a single-spin segment.
    pub fn field(&self, t: f64) -> Option<FieldVector> {
        match *self {
            Generator::Idle(Dim::Two) => Some(FieldVector::ZERO),
            Generator::Pulse {
                target: PulseTarget::Single,
                omega_pi,
            } => Some(FieldVector::new(0.0, omega_pi, 0.0)),
            Generator::Loop {
                params,
                drive,
                tilt,
            } => {
                let f = match drive {
                    LoopDrive::Tqd => tqd_field(&params, t),
                    LoopDrive::Root => root_field(&params, t),
                };
                Some(f.rotate_y(tilt))
            }
            _ => None,
        }
    }

    pub fn hamiltonian(&self, t: f64) -> Hermitian {
        match *self {
            Generator::Idle(dim) => Hermitian::zero(dim),
            Generator::Pulse { target, omega_pi } => pulse_hamiltonian(target, omega_pi),
            Generator::Loop { .. } => self
                .field(t)
                .expect("loop generators carry a field")
                .spin_hamiltonian(),
            Generator::Conditional {
                params,
                drive,
                control_field,
            } => {
                let block = |q: u8| {
                    let f = match drive {
                        ConditionalDrive::Tqd => two_qubit_conditional_field(&params, q, t),
                        ConditionalDrive::Root => conditional_root_field(&params, q, t),
                        ConditionalDrive::Experimental => exp_rotating_field(
                            &experimental_parameter_map(&params),
                            params.omega,
                            q,
                            t,
                        ),
                    };
                    *f.spin_hamiltonian().matrix()
                };
                let mut h = Matrix::conditional(&block(0), &block(1))
                    .expect("2×2 blocks always assemble");
                if drive == ConditionalDrive::Experimental {
                    h = h + on_second(&pauli_z().scale_real(0.5 * params.omega));
                }
                if control_field != 0.0 {
                    let (sw, cw) = (params.omega * t).sin_cos();
                    let f = FieldVector::new(control_field * cw, control_field * sw, 0.0);
                    h = h + on_second(f.spin_hamiltonian().matrix());
                }
                Hermitian::from_trusted(h)
            }
        }
    }

    /// Root Hamiltonian whose eigenbasis the segment is meant to track.
    /// Pulses and idle gaps have none.
    pub fn root_hamiltonian(&self, t: f64) -> Option<Hermitian> {
        match *self {
            Generator::Loop { params, tilt, .. } => {
                Some(root_field(&params, t).rotate_y(tilt).spin_hamiltonian())
            }
            Generator::Conditional { params, .. } => {
                let block = |q: u8| *conditional_root_field(&params, q, t).spin_hamiltonian().matrix();
                let h = Matrix::conditional(&block(0), &block(1)).expect("2×2 blocks");
                Some(Hermitian::from_trusted(h))
            }
            Generator::Idle(_) | Generator::Pulse { .. } => None,
        }
    }

    fn parametrization(&self) -> (&'static str, BTreeMap<String, f64>) {
        let mut params = BTreeMap::new();
        let name = match *self {
            Generator::Idle(_) => "zero",
            Generator::Pulse { target, omega_pi } => {
                params.insert("omega_pi".into(), omega_pi);
                match target {
                    PulseTarget::Single => "half-turn-y",
                    PulseTarget::QubitI => "half-turn-y-qubit-I",
                    PulseTarget::QubitII => "half-turn-y-qubit-II",
                    PulseTarget::ControlFlip => "half-turn-x-I-y-II",
                }
            }
            Generator::Loop {
                params: p,
                drive,
                tilt,
            } => {
                params.insert("theta".into(), p.theta);
                params.insert("omega".into(), p.omega);
                params.insert("omega0".into(), p.omega0);
                params.insert("tilt".into(), tilt);
                match drive {
                    LoopDrive::Tqd => "tqd-cone",
                    LoopDrive::Root => "root-cone",
                }
            }
            Generator::Conditional {
                params: p,
                drive,
                control_field,
            } => {
                params.insert("omega_i".into(), p.omega_i);
                params.insert("j".into(), p.j);
                params.insert("omega".into(), p.omega);
                params.insert("control_field".into(), control_field);
                match drive {
                    ConditionalDrive::Tqd => "tqd-conditional",
                    ConditionalDrive::Root => "root-conditional",
                    ConditionalDrive::Experimental => "exp-rotating-frame",
                }
            }
        };
        (name, params)
    }
}

fn on_second(m: &Matrix) -> Matrix {
    Matrix::identity(Dim::Two).kron(m).expect("2×2 factors")
}

fn on_first(m: &Matrix) -> Matrix {
    m.kron(&Matrix::identity(Dim::Two)).expect("2×2 factors")
}

fn pulse_hamiltonian(target: PulseTarget, omega_pi: f64) -> Hermitian {
    let y = pauli_y().scale_real(0.5 * omega_pi);
    let m = match target {
        PulseTarget::Single => y,
        PulseTarget::QubitI => on_first(&y),
        PulseTarget::QubitII => on_second(&y),
        PulseTarget::ControlFlip => on_first(&pauli_x().scale_real(0.5 * omega_pi)) + on_second(&y),
    };
    Hermitian::from_trusted(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub label: SegmentLabel,
    pub duration: f64,
    pub generator: Generator,
}

impl Segment {
    pub fn new(label: SegmentLabel, duration: f64, generator: Generator) -> Result<Self> {
        if !duration.is_finite() || duration < 0.0 {
            return Err(Error::invalid("duration", format!("{duration} is not a valid duration")));
        }
        if label == SegmentLabel::Idle && !matches!(generator, Generator::Idle(_)) {
            return Err(Error::invalid("generator", "idle segments carry no Hamiltonian"));
        }
        Ok(Self {
            label,
            duration,
            generator,
        })
    }

    pub fn idle(dim: Dim, duration: f64) -> Result<Self> {
        Self::new(SegmentLabel::Idle, duration, Generator::Idle(dim))
    }

    pub fn dim(&self) -> Dim {
        self.generator.dim()
    }
}

/// Ordered list of segments sharing one Hilbert-space dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSchedule {
    dim: Dim,
    segments: Vec<Segment>,
}

impl SegmentSchedule {
    pub fn new(dim: Dim) -> Self {
        Self {
            dim,
            segments: Vec::new(),
        }
    }

    pub fn push(&mut self, segment: Segment) -> Result<()> {
        if segment.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim.size(),
                right: segment.dim().size(),
            });
        }
        self.segments.push(segment);
        Ok(())
    }

    pub fn from_segments(dim: Dim, segments: impl IntoIterator<Item = Segment>) -> Result<Self> {
        let mut s = Self::new(dim);
        for seg in segments {
            s.push(seg)?;
        }
        Ok(s)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn labels(&self) -> Vec<SegmentLabel> {
        self.segments.iter().map(|s| s.label).collect()
    }

    pub fn describe(&self) -> ScheduleDescription {
        ScheduleDescription {
            dim: self.dim.size(),
            total_duration: self.total_duration(),
            segments: self
                .segments
                .iter()
                .map(|s| {
                    let (name, params) = s.generator.parametrization();
                    SegmentDescription {
                        label: s.label,
                        duration: s.duration,
                        parametrization: name.to_string(),
                        params,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDescription {
    pub label: SegmentLabel,
    pub duration: f64,
    pub parametrization: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDescription {
    pub dim: usize,
    pub total_duration: f64,
    pub segments: Vec<SegmentDescription>,
}

/// Default π-pulse Rabi frequency for a loop of frequency ω: 50|ω|.
pub fn default_omega_pi(omega: f64) -> f64 {
    50.0 * omega.abs()
}

/// Constant `½ω_π σ_y` half-turn on the targeted spin, lasting π/ω_π.
pub fn pi_pulse_segment(omega_pi: f64, dim: Dim, target: PulseTarget) -> Result<Segment> {
    if !omega_pi.is_finite() || omega_pi <= 0.0 {
        return Err(Error::invalid("omega_pi", "must be positive"));
    }
    let label = match (dim, target) {
        (Dim::Two, PulseTarget::Single) => SegmentLabel::PiPulse,
        (Dim::Four, PulseTarget::QubitI) => SegmentLabel::PiPulseI,
        (Dim::Four, PulseTarget::QubitII | PulseTarget::ControlFlip) => SegmentLabel::PiPulseII,
        (dim, target) => {
            return Err(Error::invalid(
                "target",
                format!("{target:?} pulse is not defined for dimension {dim}"),
            ))
        }
    };
    Segment::new(label, PI / omega_pi, Generator::Pulse { target, omega_pi })
}

/// One full loop of the cone; `label` records its position in a sequence.
pub fn loop_segment(p: &LoopParams, drive: LoopDrive, label: SegmentLabel) -> Result<Segment> {
    p.validate()?;
    Segment::new(
        label,
        p.period(),
        Generator::Loop {
            params: *p,
            drive,
            tilt: 0.0,
        },
    )
}

/// Applies the y-axis rotation to every loop field. Pulses are already
/// along y and stay unchanged.
pub fn rotate_schedule(s: &SegmentSchedule, angle: f64) -> Result<SegmentSchedule> {
    if s.dim != Dim::Two {
        return Err(Error::Unsupported(
            "field rotation is only defined for single-spin schedules".into(),
        ));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("angle", "must be finite"));
    }
    let segments = s.segments.iter().map(|seg| {
        let mut seg = *seg;
        if let Generator::Loop { ref mut tilt, .. } = seg.generator {
            *tilt += angle;
        }
        seg
    });
    SegmentSchedule::from_segments(Dim::Two, segments)
}

fn check_gaps(gaps: &[f64]) -> Result<()> {
    if gaps.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::invalid("idle_gaps", "gaps must be finite and non-negative"));
    }
    Ok(())
}

/// `C → π → C̄ → π` with idle gaps after the first three elements.
pub fn build_echo_sequence(p: &LoopParams, omega_pi: f64, idle_gaps: [f64; 3]) -> Result<SegmentSchedule> {
    build_echo_sequence_with(p, omega_pi, idle_gaps, LoopDrive::Tqd)
}

pub fn build_echo_sequence_with(
    p: &LoopParams,
    omega_pi: f64,
    idle_gaps: [f64; 3],
    drive: LoopDrive,
) -> Result<SegmentSchedule> {
    check_gaps(&idle_gaps)?;
    let pulse = pi_pulse_segment(omega_pi, Dim::Two, PulseTarget::Single)?;
    SegmentSchedule::from_segments(
        Dim::Two,
        [
            loop_segment(p, drive, SegmentLabel::LoopC)?,
            Segment::idle(Dim::Two, idle_gaps[0])?,
            pulse,
            Segment::idle(Dim::Two, idle_gaps[1])?,
            loop_segment(&p.reversed(), drive, SegmentLabel::LoopCbar)?,
            Segment::idle(Dim::Two, idle_gaps[2])?,
            pulse,
        ],
    )
}

/// Builder for the eight-element two-qubit refocusing sequence
/// `C → π_I → C̄ → π_II → C → π_I → C̄ → π_II`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitSequence {
    pub params: TwoQubitParams,
    /// Idle gaps between consecutive elements.
    pub gaps: [f64; 7],
    pub drive: ConditionalDrive,
    pub control_pulse: PulseTarget,
    pub control_field: f64,
}

impl TwoQubitSequence {
    pub fn new(params: TwoQubitParams) -> Self {
        Self {
            params,
            gaps: [0.0; 7],
            drive: ConditionalDrive::Tqd,
            control_pulse: PulseTarget::ControlFlip,
            control_field: 0.0,
        }
    }

    pub fn build(&self) -> Result<SegmentSchedule> {
        self.params.validate()?;
        check_gaps(&self.gaps)?;
        if !matches!(self.control_pulse, PulseTarget::QubitII | PulseTarget::ControlFlip) {
            return Err(Error::invalid("control_pulse", "must act on qubit II"));
        }
        let conditional = |p: TwoQubitParams, label| {
            Segment::new(
                label,
                p.period(),
                Generator::Conditional {
                    params: p,
                    drive: self.drive,
                    control_field: self.control_field,
                },
            )
        };
        let c = conditional(self.params, SegmentLabel::LoopC)?;
        let cbar = conditional(self.params.reversed(), SegmentLabel::LoopCbar)?;
        let pi_i = pi_pulse_segment(self.params.omega_pi, Dim::Four, PulseTarget::QubitI)?;
        let pi_ii = pi_pulse_segment(self.params.omega_pi, Dim::Four, self.control_pulse)?;
        let order = [c, pi_i, cbar, pi_ii, c, pi_i, cbar, pi_ii];
        let mut s = SegmentSchedule::new(Dim::Four);
        for (k, seg) in order.into_iter().enumerate() {
            s.push(seg)?;
            if k < self.gaps.len() {
                s.push(Segment::idle(Dim::Four, self.gaps[k])?)?;
            }
        }
        Ok(s)
    }
}

pub fn build_two_qubit_sequence(p: &TwoQubitParams, idle_gaps: [f64; 7]) -> Result<SegmentSchedule> {
    TwoQubitSequence {
        gaps: idle_gaps,
        ..TwoQubitSequence::new(*p)
    }
    .build()
}

/// Full two-spin root Hamiltonian
/// `γ_I B₀·S ⊗ 1 + 1 ⊗ γ_II B₀·S + 2J S_z⊗S_z` with `B₀` on the cone
/// `(sinθ cos ωt, sinθ sin ωt, cosθ)`.
pub fn build_full_two_qubit_root(
    gamma_i_b0: f64,
    gamma_ii_b0: f64,
    j: f64,
    theta: f64,
    omega: f64,
    t: f64,
) -> Result<Hermitian> {
    for (name, v) in [
        ("gamma_i_b0", gamma_i_b0),
        ("gamma_ii_b0", gamma_ii_b0),
        ("j", j),
        ("theta", theta),
        ("omega", omega),
        ("t", t),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(name, "must be finite"));
        }
    }
    let (st, ct) = theta.sin_cos();
    let (sw, cw) = (omega * t).sin_cos();
    let b = FieldVector::new(st * cw, st * sw, ct);
    let first = on_first((gamma_i_b0 * b).spin_hamiltonian().matrix());
    let second = on_second((gamma_ii_b0 * b).spin_hamiltonian().matrix());
    let sz = pauli_z().scale_real(0.5);
    let ising = sz.kron(&sz)?.scale_real(2.0 * j);
    Hermitian::new(first + second + ising)
}

/// Field timeline of a single-spin schedule as CSV rows
/// `t,segment,bx,by,bz,magnitude`; every segment of positive duration contributes
/// `samples + 1` rows including both endpoints.
pub fn field_timeline_csv(s: &SegmentSchedule, samples: usize) -> Result<String> {
    if s.dim != Dim::Two {
        return Err(Error::Unsupported("field timelines exist for single-spin schedules only".into()));
    }
    if samples == 0 {
        return Err(Error::invalid("samples", "must be positive"));
    }
    let mut out = String::from("t,segment,bx,by,bz,magnitude\n");
    let mut start = 0.0;
    for seg in &s.segments {
        if seg.duration > 0.0 {
            for k in 0..=samples {
                let local = seg.duration * k as f64 / samples as f64;
                let f = seg.generator.field(local).expect("single-spin generators carry a field");
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f64(start + local),
                    seg.label,
                    fmt_f64(f.x),
                    fmt_f64(f.y),
                    fmt_f64(f.z),
                    fmt_f64(f.norm())
                ));
            }
        }
        start += seg.duration;
    }
    Ok(out)
}
