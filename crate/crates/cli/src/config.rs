//! Strict JSON scenario configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;
use tqd_core::fields::{LoopParams, TwoQubitParams};
use tqd_core::gates::SingleGateSpec;
use tqd_core::propagate::{StepPolicy, DEFAULT_SAMPLES};
use tqd_core::schedule::{default_omega_pi, LoopDrive, PulseTarget};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("unknown kind `{0}` (expected one of fields, evolve, echo, gate, twoqubit, expmap, scan)")]
    UnknownKind(String),
    #[error("`{field}` is required for kind `{kind}`")]
    Missing { kind: Kind, field: &'static str },
    #[error("`{field}` is not accepted for kind `{kind}`")]
    Unexpected { kind: Kind, field: &'static str },
    #[error("`{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Fields,
    Evolve,
    Echo,
    Gate,
    TwoQubit,
    ExpMap,
    Scan,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fields" => Kind::Fields,
            "evolve" => Kind::Evolve,
            "echo" => Kind::Echo,
            "gate" => Kind::Gate,
            "twoqubit" => Kind::TwoQubit,
            "expmap" => Kind::ExpMap,
            "scan" => Kind::Scan,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Fields => "fields",
            Kind::Evolve => "evolve",
            Kind::Echo => "echo",
            Kind::Gate => "gate",
            Kind::TwoQubit => "twoqubit",
            Kind::ExpMap => "expmap",
            Kind::Scan => "scan",
        }
    }

    /// Keys accepted besides the common ones, required ones first.
    fn keys(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Kind::Fields => (&["theta", "omega", "omega0"], &["tilt"]),
            Kind::Evolve => (&["theta", "omega", "omega0"], &["label", "drive", "tilt"]),
            Kind::Echo => (&["theta", "omega", "omega0"], &["omega_pi", "idle_gaps"]),
            Kind::Gate => (&["vartheta", "solid_angle", "omega", "omega0"], &["omega_pi"]),
            Kind::TwoQubit => (&["omega_i", "j", "omega"], &["omega_pi", "control_pulse", "control_field"]),
            Kind::ExpMap => (&["omega_i", "j", "omega"], &["omega_pi", "field_samples"]),
            Kind::Scan => (&["theta", "omega0", "ratios"], &[]),
        }
    }

    /// Checks a scenario of this kind reports, with default tolerances.
    pub fn default_tolerances(self) -> BTreeMap<String, f64> {
        let entries: &[(&str, f64)] = match self {
            Kind::Fields => &[("field_magnitude", 1e-12), ("correction_energy", 1e-10)],
            Kind::Evolve => &[
                ("min_tracking_fidelity", 1e-7),
                ("geometric_phase", 1e-6),
                ("dynamical_phase", 1e-6),
            ],
            Kind::Echo => &[
                ("min_tracking_fidelity", 1e-7),
                ("dynamical_cancellation", 1e-6),
                ("geometric_phase_0", 1e-6),
                ("geometric_phase_1", 1e-6),
                ("gate_distance", 1e-6),
                ("omega0_invariance", 1e-6),
            ],
            Kind::Gate => &[
                ("gate_distance", 1e-6),
                ("dynamical_cancellation", 1e-6),
                ("geometric_phase_0", 1e-6),
                ("geometric_phase_1", 1e-6),
            ],
            Kind::TwoQubit => &[
                ("leakage", 1e-6),
                ("phase_error_00", 1e-5),
                ("phase_error_01", 1e-5),
                ("phase_error_10", 1e-5),
                ("phase_error_11", 1e-5),
                ("gate_distance", 1e-6),
            ],
            Kind::ExpMap => &[("field_deviation", 1e-10), ("gate_equivalence", 1e-5)],
            Kind::Scan => &[("tqd_min_fidelity", 1e-7)],
        };
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    substeps: Option<usize>,
    target_error: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    id: Option<String>,
    output_dir: Option<PathBuf>,
    policy: Option<RawPolicy>,
    samples: Option<usize>,
    tolerances: Option<BTreeMap<String, f64>>,
    theta: Option<f64>,
    omega: Option<f64>,
    omega0: Option<f64>,
    omega_pi: Option<f64>,
    idle_gaps: Option<Vec<f64>>,
    tilt: Option<f64>,
    label: Option<u8>,
    drive: Option<String>,
    vartheta: Option<f64>,
    solid_angle: Option<f64>,
    omega_i: Option<f64>,
    j: Option<f64>,
    control_pulse: Option<String>,
    control_field: Option<f64>,
    field_samples: Option<usize>,
    ratios: Option<Vec<f64>>,
}

impl RawConfig {
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! mark {
            ($($f:ident),*) => {$(if self.$f.is_some() { keys.push(stringify!($f)); })*};
        }
        mark!(
            theta, omega, omega0, omega_pi, idle_gaps, tilt, label, drive, vartheta, solid_angle, omega_i, j,
            control_pulse, control_field, field_samples, ratios
        );
        keys
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Fields {
        loop_params: LoopParams,
        tilt: f64,
    },
    Evolve {
        loop_params: LoopParams,
        label: u8,
        drive: LoopDrive,
        tilt: f64,
    },
    Echo {
        loop_params: LoopParams,
        omega_pi: f64,
        idle_gaps: [f64; 3],
    },
    Gate {
        spec: SingleGateSpec,
        omega: f64,
        omega0: f64,
        omega_pi: f64,
    },
    TwoQubit {
        params: TwoQubitParams,
        control_pulse: PulseTarget,
        control_field: f64,
    },
    ExpMap {
        params: TwoQubitParams,
        field_samples: usize,
    },
    Scan {
        theta: f64,
        omega0: f64,
        ratios: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub id: String,
    pub kind: Kind,
    pub output_dir: Option<PathBuf>,
    pub policy: StepPolicy,
    pub samples: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub params: Params,
}

fn finite(name: &'static str, v: Option<f64>) -> Result<Option<f64>, ConfigError> {
    match v {
        Some(x) if !x.is_finite() => Err(invalid(name, "must be a finite number")),
        other => Ok(other),
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Json {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let kind = Kind::parse(&raw.kind).ok_or_else(|| ConfigError::UnknownKind(raw.kind.clone()))?;

    let (required, optional) = kind.keys();
    for key in raw.present() {
        if !required.contains(&key) && !optional.contains(&key) {
            return Err(ConfigError::Unexpected { kind, field: key });
        }
    }
    let present = raw.present();
    for key in required {
        if !present.contains(key) {
            return Err(ConfigError::Missing { kind, field: key });
        }
    }

    for (name, v) in [
        ("theta", raw.theta),
        ("omega", raw.omega),
        ("omega0", raw.omega0),
        ("omega_pi", raw.omega_pi),
        ("tilt", raw.tilt),
        ("vartheta", raw.vartheta),
        ("solid_angle", raw.solid_angle),
        ("omega_i", raw.omega_i),
        ("j", raw.j),
        ("control_field", raw.control_field),
    ] {
        finite(name, v)?;
    }
    if raw.omega == Some(0.0) {
        return Err(invalid("omega", "omega must be nonzero"));
    }

    let policy = match raw.policy {
        None => StepPolicy::default(),
        Some(RawPolicy {
            substeps: Some(n),
            target_error: None,
        }) => StepPolicy::Substeps(n),
        Some(RawPolicy {
            substeps: None,
            target_error: Some(e),
        }) => StepPolicy::TargetError(e),
        Some(_) => return Err(invalid("policy", "give exactly one of `substeps` or `target_error`")),
    };
    policy.validate().map_err(|e| invalid("policy", e.to_string()))?;

    let samples = raw.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }

    let mut tolerances = kind.default_tolerances();
    for (name, tol) in raw.tolerances.unwrap_or_default() {
        if !tolerances.contains_key(&name) {
            return Err(invalid(format!("tolerances.{name}"), format!("no such check for kind `{kind}`")));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(invalid(format!("tolerances.{name}"), "must be positive"));
        }
        tolerances.insert(name, tol);
    }

    let core = |e: tqd_core::Error| match e {
        tqd_core::Error::InvalidParameter { name, reason } => invalid(name, reason),
        other => invalid("params", other.to_string()),
    };
    let loop_params = || LoopParams::new(raw.theta.unwrap(), raw.omega.unwrap(), raw.omega0.unwrap()).map_err(core);
    let omega_pi = |omega: f64| raw.omega_pi.unwrap_or_else(|| default_omega_pi(omega));
    let two_qubit = || {
        let w = raw.omega.unwrap();
        TwoQubitParams::new(raw.omega_i.unwrap(), raw.j.unwrap(), w, omega_pi(w)).map_err(core)
    };

    let params = match kind {
        Kind::Fields => Params::Fields {
            loop_params: loop_params()?,
            tilt: raw.tilt.unwrap_or(0.0),
        },
        Kind::Evolve => Params::Evolve {
            loop_params: loop_params()?,
            label: match raw.label.unwrap_or(0) {
                l @ (0 | 1) => l,
                _ => return Err(invalid("label", "must be 0 or 1")),
            },
            drive: match raw.drive.as_deref().unwrap_or("tqd") {
                "tqd" => LoopDrive::Tqd,
                "root" => LoopDrive::Root,
                other => return Err(invalid("drive", format!("`{other}` is not one of tqd, root"))),
            },
            tilt: raw.tilt.unwrap_or(0.0),
        },
        Kind::Echo => {
            let lp = loop_params()?;
            let gaps = raw.idle_gaps.clone().unwrap_or_else(|| vec![0.0; 3]);
            let idle_gaps: [f64; 3] = gaps
                .try_into()
                .map_err(|_| invalid("idle_gaps", "exactly three gaps are required"))?;
            if idle_gaps.iter().any(|g| !g.is_finite() || *g < 0.0) {
                return Err(invalid("idle_gaps", "gaps must be finite and non-negative"));
            }
            let w_pi = omega_pi(lp.omega);
            if w_pi <= 0.0 {
                return Err(invalid("omega_pi", "must be positive"));
            }
            Params::Echo {
                loop_params: lp,
                omega_pi: w_pi,
                idle_gaps,
            }
        }
        Kind::Gate => {
            let (omega, omega0) = (raw.omega.unwrap(), raw.omega0.unwrap());
            if omega0 <= 0.0 {
                return Err(invalid("omega0", "must be positive"));
            }
            let spec = SingleGateSpec {
                vartheta: raw.vartheta.unwrap(),
                solid_angle: raw.solid_angle.unwrap(),
            };
            tqd_core::gates::cone_angle_for(spec.solid_angle).map_err(core)?;
            let w_pi = omega_pi(omega);
            if w_pi <= 0.0 {
                return Err(invalid("omega_pi", "must be positive"));
            }
            Params::Gate {
                spec,
                omega,
                omega0,
                omega_pi: w_pi,
            }
        }
        Kind::TwoQubit => Params::TwoQubit {
            params: two_qubit()?,
            control_pulse: match raw.control_pulse.as_deref().unwrap_or("control-flip") {
                "control-flip" => PulseTarget::ControlFlip,
                "qubit-ii" => PulseTarget::QubitII,
                other => {
                    return Err(invalid(
                        "control_pulse",
                        format!("`{other}` is not one of control-flip, qubit-ii"),
                    ))
                }
            },
            control_field: raw.control_field.unwrap_or(0.0),
        },
        Kind::ExpMap => Params::ExpMap {
            params: two_qubit()?,
            field_samples: match raw.field_samples.unwrap_or(64) {
                0 => return Err(invalid("field_samples", "must be positive")),
                n => n,
            },
        },
        Kind::Scan => {
            let ratios = raw.ratios.clone().unwrap();
            if ratios.is_empty() {
                return Err(invalid("ratios", "must not be empty"));
            }
            for (i, r) in ratios.iter().enumerate() {
                if !r.is_finite() || *r == 0.0 {
                    return Err(invalid(format!("ratios[{i}]"), "must be finite and nonzero"));
                }
            }
            let (theta, omega0) = (raw.theta.unwrap(), raw.omega0.unwrap());
            LoopParams::new(theta, 1.0, omega0).map_err(core)?;
            Params::Scan { theta, omega0, ratios }
        }
    };

    Ok(ScenarioConfig {
        id: raw.id.unwrap_or_else(|| kind.as_str().to_string()),
        kind,
        output_dir: raw.output_dir,
        policy,
        samples,
        tolerances,
        params,
    })
}
