use std::f64::consts::PI;

use tqd_core::gates::{synthesize_single_gate, SingleGateSpec, SynthesisOptions};
use tqd_core::propagate::StepPolicy;
use tqd_core::quantum::gate_distance;

fn options(omega_pi: Option<f64>) -> SynthesisOptions {
    SynthesisOptions {
        omega_pi,
        policy: StepPolicy::TargetError(1e-9),
        convergence_base: None,
        ..SynthesisOptions::default()
    }
}

#[test]
fn synthesized_gates_match_closed_form_on_grid() {
    let mut worst: f64 = 0.0;
    for vartheta in [0.0, PI / 4.0, PI / 2.0] {
        for solid_angle in [PI / 4.0, PI / 2.0, PI, 1.5 * PI] {
            for ratio in [0.5, 1.0, 5.0] {
                let spec = SingleGateSpec { vartheta, solid_angle };
                let r = synthesize_single_gate(&spec, ratio, 1.0, &options(None)).unwrap();
                assert!(r.distance < 1e-6, "{spec:?} ratio {ratio}: {}", r.distance);
                for row in &r.phases {
                    assert!(row.geometric_deviation.abs() < 1e-6, "{spec:?} ratio {ratio}: {row:?}");
                    assert!(row.dynamical.abs() < 1e-6);
                }
                worst = worst.max(r.distance);
            }
        }
    }
    assert!(worst < 1e-6);
}

#[test]
fn negative_solid_angle_reverses_the_loop() {
    let spec = SingleGateSpec { vartheta: PI / 4.0, solid_angle: -PI / 2.0 };
    let r = synthesize_single_gate(&spec, 1.0, 1.0, &options(None)).unwrap();
    assert!(r.derived["omega"] < 0.0);
    assert!(r.distance < 1e-6);
}

#[test]
fn gate_is_independent_of_omega0_and_pulse_rate() {
    let spec = SingleGateSpec { vartheta: PI / 3.0, solid_angle: 0.7 * PI };
    let base = synthesize_single_gate(&spec, 1.0, 1.0, &options(Some(50.0))).unwrap();
    let u = base.simulated_unitary.unwrap();
    for (omega0, omega_pi) in [(3.0, 50.0), (0.2, 50.0), (1.0, 100.0), (1.0, 20.0)] {
        let r = synthesize_single_gate(&spec, 1.0, omega0, &options(Some(omega_pi))).unwrap();
        let d = gate_distance(&u, r.simulated_unitary.as_ref().unwrap()).unwrap();
        assert!(d < 1e-6, "omega0 {omega0}, omega_pi {omega_pi}: {d}");
    }
}

#[test]
fn out_of_range_solid_angle_is_rejected() {
    for solid_angle in [0.0, 4.0 * PI, -5.0 * PI] {
        let spec = SingleGateSpec { vartheta: 0.0, solid_angle };
        assert!(synthesize_single_gate(&spec, 1.0, 1.0, &options(None)).is_err());
    }
}
