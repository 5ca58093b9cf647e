//! Per-sample safety checks on a finished trace.

use super::{ControllerKind, SimulationTrace};
use crate::controller::SafetyEnvelope;
use crate::plant::SaturationLimits;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvariantFailure {
    /// `|x_j| >= chi_j`.
    State {
        subsystem: usize,
        time: f64,
        value: f64,
        bound: f64,
    },
    /// `|e_j| >= rho_j` on a sample that was not clamp-flagged.
    Error {
        subsystem: usize,
        time: f64,
        value: f64,
        bound: f64,
    },
    /// Adaptive estimate not strictly positive.
    Theta {
        subsystem: usize,
        time: f64,
        value: f64,
    },
    /// Applied command outside its limits (channel 2 = torque, 3/4 = voltages).
    Command {
        channel: usize,
        time: f64,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub first_failure: Option<InvariantFailure>,
    pub samples: usize,
    /// Samples with at least one clamp flag; their `|e_j| < rho_j` check is
    /// skipped.
    pub clamped_samples: usize,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

pub fn check_trace_invariants(
    trace: &SimulationTrace,
    envelope: &SafetyEnvelope,
    limits: &SaturationLimits,
) -> InvariantReport {
    let mut first_failure = None;
    let mut clamped_samples = 0;
    let check_theta = trace.controller == ControllerKind::DrsBlf;

    for r in &trace.records {
        let mut found = None;
        let x = r.state.to_array();
        let mut any_clamp = false;
        for j in 0..4 {
            let b = envelope.bounds[j];
            let clamped = r.flags.clamped(j);
            any_clamp |= clamped;
            if !(x[j].abs() < b.chi) {
                found = found.or(Some(InvariantFailure::State {
                    subsystem: j + 1,
                    time: r.time,
                    value: x[j],
                    bound: b.chi,
                }));
            }
            if !clamped && !(r.errors[j].abs() < b.rho()) {
                found = found.or(Some(InvariantFailure::Error {
                    subsystem: j + 1,
                    time: r.time,
                    value: r.errors[j],
                    bound: b.rho(),
                }));
            }
            if check_theta && !(r.theta[j] > 0.0) {
                found = found.or(Some(InvariantFailure::Theta {
                    subsystem: j + 1,
                    time: r.time,
                    value: r.theta[j],
                }));
            }
        }
        for (channel, value, lim) in [
            (2, r.torque.value, limits.torque),
            (3, r.voltage_q.value, limits.voltage_q),
            (4, r.voltage_d.value, limits.voltage_d),
        ] {
            if !lim.contains(value) {
                found = found.or(Some(InvariantFailure::Command {
                    channel,
                    time: r.time,
                    value,
                }));
            }
        }
        clamped_samples += usize::from(any_clamp);
        if first_failure.is_none() {
            first_failure = found;
        }
    }

    InvariantReport {
        first_failure,
        samples: trace.records.len(),
        clamped_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{EventFlags, ViolationPolicy};
    use crate::sim::{run, tests::hold_scenario};

    #[test]
    fn clean_trace_passes() {
        let s = hold_scenario();
        let t = run(&s).unwrap();
        let r = check_trace_invariants(&t, &s.envelope, &s.limits);
        assert!(r.passed(), "{:?}", r.first_failure);
        assert_eq!(r.samples, t.records.len());
    }

    #[test]
    fn injected_fault_is_named() {
        let s = hold_scenario();
        let mut t = run(&s).unwrap();
        t.records[500].state.current_q = 20.0; // chi3 = 16
        let r = check_trace_invariants(&t, &s.envelope, &s.limits);
        match r.first_failure {
            Some(InvariantFailure::State {
                subsystem,
                time,
                value,
                ..
            }) => {
                assert_eq!(subsystem, 3);
                assert_eq!(time, 0.5);
                assert_eq!(value, 20.0);
            }
            other => panic!("{other:?}"),
        }

        let mut t = run(&s).unwrap();
        t.records[10].theta[1] = 0.0;
        assert!(matches!(
            check_trace_invariants(&t, &s.envelope, &s.limits).first_failure,
            Some(InvariantFailure::Theta { subsystem: 2, .. })
        ));

        let mut t = run(&s).unwrap();
        t.records[10].voltage_d.value = 1e4;
        assert!(matches!(
            check_trace_invariants(&t, &s.envelope, &s.limits).first_failure,
            Some(InvariantFailure::Command { channel: 4, .. })
        ));
    }

    #[test]
    fn clamped_samples_skip_error_bound() {
        let mut s = hold_scenario();
        s.policy = ViolationPolicy::Clamp;
        let mut t = run(&s).unwrap();
        t.records[3].errors[0] = 1.0;
        let r = check_trace_invariants(&t, &s.envelope, &s.limits);
        assert!(matches!(r.first_failure, Some(InvariantFailure::Error { subsystem: 1, .. })));

        t.records[3].flags.set(EventFlags::CLAMP_1);
        let r = check_trace_invariants(&t, &s.envelope, &s.limits);
        assert!(r.passed());
        assert_eq!(r.clamped_samples, 1);
    }
}
