//! A-priori check of reference signals against the safety envelope.

use super::SafetyEnvelope;
use crate::plant::ChannelLimits;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub time: f64,
    pub position: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsystemCheck {
    Pass,
    /// First sample where `|x_jd| > lambda_j`.
    Violated { time: f64, value: f64, lambda: f64 },
    /// Depends on runtime signals; watched during simulation.
    RuntimeMonitored,
}

impl SubsystemCheck {
    pub fn is_violated(&self) -> bool {
        matches!(self, SubsystemCheck::Violated { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub subsystems: [SubsystemCheck; 4],
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        !self.subsystems.iter().any(SubsystemCheck::is_violated)
    }
}

fn scan(
    samples: &[ReferencePoint],
    lambda: f64,
    value: impl Fn(&ReferencePoint) -> f64,
) -> SubsystemCheck {
    samples
        .iter()
        .find(|p| value(p).abs() > lambda)
        .map_or(SubsystemCheck::Pass, |p| SubsystemCheck::Violated {
            time: p.time,
            value: value(p),
            lambda,
        })
}

/// Check `|x_jd| <= lambda_j` over sampled references.
///
/// - `j = 1`: position samples.
/// - `j = 2`: `|x_2d| + virtual_bound` when a bound on `|u_1|` is supplied,
///   otherwise runtime-monitored.
/// - `j = 3`: the q-current reference is at most `max|torque limit| / K_t`.
/// - `j = 4`: the d-current reference is identically zero.
pub fn envelope_check(
    samples: &[ReferencePoint],
    envelope: &SafetyEnvelope,
    torque_limits: &ChannelLimits,
    torque_constant: f64,
    virtual_bound: Option<f64>,
) -> EnvelopeReport {
    let b = &envelope.bounds;
    let position = scan(samples, b[0].lambda, |p| p.position);
    let velocity = match virtual_bound {
        Some(u) => scan(samples, b[1].lambda, |p| p.velocity.abs() + u.abs()),
        None => SubsystemCheck::RuntimeMonitored,
    };
    let max_iq = torque_limits.lower.abs().max(torque_limits.upper.abs()) / torque_constant;
    let current_q = if max_iq <= b[2].lambda {
        SubsystemCheck::Pass
    } else {
        SubsystemCheck::Violated {
            time: samples.first().map_or(0.0, |p| p.time),
            value: max_iq,
            lambda: b[2].lambda,
        }
    };
    EnvelopeReport {
        subsystems: [position, velocity, current_q, SubsystemCheck::Pass],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Bound;
    use alloc::vec::Vec;

    fn env(lambda1: f64) -> SafetyEnvelope {
        SafetyEnvelope::new([
            Bound::new(lambda1 + 0.03, lambda1),
            Bound::new(0.3, 0.2),
            Bound::new(16.0, 6.5),
            Bound::new(5.0, 0.5),
        ])
    }

    fn ramp() -> Vec<ReferencePoint> {
        (0..=100)
            .map(|k| ReferencePoint {
                time: k as f64 * 0.01,
                position: k as f64 * 0.001,
                velocity: 0.1,
            })
            .collect()
    }

    const TORQUE: ChannelLimits = ChannelLimits::new(-98.0, 98.0);

    #[test]
    fn wide_envelope_passes() {
        let r = envelope_check(&ramp(), &env(0.2), &TORQUE, 16.0, None);
        assert!(r.passed());
        assert_eq!(r.subsystems[1], SubsystemCheck::RuntimeMonitored);
    }

    #[test]
    fn tight_envelope_reports_first_violation() {
        let r = envelope_check(&ramp(), &env(0.05), &TORQUE, 16.0, None);
        assert!(!r.passed());
        match r.subsystems[0] {
            SubsystemCheck::Violated { time, value, .. } => {
                assert!((time - 0.51).abs() < 1e-12);
                assert!(value > 0.05);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_horizon_is_vacuous() {
        let r = envelope_check(&[], &env(0.05), &TORQUE, 16.0, Some(0.01));
        assert!(r.passed());
    }

    #[test]
    fn velocity_and_current_bounds() {
        let r = envelope_check(&ramp(), &env(0.2), &TORQUE, 16.0, Some(0.15));
        assert!(r.subsystems[1].is_violated());
        let r = envelope_check(&ramp(), &env(0.2), &TORQUE, 10.0, Some(0.05));
        assert_eq!(r.subsystems[1], SubsystemCheck::Pass);
        // 98 / 10 = 9.8 A > 6.5 A
        assert!(r.subsystems[2].is_violated());
    }
}
