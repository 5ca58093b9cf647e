//! Cascade PID baseline: position PID → velocity PI → q/d current PI.
//!
//! Velocity feed-forward from the reference is added to the position loop
//! output, the same way the barrier cascade tracks `x_2d + u_1`. Integrators
//! freeze while their loop output is clipped (conditional integration).

use super::{Command, ControlOutput, EventFlags, Reference};
use crate::plant::{saturate, PlantState, SaturationLimits};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp_pos: f64,
    pub ki_pos: f64,
    pub kd_pos: f64,
    pub kp_vel: f64,
    pub ki_vel: f64,
    pub kp_iq: f64,
    pub ki_iq: f64,
    pub kp_id: f64,
    pub ki_id: f64,
}

impl PidGains {
    pub const LEN: usize = 9;

    pub const NAMES: [&'static str; 9] = [
        "kp_pos", "ki_pos", "kd_pos", "kp_vel", "ki_vel", "kp_iq", "ki_iq", "kp_id", "ki_id",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.kp_pos,
            self.ki_pos,
            self.kd_pos,
            self.kp_vel,
            self.ki_vel,
            self.kp_iq,
            self.ki_iq,
            self.kp_id,
            self.ki_id,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        let &[kp_pos, ki_pos, kd_pos, kp_vel, ki_vel, kp_iq, ki_iq, kp_id, ki_id] = v else {
            return None;
        };
        Some(Self {
            kp_pos,
            ki_pos,
            kd_pos,
            kp_vel,
            ki_vel,
            kp_iq,
            ki_iq,
            kp_id,
            ki_id,
        })
    }

    /// Gains must be finite and non-negative.
    pub fn validate(&self) -> Result<(), &'static str> {
        match self
            .to_array()
            .iter()
            .position(|g| !(g.is_finite() && *g >= 0.0))
        {
            Some(i) => Err(Self::NAMES[i]),
            None => Ok(()),
        }
    }
}

/// Integrator states (in output units) and the last position error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub position: f64,
    pub velocity: f64,
    pub current_q: f64,
    pub current_d: f64,
    pub last_position_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    pub limits: SaturationLimits,
    pub torque_constant: f64,
}

impl Pid {
    pub fn step(
        &self,
        meas: &PlantState,
        reference: Reference,
        state: &PidState,
        dt: f64,
    ) -> (ControlOutput, PidState) {
        let g = &self.gains;
        let mut next = *state;
        let mut out = ControlOutput::default();

        let ep = reference.position - meas.position;
        let dp = state
            .last_position_error
            .map_or(0.0, |prev| (ep - prev) / dt);
        let u1 = g.kp_pos * ep + state.position + g.kd_pos * dp;
        next.last_position_error = Some(ep);

        let ev = reference.velocity + u1 - meas.velocity;
        let torque_raw = g.kp_vel * ev + state.velocity;
        let torque = saturate(torque_raw, &self.limits.torque);
        if torque.clipped {
            out.flags.set(EventFlags::SAT_TORQUE);
        } else {
            next.velocity += g.ki_vel * ev * dt;
            next.position += g.ki_pos * ep * dt;
        }

        let iq_ref = torque.value / self.torque_constant;
        let eq = iq_ref - meas.current_q;
        let vq_raw = g.kp_iq * eq + state.current_q;
        let vq = saturate(vq_raw, &self.limits.voltage_q);
        if vq.clipped {
            out.flags.set(EventFlags::SAT_VOLTAGE_Q);
        } else {
            next.current_q += g.ki_iq * eq * dt;
        }

        let ed = -meas.current_d;
        let vd_raw = g.kp_id * ed + state.current_d;
        let vd = saturate(vd_raw, &self.limits.voltage_d);
        if vd.clipped {
            out.flags.set(EventFlags::SAT_VOLTAGE_D);
        } else {
            next.current_d += g.ki_id * ed * dt;
        }

        out.virtual_velocity = u1;
        out.torque = Command {
            raw: torque_raw,
            value: torque.value,
        };
        out.voltage_q = Command {
            raw: vq_raw,
            value: vq.value,
        };
        out.voltage_d = Command {
            raw: vd_raw,
            value: vd.value,
        };
        out.references = [reference.position, reference.velocity, iq_ref, 0.0];
        out.tracking_errors = [-ep, meas.velocity - reference.velocity, -eq, -ed];
        out.errors = [-ep, -ev, -eq, -ed];
        (out, next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::ChannelLimits;

    fn pid(gains: PidGains) -> Pid {
        Pid {
            gains,
            limits: SaturationLimits {
                torque: ChannelLimits::new(-98.0, 98.0),
                voltage_q: ChannelLimits::new(-400.0, 400.0),
                voltage_d: ChannelLimits::new(-400.0, 400.0),
            },
            torque_constant: 16.0,
        }
    }

    fn gains() -> PidGains {
        PidGains {
            kp_pos: 10.0,
            ki_pos: 1.0,
            kd_pos: 0.1,
            kp_vel: 500.0,
            ki_vel: 50.0,
            kp_iq: 20.0,
            ki_iq: 100.0,
            kp_id: 20.0,
            ki_id: 100.0,
        }
    }

    #[test]
    fn zero_error_zero_output() {
        let c = pid(gains());
        let (out, next) = c.step(
            &PlantState::default(),
            Reference::default(),
            &PidState::default(),
            1e-3,
        );
        assert_eq!(out.virtual_velocity, 0.0);
        assert_eq!(out.torque.raw, 0.0);
        assert_eq!(out.voltage_q.raw, 0.0);
        assert_eq!(out.voltage_d.raw, 0.0);
        assert_eq!(next.position, 0.0);
        assert_eq!(next.velocity, 0.0);
    }

    #[test]
    fn proportional_only() {
        let p_only = PidGains {
            kp_pos: 7.0,
            ki_pos: 0.0,
            kd_pos: 0.0,
            ..gains()
        };
        let c = pid(p_only);
        let r = Reference {
            position: 0.01,
            velocity: 0.0,
        };
        let (out, _) = c.step(&PlantState::default(), r, &PidState::default(), 1e-3);
        assert!((out.virtual_velocity - 7.0 * 0.01).abs() < 1e-15);
        assert!((out.torque.raw - 500.0 * 0.07).abs() < 1e-12);
    }

    #[test]
    fn integrator_frozen_while_saturated() {
        let c = pid(gains());
        let state = PidState {
            velocity: 10.0,
            current_q: 3.0,
            ..Default::default()
        };
        // huge velocity error saturates the torque channel
        let s = PlantState::new(0.0, -1.0, 0.0, 0.0);
        let (out, next) = c.step(&s, Reference::default(), &state, 1e-3);
        assert!(out.flags.contains(EventFlags::SAT_TORQUE));
        assert_eq!(out.torque.value, 98.0);
        assert_eq!(next.velocity, state.velocity);
        assert_eq!(next.position, state.position);

        let (_, unsat) = c.step(&PlantState::new(0.0, -0.01, 0.0, 0.0), Reference::default(), &state, 1e-3);
        assert_ne!(unsat.velocity, state.velocity);
    }

    #[test]
    fn gains_vector() {
        let g = gains();
        assert_eq!(PidGains::from_slice(&g.to_array()), Some(g));
        assert_eq!(PidGains::from_slice(&[1.0; 3]), None);
        let bad = PidGains { kd_pos: -1.0, ..g };
        assert_eq!(bad.validate(), Err("kd_pos"));
    }
}
