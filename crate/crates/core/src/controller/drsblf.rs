//! Dual robust subsystem-based barrier-Lyapunov (DRS-BLF) cascade.
//!
//! Every subsystem `j` uses the same three pieces:
//!
//! ```text
//! phi_j   = e_j / (rho_j² - e_j²)
//! theta_j' = -beta_j kappa_j theta_j + 1/2 zeta_j beta_j phi_j²
//! u_j     = -1/2 (epsilon_j e_j + zeta_j theta_j phi_j)
//! ```
//!
//! wired position → virtual velocity → torque → q/d voltages. The q-current
//! reference is the saturated torque command divided by `K_t`; the d-current
//! reference is zero.

use super::{
    BarrierViolation, Command, ControlOutput, ControllerGains, EventFlags, Reference,
    SafetyEnvelope, ViolationPolicy,
};
use crate::math;
use crate::plant::{saturate, PlantState, SaturationLimits};

/// Under [`ViolationPolicy::Clamp`], `Q_j` is floored at this fraction of
/// `rho_j²`.
pub const Q_FLOOR_FRACTION: f64 = 1e-9;

/// `(x_ej, e_j)` for 1-based `subsystem`. Only subsystem 2 subtracts the
/// virtual control.
pub fn tracking_error(x: f64, x_ref: f64, subsystem: usize, virtual_velocity: f64) -> (f64, f64) {
    let xe = x - x_ref;
    if subsystem == 2 {
        (xe, xe - virtual_velocity)
    } else {
        (xe, xe)
    }
}

/// Barrier evaluation of one transformed error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub phi: f64,
    /// `rho² - e²` (floored when clamped).
    pub q: f64,
    pub clamped: bool,
}

impl Barrier {
    /// `ln(rho² / Q)`, zero at `e = 0` and unbounded at the barrier.
    ///
    /// Evaluated as `ln_1p(e² / Q)` with `e² / Q = phi² Q`, which keeps full
    /// relative precision for `|e| << rho`.
    pub fn margin(&self, rho: f64) -> f64 {
        if self.clamped {
            math::ln(rho * rho / self.q)
        } else {
            math::ln_1p(self.phi * self.phi * self.q)
        }
    }
}

/// `phi = e / Q`, `Q = rho² - e²`; fails when `|e| >= rho`.
pub fn barrier_phi(e: f64, rho: f64, subsystem: usize) -> Result<Barrier, BarrierViolation> {
    let q = rho * rho - e * e;
    if !(e.abs() < rho) || q <= 0.0 {
        return Err(BarrierViolation {
            subsystem,
            error: e,
            rho,
        });
    }
    Ok(Barrier {
        phi: e / q,
        q,
        clamped: false,
    })
}

/// Like [`barrier_phi`] but floors `Q` at `Q_FLOOR_FRACTION · rho²` instead of
/// failing.
pub fn barrier_phi_clamped(e: f64, rho: f64) -> Barrier {
    let floor = Q_FLOOR_FRACTION * rho * rho;
    let q = rho * rho - e * e;
    if q > floor {
        Barrier {
            phi: e / q,
            q,
            clamped: false,
        }
    } else {
        Barrier {
            phi: e / floor,
            q: floor,
            clamped: true,
        }
    }
}

/// `u = -1/2 (epsilon e + zeta theta phi)`.
#[inline]
pub fn control_law(e: f64, phi: f64, theta: f64, epsilon: f64, zeta: f64) -> f64 {
    -0.5 * (epsilon * e + zeta * theta * phi)
}

/// Advance the adaptive estimate over `dt` with `phi` held constant.
///
/// Uses the exact solution of the linear update,
/// `theta' = theta* + (theta - theta*) e^(-beta kappa dt)` with
/// `theta* = zeta phi² / (2 kappa)`, so a positive estimate stays positive for
/// any step size. With `phi = 0` the estimate decays geometrically and would
/// underflow to zero after a few hundred ticks, so it is floored at
/// [`THETA_MIN`].
pub fn adaptive_step(theta: f64, phi: f64, beta: f64, kappa: f64, zeta: f64, dt: f64) -> f64 {
    let a = beta * kappa * dt;
    let target = zeta * phi * phi / (2.0 * kappa);
    (theta * math::exp(-a) + target * -libm::expm1(-a)).max(THETA_MIN)
}

/// Smallest adaptive estimate kept (the smallest normal `f64`).
pub const THETA_MIN: f64 = f64::MIN_POSITIVE;

/// Adaptive estimates carried between control ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveState {
    pub theta: [f64; 4],
    /// Virtual velocity command from the previous tick.
    pub virtual_velocity: f64,
}

impl AdaptiveState {
    pub const fn uniform(theta0: f64) -> Self {
        Self {
            theta: [theta0; 4],
            virtual_velocity: 0.0,
        }
    }
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

/// Configured DRS-BLF controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrsBlf {
    pub gains: ControllerGains,
    pub envelope: SafetyEnvelope,
    pub limits: SaturationLimits,
    /// `K_t` used to turn the torque command into a q-current reference.
    pub torque_constant: f64,
    pub policy: ViolationPolicy,
}

impl DrsBlf {
    fn barrier(
        &self,
        e: f64,
        j: usize,
        flags: &mut EventFlags,
    ) -> Result<Barrier, BarrierViolation> {
        let rho = self.envelope.rho(j);
        match self.policy {
            ViolationPolicy::Abort => barrier_phi(e, rho, j + 1),
            ViolationPolicy::Clamp => {
                let b = barrier_phi_clamped(e, rho);
                if b.clamped {
                    flags.set(EventFlags::CLAMP_1 << j);
                }
                Ok(b)
            }
        }
    }

    /// Barrier, adaptive update and control law of subsystem `j` (0-based).
    fn subsystem(
        &self,
        e: f64,
        j: usize,
        theta: &mut [f64; 4],
        dt: f64,
        out: &mut ControlOutput,
    ) -> Result<f64, BarrierViolation> {
        let g = &self.gains;
        let b = self.barrier(e, j, &mut out.flags)?;
        theta[j] = adaptive_step(theta[j], b.phi, g.beta[j], g.kappa[j], g.zeta[j], dt);
        out.errors[j] = e;
        out.phi[j] = b.phi;
        out.margins[j] = b.margin(self.envelope.rho(j));
        Ok(control_law(e, b.phi, theta[j], g.epsilon[j], g.zeta[j]))
    }

    /// One control tick of the cascade.
    pub fn step(
        &self,
        meas: &PlantState,
        reference: Reference,
        adaptive: &AdaptiveState,
        dt: f64,
    ) -> Result<(ControlOutput, AdaptiveState), BarrierViolation> {
        let mut out = ControlOutput::default();
        let mut theta = adaptive.theta;

        // position -> virtual velocity
        let (xe1, e1) = tracking_error(meas.position, reference.position, 1, 0.0);
        let u1 = self.subsystem(e1, 0, &mut theta, dt, &mut out)?;

        // velocity -> torque
        let (xe2, e2) = tracking_error(meas.velocity, reference.velocity, 2, u1);
        let u2 = self.subsystem(e2, 1, &mut theta, dt, &mut out)?;
        let torque = saturate(u2, &self.limits.torque);
        if (reference.velocity + u1).abs() > self.envelope.bounds[1].lambda {
            out.flags.set(EventFlags::VELOCITY_REFERENCE);
        }

        // q-current reference from the saturated torque
        let x3d = torque.value / self.torque_constant;
        let (xe3, e3) = tracking_error(meas.current_q, x3d, 3, 0.0);
        let u3 = self.subsystem(e3, 2, &mut theta, dt, &mut out)?;
        let vq = saturate(u3, &self.limits.voltage_q);

        let (xe4, e4) = tracking_error(meas.current_d, 0.0, 4, 0.0);
        let u4 = self.subsystem(e4, 3, &mut theta, dt, &mut out)?;
        let vd = saturate(u4, &self.limits.voltage_d);

        for (clipped, bit) in [
            (torque.clipped, EventFlags::SAT_TORQUE),
            (vq.clipped, EventFlags::SAT_VOLTAGE_Q),
            (vd.clipped, EventFlags::SAT_VOLTAGE_D),
        ] {
            if clipped {
                out.flags.set(bit);
            }
        }
        out.virtual_velocity = u1;
        out.torque = Command {
            raw: u2,
            value: torque.value,
        };
        out.voltage_q = Command {
            raw: u3,
            value: vq.value,
        };
        out.voltage_d = Command {
            raw: u4,
            value: vd.value,
        };
        out.references = [reference.position, reference.velocity, x3d, 0.0];
        out.tracking_errors = [xe1, xe2, xe3, xe4];

        Ok((
            out,
            AdaptiveState {
                theta,
                virtual_velocity: u1,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Bound;
    use crate::plant::ChannelLimits;

    fn controller() -> DrsBlf {
        DrsBlf {
            gains: ControllerGains::published(),
            envelope: SafetyEnvelope::new([
                Bound::new(0.15, 0.12),
                Bound::new(0.3, 0.2),
                Bound::new(16.0, 6.5),
                Bound::new(5.0, 0.5),
            ]),
            limits: SaturationLimits {
                torque: ChannelLimits::new(-98.0, 98.0),
                voltage_q: ChannelLimits::new(-400.0, 400.0),
                voltage_d: ChannelLimits::new(-400.0, 400.0),
            },
            torque_constant: 16.0,
            policy: ViolationPolicy::Abort,
        }
    }

    #[test]
    fn tracking_error_examples() {
        assert_eq!(tracking_error(0.4, 0.4, 1, 0.0), (0.0, 0.0));
        let (xe, e) = tracking_error(1.0, 0.8, 2, 0.1);
        assert!((xe - 0.2).abs() < 1e-15);
        assert!((e - 0.1).abs() < 1e-15);
        let (_, e) = tracking_error(0.05, 0.02, 1, 0.7);
        assert!((e - 0.03).abs() < 1e-15);
        // only subsystem 2 removes the virtual command
        assert_eq!(tracking_error(2.0, 1.0, 3, 5.0), (1.0, 1.0));
    }

    #[test]
    fn barrier_examples() {
        let rho = 0.1;
        let b = barrier_phi(0.0, rho, 1).unwrap();
        assert_eq!((b.phi, b.q), (0.0, rho * rho));
        assert_eq!(b.margin(rho), 0.0);

        let e = rho / core::f64::consts::SQRT_2;
        let b = barrier_phi(e, rho, 1).unwrap();
        assert!((b.q - rho * rho / 2.0).abs() < 1e-15);
        assert!((b.phi - core::f64::consts::SQRT_2 / rho).abs() < 1e-9);

        let e = 0.999 * rho;
        let b = barrier_phi(e, rho, 1).unwrap();
        assert!(b.phi > 400.0);
        assert!(b.margin(rho) < e * e / b.q);

        let v = barrier_phi(rho, rho, 3).unwrap_err();
        assert_eq!(v.subsystem, 3);
        assert!(barrier_phi(-0.2, rho, 1).is_err());
        assert!(barrier_phi(f64::NAN, rho, 1).is_err());
    }

    #[test]
    fn clamped_barrier_floors_q() {
        let rho = 0.1;
        let b = barrier_phi_clamped(0.2, rho);
        assert!(b.clamped);
        assert_eq!(b.q, Q_FLOOR_FRACTION * rho * rho);
        assert!(b.phi > 0.0);
        let b = barrier_phi_clamped(-0.05, rho);
        assert!(!b.clamped);
        assert_eq!(b, barrier_phi(-0.05, rho, 1).unwrap());
    }

    #[test]
    fn control_law_examples() {
        assert_eq!(control_law(0.0, 0.0, 3.0, 1.0, 1.0), 0.0);
        let (e, rho) = (0.01, 0.1);
        let phi = barrier_phi(e, rho, 1).unwrap().phi;
        assert!((phi - 0.01 / (0.01 - 0.0001)).abs() < 1e-12);
        let u = control_law(e, phi, 1.0, 0.005, 0.002);
        let expect = -0.5 * (0.005 * 0.01 + 0.002 * phi);
        assert!((u - expect).abs() < 1e-15);
        assert!(u < 0.0);
        assert!(control_law(-e, -phi, 1.0, 0.005, 0.002) > 0.0);
    }

    #[test]
    fn adaptive_examples() {
        let t = adaptive_step(2.0, 0.0, 1.0, 1.0, 0.5, 0.001);
        assert!((t - 2.0 * (-0.001f64).exp()).abs() < 1e-15);

        let t = adaptive_step(1e-300, 3.0, 11.2, 98.0, 0.002, 1e-3);
        assert!(t > 0.0);

        let mut t = 1.0;
        for _ in 0..10_000 {
            t = adaptive_step(t, 0.0, 19.8, 76.0, 0.001, 1e-3);
        }
        assert_eq!(t, THETA_MIN);

        let (zeta, kappa, phi) = (0.002, 98.0, 7.5);
        let star = zeta * phi * phi / (2.0 * kappa);
        let t = adaptive_step(star, phi, 11.2, kappa, zeta, 1e-3);
        assert!((t - star).abs() < 1e-9);
    }

    #[test]
    fn zero_error_is_a_fixed_point() {
        let c = controller();
        let s = PlantState::default();
        let (out, next) = c
            .step(&s, Reference::default(), &AdaptiveState::default(), 1e-3)
            .unwrap();
        assert_eq!(out.virtual_velocity, 0.0);
        assert_eq!(out.torque.raw, 0.0);
        assert_eq!(out.voltage_q.raw, 0.0);
        assert_eq!(out.voltage_d.raw, 0.0);
        assert!(out.flags.is_empty());
        assert!(next.theta.iter().all(|t| *t > 0.0));
    }

    #[test]
    fn positive_position_error_commands_negative_velocity() {
        let c = controller();
        let rho1 = c.envelope.rho(0);
        let s = PlantState::new(0.05 + rho1 / 2.0, 0.0, 0.0, 0.0);
        let r = Reference {
            position: 0.05,
            velocity: 0.0,
        };
        let (out, _) = c.step(&s, r, &AdaptiveState::default(), 1e-3).unwrap();
        assert!(out.virtual_velocity < 0.0);
    }

    #[test]
    fn saturated_torque_drives_current_reference() {
        let mut c = controller();
        c.gains.epsilon[1] = 1e5;
        let s = PlantState::new(0.0, -0.05, 0.0, 0.0);
        let (out, _) = c
            .step(&s, Reference::default(), &AdaptiveState::default(), 1e-3)
            .unwrap();
        let sat = saturate(out.torque.raw, &c.limits.torque);
        assert!(sat.clipped);
        assert_eq!(out.torque.value, 98.0);
        assert_eq!(out.references[2], 98.0 / 16.0);
        assert!(out.flags.contains(EventFlags::SAT_TORQUE));
    }

    #[test]
    fn abort_and_clamp_policies() {
        let mut c = controller();
        let s = PlantState::new(1.0, 0.0, 0.0, 0.0);
        let err = c
            .step(&s, Reference::default(), &AdaptiveState::default(), 1e-3)
            .unwrap_err();
        assert_eq!(err.subsystem, 1);

        c.policy = ViolationPolicy::Clamp;
        let (out, _) = c
            .step(&s, Reference::default(), &AdaptiveState::default(), 1e-3)
            .unwrap();
        assert!(out.flags.clamped(0));
        assert!(out.is_finite());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn log_barrier_inequality(rho in 1e-4f64..1e3, frac in 1e-6f64..0.999999, neg in any::<bool>()) {
                let e = if neg { -frac * rho } else { frac * rho };
                let b = barrier_phi(e, rho, 1).unwrap();
                prop_assert!(b.margin(rho) < e * e / b.q);
            }

            #[test]
            fn theta_stays_positive(theta0 in 1e-12f64..10.0, beta in 1e-3f64..1e3, kappa in 1e-3f64..1e3,
                                    zeta in 1e-6f64..1.0, phis in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
                let mut t = theta0;
                for phi in phis {
                    t = adaptive_step(t, phi, beta, kappa, zeta, 1e-3);
                    prop_assert!(t > 0.0);
                }
            }

            #[test]
            fn step_matches_control_law(x1 in 0.0f64..0.02, x2 in -0.01f64..0.05, x3 in -3.0f64..3.0,
                                        x4 in -0.3f64..0.3, th in 1e-3f64..5.0) {
                let c = controller();
                let s = PlantState::new(x1, x2, x3, x4);
                let a = AdaptiveState::uniform(th);
                let r = Reference { position: 0.01, velocity: 0.02 };
                let (out, next) = c.step(&s, r, &a, 1e-3).unwrap();
                let g = &c.gains;
                let raw = [out.virtual_velocity, out.torque.raw, out.voltage_q.raw, out.voltage_d.raw];
                for j in 0..4 {
                    let rho = c.envelope.rho(j);
                    let e = out.errors[j];
                    let phi = e / (rho * rho - e * e);
                    let u = -0.5 * (g.epsilon[j] * e + g.zeta[j] * next.theta[j] * phi);
                    prop_assert_eq!(raw[j], u);
                }
                // determinism
                let again = c.step(&s, r, &a, 1e-3).unwrap();
                prop_assert_eq!(again, (out, next));
            }
        }
    }
}
