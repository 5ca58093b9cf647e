//! Closed-loop controllers for the actuator cascade.
//!
//! Both controllers are stateless values: the evolving part (adaptive
//! estimates, PID integrators) is passed in and returned from every step.

use core::fmt;

mod drsblf;
mod envelope;
mod pid;

pub use drsblf::{
    adaptive_step, barrier_phi, barrier_phi_clamped, control_law, tracking_error, AdaptiveState,
    Barrier, DrsBlf, Q_FLOOR_FRACTION, THETA_MIN,
};
pub use envelope::{envelope_check, EnvelopeReport, ReferencePoint, SubsystemCheck};
pub use pid::{Pid, PidGains, PidState};

/// Per-subsystem bound pair: `|x_j| < chi`, `|x_jd| <= lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub chi: f64,
    pub lambda: f64,
}

impl Bound {
    pub const fn new(chi: f64, lambda: f64) -> Self {
        Self { chi, lambda }
    }

    /// Error budget `rho = chi - lambda`.
    #[inline]
    pub fn rho(&self) -> f64 {
        self.chi - self.lambda
    }
}

/// State and reference bounds of the four subsystems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyEnvelope {
    pub bounds: [Bound; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeError {
    /// 1-based.
    pub subsystem: usize,
    pub bound: Bound,
}

impl fmt::Display for EnvelopeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "subsystem {}: need 0 < lambda < chi (lambda = {}, chi = {})",
            self.subsystem, self.bound.lambda, self.bound.chi
        )
    }
}

impl core::error::Error for EnvelopeError {}

impl SafetyEnvelope {
    pub const fn new(bounds: [Bound; 4]) -> Self {
        Self { bounds }
    }

    pub fn rho(&self, j: usize) -> f64 {
        self.bounds[j].rho()
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        for (j, b) in self.bounds.iter().enumerate() {
            let ok = b.chi.is_finite() && b.lambda.is_finite() && 0.0 < b.lambda && b.lambda < b.chi;
            if !ok {
                return Err(EnvelopeError {
                    subsystem: j + 1,
                    bound: *b,
                });
            }
        }
        Ok(())
    }
}

/// The 16 tunable gains, four per subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub beta: [f64; 4],
    pub kappa: [f64; 4],
    pub zeta: [f64; 4],
    pub epsilon: [f64; 4],
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::published()
    }
}

impl ControllerGains {
    pub const LEN: usize = 16;

    /// Parameter names in vector order.
    pub const NAMES: [&'static str; 16] = [
        "beta1", "beta2", "beta3", "beta4", "kappa1", "kappa2", "kappa3", "kappa4", "zeta1",
        "zeta2", "zeta3", "zeta4", "epsilon1", "epsilon2", "epsilon3", "epsilon4",
    ];

    /// Gains reported for the 25 kN test rig.
    pub const fn published() -> Self {
        Self {
            beta: [11.2, 19.8, 4.75, 7.1],
            kappa: [98.0, 76.0, 24.0, 48.0],
            zeta: [0.002, 0.001, 0.0001, 0.0021],
            epsilon: [0.005, 0.008, 0.001, 0.003],
        }
    }

    pub fn to_array(&self) -> [f64; 16] {
        let mut v = [0.0; 16];
        v[0..4].copy_from_slice(&self.beta);
        v[4..8].copy_from_slice(&self.kappa);
        v[8..12].copy_from_slice(&self.zeta);
        v[12..16].copy_from_slice(&self.epsilon);
        v
    }

    /// `None` unless `v` has exactly 16 entries.
    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != Self::LEN {
            return None;
        }
        let pick = |o: usize| [v[o], v[o + 1], v[o + 2], v[o + 3]];
        Some(Self {
            beta: pick(0),
            kappa: pick(4),
            zeta: pick(8),
            epsilon: pick(12),
        })
    }

    /// Name of the first gain that is not strictly positive and finite.
    pub fn validate(&self) -> Result<(), &'static str> {
        match self
            .to_array()
            .iter()
            .position(|g| !(g.is_finite() && *g > 0.0))
        {
            Some(i) => Err(Self::NAMES[i]),
            None => Ok(()),
        }
    }

    /// Subsystems for which `beta·kappa·dt >= 1`, i.e. where a forward-Euler
    /// adaptive update could drive the estimate negative. The exact-decay
    /// update used here stays positive regardless; this is reported only.
    pub fn euler_positivity_violations(&self, dt: f64) -> [bool; 4] {
        core::array::from_fn(|j| self.beta[j] * self.kappa[j] * dt >= 1.0)
    }
}

/// What to do when a transformed error reaches its barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViolationPolicy {
    /// Stop the run and report the violation.
    #[default]
    Abort,
    /// Floor `Q_j` at `Q_FLOOR_FRACTION · rho_j²` and flag the sample.
    Clamp,
}

/// `|e_j|` reached `rho_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierViolation {
    /// 1-based.
    pub subsystem: usize,
    pub error: f64,
    pub rho: f64,
}

impl fmt::Display for BarrierViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "barrier violated in subsystem {}: |e| = {} >= rho = {}",
            self.subsystem,
            self.error.abs(),
            self.rho
        )
    }
}

impl core::error::Error for BarrierViolation {}

/// Bit set of per-sample events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventFlags(pub u16);

impl EventFlags {
    pub const SAT_TORQUE: u16 = 1 << 0;
    pub const SAT_VOLTAGE_Q: u16 = 1 << 1;
    pub const SAT_VOLTAGE_D: u16 = 1 << 2;
    /// `CLAMP_1 << j` for 0-based subsystem `j`.
    pub const CLAMP_1: u16 = 1 << 3;
    /// `|x_2d + u_1|` exceeded `lambda_2`.
    pub const VELOCITY_REFERENCE: u16 = 1 << 7;
    pub const VIOLATION: u16 = 1 << 8;
    /// Reference sampled outside the trajectory and held.
    pub const REFERENCE_HELD: u16 = 1 << 9;

    const NAMES: [(u16, &'static str); 10] = [
        (Self::SAT_TORQUE, "sat2"),
        (Self::SAT_VOLTAGE_Q, "sat3"),
        (Self::SAT_VOLTAGE_D, "sat4"),
        (Self::CLAMP_1, "clamp1"),
        (Self::CLAMP_1 << 1, "clamp2"),
        (Self::CLAMP_1 << 2, "clamp3"),
        (Self::CLAMP_1 << 3, "clamp4"),
        (Self::VELOCITY_REFERENCE, "ref2"),
        (Self::VIOLATION, "violation"),
        (Self::REFERENCE_HELD, "held"),
    ];

    #[inline]
    pub fn set(&mut self, bit: u16) {
        self.0 |= bit;
    }

    #[inline]
    pub fn contains(&self, bit: u16) -> bool {
        self.0 & bit == bit
    }

    pub fn clamped(&self, j: usize) -> bool {
        self.contains(Self::CLAMP_1 << j)
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }
}

/// `|`-separated flag names, `-` when empty.
impl fmt::Display for EventFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let mut first = true;
        for (bit, name) in Self::NAMES {
            if self.contains(bit) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

impl core::str::FromStr for EventFlags {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let mut flags = EventFlags::default();
        if s == "-" || s.is_empty() {
            return Ok(flags);
        }
        for part in s.split('|') {
            let (bit, _) = Self::NAMES.iter().find(|(_, n)| *n == part).ok_or(())?;
            flags.set(*bit);
        }
        Ok(flags)
    }
}

/// Raw and saturated value of one command channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    pub raw: f64,
    pub value: f64,
}

/// Position and velocity references for one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub position: f64,
    pub velocity: f64,
}

/// Everything one controller step produces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    /// Virtual velocity command `u1` (m/s).
    pub virtual_velocity: f64,
    /// `u2` (N·m).
    pub torque: Command,
    /// `u3` (V).
    pub voltage_q: Command,
    /// `u4` (V).
    pub voltage_d: Command,
    /// `x_1d .. x_4d`.
    pub references: [f64; 4],
    /// `x_ej = x_j - x_jd`.
    pub tracking_errors: [f64; 4],
    /// Transformed errors `e_j` (`e_2` has `u1` removed).
    pub errors: [f64; 4],
    pub phi: [f64; 4],
    /// `ln(rho_j² / Q_j)`.
    pub margins: [f64; 4],
    pub flags: EventFlags,
}

impl ControlOutput {
    pub fn is_finite(&self) -> bool {
        let scalars = [
            self.virtual_velocity,
            self.torque.raw,
            self.torque.value,
            self.voltage_q.raw,
            self.voltage_q.value,
            self.voltage_d.raw,
            self.voltage_d.value,
        ];
        scalars
            .iter()
            .chain(&self.errors)
            .chain(&self.phi)
            .chain(&self.margins)
            .all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gains_vector_round_trip() {
        let g = ControllerGains::published();
        let v = g.to_array();
        assert_eq!(v[0], 11.2);
        assert_eq!(v[15], 0.003);
        assert_eq!(ControllerGains::from_slice(&v), Some(g));
        assert_eq!(ControllerGains::from_slice(&v[..15]), None);
        assert!(g.validate().is_ok());
        let mut bad = g;
        bad.zeta[2] = 0.0;
        assert_eq!(bad.validate(), Err("zeta3"));
    }

    #[test]
    fn published_gains_fail_euler_positivity_at_1khz() {
        // 11.2 * 98 * 1e-3 = 1.0976 and 19.8 * 76 * 1e-3 = 1.5048
        let v = ControllerGains::published().euler_positivity_violations(1e-3);
        assert_eq!(v, [true, true, false, false]);
    }

    #[test]
    fn envelope_validation() {
        let ok = SafetyEnvelope::new([Bound::new(1.0, 0.5); 4]);
        assert!(ok.validate().is_ok());
        assert_eq!(ok.rho(0), 0.5);
        let mut bad = ok;
        bad.bounds[2] = Bound::new(1.0, 1.0);
        assert_eq!(bad.validate().unwrap_err().subsystem, 3);
        bad.bounds[2] = Bound::new(1.0, 0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn flags_display_and_parse() {
        let mut f = EventFlags::default();
        assert_eq!(alloc::format!("{f}"), "-");
        f.set(EventFlags::SAT_TORQUE);
        f.set(EventFlags::CLAMP_1 << 2);
        let s = alloc::format!("{f}");
        assert_eq!(s, "sat2|clamp3");
        assert_eq!(s.parse::<EventFlags>(), Ok(f));
        assert!(f.clamped(2));
        assert!(!f.clamped(0));
        assert!("bogus".parse::<EventFlags>().is_err());
    }
}
