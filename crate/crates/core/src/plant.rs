//! PMSM-driven linear actuator model in the rotor dq frame.
//!
//! State ordering follows the subsystem cascade used by the controller:
//! position `x1`, velocity `x2`, q-axis current `x3`, d-axis current `x4`.
//! The mechanical subsystem is driven by the torque produced by the actual
//! currents, so any current-loop error shows up as a mechanical disturbance.

use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Physical constants of the motor, screw and load.
///
/// Units are SI. `equivalent_*` quantities are referred to the motor shaft
/// torque balance written in load-side linear coordinates, so
/// `equivalent_inertia` is in N·m per (m/s²) and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub pole_pairs: u32,
    /// Permanent-magnet flux linkage (Wb).
    pub flux_linkage: f64,
    pub inductance_d: f64,
    pub inductance_q: f64,
    pub stator_resistance: f64,
    /// Rotor angle per unit of linear travel (rad/m).
    pub rotary_to_linear: f64,
    pub equivalent_inertia: f64,
    pub equivalent_viscosity: f64,
    /// May be zero.
    pub equivalent_stiffness: f64,
    /// Load force to shaft torque coefficient.
    pub force_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    NotPositive(&'static str, f64),
    Negative(&'static str, f64),
    NotFinite(&'static str),
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::NotPositive(name, v) => write!(f, "{name} must be > 0 (got {v})"),
            ParamError::Negative(name, v) => write!(f, "{name} must be >= 0 (got {v})"),
            ParamError::NotFinite(name) => write!(f, "{name} must be finite"),
        }
    }
}

impl core::error::Error for ParamError {}

impl PlantParams {
    /// `K_t = 3/2 · P · θ_PM` in N·m/A.
    #[inline]
    pub fn torque_constant(&self) -> f64 {
        1.5 * self.pole_pairs as f64 * self.flux_linkage
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.pole_pairs == 0 {
            return Err(ParamError::NotPositive("pole_pairs", 0.0));
        }
        let positive = [
            ("flux_linkage", self.flux_linkage),
            ("inductance_d", self.inductance_d),
            ("inductance_q", self.inductance_q),
            ("stator_resistance", self.stator_resistance),
            ("rotary_to_linear", self.rotary_to_linear),
            ("equivalent_inertia", self.equivalent_inertia),
            ("equivalent_viscosity", self.equivalent_viscosity),
            ("force_coefficient", self.force_coefficient),
        ];
        for (name, v) in positive {
            if !v.is_finite() {
                return Err(ParamError::NotFinite(name));
            }
            if v <= 0.0 {
                return Err(ParamError::NotPositive(name, v));
            }
        }
        if !self.equivalent_stiffness.is_finite() {
            return Err(ParamError::NotFinite("equivalent_stiffness"));
        }
        if self.equivalent_stiffness < 0.0 {
            return Err(ParamError::Negative(
                "equivalent_stiffness",
                self.equivalent_stiffness,
            ));
        }
        Ok(())
    }
}

/// The four-state vector `[x1, x2, x3, x4]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlantState {
    pub position: f64,
    pub velocity: f64,
    pub current_q: f64,
    pub current_d: f64,
}

impl PlantState {
    pub const fn new(position: f64, velocity: f64, current_q: f64, current_d: f64) -> Self {
        Self {
            position,
            velocity,
            current_q,
            current_d,
        }
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.position, self.velocity, self.current_q, self.current_d]
    }

    pub const fn from_array(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    /// Index of the first non-finite component (0-based), if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.to_array().iter().position(|v| !v.is_finite())
    }
}

/// Time function used for the additive disturbance channels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Disturbance {
    #[default]
    Zero,
    Constant(f64),
    /// Zero before `time`, `amplitude` from `time` on.
    Step { time: f64, amplitude: f64 },
    /// `amplitude · sin(2π·frequency·t + phase)`.
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl Disturbance {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Disturbance::Zero => 0.0,
            Disturbance::Constant(c) => c,
            Disturbance::Step { time, amplitude } => {
                if t >= time {
                    amplitude
                } else {
                    0.0
                }
            }
            Disturbance::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * math::sin(2.0 * core::f64::consts::PI * frequency * t + phase),
        }
    }

    /// Upper bound on `|d(t)|`.
    pub fn bound(&self) -> f64 {
        match *self {
            Disturbance::Zero => 0.0,
            Disturbance::Constant(c) => c.abs(),
            Disturbance::Step { amplitude, .. } => amplitude.abs(),
            Disturbance::Sine { amplitude, .. } => amplitude.abs(),
        }
    }
}

/// Load force over time.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceProfile {
    Constant(f64),
    /// `(time, force)` breakpoints; each force holds from its time until the
    /// next breakpoint. Zero before the first breakpoint.
    Steps(Vec<(f64, f64)>),
    /// `(time, force)` samples, linearly interpolated, held at both ends.
    Table(Vec<(f64, f64)>),
}

impl Default for ForceProfile {
    fn default() -> Self {
        ForceProfile::Constant(0.0)
    }
}

impl ForceProfile {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ForceProfile::Constant(f) => *f,
            ForceProfile::Steps(points) => points
                .iter()
                .take_while(|(time, _)| *time <= t)
                .last()
                .map_or(0.0, |(_, f)| *f),
            ForceProfile::Table(points) => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                if t <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let ((t0, f0), (t1, f1)) = (w[0], w[1]);
                    if t <= t1 {
                        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
                        return f0 + s * (f1 - f0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            ForceProfile::Constant(f) => f.abs(),
            ForceProfile::Steps(p) | ForceProfile::Table(p) => {
                p.iter().fold(0.0, |m, (_, f)| f64::max(m, f.abs()))
            }
        }
    }

    fn validate(&self) -> Result<(), LoadError> {
        match self {
            ForceProfile::Constant(f) if !f.is_finite() => Err(LoadError::NonFinite),
            ForceProfile::Constant(_) => Ok(()),
            ForceProfile::Steps(p) | ForceProfile::Table(p) => {
                if p.iter().any(|(t, f)| !t.is_finite() || !f.is_finite()) {
                    return Err(LoadError::NonFinite);
                }
                if p.windows(2).any(|w| w[1].0 < w[0].0) {
                    return Err(LoadError::UnorderedTimes);
                }
                Ok(())
            }
        }
    }
}

/// Load force `F_L(t)` plus additive disturbances `d1..d4`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadProfile {
    pub force: ForceProfile,
    pub disturbance: [Disturbance; 4],
}

/// A [`LoadProfile`] evaluated at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadSample {
    pub force: f64,
    pub disturbance: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadError {
    NonFinite,
    UnorderedTimes,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::NonFinite => f.write_str("load profile contains non-finite values"),
            LoadError::UnorderedTimes => f.write_str("load profile times must be non-decreasing"),
        }
    }
}

impl core::error::Error for LoadError {}

impl LoadProfile {
    pub fn none() -> Self {
        Self::default()
    }

    /// Zero load until `time`, then a constant `force`.
    pub fn step(time: f64, force: f64) -> Self {
        Self {
            force: ForceProfile::Steps(alloc::vec![(time, force)]),
            ..Self::default()
        }
    }

    pub fn at(&self, t: f64) -> LoadSample {
        LoadSample {
            force: self.force.at(t),
            disturbance: [
                self.disturbance[0].at(t),
                self.disturbance[1].at(t),
                self.disturbance[2].at(t),
                self.disturbance[3].at(t),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        self.force.validate()?;
        if self.disturbance.iter().any(|d| !d.bound().is_finite()) {
            return Err(LoadError::NonFinite);
        }
        Ok(())
    }
}

/// Admissible range `[lower, upper]` of one control channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLimits {
    pub lower: f64,
    pub upper: f64,
}

impl ChannelLimits {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    /// Rest commands must be admissible: `lower < 0 < upper`.
    pub fn is_valid(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite() && self.lower < 0.0 && 0.0 < self.upper
    }

    /// `max(|lower| + 1, |upper| + 1)`, the strict bound on `s2`.
    pub fn s2_bound(&self) -> f64 {
        f64::max(self.lower.abs() + 1.0, self.upper.abs() + 1.0)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Limits on the torque command (N·m) and the q/d voltage commands (V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationLimits {
    pub torque: ChannelLimits,
    pub voltage_q: ChannelLimits,
    pub voltage_d: ChannelLimits,
}

impl SaturationLimits {
    pub fn validate(&self) -> Result<(), &'static str> {
        for (name, ch) in [
            ("torque", self.torque),
            ("voltage_q", self.voltage_q),
            ("voltage_d", self.voltage_d),
        ] {
            if !ch.is_valid() {
                return Err(name);
            }
        }
        Ok(())
    }
}

/// Result of [`saturate`]: the clipped value together with the `s1`, `s2`
/// factors such that `value == s1 * u + s2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatOutcome {
    pub value: f64,
    pub s1: f64,
    pub s2: f64,
    pub clipped: bool,
}

/// Clip `u` into `limits` and return the affine decomposition of the result.
///
/// In band (boundaries included) `s1 = 1, s2 = 0`. Out of band
/// `s1 = 1/(|u|+1)` and `s2 = bound - u/(|u|+1)`.
pub fn saturate(u: f64, limits: &ChannelLimits) -> SatOutcome {
    let (value, bound) = if u > limits.upper {
        (limits.upper, limits.upper)
    } else if u < limits.lower {
        (limits.lower, limits.lower)
    } else {
        return SatOutcome {
            value: u,
            s1: 1.0,
            s2: 0.0,
            clipped: false,
        };
    };
    let s1 = 1.0 / (u.abs() + 1.0);
    SatOutcome {
        value,
        s1,
        s2: bound - u * s1,
        clipped: true,
    }
}

/// Electromagnetic torque `3/2 · P · i_q · (θ_PM + (L_d − L_q) · i_d)`.
pub fn torque_from_currents(i_q: f64, i_d: f64, params: &PlantParams) -> f64 {
    1.5 * params.pole_pairs as f64
        * (i_q * (params.flux_linkage + (params.inductance_d - params.inductance_q) * i_d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteTorque(pub f64);

impl fmt::Display for NonFiniteTorque {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "torque reference is not finite ({})", self.0)
    }
}

impl core::error::Error for NonFiniteTorque {}

/// q-axis current that produces `torque_ref` with `i_d = 0`.
pub fn reference_q_current(torque_ref: f64, params: &PlantParams) -> Result<f64, NonFiniteTorque> {
    if !torque_ref.is_finite() {
        return Err(NonFiniteTorque(torque_ref));
    }
    Ok(2.0 * torque_ref / (3.0 * params.pole_pairs as f64 * params.flux_linkage))
}

/// A derivative component came out non-finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteDerivative {
    /// 1-based subsystem index.
    pub subsystem: usize,
}

impl fmt::Display for NonFiniteDerivative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite derivative in subsystem {}", self.subsystem)
    }
}

impl core::error::Error for NonFiniteDerivative {}

/// Time derivative of the plant state for already-saturated voltages.
pub fn plant_derivatives(
    state: &PlantState,
    voltage_q: f64,
    voltage_d: f64,
    load: &LoadSample,
    params: &PlantParams,
) -> Result<PlantState, NonFiniteDerivative> {
    let PlantState {
        position: x1,
        velocity: x2,
        current_q: x3,
        current_d: x4,
    } = *state;
    let p = params.pole_pairs as f64;
    let c = params.rotary_to_linear;
    let (ld, lq, rs) = (params.inductance_d, params.inductance_q, params.stator_resistance);
    let d = load.disturbance;

    let torque = torque_from_currents(x3, x4, params);
    let dx1 = x2 + d[0];
    let dx2 = (torque
        - params.equivalent_viscosity * x2
        - params.equivalent_stiffness * x1
        - params.force_coefficient * load.force)
        / params.equivalent_inertia
        + d[1];
    let dx3 = (voltage_q - rs * x3 - p * c * ld * x2 * x4 - p * c * params.flux_linkage * x2) / lq
        + d[2];
    let dx4 = (voltage_d - rs * x4 + 2.0 * p * c * lq * x2 * x3) / ld + d[3];

    let out = PlantState::new(dx1, dx2, dx3, dx4);
    match out.first_non_finite() {
        Some(i) => Err(NonFiniteDerivative { subsystem: i + 1 }),
        None => Ok(out),
    }
}
