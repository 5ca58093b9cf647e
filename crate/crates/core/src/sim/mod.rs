//! Fixed-step closed-loop simulation.
//!
//! The controller runs at `control_rate`; between ticks its saturated voltage
//! commands are held while the plant is integrated with `plant_substeps` RK4
//! steps. One [`TraceRecord`] is stored per tick, including the final tick at
//! `t = duration`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{
    AdaptiveState, BarrierViolation, Command, ControlOutput, ControllerGains, DrsBlf, EventFlags,
    Pid, PidGains, PidState, Reference, ReferencePoint, SafetyEnvelope, ViolationPolicy,
};
use crate::plant::{plant_derivatives, LoadProfile, PlantParams, PlantState, SaturationLimits};
use crate::trajectory::PiecewiseTrajectory;

mod invariants;
mod metrics;
pub mod rk4;

pub use invariants::{check_trace_invariants, InvariantFailure, InvariantReport};
pub use metrics::{compute_metrics, Metrics, MetricsConfig};
pub use rk4::{rk4_step, StepError};

/// Which controller closes the loop, with its gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerSpec {
    DrsBlf {
        gains: ControllerGains,
        /// Initial value of every adaptive estimate.
        theta0: f64,
    },
    Pid(PidGains),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    DrsBlf,
    Pid,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::DrsBlf => "drsblf",
            ControllerKind::Pid => "pid",
        }
    }
}

impl ControllerSpec {
    pub fn kind(&self) -> ControllerKind {
        match self {
            ControllerSpec::DrsBlf { .. } => ControllerKind::DrsBlf,
            ControllerSpec::Pid(_) => ControllerKind::Pid,
        }
    }
}

/// A complete closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantParams,
    pub trajectory: PiecewiseTrajectory,
    pub load: LoadProfile,
    pub controller: ControllerSpec,
    pub envelope: SafetyEnvelope,
    pub limits: SaturationLimits,
    pub policy: ViolationPolicy,
    /// Simulated horizon (s).
    pub duration: f64,
    /// Controller rate (Hz).
    pub control_rate: f64,
    pub plant_substeps: u32,
    pub initial_state: PlantState,
    /// Half-width of uniform measurement noise per state; zero disables it.
    pub sensor_noise: [f64; 4],
    pub seed: u64,
}

/// One validation problem with a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl core::error::Error for ScenarioError {}

impl Scenario {
    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    /// Number of control periods; the trace holds one more record than this.
    pub fn ticks(&self) -> usize {
        libm::round(self.duration * self.control_rate) as usize
    }

    pub fn with_controller(&self, controller: ControllerSpec) -> Self {
        Self {
            controller,
            ..self.clone()
        }
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Result<(), Vec<ScenarioError>> {
        use alloc::format;
        let mut errs = Vec::new();
        let mut push = |field: &'static str, message: String| errs.push(ScenarioError { field, message });

        if let Err(e) = self.plant.validate() {
            push("plant", format!("{e}"));
        }
        if let Err(e) = self.load.validate() {
            push("load", format!("{e}"));
        }
        if let Err(e) = self.envelope.validate() {
            push("envelope", format!("{e}"));
        }
        if let Err(ch) = self.limits.validate() {
            push("limits", format!("{ch}: need lower < 0 < upper"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            push("duration", format!("must be > 0 (got {})", self.duration));
        }
        if !(self.control_rate.is_finite() && self.control_rate > 0.0) {
            push("control_rate", format!("must be > 0 (got {})", self.control_rate));
        }
        if self.plant_substeps == 0 {
            push("plant_substeps", "must be >= 1".into());
        }
        if self.initial_state.first_non_finite().is_some() {
            push("initial_state", "must be finite".into());
        }
        if self.sensor_noise.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            push("sensor_noise", "must be finite and >= 0".into());
        }
        match &self.controller {
            ControllerSpec::DrsBlf { gains, theta0 } => {
                if let Err(name) = gains.validate() {
                    push("gains.drsblf", format!("{name} must be > 0"));
                }
                if !(theta0.is_finite() && *theta0 > 0.0) {
                    push("theta0", format!("must be > 0 (got {theta0})"));
                }
            }
            ControllerSpec::Pid(g) => {
                if let Err(name) = g.validate() {
                    push("gains.pid", format!("{name} must be >= 0"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Position/velocity references at every control tick.
    pub fn reference_samples(&self) -> Vec<ReferencePoint> {
        let dt = self.dt();
        (0..=self.ticks())
            .filter_map(|k| {
                let t = k as f64 * dt;
                self.trajectory.eval(t).ok().map(|s| ReferencePoint {
                    time: t,
                    position: s.position,
                    velocity: s.velocity,
                })
            })
            .collect()
    }
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub state: PlantState,
    /// `x_1d .. x_4d`.
    pub references: [f64; 4],
    pub tracking_errors: [f64; 4],
    pub errors: [f64; 4],
    pub virtual_velocity: f64,
    pub torque: Command,
    pub voltage_q: Command,
    pub voltage_d: Command,
    /// Adaptive estimates after this tick's update (zero for PID).
    pub theta: [f64; 4],
    pub margins: [f64; 4],
    pub load_force: f64,
    pub flags: EventFlags,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    BarrierViolation {
        time: f64,
        violation: BarrierViolation,
    },
    NumericFailure {
        time: f64,
        /// 1-based subsystem of the first non-finite value.
        subsystem: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    pub controller: ControllerKind,
    /// Records a completed run would contain.
    pub planned_records: usize,
    pub dt: f64,
}

impl SimulationTrace {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Share of the planned horizon that was not simulated.
    pub fn remaining_fraction(&self) -> f64 {
        if self.planned_records == 0 {
            return 0.0;
        }
        (self.planned_records - self.records.len().min(self.planned_records)) as f64
            / self.planned_records as f64
    }
}

enum LoopState {
    DrsBlf(DrsBlf, AdaptiveState),
    Pid(Pid, PidState),
}

impl LoopState {
    fn new(s: &Scenario) -> Self {
        let torque_constant = s.plant.torque_constant();
        match s.controller {
            ControllerSpec::DrsBlf { gains, theta0 } => LoopState::DrsBlf(
                DrsBlf {
                    gains,
                    envelope: s.envelope,
                    limits: s.limits,
                    torque_constant,
                    policy: s.policy,
                },
                AdaptiveState::uniform(theta0),
            ),
            ControllerSpec::Pid(gains) => LoopState::Pid(
                Pid {
                    gains,
                    limits: s.limits,
                    torque_constant,
                },
                PidState::default(),
            ),
        }
    }

    fn step(
        &mut self,
        meas: &PlantState,
        reference: Reference,
        dt: f64,
    ) -> Result<(ControlOutput, [f64; 4]), BarrierViolation> {
        match self {
            LoopState::DrsBlf(c, a) => {
                let (out, next) = c.step(meas, reference, a, dt)?;
                *a = next;
                Ok((out, next.theta))
            }
            LoopState::Pid(c, st) => {
                let (out, next) = c.step(meas, reference, st, dt);
                *st = next;
                Ok((out, [0.0; 4]))
            }
        }
    }
}

/// Run `scenario` to completion or until the first violation / numeric
/// failure. Invalid scenarios are rejected up front with every problem found.
pub fn run(scenario: &Scenario) -> Result<SimulationTrace, Vec<ScenarioError>> {
    scenario.validate()?;
    let dt = scenario.dt();
    let ticks = scenario.ticks();
    let substeps = scenario.plant_substeps;
    let h = dt / substeps as f64;
    let noisy = scenario.sensor_noise.iter().any(|n| *n > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut ctrl = LoopState::new(scenario);

    let mut records = Vec::with_capacity(ticks + 1);
    let mut state = scenario.initial_state;
    let mut termination = Termination::Completed;

    for k in 0..=ticks {
        let t = k as f64 * dt;
        let sample = scenario
            .trajectory
            .eval(t)
            .expect("validated trajectory is non-empty");
        let reference = Reference {
            position: sample.position,
            velocity: sample.velocity,
        };

        let mut meas = state;
        if noisy {
            let mut x = meas.to_array();
            for (xi, n) in x.iter_mut().zip(scenario.sensor_noise) {
                *xi += n * (2.0 * rng.random::<f64>() - 1.0);
            }
            meas = PlantState::from_array(x);
        }

        let (mut out, theta) = match ctrl.step(&meas, reference, dt) {
            Ok(v) => v,
            Err(violation) => {
                termination = Termination::BarrierViolation { time: t, violation };
                break;
            }
        };
        if !out.is_finite() {
            termination = Termination::NumericFailure { time: t, subsystem: 0 };
            break;
        }
        if sample.clamped {
            out.flags.set(EventFlags::REFERENCE_HELD);
        }
        let load_now = scenario.load.at(t);
        records.push(TraceRecord {
            time: t,
            state,
            references: out.references,
            tracking_errors: out.tracking_errors,
            errors: out.errors,
            virtual_velocity: out.virtual_velocity,
            torque: out.torque,
            voltage_q: out.voltage_q,
            voltage_d: out.voltage_d,
            theta,
            margins: out.margins,
            load_force: load_now.force,
            flags: out.flags,
        });
        if k == ticks {
            break;
        }

        let (vq, vd) = (out.voltage_q.value, out.voltage_d.value);
        let mut x = state.to_array();
        let mut failed = None;
        for s in 0..substeps {
            let ts = t + s as f64 * h;
            let step = rk4_step(ts, &x, h, |tt, y| {
                let load = scenario.load.at(tt);
                plant_derivatives(&PlantState::from_array(*y), vq, vd, &load, &scenario.plant)
                    .map(PlantState::to_array)
            });
            match step {
                Ok(next) => x = next,
                Err(StepError::Derivative(e)) => {
                    failed = Some(e.subsystem);
                    break;
                }
                Err(StepError::NonFinite { component }) => {
                    failed = Some(component + 1);
                    break;
                }
            }
        }
        if let Some(subsystem) = failed {
            termination = Termination::NumericFailure { time: t + dt, subsystem };
            break;
        }
        state = PlantState::from_array(x);
    }

    Ok(SimulationTrace {
        records,
        termination,
        controller: scenario.controller.kind(),
        planned_records: ticks + 1,
        dt,
    })
}
