//! Simulation and gain-tuning core for a PMSM-driven electromechanical linear
//! actuator (EMLA).
//!
//! The crate is `no_std` (it needs `alloc` for traces, trajectories and
//! optimizer populations) and does no IO. File formats, the CLI and parallel
//! objective evaluation live in the `emla-ctrl` companion crate.
//!
//! Layout:
//!
//! - [`plant`]: dq-frame motor + load-side mechanics, and the saturation
//!   decomposition `Sat(u) = s1*u + s2`.
//! - [`trajectory`]: piecewise quintic (jerk-bounded) reference planning.
//! - [`controller`]: the dual barrier-Lyapunov adaptive cascade and a PID
//!   baseline.
//! - [`sim`]: fixed-step RK4 closed loop, traces, metrics and trace checks.
//! - [`optimizer`]: Jaya gain tuning.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod controller;
pub mod math;
pub mod optimizer;
pub mod plant;
pub mod sim;
pub mod trajectory;

pub use controller::{
    AdaptiveState, ControlOutput, ControllerGains, DrsBlf, PidGains, PidState, SafetyEnvelope,
    ViolationPolicy,
};
pub use plant::{LoadProfile, PlantParams, PlantState, SatOutcome, SaturationLimits};
pub use sim::{Metrics, Scenario, SimulationTrace};
pub use trajectory::{PiecewiseTrajectory, QuinticSegment, WaypointCondition};
