//! Tracking-performance summary of a trace.

use super::SimulationTrace;
use crate::controller::EventFlags;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    /// Convergence band as a fraction of the peak `|x_1d|`.
    pub convergence_band: f64,
    /// Error statistics ignore samples before this time (s).
    pub window_start: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            convergence_band: 0.02,
            window_start: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// m
    pub position_rms: f64,
    pub position_max: f64,
    /// m/s
    pub velocity_rms: f64,
    pub velocity_max: f64,
    /// RMS of the saturated torque command over the whole run (N·m).
    pub torque_rms: f64,
    /// First time after which `|x_e1|` stays inside the band; `None` if the
    /// last sample is still outside it.
    pub convergence_time: Option<f64>,
    /// Clamped samples plus one if the run ended on a barrier violation.
    pub violation_count: usize,
}

pub fn compute_metrics(trace: &SimulationTrace, config: &MetricsConfig) -> Metrics {
    let recs = &trace.records;
    let window = || recs.iter().filter(|r| r.time >= config.window_start);
    let abs_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, |m: f64, v| m.max(v.abs()));

    let peak_ref = abs_max(&mut recs.iter().map(|r| r.references[0]));
    let band = config.convergence_band * peak_ref;
    let convergence_time = match recs.iter().rposition(|r| r.tracking_errors[0].abs() > band) {
        None => recs.first().map(|r| r.time),
        Some(i) if i + 1 < recs.len() => Some(recs[i + 1].time),
        Some(_) => None,
    };

    let clamp_mask = (0..4).fold(0u16, |m, j| m | EventFlags::CLAMP_1 << j);
    let clamped = recs.iter().filter(|r| r.flags.0 & clamp_mask != 0).count();
    let aborted = matches!(trace.termination, super::Termination::BarrierViolation { .. });

    Metrics {
        position_rms: math::rms(window().map(|r| r.tracking_errors[0])),
        position_max: abs_max(&mut window().map(|r| r.tracking_errors[0])),
        velocity_rms: math::rms(window().map(|r| r.tracking_errors[1])),
        velocity_max: abs_max(&mut window().map(|r| r.tracking_errors[1])),
        torque_rms: math::rms(recs.iter().map(|r| r.torque.value)),
        convergence_time,
        violation_count: clamped + usize::from(aborted),
    }
}
