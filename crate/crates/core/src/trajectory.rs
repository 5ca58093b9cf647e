//! Piecewise quintic reference trajectories.
//!
//! Each segment is `p(τ) = Σ γ_k τ^k`, `k = 0..=5`, in local time
//! `τ = t - t_start`. Matching position, velocity and acceleration at both
//! ends of every segment makes the chained profile C² with a jerk that is a
//! quadratic (hence bounded) on each segment.

use alloc::vec::Vec;
use core::fmt;

/// Position/velocity/acceleration pinned at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointCondition {
    pub time: f64,
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl WaypointCondition {
    pub const fn new(time: f64, position: f64, velocity: f64, acceleration: f64) -> Self {
        Self {
            time,
            position,
            velocity,
            acceleration,
        }
    }

    /// A waypoint with zero velocity and acceleration.
    pub const fn rest(time: f64, position: f64) -> Self {
        Self::new(time, position, 0.0, 0.0)
    }

    fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.position.is_finite()
            && self.velocity.is_finite()
            && self.acceleration.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryError {
    /// End time not after start time.
    DegenerateInterval { start: f64, end: f64 },
    Singular,
    NonFinite { index: usize },
    TooFewWaypoints(usize),
    /// `index` is the waypoint whose time does not exceed its predecessor's.
    UnorderedTimes { index: usize },
    Empty,
}

impl fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryError::DegenerateInterval { start, end } => {
                write!(f, "segment end time {end} is not after start time {start}")
            }
            TrajectoryError::Singular => f.write_str("boundary-condition system is singular"),
            TrajectoryError::NonFinite { index } => {
                write!(f, "waypoint {index} has a non-finite value")
            }
            TrajectoryError::TooFewWaypoints(n) => {
                write!(f, "need at least 2 waypoints, got {n}")
            }
            TrajectoryError::UnorderedTimes { index } => {
                write!(f, "waypoint {index} time is not strictly after the previous one")
            }
            TrajectoryError::Empty => f.write_str("trajectory has no segments"),
        }
    }
}

impl core::error::Error for TrajectoryError {}

/// Reference sample: position, velocity, acceleration and jerk.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectorySample {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
    /// `t` was outside the trajectory and the endpoint was held.
    pub clamped: bool,
}

/// One quintic piece valid on `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSegment {
    /// `γ0..γ5` in local time `τ = t - t_start`.
    pub coefficients: [f64; 6],
    pub t_start: f64,
    pub t_end: f64,
}

/// Solve `a x = b` for a 6×6 system by Gaussian elimination with partial
/// pivoting.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..6 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..6).rev() {
        let tail: f64 = (row + 1..6).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Boundary-condition rows `[p, p', p'']` of a quintic at local time `tau`.
fn condition_rows(tau: f64) -> [[f64; 6]; 3] {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let t5 = t4 * tau;
    [
        [1.0, tau, t2, t3, t4, t5],
        [0.0, 1.0, 2.0 * tau, 3.0 * t2, 4.0 * t3, 5.0 * t4],
        [0.0, 0.0, 2.0, 6.0 * tau, 12.0 * t2, 20.0 * t3],
    ]
}

impl QuinticSegment {
    /// Fit the quintic matching `start` and `end` position, velocity and
    /// acceleration.
    pub fn solve(
        start: &WaypointCondition,
        end: &WaypointCondition,
    ) -> Result<Self, TrajectoryError> {
        if !start.is_finite() {
            return Err(TrajectoryError::NonFinite { index: 0 });
        }
        if !end.is_finite() {
            return Err(TrajectoryError::NonFinite { index: 1 });
        }
        if end.time <= start.time {
            return Err(TrajectoryError::DegenerateInterval {
                start: start.time,
                end: end.time,
            });
        }
        let h = end.time - start.time;
        let r0 = condition_rows(0.0);
        let r1 = condition_rows(h);
        let a = [r0[0], r0[1], r0[2], r1[0], r1[1], r1[2]];
        let b = [
            start.position,
            start.velocity,
            start.acceleration,
            end.position,
            end.velocity,
            end.acceleration,
        ];
        let coefficients = solve6(a, b).ok_or(TrajectoryError::Singular)?;
        Ok(Self {
            coefficients,
            t_start: start.time,
            t_end: end.time,
        })
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Position, velocity, acceleration and jerk at absolute time `t`
    /// (no range check).
    pub fn eval(&self, t: f64) -> [f64; 4] {
        let tau = t - self.t_start;
        let [c0, c1, c2, c3, c4, c5] = self.coefficients;
        let pos = c0 + tau * (c1 + tau * (c2 + tau * (c3 + tau * (c4 + tau * c5))));
        let vel = c1 + tau * (2.0 * c2 + tau * (3.0 * c3 + tau * (4.0 * c4 + tau * 5.0 * c5)));
        let acc = 2.0 * c2 + tau * (6.0 * c3 + tau * (12.0 * c4 + tau * 20.0 * c5));
        let jerk = 6.0 * c3 + tau * (24.0 * c4 + tau * 60.0 * c5);
        [pos, vel, acc, jerk]
    }

    /// Largest `|jerk|` over the segment.
    ///
    /// Jerk is `6γ3 + 24γ4 τ + 60γ5 τ²`; the extremum is at an endpoint or at
    /// the vertex `τ* = -24γ4 / (120γ5)` when it lies inside the interval.
    pub fn max_abs_jerk(&self) -> f64 {
        let [_, _, _, c3, c4, c5] = self.coefficients;
        let jerk = |tau: f64| 6.0 * c3 + tau * (24.0 * c4 + tau * 60.0 * c5);
        let h = self.duration();
        let mut m = jerk(0.0).abs().max(jerk(h).abs());
        if c5 != 0.0 {
            let vertex = -24.0 * c4 / (120.0 * c5);
            if vertex > 0.0 && vertex < h {
                m = m.max(jerk(vertex).abs());
            }
        }
        m
    }
}

/// Contiguous chain of quintic segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory {
    segments: Vec<QuinticSegment>,
}

impl PiecewiseTrajectory {
    /// One segment per adjacent waypoint pair. Intermediate velocities and
    /// accelerations are taken as given.
    pub fn build(waypoints: &[WaypointCondition]) -> Result<Self, TrajectoryError> {
        if waypoints.len() < 2 {
            return Err(TrajectoryError::TooFewWaypoints(waypoints.len()));
        }
        if let Some(index) = waypoints.iter().position(|w| !w.is_finite()) {
            return Err(TrajectoryError::NonFinite { index });
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[1].time <= w[0].time) {
            return Err(TrajectoryError::UnorderedTimes { index: i + 1 });
        }
        let segments = waypoints
            .windows(2)
            .map(|w| QuinticSegment::solve(&w[0], &w[1]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[QuinticSegment] {
        &self.segments
    }

    pub fn start_time(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.t_start)
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Sample at `t`. Outside `[start, end]` the endpoint position is held
    /// with zero derivatives and the sample is flagged as clamped.
    pub fn eval(&self, t: f64) -> Result<TrajectorySample, TrajectoryError> {
        let first = self.segments.first().ok_or(TrajectoryError::Empty)?;
        let last = self.segments[self.segments.len() - 1];
        let hold = |position: f64| TrajectorySample {
            position,
            clamped: true,
            ..Default::default()
        };
        if t < first.t_start {
            return Ok(hold(first.eval(first.t_start)[0]));
        }
        if t > last.t_end {
            return Ok(hold(last.eval(last.t_end)[0]));
        }
        // first segment whose end is >= t
        let idx = self.segments.partition_point(|s| s.t_end < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        let [position, velocity, acceleration, jerk] = seg.eval(t);
        Ok(TrajectorySample {
            position,
            velocity,
            acceleration,
            jerk,
            clamped: false,
        })
    }

    pub fn max_abs_jerk(&self) -> f64 {
        self.segments
            .iter()
            .map(QuinticSegment::max_abs_jerk)
            .fold(0.0, f64::max)
    }

    /// Largest `|position|`, scanned at 256 points per segment.
    pub fn max_abs_position(&self) -> f64 {
        self.scan_max(0)
    }

    /// Largest `|velocity|`, scanned at 256 points per segment.
    pub fn max_abs_velocity(&self) -> f64 {
        self.scan_max(1)
    }

    fn scan_max(&self, derivative: usize) -> f64 {
        const N: usize = 256;
        self.segments
            .iter()
            .flat_map(|seg| {
                (0..=N).map(move |k| {
                    let t = seg.t_start + seg.duration() * k as f64 / N as f64;
                    seg.eval(t)[derivative].abs()
                })
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form rest-frame quintic: with `γ0..γ2` fixed by the start
    /// conditions, the remaining three follow from the standard 3×3 inverse.
    fn closed_form(start: &WaypointCondition, end: &WaypointCondition) -> [f64; 6] {
        let h = end.time - start.time;
        let (p0, v0, a0) = (start.position, start.velocity, start.acceleration);
        let (p1, v1, a1) = (end.position, end.velocity, end.acceleration);
        let h2 = h * h;
        let h3 = h2 * h;
        let h4 = h3 * h;
        let h5 = h4 * h;
        [
            p0,
            v0,
            a0 / 2.0,
            (20.0 * (p1 - p0) - (8.0 * v1 + 12.0 * v0) * h - (3.0 * a0 - a1) * h2) / (2.0 * h3),
            (30.0 * (p0 - p1) + (14.0 * v1 + 16.0 * v0) * h + (3.0 * a0 - 2.0 * a1) * h2)
                / (2.0 * h4),
            (12.0 * (p1 - p0) - 6.0 * (v1 + v0) * h - (a0 - a1) * h2) / (2.0 * h5),
        ]
    }

    fn residuals(seg: &QuinticSegment, a: &WaypointCondition, b: &WaypointCondition) -> f64 {
        let s = seg.eval(seg.t_start);
        let e = seg.eval(seg.t_end);
        [
            s[0] - a.position,
            s[1] - a.velocity,
            s[2] - a.acceleration,
            e[0] - b.position,
            e[1] - b.velocity,
            e[2] - b.acceleration,
        ]
        .iter()
        .fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    #[test]
    fn rest_to_rest_unit_segment() {
        let a = WaypointCondition::rest(0.0, 0.0);
        let b = WaypointCondition::rest(1.0, 1.0);
        let seg = QuinticSegment::solve(&a, &b).unwrap();
        let expect = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (g, e) in seg.coefficients.iter().zip(expect) {
            assert!((g - e).abs() < 1e-9, "{:?}", seg.coefficients);
        }
        assert_eq!(closed_form(&a, &b), expect);
        assert!(residuals(&seg, &a, &b) < 1e-9);

        let traj = PiecewiseTrajectory::build(&[a, b]).unwrap();
        let mid = traj.eval(0.5).unwrap();
        assert!((mid.position - 0.5).abs() < 1e-12);
        assert!((mid.velocity - 1.875).abs() < 1e-12);
    }

    #[test]
    fn stationary_segment() {
        let a = WaypointCondition::rest(2.0, 0.3);
        let b = WaypointCondition::rest(5.0, 0.3);
        let seg = QuinticSegment::solve(&a, &b).unwrap();
        assert!((seg.coefficients[0] - 0.3).abs() < 1e-12);
        assert!(seg.coefficients[1..].iter().all(|c| c.abs() < 1e-12));
        assert!(seg.max_abs_jerk() < 1e-12);
    }

    #[test]
    fn constant_velocity_midpoint() {
        let a = WaypointCondition::new(0.0, 0.0, 1.0, 0.0);
        let b = WaypointCondition::new(2.0, 2.0, 1.0, 0.0);
        let seg = QuinticSegment::solve(&a, &b).unwrap();
        assert!((seg.eval(1.0)[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_interval_rejected() {
        let a = WaypointCondition::rest(1.0, 0.0);
        assert!(matches!(
            QuinticSegment::solve(&a, &a),
            Err(TrajectoryError::DegenerateInterval { .. })
        ));
        let b = WaypointCondition::rest(0.5, 0.0);
        assert!(QuinticSegment::solve(&a, &b).is_err());
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            PiecewiseTrajectory::build(&[WaypointCondition::rest(0.0, 0.0)]),
            Err(TrajectoryError::TooFewWaypoints(1))
        );
        let w = [
            WaypointCondition::rest(0.0, 0.0),
            WaypointCondition::rest(2.0, 1.0),
            WaypointCondition::rest(1.0, 0.0),
        ];
        assert_eq!(
            PiecewiseTrajectory::build(&w),
            Err(TrajectoryError::UnorderedTimes { index: 2 })
        );
        let empty = PiecewiseTrajectory {
            segments: Vec::new(),
        };
        assert_eq!(empty.eval(0.0), Err(TrajectoryError::Empty));
    }

    #[test]
    fn three_waypoints_are_c2() {
        let w = [
            WaypointCondition::rest(0.0, 0.0),
            WaypointCondition::new(1.5, 0.05, 0.04, -0.01),
            WaypointCondition::rest(3.0, 0.1),
        ];
        let traj = PiecewiseTrajectory::build(&w).unwrap();
        assert_eq!(traj.segments().len(), 2);
        let (s0, s1) = (traj.segments()[0], traj.segments()[1]);
        let l = s0.eval(s0.t_end);
        let r = s1.eval(s1.t_start);
        for k in 0..3 {
            assert!((l[k] - r[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_trajectory_has_zero_jerk() {
        let w = [
            WaypointCondition::rest(0.0, 0.2),
            WaypointCondition::rest(4.0, 0.2),
        ];
        let traj = PiecewiseTrajectory::build(&w).unwrap();
        for k in 0..=40 {
            let s = traj.eval(k as f64 * 0.1).unwrap();
            assert!(s.jerk.abs() < 1e-12);
            assert!((s.position - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_hold_backward_jerk_bound() {
        let w = [
            WaypointCondition::rest(0.0, 0.0),
            WaypointCondition::rest(2.0, 0.1),
            WaypointCondition::rest(4.0, 0.1),
            WaypointCondition::rest(6.0, 0.0),
        ];
        let traj = PiecewiseTrajectory::build(&w).unwrap();
        // rest-to-rest jerk is 60·D/T³ at the ends (|6γ3|), peak at both ends
        let analytic = 60.0 * 0.1 / 8.0;
        assert!((traj.max_abs_jerk() - analytic).abs() < 1e-9);
        let sampled = (0..=6000)
            .map(|k| traj.eval(k as f64 * 1e-3).unwrap().jerk.abs())
            .fold(0.0, f64::max);
        assert!(sampled <= traj.max_abs_jerk() + 1e-9);
        assert!((sampled - analytic).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_holds_endpoint() {
        let w = [
            WaypointCondition::new(1.0, 0.0, 0.0, 0.0),
            WaypointCondition::new(2.0, 1.0, 0.5, 0.0),
        ];
        let traj = PiecewiseTrajectory::build(&w).unwrap();
        let after = traj.eval(10.0).unwrap();
        assert!(after.clamped);
        assert!((after.position - 1.0).abs() < 1e-12);
        assert_eq!((after.velocity, after.acceleration, after.jerk), (0.0, 0.0, 0.0));
        let before = traj.eval(0.0).unwrap();
        assert!(before.clamped);
        assert!(before.position.abs() < 1e-12);
        let at_start = traj.eval(1.0).unwrap();
        assert!(!at_start.clamped);
        assert!(at_start.position.abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cond() -> impl Strategy<Value = (f64, f64, f64)> {
            (-1.0f64..1.0, -2.0f64..2.0, -5.0f64..5.0)
        }

        proptest! {
            #[test]
            fn matches_closed_form(t0 in -10.0f64..200.0, h in 0.05f64..10.0, a in cond(), b in cond()) {
                let s = WaypointCondition::new(t0, a.0, a.1, a.2);
                let e = WaypointCondition::new(t0 + h, b.0, b.1, b.2);
                let seg = QuinticSegment::solve(&s, &e).unwrap();
                let cf = closed_form(&s, &e);
                for k in 0..6 {
                    prop_assert!((seg.coefficients[k] - cf[k]).abs() <= 1e-9 * cf[k].abs().max(1.0));
                }
                prop_assert!(residuals(&seg, &s, &e) < 1e-9);
            }

            #[test]
            fn time_shift_invariance(shift in -50.0f64..200.0, h in 0.1f64..5.0, a in cond(), b in cond(), frac in 0.0f64..1.0) {
                let base = QuinticSegment::solve(
                    &WaypointCondition::new(0.0, a.0, a.1, a.2),
                    &WaypointCondition::new(h, b.0, b.1, b.2)).unwrap();
                let shifted = QuinticSegment::solve(
                    &WaypointCondition::new(shift, a.0, a.1, a.2),
                    &WaypointCondition::new(shift + h, b.0, b.1, b.2)).unwrap();
                let x = base.eval(frac * h);
                let y = shifted.eval(shift + frac * h);
                for k in 0..4 {
                    prop_assert!((x[k] - y[k]).abs() <= 1e-9 * x[k].abs().max(1.0));
                }
            }

            #[test]
            fn jerk_max_matches_dense_scan(h in 0.1f64..5.0, a in cond(), b in cond()) {
                let seg = QuinticSegment::solve(
                    &WaypointCondition::new(0.0, a.0, a.1, a.2),
                    &WaypointCondition::new(h, b.0, b.1, b.2)).unwrap();
                let n = 20000;
                let scan = (0..=n).map(|k| seg.eval(h * k as f64 / n as f64)[3].abs()).fold(0.0, f64::max);
                prop_assert!(scan <= seg.max_abs_jerk() * (1.0 + 1e-12) + 1e-12);
                prop_assert!(seg.max_abs_jerk() - scan <= 1e-3 * seg.max_abs_jerk().max(1.0));
            }
        }
    }
}
