//! CSV and text writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back with `str::parse::<f64>` gives the exact simulated values.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use emla_core::controller::{ControllerGains, PidGains};
use emla_core::optimizer::GenerationStats;
use emla_core::sim::{ControllerKind, Metrics, SimulationTrace};
use emla_core::trajectory::PiecewiseTrajectory;

pub const TRACE_HEADER: [&str; 26] = [
    "t", "x1", "x2", "x3", "x4", "x1d", "x2d", "x3d", "x4d", "e1", "e2", "e3", "e4", "u1",
    "u2_raw", "u2", "u3_raw", "u3", "u4_raw", "u4", "th1", "th2", "th3", "th4", "FL", "flags",
];

/// Shortest round-trip text; scientific notation for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e7).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn create(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_trace<W: Write>(trace: &SimulationTrace, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        let x = r.state.to_array();
        let mut row: Vec<String> = Vec::with_capacity(TRACE_HEADER.len());
        row.push(num(r.time));
        row.extend(x.iter().map(|v| num(*v)));
        row.extend(r.references.iter().map(|v| num(*v)));
        row.extend(r.errors.iter().map(|v| num(*v)));
        for v in [
            r.virtual_velocity,
            r.torque.raw,
            r.torque.value,
            r.voltage_q.raw,
            r.voltage_q.value,
            r.voltage_d.raw,
            r.voltage_d.value,
        ] {
            row.push(num(v));
        }
        row.extend(r.theta.iter().map(|v| num(*v)));
        row.push(num(r.load_force));
        row.push(r.flags.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &SimulationTrace, path: &Path) -> anyhow::Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    write_trace(trace, std::io::BufWriter::new(f))
}

/// `t,pos,vel,acc,jerk` sampled every `dt` from start to end (inclusive).
pub fn write_plan(traj: &PiecewiseTrajectory, dt: f64, path: &Path) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_record(["t", "pos", "vel", "acc", "jerk"])?;
    let n = (traj.duration() / dt).round() as usize;
    for k in 0..=n {
        let t = (traj.start_time() + k as f64 * dt).min(traj.end_time());
        let s = traj.eval(t)?;
        w.write_record([t, s.position, s.velocity, s.acceleration, s.jerk].map(num))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence(history: &[GenerationStats], path: &Path) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_record(["generation", "best_fx", "mean_fx", "worst_fx"])?;
    for h in history {
        w.write_record([
            h.generation.to_string(),
            num(h.best_fx),
            num(h.mean_fx),
            num(h.worst_fx),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `key = value` line per metric.
pub fn metrics_block(m: &Metrics) -> String {
    let conv = m
        .convergence_time
        .map_or_else(|| "none".to_string(), num);
    format!(
        "position_rms = {}\nposition_max = {}\nvelocity_rms = {}\nvelocity_max = {}\n\
         torque_rms = {}\nconvergence_time = {}\nviolation_count = {}\n",
        num(m.position_rms),
        num(m.position_max),
        num(m.velocity_rms),
        num(m.velocity_max),
        num(m.torque_rms),
        conv,
        m.violation_count
    )
}

pub fn metrics_table(m: &Metrics) -> String {
    let conv = m
        .convergence_time
        .map_or_else(|| "not reached".to_string(), |t| format!("{t:.3}"));
    let rows = [
        ("position error RMS (m)", format!("{:.4e}", m.position_rms)),
        ("position error max (m)", format!("{:.4e}", m.position_max)),
        ("velocity error RMS (m/s)", format!("{:.4e}", m.velocity_rms)),
        ("velocity error max (m/s)", format!("{:.4e}", m.velocity_max)),
        ("torque RMS (N.m)", format!("{:.4}", m.torque_rms)),
        ("convergence time (s)", conv),
        ("barrier events", m.violation_count.to_string()),
    ];
    rows.iter()
        .map(|(k, v)| format!("{k:<26}{v:>14}\n"))
        .collect()
}

/// `[gains.*]` section for `kind`.
pub fn gains_section(kind: ControllerKind, gains: &[f64]) -> String {
    match kind {
        ControllerKind::DrsBlf => {
            let g = ControllerGains::from_slice(gains).expect("16 gains");
            let fmt4 = |v: [f64; 4]| v.map(num).join(" ");
            format!(
                "[gains.drsblf]\nbeta = {}\nkappa = {}\nzeta = {}\nepsilon = {}\n",
                fmt4(g.beta),
                fmt4(g.kappa),
                fmt4(g.zeta),
                fmt4(g.epsilon)
            )
        }
        ControllerKind::Pid => {
            let mut s = String::from("[gains.pid]\n");
            for (name, v) in PidGains::NAMES.iter().zip(gains) {
                s.push_str(&format!("{name} = {}\n", num(*v)));
            }
            s
        }
    }
}

pub const TABLE_ROWS: [&str; 4] = [
    "Position error (m)",
    "Velocity error (m/s)",
    "Torque effort (N.m)",
    "Convergence speed (s)",
];

/// Side-by-side criteria table: one column per controller plus the relative
/// improvement of the first over the second.
pub fn comparison_table(a: (&str, &Metrics), b: (&str, &Metrics)) -> String {
    let vals = |m: &Metrics| {
        [
            m.position_rms,
            m.velocity_rms,
            m.torque_rms,
            m.convergence_time.unwrap_or(f64::NAN),
        ]
    };
    let (va, vb) = (vals(a.1), vals(b.1));
    let mut s = format!(
        "{:<24}{:>14}{:>14}{:>14}\n",
        "Convergence Criteria", a.0, b.0, "Improvement"
    );
    for (i, label) in TABLE_ROWS.iter().enumerate() {
        let improvement = if vb[i].is_finite() && vb[i] != 0.0 && va[i].is_finite() {
            format!("{:.1}%", 100.0 * (vb[i] - va[i]) / vb[i])
        } else {
            "-".to_string()
        };
        s.push_str(&format!(
            "{:<24}{:>14}{:>14}{:>14}\n",
            label,
            fmt_cell(va[i]),
            fmt_cell(vb[i]),
            improvement
        ));
    }
    s
}

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "n/a".to_string()
    } else if v != 0.0 && v.abs() < 1e-2 {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(p: f64) -> Metrics {
        Metrics {
            position_rms: p,
            position_max: 2.0 * p,
            velocity_rms: 0.0072,
            velocity_max: 0.02,
            torque_rms: 14.2,
            convergence_time: Some(1.98),
            violation_count: 0,
        }
    }

    #[test]
    fn table_layout() {
        let t = comparison_table(("DRS-BLF", &metrics(0.0035)), ("PID", &metrics(0.0047)));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("Convergence Criteria"));
        for (line, label) in lines[1..].iter().zip(TABLE_ROWS) {
            assert!(line.starts_with(label));
        }
        assert!(lines[1].contains("25.5%"));
        assert!(lines[2].contains("0.0%"));
    }

    #[test]
    fn identical_columns() {
        let m = metrics(0.001);
        let t = comparison_table(("A", &m), ("B", &m));
        for line in t.lines().skip(1) {
            let cells: Vec<&str> = line.split_whitespace().rev().take(3).collect();
            assert_eq!(cells[1], cells[2], "{line}");
        }
    }

    #[test]
    fn gains_section_round_trips() {
        let g = ControllerGains::published().to_array();
        let text = gains_section(ControllerKind::DrsBlf, &g);
        let file = format!("{}\n{}", crate::config::tests::MINIMAL, text);
        let parsed = crate::config::parse(&file).unwrap();
        assert_eq!(parsed.drsblf.to_array(), g);

        let p = [1.5, 0.25, 1e-3, 700.0, 12.0, 20.0, 1000.0, 18.0, 900.0];
        let file = format!("{}\n{}", crate::config::tests::MINIMAL, gains_section(ControllerKind::Pid, &p));
        assert_eq!(crate::config::parse(&file).unwrap().pid.to_array(), p);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, -8.326672684688674e-17, 1e-300, 123456789.5, 2.5e-4, f64::MAX] {
            let back: f64 = num(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(num(-8.326672684688674e-17), "-8.326672684688674e-17");
        assert_eq!(num(0.001), "0.001");
    }

    #[test]
    fn metrics_block_lines() {
        let b = metrics_block(&metrics(0.1));
        assert!(b.contains("position_rms = 0.1\n"));
        assert!(b.contains("convergence_time = 1.98\n"));
        let none = Metrics {
            convergence_time: None,
            ..metrics(0.1)
        };
        assert!(metrics_block(&none).contains("convergence_time = none"));
    }
}
