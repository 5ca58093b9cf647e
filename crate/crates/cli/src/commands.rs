//! Subcommand bodies. Each returns the process exit status; fatal input
//! problems come back as errors and map to [`Exit::Input`].

use std::path::{Path, PathBuf};

use anyhow::Context;
use emla_core::controller::envelope_check;
use emla_core::optimizer::{self, JayaResult};
use emla_core::sim::{self, compute_metrics, ControllerKind, Metrics, SimulationTrace, Termination};
use emla_core::trajectory::PiecewiseTrajectory;
use rayon::prelude::*;

use crate::config::{parse_waypoints, ScenarioFile};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Input = 2,
    Violation = 3,
    Numeric = 4,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Common {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Common {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn prepare(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load(path: &Path, common: &Common) -> anyhow::Result<ScenarioFile> {
    let mut file = ScenarioFile::load(path)?;
    if let Some(seed) = common.seed {
        file.scenario.seed = seed;
        file.jaya.seed = seed;
    }
    Ok(file)
}

fn exit_for(trace: &SimulationTrace) -> Exit {
    match trace.termination {
        Termination::Completed => Exit::Success,
        Termination::BarrierViolation { .. } => Exit::Violation,
        Termination::NumericFailure { .. } => Exit::Numeric,
    }
}

fn termination_report(trace: &SimulationTrace) -> Option<String> {
    match trace.termination {
        Termination::Completed => None,
        Termination::BarrierViolation { time, violation } => Some(format!(
            "barrier violation at t = {time}: {violation}; run stopped ({:.1}% of horizon remaining)",
            100.0 * trace.remaining_fraction()
        )),
        Termination::NumericFailure { time, subsystem } => Some(format!(
            "numeric failure at t = {time} in subsystem {subsystem}"
        )),
    }
}

pub fn plan(waypoints: &Path, rate: f64, common: &Common) -> anyhow::Result<Exit> {
    let text = std::fs::read_to_string(waypoints)
        .with_context(|| format!("cannot read {}", waypoints.display()))?;
    let w = parse_waypoints(&text)?;
    let traj = PiecewiseTrajectory::build(&w)?;
    common.prepare()?;
    let path = common.path("plan.csv");
    output::write_plan(&traj, 1.0 / rate, &path)?;
    common.say(format!(
        "{} segment(s) over [{}, {}] s",
        traj.segments().len(),
        traj.start_time(),
        traj.end_time()
    ));
    for (i, s) in traj.segments().iter().enumerate() {
        common.say(format!(
            "  segment {}: [{}, {}] s, max |jerk| = {:.6e} m/s^3",
            i + 1,
            s.t_start,
            s.t_end,
            s.max_abs_jerk()
        ));
    }
    common.say(format!("max |jerk| = {:.6e} m/s^3", traj.max_abs_jerk()));
    common.say(format!("wrote {}", path.display()));
    Ok(Exit::Success)
}

/// Run one closed loop and write its trace and metrics.
fn simulate_one(
    file: &ScenarioFile,
    kind: ControllerKind,
    gains: &[f64],
    common: &Common,
) -> anyhow::Result<(SimulationTrace, Metrics)> {
    let spec = optimizer::controller_from_gains(&file.scenario, kind, gains)
        .context("gain vector has the wrong length")?;
    let scenario = file.scenario.with_controller(spec);
    let trace = sim::run(&scenario).map_err(|errs| {
        anyhow::anyhow!(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
    })?;
    let metrics = compute_metrics(&trace, &file.metrics);
    output::write_trace_file(&trace, &common.path(&format!("trace_{}.csv", kind.name())))?;
    std::fs::write(
        common.path(&format!("metrics_{}.txt", kind.name())),
        output::metrics_block(&metrics),
    )?;
    Ok((trace, metrics))
}

fn preflight(file: &ScenarioFile, kind: ControllerKind, common: &Common) {
    let s = &file.scenario;
    let report = envelope_check(
        &s.reference_samples(),
        &s.envelope,
        &s.limits.torque,
        s.plant.torque_constant(),
        None,
    );
    for (j, check) in report.subsystems.iter().enumerate() {
        if let emla_core::controller::SubsystemCheck::Violated { time, value, lambda } = check {
            common.say(format!(
                "warning: reference {} reaches {value} at t = {time}, above lambda = {lambda}",
                j + 1
            ));
        }
    }
    if kind == ControllerKind::DrsBlf {
        let flagged = file.drsblf.euler_positivity_violations(s.dt());
        for (j, f) in flagged.iter().enumerate() {
            if *f {
                common.say(format!(
                    "note: beta{n}*kappa{n}*dt >= 1; an explicit Euler adaptive update would lose positivity (the exact update used here does not)",
                    n = j + 1
                ));
            }
        }
    }
}

pub fn simulate(scenario: &Path, kind: Option<ControllerKind>, common: &Common) -> anyhow::Result<Exit> {
    let file = load(scenario, common)?;
    let kind = kind.unwrap_or(file.default_controller);
    common.prepare()?;
    preflight(&file, kind, common);
    let (trace, metrics) = simulate_one(&file, kind, &file.gains(kind), common)?;
    common.say(format!("controller: {}", kind.name()));
    common.say(output::metrics_table(&metrics));
    if let Some(msg) = termination_report(&trace) {
        eprintln!("{msg}");
    }
    common.say(format!(
        "wrote {}",
        common.path(&format!("trace_{}.csv", kind.name())).display()
    ));
    Ok(exit_for(&trace))
}

/// Parallel batch evaluator over at most `jobs` threads.
fn run_jaya(
    file: &ScenarioFile,
    kind: ControllerKind,
    generations: Option<usize>,
    jobs: usize,
) -> anyhow::Result<JayaResult> {
    let mut cfg = file.jaya_config(kind);
    if let Some(g) = generations {
        cfg.generations = g;
    }
    if cfg.bounds.iter().any(|b| b.0.is_nan()) {
        anyhow::bail!("scenario has no [bounds.{}] section", kind.name());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let scenario = file.scenario_for(kind);
    let warm = file.gains(kind);
    let warm = file.jaya.warm_start.then_some(warm.as_slice());
    let result = optimizer::optimize(&cfg, warm, |batch| {
        pool.install(|| {
            batch
                .par_iter()
                .map(|g| optimizer::evaluate_gains(&scenario, kind, g))
                .collect()
        })
    })?;
    Ok(result)
}

fn report_history(result: &JayaResult, common: &Common) {
    for h in &result.history {
        common.say(format!("generation {:>4}  best f_x = {:.9e}", h.generation, h.best_fx));
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub generations: Option<usize>,
    pub jobs: usize,
}

pub fn optimize(
    scenario: &Path,
    kind: Option<ControllerKind>,
    budget: Budget,
    common: &Common,
) -> anyhow::Result<Exit> {
    let file = load(scenario, common)?;
    let kind = kind.unwrap_or(file.default_controller);
    common.prepare()?;
    let result = run_jaya(&file, kind, budget.generations, budget.jobs)?;
    report_history(&result, common);
    output::write_convergence(&result.history, &common.path(&format!("convergence_{}.csv", kind.name())))?;
    let gains_path = common.path(&format!("best_gains_{}.cfg", kind.name()));
    std::fs::write(
        &gains_path,
        format!(
            "# best f_x = {} after {} evaluations\n{}",
            result.best.fx,
            result.evaluations,
            output::gains_section(kind, &result.best.gains)
        ),
    )?;
    common.say(format!("best f_x = {}", result.best.fx));
    common.say(output::gains_section(kind, &result.best.gains));
    common.say(format!("wrote {}", gains_path.display()));
    Ok(Exit::Success)
}

/// Tune both controllers with the same budget, then simulate both.
pub fn compare(scenario: &Path, budget: Budget, common: &Common) -> anyhow::Result<Exit> {
    let file = load(scenario, common)?;
    common.prepare()?;
    let mut rows = Vec::new();
    let mut exit = Exit::Success;
    for kind in [ControllerKind::DrsBlf, ControllerKind::Pid] {
        let gains = if budget.generations.unwrap_or(file.jaya.generations) > 0 {
            let r = run_jaya(&file, kind, budget.generations, budget.jobs)?;
            common.say(format!(
                "{}: best f_x = {} after {} evaluations",
                kind.name(),
                r.best.fx,
                r.evaluations
            ));
            output::write_convergence(&r.history, &common.path(&format!("convergence_{}.csv", kind.name())))?;
            std::fs::write(
                common.path(&format!("best_gains_{}.cfg", kind.name())),
                output::gains_section(kind, &r.best.gains),
            )?;
            r.best.gains
        } else {
            file.gains(kind)
        };
        let (trace, metrics) = simulate_one(&file, kind, &gains, common)?;
        if let Some(msg) = termination_report(&trace) {
            eprintln!("{}: {msg}", kind.name());
            if exit == Exit::Success {
                exit = exit_for(&trace);
            }
        }
        rows.push(metrics);
    }
    let table = output::comparison_table(("DRS-BLF", &rows[0]), ("PID", &rows[1]));
    std::fs::write(common.path("comparison.txt"), &table)?;
    if !common.quiet {
        print!("{table}");
    }
    Ok(exit)
}
