//! Scenario files: `[section]` headers, `key = value` lines and `#` comments.
//!
//! ```text
//! [scenario]
//! duration = 6
//! control_rate = 1000
//!
//! [trajectory]
//! # t    pos   vel  acc
//! 0      0     0    0
//! 2      0.1   0    0
//! ```
//!
//! Multi-value keys are whitespace-separated. Unknown sections and keys are
//! errors, and every problem is reported with its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use emla_core::controller::{Bound, ControllerGains, PidGains, SafetyEnvelope, ViolationPolicy};
use emla_core::optimizer::JayaConfig;
use emla_core::plant::{
    ChannelLimits, Disturbance, ForceProfile, LoadProfile, PlantParams, PlantState,
    SaturationLimits,
};
use emla_core::sim::{ControllerKind, ControllerSpec, MetricsConfig, Scenario};
use emla_core::trajectory::{PiecewiseTrajectory, WaypointCondition};

/// One problem in a scenario file. `line` is 1-based; 0 means the problem is
/// not tied to a single line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// All problems found in a file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            if e.line == 0 {
                write!(f, "{}", e.message)?;
            } else {
                write!(f, "{e}")?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Section {
    line: usize,
    entries: Vec<Entry>,
    /// Lines without `=` (only meaningful in `[trajectory]`).
    rows: Vec<(usize, String)>,
}

/// Split a file into sections. Lines before the first header go to the
/// section named `""`.
fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigErrors> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                errors.push(err(line, format!("malformed section header `{body}`")));
                continue;
            };
            let name = name.trim().to_string();
            if let Some(prev) = sections.get(&name) {
                if prev.line != 0 {
                    errors.push(err(line, format!("section [{name}] repeated (first at line {})", prev.line)));
                }
            }
            sections.entry(name.clone()).or_default().line = line;
            current = name;
            continue;
        }
        let section = sections.entry(current.clone()).or_default();
        match body.split_once('=') {
            Some((k, v)) => section.entries.push(Entry {
                line,
                key: k.trim().to_string(),
                value: v.trim().to_string(),
            }),
            None => section.rows.push((line, body.to_string())),
        }
    }
    if errors.is_empty() {
        Ok(sections)
    } else {
        Err(ConfigErrors(errors))
    }
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

fn parse_numbers(line: usize, s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("`{tok}` is not a finite number")))
        })
        .collect()
}

/// Reads typed values out of one section, recording problems instead of
/// stopping at the first one.
struct Reader<'a> {
    name: &'a str,
    section: Option<&'a Section>,
    used: Vec<bool>,
    errors: &'a mut Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn new(
        sections: &'a BTreeMap<String, Section>,
        name: &'a str,
        errors: &'a mut Vec<ConfigError>,
    ) -> Self {
        let section = sections.get(name);
        let mut used = vec![false; section.map_or(0, |s| s.entries.len())];
        if let Some(s) = section {
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            for (i, e) in s.entries.iter().enumerate() {
                if let Some(first) = seen.insert(&e.key, e.line) {
                    if name != "load" || e.key != "step" {
                        errors.push(err(e.line, format!("key `{}` repeated (first at line {first})", e.key)));
                        used[i] = true;
                    }
                }
            }
            for (line, row) in &s.rows {
                errors.push(err(*line, format!("expected `key = value` in [{name}], found `{row}`")));
            }
        }
        Self {
            name,
            section,
            used,
            errors,
        }
    }

    fn present(&self) -> bool {
        self.section.is_some()
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        let s = self.section?;
        let i = s.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some((s.entries[i].line, s.entries[i].value.clone()))
    }

    fn all(&mut self, key: &str) -> Vec<(usize, String)> {
        let Some(s) = self.section else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, e) in s.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                out.push((e.line, e.value.clone()));
            }
        }
        out
    }

    fn numbers(&mut self, key: &str, n: usize) -> Option<Vec<f64>> {
        let (line, v) = self.raw(key)?;
        match parse_numbers(line, &v) {
            Ok(vals) if vals.len() == n => Some(vals),
            Ok(vals) => {
                self.errors.push(err(
                    line,
                    format!("`{key}` expects {n} value(s), found {}", vals.len()),
                ));
                None
            }
            Err(e) => {
                self.errors.push(e);
                None
            }
        }
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        self.numbers(key, 1).map(|v| v[0])
    }

    fn number_or(&mut self, key: &str, default: f64) -> f64 {
        self.number(key).unwrap_or(default)
    }

    fn required(&mut self, key: &str) -> f64 {
        match self.number(key) {
            Some(v) => v,
            None => {
                if self.section.is_some_and(|s| !s.entries.iter().any(|e| e.key == key)) {
                    let line = self.section.map_or(0, |s| s.line);
                    self.errors.push(err(line, format!("[{}] is missing `{key}`", self.name)));
                }
                f64::NAN
            }
        }
    }

    fn integer<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        let (line, v) = self.raw(key)?;
        match v.parse::<T>() {
            Ok(n) => Some(n),
            Err(_) => {
                self.errors
                    .push(err(line, format!("`{key}` expects a non-negative integer, found `{v}`")));
                None
            }
        }
    }

    fn word(&mut self, key: &str, allowed: &[&str]) -> Option<String> {
        let (line, v) = self.raw(key)?;
        if allowed.contains(&v.as_str()) {
            Some(v)
        } else {
            self.errors.push(err(
                line,
                format!("`{key}` must be one of {}, found `{v}`", allowed.join(", ")),
            ));
            None
        }
    }

    fn finish(self) {
        if let Some(s) = self.section {
            for (e, used) in s.entries.iter().zip(&self.used) {
                if !used {
                    self.errors
                        .push(err(e.line, format!("unknown key `{}` in [{}]", e.key, self.name)));
                }
            }
        }
    }
}

/// Jaya settings shared by both controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct JayaSettings {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    pub retry_limit: u32,
    /// Start one candidate from the file's gains.
    pub warm_start: bool,
}

impl Default for JayaSettings {
    fn default() -> Self {
        Self {
            population: 15,
            generations: 50,
            seed: 1,
            retry_limit: 32,
            warm_start: true,
        }
    }
}

/// Everything one scenario file describes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    /// Closed-loop setup using `default_controller`.
    pub scenario: Scenario,
    pub default_controller: ControllerKind,
    pub drsblf: ControllerGains,
    pub theta0: f64,
    pub pid: PidGains,
    pub metrics: MetricsConfig,
    pub jaya: JayaSettings,
    pub bounds_drsblf: Vec<(f64, f64)>,
    pub bounds_pid: Vec<(f64, f64)>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(parse(&text)?)
    }

    pub fn controller(&self, kind: ControllerKind) -> ControllerSpec {
        match kind {
            ControllerKind::DrsBlf => ControllerSpec::DrsBlf {
                gains: self.drsblf,
                theta0: self.theta0,
            },
            ControllerKind::Pid => ControllerSpec::Pid(self.pid),
        }
    }

    pub fn scenario_for(&self, kind: ControllerKind) -> Scenario {
        self.scenario.with_controller(self.controller(kind))
    }

    pub fn gains(&self, kind: ControllerKind) -> Vec<f64> {
        match kind {
            ControllerKind::DrsBlf => self.drsblf.to_array().to_vec(),
            ControllerKind::Pid => self.pid.to_array().to_vec(),
        }
    }

    pub fn jaya_config(&self, kind: ControllerKind) -> JayaConfig {
        let bounds = match kind {
            ControllerKind::DrsBlf => self.bounds_drsblf.clone(),
            ControllerKind::Pid => self.bounds_pid.clone(),
        };
        JayaConfig {
            population: self.jaya.population,
            generations: self.jaya.generations,
            bounds,
            seed: self.jaya.seed,
            retry_limit: self.jaya.retry_limit,
        }
    }
}

const SECTIONS: &[&str] = &[
    "scenario",
    "plant",
    "load",
    "limits",
    "envelope",
    "gains.drsblf",
    "gains.pid",
    "trajectory",
    "metrics",
    "jaya",
    "bounds.drsblf",
    "bounds.pid",
];

/// Parse a full scenario file.
pub fn parse(text: &str) -> Result<ScenarioFile, ConfigErrors> {
    let sections = split_sections(text)?;
    let mut errors = Vec::new();
    for (name, s) in &sections {
        if !SECTIONS.contains(&name.as_str()) {
            let line = if name.is_empty() {
                s.entries
                    .first()
                    .map(|e| e.line)
                    .or(s.rows.first().map(|r| r.0))
                    .unwrap_or(0)
            } else {
                s.line
            };
            let what = if name.is_empty() {
                "content before the first section header".to_string()
            } else {
                format!("unknown section [{name}]")
            };
            errors.push(err(line, what));
        }
    }
    for required in ["scenario", "plant", "limits", "envelope", "trajectory"] {
        if !sections.contains_key(required) {
            errors.push(err(0, format!("missing section [{required}]")));
        }
    }

    // [scenario]
    let mut r = Reader::new(&sections, "scenario", &mut errors);
    let duration = r.required("duration");
    let control_rate = r.number_or("control_rate", 1000.0);
    let plant_substeps = r.integer::<u32>("plant_substeps").unwrap_or(4);
    let policy = match r.word("policy", &["abort", "clamp"]).as_deref() {
        Some("clamp") => ViolationPolicy::Clamp,
        _ => ViolationPolicy::Abort,
    };
    let seed = r.integer::<u64>("seed").unwrap_or(0);
    let theta0 = r.number_or("theta0", 1.0);
    let initial = r.numbers("initial_state", 4).unwrap_or(vec![0.0; 4]);
    let noise = r.numbers("sensor_noise", 4).unwrap_or(vec![0.0; 4]);
    let default_controller = match r.word("controller", &["drsblf", "pid"]).as_deref() {
        Some("pid") => ControllerKind::Pid,
        _ => ControllerKind::DrsBlf,
    };
    r.finish();

    // [plant]
    let mut r = Reader::new(&sections, "plant", &mut errors);
    let pole_pairs = if r.present() {
        match r.integer::<u32>("pole_pairs") {
            Some(p) => p,
            None => {
                if !sections["plant"].entries.iter().any(|e| e.key == "pole_pairs") {
                    let line = sections["plant"].line;
                    r.errors.push(err(line, "[plant] is missing `pole_pairs`"));
                }
                0
            }
        }
    } else {
        0
    };
    let plant = PlantParams {
        pole_pairs,
        flux_linkage: r.required("flux_linkage"),
        inductance_d: r.required("inductance_d"),
        inductance_q: r.required("inductance_q"),
        stator_resistance: r.required("stator_resistance"),
        rotary_to_linear: r.required("rotary_to_linear"),
        equivalent_inertia: r.required("equivalent_inertia"),
        equivalent_viscosity: r.required("equivalent_viscosity"),
        equivalent_stiffness: r.number_or("equivalent_stiffness", 0.0),
        force_coefficient: r.required("force_coefficient"),
    };
    r.finish();

    // [load]
    let mut r = Reader::new(&sections, "load", &mut errors);
    let base = r.number_or("force", 0.0);
    let steps: Vec<(f64, f64)> = r
        .all("step")
        .into_iter()
        .filter_map(|(line, v)| match parse_numbers(line, &v) {
            Ok(n) if n.len() == 2 => Some((n[0], n[1])),
            Ok(_) => {
                r.errors.push(err(line, "`step` expects `time force`"));
                None
            }
            Err(e) => {
                r.errors.push(e);
                None
            }
        })
        .collect();
    let force = if steps.is_empty() {
        ForceProfile::Constant(base)
    } else {
        let mut s = Vec::new();
        if base != 0.0 {
            s.push((f64::MIN, base));
        }
        s.extend(steps);
        ForceProfile::Steps(s)
    };
    let mut disturbance = [Disturbance::Zero; 4];
    for (j, d) in disturbance.iter_mut().enumerate() {
        let key = format!("disturbance{}", j + 1);
        if let Some((line, v)) = r.raw(&key) {
            match parse_disturbance(line, &v) {
                Ok(parsed) => *d = parsed,
                Err(e) => r.errors.push(e),
            }
        }
    }
    r.finish();
    let load = LoadProfile { force, disturbance };

    // [limits]
    let mut r = Reader::new(&sections, "limits", &mut errors);
    let channel = |r: &mut Reader, key: &str| match r.numbers(key, 2) {
        Some(v) => ChannelLimits::new(v[0], v[1]),
        None => {
            if r.present() && r.section.is_some_and(|s| !s.entries.iter().any(|e| e.key == key)) {
                let line = r.section.map_or(0, |s| s.line);
                r.errors.push(err(line, format!("[limits] is missing `{key}`")));
            }
            ChannelLimits::new(f64::NAN, f64::NAN)
        }
    };
    let limits = SaturationLimits {
        torque: channel(&mut r, "torque"),
        voltage_q: channel(&mut r, "voltage_q"),
        voltage_d: channel(&mut r, "voltage_d"),
    };
    r.finish();

    // [envelope]
    let mut r = Reader::new(&sections, "envelope", &mut errors);
    let chi = r.numbers("chi", 4);
    let lambda = r.numbers("lambda", 4);
    if r.present() {
        for (key, v) in [("chi", &chi), ("lambda", &lambda)] {
            if v.is_none() && !sections["envelope"].entries.iter().any(|e| e.key == key) {
                let line = sections["envelope"].line;
                r.errors.push(err(line, format!("[envelope] is missing `{key}`")));
            }
        }
    }
    r.finish();
    let chi = chi.unwrap_or(vec![f64::NAN; 4]);
    let lambda = lambda.unwrap_or(vec![f64::NAN; 4]);
    let envelope = SafetyEnvelope::new(std::array::from_fn(|j| Bound::new(chi[j], lambda[j])));

    // [gains.drsblf]
    let mut r = Reader::new(&sections, "gains.drsblf", &mut errors);
    let published = ControllerGains::published();
    let drsblf = ControllerGains {
        beta: r.numbers("beta", 4).map_or(published.beta, to4),
        kappa: r.numbers("kappa", 4).map_or(published.kappa, to4),
        zeta: r.numbers("zeta", 4).map_or(published.zeta, to4),
        epsilon: r.numbers("epsilon", 4).map_or(published.epsilon, to4),
    };
    r.finish();

    // [gains.pid]
    let mut r = Reader::new(&sections, "gains.pid", &mut errors);
    let pid_values: Vec<f64> = PidGains::NAMES
        .iter()
        .map(|k| r.number_or(k, 0.0))
        .collect();
    r.finish();
    let pid = PidGains::from_slice(&pid_values).expect("nine PID gains");

    // [trajectory]
    let waypoints = match sections.get("trajectory") {
        Some(s) => {
            for e in &s.entries {
                errors.push(err(e.line, format!("unexpected `{} = ...` in [trajectory]; rows are `t pos vel acc`", e.key)));
            }
            parse_waypoint_rows(&s.rows, &mut errors)
        }
        None => Vec::new(),
    };
    let trajectory = if waypoints.is_empty() {
        if sections.contains_key("trajectory") {
            errors.push(err(sections["trajectory"].line, "[trajectory] has no rows"));
        }
        None
    } else {
        match PiecewiseTrajectory::build(&waypoints.iter().map(|w| w.1).collect::<Vec<_>>()) {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(trajectory_error(&waypoints, e));
                None
            }
        }
    };

    // [metrics]
    let mut r = Reader::new(&sections, "metrics", &mut errors);
    let metrics = MetricsConfig {
        convergence_band: r.number_or("convergence_band", 0.02),
        window_start: r.number_or("window_start", 0.0),
    };
    r.finish();

    // [jaya]
    let mut r = Reader::new(&sections, "jaya", &mut errors);
    let d = JayaSettings::default();
    let jaya = JayaSettings {
        population: r.integer("population").unwrap_or(d.population),
        generations: r.integer("generations").unwrap_or(d.generations),
        seed: r.integer("seed").unwrap_or(d.seed),
        retry_limit: r.integer("retry_limit").unwrap_or(d.retry_limit),
        warm_start: r
            .word("warm_start", &["true", "false"])
            .map_or(d.warm_start, |w| w == "true"),
    };
    r.finish();

    let bounds_drsblf = read_bounds(&sections, "bounds.drsblf", &ControllerGains::NAMES, &mut errors);
    let bounds_pid = read_bounds(&sections, "bounds.pid", &PidGains::NAMES, &mut errors);

    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(errors));
    }

    let scenario = Scenario {
        plant,
        trajectory: trajectory.expect("checked above"),
        load,
        controller: ControllerSpec::DrsBlf {
            gains: drsblf,
            theta0,
        },
        envelope,
        limits,
        policy,
        duration,
        control_rate,
        plant_substeps,
        initial_state: PlantState::new(initial[0], initial[1], initial[2], initial[3]),
        sensor_noise: to4(noise),
        seed,
    };
    let mut file = ScenarioFile {
        scenario,
        default_controller,
        drsblf,
        theta0,
        pid,
        metrics,
        jaya,
        bounds_drsblf,
        bounds_pid,
    };
    file.scenario = file.scenario_for(default_controller);
    let problems: Vec<ConfigError> = file
        .scenario
        .with_controller(file.controller(ControllerKind::DrsBlf))
        .validate()
        .err()
        .into_iter()
        .flatten()
        .chain(
            file.scenario
                .with_controller(file.controller(ControllerKind::Pid))
                .validate()
                .err()
                .into_iter()
                .flatten()
                .filter(|e| e.field == "gains.pid"),
        )
        .map(|e| err(0, e.to_string()))
        .collect();
    if problems.is_empty() {
        Ok(file)
    } else {
        Err(ConfigErrors(problems))
    }
}

fn to4(v: Vec<f64>) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn parse_disturbance(line: usize, v: &str) -> Result<Disturbance, ConfigError> {
    let mut parts = v.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let rest: Vec<&str> = parts.collect();
    let nums = parse_numbers(line, &rest.join(" "))?;
    let arity = |n: usize| {
        if nums.len() == n {
            Ok(())
        } else {
            Err(err(line, format!("disturbance `{kind}` expects {n} value(s)")))
        }
    };
    match kind {
        "zero" => arity(0).map(|_| Disturbance::Zero),
        "constant" => arity(1).map(|_| Disturbance::Constant(nums[0])),
        "step" => arity(2).map(|_| Disturbance::Step {
            time: nums[0],
            amplitude: nums[1],
        }),
        "sine" => arity(3).map(|_| Disturbance::Sine {
            amplitude: nums[0],
            frequency: nums[1],
            phase: nums[2],
        }),
        other => Err(err(
            line,
            format!("unknown disturbance `{other}` (zero, constant, step, sine)"),
        )),
    }
}

fn parse_waypoint_rows(
    rows: &[(usize, String)],
    errors: &mut Vec<ConfigError>,
) -> Vec<(usize, WaypointCondition)> {
    rows.iter()
        .filter_map(|(line, row)| match parse_numbers(*line, row) {
            Ok(v) if v.len() == 4 => Some((*line, WaypointCondition::new(v[0], v[1], v[2], v[3]))),
            Ok(v) => {
                errors.push(err(*line, format!("waypoint rows are `t pos vel acc`, found {} value(s)", v.len())));
                None
            }
            Err(e) => {
                errors.push(e);
                None
            }
        })
        .collect()
}

fn trajectory_error(
    waypoints: &[(usize, WaypointCondition)],
    e: emla_core::trajectory::TrajectoryError,
) -> ConfigError {
    use emla_core::trajectory::TrajectoryError as T;
    let line_of = |i: usize| waypoints.get(i).map_or(0, |w| w.0);
    let line = match e {
        T::UnorderedTimes { index } | T::NonFinite { index } => line_of(index),
        _ => line_of(0),
    };
    err(line, format!("trajectory: {e}"))
}

/// Waypoint file for `plan`: either bare `t pos vel acc` rows, or a scenario
/// file whose `[trajectory]` section is used.
pub fn parse_waypoints(text: &str) -> Result<Vec<WaypointCondition>, ConfigErrors> {
    let sections = split_sections(text)?;
    let mut errors = Vec::new();
    let key = if sections.contains_key("trajectory") {
        "trajectory"
    } else {
        ""
    };
    let rows = match sections.get(key) {
        Some(s) => {
            if key.is_empty() {
                for e in &s.entries {
                    errors.push(err(e.line, "waypoint files contain only `t pos vel acc` rows"));
                }
            }
            parse_waypoint_rows(&s.rows, &mut errors)
        }
        None => Vec::new(),
    };
    if rows.is_empty() && errors.is_empty() {
        errors.push(err(0, "no waypoints found"));
    }
    if errors.is_empty() {
        if let Err(e) = PiecewiseTrajectory::build(&rows.iter().map(|w| w.1).collect::<Vec<_>>()) {
            errors.push(trajectory_error(&rows, e));
        }
    }
    if errors.is_empty() {
        Ok(rows.into_iter().map(|w| w.1).collect())
    } else {
        Err(ConfigErrors(errors))
    }
}

/// Per-gain Jaya bounds. A key is either a gain name (`beta2 = lo hi`) or,
/// for the barrier controller, a family name (`beta = lo hi`) covering all
/// four subsystems; specific names win.
fn read_bounds(
    sections: &BTreeMap<String, Section>,
    name: &str,
    names: &[&str],
    errors: &mut Vec<ConfigError>,
) -> Vec<(f64, f64)> {
    let mut r = Reader::new(sections, name, errors);
    let mut out = vec![(f64::NAN, f64::NAN); names.len()];
    let mut set = vec![false; names.len()];
    let families: Vec<String> = names
        .iter()
        .filter_map(|n| n.strip_suffix(|c: char| c.is_ascii_digit()).map(str::to_string))
        .collect();
    for fam in families.iter().collect::<std::collections::BTreeSet<_>>() {
        if let Some(v) = r.numbers(fam, 2) {
            for (i, n) in names.iter().enumerate() {
                if n.strip_suffix(|c: char| c.is_ascii_digit()) == Some(fam.as_str()) && !set[i] {
                    out[i] = (v[0], v[1]);
                }
            }
        }
    }
    for (i, n) in names.iter().enumerate() {
        if let Some(v) = r.numbers(n, 2) {
            out[i] = (v[0], v[1]);
            set[i] = true;
        }
    }
    let present = r.present();
    let line = r.section.map_or(0, |s| s.line);
    r.finish();
    if present {
        for (i, n) in names.iter().enumerate() {
            let (lo, hi) = out[i];
            if lo.is_nan() {
                errors.push(err(line, format!("[{name}] has no bounds for `{n}`")));
            } else if !(lo > 0.0 && lo <= hi) {
                errors.push(err(line, format!("[{name}] bounds for `{n}` must satisfy 0 < lower <= upper")));
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = "\
[scenario]
duration = 1

[plant]
pole_pairs = 4
flux_linkage = 2.6666666666666665
inductance_d = 0.012
inductance_q = 0.015
stator_resistance = 0.8
rotary_to_linear = 20
equivalent_inertia = 10
equivalent_viscosity = 5
force_coefficient = 0.05

[limits]
torque = -98 98
voltage_q = -400 400
voltage_d = -400 400

[envelope]
chi = 0.15 0.5 16 5
lambda = 0.12 0.15 6.5 0.5

[trajectory]
0 0 0 0
1 0.05 0 0
";

    #[test]
    fn minimal_file_parses_with_defaults() {
        let f = parse(MINIMAL).unwrap();
        assert_eq!(f.scenario.duration, 1.0);
        assert_eq!(f.scenario.control_rate, 1000.0);
        assert_eq!(f.scenario.plant_substeps, 4);
        assert_eq!(f.scenario.policy, ViolationPolicy::Abort);
        assert_eq!(f.drsblf, ControllerGains::published());
        assert_eq!(f.default_controller, ControllerKind::DrsBlf);
        assert_eq!(f.scenario.plant.torque_constant(), 16.0);
        assert_eq!(f.scenario.trajectory.segments().len(), 1);
        assert_eq!(f.jaya, JayaSettings::default());
        assert!(f.bounds_drsblf.iter().all(|b| b.0.is_nan()));
    }

    #[test]
    fn all_sections() {
        let text = format!(
            "{MINIMAL}
[load]
force = 10
step = 0.5 200
disturbance2 = sine 0.1 2 0
[gains.drsblf]
epsilon = 40 2000 40 30
[gains.pid]
kp_pos = 20
[jaya]
generations = 3
warm_start = false
[bounds.drsblf]
beta = 0.1 100
kappa = 1 1000
zeta = 1e-5 1
epsilon = 1 100
epsilon2 = 10 5000
[metrics]
window_start = 0.5
"
        );
        let f = parse(&text).unwrap();
        assert_eq!(f.drsblf.epsilon, [40.0, 2000.0, 40.0, 30.0]);
        assert_eq!(f.pid.kp_pos, 20.0);
        assert_eq!(f.jaya.generations, 3);
        assert!(!f.jaya.warm_start);
        assert_eq!(f.bounds_drsblf[13], (10.0, 5000.0));
        assert_eq!(f.bounds_drsblf[12], (1.0, 100.0));
        assert_eq!(f.scenario.load.at(0.1).force, 10.0);
        assert_eq!(f.scenario.load.at(0.6).force, 200.0);
        assert_eq!(f.metrics.window_start, 0.5);
        assert_eq!(f.jaya_config(ControllerKind::DrsBlf).bounds.len(), 16);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = MINIMAL.replace("rotary_to_linear = 20", "rotary_to_linear = twenty\nbogus = 1");
        let e = parse(&text).unwrap_err();
        let lines: Vec<usize> = e.0.iter().map(|e| e.line).collect();
        assert_eq!(lines, [10, 11]);
        assert!(e.0[0].message.contains("twenty"));
        assert!(e.0[1].message.contains("unknown key `bogus`"));
    }

    #[test]
    fn unknown_and_missing_sections() {
        let e = parse("[nope]\nx = 1\n").unwrap_err();
        let text = e.to_string();
        assert!(text.contains("line 1: unknown section [nope]"));
        for s in ["scenario", "plant", "limits", "envelope", "trajectory"] {
            assert!(text.contains(&format!("missing section [{s}]")), "{text}");
        }
    }

    #[test]
    fn unordered_waypoints_point_at_the_row() {
        let text = MINIMAL.replace("1 0.05 0 0", "1 0.05 0 0\n0.5 0 0 0");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].line, 27);
        assert!(e.0[0].message.contains("trajectory"));
    }

    #[test]
    fn semantic_problems_are_all_listed() {
        let text = MINIMAL
            .replace("duration = 1", "duration = -1")
            .replace("equivalent_inertia = 10", "equivalent_inertia = 0");
        let e = parse(&text).unwrap_err();
        assert!(e.0.len() >= 2, "{e}");
    }

    #[test]
    fn waypoint_files() {
        let w = parse_waypoints("# t pos vel acc\n0 0 0 0\n1 1 0 0\n2 0 0 0\n").unwrap();
        assert_eq!(w.len(), 3);
        let w = parse_waypoints(MINIMAL).unwrap();
        assert_eq!(w.len(), 2);
        let e = parse_waypoints("0 0 0 0\n2 1 0 0\n1 0 0 0\n").unwrap_err();
        assert_eq!(e.0[0].line, 3);
        let e = parse_waypoints("0 0 0\n").unwrap_err();
        assert_eq!(e.0[0].line, 1);
    }
}
