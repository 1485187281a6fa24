//! Scenario configuration: presets for the four reference scenarios and a flat
//! `section.key = value` text format.
//!
//! Vectors are comma separated, lists of vectors use `;` between entries.
//! Lines starting with `#` are comments. Keys not listed in [`KEYS`] are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::attitude::AttitudeGains;
use crate::error::{Error, Result};
use crate::geometry::{so3_exp, vee_unchecked, Mat3, Vec3};
use crate::observer::ObserverGains;
use crate::plant::{check_dt, DisturbanceSpec, PhysicalParams, RigidBodyState};
use crate::position::{EtaCoupling, PositionGains};
use crate::sensing::{GyroBias, InertialReferenceSet, NoiseModel, NoiseSpec};
use crate::trajectory::{TrajectoryKind, TrajectorySpec};

/// Every accepted key, in canonical output order.
pub const KEYS: &[&str] = &[
    "scenario",
    "sim.duration",
    "sim.dt",
    "sim.seed",
    "plant.mass",
    "plant.gravity",
    "plant.inertia",
    "plant.inertia_scale",
    "plant.inertia_sweep",
    "initial.position",
    "initial.velocity",
    "initial.attitude",
    "initial.angular_velocity",
    "bias.value",
    "bias.bound",
    "refs.directions",
    "refs.weights",
    "gains.position.k",
    "gains.position.k_x",
    "gains.position.k_f",
    "gains.position.mu_d",
    "gains.position.eta_mass_factor",
    "gains.attitude.k_c",
    "gains.attitude.lambda_c",
    "gains.attitude.alpha1",
    "gains.attitude.alpha2",
    "gains.observer.lambda",
    "gains.observer.gamma_f",
    "gains.filter.a",
    "noise.position",
    "noise.velocity",
    "noise.gyro",
    "noise.vector",
    "noise.model",
    "disturbance.force.offset",
    "disturbance.force.amplitude",
    "disturbance.force.rate",
    "disturbance.force.phase",
    "disturbance.torque.offset",
    "disturbance.torque.amplitude",
    "disturbance.torque.rate",
    "disturbance.torque.phase",
    "trajectory.kind",
    "trajectory.amplitude_x",
    "trajectory.amplitude_y",
    "trajectory.altitude",
    "trajectory.period",
    "trajectory.position",
    "trajectory.waypoints",
    "trajectory.yaw",
    "trajectory.yaw_rate",
    "mode.velocity_free",
    "mode.apparent_acceleration",
    "analysis.critical_radius",
    "analysis.c",
    "output.path",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub duration: f64,
    pub dt: f64,
    /// Nominal vehicle, which is also what the controller believes.
    pub params: PhysicalParams,
    /// Per-axis factor applied to the plant inertia only.
    pub inertia_scale: Vec3,
    /// Uniform factors the CLI runs side by side for the inertia-uncertainty scenario.
    pub inertia_sweep: Vec<f64>,
    pub initial: RigidBodyState,
    pub bias: GyroBias,
    pub refs: InertialReferenceSet,
    pub position_gains: PositionGains,
    pub attitude_gains: AttitudeGains,
    pub observer_gains: ObserverGains,
    pub filter_bandwidth: Vec3,
    pub noise: NoiseSpec,
    pub disturbance: DisturbanceSpec,
    pub trajectory: TrajectorySpec,
    pub velocity_free: bool,
    pub apparent_acceleration: bool,
    pub critical_radius: f64,
    /// `None` picks half the admissible limit.
    pub lyapunov_c: Option<f64>,
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Preset for scenario 1 (ideal), 2 (noisy), 3 (inertia uncertainty) or 4 (apparent acceleration).
    pub fn preset(scenario: u8) -> Result<Self> {
        let mut cfg = Self {
            scenario,
            duration: 60.0,
            dt: 1e-3,
            params: PhysicalParams::reference(),
            inertia_scale: Vec3::new(1.0, 1.0, 1.0),
            inertia_sweep: Vec::new(),
            initial: RigidBodyState::at_rest(),
            bias: GyroBias::reference(),
            refs: InertialReferenceSet::reference(),
            position_gains: PositionGains::reference(),
            attitude_gains: AttitudeGains::reference(),
            observer_gains: ObserverGains::reference(3),
            filter_bandwidth: Vec3::new(20.0, 20.0, 20.0),
            noise: NoiseSpec::none(),
            disturbance: DisturbanceSpec::none(),
            trajectory: TrajectorySpec::lemniscate(),
            velocity_free: false,
            apparent_acceleration: false,
            critical_radius: crate::analysis::DEFAULT_CRITICAL_RADIUS,
            lyapunov_c: None,
            output: None,
        };
        match scenario {
            1 => {}
            2 => cfg.noise = NoiseSpec::noisy(0),
            3 => {
                cfg.inertia_scale = Vec3::new(1.3, 1.3, 1.3);
                cfg.inertia_sweep = vec![0.7, 1.3];
            }
            4 => cfg.apparent_acceleration = true,
            n => return Err(Error::config(format!("unknown scenario {n}, expected 1 to 4"))),
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.noise.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.seed = seed;
        self
    }

    /// Plant-side parameters: nominal inertia times the uncertainty factor.
    pub fn plant_params(&self) -> Result<PhysicalParams> {
        self.params.with_inertia_scale(&self.inertia_scale)
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::config(format!("duration must be positive, got {}", self.duration)));
        }
        check_dt(self.dt)?;
        let n = self.duration / self.dt;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::config(format!(
                "duration {} is not a whole number of steps of {}",
                self.duration, self.dt
            )));
        }
        if self.inertia_scale.iter().any(|s| !(*s > 0.0)) || self.inertia_sweep.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::config("inertia scale factors must be positive"));
        }
        if self.observer_gains.lambda.len() != self.refs.len() {
            return Err(Error::config(format!(
                "{} observer gains for {} reference directions",
                self.observer_gains.lambda.len(),
                self.refs.len()
            )));
        }
        if !(self.critical_radius > 0.0 && self.critical_radius < 1.0) {
            return Err(Error::config(format!(
                "critical radius must lie in (0, 1), got {}",
                self.critical_radius
            )));
        }
        if let Some(c) = self.lyapunov_c {
            if !(c > 0.0) {
                return Err(Error::config(format!("analysis.c must be positive, got {c}")));
            }
        }
        self.noise.validate()?;
        self.trajectory.validate()?;
        if self.trajectory.vertical_accel_bound() > self.position_gains.mu_d + 1e-12 {
            return Err(Error::config(format!(
                "trajectory vertical acceleration bound {} exceeds gains.position.mu_d = {}",
                self.trajectory.vertical_accel_bound(),
                self.position_gains.mu_d
            )));
        }
        self.plant_params()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, None)
    }

    /// Parses `text` on top of the preset named by its `scenario` key, or `default_scenario`, or 1.
    pub fn parse(text: &str, origin: &Path, default_scenario: Option<u8>) -> Result<Self> {
        let entries = parse_entries(text, origin)?;
        let scenario = match entries.get("scenario") {
            Some((line, v)) => v.parse::<u8>().map_err(|_| parse_err(origin, *line, "scenario must be 1 to 4"))?,
            None => default_scenario.unwrap_or(1),
        };
        let mut cfg = Self::preset(scenario).map_err(|e| parse_err(origin, 0, &e.to_string()))?;
        let mut pending = Pending::default();
        for (key, (line, value)) in &entries {
            cfg.apply(key, value, &mut pending)
                .map_err(|e| parse_err(origin, *line, &format!("{key}: {}", strip_prefix(&e))))?;
        }
        cfg.finish(pending).map_err(|e| parse_err(origin, 0, &strip_prefix(&e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<config>"), None)
    }

    fn apply(&mut self, key: &str, v: &str, p: &mut Pending) -> Result<()> {
        match key {
            "scenario" => {}
            "sim.duration" => self.duration = scalar(v)?,
            "sim.dt" => self.dt = scalar(v)?,
            "sim.seed" => self.noise.seed = v.parse().map_err(|_| Error::config(format!("bad seed '{v}'")))?,
            "plant.mass" => p.mass = Some(scalar(v)?),
            "plant.gravity" => p.gravity = Some(scalar(v)?),
            "plant.inertia" => p.inertia = Some(matrix(v)?),
            "plant.inertia_scale" => self.inertia_scale = vec3(v)?,
            "plant.inertia_sweep" => self.inertia_sweep = list(v)?,
            "initial.position" => self.initial.position = vec3(v)?,
            "initial.velocity" => self.initial.velocity = vec3(v)?,
            "initial.attitude" => self.initial.attitude = so3_exp(&vec3(v)?),
            "initial.angular_velocity" => self.initial.angular_velocity = vec3(v)?,
            "bias.value" => p.bias = Some(vec3(v)?),
            "bias.bound" => p.bias_bound = Some(scalar(v)?),
            "refs.directions" => p.directions = Some(vec3_list(v)?),
            "refs.weights" => p.weights = Some(list(v)?),
            "gains.position.k" => self.position_gains.k = scalar(v)?,
            "gains.position.k_x" => self.position_gains.k_x = scalar(v)?,
            "gains.position.k_f" => self.position_gains.k_f = vec3(v)?,
            "gains.position.mu_d" => self.position_gains.mu_d = scalar(v)?,
            "gains.position.eta_mass_factor" => {
                self.position_gains.coupling = if boolean(v)? {
                    EtaCoupling::MassScaled
                } else {
                    EtaCoupling::Literal
                }
            }
            "gains.attitude.k_c" => self.attitude_gains.k_c = matrix(v)?,
            "gains.attitude.lambda_c" => self.attitude_gains.lambda_c = scalar(v)?,
            "gains.attitude.alpha1" => self.attitude_gains.alpha1 = scalar(v)?,
            "gains.attitude.alpha2" => self.attitude_gains.alpha2 = scalar(v)?,
            "gains.observer.lambda" => p.lambda = Some(v.to_string()),
            "gains.observer.gamma_f" => self.observer_gains.gamma_f = scalar(v)?,
            "gains.filter.a" => self.filter_bandwidth = vec3_or_scalar(v)?,
            "noise.position" => self.noise.position = scalar(v)?,
            "noise.velocity" => self.noise.velocity = scalar(v)?,
            "noise.gyro" => self.noise.gyro = scalar(v)?,
            "noise.vector" => self.noise.vector = scalar(v)?,
            "noise.model" => {
                self.noise.model = match v {
                    "gaussian" => NoiseModel::Gaussian,
                    "uniform_amplitude" => NoiseModel::UniformAmplitude,
                    _ => return Err(Error::config(format!("noise.model must be gaussian or uniform_amplitude, got '{v}'"))),
                }
            }
            "disturbance.force.offset" => self.disturbance.force.offset = vec3(v)?,
            "disturbance.force.amplitude" => self.disturbance.force.amplitude = vec3(v)?,
            "disturbance.force.rate" => self.disturbance.force.rate = vec3(v)?,
            "disturbance.force.phase" => self.disturbance.force.phase = vec3(v)?,
            "disturbance.torque.offset" => self.disturbance.torque.offset = vec3(v)?,
            "disturbance.torque.amplitude" => self.disturbance.torque.amplitude = vec3(v)?,
            "disturbance.torque.rate" => self.disturbance.torque.rate = vec3(v)?,
            "disturbance.torque.phase" => self.disturbance.torque.phase = vec3(v)?,
            "trajectory.kind" => p.kind = Some(v.to_string()),
            "trajectory.amplitude_x" => p.amplitude_x = Some(scalar(v)?),
            "trajectory.amplitude_y" => p.amplitude_y = Some(scalar(v)?),
            "trajectory.altitude" => p.altitude = Some(scalar(v)?),
            "trajectory.period" => p.period = Some(scalar(v)?),
            "trajectory.position" => p.hover = Some(vec3(v)?),
            "trajectory.waypoints" => p.waypoints = Some(waypoints(v)?),
            "trajectory.yaw" => self.trajectory.yaw.initial = scalar(v)?,
            "trajectory.yaw_rate" => self.trajectory.yaw.rate = scalar(v)?,
            "mode.velocity_free" => self.velocity_free = boolean(v)?,
            "mode.apparent_acceleration" => self.apparent_acceleration = boolean(v)?,
            "analysis.critical_radius" => self.critical_radius = scalar(v)?,
            "analysis.c" => {
                self.lyapunov_c = if v == "auto" { None } else { Some(scalar(v)?) }
            }
            "output.path" => self.output = Some(PathBuf::from(v)),
            _ => return Err(Error::config("unknown key")),
        }
        Ok(())
    }

    fn finish(&mut self, p: Pending) -> Result<()> {
        if p.mass.is_some() || p.gravity.is_some() || p.inertia.is_some() {
            self.params = PhysicalParams::new(
                p.mass.unwrap_or(self.params.mass),
                p.inertia.unwrap_or(self.params.inertia),
                p.gravity.unwrap_or(self.params.gravity),
            )?;
        }
        if p.bias.is_some() || p.bias_bound.is_some() {
            self.bias = GyroBias::new(p.bias.unwrap_or(self.bias.bias), p.bias_bound.unwrap_or(self.bias.bound))?;
        }
        if p.directions.is_some() || p.weights.is_some() {
            let dirs = p.directions.unwrap_or_else(|| self.refs.directions().to_vec());
            let weights = p.weights.unwrap_or_else(|| vec![0.1; dirs.len()]);
            self.refs = InertialReferenceSet::new(dirs, weights)?;
        }
        let n = self.refs.len();
        let lambda = match p.lambda {
            Some(text) => observer_lambda(&text, n)?,
            None if self.observer_gains.lambda.len() == n => self.observer_gains.lambda.clone(),
            None => vec![self.observer_gains.lambda[0]; n],
        };
        self.observer_gains = ObserverGains::new(lambda, self.observer_gains.gamma_f)?;
        self.position_gains = {
            let g = self.position_gains;
            let mut checked = PositionGains::new(g.k, g.k_x, g.k_f, g.mu_d)?;
            checked.coupling = g.coupling;
            checked
        };
        let a = self.attitude_gains;
        self.attitude_gains = AttitudeGains::new(a.k_c, a.lambda_c, a.alpha1, a.alpha2)?;
        let kind = match p.kind.as_deref() {
            None => match &self.trajectory.kind {
                TrajectoryKind::Lemniscate { .. } => "lemniscate",
                TrajectoryKind::Hover { .. } => "hover",
                TrajectoryKind::Waypoints { .. } => "waypoints",
            },
            Some(k) => k,
        };
        self.trajectory.kind = match (kind, &self.trajectory.kind) {
            ("lemniscate", current) => {
                let (ax, ay, alt, per) = match current {
                    TrajectoryKind::Lemniscate {
                        amplitude_x,
                        amplitude_y,
                        altitude,
                        period,
                    } => (*amplitude_x, *amplitude_y, *altitude, *period),
                    _ => (2.5, 3.0, 3.0, 60.0),
                };
                TrajectoryKind::Lemniscate {
                    amplitude_x: p.amplitude_x.unwrap_or(ax),
                    amplitude_y: p.amplitude_y.unwrap_or(ay),
                    altitude: p.altitude.unwrap_or(alt),
                    period: p.period.unwrap_or(per),
                }
            }
            ("hover", current) => TrajectoryKind::Hover {
                position: match (p.hover, current) {
                    (Some(x), _) => x,
                    (None, TrajectoryKind::Hover { position }) => *position,
                    (None, _) => return Err(Error::config("hover trajectory needs trajectory.position")),
                },
            },
            ("waypoints", current) => TrajectoryKind::Waypoints {
                knots: match (p.waypoints, current) {
                    (Some(k), _) => k,
                    (None, TrajectoryKind::Waypoints { knots }) => knots.clone(),
                    (None, _) => return Err(Error::config("waypoint trajectory needs trajectory.waypoints")),
                },
            },
            (other, _) => return Err(Error::config(format!("unknown trajectory kind '{other}'"))),
        };
        Ok(())
    }

    /// Canonical `(key, value)` pairs, in [`KEYS`] order, that parse back to `self`.
    pub fn to_entries(&self) -> Vec<(&'static str, String)> {
        let mut out: Vec<(&'static str, String)> = Vec::new();
        let mut put = |k: &'static str, v: String| out.push((k, v));
        put("scenario", self.scenario.to_string());
        put("sim.duration", fmt(self.duration));
        put("sim.dt", fmt(self.dt));
        put("sim.seed", self.noise.seed.to_string());
        put("plant.mass", fmt(self.params.mass));
        put("plant.gravity", fmt(self.params.gravity));
        put("plant.inertia", fmt_matrix(&self.params.inertia));
        put("plant.inertia_scale", fmt_vec(&self.inertia_scale));
        put("plant.inertia_sweep", fmt_list(&self.inertia_sweep));
        put("initial.position", fmt_vec(&self.initial.position));
        put("initial.velocity", fmt_vec(&self.initial.velocity));
        put("initial.attitude", fmt_vec(&rotation_vector(self.initial.attitude.matrix())));
        put("initial.angular_velocity", fmt_vec(&self.initial.angular_velocity));
        put("bias.value", fmt_vec(&self.bias.bias));
        put("bias.bound", fmt(self.bias.bound));
        put(
            "refs.directions",
            self.refs.directions().iter().map(fmt_vec).collect::<Vec<_>>().join("; "),
        );
        put("refs.weights", fmt_list(self.refs.weights()));
        let pg = &self.position_gains;
        put("gains.position.k", fmt(pg.k));
        put("gains.position.k_x", fmt(pg.k_x));
        put("gains.position.k_f", fmt_vec(&pg.k_f));
        put("gains.position.mu_d", fmt(pg.mu_d));
        put(
            "gains.position.eta_mass_factor",
            (pg.coupling == EtaCoupling::MassScaled).to_string(),
        );
        let ag = &self.attitude_gains;
        put("gains.attitude.k_c", fmt_matrix(&ag.k_c));
        put("gains.attitude.lambda_c", fmt(ag.lambda_c));
        put("gains.attitude.alpha1", fmt(ag.alpha1));
        put("gains.attitude.alpha2", fmt(ag.alpha2));
        put("gains.observer.lambda", fmt_observer_lambda(&self.observer_gains.lambda));
        put("gains.observer.gamma_f", fmt(self.observer_gains.gamma_f));
        put("gains.filter.a", fmt_vec(&self.filter_bandwidth));
        put("noise.position", fmt(self.noise.position));
        put("noise.velocity", fmt(self.noise.velocity));
        put("noise.gyro", fmt(self.noise.gyro));
        put("noise.vector", fmt(self.noise.vector));
        put(
            "noise.model",
            match self.noise.model {
                NoiseModel::Gaussian => "gaussian",
                NoiseModel::UniformAmplitude => "uniform_amplitude",
            }
            .into(),
        );
        for (prefix, s) in [("force", &self.disturbance.force), ("torque", &self.disturbance.torque)] {
            let key = |field: &str| -> &'static str {
                KEYS.iter()
                    .find(|k| **k == format!("disturbance.{prefix}.{field}"))
                    .copied()
                    .expect("disturbance keys are listed")
            };
            put(key("offset"), fmt_vec(&s.offset));
            put(key("amplitude"), fmt_vec(&s.amplitude));
            put(key("rate"), fmt_vec(&s.rate));
            put(key("phase"), fmt_vec(&s.phase));
        }
        match &self.trajectory.kind {
            TrajectoryKind::Lemniscate {
                amplitude_x,
                amplitude_y,
                altitude,
                period,
            } => {
                put("trajectory.kind", "lemniscate".into());
                put("trajectory.amplitude_x", fmt(*amplitude_x));
                put("trajectory.amplitude_y", fmt(*amplitude_y));
                put("trajectory.altitude", fmt(*altitude));
                put("trajectory.period", fmt(*period));
            }
            TrajectoryKind::Hover { position } => {
                put("trajectory.kind", "hover".into());
                put("trajectory.position", fmt_vec(position));
            }
            TrajectoryKind::Waypoints { knots } => {
                put("trajectory.kind", "waypoints".into());
                put(
                    "trajectory.waypoints",
                    knots
                        .iter()
                        .map(|(t, p)| format!("{}, {}", fmt(*t), fmt_vec(p)))
                        .collect::<Vec<_>>()
                        .join("; "),
                );
            }
        }
        put("trajectory.yaw", fmt(self.trajectory.yaw.initial));
        put("trajectory.yaw_rate", fmt(self.trajectory.yaw.rate));
        put("mode.velocity_free", self.velocity_free.to_string());
        put("mode.apparent_acceleration", self.apparent_acceleration.to_string());
        put("analysis.critical_radius", fmt(self.critical_radius));
        put("analysis.c", self.lyapunov_c.map_or("auto".into(), fmt));
        if let Some(p) = &self.output {
            put("output.path", p.display().to_string());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Keys whose canonical values differ, ignoring the `scenario` label.
    pub fn diff(&self, other: &Self) -> Vec<String> {
        let a: BTreeMap<_, _> = self.to_entries().into_iter().collect();
        let b: BTreeMap<_, _> = other.to_entries().into_iter().collect();
        KEYS.iter()
            .filter(|k| **k != "scenario" && a.get(*k) != b.get(*k))
            .map(|k| k.to_string())
            .collect()
    }
}

#[derive(Default)]
struct Pending {
    mass: Option<f64>,
    gravity: Option<f64>,
    inertia: Option<Mat3>,
    bias: Option<Vec3>,
    bias_bound: Option<f64>,
    directions: Option<Vec<Vec3>>,
    weights: Option<Vec<f64>>,
    lambda: Option<String>,
    kind: Option<String>,
    amplitude_x: Option<f64>,
    amplitude_y: Option<f64>,
    altitude: Option<f64>,
    period: Option<f64>,
    hover: Option<Vec3>,
    waypoints: Option<Vec<(f64, Vec3)>>,
}

fn parse_err(origin: &Path, line: usize, msg: &str) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg: msg.to_string(),
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

fn parse_entries(text: &str, origin: &Path) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(origin, i + 1, "expected 'key = value'"))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(parse_err(origin, i + 1, &format!("unknown key '{k}'")));
        }
        if out.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
            return Err(parse_err(origin, i + 1, &format!("duplicate key '{k}'")));
        }
    }
    Ok(out)
}

fn scalar(v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(format!("expected a finite number, got '{v}'")))
}

fn list(v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(scalar).collect()
}

fn vec3(v: &str) -> Result<Vec3> {
    let xs = list(v)?;
    if xs.len() != 3 {
        return Err(Error::config(format!("expected 3 components, got {}", xs.len())));
    }
    Ok(Vec3::new(xs[0], xs[1], xs[2]))
}

fn vec3_or_scalar(v: &str) -> Result<Vec3> {
    let xs = list(v)?;
    match xs.len() {
        1 => Ok(Vec3::repeat(xs[0])),
        3 => Ok(Vec3::new(xs[0], xs[1], xs[2])),
        n => Err(Error::config(format!("expected 1 or 3 components, got {n}"))),
    }
}

/// 1 value (scaled identity), 3 (diagonal) or 9 (row-major).
fn matrix(v: &str) -> Result<Mat3> {
    let xs = list(v)?;
    match xs.len() {
        1 => Ok(Mat3::identity() * xs[0]),
        3 => Ok(Mat3::from_diagonal(&Vec3::new(xs[0], xs[1], xs[2]))),
        9 => Ok(Mat3::from_row_slice(&xs)),
        n => Err(Error::config(format!("expected 1, 3 or 9 matrix entries, got {n}"))),
    }
}

fn vec3_list(v: &str) -> Result<Vec<Vec3>> {
    v.split(';').map(vec3).collect()
}

fn waypoints(v: &str) -> Result<Vec<(f64, Vec3)>> {
    v.split(';')
        .map(|entry| {
            let xs = list(entry)?;
            if xs.len() != 4 {
                return Err(Error::config(format!("waypoint needs 't, x, y, z', got '{}'", entry.trim())));
            }
            Ok((xs[0], Vec3::new(xs[1], xs[2], xs[3])))
        })
        .collect()
}

fn boolean(v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(format!("expected true or false, got '{v}'"))),
    }
}

fn observer_lambda(v: &str, n: usize) -> Result<Vec<Mat3>> {
    let parts: Vec<&str> = v.split(';').collect();
    if parts.len() > 1 {
        if parts.len() != n {
            return Err(Error::config(format!("{} observer gains for {n} sensors", parts.len())));
        }
        return parts.iter().map(|p| matrix(p)).collect();
    }
    let xs = list(v)?;
    match xs.len() {
        1 => Ok(vec![Mat3::identity() * xs[0]; n]),
        len if len == n => Ok(xs.iter().map(|x| Mat3::identity() * *x).collect()),
        len => Err(Error::config(format!("{len} observer gains for {n} sensors"))),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(", ")
}

fn fmt_vec(v: &Vec3) -> String {
    fmt_list(v.as_slice())
}

fn fmt_matrix(m: &Mat3) -> String {
    if m.is_diagonal() {
        fmt_vec(&m.diagonal())
    } else {
        let rows: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])).collect();
        fmt_list(&rows)
    }
}

trait Diagonal {
    fn is_diagonal(&self) -> bool;
}

impl Diagonal for Mat3 {
    fn is_diagonal(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| i == j || self[(i, j)] == 0.0))
    }
}

fn fmt_observer_lambda(ls: &[Mat3]) -> String {
    let isotropic = |m: &Mat3| m.is_diagonal() && m[(0, 0)] == m[(1, 1)] && m[(1, 1)] == m[(2, 2)];
    if ls.iter().all(isotropic) {
        if ls.iter().all(|m| m[(0, 0)] == ls[0][(0, 0)]) {
            fmt(ls[0][(0, 0)])
        } else {
            fmt_list(&ls.iter().map(|m| m[(0, 0)]).collect::<Vec<_>>())
        }
    } else {
        ls.iter().map(fmt_matrix).collect::<Vec<_>>().join("; ")
    }
}

/// Log map for the canonical text form of the initial attitude.
fn rotation_vector(r: &Mat3) -> Vec3 {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return Vec3::zeros();
    }
    let axis_scaled = vee_unchecked(&((r - r.transpose()) * 0.5));
    if angle < std::f64::consts::PI - 1e-6 {
        return axis_scaled * (angle / angle.sin());
    }
    // near a half turn: axis from the symmetric part
    let b = (r + Mat3::identity()) * 0.5;
    let col = (0..3).max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)])).unwrap();
    let mut axis = b.column(col).into_owned().normalize();
    if axis.dot(&axis_scaled) < 0.0 {
        axis = -axis;
    }
    axis * angle
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::preset(1).expect("scenario 1 preset is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_validate() {
        for n in 1..=4 {
            ScenarioConfig::preset(n).unwrap().validate().unwrap();
        }
        assert!(ScenarioConfig::preset(5).is_err());
    }

    #[test]
    fn text_round_trip() {
        for n in 1..=4 {
            let cfg = ScenarioConfig::preset(n).unwrap();
            let back = ScenarioConfig::parse_str(&cfg.to_text()).unwrap();
            assert_eq!(cfg.to_text(), back.to_text());
            assert!(cfg.diff(&back).is_empty());
        }
    }

    #[test]
    fn apparent_acceleration_scenario_differs_in_one_field() {
        let a = ScenarioConfig::preset(1).unwrap();
        let b = ScenarioConfig::preset(4).unwrap();
        assert_eq!(a.diff(&b), vec!["mode.apparent_acceleration".to_string()]);
    }

    #[test]
    fn overrides_and_errors() {
        let cfg = ScenarioConfig::parse_str("# gains\ngains.position.k = 5\nsim.duration = 2\nsim.seed = 7\n").unwrap();
        assert_eq!(cfg.position_gains.k, 5.0);
        assert_eq!(cfg.steps(), 2000);
        assert_eq!(cfg.seed(), 7);
        let e = ScenarioConfig::parse_str("gains.position.q = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = ScenarioConfig::parse_str("\n\ngains.position.k = -1\n").unwrap_err();
        assert!(e.to_string().contains("positive"), "{e}");
        let e = ScenarioConfig::parse_str("sim.dt = 0.5\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
        let e = ScenarioConfig::parse_str("refs.directions = 0,0,1; 0,0,-1\n").unwrap_err();
        assert!(e.to_string().contains("collinear"), "{e}");
    }

    #[test]
    fn rotation_vector_inverts_exp() {
        for w in [Vec3::new(0.1, -0.4, 0.3), Vec3::new(0.0, 0.0, 3.0), Vec3::new(1e-9, 0.0, 0.0)] {
            let r = so3_exp(&w);
            assert_abs_diff_eq!(rotation_vector(r.matrix()), w, epsilon = 1e-9);
        }
    }

    #[test]
    fn custom_trajectory_parses() {
        let cfg = ScenarioConfig::parse_str(
            "trajectory.kind = waypoints\ntrajectory.waypoints = 0, 0, 0, 1; 5, 1, 1, 1\n",
        )
        .unwrap();
        assert!(matches!(cfg.trajectory.kind, TrajectoryKind::Waypoints { ref knots } if knots.len() == 2));
        let flat = ScenarioConfig::parse_str(&cfg.to_text()).unwrap();
        assert_eq!(flat.trajectory, cfg.trajectory);
    }
}
