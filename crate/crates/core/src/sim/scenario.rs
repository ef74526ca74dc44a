//! Declarative scenario files (TOML).

use std::path::Path;

use nalgebra::{Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::ScenarioError;
use crate::linear_model::ThetaVec;
use crate::pcac::{OutputConstraints, PcacConfig};
use crate::rls::VrfConfig;
use crate::{Matrix12, Vector12};

const QUARTER_PI: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    /// Simulated time [s].
    pub duration: f64,
    /// Sample period [s].
    #[serde(default = "default_sample_time")]
    pub sample_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vehicle: VehicleSpec,
    #[serde(default)]
    pub identification: IdentificationSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub command: CommandSpec,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_sample_time() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSpec {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub gravity: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        let p = VehicleParams::reference_quadrotor();
        Self {
            mass: p.mass,
            inertia: p.inertia.into(),
            gravity: p.gravity,
        }
    }
}

/// Either one value broadcast to all entries or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVector {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ScalarOrVector {
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>, ScenarioError> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; len]),
            Self::Vector(v) if v.len() == len => Ok(v.clone()),
            Self::Vector(v) => Err(ScenarioError::Invalid(format!(
                "{what} has {} entries, expected {len}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationSpec {
    pub theta0: ScalarOrVector,
    pub p0_scale: f64,
    pub eta: f64,
    pub tau_n: usize,
    pub tau_d: usize,
    pub lambda_min: f64,
    /// F-test significance gating forgetting; `1` disables the gate.
    pub significance: f64,
}

impl Default for IdentificationSpec {
    fn default() -> Self {
        Self {
            theta0: ScalarOrVector::Scalar(1e-3),
            p0_scale: 1e6,
            eta: 1e-3,
            tau_n: 5,
            tau_d: 25,
            lambda_min: 0.01,
            significance: 0.05,
        }
    }
}

/// Source of the thrust feedforward added to the optimized deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GravityCompensation {
    /// Initial vehicle mass, never updated.
    Nominal,
    /// Current vehicle mass, updated when events change it.
    Actual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSpec {
    pub horizon: usize,
    /// Diagonal of the stage output weight.
    pub stage_weight: [f64; 12],
    /// Terminal weight as a multiple of the stage weight.
    pub terminal_scale: f64,
    pub move_weight: [f64; 4],
    /// Diagonal entry of the slack weight.
    pub slack_weight: f64,
    pub xi_max: [f64; 3],
    pub u_max: [f64; 4],
    /// Defaults to `−u_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_min: Option<[f64; 4]>,
    pub du_max: [f64; 4],
    /// Defaults to `−du_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub du_min: Option<[f64; 4]>,
    pub gravity_compensation: GravityCompensation,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            horizon: 10,
            stage_weight: [
                50.0, 50.0, 50.0, 10.0, 10.0, 10.0, 50.0, 50.0, 50.0, 10.0, 10.0, 10.0,
            ],
            terminal_scale: 10.0,
            move_weight: [0.1; 4],
            slack_weight: 1e6,
            xi_max: [QUARTER_PI; 3],
            u_max: [20.0, 2.0, 2.0, 2.0],
            u_min: None,
            du_max: [5.0, 0.3, 0.3, 0.3],
            du_min: None,
            gravity_compensation: GravityCompensation::Nominal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// `p_d = [cos 2t − 1, sin 2t, sin t]` with matching velocity rows.
    Periodic,
    /// Hover at the origin.
    Hover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandSpec {
    pub kind: CommandKind,
}

impl Default for CommandSpec {
    fn default() -> Self {
        Self {
            kind: CommandKind::Periodic,
        }
    }
}

impl CommandSpec {
    pub fn reference(&self, t: f64) -> Vector12 {
        match self.kind {
            CommandKind::Periodic => command_trajectory(t),
            CommandKind::Hover => Vector12::zeros(),
        }
    }
}

/// Periodic state command: position rows `p_d(t)`, velocity rows `ṗ_d(t)`.
pub fn command_trajectory(t: f64) -> Vector12 {
    let mut r = Vector12::zeros();
    let (s1, c1) = t.sin_cos();
    let (s2, c2) = (2.0 * t).sin_cos();
    r[0] = c2 - 1.0;
    r[1] = s2;
    r[2] = s1;
    r[6] = -2.0 * s2;
    r[7] = 2.0 * c2;
    r[8] = c1;
    r
}

/// Timed change of the plant. Only the mass can change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: f64,
    /// New mass as a multiple of the initial mass.
    pub mass_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation per output channel.
    pub sigma: ScalarOrVector,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: ScalarOrVector::Scalar(0.0),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Self = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Loads `path` with one dotted parameter overridden, e.g.
    /// `identification.theta0` or `events.0.mass_scale`.
    pub fn from_file_with_override(
        path: &Path,
        param: &str,
        value: &str,
    ) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str_with_override(&text, param, value)
    }

    pub fn from_toml_str_with_override(
        text: &str,
        param: &str,
        value: &str,
    ) -> Result<Self, ScenarioError> {
        let mut doc: toml::Table = toml::from_str(text)?;
        let replacement = parse_override_value(value)?;
        set_dotted(&mut doc, param, replacement)?;
        let scenario: Self = toml::Value::Table(doc).try_into()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is always serializable")
    }

    /// Example 1: tracking from a broadcast initial estimate `theta_bar`.
    pub fn example1(theta_bar: f64) -> Self {
        Self {
            name: format!("example1_theta{theta_bar:e}"),
            duration: 30.0,
            sample_time: 0.1,
            seed: 0,
            vehicle: VehicleSpec::default(),
            identification: IdentificationSpec {
                theta0: ScalarOrVector::Scalar(theta_bar),
                eta: 1e-3,
                ..IdentificationSpec::default()
            },
            controller: ControllerSpec::default(),
            command: CommandSpec::default(),
            events: Vec::new(),
            noise: NoiseSpec::default(),
        }
    }

    /// Example 2: mass scaled by `gamma` at t = 10 s.
    pub fn example2(gamma: f64) -> Self {
        Self {
            name: format!("example2_gamma{gamma}"),
            duration: 25.0,
            identification: IdentificationSpec {
                theta0: ScalarOrVector::Scalar(1e-3),
                eta: 0.99,
                ..IdentificationSpec::default()
            },
            controller: ControllerSpec {
                gravity_compensation: GravityCompensation::Actual,
                ..ControllerSpec::default()
            },
            events: vec![EventSpec {
                time: 10.0,
                mass_scale: gamma,
            }],
            ..Self::example1(1e-3)
        }
    }

    /// Hover at the origin from the true parameters.
    pub fn hover(duration: f64) -> Self {
        let mut s = Self::example1(0.0);
        s.name = "hover".into();
        s.duration = duration;
        s.command.kind = CommandKind::Hover;
        let truth = crate::linear_model::LinearHoverModel::new(&s.vehicle_params(), s.sample_time)
            .true_theta();
        s.identification.theta0 = ScalarOrVector::Vector(truth.0.iter().copied().collect());
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return invalid(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.sample_time.is_finite() && self.sample_time > 0.0) {
            return invalid(format!(
                "sample_time must be positive, got {}",
                self.sample_time
            ));
        }
        if self.sample_time > self.duration {
            return invalid("sample_time exceeds duration".into());
        }
        self.vehicle_params()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.vrf_config()
            .and_then(|v| v.validate())
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if !(self.identification.p0_scale.is_finite() && self.identification.p0_scale > 0.0) {
            return invalid("p0_scale must be positive".into());
        }
        let theta0 = self.theta0()?;
        if !theta0.is_finite() {
            return invalid("theta0 must be finite".into());
        }
        for e in &self.events {
            if !(0.0..=self.duration).contains(&e.time) {
                return invalid(format!(
                    "event time {} lies outside [0, {}]",
                    e.time, self.duration
                ));
            }
            if !(e.mass_scale.is_finite() && e.mass_scale > 0.0) {
                return invalid(format!("mass_scale must be positive, got {}", e.mass_scale));
            }
        }
        let sigma = self.noise_sigma()?;
        if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return invalid("noise sigma must be finite and nonnegative".into());
        }
        self.pcac_config()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        VehicleParams {
            mass: self.vehicle.mass,
            inertia: Vector3::from(self.vehicle.inertia),
            gravity: self.vehicle.gravity,
        }
    }

    pub fn vrf_config(&self) -> Result<VrfConfig, crate::error::RlsError> {
        let id = &self.identification;
        let cfg = VrfConfig {
            eta: id.eta,
            tau_n: id.tau_n,
            tau_d: id.tau_d,
            lambda_min: id.lambda_min,
            activation_ratio: 1.0,
        };
        cfg.validate()?;
        cfg.with_significance(id.significance)
    }

    pub fn theta0(&self) -> Result<ThetaVec, ScenarioError> {
        let v = self.identification.theta0.expand(12, "theta0")?;
        Ok(ThetaVec::from_slice(&v))
    }

    pub fn p0(&self) -> Matrix12 {
        Matrix12::identity() * self.identification.p0_scale
    }

    pub fn noise_sigma(&self) -> Result<Vector12, ScenarioError> {
        let v = self.noise.sigma.expand(12, "noise sigma")?;
        Ok(Vector12::from_column_slice(&v))
    }

    pub fn pcac_config(&self) -> PcacConfig {
        let c = &self.controller;
        let stage = Matrix12::from_diagonal(&Vector12::from_column_slice(&c.stage_weight));
        let u_max = Vector4::from(c.u_max);
        let du_max = Vector4::from(c.du_max);
        PcacConfig {
            horizon: c.horizon,
            stage_weight: stage,
            terminal_weight: stage * c.terminal_scale,
            move_weight: Matrix4::from_diagonal(&Vector4::from(c.move_weight)),
            slack_weight: nalgebra::DMatrix::identity(3, 3) * c.slack_weight,
            constraints: OutputConstraints::euler_box(Vector3::from(c.xi_max)),
            u_min: c.u_min.map(Vector4::from).unwrap_or(-u_max),
            u_max,
            du_min: c.du_min.map(Vector4::from).unwrap_or(-du_max),
            du_max,
            gravity_compensation: self.vehicle_params().hover_thrust(),
        }
    }

    pub fn num_steps(&self) -> usize {
        (self.duration / self.sample_time + 1e-9).floor() as usize
    }

    /// First tick `k` with `k·Ts ≥ time`.
    pub fn event_tick(&self, time: f64) -> usize {
        let ratio = time / self.sample_time;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * ratio.abs().max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Plant mass in effect over `[k·Ts, (k+1)·Ts)`.
    pub fn mass_at_tick(&self, k: usize) -> f64 {
        let mut mass = self.vehicle.mass;
        let mut latest: Option<usize> = None;
        for e in &self.events {
            let tick = self.event_tick(e.time);
            if tick <= k && latest.is_none_or(|l| tick >= l) {
                latest = Some(tick);
                mass = self.vehicle.mass * e.mass_scale;
            }
        }
        mass
    }

    /// Thrust feedforward used by the controller over `[k·Ts, (k+1)·Ts)`.
    pub fn thrust_feedforward_at_tick(&self, k: usize) -> f64 {
        let mass = match self.controller.gravity_compensation {
            GravityCompensation::Nominal => self.vehicle.mass,
            GravityCompensation::Actual => self.mass_at_tick(k),
        };
        mass * self.vehicle.gravity
    }
}

fn parse_override_value(value: &str) -> Result<toml::Value, ScenarioError> {
    // Reuse the TOML value grammar: numbers, strings, arrays, booleans.
    let wrapped = format!("v = {value}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => Ok(t.remove("v").expect("key present")),
        Err(_) => Ok(toml::Value::String(value.to_string())),
    }
}

fn set_dotted(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ScenarioError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ScenarioError::Invalid(format!("malformed parameter path '{path}'")));
    }
    let (last, parents) = parts.split_last().expect("nonempty");
    let missing = || ScenarioError::Invalid(format!("parameter path '{path}' not found"));
    let mut node: &mut toml::Value = doc
        .entry(parents.first().copied().unwrap_or(last).to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if parents.is_empty() {
        *node = value;
        return Ok(());
    }
    for part in &parents[1..] {
        node = child(node, part, true).ok_or_else(missing)?;
    }
    match node {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let idx: usize = last.parse().map_err(|_| missing())?;
            *a.get_mut(idx).ok_or_else(missing)? = value;
        }
        _ => return Err(missing()),
    }
    Ok(())
}

fn child<'a>(node: &'a mut toml::Value, key: &str, create: bool) -> Option<&'a mut toml::Value> {
    match node {
        toml::Value::Table(t) => {
            if create && !t.contains_key(key) {
                t.insert(key.to_string(), toml::Value::Table(toml::Table::new()));
            }
            t.get_mut(key)
        }
        toml::Value::Array(a) => a.get_mut(key.parse::<usize>().ok()?),
        _ => None,
    }
}
