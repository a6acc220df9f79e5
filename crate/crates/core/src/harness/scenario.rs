//! Scenario documents: a single JSON object with fixed top-level keys.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{CtdParams, ReadoutParams, Variant, DEFAULT_JUDGE_WEIGHTS};
use crate::correlation::CorrelationParams;
use crate::world::{EncodingMode, Point, Pose, SensorSpec, Sweep, Trajectory, TrajectoryKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeDoc {
    pub dt: f64,
    pub duration: f64,
}

impl Default for TimeDoc {
    fn default() -> Self {
        TimeDoc { dt: 1.0, duration: 5000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotDoc {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

impl Default for RobotDoc {
    fn default() -> Self {
        RobotDoc { x: 0.0, y: 0.0, heading_deg: 90.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorDoc {
    pub mount_deg: f64,
    #[serde(default = "default_half_angle")]
    pub half_angle_deg: f64,
    #[serde(default = "default_range")]
    pub range: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_half_angle() -> f64 {
    15.0
}
fn default_range() -> f64 {
    2.0
}
fn default_r_max() -> f64 {
    200.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorsDoc {
    pub encoding: EncodingMode,
    /// Listed left to right.
    pub layout: Vec<SensorDoc>,
}

impl Default for SensorsDoc {
    fn default() -> Self {
        SensorsDoc {
            encoding: EncodingMode::DeterministicPhase,
            layout: [75.0, 45.0, 15.0, -15.0, -45.0, -75.0]
                .iter()
                .map(|&mount_deg| SensorDoc {
                    mount_deg,
                    half_angle_deg: default_half_angle(),
                    range: default_range(),
                    r_max: default_r_max(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointDoc {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

fn approach_start() -> [f64; 2] {
    [-1.6, 1.6]
}
fn approach_target() -> [f64; 2] {
    [0.15, 0.5]
}
fn default_speed() -> f64 {
    0.5
}
fn default_recede_delay() -> f64 {
    500.0
}
fn default_offset() -> f64 {
    1.0
}
fn default_sweep() -> Sweep {
    Sweep::LeftToRight
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryDoc {
    Approach {
        #[serde(default = "approach_start")]
        start: [f64; 2],
        #[serde(default = "approach_target")]
        target: [f64; 2],
        #[serde(default = "default_speed")]
        speed: f64,
    },
    Recede {
        #[serde(default = "approach_target")]
        start: [f64; 2],
        #[serde(default = "approach_start")]
        target: [f64; 2],
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default = "default_recede_delay")]
        delay: f64,
    },
    Tangent {
        #[serde(default = "default_offset")]
        offset: f64,
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_time: Option<f64>,
        #[serde(default = "default_sweep")]
        direction: Sweep,
    },
    Waypoints {
        points: Vec<WaypointDoc>,
    },
}

impl Default for TrajectoryDoc {
    fn default() -> Self {
        TrajectoryDoc::Approach { start: approach_start(), target: approach_target(), speed: default_speed() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitDoc {
    pub variant: Variant,
    pub bridge_units: bool,
    /// Absent means the built-in tuned weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge_weights: Option<[[f64; 3]; 3]>,
}

impl Default for CircuitDoc {
    fn default() -> Self {
        let p = CtdParams::default();
        CircuitDoc { variant: Variant::Ddm, bridge_units: p.bridge_units, judge_weights: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioDoc {
    pub name: String,
    pub time: TimeDoc,
    pub seed: u64,
    pub robot: RobotDoc,
    pub sensors: SensorsDoc,
    pub trajectory: TrajectoryDoc,
    pub circuit: CircuitDoc,
    pub overrides: BTreeMap<String, f64>,
}

/// Every key accepted in `overrides`.
pub const OVERRIDE_KEYS: &[&str] = &[
    "neuron.tau_m",
    "neuron.v_rest",
    "neuron.v_threshold",
    "neuron.v_reset",
    "neuron.refractory",
    "port.w_ext",
    "pdd.inhibition",
    "ddm.input",
    "ddm.mutual",
    "ddm.cross_excitatory",
    "ddm.cross_inhibitory",
    "readout.window",
    "readout.stride",
    "readout.theta_active",
    "readout.rate_margin",
    "correlation.bin_width",
    "correlation.max_lag",
    "correlation.theta_m",
    "correlation.theta_rate",
    "output.potential_subsample",
];

/// A validated scenario with every parameter resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub name: String,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub encoding: EncodingMode,
    pub robot: Pose,
    pub sensors: Vec<SensorSpec>,
    pub trajectory: Trajectory,
    pub variant: Variant,
    pub ctd: CtdParams,
    pub readout: ReadoutParams,
    pub correlation: CorrelationParams,
    pub potential_subsample: usize,
}

impl Scenario {
    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut doc = self.doc.clone();
        doc.seed = seed;
        Scenario::from_doc(doc).expect("seed change keeps a valid scenario valid")
    }

    pub fn with_variant(&self, variant: Variant) -> Scenario {
        let mut s = self.clone();
        s.variant = variant;
        s.doc.circuit.variant = variant;
        s
    }

    pub fn to_json(&self) -> String {
        emit_scenario(&self.doc)
    }

    pub fn from_doc(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
        resolve(doc)
    }
}

fn point(p: [f64; 2]) -> Point {
    (p[0], p[1])
}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        match unknown_field(&message) {
            Some(key) => ScenarioError::UnknownKey(key),
            None => ScenarioError::Parse {
                line: e.line(),
                column: e.column(),
                message: message.rsplit_once(" at line ").map_or(message.clone(), |(m, _)| m.to_string()),
            },
        }
    })?;
    resolve(doc)
}

pub fn emit_scenario(doc: &ScenarioDoc) -> String {
    serde_json::to_string_pretty(doc).expect("scenario documents always serialize")
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

fn finite_positive(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite")))
    }
}

/// Position along the segment a→b, as a fraction, closest to `c`.
fn closest_fraction(a: Point, b: Point, c: Point) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    -((a.0 - c.0) * vx + (a.1 - c.1) * vy) / len2
}

fn resolve(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
    for key in doc.overrides.keys() {
        if !OVERRIDE_KEYS.contains(&key.as_str()) {
            return Err(ScenarioError::UnknownKey(format!("overrides.{key}")));
        }
    }
    finite_positive("time.dt", doc.time.dt)?;
    finite_positive("time.duration", doc.time.duration)?;
    if !(doc.robot.x.is_finite() && doc.robot.y.is_finite() && doc.robot.heading_deg.is_finite()) {
        return Err(invalid("robot pose must be finite"));
    }
    let n = doc.sensors.layout.len();
    if n == 0 || !n.is_multiple_of(3) {
        return Err(invalid(format!("sensor count {n} must be positive and divisible by 3")));
    }
    let robot = Pose::new(doc.robot.x, doc.robot.y, doc.robot.heading_deg.to_radians());
    let sensors: Vec<SensorSpec> = doc
        .sensors
        .layout
        .iter()
        .map(|s| SensorSpec {
            mount_angle: s.mount_deg.to_radians(),
            cone_half_angle: s.half_angle_deg.to_radians(),
            range: s.range,
            r_max: s.r_max,
        })
        .collect();
    for (i, s) in sensors.iter().enumerate() {
        s.validate().map_err(|e| invalid(format!("sensor {i}: {e}")))?;
    }

    let duration = doc.time.duration;
    let here = (robot.x, robot.y);
    let kind = match &doc.trajectory {
        TrajectoryDoc::Approach { start, target, speed } => {
            let (a, b) = (point(*start), point(*target));
            if a == b {
                return Err(invalid("approach start and target coincide"));
            }
            if closest_fraction(a, b, here) < 1.0 {
                return Err(invalid("approach path must close the range to the robot all the way to the target"));
            }
            TrajectoryKind::Approach { start: a, target: b, speed: *speed }
        }
        TrajectoryDoc::Recede { start, target, speed, delay } => {
            let (a, b) = (point(*start), point(*target));
            if a == b {
                return Err(invalid("recede start and target coincide"));
            }
            if closest_fraction(a, b, here) > 0.0 {
                return Err(invalid("recede path must open the range to the robot from the start"));
            }
            TrajectoryKind::Recede { start: a, target: b, speed: *speed, delay: *delay }
        }
        TrajectoryDoc::Tangent { offset, speed, center_time, direction } => TrajectoryKind::Tangent {
            offset: *offset,
            speed: *speed,
            center_time: center_time.unwrap_or(duration / 2.0),
            sweep: *direction,
        },
        TrajectoryDoc::Waypoints { points } => {
            TrajectoryKind::Waypoints { points: points.iter().map(|w| (w.t, (w.x, w.y))).collect() }
        }
    };
    let trajectory = Trajectory { kind, duration };
    trajectory.validate().map_err(|e| invalid(e.to_string()))?;

    let mut ctd = CtdParams {
        bridge_units: doc.circuit.bridge_units,
        judge_weights: doc.circuit.judge_weights.unwrap_or(DEFAULT_JUDGE_WEIGHTS),
        ..CtdParams::default()
    };
    if ctd.judge_weights.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(invalid("judge weights must be finite and nonnegative"));
    }
    let mut readout = ReadoutParams::default();
    let mut correlation = CorrelationParams::default();
    let mut potential_subsample = 1usize;
    for (key, &value) in &doc.overrides {
        if !value.is_finite() {
            return Err(invalid(format!("override {key} must be finite")));
        }
        let count = || -> Result<usize, ScenarioError> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(invalid(format!("override {key} must be a positive integer")))
            }
        };
        match key.as_str() {
            "neuron.tau_m" => ctd.neuron.tau_m = value,
            "neuron.v_rest" => ctd.neuron.v_rest = value,
            "neuron.v_threshold" => ctd.neuron.v_threshold = value,
            "neuron.v_reset" => ctd.neuron.v_reset = value,
            "neuron.refractory" => ctd.neuron.refractory = value,
            "port.w_ext" => ctd.w_ext = value,
            "pdd.inhibition" => ctd.pdd_inhibition = value,
            "ddm.input" => ctd.ddm_input = value,
            "ddm.mutual" => ctd.ddm_mutual = value,
            "ddm.cross_excitatory" => ctd.ddm_cross_excitatory = value,
            "ddm.cross_inhibitory" => ctd.ddm_cross_inhibitory = value,
            "readout.window" => readout.window = value,
            "readout.stride" => readout.stride = value,
            "readout.theta_active" => readout.theta_active = count()?,
            "readout.rate_margin" => readout.rate_margin = value,
            "correlation.bin_width" => correlation.bin_width = value,
            "correlation.max_lag" => correlation.max_lag = count()? as i64,
            "correlation.theta_m" => correlation.theta_m = value,
            "correlation.theta_rate" => correlation.theta_rate = value,
            "output.potential_subsample" => potential_subsample = count()?,
            _ => unreachable!("override keys are checked above"),
        }
    }
    ctd.neuron.validate().map_err(|e| invalid(e.to_string()))?;
    let magnitudes = [
        ctd.w_ext,
        ctd.pdd_inhibition,
        ctd.ddm_input,
        ctd.ddm_mutual,
        ctd.ddm_cross_excitatory,
        ctd.ddm_cross_inhibitory,
    ];
    if magnitudes.iter().any(|m| *m < 0.0) {
        return Err(invalid("synaptic magnitudes must be nonnegative"));
    }
    finite_positive("readout.window", readout.window)?;
    finite_positive("readout.stride", readout.stride)?;
    if readout.window > duration {
        return Err(invalid("readout window longer than the scenario"));
    }
    if readout.rate_margin < 0.0 || correlation.theta_rate < 0.0 {
        return Err(invalid("rate margins must be nonnegative"));
    }
    finite_positive("correlation.bin_width", correlation.bin_width)?;

    Ok(Scenario {
        name: doc.name.clone(),
        dt: doc.time.dt,
        duration,
        seed: doc.seed,
        encoding: doc.sensors.encoding,
        robot,
        sensors,
        trajectory,
        variant: doc.circuit.variant,
        ctd,
        readout,
        correlation,
        potential_subsample,
        doc,
    })
}
