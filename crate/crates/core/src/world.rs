//! Planar world: a stationary host robot with proximity sensors and one moving agent.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::spiking::SpikeTrain;

pub type Point = (f64, f64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("time {t} ms outside trajectory span [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("no sensors mounted")]
    NoSensors,
}

/// Maps an angle to (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

fn snap_unit(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        0.0
    } else if (x - 1.0).abs() < 1e-12 {
        1.0
    } else if (x + 1.0).abs() < 1e-12 {
        -1.0
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading: normalize_angle(heading) }
    }

    /// Expresses a world point as (forward, left) coordinates in the robot frame.
    pub fn to_local(&self, p: Point) -> (f64, f64) {
        let (c, s) = (snap_unit(self.heading.cos()), snap_unit(self.heading.sin()));
        let (dx, dy) = (p.0 - self.x, p.1 - self.y);
        (dx * c + dy * s, dy * c - dx * s)
    }
}

impl Default for Pose {
    /// Robot at the origin facing +y.
    fn default() -> Self {
        Pose::new(0.0, 0.0, PI / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    /// Axis angle relative to the heading, positive to the left (rad).
    pub mount_angle: f64,
    pub cone_half_angle: f64,
    /// Active range (m).
    pub range: f64,
    /// Peak spike rate (Hz) reached at zero distance.
    pub r_max: f64,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(WorldError::InvalidSensor("range must be positive".into()));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(WorldError::InvalidSensor("r_max must be positive".into()));
        }
        if !(self.cone_half_angle > 0.0 && self.cone_half_angle <= PI) {
            return Err(WorldError::InvalidSensor("cone half-angle must lie in (0, pi]".into()));
        }
        if !self.mount_angle.is_finite() {
            return Err(WorldError::InvalidSensor("mount angle must be finite".into()));
        }
        Ok(())
    }
}

/// Six 30° cones fanned across the front half-plane, listed left to right.
pub fn default_sensor_array() -> Vec<SensorSpec> {
    [75.0f64, 45.0, 15.0, -15.0, -45.0, -75.0]
        .iter()
        .map(|deg| SensorSpec {
            mount_angle: deg.to_radians(),
            cone_half_angle: 15f64.to_radians(),
            range: 2.0,
            r_max: 200.0,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    /// Straight run from `start` to `target` at `speed` (m/s), then hold at `target`.
    Approach { start: Point, target: Point, speed: f64 },
    /// Hold at `start` for `delay` ms, then straight run to `target` and hold there.
    Recede { start: Point, target: Point, speed: f64, delay: f64 },
    /// Pass parallel to the x axis at height `offset`, crossing x = 0 at `center_time` ms.
    Tangent { offset: f64, speed: f64, center_time: f64, sweep: Sweep },
    /// Piecewise-linear path through timestamped points.
    Waypoints { points: Vec<(f64, Point)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub duration: f64,
}

fn lerp(a: Point, b: Point, f: f64) -> Point {
    (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
}

fn travel(start: Point, target: Point, speed: f64, elapsed: f64) -> Point {
    let length = (target.0 - start.0).hypot(target.1 - start.1);
    if length == 0.0 || elapsed <= 0.0 {
        return start;
    }
    let covered = speed * elapsed / 1000.0;
    if covered >= length {
        target
    } else {
        lerp(start, target, covered / length)
    }
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidTrajectory(m.to_string()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        match &self.kind {
            TrajectoryKind::Approach { speed, .. } | TrajectoryKind::Tangent { speed, .. } => {
                if !(speed.is_finite() && *speed > 0.0) {
                    return bad("speed must be positive and finite");
                }
            }
            TrajectoryKind::Recede { speed, delay, .. } => {
                if !(speed.is_finite() && *speed > 0.0) {
                    return bad("speed must be positive and finite");
                }
                if !(delay.is_finite() && *delay >= 0.0) {
                    return bad("delay must be nonnegative");
                }
            }
            TrajectoryKind::Waypoints { points } => {
                if points.is_empty() {
                    return bad("waypoint list is empty");
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("waypoint timestamps must be strictly increasing");
                }
            }
        }
        Ok(())
    }

    /// Time (ms) at which a straight-run trajectory reaches its target.
    pub fn arrival_time(&self) -> Option<f64> {
        match &self.kind {
            TrajectoryKind::Approach { start, target, speed } => {
                Some((target.0 - start.0).hypot(target.1 - start.1) / speed * 1000.0)
            }
            TrajectoryKind::Recede { start, target, speed, delay } => {
                Some(delay + (target.0 - start.0).hypot(target.1 - start.1) / speed * 1000.0)
            }
            _ => None,
        }
    }

    /// Reflection about the y axis.
    pub fn mirrored(&self) -> Trajectory {
        let m = |p: &Point| (-p.0, p.1);
        let kind = match &self.kind {
            TrajectoryKind::Approach { start, target, speed } => {
                TrajectoryKind::Approach { start: m(start), target: m(target), speed: *speed }
            }
            TrajectoryKind::Recede { start, target, speed, delay } => {
                TrajectoryKind::Recede { start: m(start), target: m(target), speed: *speed, delay: *delay }
            }
            TrajectoryKind::Tangent { offset, speed, center_time, sweep } => TrajectoryKind::Tangent {
                offset: *offset,
                speed: *speed,
                center_time: *center_time,
                sweep: match sweep {
                    Sweep::LeftToRight => Sweep::RightToLeft,
                    Sweep::RightToLeft => Sweep::LeftToRight,
                },
            },
            TrajectoryKind::Waypoints { points } => {
                TrajectoryKind::Waypoints { points: points.iter().map(|(t, p)| (*t, m(p))).collect() }
            }
        };
        Trajectory { kind, duration: self.duration }
    }
}

pub fn agent_position(traj: &Trajectory, t: f64) -> Result<Point, WorldError> {
    if !(0.0..=traj.duration).contains(&t) {
        return Err(WorldError::OutOfRange { t, duration: traj.duration });
    }
    Ok(match &traj.kind {
        TrajectoryKind::Approach { start, target, speed } => travel(*start, *target, *speed, t),
        TrajectoryKind::Recede { start, target, speed, delay } => travel(*start, *target, *speed, t - delay),
        TrajectoryKind::Tangent { offset, speed, center_time, sweep } => {
            let x = speed * (t - center_time) / 1000.0;
            match sweep {
                Sweep::LeftToRight => (x, *offset),
                Sweep::RightToLeft => (-x, *offset),
            }
        }
        TrajectoryKind::Waypoints { points } => {
            let i = points.partition_point(|(ts, _)| *ts <= t);
            if i == 0 {
                points[0].1
            } else if i == points.len() {
                points[points.len() - 1].1
            } else {
                let (t0, p0) = points[i - 1];
                let (t1, p1) = points[i];
                lerp(p0, p1, (t - t0) / (t1 - t0))
            }
        }
    })
}

/// Distance to the agent if it lies inside the sensor's cone and range.
pub fn sensor_distance(robot: &Pose, sensor: &SensorSpec, agent: Point) -> Option<f64> {
    let (forward, left) = robot.to_local(agent);
    let d = forward.hypot(left);
    if d > sensor.range {
        return None;
    }
    let bearing = left.atan2(forward);
    let off = normalize_angle(bearing - sensor.mount_angle);
    (off.abs() <= sensor.cone_half_angle).then_some(d)
}

pub fn rate_from_distance(d: f64, sensor: &SensorSpec) -> Result<f64, WorldError> {
    if d < 0.0 || d.is_nan() {
        return Err(WorldError::NegativeDistance(d));
    }
    Ok(sensor.r_max * (1.0 - d / sensor.range).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingMode {
    #[default]
    DeterministicPhase,
    Poisson,
}

const PHASE_UNITS: u64 = 1_000_000_000;

/// Converts a time-varying rate into spikes on the `dt` grid.
pub fn encode_spikes(
    rate_fn: impl Fn(f64) -> f64,
    duration: f64,
    dt: f64,
    mode: EncodingMode,
    seed: u64,
) -> SpikeTrain {
    let steps = crate::spiking::step_count(duration, dt);
    let mut times = Vec::new();
    match mode {
        EncodingMode::DeterministicPhase => {
            // Phase is kept in integer units so that constant rates integrate without drift.
            let mut phase: u64 = 0;
            for k in 0..steps {
                let t = k as f64 * dt;
                let before = phase / PHASE_UNITS;
                phase += (rate_fn(t).max(0.0) * dt / 1000.0 * PHASE_UNITS as f64).round() as u64;
                if phase / PHASE_UNITS > before {
                    times.push(t);
                }
            }
        }
        EncodingMode::Poisson => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..steps {
                let t = k as f64 * dt;
                let p = (rate_fn(t).max(0.0) * dt / 1000.0).min(1.0);
                if rng.random::<f64>() < p {
                    times.push(t);
                }
            }
        }
    }
    SpikeTrain { times }
}

/// Seed for sensor `index` derived from a scenario seed.
pub fn channel_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

pub fn sense_scenario(
    robot: &Pose,
    sensors: &[SensorSpec],
    traj: &Trajectory,
    dt: f64,
    mode: EncodingMode,
    seed: u64,
) -> Result<Vec<SpikeTrain>, WorldError> {
    if sensors.is_empty() {
        return Err(WorldError::NoSensors);
    }
    for s in sensors {
        s.validate()?;
    }
    traj.validate()?;
    let steps = crate::spiking::step_count(traj.duration, dt);
    let positions = (0..steps).map(|k| agent_position(traj, k as f64 * dt)).collect::<Result<Vec<_>, _>>()?;
    sensors
        .iter()
        .enumerate()
        .map(|(i, sensor)| {
            let rates = positions
                .iter()
                .map(|&p| match sensor_distance(robot, sensor, p) {
                    Some(d) => rate_from_distance(d, sensor),
                    None => Ok(0.0),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let rate_at = |t: f64| rates[((t / dt).round() as usize).min(rates.len().saturating_sub(1))];
            Ok(encode_spikes(rate_at, traj.duration, dt, mode, channel_seed(seed, i)))
        })
        .collect()
}
