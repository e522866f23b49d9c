//! Flat `key=value` run configuration.
//!
//! Every key carries a section prefix (`mission.`, `bundle.`, `map.`,
//! `camera.`, `vehicle.`, `planner.`). Blank lines and `#` comments are
//! ignored, unknown or repeated keys are rejected, and omitted keys keep their
//! defaults. Angles are written in degrees.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::mission::{GoalRegion, MissionConfig, MissionMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{value}` is not a valid {expected} for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Flag,
    Mode,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Real => "number",
            Kind::Count => "non-negative integer",
            Kind::Flag => "boolean (true/false)",
            Kind::Mode => "mode (dynamic/kinematic)",
        }
    }
}

/// A parsed configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Count(u64),
    Flag(bool),
    Mode(MissionMode),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{}` on f64 prints the shortest string that parses back to the same value.
            Value::Real(v) => write!(f, "{v}"),
            Value::Count(v) => write!(f, "{v}"),
            Value::Flag(v) => write!(f, "{v}"),
            Value::Mode(v) => write!(f, "{v}"),
        }
    }
}

fn parse_value(kind: Kind, text: &str) -> Option<Value> {
    match kind {
        Kind::Real => text.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Real),
        Kind::Count => text.parse().ok().map(Value::Count),
        Kind::Flag => text.parse().ok().map(Value::Flag),
        Kind::Mode => text.parse().ok().map(Value::Mode),
    }
}

/// Key, type, default and a one-line description.
const KEYS: &[(&str, Kind, &str, &str)] = &[
    ("mission.takeoff_altitude", Kind::Real, "2", "takeoff altitude (m)"),
    ("mission.max_mission_time", Kind::Real, "600", "simulated time limit (s)"),
    ("mission.stall_cycles", Kind::Count, "60", "consecutive cycles without progress before stopping"),
    ("mission.stall_min_gain", Kind::Real, "0.5", "known volume a cycle must add to count as progress (m^3)"),
    ("mission.vehicle_radius", Kind::Real, "0.4", "collision radius (m)"),
    ("mission.mode", Kind::Mode, "dynamic", "dynamic or kinematic"),
    ("mission.seed", Kind::Count, "0", "run seed, recorded in the summary"),
    ("mission.start_x", Kind::Real, "2.5", "start position x (m)"),
    ("mission.start_y", Kind::Real, "2.5", "start position y (m)"),
    ("mission.start_z", Kind::Real, "0.5", "start position z (m)"),
    ("mission.start_yaw_deg", Kind::Real, "0", "start heading (deg)"),
    ("mission.goal_x", Kind::Real, "0", "goal center x (m)"),
    ("mission.goal_y", Kind::Real, "0", "goal center y (m)"),
    ("mission.goal_z", Kind::Real, "0", "goal center z (m)"),
    ("mission.goal_radius", Kind::Real, "0", "goal radius (m), 0 disables the goal"),
    ("mission.sim_dt", Kind::Real, "0.001", "integration step (s)"),
    ("mission.control_rate", Kind::Real, "200", "control rate (Hz)"),
    ("mission.log_every", Kind::Count, "10", "control ticks between metrics rows"),
    ("mission.record_timing", Kind::Flag, "false", "write measured planning times into metrics.csv"),
    ("bundle.speed", Kind::Real, "5", "linear speed (m/s)"),
    ("bundle.period", Kind::Real, "0.5", "duration of one step (s)"),
    ("bundle.rows", Kind::Count, "9", "pitch samples"),
    ("bundle.cols", Kind::Count, "9", "yaw samples"),
    ("bundle.branches", Kind::Count, "7", "second-step branches per first step"),
    ("bundle.yaw_range_deg", Kind::Real, "60", "first-step yaw half-range (deg)"),
    ("bundle.pitch_range_deg", Kind::Real, "40", "first-step pitch half-range (deg)"),
    ("bundle.branch_yaw_range_deg", Kind::Real, "27", "second-step yaw half-range (deg)"),
    ("bundle.sample_spacing", Kind::Real, "0.25", "maximum arc length between samples (m)"),
    ("map.resolution", Kind::Real, "0.5", "voxel edge (m)"),
    ("map.hit_prob", Kind::Real, "0.65", "hit probability"),
    ("map.miss_prob", Kind::Real, "0.35", "miss probability"),
    ("map.occupancy_threshold", Kind::Real, "0.5", "occupied above this probability"),
    ("map.clamp_min", Kind::Real, "0.12", "lower probability clamp"),
    ("map.clamp_max", Kind::Real, "0.97", "upper probability clamp"),
    ("map.max_depth", Kind::Count, "16", "tree depth of finest voxels"),
    ("map.query_depth", Kind::Count, "15", "depth used by planner lookups"),
    ("camera.h_fov_deg", Kind::Real, "60", "horizontal field of view (deg)"),
    ("camera.v_fov_deg", Kind::Real, "45", "vertical field of view (deg)"),
    ("camera.min_range", Kind::Real, "0.11", "minimum depth (m)"),
    ("camera.max_range", Kind::Real, "15", "maximum depth (m)"),
    ("camera.ray_cols", Kind::Count, "64", "rays per image row"),
    ("camera.ray_rows", Kind::Count, "48", "rays per image column"),
    ("vehicle.mass", Kind::Real, "1.5", "mass (kg)"),
    ("vehicle.gravity", Kind::Real, "9.81", "gravity (m/s^2)"),
    ("vehicle.inertia_xx", Kind::Real, "0.029", "inertia about body x (kg m^2)"),
    ("vehicle.inertia_yy", Kind::Real, "0.029", "inertia about body y (kg m^2)"),
    ("vehicle.inertia_zz", Kind::Real, "0.055", "inertia about body z (kg m^2)"),
    ("vehicle.k_p", Kind::Real, "24", "position gain"),
    ("vehicle.k_v", Kind::Real, "8.4", "velocity gain"),
    ("vehicle.k_r", Kind::Real, "300", "attitude gain"),
    ("vehicle.k_omega", Kind::Real, "6", "angular rate gain"),
    ("planner.weight_free", Kind::Real, "1", "score per free sample"),
    ("planner.weight_unknown", Kind::Real, "3", "score per unknown sample"),
    ("planner.second_step_blocks", Kind::Flag, "false", "occupied second-step samples block the family"),
    ("planner.literal_reset", Kind::Flag, "false", "reset instead of block on occupied samples"),
    ("planner.safety_margin", Kind::Real, "1", "clearance kept around first-step samples (m)"),
    ("planner.stopping_distance", Kind::Real, "0.75", "observed-free distance required past each step end (m)"),
];

fn lookup(key: &str) -> Option<&'static (&'static str, Kind, &'static str, &'static str)> {
    KEYS.iter().find(|k| k.0 == key)
}

/// All configuration values, one per known key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|&(key, kind, default, _)| (key, parse_value(kind, default).expect("valid default")))
            .collect();
        Self { values }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                });
            }
            cfg.set_at(key, value, line)?;
            seen.push(key.to_string());
        }
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let &(name, kind, _, _) = lookup(key).ok_or_else(|| ConfigError::UnknownKey {
            line,
            key: key.into(),
        })?;
        let parsed = parse_value(kind, value).ok_or_else(|| ConfigError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
            expected: kind.describe(),
        })?;
        self.values.insert(name, parsed);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    /// Every key with its value, in documentation order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(key, _, _, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key}={}\n", self.values[key]));
        }
        out
    }

    /// `(key, default, description)` for every accepted key.
    pub fn documented_keys() -> impl Iterator<Item = (&'static str, &'static str, &'static str)> {
        KEYS.iter().map(|&(k, _, d, doc)| (k, d, doc))
    }

    fn real(&self, key: &str) -> f64 {
        match self.values[key] {
            Value::Real(v) => v,
            _ => unreachable!("{key} is a real key"),
        }
    }

    fn count(&self, key: &str) -> u64 {
        match self.values[key] {
            Value::Count(v) => v,
            _ => unreachable!("{key} is a count key"),
        }
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        usize::try_from(self.count(key)).map_err(|_| ConfigError::Invalid(format!("{key} is too large")))
    }

    fn depth(&self, key: &str) -> Result<u32, ConfigError> {
        u32::try_from(self.count(key)).map_err(|_| ConfigError::Invalid(format!("{key} is too large")))
    }

    fn flag(&self, key: &str) -> bool {
        match self.values[key] {
            Value::Flag(v) => v,
            _ => unreachable!("{key} is a flag key"),
        }
    }

    fn angle(&self, key: &str) -> f64 {
        self.real(key).to_radians()
    }

    /// Builds and validates the mission configuration.
    pub fn mission_config(&self) -> Result<MissionConfig, ConfigError> {
        let mode = match self.values["mission.mode"] {
            Value::Mode(m) => m,
            _ => unreachable!("mission.mode is a mode key"),
        };
        let goal_radius = self.real("mission.goal_radius");
        let goal = (goal_radius != 0.0).then(|| GoalRegion {
            center: Vector3::new(
                self.real("mission.goal_x"),
                self.real("mission.goal_y"),
                self.real("mission.goal_z"),
            ),
            radius: goal_radius,
        });
        let mut cfg = MissionConfig {
            takeoff_altitude: self.real("mission.takeoff_altitude"),
            max_mission_time: self.real("mission.max_mission_time"),
            goal,
            stall_cycles: self.usize("mission.stall_cycles")?,
            stall_min_gain: self.real("mission.stall_min_gain"),
            vehicle_radius: self.real("mission.vehicle_radius"),
            mode,
            seed: self.count("mission.seed"),
            start: Vector3::new(
                self.real("mission.start_x"),
                self.real("mission.start_y"),
                self.real("mission.start_z"),
            ),
            start_yaw: self.angle("mission.start_yaw_deg"),
            sim_dt: self.real("mission.sim_dt"),
            control_rate: self.real("mission.control_rate"),
            log_every: self.usize("mission.log_every")?,
            record_timing: self.flag("mission.record_timing"),
            ..MissionConfig::default()
        };
        let b = &mut cfg.bundle;
        b.speed = self.real("bundle.speed");
        b.period = self.real("bundle.period");
        b.rows = self.usize("bundle.rows")?;
        b.cols = self.usize("bundle.cols")?;
        b.branches = self.usize("bundle.branches")?;
        b.yaw_range = self.angle("bundle.yaw_range_deg");
        b.pitch_range = self.angle("bundle.pitch_range_deg");
        b.branch_yaw_range = self.angle("bundle.branch_yaw_range_deg");
        b.sample_spacing = self.real("bundle.sample_spacing");
        let m = &mut cfg.map;
        m.resolution = self.real("map.resolution");
        m.hit_prob = self.real("map.hit_prob");
        m.miss_prob = self.real("map.miss_prob");
        m.occupancy_threshold = self.real("map.occupancy_threshold");
        m.clamp_min = self.real("map.clamp_min");
        m.clamp_max = self.real("map.clamp_max");
        m.max_depth = self.depth("map.max_depth")?;
        m.query_depth = self.depth("map.query_depth")?;
        let c = &mut cfg.camera;
        c.h_fov = self.angle("camera.h_fov_deg");
        c.v_fov = self.angle("camera.v_fov_deg");
        c.min_range = self.real("camera.min_range");
        c.max_range = self.real("camera.max_range");
        c.ray_cols = self.usize("camera.ray_cols")?;
        c.ray_rows = self.usize("camera.ray_rows")?;
        let v = &mut cfg.vehicle;
        v.mass = self.real("vehicle.mass");
        v.gravity = self.real("vehicle.gravity");
        v.inertia = Matrix3::from_diagonal(&Vector3::new(
            self.real("vehicle.inertia_xx"),
            self.real("vehicle.inertia_yy"),
            self.real("vehicle.inertia_zz"),
        ));
        v.k_p = self.real("vehicle.k_p");
        v.k_v = self.real("vehicle.k_v");
        v.k_r = self.real("vehicle.k_r");
        v.k_omega = self.real("vehicle.k_omega");
        let p = &mut cfg.planner;
        p.weights.free = self.real("planner.weight_free");
        p.weights.unknown = self.real("planner.weight_unknown");
        p.second_step_blocks = self.flag("planner.second_step_blocks");
        p.literal_reset = self.flag("planner.literal_reset");
        p.safety_margin = self.real("planner.safety_margin");
        p.stopping_distance = self.real("planner.stopping_distance");
        p.query_depth = cfg.map.query_depth;
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}
