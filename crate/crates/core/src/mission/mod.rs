//! The exploration loop: take off, then repeat sense, map, plan and fly one
//! first step until the goal is reached, nothing unknown is left in reach,
//! time runs out or the vehicle hits something.

mod artifacts;
mod metrics;

pub use artifacts::{parse_map_csv, write_artifacts, write_map_csv, write_ply, write_topdown_svg};
pub use metrics::{compute_summary, MetricsRow, MissionMetrics, MissionSummary, PathSample, PlanRecord};

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use thiserror::Error;

use crate::peacock::{precompute_bundle, BundleError, BundleParams, PeacockBundle};
use crate::planner::{classify_sample, plan_step, PlanDecision, PlannerParams};
use crate::sensor_world::{render_depth, CameraModel, Pose, World};
use crate::trajgen::{solve_min_snap_segment, BoundaryState, Segment3D, TrajError};
use crate::vehicle::{follow_exact, yaw_rotation, Tracker, VehicleError, VehicleParams, VehicleState, YawMode};
use crate::voxmap::{CellState, MapError, MapParams, OccupancyOctree};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid mission configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Trajectory(#[from] TrajError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionMode {
    /// Closed-loop rigid-body simulation under the geometric controller.
    Dynamic,
    /// The vehicle sits exactly on each segment.
    Kinematic,
}

impl fmt::Display for MissionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissionMode::Dynamic => "dynamic",
            MissionMode::Kinematic => "kinematic",
        })
    }
}

impl FromStr for MissionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dynamic" => Ok(MissionMode::Dynamic),
            "kinematic" => Ok(MissionMode::Kinematic),
            other => Err(format!("unknown mission mode `{other}` (expected dynamic or kinematic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Stalled,
    TimedOut,
    CollisionFailure,
}

impl Outcome {
    /// Completed and Stalled both mean the mission ended normally.
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Completed | Outcome::Stalled)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "Completed",
            Outcome::Stalled => "Stalled",
            Outcome::TimedOut => "TimedOut",
            Outcome::CollisionFailure => "CollisionFailure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRegion {
    pub center: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub takeoff_altitude: f64,
    pub max_mission_time: f64,
    pub goal: Option<GoalRegion>,
    pub stall_cycles: usize,
    /// A cycle whose scan adds less known volume than this (m^3) counts
    /// toward a stall.
    pub stall_min_gain: f64,
    pub vehicle_radius: f64,
    pub mode: MissionMode,
    /// Recorded with the run. The simulation itself has no random inputs.
    pub seed: u64,
    pub start: Vector3<f64>,
    pub start_yaw: f64,
    /// Integration step (s).
    pub sim_dt: f64,
    /// Controller and clearance-monitor rate (Hz).
    pub control_rate: f64,
    /// A metrics row is logged every this many control ticks.
    pub log_every: usize,
    /// Write measured planning times into the metrics table. Off by default
    /// because wall-clock values make the table differ between runs.
    pub record_timing: bool,
    pub bundle: BundleParams,
    pub map: MapParams,
    pub camera: CameraModel,
    pub vehicle: VehicleParams,
    pub planner: PlannerParams,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            takeoff_altitude: 2.0,
            max_mission_time: 600.0,
            goal: None,
            stall_cycles: 60,
            stall_min_gain: 0.5,
            vehicle_radius: 0.4,
            mode: MissionMode::Dynamic,
            seed: 0,
            start: Vector3::new(2.5, 2.5, 0.5),
            start_yaw: 0.0,
            sim_dt: 0.001,
            control_rate: 200.0,
            log_every: 10,
            record_timing: false,
            bundle: BundleParams::default(),
            map: MapParams::default(),
            camera: CameraModel::default(),
            vehicle: VehicleParams::default(),
            planner: PlannerParams::default(),
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |m: String| Err(MissionError::InvalidConfig(m));
        let positive = [
            ("takeoff_altitude", self.takeoff_altitude),
            ("max_mission_time", self.max_mission_time),
            ("vehicle_radius", self.vehicle_radius),
            ("sim_dt", self.sim_dt),
            ("control_rate", self.control_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if let Some(g) = &self.goal {
            if !(g.radius > 0.0 && g.center.iter().all(|c| c.is_finite())) {
                return bad("goal radius must be positive".into());
            }
        }
        if !(self.stall_min_gain >= 0.0 && self.stall_min_gain.is_finite()) {
            return bad("stall_min_gain must be non-negative".into());
        }
        if self.stall_cycles == 0 || self.log_every == 0 {
            return bad("stall_cycles and log_every must be at least 1".into());
        }
        if !(self.start.iter().all(|c| c.is_finite()) && self.start_yaw.is_finite()) {
            return bad("start pose must be finite".into());
        }
        if self.sim_dt > 0.01 {
            return Err(VehicleError::InvalidTimestep(self.sim_dt).into());
        }
        if self.control_rate < 100.0 {
            return Err(VehicleError::InvalidControlRate(self.control_rate).into());
        }
        self.bundle.validate()?;
        self.map.validate()?;
        self.camera.validate().map_err(MissionError::InvalidConfig)?;
        self.vehicle.validate()?;
        self.planner.validate().map_err(MissionError::InvalidConfig)?;
        Ok(())
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct MissionRun {
    pub metrics: MissionMetrics,
    /// Every control tick.
    pub path: Vec<PathSample>,
    pub planner_log: Vec<PlanRecord>,
    pub map: OccupancyOctree,
    /// Path length flown during the scripted takeoff.
    pub takeoff_length: f64,
}

enum Flight {
    Finished,
    Aborted,
    Collided,
}

struct Mission<'a> {
    world: &'a World,
    cfg: &'a MissionConfig,
    bundle: PeacockBundle,
    map: OccupancyOctree,
    state: VehicleState,
    t: f64,
    tick: usize,
    path_length: f64,
    cycle: usize,
    score: f64,
    blocked: usize,
    plan_ms: f64,
    series: Vec<MetricsRow>,
    path: Vec<PathSample>,
    planner_log: Vec<PlanRecord>,
    recoveries: usize,
    aborts: usize,
}

impl<'a> Mission<'a> {
    fn period(&self) -> f64 {
        let substeps = ((1.0 / self.cfg.control_rate / self.cfg.sim_dt).round()).max(1.0);
        substeps * self.cfg.sim_dt
    }

    fn known_volume(&self) -> f64 {
        let (free, occ) = self.map.mapped_volumes();
        free + occ
    }

    fn push_row(&mut self) {
        let (free, occ) = self.map.mapped_volumes();
        let s = &self.state;
        self.series.push(MetricsRow {
            t: self.t,
            position: s.position,
            velocity: s.velocity,
            yaw: s.yaw(),
            path_length: self.path_length,
            free_volume: free,
            occupied_volume: occ,
            known_volume: free + occ,
            cycle: self.cycle,
            score: self.score,
            blocked_count: self.blocked,
            plan_ms: self.plan_ms,
        });
    }

    /// Book-keeping after the state advanced one control tick. Returns the clearance.
    fn after_tick(&mut self, previous: &Vector3<f64>) -> f64 {
        self.tick += 1;
        self.path_length += (self.state.position - previous).norm();
        let clearance = self.world.clearance(&self.state.position);
        self.path.push(PathSample {
            t: self.t,
            position: self.state.position,
            clearance,
        });
        if self.tick % self.cfg.log_every == 0 {
            self.push_row();
        }
        clearance
    }

    fn check(&self, clearance: f64, abortable: bool) -> Option<Flight> {
        if clearance <= self.cfg.vehicle_radius {
            Some(Flight::Collided)
        } else if abortable && clearance < 2.0 * self.cfg.vehicle_radius {
            Some(Flight::Aborted)
        } else {
            None
        }
    }

    /// Flies a whole segment, monitoring clearance every control tick.
    fn fly(&mut self, segment: &Segment3D, yaw: YawMode, abortable: bool) -> Result<Flight, MissionError> {
        match self.cfg.mode {
            MissionMode::Dynamic => {
                let params = self.cfg.vehicle.clone();
                let mut tracker = Tracker::new(
                    self.state,
                    segment,
                    yaw,
                    &params,
                    self.cfg.sim_dt,
                    self.cfg.control_rate,
                )?;
                let period = tracker.control_period();
                while !tracker.is_done() {
                    let previous = self.state.position;
                    tracker.step()?;
                    self.state = *tracker.state();
                    self.t += period;
                    let clearance = self.after_tick(&previous);
                    if let Some(stop) = self.check(clearance, abortable) {
                        return Ok(stop);
                    }
                }
            }
            MissionMode::Kinematic => {
                let period = self.period();
                let duration = segment.duration();
                let ticks = ((duration / period) - 1e-9).ceil().max(1.0) as usize;
                let mut heading = match yaw {
                    YawMode::Hold(y) | YawMode::FollowVelocity(y) => y,
                };
                for k in 1..=ticks {
                    let previous = self.state.position;
                    let local = (k as f64 * period).min(duration);
                    let mut next = follow_exact(segment, local, heading);
                    if let YawMode::Hold(y) = yaw {
                        next.rotation = yaw_rotation(y);
                        next.omega = Vector3::zeros();
                    }
                    heading = next.yaw();
                    self.state = next;
                    self.t += period;
                    let clearance = self.after_tick(&previous);
                    if let Some(stop) = self.check(clearance, abortable) {
                        return Ok(stop);
                    }
                }
            }
        }
        Ok(Flight::Finished)
    }

    fn takeoff(&mut self) -> Result<Flight, MissionError> {
        let start = self.state.position;
        let top = Vector3::new(start.x, start.y, self.cfg.takeoff_altitude);
        let climb = (top.z - start.z).abs();
        if climb < 1e-9 {
            return Ok(Flight::Finished);
        }
        let segment = solve_min_snap_segment(&BoundaryState::at_rest(start), &BoundaryState::at_rest(top), climb.max(1.0))?;
        let yaw = self.state.yaw();
        self.fly(&segment, YawMode::Hold(yaw), false)
    }

    /// Stops, then turns 45 degrees in place to re-aim the sensor.
    fn recover(&mut self) -> Result<Flight, MissionError> {
        self.recoveries += 1;
        let yaw = self.state.yaw();
        let target_yaw = yaw + FRAC_PI_4;
        let period = self.cfg.bundle.period;
        let hold_at = match self.cfg.mode {
            MissionMode::Dynamic => {
                let p = self.state.position;
                let v = self.state.velocity;
                if v.norm() > 0.1 {
                    // Stop within the distance the planner kept clear past each endpoint.
                    let stopping = self.cfg.planner.stopping_distance.max(0.05);
                    let braking = (2.0 * stopping / v.norm()).min(period);
                    let stop = p + v * (braking / 2.0);
                    let segment = solve_min_snap_segment(
                        &BoundaryState::with_velocity(p, v),
                        &BoundaryState::at_rest(stop),
                        braking,
                    )?;
                    if let Flight::Collided = self.fly(&segment, YawMode::Hold(yaw), false)? {
                        return Ok(Flight::Collided);
                    }
                }
                self.state.position
            }
            MissionMode::Kinematic => {
                self.state.velocity = Vector3::zeros();
                self.state.position
            }
        };
        let target = self.escape_point(&hold_at).unwrap_or(hold_at);
        let duration = period.max(2.0 * (target - hold_at).norm());
        let hold = solve_min_snap_segment(&BoundaryState::at_rest(hold_at), &BoundaryState::at_rest(target), duration)?;
        self.fly(&hold, YawMode::Hold(target_yaw), false)
    }

    /// When `p` itself violates the planner's safety margin no family can pass,
    /// so step back to the nearest point that clears it along known-free space.
    fn escape_point(&self, p: &Vector3<f64>) -> Option<Vector3<f64>> {
        const DIRECTIONS: usize = 16;
        let margin = self.cfg.planner.safety_margin;
        let depth = self.cfg.planner.query_depth;
        if margin <= 0.0 || classify_sample(&self.map, p, depth, margin) != CellState::Occupied {
            return None;
        }
        let known_free = |q: &Vector3<f64>| classify_sample(&self.map, q, depth, 0.0) == CellState::Free;
        for step in 1..=8 {
            let reach = 0.25 * step as f64;
            for k in 0..DIRECTIONS {
                let angle = std::f64::consts::TAU * k as f64 / DIRECTIONS as f64;
                let dir = Vector3::new(angle.cos(), angle.sin(), 0.0);
                let q = p + dir * reach;
                if classify_sample(&self.map, &q, depth, margin) == CellState::Occupied {
                    continue;
                }
                if (1..=step).all(|j| known_free(&(p + dir * (0.25 * j as f64)))) {
                    return Some(q);
                }
            }
        }
        None
    }

    fn at_goal(&self) -> bool {
        self.cfg
            .goal
            .as_ref()
            .is_some_and(|g| (self.state.position - g.center).norm() <= g.radius)
    }

    fn sense(&mut self) -> Result<(), MissionError> {
        let pose = Pose {
            position: self.state.position,
            rotation: self.state.rotation,
        };
        let image = render_depth(self.world, &pose, &self.cfg.camera);
        let max_range = self.cfg.camera.max_range;
        let endpoints = image.ray_endpoints(2.0 * max_range);
        self.map.insert_scan(&self.state.position, &endpoints, max_range)?;
        Ok(())
    }

    fn run(&mut self) -> Result<(Outcome, f64), MissionError> {
        self.push_row();
        if self.world.clearance(&self.state.position) <= self.cfg.vehicle_radius {
            return Ok((Outcome::CollisionFailure, 0.0));
        }
        if let Flight::Collided = self.takeoff()? {
            return Ok((Outcome::CollisionFailure, self.path_length));
        }
        let takeoff_length = self.path_length;
        let mut stall = 0;
        let mut known = self.known_volume();
        let outcome = loop {
            if self.at_goal() {
                break Outcome::Completed;
            }
            if self.t >= self.cfg.max_mission_time {
                break Outcome::TimedOut;
            }
            self.sense()?;
            let gained = self.known_volume() - known;
            known += gained;
            let yaw = self.state.yaw();
            let started = Instant::now();
            let plan = plan_step(&self.map, &self.bundle, &self.state.position, yaw, &self.cfg.planner);
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            self.cycle += 1;
            self.blocked = plan.scores.blocked_count();
            self.plan_ms = if self.cfg.record_timing { elapsed } else { 0.0 };
            let (row, col) = match plan.decision {
                PlanDecision::Selected { row, col } => (Some(row), Some(col)),
                PlanDecision::AllBlocked => (None, None),
            };
            self.score = match plan.decision {
                PlanDecision::Selected { row, col } => plan.scores.score(row, col),
                PlanDecision::AllBlocked => 0.0,
            };
            self.planner_log.push(PlanRecord {
                cycle: self.cycle,
                t: self.t,
                row,
                col,
                score: self.score,
                blocked_count: self.blocked,
                unknown_in_reach: plan.scores.has_unknown_in_reach(),
                plan_ms: elapsed,
            });
            if plan.decision == PlanDecision::AllBlocked
                || !plan.scores.has_unknown_in_reach()
                || gained < self.cfg.stall_min_gain
            {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= self.cfg.stall_cycles {
                break Outcome::Stalled;
            }
            let flight = match plan.segment {
                Some(segment) => match self.fly(&segment, YawMode::FollowVelocity(yaw), true)? {
                    Flight::Aborted => {
                        self.aborts += 1;
                        self.recover()?
                    }
                    other => other,
                },
                None => self.recover()?,
            };
            if let Flight::Collided = flight {
                break Outcome::CollisionFailure;
            }
        };
        if self.series.last().map(|r| r.t) != Some(self.t) {
            self.push_row();
        }
        Ok((outcome, takeoff_length))
    }
}

/// Runs one exploration mission in `world`. The result depends only on the
/// world and the configuration.
pub fn run_mission(world: &World, config: &MissionConfig) -> Result<MissionRun, MissionError> {
    config.validate()?;
    if !world.bounds.contains(&config.start) {
        return Err(MissionError::InvalidConfig("start position lies outside the world".into()));
    }
    let mut planner = config.planner.clone();
    planner.query_depth = config.map.query_depth;
    let cfg = MissionConfig {
        planner,
        ..config.clone()
    };
    let mut mission = Mission {
        world,
        cfg: &cfg,
        bundle: precompute_bundle(&cfg.bundle)?,
        map: OccupancyOctree::new(cfg.map.clone(), world.bounds)?,
        state: VehicleState::at_rest(cfg.start, cfg.start_yaw),
        t: 0.0,
        tick: 0,
        path_length: 0.0,
        cycle: 0,
        score: 0.0,
        blocked: 0,
        plan_ms: 0.0,
        series: Vec::new(),
        path: vec![PathSample {
            t: 0.0,
            position: cfg.start,
            clearance: world.clearance(&cfg.start),
        }],
        planner_log: Vec::new(),
        recoveries: 0,
        aborts: 0,
    };
    let (outcome, takeoff_length) = mission.run()?;
    let mut summary = compute_summary(&mission.series);
    summary.cycles = mission.cycle;
    summary.recoveries = mission.recoveries;
    summary.aborts = mission.aborts;
    summary.min_clearance = mission.path.iter().map(|p| p.clearance).fold(f64::INFINITY, f64::min);
    summary.seed = cfg.seed;
    Ok(MissionRun {
        metrics: MissionMetrics {
            series: mission.series,
            summary,
            outcome,
        },
        path: mission.path,
        planner_log: mission.planner_log,
        map: mission.map,
        takeoff_length,
    })
}
