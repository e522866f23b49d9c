//! Closed-loop segment tracking and the kinematic stand-in.

use nalgebra::Vector3;

use super::{
    geometric_control, step_dynamics, yaw_rotation, ControlInput, FlatTarget, VehicleError, VehicleParams,
    VehicleState,
};
use crate::trajgen::Segment3D;

/// Below this horizontal speed (m/s) the commanded yaw is held.
const YAW_HOLD_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YawMode {
    /// Face along the horizontal desired velocity; hold the last heading
    /// (starting from the given yaw) while it is slow.
    FollowVelocity(f64),
    /// Keep a fixed yaw.
    Hold(f64),
}

/// State at one control tick, before the tick's command is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub state: VehicleState,
    pub desired: Vector3<f64>,
    pub input: ControlInput,
    pub position_error: f64,
}

/// Steps a segment one control tick at a time.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    segment: &'a Segment3D,
    params: &'a VehicleParams,
    dt: f64,
    substeps: usize,
    control_period: f64,
    tick: usize,
    ticks: usize,
    state: VehicleState,
    yaw: YawMode,
    last_input: ControlInput,
}

impl<'a> Tracker<'a> {
    pub fn new(
        state: VehicleState,
        segment: &'a Segment3D,
        yaw: YawMode,
        params: &'a VehicleParams,
        dt: f64,
        control_rate: f64,
    ) -> Result<Self, VehicleError> {
        if !(dt > 0.0 && dt <= 0.01) {
            return Err(VehicleError::InvalidTimestep(dt));
        }
        if !(control_rate >= 100.0) {
            return Err(VehicleError::InvalidControlRate(control_rate));
        }
        let control_period = 1.0 / control_rate;
        let substeps = ((control_period / dt).round() as usize).max(1);
        let control_period = substeps as f64 * dt;
        let ticks = ((segment.duration() / control_period) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            segment,
            params,
            dt,
            substeps,
            control_period,
            tick: 0,
            ticks,
            state,
            yaw,
            last_input: ControlInput::hover(params),
        })
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.control_period
    }

    /// Control period actually used (a whole number of integration steps).
    pub fn control_period(&self) -> f64 {
        self.control_period
    }

    pub fn is_done(&self) -> bool {
        self.tick >= self.ticks
    }

    fn target(&mut self, t: f64) -> FlatTarget {
        let velocity = self.segment.sample(t, 1);
        let yaw = match &mut self.yaw {
            YawMode::Hold(y) => *y,
            YawMode::FollowVelocity(y) => {
                if velocity.xy().norm() >= YAW_HOLD_SPEED {
                    *y = velocity.y.atan2(velocity.x);
                }
                *y
            }
        };
        FlatTarget {
            position: self.segment.sample(t, 0),
            velocity,
            acceleration: self.segment.sample(t, 2),
            yaw,
        }
    }

    /// Records the current tick, applies its command and advances one control period.
    pub fn step(&mut self) -> Result<TickRecord, VehicleError> {
        let t = self.time();
        let target = self.target(t);
        let out = geometric_control(&self.state, &target, self.params)?;
        let record = TickRecord {
            t,
            state: self.state,
            desired: target.position,
            input: out.input,
            position_error: (target.position - self.state.position).norm(),
        };
        for _ in 0..self.substeps {
            self.state = step_dynamics(&self.state, &out.input, self.params, self.dt)?;
        }
        self.last_input = out.input;
        self.tick += 1;
        Ok(record)
    }

    /// The record for the current state against the segment end, without stepping.
    pub fn final_record(&self) -> TickRecord {
        let t = self.time();
        let desired = self.segment.sample(t, 0);
        TickRecord {
            t,
            state: self.state,
            desired,
            input: self.last_input,
            position_error: (desired - self.state.position).norm(),
        }
    }

    /// Yaw command currently held by the tracker.
    pub fn commanded_yaw(&self) -> f64 {
        match self.yaw {
            YawMode::Hold(y) | YawMode::FollowVelocity(y) => y,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub records: Vec<TickRecord>,
    pub final_state: VehicleState,
    pub max_position_error: f64,
}

/// Closed-loop rollout over the whole segment.
pub fn track(
    state: &VehicleState,
    segment: &Segment3D,
    yaw: YawMode,
    params: &VehicleParams,
    dt: f64,
    control_rate: f64,
) -> Result<TrackResult, VehicleError> {
    let mut tracker = Tracker::new(*state, segment, yaw, params, dt, control_rate)?;
    let mut records = Vec::new();
    while !tracker.is_done() {
        records.push(tracker.step()?);
    }
    records.push(tracker.final_record());
    let max_position_error = records.iter().map(|r| r.position_error).fold(0.0, f64::max);
    Ok(TrackResult {
        final_state: *tracker.state(),
        records,
        max_position_error,
    })
}

/// Kinematic mode: the vehicle sits exactly on the segment, level, facing
/// along its horizontal velocity (or `fallback_yaw` when nearly stationary).
pub fn follow_exact(segment: &Segment3D, t: f64, fallback_yaw: f64) -> VehicleState {
    let p = segment.sample(t, 0);
    let v = segment.sample(t, 1);
    let a = segment.sample(t, 2);
    let horizontal = v.x * v.x + v.y * v.y;
    let (yaw, yaw_rate) = if horizontal.sqrt() >= YAW_HOLD_SPEED {
        (v.y.atan2(v.x), (v.x * a.y - v.y * a.x) / horizontal)
    } else {
        (fallback_yaw, 0.0)
    };
    VehicleState {
        position: p,
        velocity: v,
        rotation: yaw_rotation(yaw),
        omega: Vector3::new(0.0, 0.0, yaw_rate),
    }
}
