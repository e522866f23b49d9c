//! Lightweight receding-horizon exploration for a simulated quadrotor.
//!
//! A precomputed fan of minimum-snap segments (the peacock bundle) is scored
//! against a probabilistic occupancy octree; the best first step is tracked by
//! a geometric SE(3) controller and the cycle repeats until the reachable
//! unknown space is mapped.

pub mod geometry;
pub mod peacock;
pub mod trajgen;
pub mod voxmap;
pub mod sensor_world;
pub mod planner;
pub mod vehicle;
pub mod mission;
pub mod config;
