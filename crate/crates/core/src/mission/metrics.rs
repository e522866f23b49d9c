use nalgebra::Vector3;

use super::Outcome;

/// One row of the mission time series.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub yaw: f64,
    pub path_length: f64,
    pub free_volume: f64,
    pub occupied_volume: f64,
    pub known_volume: f64,
    pub cycle: usize,
    /// Score of the family selected in the current cycle (0 when none).
    pub score: f64,
    pub blocked_count: usize,
    pub plan_ms: f64,
}

/// Ground-truth position and clearance at one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub clearance: f64,
}

/// One planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRecord {
    pub cycle: usize,
    pub t: f64,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub score: f64,
    pub blocked_count: usize,
    pub unknown_in_reach: bool,
    /// Measured wall time of scoring and selection.
    pub plan_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MissionSummary {
    pub duration: f64,
    pub flight_length: f64,
    pub avg_velocity: f64,
    /// Known (free plus occupied) volume at the end of the run.
    pub mapped_volume: f64,
    pub mapping_rate: f64,
    /// Mapped volume per metre flown.
    pub mapping_efficiency: f64,
    pub cycles: usize,
    pub recoveries: usize,
    pub aborts: usize,
    pub min_clearance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct MissionMetrics {
    pub series: Vec<MetricsRow>,
    pub summary: MissionSummary,
    pub outcome: Outcome,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Table-style summary from the last row of a series. Counters that are not
/// part of the series (cycles, clearance, seed) are left at zero.
pub fn compute_summary(series: &[MetricsRow]) -> MissionSummary {
    let Some(last) = series.last() else {
        return MissionSummary::default();
    };
    let duration = last.t - series[0].t;
    MissionSummary {
        duration,
        flight_length: last.path_length,
        avg_velocity: ratio(last.path_length, duration),
        mapped_volume: last.known_volume,
        mapping_rate: ratio(last.known_volume, duration),
        mapping_efficiency: ratio(last.known_volume, last.path_length),
        ..MissionSummary::default()
    }
}
