//! The peacock bundle: a yaw × pitch fan of first-step minimum-snap segments,
//! each fanning out into planar second-step branches.
//!
//! The bundle lives in a canonical frame (start at the origin, heading +X,
//! flying at speed `v`) and is computed once. At runtime it is re-anchored at
//! the vehicle with a yaw rotation and a translation.

use std::f64::consts::PI;

use nalgebra::Vector3;
use thiserror::Error;

use crate::trajgen::{solve_min_snap_segment, BoundaryState, Segment3D, TrajError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("invalid bundle parameters: {0}")]
    InvalidParams(String),
    #[error("cell ({row}, {col}) outside {rows}x{cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error(transparent)]
    Trajectory(#[from] TrajError),
}

/// Geometry of the fan. Rows sample pitch, columns sample yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleParams {
    /// Linear speed (m/s).
    pub speed: f64,
    /// Duration of one step (s).
    pub period: f64,
    pub rows: usize,
    pub cols: usize,
    pub branches: usize,
    /// Half-range of first-step yaw angles (rad).
    pub yaw_range: f64,
    /// Half-range of first-step pitch angles (rad).
    pub pitch_range: f64,
    /// Half-range of second-step yaw offsets (rad).
    pub branch_yaw_range: f64,
    /// Upper bound on arc length between cached samples (m).
    pub sample_spacing: f64,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self {
            speed: 5.0,
            period: 0.5,
            rows: 9,
            cols: 9,
            branches: 7,
            yaw_range: 60.0_f64.to_radians(),
            pitch_range: 40.0_f64.to_radians(),
            branch_yaw_range: 27.0_f64.to_radians(),
            sample_spacing: 0.25,
        }
    }
}

impl BundleParams {
    pub fn validate(&self) -> Result<(), BundleError> {
        let bad = |msg: &str| Err(BundleError::InvalidParams(msg.to_string()));
        let finite = [
            self.speed,
            self.period,
            self.yaw_range,
            self.pitch_range,
            self.branch_yaw_range,
            self.sample_spacing,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite value");
        }
        if self.speed <= 0.0 || self.period <= 0.0 || self.sample_spacing <= 0.0 {
            return bad("speed, period and sample_spacing must be positive");
        }
        if self.rows == 0 || self.cols == 0 || self.branches == 0 {
            return bad("rows, cols and branches must be at least 1");
        }
        if self.yaw_range < 0.0 || self.yaw_range > PI {
            return bad("yaw_range must lie in [0, pi]");
        }
        if self.pitch_range < 0.0 || self.pitch_range >= PI / 2.0 {
            return bad("pitch_range must lie in [0, pi/2)");
        }
        if self.branch_yaw_range < 0.0 || self.branch_yaw_range > PI {
            return bad("branch_yaw_range must lie in [0, pi]");
        }
        Ok(())
    }

    /// Straight-line length of one step.
    pub fn step_length(&self) -> f64 {
        self.speed * self.period
    }

    pub fn pitch_angles(&self) -> Vec<f64> {
        symmetric_linspace(self.pitch_range, self.rows)
    }

    pub fn yaw_angles(&self) -> Vec<f64> {
        symmetric_linspace(self.yaw_range, self.cols)
    }

    pub fn branch_offsets(&self) -> Vec<f64> {
        symmetric_linspace(self.branch_yaw_range, self.branches)
    }
}

/// `count` values spanning `[-half_range, half_range]`, both ends included.
fn symmetric_linspace(half_range: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    let step = 2.0 * half_range / (count - 1) as f64;
    (0..count)
        .map(|k| {
            // Mirror-exact: the k-th and (count-1-k)-th values are negatives.
            let from_center = k as f64 - (count - 1) as f64 / 2.0;
            from_center * step
        })
        .collect()
}

/// Unit direction for a (yaw, pitch) pair.
pub fn heading_direction(yaw: f64, pitch: f64) -> Vector3<f64> {
    Vector3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), pitch.sin())
}

#[derive(Debug, Clone)]
pub struct SecondStep {
    pub yaw_offset: f64,
    /// Local time runs over `[0, period]`; the step starts at the parent endpoint.
    pub segment: Segment3D,
    pub samples: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct FirstStep {
    pub yaw: f64,
    pub pitch: f64,
    pub segment: Segment3D,
    pub endpoint: Vector3<f64>,
    pub samples: Vec<Vector3<f64>>,
    pub second_steps: Vec<SecondStep>,
}

/// The precomputed canonical fan.
#[derive(Debug, Clone)]
pub struct PeacockBundle {
    params: BundleParams,
    /// Row-major, `rows * cols` entries.
    grid: Vec<FirstStep>,
    first_sample_times: Vec<f64>,
    second_sample_times: Vec<f64>,
}

/// World-frame samples of one (row, col) family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySamples {
    pub first: Vec<Vector3<f64>>,
    pub branches: Vec<Vec<Vector3<f64>>>,
    /// Unit direction of travel at the end of the first step.
    pub end_direction: Vector3<f64>,
}

impl FamilySamples {
    pub fn len(&self) -> usize {
        self.first.len() + self.branches.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First-step samples followed by every branch in order.
    pub fn iter(&self) -> impl Iterator<Item = (bool, &Vector3<f64>)> {
        self.first
            .iter()
            .map(|p| (true, p))
            .chain(self.branches.iter().flatten().map(|p| (false, p)))
    }
}

/// Rotates `p` about world Z by `yaw`, then translates by `offset`.
pub fn yaw_transform(p: &Vector3<f64>, yaw: f64, offset: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = yaw.sin_cos();
    Vector3::new(c * p.x - s * p.y + offset.x, s * p.x + c * p.y + offset.y, p.z + offset.z)
}

/// Solves every first- and second-step segment of the fan and caches samples.
pub fn precompute_bundle(params: &BundleParams) -> Result<PeacockBundle, BundleError> {
    params.validate()?;
    let v = params.speed;
    let period = params.period;
    let step = params.step_length();
    let start = BoundaryState::with_velocity(Vector3::zeros(), Vector3::new(v, 0.0, 0.0));
    let pitches = params.pitch_angles();
    let yaws = params.yaw_angles();
    let offsets = params.branch_offsets();

    let mut grid = Vec::with_capacity(params.rows * params.cols);
    for &pitch in &pitches {
        for &yaw in &yaws {
            let dir = heading_direction(yaw, pitch);
            let endpoint = dir * step;
            let end = BoundaryState::with_velocity(endpoint, dir * v);
            let segment = solve_min_snap_segment(&start, &end, period)?;

            // Branches hold altitude, so they start with the horizontal part of the heading.
            let level = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
            let branch_start = BoundaryState::with_velocity(endpoint, level * v);
            let second_steps = offsets
                .iter()
                .map(|&offset| {
                    let bdir = Vector3::new((yaw + offset).cos(), (yaw + offset).sin(), 0.0);
                    let bend = BoundaryState::with_velocity(endpoint + bdir * step, bdir * v);
                    let mut segment = solve_min_snap_segment(&branch_start, &bend, period)?;
                    flatten_z(&mut segment, endpoint.z)?;
                    Ok(SecondStep {
                        yaw_offset: offset,
                        segment,
                        samples: Vec::new(),
                    })
                })
                .collect::<Result<Vec<_>, BundleError>>()?;

            grid.push(FirstStep {
                yaw,
                pitch,
                segment,
                endpoint,
                samples: Vec::new(),
                second_steps,
            });
        }
    }

    let first_count = sample_count(grid.iter().map(|f| &f.segment), params.sample_spacing);
    let second_count = sample_count(
        grid.iter().flat_map(|f| f.second_steps.iter().map(|s| &s.segment)),
        params.sample_spacing,
    );
    let first_sample_times = sample_times(period, first_count);
    let second_sample_times = sample_times(period, second_count);
    for first in &mut grid {
        first.samples = sample_segment(&first.segment, &first_sample_times);
        for second in &mut first.second_steps {
            second.samples = sample_segment(&second.segment, &second_sample_times);
        }
    }

    Ok(PeacockBundle {
        params: params.clone(),
        grid,
        first_sample_times,
        second_sample_times,
    })
}

/// A branch has identical z boundary values at both ends, so its z polynomial
/// is the constant; pin it exactly so samples carry no round-off in z.
fn flatten_z(segment: &mut Segment3D, z: f64) -> Result<(), BundleError> {
    let mut c = [0.0; crate::trajgen::NUM_COEFFS];
    c[0] = z;
    let zpoly = crate::trajgen::Polynomial1D::new(c, segment.duration())?;
    *segment = Segment3D::from_axes(*segment.x(), *segment.y(), zpoly)?;
    Ok(())
}

/// Smallest uniform-in-time interval count that keeps every segment's
/// consecutive samples within `spacing` of arc length.
fn sample_count<'a>(segments: impl Iterator<Item = &'a Segment3D>, spacing: f64) -> usize {
    const DENSE: usize = 64;
    // Margin over the densely sampled peak speed.
    const SPEED_MARGIN: f64 = 1.05;
    let mut worst = 0.0_f64;
    for seg in segments {
        let duration = seg.duration();
        let peak = (0..=DENSE)
            .map(|k| seg.sample_plain(duration * k as f64 / DENSE as f64, 1).norm())
            .fold(0.0, f64::max);
        worst = worst.max(peak * SPEED_MARGIN * duration);
    }
    ((worst / spacing).ceil() as usize).max(1)
}

/// `count` times `period * k / count` for `k = 1..=count`; the start point
/// is the vehicle position (or the parent endpoint) and is not resampled.
fn sample_times(period: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| period * k as f64 / count as f64).collect()
}

fn sample_segment(segment: &Segment3D, times: &[f64]) -> Vec<Vector3<f64>> {
    times.iter().map(|&t| segment.sample(t, 0)).collect()
}

impl PeacockBundle {
    pub fn params(&self) -> &BundleParams {
        &self.params
    }

    pub fn rows(&self) -> usize {
        self.params.rows
    }

    pub fn cols(&self) -> usize {
        self.params.cols
    }

    pub fn first_steps(&self) -> &[FirstStep] {
        &self.grid
    }

    pub fn first_step(&self, row: usize, col: usize) -> Result<&FirstStep, BundleError> {
        if row >= self.params.rows || col >= self.params.cols {
            return Err(BundleError::IndexOutOfRange {
                row,
                col,
                rows: self.params.rows,
                cols: self.params.cols,
            });
        }
        Ok(&self.grid[row * self.params.cols + col])
    }

    /// Local sample times of first-step samples (same for every family).
    pub fn first_sample_times(&self) -> &[f64] {
        &self.first_sample_times
    }

    /// Local sample times of second-step samples (same for every branch).
    pub fn second_sample_times(&self) -> &[f64] {
        &self.second_sample_times
    }

    /// Samples per family: first step plus every branch.
    pub fn samples_per_family(&self) -> usize {
        self.first_sample_times.len() + self.params.branches * self.second_sample_times.len()
    }

    pub fn second_step_count(&self) -> usize {
        self.grid.iter().map(|f| f.second_steps.len()).sum()
    }

    /// World-frame samples for every family, row-major.
    pub fn transform_samples(&self, position: &Vector3<f64>, yaw: f64) -> Vec<FamilySamples> {
        let map = |pts: &[Vector3<f64>]| -> Vec<Vector3<f64>> {
            pts.iter().map(|p| yaw_transform(p, yaw, position)).collect()
        };
        self.grid
            .iter()
            .map(|first| FamilySamples {
                first: map(&first.samples),
                branches: first.second_steps.iter().map(|s| map(&s.samples)).collect(),
                end_direction: heading_direction(first.yaw + yaw, first.pitch),
            })
            .collect()
    }

    /// The (row, col) first-step segment re-anchored at the given pose.
    pub fn selected_world_segment(
        &self,
        row: usize,
        col: usize,
        position: &Vector3<f64>,
        yaw: f64,
    ) -> Result<Segment3D, BundleError> {
        Ok(self.first_step(row, col)?.segment.rigid_transform(yaw, position))
    }
}
