//! Raycast depth camera with a uniform angular ray fan.
//!
//! Rays are spread uniformly in azimuth and elevation (a spherical fan, not a
//! pinhole grid), with the outermost rays exactly on the field-of-view edges.
//! The optical axis is body +X; column 0 is the leftmost (+Y) ray and row 0 the
//! topmost.

use nalgebra::{Matrix3, Vector3};

use super::World;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub h_fov: f64,
    pub v_fov: f64,
    pub min_range: f64,
    pub max_range: f64,
    pub ray_cols: usize,
    pub ray_rows: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            h_fov: 60.0_f64.to_radians(),
            v_fov: 45.0_f64.to_radians(),
            min_range: 0.11,
            max_range: 15.0,
            ray_cols: 64,
            ray_rows: 48,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_range > 0.0 && self.min_range < self.max_range && self.max_range.is_finite()) {
            return Err("camera ranges must satisfy 0 < min_range < max_range".into());
        }
        if self.ray_cols == 0 || self.ray_rows == 0 {
            return Err("camera ray counts must be positive".into());
        }
        if !(self.h_fov > 0.0 && self.h_fov < std::f64::consts::PI && self.v_fov > 0.0 && self.v_fov < std::f64::consts::PI) {
            return Err("camera fields of view must lie in (0, pi)".into());
        }
        Ok(())
    }

    fn angle(fov: f64, index: usize, count: usize) -> f64 {
        if count == 1 {
            0.0
        } else {
            fov / 2.0 - fov * index as f64 / (count - 1) as f64
        }
    }

    /// Unit ray direction in the camera (body) frame.
    pub fn ray_direction(&self, row: usize, col: usize) -> Vector3<f64> {
        let az = Self::angle(self.h_fov, col, self.ray_cols);
        let el = Self::angle(self.v_fov, row, self.ray_rows);
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

/// Camera position and body-to-world rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn from_yaw(position: Vector3<f64>, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            position,
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub camera: CameraModel,
    pub pose: Pose,
    /// Row-major ranges; `None` is no return.
    pub ranges: Vec<Option<f64>>,
}

impl DepthImage {
    pub fn range(&self, row: usize, col: usize) -> Option<f64> {
        self.ranges[row * self.camera.ray_cols + col]
    }

    /// World-frame unit direction of a ray.
    pub fn world_direction(&self, row: usize, col: usize) -> Vector3<f64> {
        self.pose.rotation * self.camera.ray_direction(row, col)
    }

    /// One endpoint per ray: the return point, or a point `no_return_range`
    /// along the ray when nothing was hit.
    pub fn ray_endpoints(&self, no_return_range: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.ranges.len());
        for row in 0..self.camera.ray_rows {
            for col in 0..self.camera.ray_cols {
                let r = self.range(row, col).unwrap_or(no_return_range);
                out.push(self.pose.position + self.world_direction(row, col) * r);
            }
        }
        out
    }
}

/// Casts one ray per image cell.
pub fn render_depth(world: &World, pose: &Pose, camera: &CameraModel) -> DepthImage {
    let mut ranges = Vec::with_capacity(camera.ray_rows * camera.ray_cols);
    for row in 0..camera.ray_rows {
        for col in 0..camera.ray_cols {
            let dir = pose.rotation * camera.ray_direction(row, col);
            let dir = dir / dir.norm();
            let r = world
                .raycast_unchecked(&pose.position, &dir, camera.max_range)
                .filter(|r| *r >= camera.min_range);
            ranges.push(r);
        }
    }
    DepthImage {
        camera: camera.clone(),
        pose: *pose,
        ranges,
    }
}

/// World-frame points of every return in the image.
pub fn depth_to_points(image: &DepthImage) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for row in 0..image.camera.ray_rows {
        for col in 0..image.camera.ray_cols {
            if let Some(r) = image.range(row, col) {
                out.push(image.pose.position + image.world_direction(row, col) * r);
            }
        }
    }
    out
}
