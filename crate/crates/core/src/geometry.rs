use nalgebra::Vector3;

/// Axis-aligned box given by its min and max corners (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn from_slice(v: [f64; 6]) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
    }

    /// True when `min < max` on every axis.
    pub fn is_proper(&self) -> bool {
        (0..3).all(|i| self.min[i] < self.max[i])
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    /// Shrinks by `margin` on every side.
    pub fn shrunk(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb::new(self.min + m, self.max - m)
    }

    /// Signed distance from `p` to the box surface; negative inside.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let c = self.center();
        let h = self.extent() * 0.5;
        let q = (p - c).abs() - h;
        let outside = q.map(|v| v.max(0.0)).norm();
        let inside = q.x.max(q.y).max(q.z).min(0.0);
        outside + inside
    }

    /// Slab test: the parameter interval `[t_enter, t_exit]` where
    /// `origin + t * dir` lies inside the box, if any.
    pub fn ray_interval(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}
