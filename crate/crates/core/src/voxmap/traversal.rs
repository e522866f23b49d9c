//! Incremental voxel stepping along a segment (Amanatides & Woo).

use nalgebra::Vector3;

use super::VoxelKey;

/// Visits, in order, every voxel the segment `start → end` passes through,
/// excluding the voxel that contains `end`. Coordinates are in voxel units
/// relative to the grid origin; stepping stops as soon as the walk leaves
/// `[0, dims)`.
///
/// Returns the key of the end voxel when it lies inside the grid and the walk
/// actually reached it.
pub(crate) fn walk_segment(
    start: &Vector3<f64>,
    end: &Vector3<f64>,
    dims: [u32; 3],
    mut visit: impl FnMut(VoxelKey),
) -> Option<VoxelKey> {
    let inside = |c: &[i64; 3]| (0..3).all(|i| c[i] >= 0 && c[i] < dims[i] as i64);
    let to_key = |c: &[i64; 3]| VoxelKey::new(c[0] as u32, c[1] as u32, c[2] as u32);

    let mut cur = [0i64; 3];
    let mut last = [0i64; 3];
    for i in 0..3 {
        cur[i] = start[i].floor() as i64;
        last[i] = end[i].floor() as i64;
    }
    if !inside(&cur) {
        return None;
    }
    if cur == last {
        return Some(to_key(&last));
    }

    let delta = end - start;
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for i in 0..3 {
        if delta[i] > 0.0 {
            step[i] = 1;
            t_max[i] = ((cur[i] + 1) as f64 - start[i]) / delta[i];
            t_delta[i] = 1.0 / delta[i];
        } else if delta[i] < 0.0 {
            step[i] = -1;
            t_max[i] = (cur[i] as f64 - start[i]) / delta[i];
            t_delta[i] = -1.0 / delta[i];
        }
    }

    // Manhattan distance bounds the number of steps.
    let budget: i64 = (0..3).map(|i| (last[i] - cur[i]).abs()).sum::<i64>() + 3;
    visit(to_key(&cur));
    for _ in 0..budget {
        let axis = if t_max[0] < t_max[1] {
            if t_max[0] < t_max[2] {
                0
            } else {
                2
            }
        } else if t_max[1] < t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            // Round-off kept us short of the end voxel; the segment is done.
            return None;
        }
        cur[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        if !inside(&cur) {
            return None;
        }
        if cur == last {
            return Some(to_key(&last));
        }
        visit(to_key(&cur));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_walk() {
        let mut seen = Vec::new();
        let end = walk_segment(
            &Vector3::new(0.5, 0.5, 0.5),
            &Vector3::new(4.5, 0.5, 0.5),
            [8, 8, 8],
            |k| seen.push(k),
        );
        assert_eq!(end, Some(VoxelKey::new(4, 0, 0)));
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[3], VoxelKey::new(3, 0, 0));
    }

    #[test]
    fn leaving_grid_stops() {
        let mut n = 0;
        let end = walk_segment(
            &Vector3::new(0.5, 0.5, 0.5),
            &Vector3::new(-5.5, 0.5, 0.5),
            [8, 8, 8],
            |_| n += 1,
        );
        assert_eq!(end, None);
        assert_eq!(n, 1);
    }

    #[test]
    fn same_voxel() {
        let mut n = 0;
        let end = walk_segment(
            &Vector3::new(1.1, 1.2, 1.3),
            &Vector3::new(1.9, 1.8, 1.7),
            [8, 8, 8],
            |_| n += 1,
        );
        assert_eq!(end, Some(VoxelKey::new(1, 1, 1)));
        assert_eq!(n, 0);
    }
}
