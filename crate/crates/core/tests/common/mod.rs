//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use nalgebra::Vector3;
use peacock_core::geometry::Aabb;
use peacock_core::peacock::{precompute_bundle, BundleParams, PeacockBundle};
use peacock_core::planner::{PlanDecision, PlannerParams};
use peacock_core::sensor_world::World;
use peacock_core::trajgen::{BoundaryState, Segment3D};
use peacock_core::voxmap::{CellState, MapParams, OccupancyOctree, VoxelKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Min-snap segments

pub fn falling(k: usize, d: usize) -> f64 {
    (0..d).map(|i| (k - i) as f64).product()
}

/// d-th derivative of t^k.
pub fn monomial_derivative(k: usize, d: usize, t: f64) -> f64 {
    if d > k {
        0.0
    } else {
        falling(k, d) * t.powi((k - d) as i32)
    }
}

/// Plain Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Degree-7 coefficients meeting derivatives 0..=3 at both ends, in absolute time.
pub fn oracle_coefficients(start: [f64; 4], end: [f64; 4], duration: f64) -> Vec<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for d in 0..4 {
        a.push((0..8).map(|k| monomial_derivative(k, d, 0.0)).collect());
        b.push(start[d]);
        a.push((0..8).map(|k| monomial_derivative(k, d, duration)).collect());
        b.push(end[d]);
    }
    gauss_solve(a, b)
}

pub fn eval_poly(c: &[f64], t: f64, d: usize) -> f64 {
    c.iter().enumerate().map(|(k, ck)| ck * monomial_derivative(k, d, t)).sum()
}

/// Exact ∫_0^T p'''' q'''' for polynomials of any degree.
pub fn snap_inner(p: &[f64], q: &[f64], duration: f64) -> f64 {
    let snap = |c: &[f64]| -> Vec<f64> { (4..c.len()).map(|k| c[k] * falling(k, 4)).collect() };
    let (sp, sq) = (snap(p), snap(q));
    let mut acc = 0.0;
    for (i, a) in sp.iter().enumerate() {
        for (j, b) in sq.iter().enumerate() {
            let e = (i + j + 1) as i32;
            acc += a * b * duration.powi(e) / e as f64;
        }
    }
    acc
}

pub fn exact_snap_cost(c: &[f64], duration: f64) -> f64 {
    snap_inner(c, c, duration)
}

pub fn axis_state(s: &BoundaryState, axis: usize) -> [f64; 4] {
    [s.position[axis], s.velocity[axis], s.acceleration[axis], s.jerk[axis]]
}

pub fn random_state(rng: &mut impl Rng) -> BoundaryState {
    let mut v = || Vector3::from_fn(|_, _| rng.gen_range(-10.0..10.0));
    BoundaryState {
        position: v(),
        velocity: v(),
        acceleration: v(),
        jerk: v(),
    }
}

pub fn max_boundary_residual(seg: &Segment3D, start: &BoundaryState, end: &BoundaryState) -> f64 {
    let t_end = seg.duration();
    let mut worst: f64 = 0.0;
    for (axis, poly) in seg.axes().iter().enumerate() {
        let (s, e) = (axis_state(start, axis), axis_state(end, axis));
        for d in 0..4 {
            worst = worst.max((poly.eval_unchecked(0.0, d) - s[d]).abs());
            worst = worst.max((poly.eval_unchecked(t_end, d) - e[d]).abs());
        }
    }
    worst
}

// Occupancy on a dense 16 m cube at 0.5 m

pub const RES: f64 = 0.5;
pub const N: usize = 32;

/// Voxels whose closed box the segment crosses with positive length, found by
/// clipping the segment against every candidate box in its bounding range.
pub fn crossed_voxels(a: &Vector3<f64>, b: &Vector3<f64>) -> HashSet<[usize; 3]> {
    let d = b - a;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for i in 0..3 {
        let (u, v) = (a[i].min(b[i]), a[i].max(b[i]));
        lo[i] = ((u / RES).floor().max(0.0) as usize).min(N - 1);
        hi[i] = ((v / RES).floor().max(0.0) as usize).min(N - 1);
    }
    let mut out = HashSet::new();
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                let c = [x, y, z];
                let (mut t0, mut t1) = (0.0f64, 1.0f64);
                for i in 0..3 {
                    let (bmin, bmax) = (c[i] as f64 * RES, (c[i] + 1) as f64 * RES);
                    if d[i] == 0.0 {
                        if a[i] < bmin || a[i] >= bmax {
                            t1 = -1.0;
                        }
                        continue;
                    }
                    let (s, e) = ((bmin - a[i]) / d[i], (bmax - a[i]) / d[i]);
                    t0 = t0.max(s.min(e));
                    t1 = t1.min(s.max(e));
                }
                if t1 > t0 {
                    out.insert(c);
                }
            }
        }
    }
    out
}

pub fn cell_of(p: &Vector3<f64>) -> Option<[usize; 3]> {
    let c = [(p.x / RES).floor(), (p.y / RES).floor(), (p.z / RES).floor()];
    c.iter()
        .all(|v| *v >= 0.0 && *v < N as f64)
        .then(|| [c[0] as usize, c[1] as usize, c[2] as usize])
}

pub struct Dense {
    pub cells: Vec<Option<f64>>,
    pub hit: f64,
    pub miss: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Dense {
    pub fn new() -> Self {
        let l = |p: f64| (p / (1.0 - p)).ln();
        Self {
            cells: vec![None; N * N * N],
            hit: l(0.65),
            // 0.35 is the complement of 0.65, so one hit and one miss must cancel exactly.
            miss: -l(0.65),
            lo: l(0.12),
            hi: l(0.97),
        }
    }

    pub fn idx(c: [usize; 3]) -> usize {
        (c[2] * N + c[1]) * N + c[0]
    }

    pub fn bump(&mut self, c: [usize; 3], delta: f64) {
        let v = &mut self.cells[Self::idx(c)];
        *v = Some((v.unwrap_or(0.0) + delta).clamp(self.lo, self.hi));
    }

    pub fn scan(&mut self, origin: &Vector3<f64>, ends: &[Vector3<f64>], max_range: f64) {
        let mut hits = HashSet::new();
        let mut misses = HashSet::new();
        for e in ends {
            let r = e - origin;
            let (end, is_hit) = if r.norm() <= max_range {
                (*e, true)
            } else {
                (origin + r * (max_range / r.norm()), false)
            };
            let end_cell = cell_of(&end);
            for c in crossed_voxels(origin, &end) {
                if Some(c) != end_cell {
                    misses.insert(c);
                }
            }
            if let Some(c) = end_cell {
                if is_hit {
                    hits.insert(c);
                } else {
                    misses.insert(c);
                }
            }
        }
        for c in hits.iter() {
            self.bump(*c, self.hit);
        }
        for c in misses.difference(&hits) {
            self.bump(*c, self.miss);
        }
    }

    pub fn state(&self, c: [usize; 3]) -> CellState {
        match self.cells[Self::idx(c)] {
            None => CellState::Unknown,
            Some(v) if v > 0.0 => CellState::Occupied,
            Some(_) => CellState::Free,
        }
    }
}
// Bundle scoring

pub fn bundle() -> PeacockBundle {
    precompute_bundle(&BundleParams::default()).unwrap()
}

pub fn bounds() -> Aabb {
    Aabb::from_slice([0.0, 0.0, 0.0, 24.0, 24.0, 10.0])
}

pub fn empty_map() -> OccupancyOctree {
    OccupancyOctree::new(MapParams::default(), bounds()).unwrap()
}

/// Scans from around the center plus scattered single obstacles.
pub fn random_map(seed: u64) -> OccupancyOctree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = empty_map();
    let center = Vector3::new(12.0, 12.0, 5.0);
    for _ in 0..rng.gen_range(1..4) {
        let origin = center + Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let ends: Vec<_> = (0..400)
            .map(|_| {
                let d = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
                origin + d * rng.gen_range(3.0..14.0)
            })
            .collect();
        map.insert_scan(&origin, &ends, 9.0).unwrap();
    }
    let (hit, _) = map.increments();
    for _ in 0..rng.gen_range(0..30) {
        let p = center + Vector3::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-3.0..3.0));
        let k = map.key_of(&p).unwrap();
        map.update_key(&k, hit);
        map.update_key(&k, hit);
    }
    map
}

/// Straightforward reference scorer working from the list of known voxels.
pub struct Reference<'a> {
    map: &'a OccupancyOctree,
    known: HashMap<VoxelKey, CellState>,
    params: PlannerParams,
}

impl<'a> Reference<'a> {
    pub fn new(map: &'a OccupancyOctree, params: PlannerParams) -> Self {
        Self {
            map,
            known: map.known_voxels().into_iter().collect(),
            params,
        }
    }

    pub fn inside_fence(&self, p: &Vector3<f64>) -> bool {
        let m = self.params.safety_margin;
        let b = self.map.bounds();
        (0..3).all(|i| p[i] >= b.min[i] + m && p[i] <= b.max[i] - m)
    }

    /// Worst state among finest voxels whose cell meets the box `p ± half`.
    pub fn box_state(&self, p: &Vector3<f64>, half: [f64; 3]) -> CellState {
        let res = self.map.params().resolution;
        let dims = self.map.dims();
        let b = self.map.bounds();
        let mut worst = CellState::Free;
        let range = |i: usize| {
            let lo = ((p[i] - half[i] - b.min[i]) / res).floor().max(0.0) as u32;
            let hi = (((p[i] + half[i] - b.min[i]) / res).floor().max(0.0) as u32).min(dims[i] - 1);
            lo.min(dims[i] - 1)..=hi
        };
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    match self.known.get(&VoxelKey::new(x, y, z)) {
                        Some(CellState::Occupied) => return CellState::Occupied,
                        None => worst = CellState::Unknown,
                        _ => {}
                    }
                }
            }
        }
        worst
    }

    pub fn sample_state(&self, p: &Vector3<f64>, first_step: bool) -> CellState {
        let m = if first_step { self.params.safety_margin } else { 0.0 };
        if m > 0.0 && !self.inside_fence(p) {
            return CellState::Occupied;
        }
        let center = self.map.search(p, self.params.query_depth);
        if m > 0.0 && center != CellState::Occupied && self.box_state(p, [m; 3]) == CellState::Occupied {
            return CellState::Occupied;
        }
        center
    }

    pub fn stop_ok(&self, end: &Vector3<f64>, heading: f64, pitch: f64) -> bool {
        let d = self.params.stopping_distance;
        if d <= 0.0 || self.params.literal_reset {
            return true;
        }
        let dir = Vector3::new(heading.cos() * pitch.cos(), heading.sin() * pitch.cos(), pitch.sin());
        let n = (d / 0.25).ceil() as usize;
        let m = self.params.safety_margin;
        (1..=n).all(|k| {
            let p = end + dir * (d * k as f64 / n as f64);
            self.inside_fence(&p) && self.box_state(&p, [m, m, 0.0]) == CellState::Free
        })
    }

    pub fn score(&self, bundle: &PeacockBundle, pos: &Vector3<f64>, yaw: f64) -> (Vec<f64>, Vec<bool>) {
        let (s, c) = yaw.sin_cos();
        let world = |q: &Vector3<f64>| pos + Vector3::new(c * q.x - s * q.y, s * q.x + c * q.y, q.z);
        let (a, b) = (self.params.weights.free, self.params.weights.unknown);
        let mut scores = Vec::new();
        let mut blocked = Vec::new();
        for first in bundle.first_steps() {
            let mut score = 0.0;
            let mut dead = !self.stop_ok(&world(&first.endpoint), yaw + first.yaw, first.pitch);
            let mut samples: Vec<(bool, Vector3<f64>)> = first.samples.iter().map(|q| (true, world(q))).collect();
            for second in &first.second_steps {
                samples.extend(second.samples.iter().map(|q| (false, world(q))));
            }
            for (first_step, p) in samples {
                if dead {
                    break;
                }
                match self.sample_state(&p, first_step) {
                    CellState::Occupied if self.params.literal_reset => score = 0.0,
                    CellState::Occupied if first_step || self.params.second_step_blocks => dead = true,
                    CellState::Occupied => {}
                    CellState::Free => score += a,
                    CellState::Unknown => score += b,
                }
            }
            scores.push(if dead { 0.0 } else { score });
            blocked.push(dead);
        }
        (scores, blocked)
    }
}

pub fn reference_select(rows: usize, cols: usize, scores: &[f64], blocked: &[bool]) -> PlanDecision {
    let best = (0..scores.len())
        .filter(|&i| !blocked[i])
        .map(|i| scores[i])
        .fold(0.0, f64::max);
    if best <= 0.0 {
        return PlanDecision::AllBlocked;
    }
    let tied: Vec<(usize, usize)> = (0..rows * cols)
        .filter(|&i| !blocked[i] && scores[i] == best)
        .map(|i| (i / cols, i % cols))
        .collect();
    let median = |mut v: Vec<usize>| {
        v.sort();
        v[(v.len() - 1) / 2]
    };
    let mr = median(tied.iter().map(|t| t.0).collect());
    let mc = median(tied.iter().map(|t| t.1).collect());
    let mut order = tied.clone();
    order.sort_by_key(|&(r, c)| (r.abs_diff(mr) + c.abs_diff(mc), r, c));
    let (row, col) = order[0];
    PlanDecision::Selected { row, col }
}

pub fn param_variants() -> Vec<PlannerParams> {
    vec![
        PlannerParams::default(),
        PlannerParams {
            safety_margin: 0.0,
            stopping_distance: 0.0,
            second_step_blocks: true,
            ..PlannerParams::default()
        },
        PlannerParams {
            safety_margin: 0.5,
            stopping_distance: 0.0,
            ..PlannerParams::default()
        },
        PlannerParams {
            literal_reset: true,
            ..PlannerParams::default()
        },
    ]
}

// Ground-truth reachability

/// Centers of the `res` cells of `world` that overlap no box, flood-filled
/// with face connectivity from the cell holding `start`.
pub fn reachable_free_cells(world: &World, start: &Vector3<f64>, res: f64) -> Vec<Vector3<f64>> {
    let b = &world.bounds;
    let dims: Vec<usize> = (0..3).map(|i| ((b.max[i] - b.min[i]) / res).round() as usize).collect();
    let center = |c: [usize; 3]| Vector3::from_fn(|i, _| b.min[i] + (c[i] as f64 + 0.5) * res);
    let free = |c: [usize; 3]| {
        let lo = Vector3::from_fn(|i, _| b.min[i] + c[i] as f64 * res);
        let hi = lo.add_scalar(res);
        !world
            .boxes
            .iter()
            .any(|x| (0..3).all(|i| lo[i] < x.max[i] && hi[i] > x.min[i]))
    };
    let idx = |c: [usize; 3]| (c[2] * dims[1] + c[1]) * dims[0] + c[0];
    let first = [0, 1, 2].map(|i| (((start[i] - b.min[i]) / res).floor() as usize).min(dims[i] - 1));
    let mut seen = vec![false; dims[0] * dims[1] * dims[2]];
    let mut out = Vec::new();
    if !free(first) {
        return out;
    }
    let mut stack = vec![first];
    seen[idx(first)] = true;
    while let Some(c) = stack.pop() {
        out.push(center(c));
        for axis in 0..3 {
            for step in [-1i64, 1] {
                let v = c[axis] as i64 + step;
                if v < 0 || v >= dims[axis] as i64 {
                    continue;
                }
                let mut n = c;
                n[axis] = v as usize;
                if !seen[idx(n)] && free(n) {
                    seen[idx(n)] = true;
                    stack.push(n);
                }
            }
        }
    }
    out
}
