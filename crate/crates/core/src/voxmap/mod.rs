//! Probabilistic occupancy octree.
//!
//! Leaves store clamped log-odds. Inner nodes store the maximum of their
//! children so a depth-limited lookup can answer "is anything below here
//! occupied" without descending further. Eight identical childless children
//! are pruned into their parent.
//!
//! The root cube is anchored at the minimum corner of the map bounds and has
//! edge `resolution * 2^max_depth`; only voxels intersecting the bounds are
//! ever created.

mod traversal;

use std::collections::HashSet;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::Aabb;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),
    #[error("map bounds need {needed} voxels per axis but depth {max_depth} allows {allowed}")]
    BoundsTooLarge {
        needed: u64,
        allowed: u64,
        max_depth: u32,
    },
    #[error("scan origin ({x}, {y}, {z}) lies outside the map bounds")]
    OriginOutOfBounds { x: f64, y: f64, z: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapParams {
    /// Leaf edge length (m).
    pub resolution: f64,
    pub hit_prob: f64,
    pub miss_prob: f64,
    pub occupancy_threshold: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
    pub max_depth: u32,
    pub query_depth: u32,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            hit_prob: 0.65,
            miss_prob: 0.35,
            occupancy_threshold: 0.5,
            clamp_min: 0.12,
            clamp_max: 0.97,
            max_depth: 16,
            query_depth: 15,
        }
    }
}

/// `ln(p / (1 - p))`, written so that `logit(p) == -logit(1 - p)` exactly.
pub fn logit(p: f64) -> f64 {
    p.ln() - (1.0 - p).ln()
}

pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

impl MapParams {
    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: &str| Err(MapError::InvalidParams(m.to_string()));
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if !(0.0 < self.miss_prob && self.miss_prob < 0.5) {
            return bad("miss_prob must lie in (0, 0.5)");
        }
        if !(0.5 < self.hit_prob && self.hit_prob < 1.0) {
            return bad("hit_prob must lie in (0.5, 1)");
        }
        if !(0.0 < self.clamp_min && self.clamp_min < 0.5 && 0.5 < self.clamp_max && self.clamp_max < 1.0) {
            return bad("clamp bounds must straddle 0.5 inside (0, 1)");
        }
        if !(0.0 < self.occupancy_threshold && self.occupancy_threshold < 1.0) {
            return bad("occupancy_threshold must lie in (0, 1)");
        }
        if self.max_depth == 0 || self.max_depth > 21 {
            return bad("max_depth must lie in 1..=21");
        }
        if self.query_depth == 0 || self.query_depth > self.max_depth {
            return bad("query_depth must lie in 1..=max_depth");
        }
        Ok(())
    }
}

/// Observation state of a point in the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

/// Integer leaf coordinates relative to the map's minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl VoxelKey {
    pub fn new(x: u32, y: u32, z: u32) -> Self {
        Self { x, y, z }
    }

    /// Z-order code with x in the lowest bit of each triple.
    pub fn morton(&self) -> u64 {
        fn spread(v: u32) -> u64 {
            let mut out = 0u64;
            for bit in 0..21 {
                out |= (((v >> bit) & 1) as u64) << (3 * bit);
            }
            out
        }
        spread(self.x) | (spread(self.y) << 1) | (spread(self.z) << 2)
    }
}

/// Summary of one [`OccupancyOctree::insert_scan`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanUpdate {
    pub hits: usize,
    pub misses: usize,
}

impl ScanUpdate {
    pub fn cells_touched(&self) -> usize {
        self.hits + self.misses
    }
}

/// Result of a depth-limited lookup with its descent cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchResult {
    pub state: CellState,
    pub node_visits: u32,
}

#[derive(Debug, Clone)]
struct Node {
    log_odds: f64,
    /// `None` marks a leaf: a finest voxel, or a pruned block of identical voxels.
    children: Option<Box<[Option<Box<Node>>; 8]>>,
}

impl Node {
    fn leaf(log_odds: f64) -> Self {
        Self {
            log_odds,
            children: None,
        }
    }

    fn inner() -> Self {
        Self {
            log_odds: f64::NEG_INFINITY,
            children: Some(Box::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyOctree {
    params: MapParams,
    bounds: Aabb,
    dims: [u32; 3],
    root: Option<Box<Node>>,
    hit_delta: f64,
    miss_delta: f64,
    clamp_lo: f64,
    clamp_hi: f64,
    threshold: f64,
    /// Known finest-voxel counts, kept in step with every leaf update.
    free_voxels: u64,
    occupied_voxels: u64,
}

impl OccupancyOctree {
    pub fn new(params: MapParams, bounds: Aabb) -> Result<Self, MapError> {
        params.validate()?;
        if !bounds.is_proper() || !bounds.min.iter().chain(bounds.max.iter()).all(|v| v.is_finite()) {
            return Err(MapError::InvalidParams("bounds must be finite with min < max".into()));
        }
        let allowed = 1u64 << params.max_depth;
        let mut dims = [0u32; 3];
        for i in 0..3 {
            let cells = (bounds.extent()[i] / params.resolution - 1e-9).ceil().max(1.0) as u64;
            if cells > allowed {
                return Err(MapError::BoundsTooLarge {
                    needed: cells,
                    allowed,
                    max_depth: params.max_depth,
                });
            }
            dims[i] = cells as u32;
        }
        Ok(Self {
            hit_delta: logit(params.hit_prob),
            miss_delta: logit(params.miss_prob),
            clamp_lo: logit(params.clamp_min),
            clamp_hi: logit(params.clamp_max),
            threshold: logit(params.occupancy_threshold),
            params,
            bounds,
            dims,
            root: None,
            free_voxels: 0,
            occupied_voxels: 0,
        })
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    /// Voxels per axis covering the bounds.
    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    /// Log-odds bounds `[lower, upper]` implied by the clamp probabilities.
    pub fn clamp_bounds(&self) -> (f64, f64) {
        (self.clamp_lo, self.clamp_hi)
    }

    /// Log-odds increments `(hit, miss)` applied per observation.
    pub fn increments(&self) -> (f64, f64) {
        (self.hit_delta, self.miss_delta)
    }

    /// Edge length of a node reached after descending `depth` levels.
    pub fn node_size(&self, depth: u32) -> f64 {
        self.params.resolution * (1u64 << (self.params.max_depth - depth.min(self.params.max_depth))) as f64
    }

    pub fn key_of(&self, p: &Vector3<f64>) -> Option<VoxelKey> {
        if !self.bounds.contains(p) {
            return None;
        }
        let mut k = [0u32; 3];
        for i in 0..3 {
            let c = ((p[i] - self.bounds.min[i]) / self.params.resolution).floor();
            if !(c >= 0.0) {
                return None;
            }
            k[i] = (c as u64).min(self.dims[i] as u64 - 1) as u32;
        }
        Some(VoxelKey::new(k[0], k[1], k[2]))
    }

    pub fn voxel_center(&self, key: &VoxelKey) -> Vector3<f64> {
        let r = self.params.resolution;
        self.bounds.min
            + Vector3::new(
                (key.x as f64 + 0.5) * r,
                (key.y as f64 + 0.5) * r,
                (key.z as f64 + 0.5) * r,
            )
    }

    fn classify(&self, log_odds: f64) -> CellState {
        if log_odds > self.threshold {
            CellState::Occupied
        } else {
            CellState::Free
        }
    }

    /// Child slot of `key` below a node at `depth`.
    fn child_index(&self, key: &VoxelKey, depth: u32) -> usize {
        let shift = self.params.max_depth - 1 - depth;
        (((key.x >> shift) & 1) | (((key.y >> shift) & 1) << 1) | (((key.z >> shift) & 1) << 2)) as usize
    }

    /// Adds `delta` to the leaf at `key`, clamping, and keeps inner maxima,
    /// pruning and the known-volume counters consistent.
    pub fn update_key(&mut self, key: &VoxelKey, delta: f64) {
        let mut root = self.root.take().unwrap_or_else(|| Box::new(Node::inner()));
        let (old, new) = self.update_node(&mut root, key, 0, delta);
        self.root = Some(root);
        self.adjust_counts(old, new);
    }

    fn adjust_counts(&mut self, old: CellState, new: CellState) {
        match old {
            CellState::Free => self.free_voxels -= 1,
            CellState::Occupied => self.occupied_voxels -= 1,
            CellState::Unknown => {}
        }
        match new {
            CellState::Free => self.free_voxels += 1,
            CellState::Occupied => self.occupied_voxels += 1,
            CellState::Unknown => {}
        }
    }

    fn update_node(&self, node: &mut Node, key: &VoxelKey, depth: u32, delta: f64) -> (CellState, CellState) {
        let max_depth = self.params.max_depth;
        if depth == max_depth {
            let old = self.classify(node.log_odds);
            node.log_odds = (node.log_odds + delta).clamp(self.clamp_lo, self.clamp_hi);
            return (old, self.classify(node.log_odds));
        }
        if node.children.is_none() {
            // Pruned leaf: expand into eight identical children.
            let value = node.log_odds;
            let children: [Option<Box<Node>>; 8] = std::array::from_fn(|_| Some(Box::new(Node::leaf(value))));
            node.children = Some(Box::new(children));
        }
        let idx = self.child_index(key, depth);
        let children = node.children.as_mut().expect("expanded above");
        let (old, new) = match &mut children[idx] {
            Some(child) => self.update_node(child, key, depth + 1, delta),
            slot @ None => {
                let mut child = if depth + 1 == max_depth {
                    Node::leaf(0.0)
                } else {
                    Node::inner()
                };
                let (_, new) = self.update_node(&mut child, key, depth + 1, delta);
                *slot = Some(Box::new(child));
                (CellState::Unknown, new)
            }
        };

        // Refresh the aggregate and try to collapse identical leaves.
        let mut max = f64::NEG_INFINITY;
        let mut prunable = true;
        let first = children[0].as_ref().map(|c| c.log_odds);
        for c in children.iter() {
            match c {
                Some(c) => {
                    max = max.max(c.log_odds);
                    if c.children.is_some() || Some(c.log_odds) != first {
                        prunable = false;
                    }
                }
                None => prunable = false,
            }
        }
        node.log_odds = max;
        if prunable {
            node.children = None;
        }
        (old, new)
    }

    /// Integrates one depth scan taken from `origin`.
    ///
    /// Each voxel receives at most one hit and one miss per scan; a voxel
    /// that is both hit and traversed only receives the hit.
    pub fn insert_scan(
        &mut self,
        origin: &Vector3<f64>,
        endpoints: &[Vector3<f64>],
        max_range: f64,
    ) -> Result<ScanUpdate, MapError> {
        if !self.bounds.contains(origin) {
            return Err(MapError::OriginOutOfBounds {
                x: origin.x,
                y: origin.y,
                z: origin.z,
            });
        }
        let (hits, misses) = self.scan_keys(origin, endpoints, max_range);
        let mut misses: Vec<VoxelKey> = misses.difference(&hits).copied().collect();
        let mut hits: Vec<VoxelKey> = hits.into_iter().collect();
        hits.sort_by_key(VoxelKey::morton);
        misses.sort_by_key(VoxelKey::morton);
        for k in &misses {
            self.update_key(k, self.miss_delta);
        }
        for k in &hits {
            self.update_key(k, self.hit_delta);
        }
        Ok(ScanUpdate {
            hits: hits.len(),
            misses: misses.len(),
        })
    }

    /// Deduplicated hit and miss key sets of a scan (hits not yet removed from misses).
    fn scan_keys(
        &self,
        origin: &Vector3<f64>,
        endpoints: &[Vector3<f64>],
        max_range: f64,
    ) -> (HashSet<VoxelKey>, HashSet<VoxelKey>) {
        let res = self.params.resolution;
        let to_grid = |p: &Vector3<f64>| (p - self.bounds.min) / res;
        let start = to_grid(origin);
        let mut hits = HashSet::new();
        let mut misses = HashSet::new();
        for end in endpoints {
            let ray = end - origin;
            let length = ray.norm();
            if !length.is_finite() {
                continue;
            }
            if length <= max_range {
                let reached = traversal::walk_segment(&start, &to_grid(end), self.dims, |k| {
                    misses.insert(k);
                });
                if let Some(k) = reached {
                    // The walk reports the end voxel only when it is inside the grid.
                    hits.insert(k);
                }
            } else {
                let clipped = origin + ray * (max_range / length);
                let reached = traversal::walk_segment(&start, &to_grid(&clipped), self.dims, |k| {
                    misses.insert(k);
                });
                if let Some(k) = reached {
                    misses.insert(k);
                }
            }
        }
        (hits, misses)
    }

    /// State at `point`, descending at most `depth` levels below the root.
    pub fn search(&self, point: &Vector3<f64>, depth: u32) -> CellState {
        self.search_instrumented(point, depth).state
    }

    pub fn search_instrumented(&self, point: &Vector3<f64>, depth: u32) -> SearchResult {
        let unknown = |visits| SearchResult {
            state: CellState::Unknown,
            node_visits: visits,
        };
        let Some(key) = self.key_of(point) else {
            return unknown(0);
        };
        self.search_key(&key, depth)
    }

    pub fn search_key(&self, key: &VoxelKey, depth: u32) -> SearchResult {
        let depth = depth.min(self.params.max_depth);
        let mut visits = 0;
        let Some(mut node) = self.root.as_deref() else {
            return SearchResult {
                state: CellState::Unknown,
                node_visits: 0,
            };
        };
        for d in 0..depth {
            let Some(children) = node.children.as_deref() else {
                break;
            };
            match children[self.child_index(key, d)].as_deref() {
                Some(child) => {
                    node = child;
                    visits += 1;
                }
                None => {
                    return SearchResult {
                        state: CellState::Unknown,
                        node_visits: visits,
                    }
                }
            }
        }
        SearchResult {
            state: self.classify(node.log_odds),
            node_visits: visits,
        }
    }

    /// Log-odds of the finest voxel at `key`, if it has been observed.
    pub fn log_odds(&self, key: &VoxelKey) -> Option<f64> {
        let mut node = self.root.as_deref()?;
        for d in 0..self.params.max_depth {
            let Some(children) = node.children.as_deref() else {
                break;
            };
            node = children[self.child_index(key, d)].as_deref()?;
        }
        Some(node.log_odds)
    }

    /// `(free, occupied)` volume in m³ from the running counters.
    pub fn mapped_volumes(&self) -> (f64, f64) {
        let v = self.params.resolution.powi(3);
        (self.free_voxels as f64 * v, self.occupied_voxels as f64 * v)
    }

    pub fn known_volume(&self) -> f64 {
        let (f, o) = self.mapped_volumes();
        f + o
    }

    /// `(free, occupied)` volume recomputed by walking the tree.
    pub fn recount_volumes(&self) -> (f64, f64) {
        let mut counts = (0u64, 0u64);
        if let Some(root) = &self.root {
            self.count_node(root, 0, &mut counts);
        }
        let v = self.params.resolution.powi(3);
        (counts.0 as f64 * v, counts.1 as f64 * v)
    }

    fn count_node(&self, node: &Node, depth: u32, counts: &mut (u64, u64)) {
        match &node.children {
            Some(children) => {
                for c in children.iter().flatten() {
                    self.count_node(c, depth + 1, counts);
                }
            }
            None => {
                let n = 1u64 << (3 * (self.params.max_depth - depth));
                match self.classify(node.log_odds) {
                    CellState::Occupied => counts.1 += n,
                    _ => counts.0 += n,
                }
            }
        }
    }

    /// Centers and probabilities of every occupied finest voxel, in Z-order.
    pub fn export_occupied(&self) -> Vec<(Vector3<f64>, f64)> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            self.collect_occupied(root, 0, VoxelKey::new(0, 0, 0), &mut out);
        }
        out
    }

    fn collect_occupied(&self, node: &Node, depth: u32, base: VoxelKey, out: &mut Vec<(Vector3<f64>, f64)>) {
        let max_depth = self.params.max_depth;
        if self.classify(node.log_odds) != CellState::Occupied {
            // Inner values are maxima, so nothing below is occupied either.
            return;
        }
        let shift = max_depth - depth;
        match &node.children {
            Some(children) => {
                for (idx, c) in children.iter().enumerate() {
                    if let Some(c) = c {
                        self.collect_occupied(c, depth + 1, child_base(&base, idx, shift - 1), out);
                    }
                }
            }
            None => {
                let p = probability(node.log_odds);
                expand_block(&base, shift, &mut |k| out.push((self.voxel_center(&k), p)));
            }
        }
    }

    /// Every observed finest voxel with its state (test and oracle support).
    pub fn known_voxels(&self) -> Vec<(VoxelKey, CellState)> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            self.collect_known(root, 0, VoxelKey::new(0, 0, 0), &mut out);
        }
        out
    }

    fn collect_known(&self, node: &Node, depth: u32, base: VoxelKey, out: &mut Vec<(VoxelKey, CellState)>) {
        let shift = self.params.max_depth - depth;
        match &node.children {
            Some(children) => {
                for (idx, c) in children.iter().enumerate() {
                    if let Some(c) = c {
                        self.collect_known(c, depth + 1, child_base(&base, idx, shift - 1), out);
                    }
                }
            }
            None => {
                let s = self.classify(node.log_odds);
                expand_block(&base, shift, &mut |k| out.push((k, s)));
            }
        }
    }

    /// Visits every stored log-odds value (leaves only).
    pub fn for_each_leaf_value(&self, mut f: impl FnMut(f64)) {
        fn walk(node: &Node, f: &mut impl FnMut(f64)) {
            match &node.children {
                Some(children) => children.iter().flatten().for_each(|c| walk(c, f)),
                None => f(node.log_odds),
            }
        }
        if let Some(root) = &self.root {
            walk(root, &mut f);
        }
    }
}

fn child_base(base: &VoxelKey, idx: usize, shift: u32) -> VoxelKey {
    VoxelKey::new(
        base.x | (((idx & 1) as u32) << shift),
        base.y | ((((idx >> 1) & 1) as u32) << shift),
        base.z | ((((idx >> 2) & 1) as u32) << shift),
    )
}

/// Enumerates the `8^shift` finest keys of a block in Z-order.
fn expand_block(base: &VoxelKey, shift: u32, f: &mut impl FnMut(VoxelKey)) {
    if shift == 0 {
        f(*base);
        return;
    }
    for idx in 0..8 {
        expand_block(&child_base(base, idx, shift - 1), shift - 1, f);
    }
}
