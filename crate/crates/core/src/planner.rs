//! Best-path selection over the peacock bundle.
//!
//! Every sample of a (row, col) family is looked up in the octree at the
//! query depth. Free samples add `a`, unknown samples add `b > a`, and an
//! occupied sample disqualifies the whole family. The highest score wins;
//! ties resolve to the median of the tied rows and columns.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::peacock::{FamilySamples, PeacockBundle};
use crate::trajgen::Segment3D;
use crate::voxmap::{CellState, OccupancyOctree, VoxelKey};

/// Per-sample rewards: `free` for known free space, `unknown` for unobserved space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub free: f64,
    pub unknown: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            free: 1.0,
            unknown: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    pub weights: ScoreWeights,
    /// Octree levels descended per lookup.
    pub query_depth: u32,
    /// Whether an occupied second-step sample blocks its family (otherwise it adds 0).
    pub second_step_blocks: bool,
    /// Reset the score to 0 on an occupied sample and keep accumulating,
    /// instead of disqualifying the family. Gives up the no-collision guarantee.
    pub literal_reset: bool,
    /// A first-step sample counts as occupied if any occupied finest voxel
    /// overlaps the cube of this half-width around it, or if it is closer than
    /// this to the map bounds. Second-step samples are looked up as they are.
    pub safety_margin: f64,
    /// Distance past the first-step endpoint, along its direction of travel,
    /// that must be observed free out to the safety margin, so the vehicle
    /// can always brake to rest after the step. These points only gate the
    /// family; they add nothing to its score.
    pub stopping_distance: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            weights: ScoreWeights::default(),
            query_depth: 15,
            second_step_blocks: false,
            literal_reset: false,
            safety_margin: 1.0,
            stopping_distance: 0.75,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), String> {
        let w = self.weights;
        if !(w.free > 0.0 && w.unknown > w.free && w.unknown.is_finite()) {
            return Err("score weights must satisfy unknown > free > 0".into());
        }
        if !(self.safety_margin >= 0.0 && self.safety_margin.is_finite()) {
            return Err("safety_margin must be non-negative".into());
        }
        if !(self.stopping_distance >= 0.0 && self.stopping_distance.is_finite()) {
            return Err("stopping_distance must be non-negative".into());
        }
        if self.query_depth == 0 {
            return Err("query_depth must be at least 1".into());
        }
        Ok(())
    }
}

/// Row-major family scores with blocked flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
    blocked: Vec<bool>,
    unknown: Vec<usize>,
}

impl ScoreMatrix {
    /// Builds a matrix from raw values; blocked cells are forced to 0.
    pub fn from_parts(rows: usize, cols: usize, mut scores: Vec<f64>, blocked: Vec<bool>) -> Self {
        assert_eq!(scores.len(), rows * cols);
        assert_eq!(blocked.len(), rows * cols);
        for (s, b) in scores.iter_mut().zip(&blocked) {
            if *b {
                *s = 0.0;
            }
        }
        let unknown = vec![0; rows * cols];
        Self {
            rows,
            cols,
            scores,
            blocked,
            unknown,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn score(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }
    pub fn is_blocked(&self, row: usize, col: usize) -> bool {
        self.blocked[row * self.cols + col]
    }
    /// Unknown samples counted for the family before scoring stopped.
    pub fn unknown_samples(&self, row: usize, col: usize) -> usize {
        self.unknown[row * self.cols + col]
    }
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }
    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
    /// True when some unblocked family still reaches unknown space.
    pub fn has_unknown_in_reach(&self) -> bool {
        self.unknown
            .iter()
            .zip(&self.blocked)
            .any(|(u, b)| *u > 0 && !*b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanDecision {
    Selected { row: usize, col: usize },
    AllBlocked,
}

/// Classification of one sample point, including the safety margin.
pub fn classify_sample(map: &OccupancyOctree, p: &Vector3<f64>, depth: u32, margin: f64) -> CellState {
    if margin > 0.0 && !map.bounds().shrunk(margin).contains(p) {
        return CellState::Occupied;
    }
    let center = map.search(p, depth);
    if center == CellState::Occupied || margin <= 0.0 {
        return center;
    }
    match cube_state(map, p, Vector3::repeat(margin)) {
        CellState::Occupied => CellState::Occupied,
        _ => center,
    }
}

/// Occupied if any finest voxel overlapping the cube is occupied, else
/// Unknown if any is unknown, else Free. Finest voxels bound the clearance to
/// observed obstacles more tightly than coarse node corners would.
fn cube_state(map: &OccupancyOctree, p: &Vector3<f64>, half_width: Vector3<f64>) -> CellState {
    let bounds = map.bounds();
    let res = map.params().resolution;
    let leaf_depth = map.params().max_depth;
    let dims = map.dims();
    let mut lo = [0u32; 3];
    let mut hi = [0u32; 3];
    for i in 0..3 {
        let to_leaf = |v: f64| {
            let c = ((v - bounds.min[i]) / res).floor();
            c.clamp(0.0, (dims[i] - 1) as f64) as u32
        };
        lo[i] = to_leaf(p[i] - half_width[i]);
        hi[i] = to_leaf(p[i] + half_width[i]);
    }
    let mut worst = CellState::Free;
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                match map.search_key(&VoxelKey::new(x, y, z), leaf_depth).state {
                    CellState::Occupied => return CellState::Occupied,
                    CellState::Unknown => worst = CellState::Unknown,
                    CellState::Free => {}
                }
            }
        }
    }
    worst
}

struct FamilyScore {
    score: f64,
    blocked: bool,
    unknown: usize,
}

const STOP_SPACING: f64 = 0.25;

fn stopping_clear(map: &OccupancyOctree, family: &FamilySamples, params: &PlannerParams) -> bool {
    let Some(end) = family.first.last() else {
        return true;
    };
    let n = (params.stopping_distance / STOP_SPACING).ceil() as usize;
    // Only the sample's own layer has to be observed; the camera rarely sees
    // the full margin above and below a point a few metres away.
    let slab = Vector3::new(params.safety_margin, params.safety_margin, 0.0);
    (1..=n).all(|k| {
        let p = end + family.end_direction * (params.stopping_distance * k as f64 / n as f64);
        map.bounds().shrunk(params.safety_margin).contains(&p)
            && cube_state(map, &p, slab) == CellState::Free
    })
}

fn score_family(map: &OccupancyOctree, family: &FamilySamples, params: &PlannerParams) -> FamilyScore {
    let w = params.weights;
    let mut out = FamilyScore {
        score: 0.0,
        blocked: false,
        unknown: 0,
    };
    if !params.literal_reset && params.stopping_distance > 0.0 && !stopping_clear(map, family, params) {
        out.blocked = true;
        return out;
    }
    for (first_step, p) in family.iter() {
        let margin = if first_step { params.safety_margin } else { 0.0 };
        match classify_sample(map, p, params.query_depth, margin) {
            CellState::Occupied => {
                if params.literal_reset {
                    out.score = 0.0;
                } else if first_step || params.second_step_blocks {
                    out.score = 0.0;
                    out.blocked = true;
                    return out;
                }
            }
            CellState::Free => out.score += w.free,
            CellState::Unknown => {
                out.score += w.unknown;
                out.unknown += 1;
            }
        }
    }
    out
}

/// Scores every family. Families are independent and are scored in parallel;
/// the result does not depend on scheduling.
pub fn score_bundle(
    map: &OccupancyOctree,
    families: &[FamilySamples],
    rows: usize,
    cols: usize,
    params: &PlannerParams,
) -> ScoreMatrix {
    score_bundle_with(map, families, rows, cols, params, true)
}

pub fn score_bundle_with(
    map: &OccupancyOctree,
    families: &[FamilySamples],
    rows: usize,
    cols: usize,
    params: &PlannerParams,
    parallel: bool,
) -> ScoreMatrix {
    assert_eq!(families.len(), rows * cols, "one sample family per grid cell");
    let results: Vec<FamilyScore> = if parallel {
        families.par_iter().map(|f| score_family(map, f, params)).collect()
    } else {
        families.iter().map(|f| score_family(map, f, params)).collect()
    };
    ScoreMatrix {
        rows,
        cols,
        scores: results.iter().map(|r| r.score).collect(),
        blocked: results.iter().map(|r| r.blocked).collect(),
        unknown: results.iter().map(|r| r.unknown).collect(),
    }
}

fn lower_median(values: &mut [usize]) -> usize {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Picks the best family; ties go to the lower median of the tied rows and
/// columns. When that median cell is not itself tied, the tied cell nearest to
/// it (Manhattan distance, then row, then column) is taken instead.
pub fn select_best(scores: &ScoreMatrix) -> PlanDecision {
    let mut best = 0.0;
    let mut ties: Vec<(usize, usize)> = Vec::new();
    for row in 0..scores.rows {
        for col in 0..scores.cols {
            if scores.is_blocked(row, col) {
                continue;
            }
            let s = scores.score(row, col);
            if s > best {
                best = s;
                ties.clear();
                ties.push((row, col));
            } else if s == best && s > 0.0 {
                ties.push((row, col));
            }
        }
    }
    match ties.len() {
        0 => PlanDecision::AllBlocked,
        1 => PlanDecision::Selected {
            row: ties[0].0,
            col: ties[0].1,
        },
        _ => {
            let mr = lower_median(&mut ties.iter().map(|t| t.0).collect::<Vec<_>>());
            let mc = lower_median(&mut ties.iter().map(|t| t.1).collect::<Vec<_>>());
            let &(row, col) = ties
                .iter()
                .min_by_key(|(r, c)| (r.abs_diff(mr) + c.abs_diff(mc), *r, *c))
                .expect("non-empty");
            PlanDecision::Selected { row, col }
        }
    }
}

/// One planning cycle at a pose.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub decision: PlanDecision,
    pub scores: ScoreMatrix,
    /// The selected first step in world coordinates.
    pub segment: Option<Segment3D>,
}

pub fn plan_step(
    map: &OccupancyOctree,
    bundle: &PeacockBundle,
    position: &Vector3<f64>,
    yaw: f64,
    params: &PlannerParams,
) -> PlanOutcome {
    let families = bundle.transform_samples(position, yaw);
    let scores = score_bundle(map, &families, bundle.rows(), bundle.cols(), params);
    let decision = select_best(&scores);
    let segment = match decision {
        PlanDecision::Selected { row, col } => Some(
            bundle
                .selected_world_segment(row, col, position, yaw)
                .expect("selection lies inside the grid"),
        ),
        PlanDecision::AllBlocked => None,
    };
    PlanOutcome {
        decision,
        scores,
        segment,
    }
}
