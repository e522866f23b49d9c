//! Seeded 3D maze generator.
//!
//! A square cell grid is carved into a spanning tree by randomized
//! depth-first search, a few extra walls are knocked out to create loops,
//! and some of the carved passages are left partly blocked by a lower or an
//! upper half-height wall so that the maze cannot be solved in a single
//! horizontal plane.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::World;
use crate::geometry::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MazeKind {
    /// 20 × 20 × 4 m.
    Desk,
    /// 90 × 90 × 8 m.
    Full,
}

impl std::str::FromStr for MazeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Self::Desk),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown maze kind '{other}' (expected desk or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeSpec {
    pub size_xy: f64,
    pub height: f64,
    pub cell: f64,
    pub wall_thickness: f64,
    /// Top of a lower blocking wall.
    pub lower_wall_top: f64,
    /// Bottom of an upper blocking wall.
    pub upper_wall_bottom: f64,
    /// Chance that a remaining tree wall is removed to form a loop.
    pub loop_prob: f64,
    /// Chance that a carved passage keeps a half-height wall.
    pub half_wall_prob: f64,
}

impl MazeSpec {
    pub fn for_kind(kind: MazeKind) -> Self {
        match kind {
            MazeKind::Desk => Self {
                size_xy: 20.0,
                height: 4.0,
                cell: 20.0 / 3.0,
                wall_thickness: 0.5,
                lower_wall_top: 1.0,
                upper_wall_bottom: 3.0,
                loop_prob: 0.2,
                half_wall_prob: 0.3,
            },
            MazeKind::Full => Self {
                size_xy: 90.0,
                height: 8.0,
                cell: 10.0,
                wall_thickness: 0.5,
                lower_wall_top: 4.0,
                upper_wall_bottom: 4.0,
                loop_prob: 0.15,
                half_wall_prob: 0.25,
            },
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Edge {
    Wall,
    Open,
    Lower,
    Upper,
}

pub fn generate_maze(kind: MazeKind, seed: u64) -> World {
    generate_from_spec(&MazeSpec::for_kind(kind), seed)
}

pub fn generate_from_spec(spec: &MazeSpec, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (spec.size_xy / spec.cell).round() as usize;
    // Vertical edges: wall between (i, j) and (i + 1, j); horizontal: (i, j) and (i, j + 1).
    let mut vertical = vec![vec![Edge::Wall; n]; n.saturating_sub(1)];
    let mut horizontal = vec![vec![Edge::Wall; n.saturating_sub(1)]; n];

    let mut visited = vec![vec![false; n]; n];
    let mut stack = vec![(0usize, 0usize)];
    visited[0][0] = true;
    while let Some(&(i, j)) = stack.last() {
        let mut next = Vec::with_capacity(4);
        if i > 0 && !visited[i - 1][j] {
            next.push((i - 1, j));
        }
        if i + 1 < n && !visited[i + 1][j] {
            next.push((i + 1, j));
        }
        if j > 0 && !visited[i][j - 1] {
            next.push((i, j - 1));
        }
        if j + 1 < n && !visited[i][j + 1] {
            next.push((i, j + 1));
        }
        match next.choose(&mut rng) {
            Some(&(a, b)) => {
                open(&mut vertical, &mut horizontal, (i, j), (a, b), Edge::Open);
                visited[a][b] = true;
                stack.push((a, b));
            }
            None => {
                stack.pop();
            }
        }
    }

    for row in vertical.iter_mut().chain(horizontal.iter_mut()) {
        for e in row.iter_mut() {
            *e = match *e {
                Edge::Wall if rng.gen_bool(spec.loop_prob) => Edge::Open,
                Edge::Open if rng.gen_bool(spec.half_wall_prob) => {
                    if rng.gen_bool(0.5) {
                        Edge::Lower
                    } else {
                        Edge::Upper
                    }
                }
                other => other,
            };
        }
    }

    let h = spec.height;
    let t = spec.wall_thickness;
    let half = t / 2.0;
    let size = spec.size_xy;
    let mut boxes = vec![
        Aabb::from_slice([0.0, 0.0, 0.0, size, half, h]),
        Aabb::from_slice([0.0, size - half, 0.0, size, size, h]),
        Aabb::from_slice([0.0, half, 0.0, half, size - half, h]),
        Aabb::from_slice([size - half, half, 0.0, size, size - half, h]),
    ];
    let z_range = |e: Edge| match e {
        Edge::Wall => Some((0.0, h)),
        Edge::Lower => Some((0.0, spec.lower_wall_top)),
        Edge::Upper => Some((spec.upper_wall_bottom, h)),
        Edge::Open => None,
    };
    for (i, row) in vertical.iter().enumerate() {
        let x = (i + 1) as f64 * spec.cell;
        for (j, e) in row.iter().enumerate() {
            if let Some((z0, z1)) = z_range(*e) {
                let y0 = (j as f64 * spec.cell).max(half);
                let y1 = ((j + 1) as f64 * spec.cell).min(size - half);
                boxes.push(Aabb::new(Vector3::new(x - half, y0, z0), Vector3::new(x + half, y1, z1)));
            }
        }
    }
    for (i, row) in horizontal.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if let Some((z0, z1)) = z_range(*e) {
                let y = (j + 1) as f64 * spec.cell;
                let x0 = (i as f64 * spec.cell).max(half);
                let x1 = ((i + 1) as f64 * spec.cell).min(size - half);
                boxes.push(Aabb::new(Vector3::new(x0, y - half, z0), Vector3::new(x1, y + half, z1)));
            }
        }
    }

    World::new(Aabb::from_slice([0.0, 0.0, 0.0, size, size, h]), boxes)
        .expect("generated boxes lie within bounds")
}

fn open(
    vertical: &mut [Vec<Edge>],
    horizontal: &mut [Vec<Edge>],
    a: (usize, usize),
    b: (usize, usize),
    e: Edge,
) {
    if a.1 == b.1 {
        vertical[a.0.min(b.0)][a.1] = e;
    } else {
        horizontal[a.0][a.1.min(b.1)] = e;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_by_kind() {
        let desk = generate_maze(MazeKind::Desk, 7);
        assert_eq!(desk.bounds, Aabb::from_slice([0.0, 0.0, 0.0, 20.0, 20.0, 4.0]));
        let full = generate_maze(MazeKind::Full, 7);
        assert_eq!(full.bounds, Aabb::from_slice([0.0, 0.0, 0.0, 90.0, 90.0, 8.0]));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate_maze(MazeKind::Desk, 3), generate_maze(MazeKind::Desk, 3));
        assert_ne!(
            generate_maze(MazeKind::Full, 3).to_text(),
            generate_maze(MazeKind::Full, 4).to_text()
        );
    }

    #[test]
    fn start_cell_is_clear() {
        for seed in 0..20 {
            let w = generate_maze(MazeKind::Desk, seed);
            assert!(w.clearance(&Vector3::new(2.5, 2.5, 2.0)) > 1.5);
        }
    }
}
