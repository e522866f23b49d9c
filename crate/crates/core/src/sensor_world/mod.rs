//! Ground-truth world of axis-aligned boxes, the depth camera that observes
//! it, and clearance queries used as the collision monitor.
//!
//! World files are line oriented:
//!
//! ```text
//! # comment
//! bounds x0 y0 z0 x1 y1 z1
//! box x0 y0 z0 x1 y1 z1
//! ```

mod camera;
mod maze;

pub use camera::{depth_to_points, render_depth, CameraModel, DepthImage, Pose};
pub use maze::{generate_from_spec, generate_maze, MazeKind, MazeSpec};

use std::fmt::Write as _;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::Aabb;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
    #[error("ray direction must be unit length (norm {0})")]
    NonUnitDirection(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Aabb,
    pub boxes: Vec<Aabb>,
}

impl World {
    pub fn new(bounds: Aabb, boxes: Vec<Aabb>) -> Result<Self, WorldError> {
        if !bounds.is_proper() {
            return Err(WorldError::Semantic {
                line: 0,
                message: "bounds have inverted extents".into(),
            });
        }
        for (i, b) in boxes.iter().enumerate() {
            check_box(b, &bounds, i + 1)?;
        }
        Ok(Self { bounds, boxes })
    }

    /// Serializes to the text format read by [`load_world`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt = |b: &Aabb| {
            format!(
                "{} {} {} {} {} {}",
                b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z
            )
        };
        let _ = writeln!(out, "bounds {}", fmt(&self.bounds));
        for b in &self.boxes {
            let _ = writeln!(out, "box {}", fmt(b));
        }
        out
    }

    /// Distance to the nearest box surface or bounds face; negative inside a
    /// box or outside the bounds.
    pub fn clearance(&self, p: &Vector3<f64>) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..3 {
            d = d.min(p[i] - self.bounds.min[i]).min(self.bounds.max[i] - p[i]);
        }
        for b in &self.boxes {
            d = d.min(b.signed_distance(p));
        }
        d
    }

    /// Nearest box hit along a unit-length ray, or `None` past `max_range`.
    /// A ray starting inside a box reports distance 0.
    pub fn raycast(
        &self,
        origin: &Vector3<f64>,
        direction: &Vector3<f64>,
        max_range: f64,
    ) -> Result<Option<f64>, WorldError> {
        let n = direction.norm();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(WorldError::NonUnitDirection(n));
        }
        Ok(self.raycast_unchecked(origin, direction, max_range))
    }

    pub(crate) fn raycast_unchecked(
        &self,
        origin: &Vector3<f64>,
        direction: &Vector3<f64>,
        max_range: f64,
    ) -> Option<f64> {
        let mut best = f64::INFINITY;
        for b in &self.boxes {
            if let Some((t0, t1)) = b.ray_interval(origin, direction) {
                if t1 < 0.0 {
                    continue;
                }
                best = best.min(t0.max(0.0));
            }
        }
        (best <= max_range).then_some(best)
    }
}

fn check_box(b: &Aabb, bounds: &Aabb, line: usize) -> Result<(), WorldError> {
    if !b.is_proper() {
        return Err(WorldError::Semantic {
            line,
            message: "box has inverted extents (min must be below max on every axis)".into(),
        });
    }
    if !bounds.contains_box(b) {
        return Err(WorldError::Semantic {
            line,
            message: "box lies outside the world bounds".into(),
        });
    }
    Ok(())
}

/// Parses a world document.
pub fn load_world(text: &str) -> Result<World, WorldError> {
    let mut bounds: Option<Aabb> = None;
    let mut boxes = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(keyword_col, keyword)) = tokens.first() else {
            continue;
        };
        let parse_err = |column: usize, message: String| WorldError::Parse {
            line: line_no,
            column,
            message,
        };
        let values = || -> Result<Aabb, WorldError> {
            if tokens.len() != 7 {
                let col = tokens.get(7).map_or(content.trim_end().len() + 1, |t| t.0);
                return Err(parse_err(
                    col,
                    format!("'{keyword}' expects 6 numbers, found {}", tokens.len() - 1),
                ));
            }
            let mut v = [0.0; 6];
            for (slot, &(col, tok)) in v.iter_mut().zip(&tokens[1..]) {
                *slot = tok
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(col, format!("'{tok}' is not a finite number")))?;
            }
            Ok(Aabb::from_slice(v))
        };
        match (keyword, bounds.is_some()) {
            ("bounds", false) => {
                let b = values()?;
                if !b.is_proper() {
                    return Err(WorldError::Semantic {
                        line: line_no,
                        message: "bounds have inverted extents".into(),
                    });
                }
                bounds = Some(b);
            }
            ("bounds", true) => return Err(parse_err(keyword_col, "duplicate 'bounds' line".into())),
            ("box", true) => {
                let b = values()?;
                check_box(&b, bounds.as_ref().expect("checked"), line_no)?;
                boxes.push(b);
            }
            (_, false) => {
                return Err(parse_err(
                    keyword_col,
                    format!("expected 'bounds' as the first directive, found '{keyword}'"),
                ))
            }
            (other, true) => return Err(parse_err(keyword_col, format!("unknown directive '{other}'"))),
        }
    }
    let bounds = bounds.ok_or(WorldError::Parse {
        line: last_line.max(1),
        column: 1,
        message: "missing 'bounds' line".into(),
    })?;
    Ok(World { bounds, boxes })
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}
