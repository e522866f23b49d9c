//! Run-directory writers. All numbers are printed with fixed formats so the
//! files are byte-identical across identical runs.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{MissionMetrics, MissionRun, PathSample, PlanRecord};
use crate::geometry::Aabb;

/// Occupied voxels as `x,y,z,probability` rows.
pub fn write_map_csv<W: Write>(mut w: W, voxels: &[(Vector3<f64>, f64)]) -> io::Result<()> {
    writeln!(w, "x,y,z,probability")?;
    for (c, p) in voxels {
        writeln!(w, "{},{},{},{}", c.x, c.y, c.z, p)?;
    }
    Ok(())
}

/// Reads the format written by [`write_map_csv`].
pub fn parse_map_csv(text: &str) -> Result<Vec<(Vector3<f64>, f64)>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "x,y,z,probability" => {}
        _ => return Err("line 1: expected header `x,y,z,probability`".into()),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 fields, found {}", i + 1, fields.len()));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| format!("line {}: `{f}` is not a number", i + 1))?;
        }
        out.push((Vector3::new(v[0], v[1], v[2]), v[3]));
    }
    Ok(out)
}

/// ASCII point cloud with the occupancy probability as grayscale intensity.
pub fn write_ply<W: Write>(mut w: W, voxels: &[(Vector3<f64>, f64)]) -> io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", voxels.len())?;
    for name in ["x", "y", "z", "intensity"] {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;
    for (c, p) in voxels {
        writeln!(w, "{} {} {} {}", c.x, c.y, c.z, p)?;
    }
    Ok(())
}

/// Occupied cells projected onto XY with the flown path on top.
pub fn write_topdown_svg<W: Write>(
    mut w: W,
    bounds: &Aabb,
    voxels: &[(Vector3<f64>, f64)],
    resolution: f64,
    path: &[PathSample],
) -> io::Result<()> {
    const SCALE: f64 = 20.0;
    let ext = bounds.extent();
    let (width, height) = (ext.x * SCALE, ext.y * SCALE);
    // SVG y grows downwards; flip so +y is up.
    let px = |x: f64| (x - bounds.min.x) * SCALE;
    let py = |y: f64| (bounds.max.y - y) * SCALE;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    )?;
    writeln!(w, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##)?;
    let cells: BTreeSet<(i64, i64)> = voxels
        .iter()
        .map(|(c, _)| {
            (
                ((c.x - bounds.min.x) / resolution).floor() as i64,
                ((c.y - bounds.min.y) / resolution).floor() as i64,
            )
        })
        .collect();
    let side = resolution * SCALE;
    for (i, j) in cells {
        let x = bounds.min.x + i as f64 * resolution;
        let y = bounds.min.y + (j + 1) as f64 * resolution;
        writeln!(
            w,
            r##"<rect x="{:.1}" y="{:.1}" width="{side:.1}" height="{side:.1}" fill="#404040"/>"##,
            px(x),
            py(y)
        )?;
    }
    if !path.is_empty() {
        write!(w, r##"<polyline fill="none" stroke="#d03030" stroke-width="2" points=""##)?;
        for (k, s) in path.iter().enumerate() {
            if k > 0 {
                write!(w, " ")?;
            }
            write!(w, "{:.1},{:.1}", px(s.position.x), py(s.position.y))?;
        }
        writeln!(w, r#""/>"#)?;
    }
    writeln!(w, "</svg>")
}

fn write_metrics<W: Write>(mut w: W, metrics: &MissionMetrics) -> io::Result<()> {
    writeln!(
        w,
        "t,x,y,z,vx,vy,vz,yaw,path_length_m,free_m3,occ_m3,known_m3,cycle,score,blocked_count,plan_ms"
    )?;
    for r in &metrics.series {
        writeln!(
            w,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3},{:.3},{},{},{},{:.3}",
            r.t,
            r.position.x,
            r.position.y,
            r.position.z,
            r.velocity.x,
            r.velocity.y,
            r.velocity.z,
            r.yaw,
            r.path_length,
            r.free_volume,
            r.occupied_volume,
            r.known_volume,
            r.cycle,
            r.score,
            r.blocked_count,
            r.plan_ms
        )?;
    }
    Ok(())
}

fn write_path<W: Write>(mut w: W, path: &[PathSample]) -> io::Result<()> {
    writeln!(w, "t,x,y,z,clearance")?;
    for s in path {
        writeln!(
            w,
            "{:.3},{:.6},{:.6},{:.6},{:.6}",
            s.t, s.position.x, s.position.y, s.position.z, s.clearance
        )?;
    }
    Ok(())
}

fn write_planner<W: Write>(mut w: W, log: &[PlanRecord]) -> io::Result<()> {
    writeln!(w, "cycle,t,row,col,score,blocked_count,unknown_in_reach,plan_ms")?;
    let opt = |v: Option<usize>| v.map_or_else(|| "-1".to_string(), |v| v.to_string());
    for r in log {
        writeln!(
            w,
            "{},{:.3},{},{},{},{},{},{:.3}",
            r.cycle,
            r.t,
            opt(r.row),
            opt(r.col),
            r.score,
            r.blocked_count,
            u8::from(r.unknown_in_reach),
            r.plan_ms
        )?;
    }
    Ok(())
}

fn write_summary<W: Write>(mut w: W, metrics: &MissionMetrics, takeoff_length: f64) -> io::Result<()> {
    let s = &metrics.summary;
    writeln!(w, "outcome: {}", metrics.outcome)?;
    writeln!(w, "seed: {}", s.seed)?;
    writeln!(w, "duration_s: {:.3}", s.duration)?;
    writeln!(w, "flight_length_m: {:.3}", s.flight_length)?;
    writeln!(w, "takeoff_length_m: {:.3}", takeoff_length)?;
    writeln!(w, "avg_velocity_mps: {:.3}", s.avg_velocity)?;
    writeln!(w, "mapped_volume_m3: {:.3}", s.mapped_volume)?;
    writeln!(w, "avg_mapping_rate_m3ps: {:.3}", s.mapping_rate)?;
    writeln!(w, "mapping_efficiency_m3pm: {:.3}", s.mapping_efficiency)?;
    writeln!(w, "cycles: {}", s.cycles)?;
    writeln!(w, "recoveries: {}", s.recoveries)?;
    writeln!(w, "aborts: {}", s.aborts)?;
    writeln!(w, "min_clearance_m: {:.3}", s.min_clearance)
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

/// Writes metrics.csv, path.csv, planner.csv, map.csv, map.ply, summary.txt
/// and topdown.svg into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, run: &MissionRun) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let occupied = run.map.export_occupied();
    write_metrics(create(dir, "metrics.csv")?, &run.metrics)?;
    write_path(create(dir, "path.csv")?, &run.path)?;
    write_planner(create(dir, "planner.csv")?, &run.planner_log)?;
    write_map_csv(create(dir, "map.csv")?, &occupied)?;
    write_ply(create(dir, "map.ply")?, &occupied)?;
    write_summary(create(dir, "summary.txt")?, &run.metrics, run.takeoff_length)?;
    write_topdown_svg(
        create(dir, "topdown.svg")?,
        run.map.bounds(),
        &occupied,
        run.map.params().resolution,
        &run.path,
    )?;
    Ok(())
}
