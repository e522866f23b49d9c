//! Command implementations behind the `peacock` binary. Each command takes
//! paths and returns a report so it can be driven from tests directly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use peacock_core::config::RunConfig;
use peacock_core::mission::{parse_map_csv, run_mission, write_artifacts, write_map_csv, write_ply, Outcome};
use peacock_core::peacock::{precompute_bundle, PeacockBundle};
use peacock_core::sensor_world::{generate_maze, load_world, MazeKind, World};

pub const TIMING_RUNS: usize = 20;

/// Defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    RunConfig::parse(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn load_world_file(path: &Path) -> Result<World> {
    let text = fs::read_to_string(path).with_context(|| format!("reading world {}", path.display()))?;
    load_world(&text).with_context(|| format!("in world {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeReport {
    pub first_steps: usize,
    pub second_steps: usize,
    pub median_ms: f64,
    pub p90_ms: f64,
}

impl std::fmt::Display for PrecomputeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "first steps: {}", self.first_steps)?;
        writeln!(f, "second steps: {}", self.second_steps)?;
        write!(
            f,
            "precompute time over {TIMING_RUNS} runs: median {:.3} ms, p90 {:.3} ms",
            self.median_ms, self.p90_ms
        )
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// One row per sample: `step,row,col,branch,t,x,y,z`. First steps have
/// branch -1; second-step times continue from the end of the first step.
pub fn write_bundle_csv<W: Write>(mut w: W, bundle: &PeacockBundle) -> std::io::Result<()> {
    writeln!(w, "step,row,col,branch,t,x,y,z")?;
    let period = bundle.params().period;
    let cols = bundle.cols();
    for (i, first) in bundle.first_steps().iter().enumerate() {
        let (row, col) = (i / cols, i % cols);
        for (t, p) in bundle.first_sample_times().iter().zip(&first.samples) {
            writeln!(w, "1,{row},{col},-1,{:.6},{:.9},{:.9},{:.9}", t, p.x, p.y, p.z)?;
        }
        for (b, second) in first.second_steps.iter().enumerate() {
            for (t, p) in bundle.second_sample_times().iter().zip(&second.samples) {
                writeln!(w, "2,{row},{col},{b},{:.6},{:.9},{:.9},{:.9}", period + t, p.x, p.y, p.z)?;
            }
        }
    }
    Ok(())
}

pub fn cmd_precompute(config: Option<&Path>, out: &Path) -> Result<PrecomputeReport> {
    let params = load_config(config)?.mission_config()?.bundle;
    let mut times = Vec::with_capacity(TIMING_RUNS);
    let mut bundle = None;
    for _ in 0..TIMING_RUNS {
        let started = Instant::now();
        let b = precompute_bundle(&params)?;
        times.push(started.elapsed().as_secs_f64() * 1e3);
        bundle = Some(b);
    }
    let bundle = bundle.expect("at least one run");
    times.sort_by(f64::total_cmp);
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_bundle_csv(&mut w, &bundle)?;
    w.flush()?;
    Ok(PrecomputeReport {
        first_steps: bundle.first_steps().len(),
        second_steps: bundle.second_step_count(),
        median_ms: percentile(&times, 0.5),
        p90_ms: percentile(&times, 0.9),
    })
}

/// Runs a mission and writes its artifacts into `out`. `seed` overrides
/// `mission.seed`.
pub fn cmd_explore(world: &Path, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let world = load_world_file(world)?;
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.set("mission.seed", &seed.to_string())?;
    }
    let mission = cfg.mission_config()?;
    let run = run_mission(&world, &mission)?;
    write_artifacts(out, &run).with_context(|| format!("writing artifacts to {}", out.display()))?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    Ok(run.metrics.outcome)
}

/// Process exit code for a finished mission: exhausting reachable space is
/// as much a success as reaching a goal.
pub fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Completed | Outcome::Stalled => 0,
        Outcome::TimedOut => 3,
        Outcome::CollisionFailure => 4,
    }
}

pub fn cmd_genworld(kind: MazeKind, seed: u64, out: &Path) -> Result<()> {
    let world = generate_maze(kind, seed);
    fs::write(out, world.to_text()).with_context(|| format!("writing {}", out.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Ply,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ply" => Ok(Self::Ply),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown export format '{other}' (expected ply or csv)")),
        }
    }
}

/// Converts a `map.csv` written by `explore`. Returns the voxel count.
pub fn cmd_export(map: &Path, format: ExportFormat, out: &Path) -> Result<usize> {
    let text = fs::read_to_string(map).with_context(|| format!("reading map {}", map.display()))?;
    let voxels = match parse_map_csv(&text) {
        Ok(v) => v,
        Err(e) => bail!("in map {}: {e}", map.display()),
    };
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    match format {
        ExportFormat::Ply => write_ply(&mut w, &voxels)?,
        ExportFormat::Csv => write_map_csv(&mut w, &voxels)?,
    }
    w.flush()?;
    Ok(voxels.len())
}
