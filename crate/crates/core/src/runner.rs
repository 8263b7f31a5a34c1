//! Run directories: configuration, per-iteration artifacts, reports, and
//! cross-run comparison.
//!
//! A run directory holds
//!
//! * `config.json`: the effective [`RunConfig`], re-loadable as is;
//! * `metrics.csv`: one row per iteration, deterministic for a fixed seed;
//! * `timing.csv`: wall-clock plan time per iteration;
//! * `path_iterN.csv`: poses executed in iteration N;
//! * `map_iterN.pgm`: occupancy at the query resolution, N = 0 is the
//!   initial map;
//! * `map_final.json`: a [`MapSnapshot`] of the final map;
//! * `run_report.json`: a [`RunReport`].
//!
//! Occupancy rasters store `round(255 p)`: free space is 0 (black), unknown
//! 128, occupied 255 (white). Row 0 of the image is the largest y.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::env::{read_metadata, GroundTruthEnv};
use crate::error::{Error, Result};
use crate::exploration::{ExplorationConfig, ExplorationRun, Method, Outcome, RunStatus};
use crate::geometry::{Bounds, Pose2, QueryGrid};
use crate::hilbert_map::{HilbertMap, MapSnapshot};
use crate::pgm::Pgm;
use crate::planner::ObjectiveConfig;
use crate::sensor::{expected_observations, SensorModel};
use crate::PerturbedMap;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const REPORT_FILE: &str = "run_report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const SNAPSHOT_FILE: &str = "map_final.json";

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Environment PGM; its JSON sidecar sits next to it.
    pub env_path: Option<PathBuf>,
    pub method: Method,
    pub seed: u64,
    pub iterations: usize,
    /// Start pose `[x, y, heading]`; falls back to the sidecar's.
    pub start: Option<[f64; 3]>,
    pub out_dir: Option<PathBuf>,
    pub exploration: ExplorationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env_path: None,
            method: Method::Functional,
            seed: 0,
            iterations: 40,
            start: None,
            out_dir: None,
            exploration: ExplorationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.exploration.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// Summary written to `run_report.json`. Contains no wall-clock values, so
/// it is reproducible like `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub seed: u64,
    pub env_hash: String,
    pub start: [f64; 3],
    pub iterations_requested: usize,
    pub iterations_completed: usize,
    pub status: RunStatus,
    pub outcomes: Vec<Outcome>,
    /// Entropy of the all-unknown map over the query grid.
    pub baseline_entropy_bits: f64,
    /// Entropy after the initial scan.
    pub initial_entropy_bits: f64,
    pub final_entropy_bits: f64,
    pub distance_traveled_m: f64,
}

impl RunReport {
    /// Hard failures: a collision, or a dead end with nowhere left to go.
    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Collided | RunStatus::Exhausted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub map_entropy_bits: f64,
    pub mean_occ_along_path: f64,
    pub max_occ_along_path: f64,
    pub distance_traveled_m: f64,
    pub outcome: Outcome,
    pub replans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub iteration: usize,
    pub plan_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PathRow {
    x: f64,
    y: f64,
    heading: f64,
}

/// Loads an environment and resolves the start pose from `cfg.start` or the
/// sidecar.
pub fn load_env(cfg: &RunConfig) -> Result<(GroundTruthEnv, Pose2)> {
    let path = cfg
        .env_path
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("no environment given".into()))?;
    let env = GroundTruthEnv::load(path)?;
    let start = match cfg.start.or(read_metadata(path)?.start) {
        Some([x, y, h]) => Pose2::new(x, y, h),
        None => {
            return Err(Error::InvalidInput(format!(
                "no start pose in the config or in the sidecar of {}",
                path.display()
            )))
        }
    };
    Ok((env, start))
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// 8-bit P5 raster of `values` in [0, 1], given in [`QueryGrid::centers`]
/// order. The top image row is the largest y.
pub fn raster_bytes(grid: &QueryGrid, comment: &str, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), grid.len());
    let mut data = Vec::with_capacity(grid.len());
    for r in (0..grid.rows).rev() {
        for v in &values[r * grid.cols..(r + 1) * grid.cols] {
            data.push((255.0 * v.clamp(0.0, 1.0)).round() as u8);
        }
    }
    let mut buf = Vec::new();
    Pgm::write_p5(&mut buf, grid.cols, grid.rows, &data, Some(comment))
        .expect("writing to a Vec cannot fail");
    buf
}

pub const OCCUPANCY_COMMENT: &str =
    "occupancy: 0 = free (black), 128 = unknown, 255 = occupied (white)";
pub const ENTROPY_COMMENT: &str = "entropy: 0 = certain, 255 = one bit";
pub const MI_COMMENT: &str = "mutual information: 0 = none, 255 = raster maximum";

pub fn occupancy_raster(map: &HilbertMap, grid: &QueryGrid) -> Vec<u8> {
    let v: Vec<f64> = grid.centers().map(|c| map.predict_occupancy(&c)).collect();
    raster_bytes(grid, OCCUPANCY_COMMENT, &v)
}

pub fn entropy_raster(map: &HilbertMap, grid: &QueryGrid) -> Vec<u8> {
    let v: Vec<f64> = grid.centers().map(|c| map.entropy(&c)).collect();
    raster_bytes(grid, ENTROPY_COMMENT, &v)
}

/// Pointwise information gained at each cell from the expected free
/// observations at `pose`, scaled so the maximum is 255.
pub fn mi_raster(
    map: &HilbertMap,
    grid: &QueryGrid,
    pose: &Pose2,
    sensor: &SensorModel,
    cfg: &ObjectiveConfig,
) -> Result<Vec<u8>> {
    let obs = expected_observations(map, pose, sensor, cfg.p_block, cfg.p_free);
    let mut v = vec![0.0; grid.len()];
    if !obs.is_empty() {
        let pm = PerturbedMap::build(map, obs, cfg.gp_noise)?;
        for (x, c) in v.iter_mut().zip(grid.centers()) {
            *x = pm.mi_point(&c);
        }
        let peak = v.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            v.iter_mut().for_each(|x| *x /= peak);
        }
    }
    Ok(raster_bytes(grid, MI_COMMENT, &v))
}

/// Runs `cfg.iterations` steps in `env` from `start`, writing the run
/// directory `out`. Stops early if the run terminates.
pub fn execute(
    cfg: &RunConfig,
    env: GroundTruthEnv,
    start: Pose2,
    out: &Path,
) -> Result<RunReport> {
    std::fs::create_dir_all(out)
        .map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    write_file(&out.join(CONFIG_FILE), cfg.to_json().as_bytes())?;
    let env_hash = env.content_hash();
    let grid = QueryGrid::new(env.bounds(), cfg.exploration.query_resolution);
    let mut run = ExplorationRun::new(env, start, cfg.method, cfg.exploration.clone(), cfg.seed)?;
    write_file(
        &out.join("map_iter0.pgm"),
        &occupancy_raster(run.map(), &grid),
    )?;

    let mut metrics = Vec::new();
    let mut timing = Vec::new();
    let mut outcomes = Vec::new();
    for _ in 0..cfg.iterations {
        if run.is_terminated() {
            break;
        }
        let step = run.step()?;
        let n = step.record.iteration;
        info!(
            "iteration {n}: entropy {:.1} bits, max occupancy {:.1}%, {:?}",
            step.record.map_entropy_bits, step.record.max_occ_along_path, step.outcome
        );
        let path: Vec<PathRow> = step
            .executed
            .iter()
            .map(|p| PathRow {
                x: p.x,
                y: p.y,
                heading: p.heading,
            })
            .collect();
        write_csv(&out.join(format!("path_iter{n}.csv")), &path)?;
        write_file(
            &out.join(format!("map_iter{n}.pgm")),
            &occupancy_raster(run.map(), &grid),
        )?;
        metrics.push(MetricsRow {
            iteration: n,
            map_entropy_bits: step.record.map_entropy_bits,
            mean_occ_along_path: step.record.mean_occ_along_path,
            max_occ_along_path: step.record.max_occ_along_path,
            distance_traveled_m: step.record.distance_traveled_m,
            outcome: step.outcome,
            replans: step.replans,
        });
        timing.push(TimingRow {
            iteration: n,
            plan_time_s: step.record.plan_time_s,
        });
        outcomes.push(step.outcome);
    }
    write_csv(&out.join(METRICS_FILE), &metrics)?;
    write_csv(&out.join(TIMING_FILE), &timing)?;
    run.map().snapshot().save(&out.join(SNAPSHOT_FILE))?;

    let report = RunReport {
        method: cfg.method,
        seed: cfg.seed,
        env_hash,
        start: [start.x, start.y, start.heading],
        iterations_requested: cfg.iterations,
        iterations_completed: metrics.len(),
        status: run.status(),
        outcomes,
        baseline_entropy_bits: run.baseline_entropy(),
        initial_entropy_bits: run.initial_entropy(),
        final_entropy_bits: metrics
            .last()
            .map_or(run.initial_entropy(), |m| m.map_entropy_bits),
        distance_traveled_m: run.distance_traveled(),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    write_file(&out.join(REPORT_FILE), text.as_bytes())?;
    Ok(report)
}

/// A finished run directory, loaded for comparison.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub report: RunReport,
    pub metrics: Vec<MetricsRow>,
    pub timing: Vec<TimingRow>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        let report_path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&report_path)
            .map_err(|e| Error::io(format!("reading {}", report_path.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            report: serde_json::from_str(&text)?,
            metrics: read_csv(&dir.join(METRICS_FILE))?,
            timing: read_csv(&dir.join(TIMING_FILE))?,
        })
    }
}

/// One row of `compare.csv`. Occupancies are percent, times seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    pub seed: u64,
    pub mean_occ: f64,
    pub max_occ: f64,
    pub median_plan_s: f64,
    pub mean_plan_s: f64,
    pub max_plan_s: f64,
}

/// One point of the entropy-versus-iteration series; iteration 0 is the
/// map after the initial scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub method: Method,
    pub seed: u64,
    pub iteration: usize,
    pub map_entropy_bits: f64,
    /// Fraction of the all-unknown entropy that remains.
    pub entropy_fraction: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(run: &RunRecord) -> CompareRow {
    let occ: Vec<f64> = run.metrics.iter().map(|m| m.mean_occ_along_path).collect();
    let plan: Vec<f64> = run.timing.iter().map(|t| t.plan_time_s).collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    CompareRow {
        method: run.report.method,
        seed: run.report.seed,
        mean_occ: mean(&occ),
        max_occ: run
            .metrics
            .iter()
            .map(|m| m.max_occ_along_path)
            .fold(0.0, f64::max),
        median_plan_s: median(&plan),
        mean_plan_s: mean(&plan),
        max_plan_s: plan.iter().cloned().fold(0.0, f64::max),
    }
}

pub fn entropy_series(run: &RunRecord) -> Vec<EntropyPoint> {
    let r = &run.report;
    let point = |iteration, bits: f64| EntropyPoint {
        method: r.method,
        seed: r.seed,
        iteration,
        map_entropy_bits: bits,
        entropy_fraction: bits / r.baseline_entropy_bits,
    };
    std::iter::once(point(0, r.initial_entropy_bits))
        .chain(
            run.metrics
                .iter()
                .map(|m| point(m.iteration, m.map_entropy_bits)),
        )
        .collect()
}

/// Refuses runs recorded on different environments.
pub fn check_same_env(runs: &[RunRecord]) -> Result<()> {
    let Some(first) = runs.first() else {
        return Ok(());
    };
    for r in &runs[1..] {
        if r.report.env_hash != first.report.env_hash {
            return Err(Error::InvalidInput(format!(
                "{} and {} were recorded on different environments ({}... vs {}...); \
                 their metrics are not comparable",
                first.dir.display(),
                r.dir.display(),
                &first.report.env_hash[..12.min(first.report.env_hash.len())],
                &r.report.env_hash[..12.min(r.report.env_hash.len())],
            )));
        }
    }
    Ok(())
}

/// Writes `compare.csv` and `entropy_series.csv` into `out`.
pub fn write_comparison(runs: &[RunRecord], out: &Path) -> Result<Vec<CompareRow>> {
    check_same_env(runs)?;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    let rows: Vec<CompareRow> = runs.iter().map(summarize).collect();
    write_csv(&out.join("compare.csv"), &rows)?;
    let series: Vec<EntropyPoint> = runs.iter().flat_map(entropy_series).collect();
    write_csv(&out.join("entropy_series.csv"), &series)?;
    Ok(rows)
}

/// Bounds covered by a sparse RBF map's inducing grid.
pub fn snapshot_bounds(snap: &MapSnapshot) -> Option<Bounds> {
    if snap.grid_shape[0] == 0 || snap.grid_shape[1] == 0 {
        return None;
    }
    let [ox, oy] = snap.grid_origin;
    let w = (snap.grid_shape[0] - 1) as f64 * snap.lengthscale;
    let h = (snap.grid_shape[1] - 1) as f64 * snap.lengthscale;
    Some(Bounds::new(ox, oy, ox + w, oy + h)).filter(|b| !b.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"seed": 3}"#).is_ok());
        assert!(RunConfig::from_json(r#"{"seeds": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"exploration": {"bogus": 1}}"#).is_err());
    }

    #[test]
    fn config_echo_round_trips() {
        let mut cfg = RunConfig {
            seed: 11,
            method: Method::RrtMi,
            env_path: Some("envs/rooms.pgm".into()),
            start: Some([1.0, 2.0, 0.1]),
            ..RunConfig::default()
        };
        cfg.exploration.objective.eta0 = 0.1 + 0.2;
        cfg.exploration.scan_stride_m = 1.0 / 3.0;
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_map_renders_mid_gray_and_full_entropy() {
        let b = Bounds::new(0.0, 0.0, 2.0, 1.0);
        let map = HilbertMap::sparse_rbf(b, 0.5).unwrap();
        let grid = QueryGrid::new(b, 0.25);
        let occ = Pgm::parse(&occupancy_raster(&map, &grid)).unwrap();
        assert_eq!((occ.width, occ.height), (8, 4));
        assert!(occ.data.iter().all(|&v| v == 128));
        let ent = Pgm::parse(&entropy_raster(&map, &grid)).unwrap();
        assert!(ent.data.iter().all(|&v| v == 255));
    }

    #[test]
    fn snapshot_bounds_cover_the_grid() {
        let map = HilbertMap::sparse_rbf(Bounds::new(0.0, 0.0, 4.0, 2.0), 0.5).unwrap();
        let b = snapshot_bounds(&map.snapshot()).unwrap();
        assert!(b.contains(&Vec2::new(0.0, 0.0)) && b.contains(&Vec2::new(4.0, 2.0)));
    }
}
