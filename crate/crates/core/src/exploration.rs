//! The autonomous loop: plan, execute in strides with a scan and a map update
//! after each stride, re-plan when the remaining path turns unsafe, and
//! retrace the traversed path out of dead ends.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::frontier::{self, FrontierConfig, FrontierPlan};
use crate::baselines::rrt_mi::{self, RrtMiConfig};
use crate::env::GroundTruthEnv;
use crate::error::{Error, Result};
use crate::geometry::{direction, Bounds, Pose2, QueryGrid, Vec2};
use crate::hilbert_map::{HilbertMap, TrainingConfig};
use crate::path::{BodyModel, InitialPath, KernelPath, Trajectory};
use crate::planner::{self, mi_at_pose, ObjectiveConfig, PlanRequest, PlanStatus};
use crate::sensor::{raycast_truth, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Functional,
    Frontier,
    RrtMi,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Functional, Method::Frontier, Method::RrtMi];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Functional => "functional",
            Method::Frontier => "frontier",
            Method::RrtMi => "rrt-mi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown method {s:?}; valid methods: functional, frontier, rrt-mi"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    pub objective: ObjectiveConfig,
    /// Sensor producing ground-truth scans.
    pub scanner: SensorModel,
    /// Sensor geometry used for expected observations.
    pub expected: SensorModel,
    pub training: TrainingConfig,
    pub map_lengthscale: f64,
    pub train_epochs: usize,
    /// Spacing of free-space points along each beam.
    pub free_spacing: f64,
    pub scan_stride_m: f64,
    pub max_replans: usize,
    pub deadend_mi_threshold: f64,
    /// `None` disables dead-end detection.
    pub deadend_patience: Option<usize>,
    pub query_resolution: f64,
    /// Headings tried for the straight initial guess.
    pub initial_headings: usize,
    pub body: BodyModel,
    pub frontier: FrontierConfig,
    pub rrt_mi: RrtMiConfig,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::default(),
            scanner: SensorModel::scanner(),
            expected: SensorModel::expected(),
            training: TrainingConfig::default(),
            map_lengthscale: 0.5,
            train_epochs: 5,
            free_spacing: 0.25,
            scan_stride_m: 0.5,
            max_replans: 3,
            deadend_mi_threshold: 1.0,
            deadend_patience: Some(3),
            query_resolution: 0.25,
            initial_headings: 16,
            body: BodyModel::default(),
            frontier: FrontierConfig::default(),
            rrt_mi: RrtMiConfig::default(),
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.scanner.validate()?;
        self.expected.validate()?;
        for (name, v) in [
            ("map_lengthscale", self.map_lengthscale),
            ("free_spacing", self.free_spacing),
            ("scan_stride_m", self.scan_stride_m),
            ("query_resolution", self.query_resolution),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain { name, value: v });
            }
        }
        if self.initial_headings == 0 {
            return Err(Error::InvalidInput(
                "initial_headings must be positive".into(),
            ));
        }
        if self.body.points.is_empty() {
            return Err(Error::InvalidInput("body model has no points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    /// The robot entered occupied ground truth.
    Collided,
    /// Dead end with nothing left to retrace.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Executed,
    /// Every allowed re-plan also turned unsafe; the robot holds.
    Failed,
    /// The planner produced no path.
    NoPath,
    /// No frontier remains.
    Complete,
    Reversed,
    /// The current pose turned unsafe after a map update; the robot backed
    /// up along its path before planning.
    Retreated,
    Exhausted,
    Collided,
}

/// One row of per-iteration metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub map_entropy_bits: f64,
    /// Percent occupancy along the path executed this iteration.
    pub mean_occ_along_path: f64,
    pub max_occ_along_path: f64,
    pub plan_time_s: f64,
    /// Cumulative.
    pub distance_traveled_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub record: MetricsRecord,
    pub outcome: Outcome,
    pub replans: usize,
    pub plan_status: Option<PlanStatus>,
    /// Planned trajectory of the last planning attempt.
    pub planned: Option<Trajectory>,
    /// Poses visited this iteration, current pose first.
    pub executed: Vec<Pose2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Attempt {
    information: f64,
    stalled: bool,
}

/// Sum of binary entropy over the cell centers of a grid at `resolution`.
pub fn map_entropy_total(map: &HilbertMap, resolution: f64, bounds: &Bounds) -> Result<f64> {
    if bounds.is_empty() {
        return Err(Error::InvalidInput("entropy bounds are empty".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::Domain {
            name: "resolution",
            value: resolution,
        });
    }
    let grid = QueryGrid::new(*bounds, resolution);
    Ok(grid.centers().map(|c| map.entropy(&c)).sum())
}

/// Largest `|grad MI|` at `pose` over `headings` evenly spaced headings.
pub fn mi_gradient_magnitude(
    map: &HilbertMap,
    pose: &Pose2,
    sensor: &SensorModel,
    cfg: &ObjectiveConfig,
    headings: usize,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for k in 0..headings {
        let h = pose.heading + std::f64::consts::TAU * k as f64 / headings as f64;
        let (_, g) = mi_at_pose(map, &Pose2::from_position(pose.position(), h), sensor, cfg)?;
        best = best.max(g.norm());
    }
    Ok(best)
}

/// Largest arc MI at `pose` over `headings` evenly spaced headings.
pub fn view_information(
    map: &HilbertMap,
    pose: &Pose2,
    sensor: &SensorModel,
    cfg: &ObjectiveConfig,
    headings: usize,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for k in 0..headings {
        let h = pose.heading + std::f64::consts::TAU * k as f64 / headings as f64;
        let (mi, _) = mi_at_pose(map, &Pose2::from_position(pose.position(), h), sensor, cfg)?;
        best = best.max(mi);
    }
    Ok(best)
}

pub struct ExplorationRun {
    env: GroundTruthEnv,
    map: HilbertMap,
    pose: Pose2,
    traversed: Vec<Pose2>,
    /// Poses reached by forward motion, popped when backing up.
    trail: Vec<Pose2>,
    iteration: usize,
    seed: u64,
    rng: ChaCha8Rng,
    method: Method,
    config: ExplorationConfig,
    status: RunStatus,
    distance: f64,
    attempts: VecDeque<Attempt>,
    baseline_entropy: f64,
    initial_entropy: f64,
    /// Goals already targeted by the frontier baseline.
    frontier_goals: Vec<Vec2>,
}

impl ExplorationRun {
    /// Builds a run with an unknown map covering the environment, then takes
    /// and trains on an initial scan at `start`.
    pub fn new(
        env: GroundTruthEnv,
        start: Pose2,
        method: Method,
        config: ExplorationConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let map_bounds = env.bounds().expanded(1.0);
        let mut map = HilbertMap::sparse_rbf(map_bounds, config.map_lengthscale)?;
        map.set_training(config.training);
        Self::with_map(env, map, start, method, config, seed)
    }

    /// As [`ExplorationRun::new`] but starting from an existing map.
    pub fn with_map(
        env: GroundTruthEnv,
        map: HilbertMap,
        start: Pose2,
        method: Method,
        config: ExplorationConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::with_trail(env, map, &[start], method, config, seed)
    }

    /// As [`ExplorationRun::with_map`], resuming after the robot has already
    /// driven along `trail`. The run starts at the last pose.
    pub fn with_trail(
        env: GroundTruthEnv,
        map: HilbertMap,
        trail: &[Pose2],
        method: Method,
        config: ExplorationConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let Some(&start) = trail.last() else {
            return Err(Error::InvalidInput("trail is empty".into()));
        };
        for p in trail {
            if !p.is_finite() || env.is_occupied(&p.position()) {
                return Err(Error::InvalidPose {
                    x: p.x,
                    y: p.y,
                    reason: "not in free space".into(),
                });
            }
        }
        let mut run = Self {
            env,
            map,
            pose: start,
            traversed: trail.to_vec(),
            trail: trail.to_vec(),
            iteration: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            method,
            config,
            status: RunStatus::Running,
            distance: 0.0,
            attempts: VecDeque::new(),
            baseline_entropy: 0.0,
            initial_entropy: 0.0,
            frontier_goals: Vec::new(),
        };
        run.baseline_entropy =
            QueryGrid::new(run.env.bounds(), run.config.query_resolution).len() as f64;
        run.scan_and_train()?;
        run.initial_entropy = run.entropy()?;
        Ok(run)
    }

    pub fn env(&self) -> &GroundTruthEnv {
        &self.env
    }

    pub fn map(&self) -> &HilbertMap {
        &self.map
    }

    pub fn pose(&self) -> Pose2 {
        self.pose
    }

    pub fn traversed(&self) -> &[Pose2] {
        &self.traversed
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.config
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn is_terminated(&self) -> bool {
        self.status != RunStatus::Running
    }

    pub fn distance_traveled(&self) -> f64 {
        self.distance
    }

    /// Entropy of the all-unknown map on the query grid.
    pub fn baseline_entropy(&self) -> f64 {
        self.baseline_entropy
    }

    /// Entropy after the initial scan.
    pub fn initial_entropy(&self) -> f64 {
        self.initial_entropy
    }

    pub fn entropy(&self) -> Result<f64> {
        map_entropy_total(&self.map, self.config.query_resolution, &self.env.bounds())
    }

    fn scan_and_train(&mut self) -> Result<()> {
        let scan = raycast_truth(
            &self.env,
            &self.pose,
            &self.config.scanner,
            self.config.free_spacing,
            &mut self.rng,
        )?;
        self.map
            .train_sgd(&scan, self.config.train_epochs, &mut self.rng);
        Ok(())
    }

    /// Straight initial guess: among evenly spaced headings, the safe line
    /// of `horizon_m` whose end pose sees the most information. The length
    /// halves while no heading is safe; with no information anywhere the
    /// guess has zero length.
    pub fn initial_guess(&self) -> Result<InitialPath> {
        let cfg = &self.config;
        let here = self.pose.position();
        let n = cfg.initial_headings;
        let mut length = cfg.objective.horizon_m;
        while length >= 0.25 {
            let mut best: Option<(f64, f64)> = None;
            for k in 0..n {
                let h = self.pose.heading + std::f64::consts::TAU * k as f64 / n as f64;
                let end = here + direction(h) * length;
                if !crate::baselines::rrt::segment_safe(
                    &self.map,
                    &cfg.body,
                    &here,
                    &end,
                    cfg.objective.p_safe,
                    0.1,
                ) {
                    continue;
                }
                let (mi, _) = mi_at_pose(
                    &self.map,
                    &Pose2::from_position(end, h),
                    &cfg.expected,
                    &cfg.objective,
                )?;
                if best.is_none_or(|(b, _)| mi > b + 1e-9) {
                    best = Some((mi, h));
                }
            }
            if let Some((mi, h)) = best {
                if mi < cfg.deadend_mi_threshold {
                    break;
                }
                return Ok(InitialPath::Line {
                    start: here,
                    end: here + direction(h) * length,
                });
            }
            length *= 0.5;
        }
        Ok(InitialPath::Line {
            start: here,
            end: here,
        })
    }

    fn plan(
        &mut self,
    ) -> Result<(
        Option<Trajectory>,
        Option<PlanStatus>,
        f64,
        Option<KernelPath>,
    )> {
        let clock = Instant::now();
        let cfg = self.config.clone();
        match self.method {
            Method::Functional => {
                let initial = self.initial_guess()?;
                let mut req = PlanRequest::new(cfg.objective, &cfg.expected);
                req.body = cfg.body.clone();
                req.initial = Some(initial);
                req.keep_safe_iterate = true;
                match planner::optimize_with(
                    &self.map,
                    &self.pose,
                    &req,
                    &mut self.rng,
                    &mut |_| {},
                ) {
                    Ok((path, report)) => {
                        let tr = Trajectory::from_kernel_path(&path, 200);
                        Ok((
                            Some(tr),
                            Some(report.status),
                            clock.elapsed().as_secs_f64(),
                            Some(path),
                        ))
                    }
                    Err(Error::UnsafeStart { occupancy, .. }) => {
                        warn!("start occupancy {occupancy:.3} exceeds p_safe; no plan");
                        Ok((
                            None,
                            Some(PlanStatus::Trapped),
                            clock.elapsed().as_secs_f64(),
                            None,
                        ))
                    }
                    Err(e) => Err(e),
                }
            }
            Method::Frontier => {
                let plan = frontier::plan_excluding(
                    &self.map,
                    &self.pose,
                    &self.env.bounds(),
                    &cfg.body,
                    cfg.objective.p_safe,
                    &cfg.frontier,
                    &self.frontier_goals,
                    &mut self.rng,
                );
                let elapsed = clock.elapsed().as_secs_f64();
                match plan {
                    FrontierPlan::Path(pts) => {
                        // the path ends at the cluster goal
                        self.frontier_goals
                            .push(*pts.last().expect("paths have points"));
                        Ok((
                            Some(Trajectory::from_points(&pts, self.pose.heading)?),
                            Some(PlanStatus::Converged),
                            elapsed,
                            None,
                        ))
                    }
                    FrontierPlan::NoFrontiers => Ok((None, None, elapsed, None)),
                    FrontierPlan::Unreachable => {
                        Ok((None, Some(PlanStatus::Trapped), elapsed, None))
                    }
                }
            }
            Method::RrtMi => {
                let plan = rrt_mi::plan(
                    &self.map,
                    &self.pose,
                    &self.env.bounds(),
                    &cfg.body,
                    &cfg.expected,
                    &cfg.objective,
                    &cfg.rrt_mi,
                    &mut self.rng,
                )?;
                let elapsed = clock.elapsed().as_secs_f64();
                match plan.path {
                    Some(pts) => Ok((
                        Some(Trajectory::from_points(&pts, self.pose.heading)?),
                        Some(PlanStatus::Converged),
                        elapsed,
                        None,
                    )),
                    None => Ok((None, Some(PlanStatus::Trapped), elapsed, None)),
                }
            }
        }
    }

    /// One planning iteration: plan, execute with re-plans, sense, and on a
    /// detected dead end retrace the traversed path.
    pub fn step(&mut self) -> Result<StepReport> {
        self.step_with(&mut |_| {})
    }

    /// As [`ExplorationRun::step`], handing every planned kernel path to
    /// `on_plan` before it is executed.
    pub fn step_with(&mut self, on_plan: &mut dyn FnMut(&KernelPath)) -> Result<StepReport> {
        if self.is_terminated() {
            return Err(Error::InvalidInput(format!(
                "run already terminated: {:?}",
                self.status
            )));
        }
        self.iteration += 1;
        let stride = self.config.scan_stride_m;
        let p_safe = self.config.objective.p_safe;
        let mut plan_time = 0.0;
        let mut replans = 0usize;
        let mut executed_points = vec![self.pose.position()];
        let mut executed_poses = vec![self.pose];
        let mut scanned_here = false;
        let mut outcome = Outcome::Executed;
        let mut last_status;
        let mut last_plan = None;

        let retreated = self.retreat_to_safety(&mut executed_points, &mut executed_poses);
        let start_pose = self.pose;

        'plan: loop {
            let (traj, status, elapsed, kernel) = self.plan()?;
            plan_time += elapsed;
            last_status = status;
            if let Some(k) = &kernel {
                on_plan(k);
            }
            let Some(traj) = traj else {
                outcome = if self.method == Method::Frontier && status.is_none() {
                    Outcome::Complete
                } else {
                    Outcome::NoPath
                };
                break;
            };
            let occ = traj.max_occupancy_from(&self.map, &self.config.body, 0.0);
            last_plan = Some(traj.clone());
            if occ > p_safe {
                if replans < self.config.max_replans {
                    replans += 1;
                    debug!("planned path unsafe ({occ:.3}); re-plan {replans}");
                    continue 'plan;
                }
                outcome = Outcome::Failed;
                break;
            }
            let total = traj.length();
            let mut s = 0.0;
            while s < total - 1e-9 {
                let s_next = (s + stride).min(total);
                let pts = traj.points_between(s, s_next, 0.1);
                for p in pts.iter().skip(1) {
                    if self.env.is_occupied(p) {
                        warn!(
                            "collision at ({:.2}, {:.2}) in iteration {}",
                            p.x, p.y, self.iteration
                        );
                        self.status = RunStatus::Collided;
                        let record = self.record(&executed_points, plan_time)?;
                        return Ok(StepReport {
                            record,
                            outcome: Outcome::Collided,
                            replans,
                            plan_status: last_status,
                            planned: last_plan,
                            executed: executed_poses,
                        });
                    }
                    executed_points.push(*p);
                }
                self.distance += s_next - s;
                self.pose = traj.pose_at(s_next);
                self.traversed.push(self.pose);
                self.trail.push(self.pose);
                executed_poses.push(self.pose);
                self.scan_and_train()?;
                scanned_here = true;
                s = s_next;
                if s < total - 1e-9 {
                    let occ = traj.max_occupancy_from(&self.map, &self.config.body, s);
                    if occ > p_safe {
                        if replans < self.config.max_replans {
                            replans += 1;
                            debug!("remaining path unsafe ({occ:.3}); re-plan {replans}");
                            continue 'plan;
                        }
                        outcome = Outcome::Failed;
                        break 'plan;
                    }
                }
            }
            break;
        }
        if !scanned_here {
            self.scan_and_train()?;
        }
        if retreated && outcome == Outcome::Executed {
            outcome = Outcome::Retreated;
        }

        if self.method == Method::Functional {
            let information = self.information_here()?;
            let stalled = (self.pose.position() - start_pose.position()).norm() < 0.5;
            self.attempts.push_back(Attempt {
                information,
                stalled,
            });
            if let Some(n) = self.config.deadend_patience {
                while self.attempts.len() > n.max(1) {
                    self.attempts.pop_front();
                }
            }
            if self.detect_deadend() {
                info!(
                    "dead end at ({:.2}, {:.2}); reversing",
                    self.pose.x, self.pose.y
                );
                outcome = if self.reverse_on_path(&mut executed_points, &mut executed_poses)? {
                    Outcome::Reversed
                } else {
                    Outcome::Exhausted
                };
            }
        }

        let record = self.record(&executed_points, plan_time)?;
        Ok(StepReport {
            record,
            outcome,
            replans,
            plan_status: last_status,
            planned: last_plan,
            executed: executed_poses,
        })
    }

    fn information_here(&self) -> Result<f64> {
        view_information(
            &self.map,
            &self.pose,
            &self.config.expected,
            &self.config.objective,
            8,
        )
    }

    fn back_up(&mut self, to: Pose2, points: &mut Vec<Vec2>, poses: &mut Vec<Pose2>) {
        self.distance += (to.position() - self.pose.position()).norm();
        self.pose = to;
        self.traversed.push(to);
        points.push(to.position());
        poses.push(to);
    }

    fn body_occupancy(&self, pose: &Pose2) -> f64 {
        self.config
            .body
            .points
            .iter()
            .map(|b| self.map.predict_occupancy(&pose.transform(b)))
            .fold(0.0, f64::max)
    }

    /// Backs up along the trail while any body point at the current pose is
    /// above `p_safe`.
    fn retreat_to_safety(&mut self, points: &mut Vec<Vec2>, poses: &mut Vec<Pose2>) -> bool {
        let p_safe = self.config.objective.p_safe;
        let mut moved = false;
        while self.body_occupancy(&self.pose) > p_safe && self.trail.len() > 1 {
            self.trail.pop();
            let to = *self.trail.last().expect("trail keeps its root");
            self.back_up(to, points, poses);
            moved = true;
        }
        if moved {
            debug!("retreated to ({:.2}, {:.2})", self.pose.x, self.pose.y);
        }
        moved
    }

    /// True once the last `deadend_patience` attempts all stalled and the
    /// mean best-view information over them is below the threshold.
    pub fn detect_deadend(&self) -> bool {
        let Some(n) = self.config.deadend_patience else {
            return false;
        };
        if n == 0 || self.attempts.len() < n {
            return false;
        }
        let recent: Vec<&Attempt> = self.attempts.iter().rev().take(n).collect();
        let mean = recent.iter().map(|a| a.information).sum::<f64>() / n as f64;
        mean < self.config.deadend_mi_threshold && recent.iter().all(|a| a.stalled)
    }

    /// Walks back along the trail until a pose offers information at or
    /// above the threshold. Returns false, and marks the run exhausted, if
    /// the start is reached first.
    fn reverse_on_path(&mut self, points: &mut Vec<Vec2>, poses: &mut Vec<Pose2>) -> Result<bool> {
        loop {
            if self.trail.len() <= 1 {
                self.status = RunStatus::Exhausted;
                return Ok(false);
            }
            self.trail.pop();
            let to = *self.trail.last().expect("trail keeps its root");
            self.back_up(to, points, poses);
            if self.information_here()? >= self.config.deadend_mi_threshold {
                self.attempts.clear();
                return Ok(true);
            }
        }
    }

    fn record(&self, executed: &[Vec2], plan_time: f64) -> Result<MetricsRecord> {
        let samples = crate::baselines::rrt::resample_polyline(executed, 0.1);
        let occ: Vec<f64> = samples
            .iter()
            .map(|p| self.map.predict_occupancy(p))
            .collect();
        let mean = occ.iter().sum::<f64>() / occ.len() as f64;
        let max = occ.iter().cloned().fold(0.0, f64::max);
        Ok(MetricsRecord {
            iteration: self.iteration,
            map_entropy_bits: self.entropy()?,
            mean_occ_along_path: 100.0 * mean,
            max_occ_along_path: 100.0 * max,
            plan_time_s: plan_time,
            distance_traveled_m: self.distance,
        })
    }
}
