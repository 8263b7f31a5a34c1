//! Stochastic functional gradient descent over a [`KernelPath`]: the objective
//! is a weighted sum of obstacle cost, path energy and (negated) mutual
//! information sampled at random times along the path.

use std::collections::VecDeque;
use std::time::Instant;

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};
use crate::hilbert_map::HilbertMap;
use crate::path::{BodyModel, InitialPath, KernelPath, TimeFeatures};
use crate::perturbed_map::PerturbedMap;
use crate::sensor::{arc_samples, expected_observations, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub beta_obs: f64,
    pub beta_dyn: f64,
    pub beta_mi: f64,
    pub eta0: f64,
    pub eta_decay: f64,
    pub p_safe: f64,
    pub minibatch_size: usize,
    pub max_iterations: usize,
    pub convergence_window: usize,
    /// Converged when the window mean of `|dW|` drops below
    /// `convergence_tol * |W| + convergence_floor`.
    pub convergence_tol: f64,
    pub convergence_floor: f64,
    /// Beams whose ray crosses occupancy above this are not expected to see free space.
    pub p_block: f64,
    /// Occupancy target of the expected free-space observations.
    pub p_free: f64,
    pub gp_noise: f64,
    pub path_feature_count: usize,
    pub path_lengthscale: f64,
    /// Length of the default straight initial path.
    pub horizon_m: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            beta_obs: 10.0,
            beta_dyn: 1.0,
            beta_mi: 5.0,
            eta0: 0.05,
            eta_decay: 0.5,
            p_safe: 0.4,
            minibatch_size: 8,
            max_iterations: 500,
            convergence_window: 20,
            convergence_tol: 1e-4,
            convergence_floor: 1e-6,
            p_block: 0.6,
            p_free: 0.1,
            gp_noise: 1e-2,
            path_feature_count: 200,
            path_lengthscale: 0.15,
            horizon_m: 3.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_obs", self.beta_obs),
            ("beta_dyn", self.beta_dyn),
            ("beta_mi", self.beta_mi),
            ("eta0", self.eta0),
            ("eta_decay", self.eta_decay),
            ("convergence_tol", self.convergence_tol),
            ("convergence_floor", self.convergence_floor),
            ("gp_noise", self.gp_noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain { name, value: v });
            }
        }
        if self.beta_obs + self.beta_dyn + self.beta_mi <= 0.0 {
            return Err(Error::InvalidInput(
                "at least one beta must be positive".into(),
            ));
        }
        for (name, v) in [
            ("p_safe", self.p_safe),
            ("p_block", self.p_block),
            ("p_free", self.p_free),
        ] {
            if !(v > 0.0 && v < 1.0) && !(name == "p_block" && (0.0..=1.0).contains(&v)) {
                return Err(Error::Domain { name, value: v });
            }
        }
        if self.minibatch_size == 0 || self.convergence_window == 0 || self.path_feature_count == 0
        {
            return Err(Error::InvalidInput(
                "minibatch_size, convergence_window and path_feature_count must be positive".into(),
            ));
        }
        if !(self.path_lengthscale > 0.0) {
            return Err(Error::Domain {
                name: "path_lengthscale",
                value: self.path_lengthscale,
            });
        }
        if !(self.horizon_m >= 0.0) {
            return Err(Error::Domain {
                name: "horizon_m",
                value: self.horizon_m,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Converged,
    #[default]
    MaxIterations,
    /// Every sample was rejected for a whole convergence window.
    Trapped,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub iterations: usize,
    pub rejected_fraction: f64,
    pub wall_time_s: f64,
    pub final_max_occ: f64,
    pub converged: bool,
    #[serde(skip)]
    pub status: PlanStatus,
    /// Mean sampled objective over the accepted samples of the last iteration.
    #[serde(skip)]
    pub final_objective: f64,
}

/// How the times of each mini-batch are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// `minibatch_size` i.i.d. uniform times per iteration.
    Random,
    /// The same times every iteration.
    Fixed(Vec<f64>),
}

/// Events reported to an observer during [`optimize_with`].
#[derive(Debug, Clone, PartialEq)]
pub enum PlanEvent {
    Sample {
        iteration: usize,
        t: f64,
        body_index: usize,
        point: Vec2,
        p_occ: f64,
        accepted: bool,
    },
    Update {
        iteration: usize,
        t: f64,
        gradient: Vec2,
        step: f64,
    },
    Iteration {
        iteration: usize,
        weight_change: f64,
        objective: f64,
        accepted: usize,
    },
}

/// `J^T grad c_obs` at body point `b`; `J` is the identity.
pub fn obstacle_gradient_at(map: &HilbertMap, path: &KernelPath, t: f64, b: &Vec2) -> Result<Vec2> {
    let x = path.forward_kinematics(t, b)?;
    Ok(path.jacobian(t, b)?.transpose() * map.occupancy_gradient(&x))
}

/// `-xi''(t)`.
pub fn dynamics_gradient_at(path: &KernelPath, t: f64) -> Result<Vec2> {
    Ok(-path.acceleration(t)?)
}

/// Summed mutual information over the sensor arc at `pose` and its gradient
/// with respect to the pose position (the arc moves rigidly with the robot;
/// the expected observations are held fixed).
pub fn mi_at_pose(
    map: &HilbertMap,
    pose: &Pose2,
    sensor: &SensorModel,
    cfg: &ObjectiveConfig,
) -> Result<(f64, Vec2)> {
    let obs = expected_observations(map, pose, sensor, cfg.p_block, cfg.p_free);
    if obs.is_empty() {
        return Ok((0.0, Vec2::zeros()));
    }
    let pm = PerturbedMap::build(map, obs, cfg.gp_noise)?;
    let mut total = 0.0;
    let mut grad = Vec2::zeros();
    for m in arc_samples(pose, sensor) {
        let (v, g) = pm.mi_point_with_gradient(&m);
        total += v;
        grad += g;
    }
    Ok((total, grad))
}

/// Descent direction contribution of the information reward at body point
/// `b`: `-J^T sum grad MI`.
pub fn mi_gradient_at(
    map: &HilbertMap,
    path: &KernelPath,
    t: f64,
    b: &Vec2,
    sensor: &SensorModel,
    cfg: &ObjectiveConfig,
) -> Result<Vec2> {
    let pose = Pose2::from_position(path.forward_kinematics(t, b)?, path.heading(t)?);
    let (_, g) = mi_at_pose(map, &pose, sensor, cfg)?;
    Ok(-(path.jacobian(t, b)?.transpose() * g))
}

/// `beta_obs g_obs + beta_dyn g_dyn + beta_mi g_mi`.
pub fn combine_gradients(cfg: &ObjectiveConfig, g_obs: &Vec2, g_dyn: &Vec2, g_mi: &Vec2) -> Vec2 {
    g_obs * cfg.beta_obs + g_dyn * cfg.beta_dyn + g_mi * cfg.beta_mi
}

/// Maximum occupancy over `n` uniform times in `[t_from, 1]` and every body
/// point, and whether it stays at or below `p_safe`.
pub fn path_safety_profile_from(
    map: &HilbertMap,
    path: &KernelPath,
    body: &BodyModel,
    p_safe: f64,
    t_from: f64,
    n: usize,
) -> Result<(f64, bool)> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "safety profile needs at least 2 samples".into(),
        ));
    }
    let mut max_occ: f64 = 0.0;
    for k in 0..n {
        let t = t_from + (1.0 - t_from) * k as f64 / (n - 1) as f64;
        let pose = path.pose(t.min(1.0))?;
        for b in &body.points {
            max_occ = max_occ.max(map.predict_occupancy(&pose.transform(b)));
        }
    }
    Ok((max_occ, max_occ <= p_safe))
}

pub fn path_safety_profile(
    map: &HilbertMap,
    path: &KernelPath,
    body: &BodyModel,
    p_safe: f64,
    n: usize,
) -> Result<(f64, bool)> {
    path_safety_profile_from(map, path, body, p_safe, 0.0, n)
}

/// Everything [`optimize_with`] needs besides the map and start.
#[derive(Debug, Clone)]
pub struct PlanRequest<'s> {
    pub cfg: ObjectiveConfig,
    pub sensor: &'s SensorModel,
    pub body: BodyModel,
    pub initial: Option<InitialPath>,
    pub sampling: Sampling,
    /// When the final path fails the safety profile, return the latest
    /// checked iterate (every tenth) that passed it instead.
    pub keep_safe_iterate: bool,
}

impl<'s> PlanRequest<'s> {
    pub fn new(cfg: ObjectiveConfig, sensor: &'s SensorModel) -> Self {
        Self {
            cfg,
            sensor,
            body: BodyModel::default(),
            initial: None,
            sampling: Sampling::Random,
            keep_safe_iterate: false,
        }
    }
}

// Iterations between safety checks when keeping a safe iterate.
const SAFE_ITERATE_EVERY: usize = 10;

pub fn optimize<R: Rng + ?Sized>(
    map: &HilbertMap,
    start: &Pose2,
    cfg: &ObjectiveConfig,
    sensor: &SensorModel,
    initial: Option<InitialPath>,
    rng: &mut R,
) -> Result<(KernelPath, OptimizeReport)> {
    let mut req = PlanRequest::new(*cfg, sensor);
    req.initial = initial;
    optimize_with(map, start, &req, rng, &mut |_| {})
}

/// Runs the descent loop, reporting every sample, update and iteration to
/// `observer`. Gradients of a mini-batch are computed against the path as it
/// was at the start of the batch and applied afterwards in sample order.
pub fn optimize_with<R: Rng + ?Sized>(
    map: &HilbertMap,
    start: &Pose2,
    req: &PlanRequest<'_>,
    rng: &mut R,
    observer: &mut dyn FnMut(&PlanEvent),
) -> Result<(KernelPath, OptimizeReport)> {
    let cfg = &req.cfg;
    cfg.validate()?;
    if !start.is_finite() {
        return Err(Error::InvalidPose {
            x: start.x,
            y: start.y,
            reason: "non-finite start".into(),
        });
    }
    let p_start = map.predict_occupancy(&start.position());
    if !(p_start < cfg.p_safe) {
        return Err(Error::UnsafeStart {
            occupancy: p_start,
            p_safe: cfg.p_safe,
        });
    }
    if req.body.points.is_empty() {
        return Err(Error::InvalidInput("body model has no points".into()));
    }
    if let Sampling::Fixed(ts) = &req.sampling {
        if ts.is_empty() || ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput(
                "fixed samples must be non-empty and in [0, 1]".into(),
            ));
        }
    }

    let clock = Instant::now();
    let initial = req
        .initial
        .unwrap_or_else(|| InitialPath::straight(start, cfg.horizon_m));
    let features = TimeFeatures::new(cfg.path_feature_count, cfg.path_lengthscale, rng.random())?;
    let mut path = KernelPath::new(features, initial, start.heading);
    let is_safe = |path: &KernelPath| -> Result<bool> {
        Ok(path_safety_profile(map, path, &req.body, cfg.p_safe, 100)?.1)
    };
    let mut safe_weights = None;
    if req.keep_safe_iterate && is_safe(&path)? {
        safe_weights = Some(path.weights().clone());
    }

    let mut body_cursor = 0usize;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.convergence_window);
    let mut window_sum = 0.0;
    let mut all_rejected_run = 0usize;
    let mut total_samples = 0usize;
    let mut rejected = 0usize;
    let mut status = PlanStatus::MaxIterations;
    let mut iterations = 0usize;
    let mut last_objective = f64::NAN;
    let mut ts: Vec<f64> = Vec::with_capacity(cfg.minibatch_size);
    let mut updates: Vec<(f64, Vec2)> = Vec::with_capacity(cfg.minibatch_size);

    for n in 1..=cfg.max_iterations {
        iterations = n;
        let eta = cfg.eta0 * (n as f64).powf(-cfg.eta_decay);
        ts.clear();
        match &req.sampling {
            Sampling::Random => {
                ts.extend((0..cfg.minibatch_size).map(|_| rng.random_range(0.0..=1.0)))
            }
            Sampling::Fixed(fixed) => ts.extend_from_slice(fixed),
        }

        updates.clear();
        let mut objective = 0.0;
        for &t in &ts {
            let body_index = body_cursor % req.body.points.len();
            body_cursor += 1;
            let b = &req.body.points[body_index];
            let pose = path.pose(t)?;
            let x = pose.transform(b);
            let (p_occ, occ_grad) = map.occupancy_with_gradient(&x);
            let accepted = p_occ <= cfg.p_safe;
            total_samples += 1;
            observer(&PlanEvent::Sample {
                iteration: n,
                t,
                body_index,
                point: x,
                p_occ,
                accepted,
            });
            if !accepted {
                rejected += 1;
                continue;
            }
            let g_obs = path.jacobian(t, b)?.transpose() * occ_grad;
            let velocity = path.velocity(t)?;
            let g_dyn = dynamics_gradient_at(&path, t)?;
            let (mi, g_mi) = if cfg.beta_mi > 0.0 {
                let (v, g) =
                    mi_at_pose(map, &Pose2::from_position(x, pose.heading), req.sensor, cfg)?;
                (v, -g)
            } else {
                (0.0, Vec2::zeros())
            };
            objective += cfg.beta_obs * p_occ + cfg.beta_dyn * 0.5 * velocity.norm_squared()
                - cfg.beta_mi * mi;
            updates.push((t, combine_gradients(cfg, &g_obs, &g_dyn, &g_mi)));
        }

        let accepted = updates.len();
        if accepted > 0 {
            objective /= accepted as f64;
            last_objective = objective;
        }
        let before = path.weights().clone();
        // the step is shared by the batch so the update is a mini-batch mean
        let step = eta / ts.len() as f64;
        for (t, g) in &updates {
            path.update_weights(g, *t, step)?;
            observer(&PlanEvent::Update {
                iteration: n,
                t: *t,
                gradient: *g,
                step,
            });
        }
        let change = (path.weights() - &before).norm();
        if req.keep_safe_iterate && n % SAFE_ITERATE_EVERY == 0 && is_safe(&path)? {
            safe_weights = Some(path.weights().clone());
        }
        observer(&PlanEvent::Iteration {
            iteration: n,
            weight_change: change,
            objective: if accepted > 0 { objective } else { f64::NAN },
            accepted,
        });

        if accepted == 0 {
            all_rejected_run += 1;
            if all_rejected_run >= cfg.convergence_window {
                status = PlanStatus::Trapped;
                break;
            }
        } else {
            all_rejected_run = 0;
        }

        window.push_back(change);
        window_sum += change;
        if window.len() > cfg.convergence_window {
            window_sum -= window.pop_front().unwrap_or(0.0);
        }
        if window.len() == cfg.convergence_window {
            let mean = window_sum / cfg.convergence_window as f64;
            if mean < cfg.convergence_tol * path.weights().norm() + cfg.convergence_floor {
                status = PlanStatus::Converged;
                break;
            }
        }
    }

    let (mut final_max_occ, safe) = path_safety_profile(map, &path, &req.body, cfg.p_safe, 100)?;
    if !safe {
        if let Some(w) = safe_weights {
            path.set_weights(w)?;
            final_max_occ = path_safety_profile(map, &path, &req.body, cfg.p_safe, 100)?.0;
        }
    }
    let report = OptimizeReport {
        iterations,
        rejected_fraction: if total_samples > 0 {
            rejected as f64 / total_samples as f64
        } else {
            0.0
        },
        wall_time_s: clock.elapsed().as_secs_f64(),
        final_max_occ,
        converged: status == PlanStatus::Converged,
        status,
        final_objective: last_objective,
    };
    debug!(
        "optimize: {:?} after {} iterations, rejected {:.2}, max occ {:.3}",
        report.status, report.iterations, report.rejected_fraction, report.final_max_occ
    );
    Ok((path, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{direction, Bounds};
    use crate::scenarios::toy_wall_map;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unknown_map() -> HilbertMap {
        HilbertMap::sparse_rbf(Bounds::new(-10.0, -10.0, 10.0, 10.0), 0.5).unwrap()
    }

    fn line_path(start: Vec2, end: Vec2) -> KernelPath {
        KernelPath::new(
            TimeFeatures::new(200, 0.15, 1).unwrap(),
            InitialPath::Line { start, end },
            0.0,
        )
    }

    #[test]
    fn obstacle_gradient_on_unknown_map_is_zero() {
        let p = line_path(Vec2::zeros(), Vec2::new(2.0, 0.0));
        let g = obstacle_gradient_at(&unknown_map(), &p, 0.5, &Vec2::new(0.2, 0.0)).unwrap();
        assert_eq!(g, Vec2::zeros());
    }

    #[test]
    fn obstacle_gradient_matches_finite_differences() {
        let map = toy_wall_map();
        let p = line_path(Vec2::new(-1.0, -1.0), Vec2::new(1.5, 1.0));
        let h = 1e-5;
        for k in 0..10 {
            let t = k as f64 / 9.0;
            let b = Vec2::new(0.0, 0.2);
            let g = obstacle_gradient_at(&map, &p, t, &b).unwrap();
            let x = p.forward_kinematics(t, &b).unwrap();
            for axis in 0..2 {
                let mut e = Vec2::zeros();
                e[axis] = h;
                let fd =
                    (map.predict_occupancy(&(x + e)) - map.predict_occupancy(&(x - e))) / (2.0 * h);
                assert!((g[axis] - fd).abs() <= 1e-4 * fd.abs().max(g[axis].abs()) + 1e-9);
            }
        }
    }

    #[test]
    fn obstacle_gradient_points_into_the_wall() {
        // the cost rises toward the wall, so its gradient has a positive x
        // component and descent moves away
        let map = toy_wall_map();
        let p = line_path(Vec2::new(1.2, -1.0), Vec2::new(1.6, 1.0));
        for k in 0..5 {
            let g = obstacle_gradient_at(&map, &p, k as f64 / 4.0, &Vec2::zeros()).unwrap();
            let wall_normal = Vec2::new(-1.0, 0.0);
            assert!(g.dot(&wall_normal) < 0.0, "{g:?}");
        }
    }

    #[test]
    fn dynamics_gradient_cases() {
        let p = line_path(Vec2::zeros(), Vec2::new(3.0, 1.0));
        assert_eq!(dynamics_gradient_at(&p, 0.3).unwrap(), Vec2::zeros());
        let q = KernelPath::new(
            TimeFeatures::new(200, 0.15, 1).unwrap(),
            InitialPath::Quadratic {
                a: Vec2::zeros(),
                b: Vec2::zeros(),
                c: Vec2::new(1.0, 0.0),
            },
            0.0,
        );
        for t in [0.0, 0.25, 0.9] {
            assert_eq!(dynamics_gradient_at(&q, t).unwrap(), Vec2::new(-2.0, 0.0));
        }
    }

    #[test]
    fn dynamics_descent_reduces_energy() {
        let mut p = KernelPath::new(
            TimeFeatures::new(200, 0.15, 2).unwrap(),
            InitialPath::Arc {
                center: Vec2::new(0.0, 1.0),
                radius: 1.0,
                start_angle: -FRAC_PI_2,
                sweep: PI,
            },
            0.0,
        );
        let before = p.energy(200);
        for k in 0..50 {
            let t = (k as f64 + 0.5) / 50.0;
            let g = dynamics_gradient_at(&p, t).unwrap();
            p.update_weights(&g, t, 0.005).unwrap();
        }
        assert!(p.energy(200) < before);
    }

    #[test]
    fn mi_gradient_on_unknown_map_points_forward() {
        let map = unknown_map();
        let s = SensorModel::expected();
        let cfg = ObjectiveConfig::default();
        for k in 0..10 {
            let heading = -PI + 2.0 * PI * k as f64 / 10.0;
            let dir = direction(heading);
            let p = line_path(Vec2::zeros(), dir * 2.0);
            let g = mi_gradient_at(&map, &p, 0.0, &Vec2::zeros(), &s, &cfg).unwrap();
            // descent follows -g, which must point ahead of the robot
            let ascent = -g;
            assert!(ascent.norm() > 0.0);
            assert!(
                ascent.normalize().dot(&dir) > 0.99,
                "heading {heading}: {ascent:?}"
            );
        }
    }

    #[test]
    fn mi_gradient_vanishes_in_explored_space() {
        let mut map = unknown_map();
        map.weights_mut()[0] = -12.0;
        let s = SensorModel::expected();
        let cfg = ObjectiveConfig::default();
        let p = line_path(Vec2::zeros(), Vec2::new(2.0, 0.0));
        let known = mi_gradient_at(&map, &p, 0.0, &Vec2::zeros(), &s, &cfg).unwrap();
        let open = mi_gradient_at(&unknown_map(), &p, 0.0, &Vec2::zeros(), &s, &cfg).unwrap();
        assert!(
            known.norm() < 1e-3 * open.norm(),
            "{} vs {}",
            known.norm(),
            open.norm()
        );
    }

    #[test]
    fn mi_gradient_without_observations_is_zero() {
        let s = SensorModel::expected();
        let cfg = ObjectiveConfig {
            p_block: 0.0,
            ..ObjectiveConfig::default()
        };
        let p = line_path(Vec2::zeros(), Vec2::new(2.0, 0.0));
        let g = mi_gradient_at(&unknown_map(), &p, 0.2, &Vec2::zeros(), &s, &cfg).unwrap();
        assert_eq!(g, Vec2::zeros());
    }

    #[test]
    fn combination_is_exact() {
        let cfg = ObjectiveConfig {
            beta_obs: 2.0,
            beta_dyn: 3.0,
            beta_mi: 0.5,
            ..ObjectiveConfig::default()
        };
        let g = combine_gradients(
            &cfg,
            &Vec2::new(1.0, 0.0),
            &Vec2::new(0.0, 1.0),
            &Vec2::new(4.0, -2.0),
        );
        assert_eq!(g, Vec2::new(4.0, 2.0));
    }

    #[test]
    fn safety_profile_cases() {
        let body = BodyModel::default();
        let p = line_path(Vec2::zeros(), Vec2::new(3.0, 0.0));
        let (m, safe) = path_safety_profile(&unknown_map(), &p, &body, 0.4, 50).unwrap();
        assert_eq!(m, 0.5);
        assert!(!safe);
        let wall = toy_wall_map();
        let through = line_path(Vec2::new(-1.0, 0.0), Vec2::new(3.5, 0.0));
        assert!(
            !path_safety_profile(&wall, &through, &body, 0.4, 50)
                .unwrap()
                .1
        );
        assert!(
            path_safety_profile(&wall, &through, &body, 1.0, 50)
                .unwrap()
                .1
        );
        assert!(path_safety_profile(&wall, &through, &body, 0.4, 1).is_err());
    }

    fn free_map() -> HilbertMap {
        let mut m = unknown_map();
        m.weights_mut()[0] = -6.0;
        m
    }

    #[test]
    fn zero_step_returns_initial_path() {
        let cfg = ObjectiveConfig {
            eta0: 0.0,
            ..ObjectiveConfig::default()
        };
        let s = SensorModel::expected();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, report) = optimize(
            &free_map(),
            &Pose2::new(0.0, 0.0, 0.3),
            &cfg,
            &s,
            None,
            &mut rng,
        )
        .unwrap();
        assert!(p.weights().iter().all(|&w| w == 0.0));
        assert!(report.converged);
    }

    #[test]
    fn unsafe_start_is_rejected() {
        let s = SensorModel::expected();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = optimize(
            &toy_wall_map(),
            &Pose2::new(2.0, 0.0, 0.0),
            &ObjectiveConfig::default(),
            &s,
            None,
            &mut rng,
        );
        assert!(matches!(r, Err(Error::UnsafeStart { .. })));
    }

    #[test]
    fn start_stays_pinned_and_runs_are_deterministic() {
        let s = SensorModel::expected();
        let cfg = ObjectiveConfig {
            max_iterations: 60,
            ..ObjectiveConfig::default()
        };
        let map = toy_wall_map();
        let start = Pose2::new(-1.0, 0.5, 0.0);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            optimize(&map, &start, &cfg, &s, None, &mut rng).unwrap().0
        };
        let a = run(4);
        let b = run(4);
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.eval(0.0).unwrap(), start.position());
    }

    #[test]
    fn safety_gate_blocks_updates_from_unsafe_samples() {
        let s = SensorModel::expected();
        let map = toy_wall_map();
        let mut req = PlanRequest::new(
            ObjectiveConfig {
                max_iterations: 80,
                ..ObjectiveConfig::default()
            },
            &s,
        );
        // the initial line runs into the wall so some samples are unsafe
        req.initial = Some(InitialPath::Line {
            start: Vec2::new(0.0, 0.0),
            end: Vec2::new(3.0, 0.0),
        });
        let mut pending: Vec<(f64, bool)> = Vec::new();
        let mut unsafe_seen = 0;
        let mut mismatches = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        optimize_with(
            &map,
            &Pose2::new(0.0, 0.0, 0.0),
            &req,
            &mut rng,
            &mut |e| match e {
                PlanEvent::Sample {
                    p_occ, accepted, t, ..
                } => {
                    assert_eq!(*accepted, *p_occ <= 0.4);
                    if !accepted {
                        unsafe_seen += 1;
                    }
                    pending.push((*t, *accepted));
                }
                PlanEvent::Update { t, .. } => {
                    let pos = pending.iter().position(|(pt, ok)| *ok && pt == t);
                    match pos {
                        Some(i) => {
                            pending.remove(i);
                        }
                        None => mismatches += 1,
                    }
                }
                PlanEvent::Iteration { .. } => pending.clear(),
            },
        )
        .unwrap();
        assert!(unsafe_seen > 0);
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn trapped_when_every_sample_is_unsafe() {
        let s = SensorModel::expected();
        let map = toy_wall_map();
        let mut req = PlanRequest::new(ObjectiveConfig::default(), &s);
        req.body = BodyModel {
            points: vec![Vec2::new(2.0, 0.0)],
        };
        req.initial = Some(InitialPath::Line {
            start: Vec2::zeros(),
            end: Vec2::zeros(),
        });
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (_, report) = optimize_with(
            &map,
            &Pose2::new(0.0, 0.0, 0.0),
            &req,
            &mut rng,
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(report.status, PlanStatus::Trapped);
        assert_eq!(report.rejected_fraction, 1.0);
    }

    #[test]
    fn report_json_has_exactly_the_public_fields() {
        let r = OptimizeReport::default();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "converged",
                "final_max_occ",
                "iterations",
                "rejected_fraction",
                "wall_time_s"
            ]
        );
    }

    #[test]
    fn full_batch_descent_is_monotone_in_window_means() {
        let s = SensorModel::expected();
        let map = toy_wall_map();
        let mut req = PlanRequest::new(
            ObjectiveConfig {
                beta_mi: 0.0,
                max_iterations: 200,
                ..ObjectiveConfig::default()
            },
            &s,
        );
        req.body = BodyModel::point();
        req.initial = Some(InitialPath::Line {
            start: Vec2::zeros(),
            end: Vec2::new(1.7, 0.0),
        });
        req.sampling = Sampling::Fixed((0..20).map(|k| (k as f64 + 0.5) / 20.0).collect());
        let mut objectives = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        optimize_with(&map, &Pose2::new(0.0, 0.0, 0.0), &req, &mut rng, &mut |e| {
            if let PlanEvent::Iteration { objective, .. } = e {
                objectives.push(*objective);
            }
        })
        .unwrap();
        assert!(objectives.len() >= 20);
        let means: Vec<f64> = objectives
            .chunks_exact(10)
            .map(|c| c.iter().sum::<f64>() / 10.0)
            .collect();
        for w in means.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{means:?}");
        }
        assert!(means.last().unwrap() < &means[0]);
    }

    #[test]
    fn open_space_without_information_converges_in_place() {
        let s = SensorModel::expected();
        let map = free_map();
        let cfg = ObjectiveConfig {
            beta_mi: 0.0,
            beta_dyn: 0.0,
            ..ObjectiveConfig::default()
        };
        let start = Pose2::new(1.0, -2.0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (p, report) = optimize(&map, &start, &cfg, &s, None, &mut rng).unwrap();
        assert_eq!(report.status, PlanStatus::Converged);
        let p_start = map.predict_occupancy(&start.position());
        let (max_occ, _) =
            path_safety_profile(&map, &p, &BodyModel::point(), cfg.p_safe, 100).unwrap();
        assert!(max_occ <= p_start + 1e-12);
    }
}
