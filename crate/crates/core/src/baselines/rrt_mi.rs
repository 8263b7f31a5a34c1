//! RRT exploration that ranks the deepest branches by mutual information over
//! the whole sensor field of view.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rrt::{self, RrtConfig};
use crate::error::Result;
use crate::geometry::{wrap_angle, Bounds, Pose2, Vec2};
use crate::hilbert_map::HilbertMap;
use crate::path::{BodyModel, Trajectory};
use crate::perturbed_map::PerturbedMap;
use crate::planner::ObjectiveConfig;
use crate::sensor::{full_fov_observations, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrtMiConfig {
    pub node_budget: usize,
    pub candidate_count: usize,
    /// Spacing of the scored poses along a candidate.
    pub score_spacing: f64,
    /// Resolution of the local grid over which information is summed.
    pub mi_grid_resolution: f64,
    pub step: f64,
    pub check_spacing: f64,
    pub attempts_per_node: usize,
}

impl Default for RrtMiConfig {
    fn default() -> Self {
        Self {
            node_budget: 300,
            candidate_count: 10,
            score_spacing: 0.5,
            mi_grid_resolution: 0.5,
            step: 0.5,
            check_spacing: 0.1,
            attempts_per_node: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub leaf: usize,
    pub end: Vec2,
    pub depth: usize,
    pub length: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtMiPlan {
    /// `None` when the tree could not leave the start.
    pub path: Option<Vec<Vec2>>,
    pub candidates: Vec<Candidate>,
    pub chosen: Option<usize>,
}

/// Lattice points at `resolution` spacing inside the sensor sector at `pose`.
pub fn sector_grid(pose: &Pose2, sensor: &SensorModel, resolution: f64) -> Vec<Vec2> {
    let o = pose.position();
    let n = (sensor.r_max / resolution).floor() as i64;
    let mut pts = Vec::new();
    for j in -n..=n {
        for i in -n..=n {
            let d = Vec2::new(i as f64, j as f64) * resolution;
            let r = d.norm();
            if r == 0.0 || r > sensor.r_max {
                continue;
            }
            let bearing = wrap_angle(d.y.atan2(d.x) - pose.heading);
            if bearing.abs() <= 0.5 * sensor.fov + 1e-12 {
                pts.push(o + d);
            }
        }
    }
    pts
}

/// Information gained by a full field-of-view observation from `pose`.
pub fn full_fov_mi(
    map: &HilbertMap,
    pose: &Pose2,
    sensor: &SensorModel,
    objective: &ObjectiveConfig,
    resolution: f64,
) -> Result<f64> {
    let obs = full_fov_observations(
        map,
        pose,
        sensor,
        objective.p_block,
        objective.p_free,
        map.lengthscale(),
    );
    if obs.is_empty() {
        return Ok(0.0);
    }
    let pm = PerturbedMap::build(map, obs, objective.gp_noise)?;
    Ok(sector_grid(pose, sensor, resolution)
        .iter()
        .map(|m| pm.mi_point(m))
        .sum())
}

/// Sum of [`full_fov_mi`] at poses every `spacing` along `pts` (excluding the
/// start, including the end).
pub fn score_branch(
    map: &HilbertMap,
    pts: &[Vec2],
    start_heading: f64,
    sensor: &SensorModel,
    objective: &ObjectiveConfig,
    cfg: &RrtMiConfig,
) -> Result<f64> {
    let tr = Trajectory::from_points(pts, start_heading)?;
    let len = tr.length();
    let n = (len / cfg.score_spacing).ceil() as usize;
    let mut total = 0.0;
    for k in 1..=n {
        let s = (k as f64 * cfg.score_spacing).min(len);
        total += full_fov_mi(
            map,
            &tr.pose_at(s),
            sensor,
            objective,
            cfg.mi_grid_resolution,
        )?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
pub fn plan<R: Rng + ?Sized>(
    map: &HilbertMap,
    pose: &Pose2,
    bounds: &Bounds,
    body: &BodyModel,
    sensor: &SensorModel,
    objective: &ObjectiveConfig,
    cfg: &RrtMiConfig,
    rng: &mut R,
) -> Result<RrtMiPlan> {
    let rcfg = RrtConfig {
        goal_bias: 0.0,
        step: cfg.step,
        check_spacing: cfg.check_spacing,
        node_budget: cfg.node_budget,
        attempts_per_node: cfg.attempts_per_node,
        goal_tolerance: 0.0,
    };
    let (tree, _) = rrt::grow(
        map,
        body,
        pose.position(),
        bounds,
        None,
        objective.p_safe,
        &rcfg,
        rng,
    );
    let mut leaves = tree.leaves();
    if leaves.is_empty() {
        return Ok(RrtMiPlan {
            path: None,
            candidates: Vec::new(),
            chosen: None,
        });
    }
    leaves.sort_by(|&a, &b| tree.depths[b].cmp(&tree.depths[a]).then(a.cmp(&b)));
    leaves.truncate(cfg.candidate_count);

    let mut candidates = Vec::with_capacity(leaves.len());
    for &leaf in &leaves {
        let branch = tree.branch(leaf);
        let score = score_branch(map, &branch, pose.heading, sensor, objective, cfg)?;
        candidates.push(Candidate {
            leaf,
            end: tree.nodes[leaf],
            depth: tree.depths[leaf],
            length: rrt::polyline_length(&branch),
            score,
        });
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        let better =
            c.score > b.score + 1e-9 || ((c.score - b.score).abs() <= 1e-9 && c.length < b.length);
        if better {
            best = i;
        }
    }
    let branch = tree.branch(candidates[best].leaf);
    Ok(RrtMiPlan {
        path: Some(rrt::resample_polyline(&branch, 0.05)),
        candidates,
        chosen: Some(best),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sector_grid_respects_range_and_fov() {
        let s = SensorModel::expected();
        let pose = Pose2::new(1.0, 2.0, 0.5);
        let pts = sector_grid(&pose, &s, 0.5);
        assert!(!pts.is_empty());
        for p in &pts {
            let d = p - pose.position();
            assert!(d.norm() <= s.r_max + 1e-12);
            assert!(wrap_angle(d.y.atan2(d.x) - pose.heading).abs() <= 0.5 * s.fov + 1e-9);
        }
    }

    fn partly_known() -> HilbertMap {
        // small known-free patch around the origin, unknown elsewhere
        let mut m = HilbertMap::sparse_rbf(Bounds::new(-10.0, -10.0, 10.0, 10.0), 0.5).unwrap();
        let fm = m.features().clone();
        for (i, c) in fm.inducing_points().iter().enumerate() {
            if c.norm() < 3.0 {
                m.weights_mut()[i + 1] = -4.0;
            }
        }
        m
    }

    #[test]
    fn trapped_when_the_tree_cannot_grow() {
        let m = HilbertMap::sparse_rbf(Bounds::new(-5.0, -5.0, 5.0, 5.0), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = plan(
            &m,
            &Pose2::new(0.0, 0.0, 0.0),
            &Bounds::new(-5.0, -5.0, 5.0, 5.0),
            &BodyModel::default(),
            &SensorModel::expected(),
            &ObjectiveConfig::default(),
            &RrtMiConfig {
                node_budget: 50,
                ..RrtMiConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        assert!(plan.path.is_none());
    }

    #[test]
    fn known_map_ties_go_to_the_shortest_branch() {
        let mut m = HilbertMap::sparse_rbf(Bounds::new(-5.0, -5.0, 5.0, 5.0), 0.5).unwrap();
        m.weights_mut()[0] = -8.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = plan(
            &m,
            &Pose2::new(0.0, 0.0, 0.0),
            &Bounds::new(-4.0, -4.0, 4.0, 4.0),
            &BodyModel::default(),
            &SensorModel::expected(),
            &ObjectiveConfig::default(),
            &RrtMiConfig {
                node_budget: 60,
                ..RrtMiConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        let chosen = &plan.candidates[plan.chosen.unwrap()];
        for c in &plan.candidates {
            assert!(c.score.abs() < 1e-9);
            assert!(chosen.length <= c.length + 1e-12);
        }
    }

    #[test]
    fn information_pulls_outward() {
        let m = partly_known();
        let b = Bounds::new(-6.0, -6.0, 6.0, 6.0);
        let mut wins = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = plan(
                &m,
                &Pose2::new(0.0, 0.0, 0.0),
                &b,
                &BodyModel::default(),
                &SensorModel::expected(),
                &ObjectiveConfig::default(),
                &RrtMiConfig::default(),
                &mut rng,
            )
            .unwrap();
            let mut dists: Vec<f64> = plan.candidates.iter().map(|c| c.end.norm()).collect();
            dists.sort_by(f64::total_cmp);
            let median = dists[dists.len() / 2];
            let chosen = &plan.candidates[plan.chosen.unwrap()];
            if chosen.end.norm() > median {
                wins += 1;
            }
        }
        assert!(wins > 5, "{wins}/10");
    }
}
