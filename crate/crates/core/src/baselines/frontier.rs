//! Nearest-frontier exploration over a classified raster of the continuous map.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rrt::{self, RrtConfig};
use crate::geometry::{Bounds, Pose2, QueryGrid, Vec2};
use crate::hilbert_map::HilbertMap;
use crate::path::BodyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontierConfig {
    pub grid_resolution: f64,
    /// Cells below this occupancy are free.
    pub free_below: f64,
    /// Cells above this occupancy are occupied.
    pub occupied_above: f64,
    pub min_cluster_size: usize,
    pub rrt: RrtConfig,
    /// Spacing of the smoothed path samples.
    pub path_spacing: f64,
    /// Clusters whose goal lies this close to an already reached goal are skipped.
    pub revisit_radius: f64,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 0.25,
            free_below: 0.35,
            occupied_above: 0.65,
            min_cluster_size: 3,
            rrt: RrtConfig::default(),
            path_spacing: 0.05,
            revisit_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Free,
    Unknown,
    Occupied,
}

pub fn classify(p: f64, free_below: f64, occupied_above: f64) -> CellClass {
    if p < free_below {
        CellClass::Free
    } else if p > occupied_above {
        CellClass::Occupied
    } else {
        CellClass::Unknown
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCluster {
    pub cells: Vec<(usize, usize)>,
    pub centroid: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierSet {
    pub grid: QueryGrid,
    /// Every frontier cell as `(col, row)`, row-major order.
    pub cells: Vec<(usize, usize)>,
    /// 8-connected groups of at least `min_cluster_size` cells.
    pub clusters: Vec<FrontierCluster>,
}

impl FrontierSet {
    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

pub fn classify_grid(map: &HilbertMap, grid: &QueryGrid, cfg: &FrontierConfig) -> Vec<CellClass> {
    grid.centers()
        .map(|c| {
            classify(
                map.predict_occupancy(&c),
                cfg.free_below,
                cfg.occupied_above,
            )
        })
        .collect()
}

/// Frontier detection with the default bands.
pub fn detect_frontiers(map: &HilbertMap, grid_resolution: f64, bounds: &Bounds) -> FrontierSet {
    let cfg = FrontierConfig {
        grid_resolution,
        ..FrontierConfig::default()
    };
    detect_frontiers_with(map, bounds, &cfg)
}

pub fn detect_frontiers_with(
    map: &HilbertMap,
    bounds: &Bounds,
    cfg: &FrontierConfig,
) -> FrontierSet {
    let grid = QueryGrid::new(*bounds, cfg.grid_resolution);
    let classes = classify_grid(map, &grid, cfg);
    let (cols, rows) = (grid.cols, grid.rows);
    let at = |c: usize, r: usize| classes[r * cols + c];
    let mut is_frontier = vec![false; classes.len()];
    let mut cells = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if at(c, r) != CellClass::Free {
                continue;
            }
            let unknown_neighbor = (c > 0 && at(c - 1, r) == CellClass::Unknown)
                || (c + 1 < cols && at(c + 1, r) == CellClass::Unknown)
                || (r > 0 && at(c, r - 1) == CellClass::Unknown)
                || (r + 1 < rows && at(c, r + 1) == CellClass::Unknown);
            if unknown_neighbor {
                is_frontier[r * cols + c] = true;
                cells.push((c, r));
            }
        }
    }

    let mut seen = vec![false; classes.len()];
    let mut clusters = Vec::new();
    for &(c0, r0) in &cells {
        if seen[r0 * cols + c0] {
            continue;
        }
        seen[r0 * cols + c0] = true;
        let mut group = Vec::new();
        let mut queue = VecDeque::from([(c0, r0)]);
        while let Some((c, r)) = queue.pop_front() {
            group.push((c, r));
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                        continue;
                    }
                    let k = nr as usize * cols + nc as usize;
                    if is_frontier[k] && !seen[k] {
                        seen[k] = true;
                        queue.push_back((nc as usize, nr as usize));
                    }
                }
            }
        }
        if group.len() >= cfg.min_cluster_size {
            let sum = group
                .iter()
                .fold(Vec2::zeros(), |acc, &(c, r)| acc + grid.center(c, r));
            clusters.push(FrontierCluster {
                centroid: sum / group.len() as f64,
                cells: group,
            });
        }
    }
    FrontierSet {
        grid,
        cells,
        clusters,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontierPlan {
    Path(Vec<Vec2>),
    /// No frontier cluster left: exploration is complete.
    NoFrontiers,
    /// Frontiers exist but none could be reached by the RRT.
    Unreachable,
}

/// Plans a safe smoothed path to the nearest reachable frontier cluster.
pub fn plan<R: Rng + ?Sized>(
    map: &HilbertMap,
    pose: &Pose2,
    bounds: &Bounds,
    body: &BodyModel,
    p_safe: f64,
    cfg: &FrontierConfig,
    rng: &mut R,
) -> FrontierPlan {
    plan_excluding(map, pose, bounds, body, p_safe, cfg, &[], rng)
}

/// Like [`plan`], skipping clusters whose goal is within `cfg.revisit_radius`
/// of a previously reached goal. Blurred wall boundaries stay classified as
/// unknown, so without this the nearest cluster is often the wall beside the robot.
#[allow(clippy::too_many_arguments)]
pub fn plan_excluding<R: Rng + ?Sized>(
    map: &HilbertMap,
    pose: &Pose2,
    bounds: &Bounds,
    body: &BodyModel,
    p_safe: f64,
    cfg: &FrontierConfig,
    reached: &[Vec2],
    rng: &mut R,
) -> FrontierPlan {
    let set = detect_frontiers_with(map, bounds, cfg);
    if set.is_empty() {
        return FrontierPlan::NoFrontiers;
    }
    let here = pose.position();
    let mut order: Vec<&FrontierCluster> = set.clusters.iter().collect();
    order.sort_by(|a, b| {
        (a.centroid - here)
            .norm()
            .total_cmp(&(b.centroid - here).norm())
    });
    for cluster in order {
        // the centroid of a curved frontier may lie off the frontier
        let goal = cluster
            .cells
            .iter()
            .map(|&(c, r)| set.grid.center(c, r))
            .min_by(|a, b| {
                (a - cluster.centroid)
                    .norm()
                    .total_cmp(&(b - cluster.centroid).norm())
            })
            .expect("clusters are non-empty");
        if reached
            .iter()
            .any(|r| (r - goal).norm() < cfg.revisit_radius)
        {
            continue;
        }
        let (tree, hit) = rrt::grow(map, body, here, bounds, Some(goal), p_safe, &cfg.rrt, rng);
        if let Some(i) = hit {
            let branch = tree.branch(i);
            if branch.len() < 2 {
                continue;
            }
            return FrontierPlan::Path(rrt::smooth(map, body, &branch, p_safe, cfg.path_spacing));
        }
    }
    FrontierPlan::Unreachable
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert_map::{Label, LabeledPoint, ScanDataset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> Bounds {
        Bounds::new(-5.0, -5.0, 5.0, 5.0)
    }

    fn unknown() -> HilbertMap {
        HilbertMap::sparse_rbf(bounds(), 0.5).unwrap()
    }

    fn half_plane_free() -> HilbertMap {
        let mut m = unknown();
        let mut pts = Vec::new();
        for i in 0..=36 {
            for j in 0..=18 {
                pts.push(LabeledPoint {
                    location: Vec2::new(-4.5 + 0.25 * i as f64, -4.5 + 0.25 * j as f64),
                    label: Label::Free,
                });
            }
        }
        m.train_sgd(
            &ScanDataset::new(pts),
            10,
            &mut ChaCha8Rng::seed_from_u64(2),
        );
        m
    }

    #[test]
    fn unknown_map_has_no_frontiers() {
        let set = detect_frontiers(&unknown(), 0.25, &bounds());
        assert!(set.cells.is_empty() && set.clusters.is_empty());
    }

    #[test]
    fn free_map_has_no_frontiers() {
        let mut m = unknown();
        m.weights_mut()[0] = -5.0;
        assert!(detect_frontiers(&m, 0.25, &bounds()).cells.is_empty());
    }

    #[test]
    fn half_plane_frontier_is_a_horizontal_band() {
        let m = half_plane_free();
        let set = detect_frontiers(&m, 0.25, &bounds());
        assert!(!set.clusters.is_empty());
        for &(c, r) in &set.cells {
            let p = set.grid.center(c, r);
            assert!(p.y > 0.0 && p.y < 1.5, "{p:?}");
        }
        assert!(set.clusters.iter().any(|cl| cl.cells.len() > 20));
    }

    #[test]
    fn nearest_frontier_path_is_short_in_open_space() {
        let m = half_plane_free();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = Pose2::new(0.0, -3.0, 0.0);
        let FrontierPlan::Path(p) = plan(
            &m,
            &pose,
            &bounds(),
            &BodyModel::default(),
            0.4,
            &FrontierConfig::default(),
            &mut rng,
        ) else {
            panic!("expected a path");
        };
        let end = *p.last().unwrap();
        let direct = (end - pose.position()).norm();
        assert!(rrt::polyline_length(&p) <= 1.2 * direct + 1e-9);
        assert!(rrt::polyline_safe(&m, &BodyModel::default(), &p, 0.4, 0.1));
    }

    #[test]
    fn no_frontiers_signals_completion() {
        let mut m = unknown();
        m.weights_mut()[0] = -5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = plan(
            &m,
            &Pose2::new(0.0, 0.0, 0.0),
            &bounds(),
            &BodyModel::default(),
            0.4,
            &FrontierConfig::default(),
            &mut rng,
        );
        assert_eq!(r, FrontierPlan::NoFrontiers);
    }
}
