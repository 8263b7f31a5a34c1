//! Safety-checked rapidly exploring random tree over the continuous map, and
//! shortcut/spline smoothing of its paths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Bounds, Pose2, Vec2};
use crate::hilbert_map::HilbertMap;
use crate::path::BodyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrtConfig {
    pub goal_bias: f64,
    pub step: f64,
    /// Maximum spacing of safety checks along an edge.
    pub check_spacing: f64,
    pub node_budget: usize,
    /// Sampling attempts allowed per node before growth gives up.
    pub attempts_per_node: usize,
    pub goal_tolerance: f64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            goal_bias: 0.1,
            step: 0.5,
            check_spacing: 0.1,
            node_budget: 1500,
            attempts_per_node: 20,
            goal_tolerance: 0.5,
        }
    }
}

/// True when every body point stays at or below `p_safe` at checks spaced at
/// most `spacing` along the segment.
pub fn segment_safe(
    map: &HilbertMap,
    body: &BodyModel,
    a: &Vec2,
    b: &Vec2,
    p_safe: f64,
    spacing: f64,
) -> bool {
    let d = b - a;
    let len = d.norm();
    let heading = if len > 1e-12 { d.y.atan2(d.x) } else { 0.0 };
    let n = (len / spacing).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let pose = Pose2::from_position(a + d * (k as f64 / n as f64), heading);
        body.points
            .iter()
            .all(|bp| map.predict_occupancy(&pose.transform(bp)) <= p_safe)
    })
}

pub fn polyline_safe(
    map: &HilbertMap,
    body: &BodyModel,
    pts: &[Vec2],
    p_safe: f64,
    spacing: f64,
) -> bool {
    pts.windows(2)
        .all(|w| segment_safe(map, body, &w[0], &w[1], p_safe, spacing))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtTree {
    pub nodes: Vec<Vec2>,
    pub parents: Vec<usize>,
    pub depths: Vec<usize>,
}

impl RrtTree {
    fn new(root: Vec2) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![0],
            depths: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn nearest(&self, q: &Vec2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n - q).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Root-to-node positions.
    pub fn branch(&self, mut i: usize) -> Vec<Vec2> {
        let mut out = vec![self.nodes[i]];
        while i != 0 {
            i = self.parents[i];
            out.push(self.nodes[i]);
        }
        out.reverse();
        out
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.nodes.len()];
        for &p in self.parents.iter().skip(1) {
            has_child[p] = true;
        }
        (1..self.nodes.len()).filter(|&i| !has_child[i]).collect()
    }
}

/// Grows a tree from `root` inside `bounds`. With a goal, stops as soon as a
/// node lands within `goal_tolerance` of it and returns that node.
pub fn grow<R: Rng + ?Sized>(
    map: &HilbertMap,
    body: &BodyModel,
    root: Vec2,
    bounds: &Bounds,
    goal: Option<Vec2>,
    p_safe: f64,
    cfg: &RrtConfig,
    rng: &mut R,
) -> (RrtTree, Option<usize>) {
    let mut tree = RrtTree::new(root);
    if let Some(g) = goal {
        if (g - root).norm() <= cfg.goal_tolerance {
            return (tree, Some(0));
        }
    }
    let mut attempts = 0usize;
    let max_attempts = cfg.node_budget.saturating_mul(cfg.attempts_per_node.max(1));
    while tree.len() < cfg.node_budget && attempts < max_attempts {
        attempts += 1;
        let sample = match goal {
            Some(g) if rng.random_range(0.0..1.0) < cfg.goal_bias => g,
            _ => Vec2::new(
                rng.random_range(bounds.min_x..=bounds.max_x),
                rng.random_range(bounds.min_y..=bounds.max_y),
            ),
        };
        let near = tree.nearest(&sample);
        let from = tree.nodes[near];
        let d = sample - from;
        let dist = d.norm();
        if dist < 1e-9 {
            continue;
        }
        let to = if dist > cfg.step {
            from + d * (cfg.step / dist)
        } else {
            sample
        };
        if !segment_safe(map, body, &from, &to, p_safe, cfg.check_spacing) {
            continue;
        }
        tree.nodes.push(to);
        tree.parents.push(near);
        tree.depths.push(tree.depths[near] + 1);
        if let Some(g) = goal {
            if (to - g).norm() <= cfg.goal_tolerance {
                let last = tree.len() - 1;
                return (tree, Some(last));
            }
        }
    }
    (tree, None)
}

/// Greedy shortcutting: from each waypoint jump to the farthest later
/// waypoint reachable by a safe straight segment.
pub fn shortcut(
    map: &HilbertMap,
    body: &BodyModel,
    pts: &[Vec2],
    p_safe: f64,
    spacing: f64,
) -> Vec<Vec2> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let mut out = vec![pts[0]];
    let mut i = 0;
    while i < pts.len() - 1 {
        let mut j = pts.len() - 1;
        while j > i + 1 && !segment_safe(map, body, &pts[i], &pts[j], p_safe, spacing) {
            j -= 1;
        }
        out.push(pts[j]);
        i = j;
    }
    out
}

/// Uniform Catmull-Rom spline through `pts`, sampled so
/// consecutive points are roughly `spacing` apart.
pub fn catmull_rom(pts: &[Vec2], spacing: f64) -> Vec<Vec2> {
    if pts.len() < 3 {
        return resample_polyline(pts, spacing);
    }
    let mut out = vec![pts[0]];
    for i in 0..pts.len() - 1 {
        let p0 = if i == 0 {
            pts[0] * 2.0 - pts[1]
        } else {
            pts[i - 1]
        };
        let p1 = pts[i];
        let p2 = pts[i + 1];
        let p3 = if i + 2 < pts.len() {
            pts[i + 2]
        } else {
            pts[i + 1] * 2.0 - pts[i]
        };
        let n = ((p2 - p1).norm() / spacing).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let t2 = t * t;
            let t3 = t2 * t;
            let q = (p1 * 2.0
                + (p2 - p0) * t
                + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
                + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
                * 0.5;
            out.push(q);
        }
    }
    out
}

/// Inserts points so no segment is longer than `spacing`.
pub fn resample_polyline(pts: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let Some(first) = pts.first() else {
        return Vec::new();
    };
    let mut out = vec![*first];
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]).norm() / spacing).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    out
}

/// Shortcut then spline; falls back to the shortcut polyline if the spline
/// leaves safe space.
pub fn smooth(
    map: &HilbertMap,
    body: &BodyModel,
    pts: &[Vec2],
    p_safe: f64,
    spacing: f64,
) -> Vec<Vec2> {
    let short = shortcut(map, body, pts, p_safe, spacing);
    let spline = catmull_rom(&short, spacing);
    if polyline_safe(map, body, &spline, p_safe, spacing) {
        spline
    } else {
        resample_polyline(&short, spacing)
    }
}

pub fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
