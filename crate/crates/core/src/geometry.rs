//! Planar geometry primitives shared by every module.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// A 2D location or displacement in meters.
pub type Vec2 = Vector2<f64>;

/// Planar pose: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn from_position(position: Vec2, heading: f64) -> Self {
        Self::new(position.x, position.y, heading)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Transforms a point expressed in the robot frame into the world frame.
    pub fn transform(&self, local: &Vec2) -> Vec2 {
        self.position() + rotation(self.heading) * local
    }
}

/// Counter-clockwise rotation matrix.
pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Unit vector pointing along `angle`.
pub fn direction(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c, s)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = angle % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// Axis-aligned rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn is_empty(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self::new(
            self.min_x - margin,
            self.min_y - margin,
            self.max_x + margin,
            self.max_y + margin,
        )
    }
}

/// Cell-centered query grid over a bounding box.
///
/// Cell `(i, j)` covers `[min_x + i*res, min_x + (i+1)*res)` and likewise in y;
/// the query location is the cell center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryGrid {
    pub bounds: Bounds,
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
}

impl QueryGrid {
    pub fn new(bounds: Bounds, resolution: f64) -> Self {
        let cols = ((bounds.width() / resolution) - 1e-9).ceil().max(0.0) as usize;
        let rows = ((bounds.height() / resolution) - 1e-9).ceil().max(0.0) as usize;
        Self {
            bounds,
            resolution,
            cols,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.bounds.min_x + (col as f64 + 0.5) * self.resolution,
            self.bounds.min_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell centers in row-major order, row 0 at `min_y`.
    pub fn centers(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| self.center(c, r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
    }

    #[test]
    fn query_grid_counts() {
        let g = QueryGrid::new(Bounds::new(0.0, 0.0, 10.0, 10.0), 1.0);
        assert_eq!((g.cols, g.rows), (10, 10));
        assert_eq!(g.centers().count(), 100);
        assert_eq!(g.center(0, 0), Vec2::new(0.5, 0.5));
    }

    #[test]
    fn pose_transform_rotates_offsets() {
        let p = Pose2::new(1.0, 2.0, std::f64::consts::FRAC_PI_2);
        let w = p.transform(&Vec2::new(0.2, 0.0));
        assert!((w - Vec2::new(1.0, 2.2)).norm() < 1e-12);
    }
}
