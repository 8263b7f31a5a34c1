use serde::{Deserialize, Serialize};

use crate::geometry::{direction, Pose2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Free,
    Occupied,
}

impl Label {
    /// -1 for free space, +1 for occupied.
    pub fn value(self) -> f64 {
        match self {
            Label::Free => -1.0,
            Label::Occupied => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub location: Vec2,
    pub label: Label,
}

/// Labeled training points produced by one range scan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanDataset {
    pub points: Vec<LabeledPoint>,
    pub origin_pose: Option<Pose2>,
}

impl ScanDataset {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        Self {
            points,
            origin_pose: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Builds a dataset from beams given as `(angle, range, hit)`.
    ///
    /// Free points are placed every `free_spacing` along each beam, strictly
    /// before the endpoint; a beam that hit an obstacle adds one occupied
    /// point at the endpoint. Free points closer than half a spacing to a hit
    /// are dropped.
    pub fn from_beams(origin: Pose2, beams: &[(f64, f64, bool)], free_spacing: f64) -> Self {
        let mut points = Vec::new();
        let o = origin.position();
        for &(angle, range, hit) in beams {
            let dir = direction(angle);
            let limit = if hit {
                range - 0.5 * free_spacing
            } else {
                range
            };
            let mut d = free_spacing;
            while d < limit {
                points.push(LabeledPoint {
                    location: o + dir * d,
                    label: Label::Free,
                });
                d += free_spacing;
            }
            if hit {
                points.push(LabeledPoint {
                    location: o + dir * range,
                    label: Label::Occupied,
                });
            }
        }
        Self {
            points,
            origin_pose: Some(origin),
        }
    }
}
