//! Beam-based range sensing: ground-truth scans for map updates, map-based
//! expected observations at the sensor limit, and the sensing arc.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::GroundTruthEnv;
use crate::error::{Error, Result};
use crate::geometry::{direction, Pose2, Vec2};
use crate::hilbert_map::{HilbertMap, ScanDataset};
use crate::perturbed_map::{log_odds, PseudoObservations};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModel {
    /// Maximum range in meters.
    pub r_max: f64,
    /// Angular field of view in radians, centered on the heading.
    pub fov: f64,
    pub beam_count: usize,
    pub arc_sample_count: usize,
    /// Gaussian range noise on ground-truth hits, meters.
    pub range_noise_sigma: f64,
    /// Information is sampled on the arc at `r_max - arc_inset`, just inside
    /// the expected free observations.
    pub arc_inset: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self::expected()
    }
}

impl SensorModel {
    /// Model used to place expected observations: 24 beams.
    pub fn expected() -> Self {
        Self {
            r_max: 5.0,
            fov: 1.5 * std::f64::consts::PI,
            beam_count: 24,
            arc_sample_count: 24,
            range_noise_sigma: 0.0,
            arc_inset: 0.25,
        }
    }

    /// Model used for ground-truth scans: 180 beams, 1 cm range noise.
    pub fn scanner() -> Self {
        Self {
            beam_count: 180,
            range_noise_sigma: 0.01,
            ..Self::expected()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(Error::Domain {
                name: "r_max",
                value: self.r_max,
            });
        }
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::TAU + 1e-12) {
            return Err(Error::Domain {
                name: "fov",
                value: self.fov,
            });
        }
        if self.beam_count < 2 {
            return Err(Error::Domain {
                name: "beam_count",
                value: self.beam_count as f64,
            });
        }
        if self.arc_sample_count == 0 {
            return Err(Error::Domain {
                name: "arc_sample_count",
                value: 0.0,
            });
        }
        if !(self.arc_inset >= 0.0 && self.arc_inset < self.r_max) {
            return Err(Error::Domain {
                name: "arc_inset",
                value: self.arc_inset,
            });
        }
        if !(self.range_noise_sigma >= 0.0) {
            return Err(Error::Domain {
                name: "range_noise_sigma",
                value: self.range_noise_sigma,
            });
        }
        Ok(())
    }

    /// `count` angles evenly spread over the field of view around `heading`,
    /// endpoints included. A full-circle field of view skips the duplicate
    /// endpoint.
    pub fn angles(&self, heading: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![heading];
        }
        let full = self.fov >= std::f64::consts::TAU - 1e-9;
        let step = if full {
            self.fov / count as f64
        } else {
            self.fov / (count - 1) as f64
        };
        let start = heading - 0.5 * self.fov;
        (0..count).map(|k| start + k as f64 * step).collect()
    }

    pub fn beam_angles(&self, heading: f64) -> Vec<f64> {
        self.angles(heading, self.beam_count)
    }
}

/// One simulated beam: `(angle, range, hit)`.
pub type Beam = (f64, f64, bool);

/// Free-space targets capped at the current map log-odds, so an expected
/// free observation never makes the map less certain that a point is free.
fn free_observations(
    map: &HilbertMap,
    points: Vec<Vec2>,
    p_free: f64,
    pose: &Pose2,
) -> PseudoObservations {
    let r = log_odds(p_free);
    let targets = points.iter().map(|x| r.min(map.logit(x))).collect();
    PseudoObservations {
        points,
        targets,
        source_pose: Some(*pose),
    }
}

/// Ground-truth scan by exact grid traversal along each beam.
///
/// Hits receive Gaussian range noise clamped to `[0, r_max]`; beams that reach
/// `r_max` report free space only.
pub fn raycast_beams<R: Rng + ?Sized>(
    env: &GroundTruthEnv,
    pose: &Pose2,
    sensor: &SensorModel,
    rng: &mut R,
) -> Result<Vec<Beam>> {
    sensor.validate()?;
    let o = pose.position();
    if !pose.is_finite() || env.is_occupied(&o) {
        return Err(Error::InvalidPose {
            x: pose.x,
            y: pose.y,
            reason: "pose is outside the environment or inside an obstacle".into(),
        });
    }
    let noise = (sensor.range_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, sensor.range_noise_sigma).expect("positive sigma"));
    Ok(sensor
        .beam_angles(pose.heading)
        .into_iter()
        .map(|a| match env.cast_ray(&o, a, sensor.r_max) {
            Some(d) => {
                let d = match &noise {
                    Some(n) => (d + n.sample(rng)).clamp(0.0, sensor.r_max),
                    None => d,
                };
                (a, d, true)
            }
            None => (a, sensor.r_max, false),
        })
        .collect())
}

/// Ground-truth scan converted into labeled training points spaced
/// `free_spacing` apart along each beam.
pub fn raycast_truth<R: Rng + ?Sized>(
    env: &GroundTruthEnv,
    pose: &Pose2,
    sensor: &SensorModel,
    free_spacing: f64,
    rng: &mut R,
) -> Result<ScanDataset> {
    let beams = raycast_beams(env, pose, sensor, rng)?;
    Ok(ScanDataset::from_beams(*pose, &beams, free_spacing))
}

/// Distance along a beam at which the map first exceeds `p_block`, marching at
/// half a lengthscale up to and including `r_max`.
fn blocking_distance(
    map: &HilbertMap,
    origin: &Vec2,
    dir: &Vec2,
    r_max: f64,
    p_block: f64,
) -> Option<f64> {
    let step = 0.5 * map.lengthscale();
    let n = (r_max / step).ceil() as usize;
    (1..=n)
        .map(|k| (k as f64 * step).min(r_max))
        .find(|d| map.predict_occupancy(&(origin + dir * *d)) > p_block)
}

/// Free-space pseudo-observations at the `r_max` endpoint of every beam the
/// map does not block.
pub fn expected_observations(
    map: &HilbertMap,
    pose: &Pose2,
    sensor: &SensorModel,
    p_block: f64,
    p_free: f64,
) -> PseudoObservations {
    let o = pose.position();
    let points = sensor
        .beam_angles(pose.heading)
        .into_iter()
        .filter_map(|a| {
            let dir = direction(a);
            match blocking_distance(map, &o, &dir, sensor.r_max, p_block) {
                Some(_) => None,
                None => Some(o + dir * sensor.r_max),
            }
        })
        .collect();
    free_observations(map, points, p_free, pose)
}

/// Free-space pseudo-observations along the whole field of view: points every
/// `spacing` along each beam, up to the blocking point or `r_max` inclusive.
pub fn full_fov_observations(
    map: &HilbertMap,
    pose: &Pose2,
    sensor: &SensorModel,
    p_block: f64,
    p_free: f64,
    spacing: f64,
) -> PseudoObservations {
    let o = pose.position();
    let mut points = Vec::new();
    for a in sensor.beam_angles(pose.heading) {
        let dir = direction(a);
        let limit = blocking_distance(map, &o, &dir, sensor.r_max, p_block);
        let mut d = spacing;
        loop {
            let inside = match limit {
                Some(b) => d < b,
                None => d <= sensor.r_max + 1e-12,
            };
            if !inside {
                break;
            }
            points.push(o + dir * d);
            d += spacing;
        }
    }
    free_observations(map, points, p_free, pose)
}

/// `arc_sample_count` points on the `r_max` arc spanning the field of view.
pub fn arc_samples(pose: &Pose2, sensor: &SensorModel) -> Vec<Vec2> {
    let o = pose.position();
    sensor
        .angles(pose.heading, sensor.arc_sample_count)
        .into_iter()
        .map(|a| o + direction(a) * (sensor.r_max - sensor.arc_inset))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bounds;
    use crate::hilbert_map::{Label, LabeledPoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn open_env() -> GroundTruthEnv {
        GroundTruthEnv::new(400, 400, 0.05, Vec2::new(-10.0, -10.0)).unwrap()
    }

    fn noiseless(beams: usize) -> SensorModel {
        SensorModel {
            beam_count: beams,
            range_noise_sigma: 0.0,
            ..SensorModel::scanner()
        }
    }

    #[test]
    fn empty_environment_reports_max_range() {
        let env = open_env();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let beams = raycast_beams(
            &env,
            &Pose2::new(0.0, 0.0, 0.3),
            &SensorModel::scanner(),
            &mut rng,
        )
        .unwrap();
        assert!(beams.iter().all(|&(_, r, hit)| !hit && r == 5.0));
        let ds = raycast_truth(
            &env,
            &Pose2::new(0.0, 0.0, 0.3),
            &SensorModel::scanner(),
            0.25,
            &mut rng,
        )
        .unwrap();
        assert!(ds.points.iter().all(|p| p.label == Label::Free));
    }

    #[test]
    fn wall_ahead_is_hit_exactly() {
        let mut env = open_env();
        env.fill_rect(Vec2::new(3.0, -10.0), Vec2::new(4.0, 10.0), true);
        let s = SensorModel {
            beam_count: 3,
            fov: PI,
            ..noiseless(3)
        };
        let beams = raycast_beams(
            &env,
            &Pose2::new(0.0, 0.0, 0.0),
            &s,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let (a, r, hit) = beams[1];
        assert_eq!(a, 0.0);
        assert!(hit);
        assert!((r - 3.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn single_cell_hit_matches_analytic_intersection() {
        let mut env = open_env();
        // the cell spanning [2.0, 2.05] x [1.0, 1.05]
        let (c, r) = env.world_to_cell(&Vec2::new(2.02, 1.02)).unwrap();
        env.set_cell(c, r, true);
        let target = env.cell_center(c, r);
        let angle = target.y.atan2(target.x);
        let s = SensorModel {
            fov: 0.0 + 1e-6,
            ..noiseless(2)
        };
        let beams = raycast_beams(
            &env,
            &Pose2::new(0.0, 0.0, angle),
            &s,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        // slab intersection with the cell's box
        let dir = direction(angle);
        let t_x = (2.0 - 0.0) / dir.x;
        let t_y = (1.0 - 0.0) / dir.y;
        let analytic = t_x.max(t_y);
        let (_, d, hit) = beams[0];
        assert!(hit);
        assert!((d - analytic).abs() <= 0.05 / 2.0, "{d} vs {analytic}");
    }

    #[test]
    fn pose_inside_obstacle_is_rejected() {
        let mut env = open_env();
        env.fill_rect(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), true);
        let res = raycast_beams(
            &env,
            &Pose2::new(0.0, 0.0, 0.0),
            &SensorModel::scanner(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(res, Err(Error::InvalidPose { .. })));
    }

    #[test]
    fn noiseless_scan_is_rotation_equivariant() {
        let mut env = GroundTruthEnv::new(120, 120, 0.05, Vec2::new(0.0, 0.0)).unwrap();
        env.fill_rect(Vec2::new(4.0, 1.0), Vec2::new(4.5, 5.0), true);
        env.fill_rect(Vec2::new(1.0, 4.6), Vec2::new(3.0, 5.2), true);
        let s = SensorModel {
            fov: 2.0 * PI,
            ..noiseless(36)
        };
        let pose = Pose2::new(2.0, 2.0, 0.0);
        let (rot, map_point) = env.rotated_90();
        let p2 = map_point(&pose.position());
        let rpose = Pose2::new(p2.x, p2.y, FRAC_PI_2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = raycast_beams(&env, &pose, &s, &mut rng).unwrap();
        let b = raycast_beams(&rot, &rpose, &s, &mut rng).unwrap();
        for ((_, ra, ha), (_, rb, hb)) in a.iter().zip(&b) {
            assert_eq!(ha, hb);
            assert!((ra - rb).abs() < 1e-9, "{ra} vs {rb}");
        }
    }

    #[test]
    fn unknown_map_lets_every_beam_through() {
        let map = HilbertMap::sparse_rbf(Bounds::new(-10.0, -10.0, 10.0, 10.0), 0.5).unwrap();
        let s = SensorModel::expected();
        let pose = Pose2::new(0.5, -0.3, 0.7);
        let z = expected_observations(&map, &pose, &s, 0.6, 0.1);
        assert_eq!(z.len(), s.beam_count);
        for p in &z.points {
            assert!(((p - pose.position()).norm() - s.r_max).abs() < 1e-9);
        }
        assert!(z
            .targets
            .iter()
            .all(|&r| (r - (0.1f64 / 0.9).ln()).abs() < 1e-15));
        assert!(expected_observations(&map, &pose, &s, 0.0, 0.1).is_empty());
    }

    #[test]
    fn confident_wall_blocks_beams() {
        let mut map = HilbertMap::sparse_rbf(Bounds::new(-10.0, -10.0, 10.0, 10.0), 0.5).unwrap();
        let mut pts = Vec::new();
        for i in -20..=20 {
            let y = i as f64 * 0.25;
            pts.push(LabeledPoint {
                location: Vec2::new(2.0, y),
                label: Label::Occupied,
            });
            for k in 1..8 {
                pts.push(LabeledPoint {
                    location: Vec2::new(2.0 - 0.25 * k as f64, y),
                    label: Label::Free,
                });
            }
        }
        let data = ScanDataset::new(pts);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        map.train_sgd(&data, 20, &mut rng);
        assert!(map.predict_occupancy(&Vec2::new(2.0, 0.0)) > 0.7);
        let s = SensorModel {
            fov: PI / 2.0,
            beam_count: 5,
            ..SensorModel::expected()
        };
        let z = expected_observations(&map, &Pose2::new(0.0, 0.0, 0.0), &s, 0.6, 0.1);
        // the central beams cross the wall segment and are excluded
        for p in &z.points {
            assert!(p.y.abs() > 5.0 * 0.5f64.sqrt() - 1e-6 || p.x < 2.0, "{p:?}");
        }
        assert!(z.len() < 5);
    }

    #[test]
    fn arc_samples_geometry() {
        let s = SensorModel {
            fov: PI,
            arc_sample_count: 3,
            arc_inset: 0.0,
            ..SensorModel::expected()
        };
        let pts = arc_samples(&Pose2::new(0.0, 0.0, 0.0), &s);
        let expect = [
            Vec2::new(0.0, -5.0),
            Vec2::new(5.0, 0.0),
            Vec2::new(0.0, 5.0),
        ];
        for (p, e) in pts.iter().zip(expect.iter()) {
            assert!((p - e).norm() < 1e-12);
        }
        let one = SensorModel {
            arc_sample_count: 1,
            ..s
        };
        let p = arc_samples(&Pose2::new(1.0, 1.0, FRAC_PI_2), &one);
        assert!((p[0] - Vec2::new(1.0, 6.0)).norm() < 1e-12);
        let pose = Pose2::new(0.3, 0.1, 2.0);
        for p in arc_samples(&pose, &SensorModel::expected()) {
            assert!(((p - pose.position()).norm() - 4.75).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_p_block_never_removes_beams() {
        let mut map = HilbertMap::sparse_rbf(Bounds::new(-10.0, -10.0, 10.0, 10.0), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for w in map.weights_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        let s = SensorModel::expected();
        let pose = Pose2::new(0.0, 0.0, 0.0);
        let mut prev = 0;
        for k in 0..=20 {
            let n = expected_observations(&map, &pose, &s, k as f64 / 20.0, 0.1).len();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn full_fov_places_points_along_beams() {
        let map = HilbertMap::sparse_rbf(Bounds::new(-10.0, -10.0, 10.0, 10.0), 0.5).unwrap();
        let s = SensorModel::expected();
        let z = full_fov_observations(&map, &Pose2::new(0.0, 0.0, 0.0), &s, 0.6, 0.1, 0.5);
        assert_eq!(z.len(), s.beam_count * 10);
    }
}
