//! Built-in environments and small pre-trained maps used by tests, examples
//! and the benchmark harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::GroundTruthEnv;
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Pose2, Vec2};
use crate::hilbert_map::{HilbertMap, Label, LabeledPoint, ScanDataset};
use crate::sensor::{raycast_truth, SensorModel};

const WALL: f64 = 0.2;

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &["rooms", "intel-crop", "empty", "closed-room"];

fn hwall(env: &mut GroundTruthEnv, y: f64, x0: f64, x1: f64) {
    env.fill_rect(
        Vec2::new(x0, y - WALL / 2.0),
        Vec2::new(x1, y + WALL / 2.0),
        true,
    );
}

fn vwall(env: &mut GroundTruthEnv, x: f64, y0: f64, y1: f64) {
    env.fill_rect(
        Vec2::new(x - WALL / 2.0, y0),
        Vec2::new(x + WALL / 2.0, y1),
        true,
    );
}

fn boxed(width: f64, height: f64, resolution: f64) -> GroundTruthEnv {
    let cols = (width / resolution).round() as usize;
    let rows = (height / resolution).round() as usize;
    let mut env =
        GroundTruthEnv::new(cols, rows, resolution, Vec2::zeros()).expect("positive size");
    env.fill_rect(Vec2::new(0.0, 0.0), Vec2::new(width, WALL), true);
    env.fill_rect(
        Vec2::new(0.0, height - WALL),
        Vec2::new(width, height),
        true,
    );
    env.fill_rect(Vec2::new(0.0, 0.0), Vec2::new(WALL, height), true);
    env.fill_rect(Vec2::new(width - WALL, 0.0), Vec2::new(width, height), true);
    env
}

/// 20 x 20 m at 0.1 m: a horizontal corridor (y in 8.5..11.5) with two rooms
/// above and two below, each opening onto the corridor through a 1.5 m door.
pub fn rooms() -> GroundTruthEnv {
    let mut env = boxed(20.0, 20.0, 0.1);
    for (y, door_centers) in [(8.5, [5.0, 15.0]), (11.5, [5.0, 15.0])] {
        let mut x = 0.0;
        for c in door_centers {
            hwall(&mut env, y, x, c - 0.75);
            x = c + 0.75;
        }
        hwall(&mut env, y, x, 20.0);
    }
    vwall(&mut env, 10.0, 0.0, 8.5);
    vwall(&mut env, 10.0, 11.5, 20.0);
    env
}

/// 15 x 15 m at 0.1 m: a ring corridor around a central block with offices
/// along the outer walls, loosely in the style of an office floor.
pub fn intel_crop() -> GroundTruthEnv {
    let mut env = boxed(15.0, 15.0, 0.1);
    // central block
    env.fill_rect(Vec2::new(5.5, 5.5), Vec2::new(9.5, 9.5), true);
    // offices along the top and bottom
    for y in [3.0, 12.0] {
        let mut x = 0.0;
        for door in [2.5, 7.5, 12.5] {
            hwall(&mut env, y, x, door - 0.6);
            x = door + 0.6;
        }
        hwall(&mut env, y, x, 15.0);
        for x in [5.0, 10.0] {
            if y < 7.5 {
                vwall(&mut env, x, 0.0, y);
            } else {
                vwall(&mut env, x, y, 15.0);
            }
        }
    }
    // a side office on the right with a door into the ring
    vwall(&mut env, 12.0, 3.0, 6.8);
    vwall(&mut env, 12.0, 8.2, 12.0);
    // clutter
    env.fill_rect(Vec2::new(1.5, 6.5), Vec2::new(2.3, 8.5), true);
    env.fill_rect(Vec2::new(13.0, 9.5), Vec2::new(14.0, 10.3), true);
    env
}

/// Open 10 x 10 m square; everything outside counts as occupied.
pub fn empty() -> GroundTruthEnv {
    GroundTruthEnv::new(100, 100, 0.1, Vec2::zeros()).expect("positive size")
}

/// 12 x 6 m: an open hall (x < 6) joined by a 1.5 m doorway at x = 6 to a
/// closed 6 x 6 m room.
pub fn closed_room() -> GroundTruthEnv {
    let mut env = boxed(12.0, 6.0, 0.1);
    vwall(&mut env, 6.0, 0.0, 2.25);
    vwall(&mut env, 6.0, 3.75, 6.0);
    env
}

pub fn by_name(name: &str) -> Result<GroundTruthEnv> {
    match name {
        "rooms" => Ok(rooms()),
        "intel-crop" => Ok(intel_crop()),
        "empty" => Ok(empty()),
        "closed-room" => Ok(closed_room()),
        other => Err(Error::InvalidInput(format!(
            "unknown scenario {other:?}; expected one of {}",
            NAMES.join(", ")
        ))),
    }
}

/// Default start pose for a built-in environment.
pub fn start_pose(name: &str) -> Option<Pose2> {
    match name {
        "rooms" => Some(Pose2::new(2.0, 10.0, 0.0)),
        "intel-crop" => Some(Pose2::new(2.0, 4.5, 0.0)),
        "empty" => Some(Pose2::new(5.0, 5.0, 0.0)),
        "closed-room" => Some(Pose2::new(2.0, 3.0, 0.0)),
        _ => None,
    }
}

/// Synthetic scan of a straight wall at `x = wall_x` spanning `|y| <= 4`,
/// with free space sampled every 0.25 m in front of it down to `x = -4`.
pub fn wall_dataset(wall_x: f64) -> ScanDataset {
    let mut pts = Vec::new();
    for i in -16..=16 {
        let y = i as f64 * 0.25;
        pts.push(LabeledPoint {
            location: Vec2::new(wall_x, y),
            label: Label::Occupied,
        });
        let mut x = wall_x - 0.25;
        while x >= -4.0 {
            pts.push(LabeledPoint {
                location: Vec2::new(x, y),
                label: Label::Free,
            });
            x -= 0.25;
        }
    }
    ScanDataset::new(pts)
}

/// Map over `[-5, 5]^2` trained on [`wall_dataset`] with the wall at x = 2.
pub fn toy_wall_map() -> HilbertMap {
    let mut map = HilbertMap::sparse_rbf(Bounds::new(-5.0, -5.0, 5.0, 5.0), 0.5).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    map.train_sgd(&wall_dataset(2.0), 30, &mut rng);
    map
}

/// The closed room of [`closed_room`] already mapped, with the hall left
/// unknown, and a trail that enters through the doorway and ends `depth`
/// metres past it (at most 5.5). Trail poses are 0.5 m apart.
pub fn premapped_closed_room(depth: f64) -> (GroundTruthEnv, HilbertMap, Vec<Pose2>) {
    let env = closed_room();
    let bounds = env.bounds().expanded(1.0);
    let mut map = HilbertMap::sparse_rbf(bounds, 0.5).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let sensor = SensorModel::scanner();
    for (x, y) in [
        (7.0, 1.5),
        (7.0, 4.5),
        (9.0, 3.0),
        (11.0, 1.5),
        (11.0, 4.5),
        (6.5, 3.0),
    ] {
        for h in [0.0, std::f64::consts::PI] {
            let scan = raycast_truth(&env, &Pose2::new(x, y, h), &sensor, 0.25, &mut rng)
                .expect("pose inside the room");
            // only what lies inside the room counts as mapped
            let inside = scan
                .points
                .into_iter()
                .filter(|p| p.location.x > 5.9)
                .collect();
            map.train_sgd(&ScanDataset::new(inside), 5, &mut rng);
        }
    }
    let depth = depth.clamp(0.0, 5.5);
    let steps = ((depth + 1.0) / 0.5).round() as usize;
    let trail = (0..=steps)
        .map(|k| Pose2::new(5.0 + 0.5 * k as f64, 3.0, 0.0))
        .collect();
    (env, map, trail)
}

/// An open 10 x 10 m square mapped as free up to x = 8.5, while the ground
/// truth has since gained a wall across it at x = 6.3. From the returned start
/// the wall is just beyond sensor range, so a path towards the unmapped
/// strip runs into it.
pub fn injected_wall() -> (GroundTruthEnv, HilbertMap, Pose2) {
    let open = empty();
    let mut map = HilbertMap::sparse_rbf(open.bounds().expanded(1.0), 0.5).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let sensor = SensorModel::scanner();
    for x in [1.0, 3.0, 5.0, 7.0] {
        for h in [0.0, std::f64::consts::PI] {
            let scan = raycast_truth(&open, &Pose2::new(x, 5.0, h), &sensor, 0.25, &mut rng)
                .expect("pose inside the square");
            let seen = scan
                .points
                .into_iter()
                .filter(|p| p.location.x < 8.5)
                .collect();
            map.train_sgd(&ScanDataset::new(seen), 5, &mut rng);
        }
    }
    let mut truth = open;
    vwall(&mut truth, 6.3, 0.0, 10.0);
    (truth, map, Pose2::new(1.0, 5.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rooms_layout() {
        let env = rooms();
        assert_eq!((env.cols(), env.rows()), (200, 200));
        // corridor and room interiors free, walls occupied
        assert!(!env.is_occupied(&Vec2::new(2.0, 10.0)));
        assert!(!env.is_occupied(&Vec2::new(5.0, 15.0)));
        assert!(!env.is_occupied(&Vec2::new(15.0, 4.0)));
        assert!(env.is_occupied(&Vec2::new(2.0, 8.5)));
        assert!(env.is_occupied(&Vec2::new(10.0, 15.0)));
        // doors
        assert!(!env.is_occupied(&Vec2::new(5.0, 8.5)));
        assert!(!env.is_occupied(&Vec2::new(15.0, 11.5)));
        assert!(env.is_occupied(&Vec2::new(0.05, 5.0)));
    }

    #[test]
    fn start_poses_are_free() {
        for name in NAMES {
            let env = by_name(name).unwrap();
            let s = start_pose(name).unwrap();
            assert!(!env.is_occupied(&s.position()), "{name}");
        }
        assert!(by_name("moon").is_err());
    }

    #[test]
    fn closed_room_has_one_doorway() {
        let env = closed_room();
        assert!(!env.is_occupied(&Vec2::new(6.0, 3.0)));
        assert!(env.is_occupied(&Vec2::new(6.0, 1.0)));
        assert!(env.is_occupied(&Vec2::new(6.0, 5.0)));
    }

    #[test]
    fn toy_wall_is_learned() {
        let m = toy_wall_map();
        assert!(m.predict_occupancy(&Vec2::new(2.0, 0.0)) > 0.6);
        assert!(m.predict_occupancy(&Vec2::new(0.0, 0.0)) < 0.1);
        assert!((m.predict_occupancy(&Vec2::new(4.9, -4.9)) - 0.5).abs() < 1e-3);
    }
}
