//! Ground-truth occupancy raster used only to emulate range sensing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Pose2, Vec2};
use crate::pgm::Pgm;

/// Sidecar metadata stored next to an environment PGM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvMetadata {
    pub resolution_m: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    /// Suggested start pose `[x, y, heading]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 3]>,
}

/// Boolean occupancy raster. Cell `(col, row)` spans
/// `origin + [col, col+1) x [row, row+1)` times `resolution`; row 0 is at the
/// bottom (smallest y), so PGM rows are flipped on load and save.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEnv {
    cols: usize,
    rows: usize,
    resolution: f64,
    origin: Vec2,
    cells: Vec<bool>,
}

impl GroundTruthEnv {
    pub fn new(cols: usize, rows: usize, resolution: f64, origin: Vec2) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidInput("environment has zero size".into()));
        }
        if !(resolution > 0.0) {
            return Err(Error::Domain {
                name: "resolution",
                value: resolution,
            });
        }
        Ok(Self {
            cols,
            rows,
            resolution,
            origin,
            cells: vec![false; cols * rows],
        })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(
            self.origin.x,
            self.origin.y,
            self.origin.x + self.cols as f64 * self.resolution,
            self.origin.y + self.rows as f64 * self.resolution,
        )
    }

    pub fn cell(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set_cell(&mut self, col: usize, row: usize, occupied: bool) {
        self.cells[row * self.cols + col] = occupied;
    }

    /// Marks every cell whose center lies in the given world rectangle.
    pub fn fill_rect(&mut self, min: Vec2, max: Vec2, occupied: bool) {
        for row in 0..self.rows {
            for col in 0..self.cols {
                let c = self.cell_center(col, row);
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set_cell(col, row, occupied);
                }
            }
        }
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Vec2 {
        self.origin + Vec2::new(col as f64 + 0.5, row as f64 + 0.5) * self.resolution
    }

    pub fn world_to_cell(&self, p: &Vec2) -> Option<(usize, usize)> {
        let u = ((p.x - self.origin.x) / self.resolution).floor();
        let v = ((p.y - self.origin.y) / self.resolution).floor();
        if u < 0.0 || v < 0.0 || u >= self.cols as f64 || v >= self.rows as f64 {
            None
        } else {
            Some((u as usize, v as usize))
        }
    }

    /// Occupancy at a world location; anything outside the raster counts as occupied.
    pub fn is_occupied(&self, p: &Vec2) -> bool {
        match self.world_to_cell(p) {
            Some((c, r)) => self.cell(c, r),
            None => true,
        }
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.cells.iter().filter(|&&c| c).count() as f64 / self.cells.len() as f64
    }

    /// Distance from `origin` along `angle` to the first occupied cell,
    /// found by exact grid traversal. `None` if nothing is hit within `max_range`.
    pub fn cast_ray(&self, origin: &Vec2, angle: f64, max_range: f64) -> Option<f64> {
        let (dx, dy) = (angle.cos(), angle.sin());
        let u = (origin.x - self.origin.x) / self.resolution;
        let v = (origin.y - self.origin.y) / self.resolution;
        let mut cx = u.floor() as i64;
        let mut cy = v.floor() as i64;
        let occupied = |cx: i64, cy: i64| {
            cx < 0
                || cy < 0
                || cx >= self.cols as i64
                || cy >= self.rows as i64
                || self.cell(cx as usize, cy as usize)
        };
        if occupied(cx, cy) {
            return Some(0.0);
        }
        let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
        let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
        let res = self.resolution;
        let mut t_max_x = if dx.abs() < 1e-15 {
            f64::INFINITY
        } else if dx > 0.0 {
            (self.origin.x + (cx + 1) as f64 * res - origin.x) / dx
        } else {
            (self.origin.x + cx as f64 * res - origin.x) / dx
        };
        let mut t_max_y = if dy.abs() < 1e-15 {
            f64::INFINITY
        } else if dy > 0.0 {
            (self.origin.y + (cy + 1) as f64 * res - origin.y) / dy
        } else {
            (self.origin.y + cy as f64 * res - origin.y) / dy
        };
        let t_delta_x = if dx.abs() < 1e-15 {
            f64::INFINITY
        } else {
            res / dx.abs()
        };
        let t_delta_y = if dy.abs() < 1e-15 {
            f64::INFINITY
        } else {
            res / dy.abs()
        };
        loop {
            let t = if t_max_x < t_max_y {
                cx += step_x;
                let t = t_max_x;
                t_max_x += t_delta_x;
                t
            } else {
                cy += step_y;
                let t = t_max_y;
                t_max_y += t_delta_y;
                t
            };
            if t > max_range {
                return None;
            }
            if occupied(cx, cy) {
                return Some(t);
            }
        }
    }

    /// Rotates the raster 90 degrees counter-clockwise about the world origin
    /// of the raster's bounding box minimum corner, returning the new raster and
    /// the map from old to new world coordinates.
    pub fn rotated_90(&self) -> (Self, impl Fn(&Vec2) -> Vec2) {
        let mut out = Self {
            cols: self.rows,
            rows: self.cols,
            resolution: self.resolution,
            origin: self.origin,
            cells: vec![false; self.cells.len()],
        };
        for row in 0..self.rows {
            for col in 0..self.cols {
                // (col, row) -> (rows - 1 - row, col)
                out.set_cell(self.rows - 1 - row, col, self.cell(col, row));
            }
        }
        let o = self.origin;
        let h = self.rows as f64 * self.resolution;
        let map = move |p: &Vec2| {
            let d = p - o;
            o + Vec2::new(h - d.y, d.x)
        };
        (out, map)
    }

    /// Loads a PGM (value < 128 means occupied) plus its JSON sidecar.
    pub fn load(pgm_path: &Path) -> Result<Self> {
        let bytes = std::fs::read(pgm_path)
            .map_err(|e| Error::io(format!("reading {}", pgm_path.display()), e))?;
        let meta = read_metadata(pgm_path)?;
        Self::from_pgm(&Pgm::parse(&bytes)?, &meta)
    }

    pub fn from_pgm(img: &Pgm, meta: &EnvMetadata) -> Result<Self> {
        let mut env = Self::new(
            img.width,
            img.height,
            meta.resolution_m,
            Vec2::new(meta.origin_x, meta.origin_y),
        )?;
        // scale the threshold so 16-bit images use the same midpoint
        let threshold = (128.0 / 255.0) * img.maxval as f64;
        for r in 0..img.height {
            for c in 0..img.width {
                let occupied = (img.get(c, r) as f64) < threshold;
                env.set_cell(c, img.height - 1 - r, occupied);
            }
        }
        Ok(env)
    }

    pub fn metadata(&self) -> EnvMetadata {
        EnvMetadata {
            resolution_m: self.resolution,
            origin_x: self.origin.x,
            origin_y: self.origin.y,
            start: None,
        }
    }

    /// P5 bytes: occupied cells 0, free cells 255.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut data = Vec::with_capacity(self.cells.len());
        for r in (0..self.rows).rev() {
            for c in 0..self.cols {
                data.push(if self.cell(c, r) { 0 } else { 255 });
            }
        }
        let mut buf = Vec::new();
        Pgm::write_p5(
            &mut buf,
            self.cols,
            self.rows,
            &data,
            Some("ground truth: 0 = occupied"),
        )
        .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, pgm_path: &Path) -> Result<()> {
        self.save_with_start(pgm_path, None)
    }

    /// As [`GroundTruthEnv::save`], recording a start pose in the sidecar.
    pub fn save_with_start(&self, pgm_path: &Path, start: Option<Pose2>) -> Result<()> {
        std::fs::write(pgm_path, self.to_pgm_bytes())
            .map_err(|e| Error::io(format!("writing {}", pgm_path.display()), e))?;
        let meta = EnvMetadata {
            start: start.map(|p| [p.x, p.y, p.heading]),
            ..self.metadata()
        };
        let meta_path = sidecar_path(pgm_path);
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", meta_path.display()), e))
    }

    /// SHA-256 over the raster and metadata, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_pgm_bytes());
        h.update(serde_json::to_vec(&self.metadata()).expect("metadata serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn sidecar_path(pgm_path: &Path) -> PathBuf {
    pgm_path.with_extension("json")
}

pub fn read_metadata(pgm_path: &Path) -> Result<EnvMetadata> {
    let meta_path = sidecar_path(pgm_path);
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(format!("reading {}", meta_path.display()), e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed() -> GroundTruthEnv {
        let mut env = GroundTruthEnv::new(100, 100, 0.1, Vec2::new(0.0, 0.0)).unwrap();
        env.fill_rect(Vec2::new(8.0, 0.0), Vec2::new(10.0, 10.0), true);
        env
    }

    #[test]
    fn cell_transforms_are_inverse_on_centers() {
        let env = boxed();
        for (c, r) in [(0, 0), (13, 57), (99, 99)] {
            assert_eq!(env.world_to_cell(&env.cell_center(c, r)), Some((c, r)));
        }
        assert_eq!(env.world_to_cell(&Vec2::new(-0.01, 1.0)), None);
    }

    #[test]
    fn ray_hits_wall_face() {
        let env = boxed();
        let d = env.cast_ray(&Vec2::new(5.0, 5.05), 0.0, 20.0).unwrap();
        assert!((d - 3.0).abs() < 1e-9, "{d}");
        assert_eq!(env.cast_ray(&Vec2::new(5.0, 5.05), 0.0, 2.5), None);
    }

    #[test]
    fn pgm_round_trip_preserves_cells() {
        let env = boxed();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("box.pgm");
        env.save(&p).unwrap();
        let back = GroundTruthEnv::load(&p).unwrap();
        assert_eq!(back, env);
        assert_eq!(back.content_hash(), env.content_hash());
    }
}
