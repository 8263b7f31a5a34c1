//! Kernel-approximating feature maps for the continuous occupancy model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Vec2};

/// Radius, in lengthscales, beyond which a sparse RBF feature is exactly zero.
/// exp(-7^2 / 2) is about 2.3e-11.
pub const RBF_SUPPORT_LENGTHSCALES: f64 = 7.0;

// Largest number of grid columns an axis window can span.
const WINDOW: usize = 2 * RBF_SUPPORT_LENGTHSCALES as usize + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    SparseRbf,
    RandomFourier,
}

/// Feature projection `x -> [1, phi_1(x), ..., phi_n(x)]`.
///
/// Sparse RBF features sit on a regular inducing-point grid whose pitch equals
/// the lengthscale; index `1 + row * cols + col` addresses inducing point
/// `grid_origin + (col, row) * pitch`. Index 0 is the constant bias feature.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    kind: FeatureKind,
    lengthscale: f64,
    grid_origin: Vec2,
    cols: usize,
    rows: usize,
    frequencies: Vec<Vec2>,
    phases: Vec<f64>,
    seed: u64,
}

impl FeatureMap {
    /// Sparse RBF features on a grid covering `bounds`.
    pub fn sparse_rbf(bounds: Bounds, lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::Domain {
                name: "lengthscale",
                value: lengthscale,
            });
        }
        if bounds.is_empty() {
            return Err(Error::InvalidInput("feature grid bounds are empty".into()));
        }
        let cols = (bounds.width() / lengthscale).ceil() as usize + 1;
        let rows = (bounds.height() / lengthscale).ceil() as usize + 1;
        Self::sparse_rbf_grid(
            Vec2::new(bounds.min_x, bounds.min_y),
            (cols, rows),
            lengthscale,
        )
    }

    pub fn sparse_rbf_grid(origin: Vec2, shape: (usize, usize), lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::Domain {
                name: "lengthscale",
                value: lengthscale,
            });
        }
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidInput("feature grid has zero size".into()));
        }
        Ok(Self {
            kind: FeatureKind::SparseRbf,
            lengthscale,
            grid_origin: origin,
            cols: shape.0,
            rows: shape.1,
            frequencies: Vec::new(),
            phases: Vec::new(),
            seed: 0,
        })
    }

    /// Random Fourier features `sqrt(2/D) cos(omega . x + b)` of the RBF kernel.
    pub fn random_fourier(feature_count: usize, lengthscale: f64, seed: u64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::Domain {
                name: "lengthscale",
                value: lengthscale,
            });
        }
        if feature_count == 0 {
            return Err(Error::InvalidInput("feature_count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / lengthscale).expect("finite scale");
        let frequencies = (0..feature_count)
            .map(|_| Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let phases = (0..feature_count)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        Ok(Self {
            kind: FeatureKind::RandomFourier,
            lengthscale,
            grid_origin: Vec2::zeros(),
            cols: 0,
            rows: 0,
            frequencies,
            phases,
            seed,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn grid_origin(&self) -> Vec2 {
        self.grid_origin
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of kernel features, excluding the bias.
    pub fn feature_count(&self) -> usize {
        match self.kind {
            FeatureKind::SparseRbf => self.cols * self.rows,
            FeatureKind::RandomFourier => self.frequencies.len(),
        }
    }

    /// Feature vector length including the bias entry.
    pub fn dim(&self) -> usize {
        self.feature_count() + 1
    }

    pub fn inducing_points(&self) -> Vec<Vec2> {
        let mut pts = Vec::with_capacity(self.cols * self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                pts.push(self.inducing_point(c, r));
            }
        }
        pts
    }

    fn inducing_point(&self, col: usize, row: usize) -> Vec2 {
        self.grid_origin + Vec2::new(col as f64, row as f64) * self.lengthscale
    }

    /// The RBF kernel the features approximate.
    pub fn kernel(&self, a: &Vec2, b: &Vec2) -> f64 {
        (-(a - b).norm_squared() / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    /// Fills `out[k]` with `exp(-d_k^2 / (2 l^2))` for the inducing points of
    /// `window`, where `d_k` is the offset from `coord`. With pitch equal to
    /// the lengthscale, consecutive ratios shrink by a constant `e^-1`, so the
    /// recurrence starts exactly at the nearest inducing point and needs three
    /// exponentials per axis.
    fn axis_gaussians(
        &self,
        coord: f64,
        origin: f64,
        window: &std::ops::Range<usize>,
        out: &mut [f64; WINDOW],
    ) {
        if window.is_empty() {
            return;
        }
        let decay = std::f64::consts::E.recip();
        let u = (coord - origin) / self.lengthscale - window.start as f64;
        let n = window.len();
        let k0 = u.round().clamp(0.0, (n - 1) as f64) as usize;
        let d0 = u - k0 as f64;
        out[k0] = (-0.5 * d0 * d0).exp();
        let mut g = out[k0];
        let mut ratio = (d0 - 0.5).exp();
        for slot in out.iter_mut().take(n).skip(k0 + 1) {
            g *= ratio;
            *slot = g;
            ratio *= decay;
        }
        let mut g = out[k0];
        let mut ratio = (-d0 - 0.5).exp();
        for slot in out[..k0].iter_mut().rev() {
            g *= ratio;
            *slot = g;
            ratio *= decay;
        }
    }

    fn axis_window(&self, coord: f64, origin: f64, count: usize) -> std::ops::Range<usize> {
        let u = (coord - origin) / self.lengthscale;
        let lo = (u - RBF_SUPPORT_LENGTHSCALES).ceil().max(0.0);
        let hi = (u + RBF_SUPPORT_LENGTHSCALES).floor();
        if hi < 0.0 || lo > (count - 1) as f64 {
            return 0..0;
        }
        let hi = hi.min((count - 1) as f64);
        lo as usize..hi as usize + 1
    }

    /// Calls `f(index, value)` for every non-zero feature at `x` (bias included).
    pub fn for_each(&self, x: &Vec2, mut f: impl FnMut(usize, f64)) {
        f(0, 1.0);
        match self.kind {
            FeatureKind::SparseRbf => {
                let xs = self.axis_window(x.x, self.grid_origin.x, self.cols);
                let ys = self.axis_window(x.y, self.grid_origin.y, self.rows);
                let mut gx = [0.0; WINDOW];
                let mut gy = [0.0; WINDOW];
                self.axis_gaussians(x.x, self.grid_origin.x, &xs, &mut gx);
                self.axis_gaussians(x.y, self.grid_origin.y, &ys, &mut gy);
                for (j, r) in ys.enumerate() {
                    let base = 1 + r * self.cols;
                    for (k, c) in xs.clone().enumerate() {
                        f(base + c, gx[k] * gy[j]);
                    }
                }
            }
            FeatureKind::RandomFourier => {
                let scale = (2.0 / self.frequencies.len() as f64).sqrt();
                for (j, (w, b)) in self.frequencies.iter().zip(&self.phases).enumerate() {
                    f(j + 1, scale * (w.dot(x) + b).cos());
                }
            }
        }
    }

    /// `phi(x) . weights`, equal to summing `for_each` against `weights`.
    pub fn dot(&self, x: &Vec2, weights: &[f64]) -> f64 {
        match self.kind {
            FeatureKind::SparseRbf => {
                let xs = self.axis_window(x.x, self.grid_origin.x, self.cols);
                let ys = self.axis_window(x.y, self.grid_origin.y, self.rows);
                let width = xs.len();
                let mut gx = [0.0; WINDOW];
                let mut gy = [0.0; WINDOW];
                self.axis_gaussians(x.x, self.grid_origin.x, &xs, &mut gx);
                self.axis_gaussians(x.y, self.grid_origin.y, &ys, &mut gy);
                let mut a = weights[0];
                for (j, r) in ys.enumerate() {
                    let gy = gy[j];
                    let start = 1 + r * self.cols + xs.start;
                    let row = &weights[start..start + width];
                    let s: f64 = row.iter().zip(&gx[..width]).map(|(w, g)| w * g).sum();
                    a += gy * s;
                }
                a
            }
            FeatureKind::RandomFourier => {
                let mut a = 0.0;
                self.for_each(x, |i, phi| a += weights[i] * phi);
                a
            }
        }
    }

    /// `phi(x) . weights` and its spatial gradient.
    pub fn dot_with_gradient(&self, x: &Vec2, weights: &[f64]) -> (f64, Vec2) {
        match self.kind {
            FeatureKind::SparseRbf => {
                let l2 = self.lengthscale * self.lengthscale;
                let xs = self.axis_window(x.x, self.grid_origin.x, self.cols);
                let ys = self.axis_window(x.y, self.grid_origin.y, self.rows);
                let width = xs.len();
                let mut gx = [0.0; WINDOW];
                let mut gy = [0.0; WINDOW];
                let mut dx = [0.0; WINDOW];
                self.axis_gaussians(x.x, self.grid_origin.x, &xs, &mut gx);
                self.axis_gaussians(x.y, self.grid_origin.y, &ys, &mut gy);
                for (k, c) in xs.clone().enumerate() {
                    dx[k] = -(x.x - (self.grid_origin.x + c as f64 * self.lengthscale)) / l2;
                }
                let mut a = weights[0];
                let mut g = Vec2::zeros();
                for (j, r) in ys.enumerate() {
                    let dy = -(x.y - (self.grid_origin.y + r as f64 * self.lengthscale)) / l2;
                    let start = 1 + r * self.cols + xs.start;
                    let row = &weights[start..start + width];
                    let mut s = 0.0;
                    let mut sx = 0.0;
                    for k in 0..width {
                        let wg = row[k] * gx[k];
                        s += wg;
                        sx += wg * dx[k];
                    }
                    a += gy[j] * s;
                    g.x += gy[j] * sx;
                    g.y += gy[j] * s * dy;
                }
                (a, g)
            }
            FeatureKind::RandomFourier => {
                let mut a = 0.0;
                let mut g = Vec2::zeros();
                self.for_each_with_gradient(x, |i, phi, dphi| {
                    a += weights[i] * phi;
                    g += dphi * weights[i];
                });
                (a, g)
            }
        }
    }

    /// Like [`FeatureMap::for_each`], also passing the spatial gradient of each feature.
    pub fn for_each_with_gradient(&self, x: &Vec2, mut f: impl FnMut(usize, f64, Vec2)) {
        f(0, 1.0, Vec2::zeros());
        match self.kind {
            FeatureKind::SparseRbf => {
                let l2 = self.lengthscale * self.lengthscale;
                let xs = self.axis_window(x.x, self.grid_origin.x, self.cols);
                let ys = self.axis_window(x.y, self.grid_origin.y, self.rows);
                let mut gx = [0.0; WINDOW];
                let mut gy = [0.0; WINDOW];
                self.axis_gaussians(x.x, self.grid_origin.x, &xs, &mut gx);
                self.axis_gaussians(x.y, self.grid_origin.y, &ys, &mut gy);
                for (j, r) in ys.enumerate() {
                    let dy = -(x.y - (self.grid_origin.y + r as f64 * self.lengthscale)) / l2;
                    let base = 1 + r * self.cols;
                    for (k, c) in xs.clone().enumerate() {
                        let dx = -(x.x - (self.grid_origin.x + c as f64 * self.lengthscale)) / l2;
                        let v = gx[k] * gy[j];
                        f(base + c, v, Vec2::new(v * dx, v * dy));
                    }
                }
            }
            FeatureKind::RandomFourier => {
                let scale = (2.0 / self.frequencies.len() as f64).sqrt();
                for (j, (w, b)) in self.frequencies.iter().zip(&self.phases).enumerate() {
                    let (s, c) = (w.dot(x) + b).sin_cos();
                    f(j + 1, scale * c, -scale * s * w);
                }
            }
        }
    }

    fn check_finite(x: &Vec2) -> Result<()> {
        if x.x.is_finite() && x.y.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "non-finite location ({}, {})",
                x.x, x.y
            )))
        }
    }

    /// Dense feature vector, bias first.
    pub fn compute_features(&self, x: &Vec2) -> Result<DVector<f64>> {
        Self::check_finite(x)?;
        let mut v = DVector::zeros(self.dim());
        self.for_each(x, |i, phi| v[i] = phi);
        Ok(v)
    }

    /// Dense `dim x 2` spatial Jacobian of the feature vector; the bias row is zero.
    pub fn compute_feature_jacobian(&self, x: &Vec2) -> Result<DMatrix<f64>> {
        Self::check_finite(x)?;
        let mut jac = DMatrix::zeros(self.dim(), 2);
        self.for_each_with_gradient(x, |i, _, g| {
            jac[(i, 0)] = g.x;
            jac[(i, 1)] = g.y;
        });
        Ok(jac)
    }
}
