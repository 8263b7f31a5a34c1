//! Trajectories as weighted sums of random Fourier time features on top of an
//! initial path, with a rank-one boundary correction that pins the start.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};

const DEGENERATE_SPEED: f64 = 1e-6;

/// Random Fourier features of the 1D RBF kernel
/// `k_p(t, t') = exp(-(t - t')^2 / (2 l^2))`.
///
/// Frequencies come in cosine/sine pairs and are drawn by randomized
/// stratified sampling of the Gaussian spectral density, which keeps the
/// approximation exact on the diagonal and tight off it.
#[derive(Debug, Clone)]
pub struct TimeFeatures {
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    lengthscale: f64,
    scale: f64,
}

impl TimeFeatures {
    pub fn new(count: usize, lengthscale: f64, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput(
                "path feature count must be positive".into(),
            ));
        }
        if !(lengthscale > 0.0) {
            return Err(Error::Domain {
                name: "path lengthscale",
                value: lengthscale,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std_normal = StdNormal::new(0.0, 1.0).expect("unit normal");
        let pairs = count / 2;
        let mut frequencies = Vec::with_capacity(count);
        let mut phases = Vec::with_capacity(count);
        for m in 0..pairs {
            let u: f64 = (m as f64 + rng.random_range(0.0..1.0)) / pairs as f64;
            let u = u.clamp(1e-12, 1.0 - 1e-12);
            let w = std_normal.inverse_cdf(u) / lengthscale;
            frequencies.push(w);
            phases.push(0.0);
            frequencies.push(w);
            phases.push(-std::f64::consts::FRAC_PI_2);
        }
        if count % 2 == 1 {
            let n = Normal::new(0.0, 1.0 / lengthscale).expect("finite scale");
            frequencies.push(n.sample(&mut rng));
            phases.push(rng.random_range(0.0..std::f64::consts::TAU));
        }
        Ok(Self {
            frequencies,
            phases,
            lengthscale,
            scale: (2.0 / count as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.frequencies
                .iter()
                .zip(&self.phases)
                .map(|(w, b)| self.scale * (w * t + b).cos()),
        )
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.frequencies
                .iter()
                .zip(&self.phases)
                .map(|(w, b)| -self.scale * w * (w * t + b).sin()),
        )
    }

    pub fn second_derivative(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.frequencies
                .iter()
                .zip(&self.phases)
                .map(|(w, b)| -self.scale * w * w * (w * t + b).cos()),
        )
    }

    /// The exact kernel the features approximate.
    pub fn kernel(&self, t: f64, s: f64) -> f64 {
        let d = t - s;
        (-d * d / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// Initial guess `xi_o(t)` with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPath {
    Line {
        start: Vec2,
        end: Vec2,
    },
    /// `center + radius * (cos, sin)(start_angle + sweep * t)`.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
    /// `a + b t + c t^2`.
    Quadratic {
        a: Vec2,
        b: Vec2,
        c: Vec2,
    },
}

impl InitialPath {
    /// Straight line of `length` meters from `pose` along its heading.
    pub fn straight(pose: &Pose2, length: f64) -> Self {
        let s = pose.position();
        InitialPath::Line {
            start: s,
            end: s + crate::geometry::direction(pose.heading) * length,
        }
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        match *self {
            InitialPath::Line { start, end } => start + (end - start) * t,
            InitialPath::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let a = start_angle + sweep * t;
                center + radius * Vec2::new(a.cos(), a.sin())
            }
            InitialPath::Quadratic { a, b, c } => a + b * t + c * (t * t),
        }
    }

    pub fn velocity(&self, t: f64) -> Vec2 {
        match *self {
            InitialPath::Line { start, end } => end - start,
            InitialPath::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let a = start_angle + sweep * t;
                radius * sweep * Vec2::new(-a.sin(), a.cos())
            }
            InitialPath::Quadratic { b, c, .. } => b + c * (2.0 * t),
        }
    }

    pub fn acceleration(&self, t: f64) -> Vec2 {
        match *self {
            InitialPath::Line { .. } => Vec2::zeros(),
            InitialPath::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let a = start_angle + sweep * t;
                -radius * sweep * sweep * Vec2::new(a.cos(), a.sin())
            }
            InitialPath::Quadratic { c, .. } => 2.0 * c,
        }
    }
}

/// Body points in the robot frame; the first is the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyModel {
    pub points: Vec<Vec2>,
}

impl BodyModel {
    pub fn point() -> Self {
        Self {
            points: vec![Vec2::zeros()],
        }
    }

    /// Center plus four points on a circle of `radius`.
    pub fn disc(radius: f64) -> Self {
        Self {
            points: vec![
                Vec2::zeros(),
                Vec2::new(radius, 0.0),
                Vec2::new(0.0, radius),
                Vec2::new(-radius, 0.0),
                Vec2::new(0.0, -radius),
            ],
        }
    }

    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

impl Default for BodyModel {
    fn default() -> Self {
        Self::disc(0.2)
    }
}

/// `xi(t) = W^T Y(t) + xi_o(t) + xi_b(t)` with `xi_b(t) = -(1 - t) W^T Y(0)`,
/// so `xi(0)` equals the start of `xi_o` for every weight matrix.
#[derive(Debug, Clone)]
pub struct KernelPath {
    weights: DMatrix<f64>,
    features: TimeFeatures,
    initial: InitialPath,
    start_heading: f64,
    features_at_zero: DVector<f64>,
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "t",
            value: t,
        })
    }
}

impl KernelPath {
    pub fn new(features: TimeFeatures, initial: InitialPath, start_heading: f64) -> Self {
        let features_at_zero = features.eval(0.0);
        Self {
            weights: DMatrix::zeros(features.len(), 2),
            features,
            initial,
            start_heading,
            features_at_zero,
        }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: DMatrix<f64>) -> Result<()> {
        if weights.shape() != (self.features.len(), 2) {
            return Err(Error::InvalidInput(format!(
                "weights must be {}x2, got {:?}",
                self.features.len(),
                weights.shape()
            )));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn features(&self) -> &TimeFeatures {
        &self.features
    }

    pub fn initial(&self) -> &InitialPath {
        &self.initial
    }

    pub fn start(&self) -> Vec2 {
        self.initial.eval(0.0)
    }

    pub fn start_heading(&self) -> f64 {
        self.start_heading
    }

    fn project(&self, phi: &DVector<f64>) -> Vec2 {
        let v = self.weights.tr_mul(phi);
        Vec2::new(v[0], v[1])
    }

    pub fn eval(&self, t: f64) -> Result<Vec2> {
        check_t(t)?;
        let learned = self.project(&self.features.eval(t));
        let at_zero = self.project(&self.features_at_zero);
        Ok(self.initial.eval(t) + (learned - at_zero * (1.0 - t)))
    }

    pub fn velocity(&self, t: f64) -> Result<Vec2> {
        check_t(t)?;
        Ok(self.initial.velocity(t)
            + self.project(&self.features.derivative(t))
            + self.project(&self.features_at_zero))
    }

    pub fn acceleration(&self, t: f64) -> Result<Vec2> {
        check_t(t)?;
        Ok(self.initial.acceleration(t) + self.project(&self.features.second_derivative(t)))
    }

    /// Direction of travel at `t`. Where the speed is below 1e-6 the nearest
    /// earlier well-defined heading is reused, falling back to the start heading.
    pub fn heading(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        let mut s = t;
        loop {
            let v = self.velocity(s)?;
            if v.norm() >= DEGENERATE_SPEED {
                return Ok(v.y.atan2(v.x));
            }
            if s <= 0.0 {
                return Ok(self.start_heading);
            }
            s = (s - 0.01).max(0.0);
        }
    }

    pub fn pose(&self, t: f64) -> Result<Pose2> {
        Ok(Pose2::from_position(self.eval(t)?, self.heading(t)?))
    }

    /// Workspace location of body point `b` at `t`.
    pub fn forward_kinematics(&self, t: f64, b: &Vec2) -> Result<Vec2> {
        Ok(self.pose(t)?.transform(b))
    }

    /// Jacobian of the workspace point with respect to the configuration
    /// position; heading coupling is ignored, so this is the identity.
    pub fn jacobian(&self, t: f64, _b: &Vec2) -> Result<Matrix2<f64>> {
        check_t(t)?;
        Ok(Matrix2::identity())
    }

    /// `W <- W - step * Y(t) grad^T` (identity metric).
    pub fn update_weights(&mut self, grad: &Vec2, t: f64, step: f64) -> Result<()> {
        check_t(t)?;
        if !(grad.x.is_finite() && grad.y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite gradient {grad:?}")));
        }
        if !(step >= 0.0) || !step.is_finite() {
            return Err(Error::Domain {
                name: "step",
                value: step,
            });
        }
        if step == 0.0 {
            return Ok(());
        }
        let phi = self.features.eval(t);
        for (i, p) in phi.iter().enumerate() {
            self.weights[(i, 0)] -= step * p * grad.x;
            self.weights[(i, 1)] -= step * p * grad.y;
        }
        Ok(())
    }

    /// Poses at `n` uniform values of t in [0, 1].
    pub fn sample(&self, n: usize) -> Vec<(f64, Pose2)> {
        let n = n.max(2);
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                (t, self.pose(t).expect("t in range"))
            })
            .collect()
    }

    /// Riemann estimate of `sum |xi'(t)|^2 dt` over `n` midpoints.
    pub fn energy(&self, n: usize) -> f64 {
        let dt = 1.0 / n as f64;
        (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                self.velocity(t).expect("t in range").norm_squared() * dt
            })
            .sum()
    }

    /// Polyline length over `n` uniform samples.
    pub fn length(&self, n: usize) -> f64 {
        let pts = self.sample(n);
        pts.windows(2)
            .map(|w| (w[1].1.position() - w[0].1.position()).norm())
            .sum()
    }

    /// CSV export `t,x,y,heading` at `n` uniform samples.
    pub fn write_csv<W: Write>(&self, out: W, n: usize) -> Result<()> {
        write_pose_csv(out, &self.sample(n))
    }
}

/// A dense pose polyline parameterized by arc length; the common form in
/// which every planner hands its path to the executor.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose2>,
    cumulative: Vec<f64>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose2>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InvalidInput(
                "trajectory needs at least one pose".into(),
            ));
        }
        if poses.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("trajectory pose is not finite".into()));
        }
        let mut cumulative = Vec::with_capacity(poses.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in poses.windows(2) {
            acc += (w[1].position() - w[0].position()).norm();
            cumulative.push(acc);
        }
        Ok(Self { poses, cumulative })
    }

    /// A single pose; zero length.
    pub fn stationary(pose: Pose2) -> Self {
        Self {
            poses: vec![pose],
            cumulative: vec![0.0],
        }
    }

    pub fn from_kernel_path(path: &KernelPath, samples: usize) -> Self {
        let poses = path.sample(samples).into_iter().map(|(_, p)| p).collect();
        Self::new(poses).expect("kernel path samples are finite")
    }

    /// Headings follow the segment directions; the first pose keeps
    /// `start_heading` and degenerate segments reuse the previous heading.
    pub fn from_points(points: &[Vec2], start_heading: f64) -> Result<Self> {
        let mut poses = Vec::with_capacity(points.len());
        let mut heading = start_heading;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                let d = p - points[i - 1];
                if d.norm() > 1e-9 {
                    heading = d.y.atan2(d.x);
                }
            }
            poses.push(Pose2::from_position(*p, heading));
        }
        Self::new(poses)
    }

    pub fn poses(&self) -> &[Pose2] {
        &self.poses
    }

    pub fn start(&self) -> Pose2 {
        self.poses[0]
    }

    pub fn end(&self) -> Pose2 {
        self.poses[self.poses.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Pose at arc length `s` (clamped), interpolated linearly in position;
    /// the heading is that of the enclosing sample.
    pub fn pose_at(&self, s: f64) -> Pose2 {
        let s = s.clamp(0.0, self.length());
        let i = self.cumulative.partition_point(|&c| c <= s);
        if i == 0 {
            return self.poses[0];
        }
        if i >= self.poses.len() {
            return self.end();
        }
        let (a, b) = (&self.poses[i - 1], &self.poses[i]);
        let seg = self.cumulative[i] - self.cumulative[i - 1];
        let u = if seg > 0.0 {
            (s - self.cumulative[i - 1]) / seg
        } else {
            0.0
        };
        Pose2::from_position(a.position() + (b.position() - a.position()) * u, b.heading)
    }

    /// Positions from arc length `s0` to `s1` spaced at most `spacing`
    /// apart, both ends included.
    pub fn points_between(&self, s0: f64, s1: f64, spacing: f64) -> Vec<Vec2> {
        let span = (s1 - s0).max(0.0);
        let n = (span / spacing).ceil().max(1.0) as usize;
        (0..=n)
            .map(|k| self.pose_at(s0 + span * k as f64 / n as f64).position())
            .collect()
    }

    /// Largest map occupancy over the body points of every pose at or beyond
    /// arc length `s_from`.
    pub fn max_occupancy_from(
        &self,
        map: &crate::hilbert_map::HilbertMap,
        body: &BodyModel,
        s_from: f64,
    ) -> f64 {
        let first = self.pose_at(s_from);
        std::iter::once(first)
            .chain(
                self.poses
                    .iter()
                    .zip(&self.cumulative)
                    .filter(|(_, &c)| c > s_from)
                    .map(|(p, _)| *p),
            )
            .flat_map(|p| body.points.iter().map(move |b| p.transform(b)))
            .map(|x| map.predict_occupancy(&x))
            .fold(0.0, f64::max)
    }

    /// `n` poses uniform in arc length, each with `t = s / length`.
    pub fn resample(&self, n: usize) -> Vec<(f64, Pose2)> {
        let n = n.max(2);
        let len = self.length();
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                (t, self.pose_at(t * len))
            })
            .collect()
    }
}

/// Writes `t,x,y,heading` rows.
pub fn write_pose_csv<W: Write>(out: W, rows: &[(f64, Pose2)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "heading"])?;
    for (t, p) in rows {
        w.write_record([
            t.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.heading.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("writing path csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn features(seed: u64) -> TimeFeatures {
        TimeFeatures::new(200, 0.15, seed).unwrap()
    }

    fn random_weights(path: &mut KernelPath, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(path.features().len(), 2, |_, _| {
            rng.random_range(-scale..scale)
        });
        path.set_weights(w).unwrap();
    }

    fn line() -> InitialPath {
        InitialPath::Line {
            start: Vec2::new(0.0, 0.0),
            end: Vec2::new(1.0, 0.0),
        }
    }

    #[test]
    fn zero_weights_follow_initial_path() {
        let p = KernelPath::new(features(1), line(), 0.0);
        assert_eq!(p.eval(0.5).unwrap(), Vec2::new(0.5, 0.0));
        assert_eq!(p.velocity(0.3).unwrap(), Vec2::new(1.0, 0.0));
        assert_eq!(p.acceleration(0.7).unwrap(), Vec2::zeros());
    }

    #[test]
    fn start_is_pinned_for_any_weights() {
        let mut p = KernelPath::new(features(2), line(), 0.0);
        for seed in 0..20 {
            random_weights(&mut p, seed, 1.0);
            assert_eq!(p.eval(0.0).unwrap(), Vec2::new(0.0, 0.0));
        }
    }

    #[test]
    fn out_of_range_t_is_a_domain_error() {
        let p = KernelPath::new(features(3), line(), 0.0);
        assert!(matches!(p.eval(1.5), Err(Error::Domain { .. })));
        assert!(p.velocity(-0.1).is_err());
        assert!(p.heading(2.0).is_err());
    }

    #[test]
    fn path_is_continuous() {
        let mut p = KernelPath::new(features(4), line(), 0.0);
        random_weights(&mut p, 4, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let t = rng.random_range(0.0..0.999);
            let d = (p.eval(t + 1e-6).unwrap() - p.eval(t).unwrap()).norm();
            assert!(d < 1e-3);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut p = KernelPath::new(features(6), line(), 0.0);
        random_weights(&mut p, 6, 0.3);
        let h = 1e-6;
        for k in 1..20 {
            let t = k as f64 / 20.0;
            let v = p.velocity(t).unwrap();
            let fd = (p.eval(t + h).unwrap() - p.eval(t - h).unwrap()) / (2.0 * h);
            let a = p.acceleration(t).unwrap();
            let fda = (p.velocity(t + h).unwrap() - p.velocity(t - h).unwrap()) / (2.0 * h);
            for i in 0..2 {
                assert!((v[i] - fd[i]).abs() <= 1e-4 * v[i].abs().max(fd[i].abs()) + 1e-7);
                assert!((a[i] - fda[i]).abs() <= 1e-4 * a[i].abs().max(fda[i].abs()) + 1e-5);
            }
        }
    }

    #[test]
    fn headings_of_straight_lines() {
        let px = KernelPath::new(features(7), line(), 0.0);
        let py = KernelPath::new(
            features(7),
            InitialPath::Line {
                start: Vec2::zeros(),
                end: Vec2::new(0.0, 2.0),
            },
            0.0,
        );
        for t in [0.0, 0.4, 1.0] {
            assert!(px.heading(t).unwrap().abs() < 1e-12);
            assert!((py.heading(t).unwrap() - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn semicircle_heading_is_tangent() {
        let arc = InitialPath::Arc {
            center: Vec2::zeros(),
            radius: 1.0,
            start_angle: -FRAC_PI_2,
            sweep: PI,
        };
        let p = KernelPath::new(features(8), arc, 0.0);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let tangent = -FRAC_PI_2 + PI * t + FRAC_PI_2;
            let h = p.heading(t).unwrap();
            assert!(crate::geometry::wrap_angle(h - tangent).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_path_keeps_start_heading() {
        let p = KernelPath::new(
            features(9),
            InitialPath::Line {
                start: Vec2::new(1.0, 1.0),
                end: Vec2::new(1.0, 1.0),
            },
            0.7,
        );
        assert_eq!(p.heading(0.5).unwrap(), 0.7);
    }

    #[test]
    fn forward_kinematics_offsets() {
        let p = KernelPath::new(features(10), line(), 0.0);
        let c = p.eval(0.5).unwrap();
        assert_eq!(p.forward_kinematics(0.5, &Vec2::zeros()).unwrap(), c);
        assert_eq!(
            p.jacobian(0.5, &Vec2::zeros()).unwrap(),
            Matrix2::identity()
        );
        let x = p.forward_kinematics(0.5, &Vec2::new(0.2, 0.0)).unwrap();
        assert!((x - (c + Vec2::new(0.2, 0.0))).norm() < 1e-12);
        let up = KernelPath::new(
            features(10),
            InitialPath::Line {
                start: Vec2::zeros(),
                end: Vec2::new(0.0, 1.0),
            },
            0.0,
        );
        let c = up.eval(0.5).unwrap();
        let x = up.forward_kinematics(0.5, &Vec2::new(0.2, 0.0)).unwrap();
        assert!((x - (c + Vec2::new(0.0, 0.2))).norm() < 1e-12);
    }

    #[test]
    fn trivial_updates_do_nothing() {
        let mut p = KernelPath::new(features(11), line(), 0.0);
        random_weights(&mut p, 11, 0.2);
        let before = p.weights().clone();
        p.update_weights(&Vec2::new(1.0, -2.0), 0.5, 0.0).unwrap();
        p.update_weights(&Vec2::zeros(), 0.5, 0.3).unwrap();
        assert_eq!(p.weights(), &before);
        assert!(p
            .update_weights(&Vec2::new(f64::NAN, 0.0), 0.5, 0.1)
            .is_err());
    }

    #[test]
    fn unit_update_shifts_against_gradient() {
        let mut p = KernelPath::new(features(12), line(), 0.0);
        let step = 0.1;
        let before = p.eval(0.5).unwrap();
        p.update_weights(&Vec2::new(0.0, 1.0), 0.5, step).unwrap();
        let shift = p.eval(0.5).unwrap() - before;
        let k = p.features().kernel(0.5, 0.5) - 0.5 * p.features().kernel(0.0, 0.5);
        assert!(shift.x.abs() < 1e-9);
        assert!((shift.y + step * k).abs() < 0.01 * step, "{shift:?}");
        assert_eq!(p.eval(0.0).unwrap(), Vec2::zeros());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let p = KernelPath::new(features(13), line(), 0.0);
        let mut buf = Vec::new();
        p.write_csv(&mut buf, 200).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x,y,heading");
        assert_eq!(text.lines().count(), 201);
    }

    #[test]
    fn trajectory_arc_length_queries() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 2.0),
        ];
        let tr = Trajectory::from_points(&pts, 0.3).unwrap();
        assert_eq!(tr.length(), 3.0);
        assert_eq!(tr.start().heading, 0.3);
        let p = tr.pose_at(2.0);
        assert!((p.position() - Vec2::new(1.0, 1.0)).norm() < 1e-12);
        assert!((p.heading - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(tr.pose_at(10.0).position(), Vec2::new(1.0, 2.0));
        let between = tr.points_between(0.0, 1.0, 0.1);
        assert_eq!(between.len(), 11);
        assert!(between
            .windows(2)
            .all(|w| (w[1] - w[0]).norm() <= 0.1 + 1e-12));
        let rs = tr.resample(4);
        assert_eq!(rs[3].0, 1.0);
        assert_eq!(
            Trajectory::stationary(Pose2::new(1.0, 1.0, 0.0)).length(),
            0.0
        );
        assert!(Trajectory::new(Vec::new()).is_err());
    }
}
