//! The perturbed map: a Gaussian process whose mean function is the Hilbert
//! map log-odds, conditioned on hypothetical free-space observations. It
//! approximates the map that would result from observing those points without
//! retraining the weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};
use crate::hilbert_map::{
    binary_entropy, binary_entropy_slope, probability_from_logit, HilbertMap,
};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// `log(p / (1 - p))`.
pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Expected observations `{(x_i, r_i)}` with log-odds targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoObservations {
    pub points: Vec<Vec2>,
    pub targets: Vec<f64>,
    pub source_pose: Option<Pose2>,
}

impl PseudoObservations {
    pub fn new(points: Vec<Vec2>, targets: Vec<f64>, source_pose: Option<Pose2>) -> Result<Self> {
        if points.len() != targets.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} targets",
                points.len(),
                targets.len()
            )));
        }
        Ok(Self {
            points,
            targets,
            source_pose,
        })
    }

    /// Free-space observations, every target equal to `log_odds(p_free)`.
    pub fn free_space(points: Vec<Vec2>, p_free: f64, source_pose: Pose2) -> Self {
        let r = log_odds(p_free);
        let targets = vec![r; points.len()];
        Self {
            points,
            targets,
            source_pose: Some(source_pose),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// GP posterior mean over log-odds: `psi(x) = w . phi(x) + sum_i alpha_i k(x, x_i)`.
#[derive(Debug, Clone)]
pub struct PerturbedMap<'a> {
    base: &'a HilbertMap,
    obs: PseudoObservations,
    gp_noise: f64,
    lengthscale: f64,
    alpha: DVector<f64>,
}

impl<'a> PerturbedMap<'a> {
    /// Solves `(K + gp_noise I) alpha = r - mu` by Cholesky, escalating a
    /// diagonal jitter from 1e-10 by factors of ten up to 1e-4 if the
    /// factorization fails. The kernel is the RBF with the map's lengthscale.
    pub fn build(base: &'a HilbertMap, obs: PseudoObservations, gp_noise: f64) -> Result<Self> {
        Self::build_with_lengthscale(base, obs, gp_noise, base.lengthscale())
    }

    pub fn build_with_lengthscale(
        base: &'a HilbertMap,
        obs: PseudoObservations,
        gp_noise: f64,
        lengthscale: f64,
    ) -> Result<Self> {
        if !(gp_noise >= 0.0) || !gp_noise.is_finite() {
            return Err(Error::Domain {
                name: "gp_noise",
                value: gp_noise,
            });
        }
        let n = obs.len();
        if n == 0 {
            return Ok(Self {
                base,
                obs,
                gp_noise,
                lengthscale,
                alpha: DVector::zeros(0),
            });
        }
        let inv = 1.0 / (2.0 * lengthscale * lengthscale);
        let gram = DMatrix::from_fn(n, n, |i, j| {
            (-(obs.points[i] - obs.points[j]).norm_squared() * inv).exp()
        });
        let residual = DVector::from_iterator(
            n,
            obs.points
                .iter()
                .zip(&obs.targets)
                .map(|(x, r)| r - base.logit(x)),
        );

        let mut jitter = 0.0;
        loop {
            let mut a = gram.clone();
            for i in 0..n {
                a[(i, i)] += gp_noise + jitter;
            }
            if let Some(chol) = a.clone().cholesky() {
                let alpha = chol.solve(&residual);
                if alpha.iter().all(|v| v.is_finite()) {
                    return Ok(Self {
                        base,
                        obs,
                        gp_noise,
                        lengthscale,
                        alpha,
                    });
                }
            }
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_MAX * 1.000_001 {
                let eig = a.symmetric_eigenvalues();
                let max = eig.iter().cloned().fold(f64::MIN, f64::max);
                let min = eig.iter().cloned().fold(f64::MAX, f64::min);
                return Err(Error::SingularGram {
                    jitter: JITTER_MAX,
                    condition: if min > 0.0 { max / min } else { f64::INFINITY },
                });
            }
        }
    }

    pub fn base(&self) -> &HilbertMap {
        self.base
    }

    pub fn observations(&self) -> &PseudoObservations {
        &self.obs
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn gp_noise(&self) -> f64 {
        self.gp_noise
    }

    fn kernel(&self, a: &Vec2, b: &Vec2) -> f64 {
        (-(a - b).norm_squared() / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    /// `sum_i alpha_i k(x, x_i)`.
    fn correction(&self, x: &Vec2) -> f64 {
        self.obs
            .points
            .iter()
            .zip(self.alpha.iter())
            .map(|(xi, a)| a * self.kernel(x, xi))
            .sum()
    }

    fn correction_with_gradient(&self, x: &Vec2) -> (f64, Vec2) {
        let l2 = self.lengthscale * self.lengthscale;
        let mut v = 0.0;
        let mut g = Vec2::zeros();
        for (xi, a) in self.obs.points.iter().zip(self.alpha.iter()) {
            let k = a * self.kernel(x, xi);
            v += k;
            g -= k * (x - xi) / l2;
        }
        (v, g)
    }

    /// Perturbed log-odds `psi(x)`.
    pub fn log_odds(&self, x: &Vec2) -> f64 {
        self.base.logit(x) + self.correction(x)
    }

    pub fn perturbed_predict(&self, x: &Vec2) -> f64 {
        if self.obs.is_empty() {
            return self.base.predict_occupancy(x);
        }
        probability_from_logit(self.log_odds(x))
    }

    /// `sigma(psi) (1 - sigma(psi)) grad psi`.
    pub fn perturbed_gradient(&self, x: &Vec2) -> Vec2 {
        let (a, g) = self.base.logit_with_gradient(x);
        let (c, gc) = self.correction_with_gradient(x);
        let p = probability_from_logit(a + c);
        p * (1.0 - p) * (g + gc)
    }

    /// Pointwise mutual information `H(base) - H(perturbed)` in bits. Can be
    /// negative where conditioning pushes a probability toward 0.5.
    pub fn mi_point(&self, m: &Vec2) -> f64 {
        let a = self.base.logit(m);
        let p = probability_from_logit(a);
        let q = probability_from_logit(a + self.correction(m));
        binary_entropy(p) - binary_entropy(q)
    }

    /// Pointwise MI together with its spatial gradient.
    pub fn mi_point_with_gradient(&self, m: &Vec2) -> (f64, Vec2) {
        let (a, ga) = self.base.logit_with_gradient(m);
        let (c, gc) = self.correction_with_gradient(m);
        let p = probability_from_logit(a);
        let q = probability_from_logit(a + c);
        let grad_p = p * (1.0 - p) * ga;
        let grad_q = q * (1.0 - q) * (ga + gc);
        let mi = binary_entropy(p) - binary_entropy(q);
        let grad = binary_entropy_slope(p) * grad_p - binary_entropy_slope(q) * grad_q;
        (mi, grad)
    }

    pub fn mi_point_gradient(&self, m: &Vec2) -> Vec2 {
        self.mi_point_with_gradient(m).1
    }
}
