//! Hilbert maps: logistic regression over kernel features as a continuous
//! occupancy model, with closed-form spatial gradients of occupancy and entropy.

mod dataset;
mod features;
mod snapshot;

pub use dataset::{Label, LabeledPoint, ScanDataset};
pub use features::{FeatureKind, FeatureMap, RBF_SUPPORT_LENGTHSCALES};
pub use snapshot::MapSnapshot;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Vec2};

/// Logits are clamped to this magnitude before the sigmoid so that predictions
/// stay strictly inside (0, 1).
const LOGIT_CLAMP: f64 = 30.0;

/// Probability floor applied inside the entropy.
pub const ENTROPY_P_FLOOR: f64 = 1e-9;

/// Elastic-net regularized SGD settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub l1: f64,
    pub l2: f64,
    /// Initial step; decays as `sgd_step / sqrt(t)` over the updates of one call.
    pub sgd_step: f64,
    pub batch_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            l1: 1e-4,
            l2: 1e-4,
            sgd_step: 1.0,
            batch_size: 8,
        }
    }
}

/// Outcome of one call to [`HilbertMap::train_sgd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStatus {
    Trained {
        updates: usize,
    },
    /// The scan held no points; the weights are untouched.
    EmptyScan,
}

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Shannon entropy of a Bernoulli variable, in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(ENTROPY_P_FLOOR, 1.0 - ENTROPY_P_FLOOR);
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// dH/dp for the Bernoulli entropy, `log2((1 - p) / p)`.
pub fn binary_entropy_slope(p: f64) -> f64 {
    let p = p.clamp(ENTROPY_P_FLOOR, 1.0 - ENTROPY_P_FLOOR);
    ((1.0 - p) / p).log2()
}

/// Probability and logit-space gradient pair used by the chain rule.
pub(crate) fn probability_from_logit(logit: f64) -> f64 {
    sigmoid(logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
}

/// Continuous occupancy model `p(y = +1 | x) = sigmoid(w . phi(x))`.
#[derive(Debug, Clone)]
pub struct HilbertMap {
    features: FeatureMap,
    weights: Vec<f64>,
    training: TrainingConfig,
    dataset_count: u64,
}

impl HilbertMap {
    /// An untrained map (all weights zero, p = 0.5 everywhere).
    pub fn new(features: FeatureMap, training: TrainingConfig) -> Self {
        let weights = vec![0.0; features.dim()];
        Self {
            features,
            weights,
            training,
            dataset_count: 0,
        }
    }

    /// Sparse RBF map covering `bounds` with the default training settings.
    pub fn sparse_rbf(bounds: Bounds, lengthscale: f64) -> Result<Self> {
        Ok(Self::new(
            FeatureMap::sparse_rbf(bounds, lengthscale)?,
            TrainingConfig::default(),
        ))
    }

    pub fn with_weights(features: FeatureMap, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != features.dim() {
            return Err(Error::InvalidInput(format!(
                "weight vector has {} entries, feature map expects {}",
                weights.len(),
                features.dim()
            )));
        }
        Ok(Self {
            features,
            weights,
            training: TrainingConfig::default(),
            dataset_count: 0,
        })
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn training(&self) -> &TrainingConfig {
        &self.training
    }

    pub fn set_training(&mut self, training: TrainingConfig) {
        self.training = training;
    }

    pub fn dataset_count(&self) -> u64 {
        self.dataset_count
    }

    pub fn lengthscale(&self) -> f64 {
        self.features.lengthscale()
    }

    /// `w . phi(x)`.
    pub fn logit(&self, x: &Vec2) -> f64 {
        self.features.dot(x, &self.weights)
    }

    /// Logit and its spatial gradient `(grad phi)^T w`.
    pub fn logit_with_gradient(&self, x: &Vec2) -> (f64, Vec2) {
        self.features.dot_with_gradient(x, &self.weights)
    }

    pub fn predict_occupancy(&self, x: &Vec2) -> f64 {
        probability_from_logit(self.logit(x))
    }

    /// Occupancy and its spatial gradient `sigma (1 - sigma) (grad phi)^T w`.
    pub fn occupancy_with_gradient(&self, x: &Vec2) -> (f64, Vec2) {
        let (a, g) = self.logit_with_gradient(x);
        let p = probability_from_logit(a);
        (p, p * (1.0 - p) * g)
    }

    pub fn occupancy_gradient(&self, x: &Vec2) -> Vec2 {
        self.occupancy_with_gradient(x).1
    }

    pub fn entropy(&self, x: &Vec2) -> f64 {
        binary_entropy(self.predict_occupancy(x))
    }

    /// `dH/dp * grad p`.
    pub fn entropy_gradient(&self, x: &Vec2) -> Vec2 {
        let (p, g) = self.occupancy_with_gradient(x);
        binary_entropy_slope(p) * g
    }

    /// Mean elastic-net regularized negative log-likelihood of `scan`.
    pub fn regularized_nll(&self, scan: &ScanDataset) -> f64 {
        if scan.is_empty() {
            return 0.0;
        }
        let data: f64 = scan
            .points
            .iter()
            .map(|pt| {
                let m = pt.label.value() * self.logit(&pt.location);
                // log(1 + exp(-m)), stable for both signs
                if m > 0.0 {
                    (-m).exp().ln_1p()
                } else {
                    -m + m.exp().ln_1p()
                }
            })
            .sum::<f64>()
            / scan.len() as f64;
        let reg: f64 = self.weights[1..]
            .iter()
            .map(|w| self.training.l1 * w.abs() + 0.5 * self.training.l2 * w * w)
            .sum();
        data + reg
    }

    /// Mini-batch SGD on the regularized logistic loss, starting from the
    /// current weights. Per-sample gradients are summed within a batch and
    /// regularization is applied lazily to the features the batch touched.
    /// The bias weight is left as is.
    pub fn train_sgd<R: Rng + ?Sized>(
        &mut self,
        scan: &ScanDataset,
        epochs: usize,
        rng: &mut R,
    ) -> TrainStatus {
        if scan.is_empty() {
            warn!("train_sgd called with an empty scan; weights unchanged");
            return TrainStatus::EmptyScan;
        }
        let cfg = self.training;
        let batch_size = cfg.batch_size.max(1);
        let mut order: Vec<usize> = (0..scan.len()).collect();
        let mut grad = vec![0.0; self.weights.len()];
        let mut touched: Vec<usize> = Vec::new();
        let mut seen = vec![false; self.weights.len()];
        let mut updates = 0usize;

        for _ in 0..epochs {
            order.shuffle(rng);
            for batch in order.chunks(batch_size) {
                updates += 1;
                let step = cfg.sgd_step / (updates as f64).sqrt();
                for &k in batch {
                    let pt = &scan.points[k];
                    let y = pt.label.value();
                    let a = self.logit(&pt.location);
                    // d/da log(1 + exp(-y a)) = -y sigma(-y a)
                    let g = -y * sigmoid(-y * a);
                    self.features.for_each(&pt.location, |i, phi| {
                        if !seen[i] {
                            seen[i] = true;
                            touched.push(i);
                        }
                        grad[i] += g * phi;
                    });
                }
                for &i in &touched {
                    // the bias stays put so unobserved space keeps its prior
                    if i == 0 {
                        grad[i] = 0.0;
                        seen[i] = false;
                        continue;
                    }
                    let w = self.weights[i];
                    let gi = grad[i] + cfg.l2 * w + cfg.l1 * w.signum() * (w != 0.0) as u8 as f64;
                    self.weights[i] -= step * gi;
                    grad[i] = 0.0;
                    seen[i] = false;
                }
                touched.clear();
            }
        }
        self.dataset_count += 1;
        TrainStatus::Trained { updates }
    }

    pub fn snapshot(&self) -> MapSnapshot {
        MapSnapshot::from_map(self)
    }
}
