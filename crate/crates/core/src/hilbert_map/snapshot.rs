use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureMap, HilbertMap};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// JSON snapshot of a map's feature layout and weights.
///
/// Random Fourier maps are rebuilt from `seed` and `feature_count`; the grid
/// fields are only meaningful for sparse RBF maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSnapshot {
    pub feature_kind: FeatureKind,
    pub lengthscale: f64,
    pub grid_origin: [f64; 2],
    pub grid_shape: [usize; 2],
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_count: Option<usize>,
}

impl MapSnapshot {
    pub fn from_map(map: &HilbertMap) -> Self {
        let f = map.features();
        let (cols, rows) = f.grid_shape();
        let rff = f.kind() == FeatureKind::RandomFourier;
        Self {
            feature_kind: f.kind(),
            lengthscale: f.lengthscale(),
            grid_origin: [f.grid_origin().x, f.grid_origin().y],
            grid_shape: [cols, rows],
            weights: map.weights().to_vec(),
            seed: rff.then(|| f.seed()),
            feature_count: rff.then(|| f.feature_count()),
        }
    }

    pub fn to_map(&self) -> Result<HilbertMap> {
        let features = match self.feature_kind {
            FeatureKind::SparseRbf => FeatureMap::sparse_rbf_grid(
                Vec2::new(self.grid_origin[0], self.grid_origin[1]),
                (self.grid_shape[0], self.grid_shape[1]),
                self.lengthscale,
            )?,
            FeatureKind::RandomFourier => FeatureMap::random_fourier(
                self.feature_count.ok_or_else(|| {
                    Error::InvalidInput("random-fourier snapshot lacks feature_count".into())
                })?,
                self.lengthscale,
                self.seed.unwrap_or(0),
            )?,
        };
        HilbertMap::with_weights(features, self.weights.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
