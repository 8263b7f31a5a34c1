//! Continuous occupancy mapping and information-driven path optimization for
//! autonomous 2D exploration.
//!
//! The crate is organized bottom-up:
//!
//! * [`hilbert_map`]: kernel logistic regression occupancy model and its
//!   closed-form spatial gradients.
//! * [`perturbed_map`]: a Gaussian process over the map log-odds, conditioned on
//!   hypothetical free-space observations, used to evaluate mutual information.
//! * [`sensor`]: range sensing against a ground-truth raster and against the map.
//! * [`path`]: trajectories over random Fourier time features.
//! * [`planner`]: stochastic functional gradient descent over paths.
//! * [`exploration`]: the plan/execute/sense loop and its metrics.
//! * [`baselines`]: nearest-frontier and RRT mutual-information explorers.

pub mod baselines;
pub mod env;
pub mod error;
pub mod exploration;
pub mod geometry;
pub mod hilbert_map;
pub mod path;
pub mod perturbed_map;
pub mod pgm;
pub mod planner;
pub mod runner;
pub mod scenarios;
pub mod sensor;

pub use error::{Error, Result};
pub use geometry::{Bounds, Pose2, QueryGrid, Vec2};
pub use hilbert_map::{FeatureKind, FeatureMap, HilbertMap, MapSnapshot, ScanDataset};
pub use path::{BodyModel, InitialPath, KernelPath};
pub use perturbed_map::{PerturbedMap, PseudoObservations};
pub use planner::{ObjectiveConfig, OptimizeReport};
pub use sensor::SensorModel;
