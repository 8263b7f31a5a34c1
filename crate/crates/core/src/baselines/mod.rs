//! Comparison explorers: nearest-frontier over a discretized view of the map,
//! and an RRT that ranks candidate branches by full field-of-view mutual
//! information.

pub mod frontier;
pub mod rrt;
pub mod rrt_mi;

pub use frontier::{detect_frontiers, CellClass, FrontierConfig, FrontierPlan, FrontierSet};
pub use rrt::{RrtConfig, RrtTree};
pub use rrt_mi::{RrtMiConfig, RrtMiPlan};
