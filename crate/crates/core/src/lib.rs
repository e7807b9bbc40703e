//! Terrain-aware, task-driven hierarchical scene graphs from metric-semantic point clouds.

pub mod cli;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod objects;
pub mod places;
pub mod prompt;
pub mod raster;
pub mod spatial;

pub use error::{Error, Result};
