//! Non-neural core of a kernel-based arbitrary-shape text detector.
//!
//! The crate covers everything around the network: polygon geometry,
//! supervision label generation (text, kernel, scale and surrounding maps),
//! the multi-task loss suite with analytic gradients, kernel-to-text
//! reconstruction, annotation ingestion and IoU-based evaluation.

pub mod container;
pub mod error;
pub mod evalkit;
pub mod geometry;
pub mod ingest;
pub mod labelgen;
pub mod losses;
pub mod perf;
pub mod postproc;

pub use error::{Error, Result};
pub use geometry::{BinaryMap, Point, Polygon, Raster, ScoreMap};
