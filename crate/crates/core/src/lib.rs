//! Terrain-aware energy prediction for ground robots.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod geom;
pub mod gridfile;
pub mod learned;
pub mod patch;
pub mod physics;
pub mod planner;
pub mod synthworld;
pub mod telemetry;
pub mod terrain;

pub use error::{Error, Result};
