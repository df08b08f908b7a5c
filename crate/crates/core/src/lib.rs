//! Evolutionary generation of CAD programs with pluggable language-model
//! operators, and the mesh evaluation stack used to score the results.

pub mod bridge;
pub mod csg;
pub mod evolve;
pub mod geometry;
pub mod harness;
pub mod lm;
pub mod metrics;
pub mod render;
