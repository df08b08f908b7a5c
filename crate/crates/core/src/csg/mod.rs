//! A small extrusion language used as an in-process CAD genotype.
//!
//! A program is a list of parts. Each part extrudes a 2D profile (an outer
//! loop with optional through-holes) along z between two heights:
//!
//! ```text
//! # a plate with two punched holes
//! part z 0 0.2 { rect 4 3; hole circ 0.3 at -1 0; hole circ 0.3 at 1 0 }
//! ```
//!
//! Shapes are `rect <w> <h>`, `circ <r>` (a regular 32-gon) and
//! `poly <x> <y> <x> <y> ...`. The outer shape may carry an optional
//! `at <x> <y>` offset; holes always do. Because parts are disjoint and holes
//! go straight through, the genus of every compiled solid is known exactly.

mod ast;
mod compile;
mod parse;
pub(crate) mod polygon;

pub use ast::{CsgProgram, Part, Placed, Profile, Shape, CIRCLE_SEGMENTS};
pub use compile::compile;
pub use parse::parse;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsgError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("constraint violated at line {line}, column {column}: {message}")]
    Constraint {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
}

/// `Σ (2 − 2·holes)` over parts.
pub fn expected_chi(program: &CsgProgram) -> i64 {
    program
        .parts
        .iter()
        .map(|p| 2 - 2 * p.holes.len() as i64)
        .sum()
}
