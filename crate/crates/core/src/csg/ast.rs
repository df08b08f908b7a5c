use std::fmt;

use super::polygon::{self, Point2};

pub const CIRCLE_SEGMENTS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect { width: f64, height: f64 },
    Circ { radius: f64 },
    Poly(Vec<Point2>),
}

impl Shape {
    /// Vertex loop of the shape translated by `at`, in the order the shape
    /// defines it (callers fix orientation).
    pub fn outline(&self, at: Point2) -> Vec<Point2> {
        let [x, y] = at;
        match self {
            Shape::Rect { width, height } => {
                let (hw, hh) = (width / 2.0, height / 2.0);
                vec![
                    [x - hw, y - hh],
                    [x + hw, y - hh],
                    [x + hw, y + hh],
                    [x - hw, y + hh],
                ]
            }
            Shape::Circ { radius } => (0..CIRCLE_SEGMENTS)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / CIRCLE_SEGMENTS as f64;
                    [x + radius * t.cos(), y + radius * t.sin()]
                })
                .collect(),
            Shape::Poly(points) => points.iter().map(|p| [p[0] + x, p[1] + y]).collect(),
        }
    }
}

/// A shape with its placement offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Placed {
    pub shape: Shape,
    pub at: Point2,
}

impl Placed {
    pub fn new(shape: Shape, x: f64, y: f64) -> Self {
        Self { shape, at: [x, y] }
    }
}

/// Outer loop (counter-clockwise) with holes (clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub outer: Vec<Point2>,
    pub holes: Vec<Vec<Point2>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub outer: Placed,
    pub holes: Vec<Placed>,
    pub z0: f64,
    pub z1: f64,
}

impl Part {
    pub fn profile(&self) -> Profile {
        let mut outer = polygon::simplify(&self.outer.shape.outline(self.outer.at));
        if polygon::signed_area(&outer) < 0.0 {
            outer.reverse();
        }
        let holes = self
            .holes
            .iter()
            .map(|h| {
                let mut loop_ = polygon::simplify(&h.shape.outline(h.at));
                if polygon::signed_area(&loop_) > 0.0 {
                    loop_.reverse();
                }
                loop_
            })
            .collect();
        Profile { outer, holes }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsgProgram {
    pub parts: Vec<Part>,
}

impl CsgProgram {
    pub fn hole_count(&self) -> usize {
        self.parts.iter().map(|p| p.holes.len()).sum()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Rect { width, height } => write!(f, "rect {width} {height}"),
            Shape::Circ { radius } => write!(f, "circ {radius}"),
            Shape::Poly(points) => {
                f.write_str("poly")?;
                for [x, y] in points {
                    write!(f, " {x} {y}")?;
                }
                Ok(())
            }
        }
    }
}

/// Canonical text form; `parse` reads it back to an equal program.
impl fmt::Display for CsgProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, part) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "part z {} {} {{ {}", part.z0, part.z1, part.outer.shape)?;
            if part.outer.at != [0.0, 0.0] {
                write!(f, " at {} {}", part.outer.at[0], part.outer.at[1])?;
            }
            for hole in &part.holes {
                write!(f, "; hole {} at {} {}", hole.shape, hole.at[0], hole.at[1])?;
            }
            f.write_str(" }")?;
        }
        Ok(())
    }
}
