use super::ast::{CsgProgram, Part, Placed, Shape};
use super::polygon;
use super::CsgError;

/// Minimum clearance between distinct boundaries, well above the weld grid.
const CLEARANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Open,
    Close,
    Semi,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> CsgError {
    CsgError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, CsgError> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (col, ch) = chars[i];
            let column = col + 1;
            let simple = match ch {
                '{' => Some(Tok::Open),
                '}' => Some(Tok::Close),
                ';' => Some(Tok::Semi),
                _ => None,
            };
            if let Some(tok) = simple {
                out.push(Spanned { tok, line: li + 1, column });
                i += 1;
                continue;
            }
            if ch.is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() && !chars[i].1.is_whitespace() && !"{};".contains(chars[i].1) {
                i += 1;
            }
            let end = if i < chars.len() { chars[i].0 } else { line.len() };
            let word = &line[col..end];
            let tok = if word.chars().all(|c| c.is_ascii_alphabetic()) {
                Tok::Word(word.to_string())
            } else {
                match word.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Num(v),
                    _ => return Err(syntax(li + 1, chars[start].0 + 1, format!("invalid token `{word}`"))),
                }
            };
            out.push(Spanned { tok, line: li + 1, column });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.column)).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> CsgError {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn describe(&self) -> String {
        match self.peek().map(|s| &s.tok) {
            None => "end of input".into(),
            Some(Tok::Word(w)) => format!("`{w}`"),
            Some(Tok::Num(n)) => format!("number {n}"),
            Some(Tok::Open) => "`{`".into(),
            Some(Tok::Close) => "`}`".into(),
            Some(Tok::Semi) => "`;`".into(),
        }
    }

    fn word(&mut self, w: &str) -> Result<(), CsgError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Word(x), .. }) if x == w => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{w}`, found {}", self.describe()))),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Spanned { tok: Tok::Word(x), .. }) if x == w)
    }

    fn punct(&mut self, p: Tok, name: &str) -> Result<(), CsgError> {
        if self.peek().map(|s| &s.tok) == Some(&p) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{name}`, found {}", self.describe())))
        }
    }

    fn number(&mut self) -> Result<f64, CsgError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Num(v), .. }) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.err(format!("expected number, found {}", self.describe()))),
        }
    }

    fn positive(&mut self, what: &str) -> Result<f64, CsgError> {
        let (l, c) = self.here();
        let v = self.number()?;
        if v <= 0.0 {
            return Err(CsgError::Constraint {
                line: l,
                column: c,
                message: format!("{what} must be positive, got {v}"),
            });
        }
        Ok(v)
    }

    fn shape(&mut self) -> Result<Shape, CsgError> {
        if self.is_word("rect") {
            self.pos += 1;
            let width = self.positive("rect width")?;
            let height = self.positive("rect height")?;
            Ok(Shape::Rect { width, height })
        } else if self.is_word("circ") {
            self.pos += 1;
            Ok(Shape::Circ { radius: self.positive("circle radius")? })
        } else if self.is_word("poly") {
            self.pos += 1;
            let mut pts = Vec::new();
            while matches!(self.peek(), Some(Spanned { tok: Tok::Num(_), .. })) {
                let x = self.number()?;
                let y = self.number()?;
                pts.push([x, y]);
            }
            if pts.len() < 3 {
                return Err(self.err("poly needs at least 3 points"));
            }
            Ok(Shape::Poly(pts))
        } else {
            Err(self.err(format!("expected shape (rect, circ, poly), found {}", self.describe())))
        }
    }

    fn at(&mut self, required: bool) -> Result<[f64; 2], CsgError> {
        if self.is_word("at") {
            self.pos += 1;
            Ok([self.number()?, self.number()?])
        } else if required {
            Err(self.err(format!("expected `at`, found {}", self.describe())))
        } else {
            Ok([0.0, 0.0])
        }
    }
}

struct Located<T> {
    value: T,
    line: usize,
    column: usize,
}

/// Parses program text and checks every geometric constraint.
pub fn parse(text: &str) -> Result<CsgProgram, CsgError> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.len() + 1).unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: (last_line, last_col),
    };
    let mut parts = Vec::new();
    if p.peek().is_none() {
        return Err(p.err("empty program: expected `part`"));
    }
    while p.peek().is_some() {
        let (line, column) = p.here();
        p.word("part")?;
        p.word("z")?;
        let z0 = p.number()?;
        let z1 = p.number()?;
        p.punct(Tok::Open, "{")?;
        let (ol, oc) = p.here();
        let shape = p.shape()?;
        let at = p.at(false)?;
        let outer = Located { value: Placed { shape, at }, line: ol, column: oc };
        let mut holes = Vec::new();
        loop {
            if p.peek().map(|s| &s.tok) == Some(&Tok::Close) {
                p.pos += 1;
                break;
            }
            p.punct(Tok::Semi, ";")?;
            if p.peek().map(|s| &s.tok) == Some(&Tok::Close) {
                p.pos += 1;
                break;
            }
            let (hl, hc) = p.here();
            p.word("hole")?;
            let shape = p.shape()?;
            let at = p.at(true)?;
            holes.push(Located { value: Placed { shape, at }, line: hl, column: hc });
        }
        if !(z1 > z0) {
            return Err(CsgError::Constraint {
                line,
                column,
                message: format!("part needs z1 > z0, got {z0} .. {z1}"),
            });
        }
        check_profile(&outer, &holes)?;
        parts.push(Located {
            value: Part {
                outer: outer.value,
                holes: holes.into_iter().map(|h| h.value).collect(),
                z0,
                z1,
            },
            line,
            column,
        });
    }
    check_parts_disjoint(&parts)?;
    Ok(CsgProgram {
        parts: parts.into_iter().map(|p| p.value).collect(),
    })
}

fn constraint<T>(at: &Located<T>, message: String) -> CsgError {
    CsgError::Constraint {
        line: at.line,
        column: at.column,
        message,
    }
}

fn check_profile(outer: &Located<Placed>, holes: &[Located<Placed>]) -> Result<(), CsgError> {
    let outer_loop = polygon::simplify(&outer.value.shape.outline(outer.value.at));
    if !polygon::is_simple(&outer_loop) {
        return Err(constraint(outer, "outer profile is not a simple polygon".into()));
    }
    let mut loops: Vec<Vec<[f64; 2]>> = Vec::with_capacity(holes.len());
    for (i, hole) in holes.iter().enumerate() {
        let h = polygon::simplify(&hole.value.shape.outline(hole.value.at));
        if !polygon::is_simple(&h) {
            return Err(constraint(hole, format!("hole {} is not a simple polygon", i + 1)));
        }
        let inside = h.iter().all(|&v| polygon::contains(&outer_loop, v))
            && polygon::boundary_distance(&outer_loop, &h) > CLEARANCE;
        if !inside {
            return Err(constraint(
                hole,
                format!("hole {} is not strictly inside the outer profile", i + 1),
            ));
        }
        for (j, other) in loops.iter().enumerate() {
            let nested = polygon::contains(other, h[0]) || polygon::contains(&h, other[0]);
            if nested || polygon::boundary_distance(other, &h) <= CLEARANCE {
                return Err(constraint(
                    hole,
                    format!("hole {} overlaps hole {}", i + 1, j + 1),
                ));
            }
        }
        loops.push(h);
    }
    Ok(())
}

fn check_parts_disjoint(parts: &[Located<Part>]) -> Result<(), CsgError> {
    for (i, a) in parts.iter().enumerate() {
        let la = a.value.outer.shape.outline(a.value.outer.at);
        for (j, b) in parts.iter().enumerate().take(i) {
            let (pa, pb) = (&a.value, &b.value);
            let z_apart = pa.z0 > pb.z1 + CLEARANCE || pb.z0 > pa.z1 + CLEARANCE;
            if z_apart {
                continue;
            }
            let lb = pb.outer.shape.outline(pb.outer.at);
            let xy_apart = !polygon::contains(&la, lb[0])
                && !polygon::contains(&lb, la[0])
                && polygon::boundary_distance(&la, &lb) > CLEARANCE;
            if !xy_apart {
                return Err(constraint(
                    a,
                    format!("part {} overlaps part {}", i + 1, j + 1),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plate_with_two_holes() {
        let p = parse("part z 0 0.2 { rect 4 3; hole rect 0.5 0.5 at -1 0; hole rect 0.5 0.5 at 1 0 }")
            .unwrap();
        assert_eq!(p.parts.len(), 1);
        assert_eq!(p.parts[0].holes.len(), 2);
        assert_eq!(p.parts[0].z1, 0.2);
    }

    #[test]
    fn cuboid() {
        let p = parse("part z 0 1 { rect 1 1 }").unwrap();
        assert_eq!(p.parts[0].outer.shape, Shape::Rect { width: 1.0, height: 1.0 });
        assert!(p.parts[0].holes.is_empty());
    }

    #[test]
    fn hole_outside_outer_is_constraint_error() {
        let e = parse("part z 0 1 { rect 2 2; hole circ 0.2 at 5 0 }").unwrap_err();
        assert!(matches!(e, CsgError::Constraint { line: 1, .. }), "{e}");
    }

    #[test]
    fn overlapping_holes_rejected() {
        let e = parse("part z 0 1 { rect 4 4; hole circ 0.5 at 0 0; hole circ 0.5 at 0.6 0 }").unwrap_err();
        assert!(e.to_string().contains("overlaps"), "{e}");
    }

    #[test]
    fn overlapping_parts_rejected() {
        let e = parse("part z 0 1 { rect 1 1 }\npart z 0.5 2 { rect 1 1 at 0.5 0 }").unwrap_err();
        match e {
            CsgError::Constraint { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
        // Touching faces are not disjoint either.
        assert!(parse("part z 0 1 { rect 1 1 }\npart z 1 2 { rect 1 1 }").is_err());
        assert!(parse("part z 0 1 { rect 1 1 }\npart z 1.5 2 { rect 1 1 }").is_ok());
        assert!(parse("part z 0 1 { rect 1 1 }\npart z 0 1 { circ 0.4 at 3 0 }").is_ok());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("part z 0 1 {\n  rect 1 1;\n  hole tri 1 at 0 0\n}") {
            Err(CsgError::Syntax { line, column, .. }) => assert_eq!((line, column), (3, 8)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse(""), Err(CsgError::Syntax { .. })));
        assert!(matches!(parse("part z 0 1 { rect 1 1"), Err(CsgError::Syntax { .. })));
        assert!(matches!(parse("part z 0 1 { rect 1 x1 }"), Err(CsgError::Syntax { .. })));
    }

    #[test]
    fn comments_and_whitespace() {
        let p = parse("# header\npart z 0 1 {   # outer next\n poly 0 0 2 0 2 2 0 2 ;\n hole circ 0.3 at 1 1 ; }\n").unwrap();
        assert_eq!(p.hole_count(), 1);
    }

    #[test]
    fn bad_dimensions() {
        assert!(matches!(parse("part z 1 0 { rect 1 1 }"), Err(CsgError::Constraint { .. })));
        assert!(matches!(parse("part z 0 1 { rect 0 1 }"), Err(CsgError::Constraint { .. })));
        assert!(matches!(
            parse("part z 0 1 { poly 0 0 1 1 1 0 0 1 }"),
            Err(CsgError::Constraint { .. })
        ));
    }
}
