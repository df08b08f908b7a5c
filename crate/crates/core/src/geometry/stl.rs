//! STL reading (binary and ASCII) and binary writing.
//!
//! Facet normals stored in files are ignored; orientation comes from vertex
//! winding. Loaded triangles are welded on the way in.

use super::{GeometryError, TriMesh, Vec3};

const HEADER_LEN: usize = 80;
const FACET_LEN: usize = 50;

fn malformed(offset: usize, reason: impl Into<String>) -> GeometryError {
    GeometryError::MalformedStl {
        offset,
        reason: reason.into(),
    }
}

/// Parses an STL file and welds its triangles.
pub fn load_stl(bytes: &[u8]) -> Result<TriMesh, GeometryError> {
    if looks_binary(bytes) {
        return parse_binary(bytes).map(|t| TriMesh::weld(&t));
    }
    let trimmed = skip_ws(bytes, 0);
    if bytes[trimmed..].starts_with(b"solid") {
        return parse_ascii(bytes).map(|t| TriMesh::weld(&t));
    }
    parse_binary(bytes).map(|t| TriMesh::weld(&t))
}

fn looks_binary(bytes: &[u8]) -> bool {
    if bytes.len() < HEADER_LEN + 4 {
        return false;
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    count
        .checked_mul(FACET_LEN)
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        == Some(bytes.len())
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>, GeometryError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(malformed(
            bytes.len(),
            format!("binary header needs 84 bytes, found {}", bytes.len()),
        ));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 24));
    for i in 0..count {
        let start = HEADER_LEN + 4 + i * FACET_LEN;
        if start + FACET_LEN > bytes.len() {
            return Err(malformed(
                bytes.len(),
                format!("truncated: facet {i} of {count} incomplete"),
            ));
        }
        let f = |k: usize| {
            let o = start + 12 + 4 * k;
            f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64
        };
        let tri = [
            Vec3::new(f(0), f(1), f(2)),
            Vec3::new(f(3), f(4), f(5)),
            Vec3::new(f(6), f(7), f(8)),
        ];
        if tri.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(malformed(start + 12, "non-finite coordinate"));
        }
        out.push(tri);
    }
    Ok(out)
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let start = skip_ws(self.bytes, self.pos);
        if start >= self.bytes.len() {
            self.pos = start;
            return None;
        }
        let mut end = start;
        while end < self.bytes.len() && !self.bytes[end].is_ascii_whitespace() {
            end += 1;
        }
        self.pos = end;
        // Non-UTF-8 tokens surface as a keyword mismatch.
        Some((start, std::str::from_utf8(&self.bytes[start..end]).unwrap_or("\u{fffd}")))
    }

    fn rest_of_line(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            self.pos += 1;
        }
    }

    fn expect(&mut self, word: &str) -> Result<(), GeometryError> {
        match self.next() {
            Some((_, t)) if t == word => Ok(()),
            Some((o, t)) => Err(malformed(o, format!("expected `{word}`, found `{t}`"))),
            None => Err(malformed(self.bytes.len(), format!("expected `{word}`, found end of file"))),
        }
    }

    fn number(&mut self) -> Result<f64, GeometryError> {
        match self.next() {
            Some((o, t)) => match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(o, format!("non-numeric token `{t}`"))),
            },
            None => Err(malformed(self.bytes.len(), "expected number, found end of file")),
        }
    }
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>, GeometryError> {
    let mut tok = Tokens { bytes, pos: 0 };
    tok.expect("solid")?;
    tok.rest_of_line();
    let mut out = Vec::new();
    loop {
        match tok.next() {
            Some((_, "facet")) => {}
            Some((_, "endsolid")) => break,
            Some((o, t)) => return Err(malformed(o, format!("expected `facet`, found `{t}`"))),
            None => return Err(malformed(bytes.len(), "missing `endsolid`")),
        }
        tok.expect("normal")?;
        for _ in 0..3 {
            tok.number()?;
        }
        tok.expect("outer")?;
        tok.expect("loop")?;
        let mut tri = [Vec3::zeros(); 3];
        for corner in &mut tri {
            tok.expect("vertex")?;
            *corner = Vec3::new(tok.number()?, tok.number()?, tok.number()?);
        }
        tok.expect("endloop")?;
        tok.expect("endfacet")?;
        out.push(tri);
    }
    Ok(out)
}

/// Serializes `mesh` as binary STL with winding-derived normals.
pub fn write_stl(mesh: &TriMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + FACET_LEN * mesh.faces().len());
    let mut header = [b' '; HEADER_LEN];
    let tag = b"binary STL written by evocad";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.faces().len() as u32).to_le_bytes());
    for i in 0..mesh.faces().len() {
        let n = mesh.face_normal(i);
        for c in n.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for p in mesh.triangle(i) {
            for c in p.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::tests::{cube_soup, unit_cube};

    fn binary_from_soup(soup: &[[Vec3; 3]]) -> Vec<u8> {
        let mut out = vec![0u8; HEADER_LEN];
        out.extend_from_slice(&(soup.len() as u32).to_le_bytes());
        for tri in soup {
            out.extend_from_slice(&[0u8; 12]);
            for p in tri {
                for c in p.iter() {
                    out.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&[0u8; 2]);
        }
        out
    }

    #[test]
    fn single_facet_binary() {
        let tri = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        let m = load_stl(&binary_from_soup(&[tri])).unwrap();
        assert_eq!(m.vertices().len(), 3);
        assert_eq!(m.faces().len(), 1);
    }

    #[test]
    fn duplicated_cube_facets_weld() {
        let bytes = binary_from_soup(&cube_soup(Vec3::zeros(), Vec3::repeat(1.0)));
        let m = load_stl(&bytes).unwrap();
        assert_eq!((m.vertices().len(), m.faces().len()), (8, 12));
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn truncated_binary_is_malformed() {
        let tri = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        let mut bytes = binary_from_soup(&[tri, tri]);
        bytes.truncate(50);
        assert!(matches!(load_stl(&bytes), Err(GeometryError::MalformedStl { .. })));
        // Header intact, facets cut short.
        let mut bytes = binary_from_soup(&[tri, tri]);
        bytes.truncate(84 + 60);
        match load_stl(&bytes) {
            Err(GeometryError::MalformedStl { offset, .. }) => assert_eq!(offset, 144),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ascii_cube() {
        let mut text = String::from("solid cube exported\n");
        for tri in cube_soup(Vec3::zeros(), Vec3::repeat(1.0)) {
            text.push_str("  facet normal 0 0 0\n    outer loop\n");
            for p in tri {
                text.push_str(&format!("      vertex {:e} {} {}\n", p.x, p.y, p.z));
            }
            text.push_str("    endloop\n  endfacet\n");
        }
        text.push_str("endsolid cube\n");
        let m = load_stl(text.as_bytes()).unwrap();
        assert_eq!(m, unit_cube());
    }

    #[test]
    fn ascii_bad_number_reports_offset() {
        let text = "solid x\nfacet normal 0 0 0\nouter loop\nvertex 0 0 zero\n";
        match load_stl(text.as_bytes()) {
            Err(GeometryError::MalformedStl { offset, reason }) => {
                assert_eq!(&text[offset..offset + 4], "zero");
                assert!(reason.contains("non-numeric"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_header_starting_with_solid() {
        let tri = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        let mut bytes = binary_from_soup(&[tri]);
        bytes[..5].copy_from_slice(b"solid");
        assert_eq!(load_stl(&bytes).unwrap().faces().len(), 1);
    }

    #[test]
    fn write_then_load_roundtrip() {
        let m = crate::geometry::mesh::tests::cube(Vec3::new(-0.25, 1.5, 2.0), Vec3::new(0.75, 2.0, 2.125));
        let back = load_stl(&write_stl(&m)).unwrap();
        assert_eq!(back, m);
    }
}
