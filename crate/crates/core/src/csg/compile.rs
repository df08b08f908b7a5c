use crate::geometry::{TriMesh, Vec3};

use super::ast::{CsgProgram, Part};
use super::polygon::{self, Point2};
use super::CsgError;

fn extrude(part: &Part, soup: &mut Vec<[Vec3; 3]>) -> Result<(), CsgError> {
    let profile = part.profile();
    let cap = polygon::triangulate(&profile.outer, &profile.holes).map_err(CsgError::Triangulation)?;
    let at = |p: Point2, z: f64| Vec3::new(p[0], p[1], z);
    for [a, b, c] in &cap {
        soup.push([at(*a, part.z1), at(*b, part.z1), at(*c, part.z1)]);
        soup.push([at(*a, part.z0), at(*c, part.z0), at(*b, part.z0)]);
    }
    // Walls: the loop winding (ccw outer, cw holes) makes these face out of the solid.
    for ring in std::iter::once(&profile.outer).chain(&profile.holes) {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let (a0, b0, a1, b1) = (at(a, part.z0), at(b, part.z0), at(a, part.z1), at(b, part.z1));
            soup.push([a0, b0, b1]);
            soup.push([a0, b1, a1]);
        }
    }
    Ok(())
}

/// Meshes every part as a closed extrusion and welds them into one mesh.
pub fn compile(program: &CsgProgram) -> Result<TriMesh, CsgError> {
    let mut soup = Vec::new();
    for part in &program.parts {
        extrude(part, &mut soup)?;
    }
    let mesh = TriMesh::weld(&soup);
    if !mesh.is_watertight() || mesh.dropped_faces() > 0 {
        return Err(CsgError::Triangulation(
            "profile is too small or thin to mesh as a closed solid".into(),
        ));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::{expected_chi, parse};

    fn chi(src: &str) -> (i64, i64) {
        let prog = parse(src).unwrap();
        let mesh = compile(&prog).unwrap();
        assert!(mesh.is_watertight());
        (mesh.euler_characteristic(), expected_chi(&prog))
    }

    #[test]
    fn cuboid_has_chi_two() {
        let prog = parse("part z 0 1 { rect 1 1 }").unwrap();
        let mesh = compile(&prog).unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        assert!((mesh.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holes_lower_chi_by_two() {
        assert_eq!(chi("part z 0 0.2 { rect 4 3; hole circ 0.3 at 0 0 }"), (0, 0));
        assert_eq!(
            chi("part z 0 0.2 { rect 4 3; hole rect 0.5 0.5 at -1 0; hole rect 0.5 0.5 at 1 0 }"),
            (-2, -2)
        );
        assert_eq!(
            chi("part z 0 0.3 { rect 4 4; hole circ 0.9 at 0 0; hole circ 0.25 at -1.5 0; hole circ 0.25 at 1.5 0 }"),
            (-4, -4)
        );
    }

    #[test]
    fn stacked_parts_add() {
        assert_eq!(chi("part z 0 1 { rect 1 1 }\npart z 2 3 { rect 1 1 }"), (4, 4));
        assert_eq!(
            chi("part z 0 1 { rect 3 3; hole circ 0.5 at 0 0 }\npart z 2 3 { circ 2; hole rect 0.5 0.5 at 0 0 }"),
            (0, 0)
        );
    }

    #[test]
    fn volume_matches_profile_area() {
        let prog = parse("part z -0.5 1.5 { rect 4 3; hole rect 1 1 at 1 0.5 }").unwrap();
        let mesh = compile(&prog).unwrap();
        assert!((mesh.signed_volume() - 2.0 * (12.0 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn concave_poly_outer() {
        // An L-shaped outline with a hole in its long leg.
        let src = "part z 0 1 { poly 0 0 4 0 4 1 1 1 1 3 0 3; hole rect 0.4 0.4 at 3 0.5 }";
        assert_eq!(chi(src), (0, 0));
    }

    fn plate_source(parts: &[(f64, f64, f64, Vec<(u8, f64)>)]) -> String {
        let mut out = Vec::new();
        for (i, (w, h, t, holes)) in parts.iter().enumerate() {
            let z0 = 2.0 * i as f64;
            let mut s = format!("part z {z0} {} {{ rect {w} {h}", z0 + t);
            let pitch = w / (holes.len() + 1) as f64;
            for (k, (kind, size)) in holes.iter().enumerate() {
                let r = size * 0.3 * pitch.min(*h);
                let x = -w / 2.0 + pitch * (k + 1) as f64;
                let shape = match kind % 3 {
                    0 => format!("circ {r}"),
                    1 => format!("rect {r} {}", r * 1.5),
                    _ => format!("poly {} {} {r} {} 0 {r}", -r, -r, -r),
                };
                s.push_str(&format!("; hole {shape} at {x} 0"));
            }
            out.push(s + " }");
        }
        out.join("\n")
    }

    proptest::proptest! {
        #[test]
        fn printed_programs_round_trip_and_match_chi(
            parts in proptest::collection::vec(
                (1.0f64..6.0, 1.0f64..4.0, 0.1f64..1.5, proptest::collection::vec((0u8..3, 0.2f64..1.0), 0..5)),
                1..4,
            )
        ) {
            let prog = parse(&plate_source(&parts)).unwrap();
            proptest::prop_assert_eq!(parse(&prog.to_string()).unwrap(), prog.clone());
            let mesh = compile(&prog).unwrap();
            proptest::prop_assert!(mesh.is_watertight());
            proptest::prop_assert_eq!(mesh.euler_characteristic(), expected_chi(&prog));
        }
    }
}
