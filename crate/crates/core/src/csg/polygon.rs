//! Planar polygon helpers: orientation, containment, segment tests, and
//! ear-clipping triangulation of a polygon with holes.

pub type Point2 = [f64; 2];

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| cross(poly[i], poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

fn extent(poly: &[Point2]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1])
}

/// Drops repeated and exactly collinear vertices.
pub fn simplify(poly: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(poly.len());
    for &p in poly {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    let scale = extent(&out).max(f64::MIN_POSITIVE);
    let mut changed = true;
    while changed && out.len() > 3 {
        changed = false;
        let n = out.len();
        for i in 0..n {
            let (a, b, c) = (out[(i + n - 1) % n], out[i], out[(i + 1) % n]);
            let straight = orient(a, b, c).abs() <= 1e-14 * scale * scale
                && (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]) > 0.0;
            if straight {
                out.remove(i);
                changed = true;
                break;
            }
        }
    }
    out
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2
    } else {
        0.0
    }
    .clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection, touching included.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

pub fn segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn edges(poly: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (poly[i], poly[(i + 1) % n]))
}

/// Smallest distance between the boundaries of two loops.
pub fn boundary_distance(p: &[Point2], q: &[Point2]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, b) in edges(p) {
        for (c, d) in edges(q) {
            best = best.min(segment_distance(a, b, c, d));
        }
    }
    best
}

/// Even-odd containment; boundary points may go either way.
pub fn contains(poly: &[Point2], p: Point2) -> bool {
    let mut inside = false;
    for (a, b) in edges(poly) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// No two edges touch except consecutive ones at their shared vertex.
pub fn is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly).abs() <= 0.0 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in i + 1..n {
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Consecutive edges may only share their common vertex.
                let (shared, other_a, other_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if orient(other_a, shared, other_b) == 0.0
                    && (on_segment(other_a, shared, other_b) || on_segment(other_b, shared, other_a))
                {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Splices every hole into the outer loop through a bridge edge, producing
/// one weakly simple counter-clockwise loop.
fn bridge_holes(outer: &[Point2], holes: &[Vec<Point2>]) -> Result<Vec<Point2>, String> {
    let mut order: Vec<usize> = (0..holes.len()).collect();
    let rightmost = |h: &[Point2]| {
        (0..h.len())
            .max_by(|&i, &j| h[i][0].total_cmp(&h[j][0]).then(h[j][1].total_cmp(&h[i][1])))
            .unwrap()
    };
    order.sort_by(|&a, &b| {
        let (ha, hb) = (&holes[a], &holes[b]);
        hb[rightmost(hb)][0].total_cmp(&ha[rightmost(ha)][0]).then(a.cmp(&b))
    });

    let mut poly = outer.to_vec();
    let mut merged = vec![false; holes.len()];
    for &h in &order {
        let hole = &holes[h];
        let m = rightmost(hole);
        let mp = hole[m];
        let mut candidates: Vec<usize> = (0..poly.len()).collect();
        let dist2 = |p: Point2| (p[0] - mp[0]).powi(2) + (p[1] - mp[1]).powi(2);
        candidates.sort_by(|&a, &b| dist2(poly[a]).total_cmp(&dist2(poly[b])).then(a.cmp(&b)));

        let blocks = |a: Point2, b: Point2, v: Point2| {
            a != v && b != v && a != mp && b != mp && segments_intersect(mp, v, a, b)
        };
        let chosen = candidates.into_iter().find(|&vi| {
            let v = poly[vi];
            if v == mp {
                return false;
            }
            if edges(&poly).any(|(a, b)| blocks(a, b, v)) {
                return false;
            }
            for (k, other) in holes.iter().enumerate() {
                if k != h && !merged[k] && edges(other).any(|(a, b)| blocks(a, b, v)) {
                    return false;
                }
            }
            if edges(hole).any(|(a, b)| blocks(a, b, v)) {
                return false;
            }
            let mid = [(mp[0] + v[0]) / 2.0, (mp[1] + v[1]) / 2.0];
            contains(outer, mid) && holes.iter().all(|o| !contains(o, mid))
        });
        let Some(vi) = chosen else {
            return Err(format!("no bridge found for hole {h}"));
        };
        let mut next = Vec::with_capacity(poly.len() + hole.len() + 2);
        next.extend_from_slice(&poly[..=vi]);
        next.extend(hole[m..].iter().chain(&hole[..=m]).copied());
        next.extend_from_slice(&poly[vi..]);
        poly = next;
        merged[h] = true;
    }
    Ok(poly)
}

fn in_triangle(p: Point2, a: Point2, b: Point2, c: Point2, tol: f64) -> bool {
    orient(a, b, p) >= -tol && orient(b, c, p) >= -tol && orient(c, a, p) >= -tol
}

/// Triangulates a counter-clockwise outer loop with clockwise holes.
///
/// Returned triangles are counter-clockwise.
pub fn triangulate(outer: &[Point2], holes: &[Vec<Point2>]) -> Result<Vec<[Point2; 3]>, String> {
    let poly = bridge_holes(outer, holes)?;
    let scale = extent(outer).max(f64::MIN_POSITIVE);
    let area_eps = 1e-14 * scale * scale;
    let mut ring: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len());
    let mut cur = 0;
    let mut stalled = 0;
    while ring.len() > 3 {
        let n = ring.len();
        let (ip, ic, inx) = (ring[(cur + n - 1) % n], ring[cur % n], ring[(cur + 1) % n]);
        let (a, b, c) = (poly[ip], poly[ic], poly[inx]);
        let convex = orient(a, b, c) > area_eps;
        let is_ear = convex
            && !ring.iter().any(|&r| {
                let p = poly[r];
                r != ip && r != ic && r != inx && p != a && p != b && p != c
                    && in_triangle(p, a, b, c, area_eps)
            });
        if is_ear {
            tris.push([a, b, c]);
            ring.remove(cur % n);
            if cur >= ring.len() {
                cur = 0;
            }
            stalled = 0;
        } else {
            cur = (cur + 1) % n;
            stalled += 1;
            if stalled > n {
                return Err(format!("no ear among {n} remaining vertices"));
            }
        }
    }
    let (a, b, c) = (poly[ring[0]], poly[ring[1]], poly[ring[2]]);
    if orient(a, b, c) > area_eps {
        tris.push([a, b, c]);
    } else {
        return Err("final triangle is degenerate".into());
    }
    Ok(tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cx: f64, cy: f64, half: f64) -> Vec<Point2> {
        vec![
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
        ]
    }

    fn area_of(tris: &[[Point2; 3]]) -> f64 {
        tris.iter().map(|t| signed_area(t)).sum()
    }

    #[test]
    fn square_triangulates_to_two() {
        let tris = triangulate(&square(0.0, 0.0, 1.0), &[]).unwrap();
        assert_eq!(tris.len(), 2);
        assert!((area_of(&tris) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn holes_preserve_area() {
        let mut h1 = square(-1.0, 0.0, 0.3);
        let mut h2 = square(1.0, 0.2, 0.4);
        h1.reverse();
        h2.reverse();
        let outer = square(0.0, 0.0, 2.0);
        let tris = triangulate(&outer, &[h1, h2]).unwrap();
        let expected = 16.0 - 0.36 - 0.64;
        assert!((area_of(&tris) - expected).abs() < 1e-9);
        assert!(tris.iter().all(|t| signed_area(t) > 0.0));
        // n + 2h − 2 triangles for n loop vertices and h holes.
        assert_eq!(tris.len(), 12 + 2 * 2 - 2);
    }

    #[test]
    fn simple_polygon_checks() {
        assert!(is_simple(&square(0.0, 0.0, 1.0)));
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!is_simple(&bow));
        assert_eq!(simplify(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0]]).len(), 3);
    }

    #[test]
    fn containment_and_distance() {
        let s = square(0.0, 0.0, 1.0);
        assert!(contains(&s, [0.5, 0.5]));
        assert!(!contains(&s, [1.5, 0.0]));
        assert!((boundary_distance(&s, &square(0.0, 0.0, 0.5)) - 0.5).abs() < 1e-12);
    }
}
