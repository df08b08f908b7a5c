//! Software multiview renderer: four orthographic, flat-shaded, z-buffered
//! views of a mesh tiled 2×2 (isometric, front, top, right).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::Matrix3;

use crate::geometry::{GeometryError, TriMesh, Vec3};

pub const MIN_SIZE: usize = 64;
const BACKGROUND: [u8; 3] = [255, 255, 255];
const BASE_COLOR: [f64; 3] = [150.0, 175.0, 215.0];
// Fraction of a quadrant's half-width used per unit of normalized extent.
const VIEW_FILL: f64 = 0.55;
// Framed coordinates are snapped to this grid so that translated copies
// of a mesh rasterize identically.
const SNAP: f64 = (1u64 << 30) as f64;

/// 8-bit RGB raster, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
    /// Source text of whatever was rendered, when known.
    pub provenance: Option<String>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let mut rgb = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            rgb.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            rgb,
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, source: impl Into<String>) -> Self {
        self.provenance = Some(source.into());
        self
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.rgb[i..i + 3].copy_from_slice(&c);
    }

    pub fn encode_png(&self) -> io::Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_png_to(&mut out)?;
        Ok(out)
    }

    fn write_png_to<W: Write>(&self, w: W) -> io::Result<()> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(io::Error::other)?;
        writer.write_image_data(&self.rgb).map_err(io::Error::other)?;
        writer.finish().map_err(io::Error::other)
    }
}

pub fn write_png(img: &Image, path: &Path) -> io::Result<()> {
    let file = File::create(path)?;
    img.write_png_to(BufWriter::new(file))
}

/// Camera basis as rows: screen right, screen up, toward the viewer.
fn view_basis(view: usize) -> Matrix3<f64> {
    let rows = match view {
        0 => {
            let toward = Vec3::new(1.0, -1.0, 1.0).normalize();
            let right = Vec3::new(1.0, 1.0, 0.0).normalize();
            [right, toward.cross(&right), toward]
        }
        1 => [Vec3::x(), Vec3::z(), -Vec3::y()],
        2 => [Vec3::x(), Vec3::y(), Vec3::z()],
        _ => [Vec3::y(), Vec3::z(), Vec3::x()],
    };
    Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()])
}

fn snap(v: Vec3) -> Vec3 {
    v.map(|c| (c * SNAP).round() / SNAP)
}

/// Renders `mesh` from four fixed directions into a `size`×`size` image.
///
/// The mesh is framed by its bounding box, so the output does not depend on
/// where the mesh sits or how large it is.
pub fn render_multiview(mesh: &TriMesh, size: usize) -> Result<Image, GeometryError> {
    if size < MIN_SIZE {
        return Err(GeometryError::InvalidArgument(format!("render size must be ≥ {MIN_SIZE}")));
    }
    let aabb = mesh
        .aabb()
        .filter(|b| b.max_extent() > 0.0)
        .ok_or_else(|| GeometryError::DegenerateMesh("nothing to render".into()))?;
    if !(mesh.surface_area() > 0.0) {
        return Err(GeometryError::DegenerateMesh("mesh has zero area".into()));
    }
    let center = aabb.center();
    let scale = 1.0 / aabb.max_extent();
    let framed: Vec<Vec3> = mesh.vertices().iter().map(|p| snap((p - center) * scale)).collect();
    let light = Vec3::new(0.35, -0.55, 0.75).normalize();
    let shades: Vec<[u8; 3]> = mesh
        .faces()
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| framed[i as usize]);
            let n = (b - a).cross(&(c - a));
            let lambert = if n.norm() > 0.0 { n.normalize().dot(&light).abs() } else { 0.0 };
            let k = 0.3 + 0.7 * lambert;
            BASE_COLOR.map(|ch| (ch * k).round() as u8)
        })
        .collect();

    let mut img = Image::filled(size, size, BACKGROUND);
    let q = size / 2;
    for view in 0..4 {
        let basis = view_basis(view);
        let (ox, oy) = ((view % 2) * q, (view / 2) * q);
        let half = q as f64 / 2.0;
        let px: Vec<Vec3> = framed
            .iter()
            .map(|p| {
                let v = basis * p;
                Vec3::new(half + v.x * q as f64 * VIEW_FILL, half - v.y * q as f64 * VIEW_FILL, v.z)
            })
            .collect();
        let mut depth = vec![f64::NEG_INFINITY; q * q];
        for (fi, f) in mesh.faces().iter().enumerate() {
            rasterize(f.map(|i| px[i as usize]), q, &mut depth, |x, y| {
                img.set_pixel(ox + x, oy + y, shades[fi]);
            });
        }
    }
    Ok(img)
}

/// Calls `plot` for each pixel of a `q`×`q` tile whose center falls inside
/// the triangle and which is nearer than anything drawn there before.
fn rasterize(t: [Vec3; 3], q: usize, depth: &mut [f64], mut plot: impl FnMut(usize, usize)) {
    let area = (t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[1].y - t[0].y) * (t[2].x - t[0].x);
    if area == 0.0 {
        return;
    }
    let lo_x = t.iter().map(|v| v.x).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let hi_x = t.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max).ceil().min(q as f64) as usize;
    let lo_y = t.iter().map(|v| v.y).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let hi_y = t.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max).ceil().min(q as f64) as usize;
    let edge = |a: Vec3, b: Vec3, x: f64, y: f64| (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let w0 = edge(t[1], t[2], cx, cy) / area;
            let w1 = edge(t[2], t[0], cx, cy) / area;
            let w2 = edge(t[0], t[1], cx, cy) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let z = w0 * t[0].z + w1 * t[1].z + w2 * t[2].z;
            let d = &mut depth[y * q + x];
            if z > *d {
                *d = z;
                plot(x, y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::tests::{cube, cube_soup, unit_cube};

    fn quadrant_coverage(img: &Image, quadrant: usize) -> f64 {
        let q = img.width / 2;
        let (ox, oy) = ((quadrant % 2) * q, (quadrant / 2) * q);
        let mut hit = 0;
        for y in 0..q {
            for x in 0..q {
                hit += (img.pixel(ox + x, oy + y) != BACKGROUND) as usize;
            }
        }
        hit as f64 / (q * q) as f64
    }

    #[test]
    fn cube_fills_every_quadrant() {
        let img = render_multiview(&unit_cube(), 256).unwrap();
        assert_eq!(img.rgb.len(), 3 * 256 * 256);
        for quadrant in 0..4 {
            assert!(quadrant_coverage(&img, quadrant) > 0.05, "quadrant {quadrant}");
        }
    }

    #[test]
    fn deterministic_and_placement_free() {
        let m = cube(Vec3::new(-0.2, 0.1, 0.0), Vec3::new(0.9, 0.6, 0.4));
        let a = render_multiview(&m, 128).unwrap();
        assert_eq!(a, render_multiview(&m, 128).unwrap());
        let moved = m.map_vertices(|p| p + Vec3::new(3.7, -12.3, 0.45));
        assert_eq!(a, render_multiview(&moved, 128).unwrap());
    }

    #[test]
    fn hidden_faces_do_not_show() {
        let outer = cube(Vec3::repeat(-1.0), Vec3::repeat(1.0));
        let mut soup = cube_soup(Vec3::repeat(-1.0), Vec3::repeat(1.0));
        soup.extend(cube_soup(Vec3::repeat(-0.3), Vec3::new(0.2, 0.4, 0.1)));
        let nested = TriMesh::weld(&soup);
        assert_eq!(render_multiview(&outer, 96).unwrap(), render_multiview(&nested, 96).unwrap());
    }

    #[test]
    fn rejects_small_and_empty() {
        assert!(matches!(
            render_multiview(&unit_cube(), 32),
            Err(GeometryError::InvalidArgument(_))
        ));
        assert!(matches!(
            render_multiview(&TriMesh::empty(), 64),
            Err(GeometryError::DegenerateMesh(_))
        ));
    }

    fn decode(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
        let mut reader = png::Decoder::new(io::Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        assert_eq!(info.color_type, png::ColorType::Rgb);
        (info.width, info.height, buf)
    }

    #[test]
    fn png_round_trip() {
        let red = Image::filled(1, 1, [255, 0, 0]);
        assert_eq!(decode(&red.encode_png().unwrap()), (1, 1, vec![255, 0, 0]));

        let img = render_multiview(&unit_cube(), 64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("views.png");
        write_png(&img, &path).unwrap();
        let (w, h, rgb) = decode(&std::fs::read(&path).unwrap());
        assert_eq!((w, h), (64, 64));
        assert_eq!(rgb, img.rgb);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("x.png");
        assert!(write_png(&Image::filled(2, 2, BACKGROUND), &path).is_err());
    }
}
