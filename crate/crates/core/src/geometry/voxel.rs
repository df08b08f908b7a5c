use super::{Aabb, GeometryError, TriMesh, Vec3};

/// Dense boolean occupancy over a regular grid of cubic cells.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.cell_size.powi(3)
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }
}

/// Rays closer than this to a projected edge or vertex are re-cast.
const GRAZE_TOL: f64 = 1e-9;
const MAX_JITTER_ATTEMPTS: u32 = 8;

/// Grid geometry shared by any voxelization over `bounds` at `resolution`
/// cells along its longest axis.
pub(crate) fn grid_layout(bounds: &Aabb, resolution: usize) -> (f64, [usize; 3]) {
    let cell = bounds.max_extent() / resolution as f64;
    let ext = bounds.extent();
    let dim = |e: f64| ((e / cell) - 1e-9).ceil().max(1.0) as usize;
    (cell, [dim(ext.x), dim(ext.y), dim(ext.z)])
}

struct Projected {
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    z: [f64; 3],
    area2: f64,
    len: [f64; 3],
}

enum Hit {
    Miss,
    Cross(f64),
    Graze,
}

impl Projected {
    fn new(tri: &[Vec3; 3]) -> Option<Self> {
        let a = [tri[0].x, tri[0].y];
        let b = [tri[1].x, tri[1].y];
        let c = [tri[2].x, tri[2].y];
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let span = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]).hypot(q[1] - p[1]);
        let len = [span(b, c), span(c, a), span(a, b)];
        // Walls parallel to the ray never produce a crossing.
        if area2.abs() <= 1e-18 * (len[0] * len[1]).max(1e-300) {
            return None;
        }
        Some(Self {
            a,
            b,
            c,
            z: [tri[0].z, tri[1].z, tri[2].z],
            area2,
            len,
        })
    }

    fn test(&self, x: f64, y: f64) -> Hit {
        let edge = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]);
        // w0 weighs vertex a (opposite edge bc), and so on.
        let w = [edge(self.b, self.c), edge(self.c, self.a), edge(self.a, self.b)];
        let sign = self.area2.signum();
        let mut near = false;
        for k in 0..3 {
            let d = w[k] * sign / self.len[k];
            if d < -GRAZE_TOL {
                return Hit::Miss;
            }
            if d.abs() <= GRAZE_TOL {
                near = true;
            }
        }
        if near {
            return Hit::Graze;
        }
        let z = (w[0] * self.z[0] + w[1] * self.z[1] + w[2] * self.z[2]) / self.area2;
        Hit::Cross(z)
    }
}

/// Deterministic offset in `[-1, 1]²` for a column and attempt number.
fn jitter(i: usize, j: usize, attempt: u32) -> (f64, f64) {
    let mut h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (attempt as u64 + 1).wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 29;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 32;
    let u = (h & 0xFFFF_FFFF) as f64 / u32::MAX as f64;
    let v = (h >> 32) as f64 / u32::MAX as f64;
    (2.0 * u - 1.0, 2.0 * v - 1.0)
}

/// Marks every cell whose center lies inside the closed surface `mesh`.
///
/// Inside-ness is the parity of surface crossings along a +z ray from each
/// cell center. A column whose ray passes within `1e-9` of a projected edge
/// or vertex is re-cast with a small deterministic xy offset.
pub fn voxelize(mesh: &TriMesh, bounds: &Aabb, resolution: usize) -> Result<VoxelGrid, GeometryError> {
    if resolution < 2 {
        return Err(GeometryError::InvalidArgument("resolution must be ≥ 2".into()));
    }
    if !mesh.is_watertight() {
        return Err(GeometryError::NotWatertight);
    }
    if !(bounds.max_extent() > 0.0) {
        return Err(GeometryError::DegenerateMesh("voxel bounds have zero extent".into()));
    }
    let (cell, dims) = grid_layout(bounds, resolution);
    let [nx, ny, nz] = dims;
    let origin = bounds.min;

    // Bucket projected triangles by the columns their xy footprint touches.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
    let mut projected = Vec::with_capacity(mesh.faces().len());
    for tri in mesh.triangles() {
        let Some(p) = Projected::new(&tri) else {
            continue;
        };
        let id = projected.len() as u32;
        let lo_x = p.a[0].min(p.b[0]).min(p.c[0]);
        let hi_x = p.a[0].max(p.b[0]).max(p.c[0]);
        let lo_y = p.a[1].min(p.b[1]).min(p.c[1]);
        let hi_y = p.a[1].max(p.b[1]).max(p.c[1]);
        let col = |v: f64, o: f64, n: usize| -> (usize, usize) {
            let t = (v - o) / cell - 0.5;
            (t.floor().max(0.0) as usize, (t.ceil() + 1.0).clamp(0.0, n as f64 - 1.0) as usize)
        };
        let (i0, _) = col(lo_x, origin.x, nx);
        let (_, i1) = col(hi_x, origin.x, nx);
        let (j0, _) = col(lo_y, origin.y, ny);
        let (_, j1) = col(hi_y, origin.y, ny);
        for j in j0.saturating_sub(1)..=j1.min(ny - 1) {
            for i in i0.saturating_sub(1)..=i1.min(nx - 1) {
                buckets[i + nx * j].push(id);
            }
        }
        projected.push(p);
    }

    let mut occupancy = vec![false; nx * ny * nz];
    let mut crossings = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let cx = origin.x + (i as f64 + 0.5) * cell;
            let cy = origin.y + (j as f64 + 0.5) * cell;
            let candidates = &buckets[i + nx * j];
            if candidates.is_empty() {
                continue;
            }
            let mut attempt = 0;
            let (mut x, mut y) = (cx, cy);
            loop {
                crossings.clear();
                let mut grazed = false;
                for &t in candidates {
                    match projected[t as usize].test(x, y) {
                        Hit::Miss => {}
                        Hit::Cross(z) => crossings.push(z),
                        Hit::Graze => {
                            grazed = true;
                            break;
                        }
                    }
                }
                if !grazed || attempt >= MAX_JITTER_ATTEMPTS {
                    break;
                }
                let (dx, dy) = jitter(i, j, attempt);
                x = cx + dx * cell * 1e-3;
                y = cy + dy * cell * 1e-3;
                attempt += 1;
            }
            if crossings.is_empty() {
                continue;
            }
            crossings.sort_by(f64::total_cmp);
            let mut below = 0;
            for k in 0..nz {
                let cz = origin.z + (k as f64 + 0.5) * cell;
                while below < crossings.len() && crossings[below] < cz {
                    below += 1;
                }
                if below % 2 == 1 {
                    occupancy[i + nx * (j + ny * k)] = true;
                }
            }
        }
    }
    Ok(VoxelGrid {
        origin,
        cell_size: cell,
        dims,
        occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::tests::{cube, unit_cube};

    #[test]
    fn cube_over_own_bounds_is_full() {
        let m = unit_cube();
        let g = voxelize(&m, &m.aabb().unwrap(), 8).unwrap();
        assert_eq!(g.dims, [8, 8, 8]);
        assert_eq!(g.occupied_count(), 512);
    }

    #[test]
    fn cube_in_double_bounds_fills_an_eighth() {
        let m = unit_cube();
        let bounds = Aabb::new(Vec3::zeros(), Vec3::repeat(2.0));
        let g = voxelize(&m, &bounds, 16).unwrap();
        let frac = g.occupied_count() as f64 / g.len() as f64;
        assert!((frac - 0.125).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mut soup = crate::geometry::mesh::tests::cube_soup(Vec3::zeros(), Vec3::repeat(1.0));
        soup.pop();
        let m = TriMesh::weld(&soup);
        assert_eq!(
            voxelize(&m, &m.aabb().unwrap(), 8),
            Err(GeometryError::NotWatertight)
        );
    }

    #[test]
    fn grazing_columns_are_recast() {
        // Cell centers land exactly on the cap diagonal x = y.
        let m = cube(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        let bounds = Aabb::new(Vec3::new(-2.0, -2.0, -2.0), Vec3::new(2.0, 2.0, 2.0));
        let g = voxelize(&m, &bounds, 4).unwrap();
        assert_eq!(g.occupied_count(), 8);
    }

    #[test]
    fn box_volume_converges() {
        // Over its own bounds each short axis is off by at most half a cell,
        // so aspect ratios ≤ 3 keep the error within 3/resolution.
        for dims in [Vec3::new(1.3, 0.7, 0.45), Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.4, 1.1, 0.9)] {
            let m = cube(Vec3::new(-0.3, 0.1, 2.0), Vec3::new(-0.3, 0.1, 2.0) + dims);
            let bounds = m.aabb().unwrap();
            for res in [8usize, 16, 32, 64] {
                let g = voxelize(&m, &bounds, res).unwrap();
                let exact = dims.x * dims.y * dims.z;
                let rel = (g.occupied_volume() - exact).abs() / exact;
                assert!(rel <= 3.0 / res as f64, "{dims:?} res {res}: rel {rel}");
            }
        }
    }
}
