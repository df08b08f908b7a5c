use std::collections::HashMap;

use nalgebra::Matrix3;

use super::{GeometryError, Vec3};

/// Absolute quantization step used as the vertex weld key.
pub const WELD_GRID: f64 = 1e-7;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn max_extent(&self) -> f64 {
        self.extent().max()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Grows every side by `fraction` of the largest extent.
    pub fn padded(&self, fraction: f64) -> Aabb {
        let pad = self.max_extent() * fraction;
        let d = Vec3::repeat(pad);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }
}

/// Proper rigid motion `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix();
        Self {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        let rtr = self.rotation.transpose() * self.rotation;
        (rtr - Matrix3::identity()).abs().max() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// Largest entry-wise distance to the identity transform.
    pub fn distance_from_identity(&self) -> f64 {
        (self.rotation - Matrix3::identity())
            .abs()
            .max()
            .max(self.translation.abs().max())
    }
}

/// Similarity applied by [`TriMesh::normalize`]: `x ↦ scale·(x + translation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl NormalizeTransform {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p + self.translation) * self.scale
    }
}

/// Welded, indexed triangle mesh.
///
/// Faces reference vertices by index; every face has three distinct indices.
/// Edge incidence is always derived from `faces`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    dropped_faces: usize,
}

fn weld_key(p: &Vec3) -> [i64; 3] {
    [
        (p.x / WELD_GRID).round() as i64,
        (p.y / WELD_GRID).round() as i64,
        (p.z / WELD_GRID).round() as i64,
    ]
}

impl TriMesh {
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            dropped_faces: 0,
        }
    }

    /// Welds a triangle soup.
    ///
    /// Corners that share a quantized key become one vertex (the first
    /// occurrence keeps its exact coordinates). Faces whose corners collapse
    /// are dropped and counted in [`TriMesh::dropped_faces`].
    pub fn weld(raw_triangles: &[[Vec3; 3]]) -> Self {
        let mut index: HashMap<[i64; 3], u32> = HashMap::with_capacity(raw_triangles.len() * 2);
        let mut vertices = Vec::new();
        let mut faces = Vec::with_capacity(raw_triangles.len());
        let mut dropped = 0;
        for tri in raw_triangles {
            let mut ids = [0u32; 3];
            for (slot, p) in ids.iter_mut().zip(tri) {
                *slot = *index.entry(weld_key(p)).or_insert_with(|| {
                    vertices.push(*p);
                    (vertices.len() - 1) as u32
                });
            }
            if ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2] {
                dropped += 1;
            } else {
                faces.push(ids);
            }
        }
        // Vertices referenced only by dropped faces are discarded by a second pass.
        let mut mesh = Self {
            vertices,
            faces,
            dropped_faces: dropped,
        };
        mesh.compact();
        mesh
    }

    /// Builds a mesh from explicit indexed data and re-welds it.
    pub fn from_indexed(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Self, GeometryError> {
        let n = vertices.len() as u32;
        let mut soup = Vec::with_capacity(faces.len());
        for f in faces {
            if f.iter().any(|&i| i >= n) {
                return Err(GeometryError::InvalidArgument(format!(
                    "face {f:?} references a vertex beyond {n}"
                )));
            }
            soup.push([
                vertices[f[0] as usize],
                vertices[f[1] as usize],
                vertices[f[2] as usize],
            ]);
        }
        if let Some(p) = vertices.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::InvalidArgument(format!(
                "non-finite vertex {p:?}"
            )));
        }
        Ok(Self::weld(&soup))
    }

    fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for face in &mut self.faces {
            for idx in face.iter_mut() {
                let old = *idx as usize;
                if remap[old] == u32::MAX {
                    remap[old] = vertices.len() as u32;
                    vertices.push(self.vertices[old]);
                }
                *idx = remap[old];
            }
        }
        self.vertices = vertices;
    }

    /// Re-welds this mesh from its own triangles.
    pub fn rewelded(&self) -> Self {
        let mut mesh = Self::weld(&self.triangles().collect::<Vec<_>>());
        mesh.dropped_faces += self.dropped_faces;
        mesh
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn dropped_faces(&self) -> usize {
        self.dropped_faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        (0..self.faces.len()).map(move |i| self.triangle(i))
    }

    /// Unit normal from winding order, or zero for a sliver.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Undirected edge → number of incident faces.
    pub fn edge_table(&self) -> HashMap<(u32, u32), usize> {
        let mut table = HashMap::with_capacity(self.faces.len() * 3 / 2 + 1);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *table.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        table
    }

    pub fn edge_count(&self) -> usize {
        self.edge_table().len()
    }

    /// `V − E + F` over welded connectivity (summed over all components).
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Every edge shared by exactly two faces, and at least a tetrahedron's worth of faces.
    pub fn is_watertight(&self) -> bool {
        self.faces.len() >= 4 && self.edge_table().values().all(|&n| n == 2)
    }

    /// Signed volume from the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.triangles()
            .map(|[a, b, c]| a.dot(&b.cross(&c)) / 6.0)
            .sum()
    }

    /// Applies a point map to every vertex, keeping connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            dropped_faces: self.dropped_faces,
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        self.map_vertices(|p| t.apply(p))
    }

    /// Concatenates meshes and welds the result.
    pub fn merged(parts: &[TriMesh]) -> TriMesh {
        let soup: Vec<[Vec3; 3]> = parts.iter().flat_map(|m| m.triangles()).collect();
        TriMesh::weld(&soup)
    }

    /// Vertex centroid to the origin, then uniform scale so the largest
    /// bounding-box extent is exactly 1.
    pub fn normalize(&self) -> Result<(TriMesh, NormalizeTransform), GeometryError> {
        if self.faces.is_empty() {
            return Err(GeometryError::DegenerateMesh("mesh has no faces".into()));
        }
        let aabb = self.aabb().expect("faces imply vertices");
        let extent = aabb.max_extent();
        if !(extent > 0.0) {
            return Err(GeometryError::DegenerateMesh(
                "bounding box has zero extent".into(),
            ));
        }
        let centroid =
            self.vertices.iter().fold(Vec3::zeros(), |acc, v| acc + v) / self.vertices.len() as f64;
        let t = NormalizeTransform {
            scale: 1.0 / extent,
            translation: -centroid,
        };
        Ok((self.map_vertices(|p| t.apply(p)), t))
    }
}
