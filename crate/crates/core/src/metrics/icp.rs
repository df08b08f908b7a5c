use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::MetricError;
use crate::geometry::{sample_surface, KdTree, RigidTransform, TriMesh, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once the RMS residual improves by less than this.
    pub convergence_tol: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Also fit a uniform scale each step (Umeyama). Bounding-box
    /// normalization is not rotation invariant, so a rotated copy comes out
    /// of it at a slightly different scale.
    pub estimate_scale: bool,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_tol: 1e-6,
            sample_count: 2048,
            seed: 0,
            estimate_scale: true,
        }
    }
}

impl IcpConfig {
    fn validate(&self) -> Result<(), MetricError> {
        if self.max_iterations == 0 {
            return Err(MetricError::InvalidConfig("max_iterations must be ≥ 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(MetricError::InvalidConfig("convergence_tol must be > 0".into()));
        }
        if self.sample_count == 0 {
            return Err(MetricError::InvalidConfig("sample_count must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Rotation and translation; the full map is `x ↦ scale·R·x + t`.
    pub transform: RigidTransform,
    pub scale: f64,
    /// The moving mesh after alignment.
    pub mesh: TriMesh,
    pub iterations: usize,
    pub rms: f64,
}

impl IcpResult {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.transform.rotation * p * self.scale + self.transform.translation
    }
}

/// Closed-form best fit `dst ≈ c·R·src + t` over paired points (Kabsch, with
/// the Umeyama scale when `with_scale`). Returns `(R, t, c)`.
pub fn kabsch(src: &[Vec3], dst: &[Vec3], with_scale: bool) -> (Matrix3<f64>, Vec3, f64) {
    assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let mu_s = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (sc, dc) = (s - mu_s, d - mu_d);
        cov += dc * sc.transpose();
        var_s += sc.norm_squared();
    }
    cov /= n;
    var_s /= n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut flip = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        flip[(2, 2)] = -1.0;
    }
    let rotation = u * flip * v_t;
    let scale = if with_scale && var_s > 0.0 {
        (svd.singular_values.component_mul(&flip.diagonal())).sum() / var_s
    } else {
        1.0
    };
    let translation = mu_d - rotation * mu_s * scale;
    (rotation, translation, scale)
}

/// Point-to-point ICP aligning `moving` onto `fixed`.
///
/// Both meshes are sampled with the same seed; each step pairs every moving
/// sample with its nearest fixed sample and refits the closed-form transform.
pub fn icp_align(moving: &TriMesh, fixed: &TriMesh, cfg: &IcpConfig) -> Result<IcpResult, MetricError> {
    cfg.validate()?;
    let src = sample_surface(moving, cfg.sample_count, cfg.seed)?.points;
    let dst = sample_surface(fixed, cfg.sample_count, cfg.seed)?.points;
    let tree = KdTree::new(&dst);

    let mut current = src.clone();
    let mut rotation = Matrix3::identity();
    let mut translation = Vec3::zeros();
    let mut scale = 1.0;
    let mut prev_rms = f64::INFINITY;
    let mut rms = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let matches: Vec<(usize, f64)> = current
            .par_iter()
            .map(|p| tree.nearest(p).expect("non-empty"))
            .collect();
        rms = (matches.iter().map(|m| m.1).sum::<f64>() / matches.len() as f64).sqrt();
        if rms == 0.0 || prev_rms - rms < cfg.convergence_tol {
            break;
        }
        prev_rms = rms;
        let paired: Vec<Vec3> = matches.iter().map(|m| dst[m.0]).collect();
        let (r, t, c) = kabsch(&current, &paired, cfg.estimate_scale);
        for p in &mut current {
            *p = r * *p * c + t;
        }
        rotation = r * rotation;
        translation = r * translation * c + t;
        scale *= c;
        iterations += 1;
    }
    let transform = RigidTransform::new(rotation, translation);
    let mesh = moving.map_vertices(|p| rotation * p * scale + translation);
    Ok(IcpResult {
        transform,
        scale,
        mesh,
        iterations,
        rms,
    })
}
