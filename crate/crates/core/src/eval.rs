//! Shape-quality metrics: ground-truth solid voxelization, voxel IoU, and
//! Chamfer distance between normalized point clouds.
//!
//! The reference voxelization is solid, not a surface shell, because the
//! carving output is a solid hull; comparing solid to solid is the only
//! consistent overlap measure. Chamfer uses a fixed, documented protocol —
//! both clouds normalized to a unit-diameter bounding sphere about their
//! centroid, unsquared distances, mean of the two directions, scaled by
//! 100 — so reported numbers are reproducible.

use std::collections::VecDeque;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carve::{BinaryGrid, GridSpec};
use crate::geometry::{UnitQuaternion, Vec3};
use crate::mesh::{PointCloud, TriangleMesh};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("mesh has no geometry")]
    EmptyMesh,
    #[error("grid has no occupied voxels")]
    EmptyGrid,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point cloud is degenerate (all points coincide)")]
    DegenerateCloud,
    #[error("grids use different specs")]
    SpecMismatch,
}

/// Headline numbers for one reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub iou: f64,
    pub chamfer_x100: f64,
    pub pose_accuracy: f64,
    pub pose_median_deg: f64,
}

impl MetricReport {
    pub fn save_json(&self, path: &Path) -> Result<(), EvalError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<MetricReport, EvalError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Number of surface samples per voxel edge length; the sampling lattice on
/// each triangle is at least this dense, so no intersected voxel is skipped
/// over between samples.
const SAMPLES_PER_VOXEL: f64 = 4.0;

/// Voxelizes a watertight mesh as a solid: vertices are rotated by
/// `rotation`, every voxel touched by the surface is marked, and the
/// interior is filled as the complement of an outside flood fill
/// (6-connected, seeded at the grid boundary).
pub fn voxelize_solid(
    mesh: &TriangleMesh,
    rotation: UnitQuaternion,
    spec: GridSpec,
) -> Result<BinaryGrid, EvalError> {
    if mesh.vertices.is_empty() || mesh.faces.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    let rotated: Vec<Vec3> = mesh.vertices.iter().map(|&v| rotation.rotate_point(v)).collect();
    let res = spec.resolution;
    let voxel = spec.voxel_size();
    let origin = Vec3::new(
        spec.center.x - 0.5 * spec.extent,
        spec.center.y - 0.5 * spec.extent,
        spec.center.z - 0.5 * spec.extent,
    );
    let mut surface = vec![0u8; spec.n_voxels()];
    let mut mark = |p: Vec3| {
        let ix = ((p.x - origin.x) / voxel).floor();
        let iy = ((p.y - origin.y) / voxel).floor();
        let iz = ((p.z - origin.z) / voxel).floor();
        let r = res as f64;
        if ix >= 0.0 && iy >= 0.0 && iz >= 0.0 && ix < r && iy < r && iz < r {
            surface[spec.index(ix as usize, iy as usize, iz as usize)] = 1;
        }
    };
    for face in &mesh.faces {
        let (a, b, c) = (rotated[face[0]], rotated[face[1]], rotated[face[2]]);
        let longest = (b - a).norm().max((c - a).norm()).max((c - b).norm());
        let m = ((longest * SAMPLES_PER_VOXEL / voxel).ceil() as usize).max(1);
        let ab = b - a;
        let ac = c - a;
        for i in 0..=m {
            for j in 0..=(m - i) {
                let (s, t) = (i as f64 / m as f64, j as f64 / m as f64);
                mark(a + ab * s + ac * t);
            }
        }
    }
    // Outside flood fill over non-surface voxels; everything it cannot
    // reach is either surface or enclosed interior.
    let mut outside = vec![false; spec.n_voxels()];
    let mut queue = VecDeque::new();
    for iz in 0..res {
        for iy in 0..res {
            for ix in 0..res {
                if ix != 0 && iy != 0 && iz != 0 && ix != res - 1 && iy != res - 1 && iz != res - 1
                {
                    continue;
                }
                let i = spec.index(ix, iy, iz);
                if surface[i] == 0 && !outside[i] {
                    outside[i] = true;
                    queue.push_back((ix, iy, iz));
                }
            }
        }
    }
    while let Some((ix, iy, iz)) = queue.pop_front() {
        let steps = [(1i64, 0i64, 0i64), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)];
        for (dx, dy, dz) in steps {
            let (nx, ny, nz) = (ix as i64 + dx, iy as i64 + dy, iz as i64 + dz);
            if nx < 0 || ny < 0 || nz < 0 || nx >= res as i64 || ny >= res as i64 || nz >= res as i64
            {
                continue;
            }
            let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
            let n = spec.index(nx, ny, nz);
            if surface[n] == 0 && !outside[n] {
                outside[n] = true;
                queue.push_back((nx, ny, nz));
            }
        }
    }
    let bits = outside.iter().map(|&o| u8::from(!o)).collect();
    Ok(BinaryGrid { spec, bits })
}

/// Intersection over union of occupied voxels. Both grids empty scores 1.
pub fn iou(a: &BinaryGrid, b: &BinaryGrid) -> Result<f64, EvalError> {
    if a.spec != b.spec {
        return Err(EvalError::SpecMismatch);
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += usize::from(x != 0 && y != 0);
        union += usize::from(x != 0 || y != 0);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Occupied-voxel centroids, in flat index order (x fastest).
pub fn grid_to_cloud(grid: &BinaryGrid) -> Result<PointCloud, EvalError> {
    let res = grid.spec.resolution;
    let mut points = Vec::new();
    for iz in 0..res {
        for iy in 0..res {
            for ix in 0..res {
                if grid.bits[grid.spec.index(ix, iy, iz)] != 0 {
                    points.push(grid.spec.centroid(ix, iy, iz));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    Ok(PointCloud { points })
}

/// Recenters the cloud on its centroid and scales the farthest point to
/// radius 0.5 (unit diameter).
fn normalize_cloud(cloud: &PointCloud) -> Result<Vec<Vec3>, EvalError> {
    if cloud.points.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let n = cloud.points.len() as f64;
    let mut centroid = Vec3::ZERO;
    for &p in &cloud.points {
        centroid = centroid + p;
    }
    let centroid = centroid * (1.0 / n);
    let radius = cloud
        .points
        .iter()
        .map(|&p| (p - centroid).norm())
        .fold(0.0f64, f64::max);
    if radius < 1e-12 {
        return Err(EvalError::DegenerateCloud);
    }
    let scale = 0.5 / radius;
    Ok(cloud.points.iter().map(|&p| (p - centroid) * scale).collect())
}

/// Mean nearest-neighbor distance from each point of `from` to `to`.
/// Distances are gathered per point (deterministic, thread-count
/// independent) and summed in index order.
fn directed_mean(from: &[Vec3], to: &[Vec3]) -> f64 {
    let dists: Vec<f64> = from
        .par_iter()
        .map(|&p| {
            to.iter()
                .map(|&q| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    dists.iter().sum::<f64>() / from.len() as f64
}

/// Chamfer distance between normalized clouds, scaled by 100:
/// `100 * (mean_a(min dist to b) + mean_b(min dist to a)) / 2`.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64, EvalError> {
    let na = normalize_cloud(a)?;
    let nb = normalize_cloud(b)?;
    Ok(100.0 * (directed_mean(&na, &nb) + directed_mean(&nb, &na)) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn scaled_cube(side: f64) -> TriangleMesh {
        let mut mesh = TriangleMesh::cube();
        for v in &mut mesh.vertices {
            *v = *v * side;
        }
        mesh
    }

    fn random_cloud(rng: &mut ChaCha20Rng, n: usize) -> PointCloud {
        let points = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        PointCloud { points }
    }

    fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
        let one = |from: &[Vec3], to: &[Vec3]| {
            let mut total = 0.0;
            for &p in from {
                let mut best = f64::INFINITY;
                for &q in to {
                    best = best.min((p - q).norm());
                }
                total += best;
            }
            total / from.len() as f64
        };
        100.0 * (one(a, b) + one(b, a)) / 2.0
    }

    #[test]
    fn cube_voxelizes_to_exact_block() {
        // Cube spanning ±0.19 inside an 8-voxel axis of size 0.1: the
        // surface stays strictly inside voxel indices 2..=5, and the solid
        // fill recovers exactly that 4^3 block.
        let mesh = scaled_cube(0.38);
        let spec = GridSpec::new(8, Vec3::ZERO, 0.8).unwrap();
        let grid = voxelize_solid(&mesh, UnitQuaternion::identity(), spec).unwrap();
        for iz in 0..8 {
            for iy in 0..8 {
                for ix in 0..8 {
                    let inside = (2..6).contains(&ix) && (2..6).contains(&iy) && (2..6).contains(&iz);
                    assert_eq!(
                        grid.bits[spec.index(ix, iy, iz)],
                        u8::from(inside),
                        "voxel {ix},{iy},{iz}"
                    );
                }
            }
        }
        assert_eq!(grid.count_occupied(), 64);
    }

    #[test]
    fn voxelize_fills_enclosed_interior() {
        let mut mesh = TriangleMesh::icosahedron();
        mesh.normalize_unit_diameter().unwrap();
        let spec = GridSpec::new(16, Vec3::ZERO, 1.1).unwrap();
        let grid = voxelize_solid(&mesh, UnitQuaternion::identity(), spec).unwrap();
        // The shell never passes through the central voxels, so they can
        // only be set by the interior fill.
        let mid = 16 / 2;
        assert_eq!(grid.bits[spec.index(mid, mid, mid)], 1, "interior must be filled");
        assert_eq!(grid.bits[spec.index(0, 0, 0)], 0, "corner is outside");
        // Inscribed/circumscribed sphere sandwich: every voxel whose center
        // is within the insphere is occupied; none outside the circumsphere.
        let inradius = 0.5 * 0.7946544722917661; // icosahedron r_in / r_circ
        for iz in 0..16 {
            for iy in 0..16 {
                for ix in 0..16 {
                    let r = spec.centroid(ix, iy, iz).norm();
                    let bit = grid.bits[spec.index(ix, iy, iz)];
                    if r < inradius - 1e-9 {
                        assert_eq!(bit, 1, "voxel {ix},{iy},{iz} at radius {r}");
                    }
                    if r > 0.5 + spec.voxel_size() {
                        assert_eq!(bit, 0, "voxel {ix},{iy},{iz} at radius {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn voxelize_full_turn_matches_identity_exactly() {
        let mut mesh = TriangleMesh::icosahedron();
        mesh.normalize_unit_diameter().unwrap();
        let spec = GridSpec::new(12, Vec3::ZERO, 1.1).unwrap();
        let axis = Vec3::new(0.3, -1.0, 0.7);
        let quarter = UnitQuaternion::from_axis_angle(axis, std::f64::consts::FRAC_PI_2).unwrap();
        let full = quarter.multiply(quarter).multiply(quarter.multiply(quarter));
        let a = voxelize_solid(&mesh, UnitQuaternion::identity(), spec).unwrap();
        let b = voxelize_solid(&mesh, full, spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn voxelize_rotation_matches_prerotated_vertices() {
        let mut mesh = TriangleMesh::icosahedron();
        mesh.normalize_unit_diameter().unwrap();
        let q = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 0.4, -0.2), 1.1).unwrap();
        let mut prerotated = mesh.clone();
        for v in &mut prerotated.vertices {
            *v = q.rotate_point(*v);
        }
        let spec = GridSpec::new(12, Vec3::ZERO, 1.1).unwrap();
        let a = voxelize_solid(&mesh, q, spec).unwrap();
        let b = voxelize_solid(&prerotated, UnitQuaternion::identity(), spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn voxelize_rejects_empty_mesh() {
        let empty = TriangleMesh { vertices: vec![], faces: vec![] };
        assert!(matches!(
            voxelize_solid(&empty, UnitQuaternion::identity(), GridSpec::default()),
            Err(EvalError::EmptyMesh)
        ));
    }

    #[test]
    fn iou_counts_overlap() {
        let spec = GridSpec::new(2, Vec3::ZERO, 1.0).unwrap();
        let mut a = BinaryGrid { spec, bits: vec![0; 8] };
        let mut b = a.clone();
        // Two voxels vs one of them.
        a.bits[0] = 1;
        a.bits[1] = 1;
        b.bits[0] = 1;
        assert_eq!(iou(&a, &b).unwrap(), 0.5);
        assert_eq!(iou(&b, &a).unwrap(), 0.5);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        // Disjoint.
        let mut c = BinaryGrid { spec, bits: vec![0; 8] };
        c.bits[7] = 1;
        assert_eq!(iou(&a, &c).unwrap(), 0.0);
        // Both empty.
        let empty = BinaryGrid { spec, bits: vec![0; 8] };
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
        // Spec mismatch.
        let other = BinaryGrid { spec: GridSpec::new(2, Vec3::ZERO, 2.0).unwrap(), bits: vec![0; 8] };
        assert!(matches!(iou(&a, &other), Err(EvalError::SpecMismatch)));
    }

    #[test]
    fn grid_to_cloud_places_centroids() {
        // Odd resolution with an exactly representable voxel size puts the
        // middle voxel precisely at the grid center.
        let spec = GridSpec::new(3, Vec3::new(0.25, -0.5, 1.0), 1.5).unwrap();
        let mut grid = BinaryGrid { spec, bits: vec![0; 27] };
        grid.bits[spec.index(1, 1, 1)] = 1;
        let cloud = grid_to_cloud(&grid).unwrap();
        assert_eq!(cloud.points, vec![spec.center]);
        // Hand-built L-shape.
        let mut l = BinaryGrid { spec, bits: vec![0; 27] };
        l.bits[spec.index(0, 0, 0)] = 1;
        l.bits[spec.index(1, 0, 0)] = 1;
        l.bits[spec.index(1, 1, 0)] = 1;
        let cloud = grid_to_cloud(&l).unwrap();
        assert_eq!(
            cloud.points,
            vec![spec.centroid(0, 0, 0), spec.centroid(1, 0, 0), spec.centroid(1, 1, 0)]
        );
        // Full grid.
        let full = BinaryGrid { spec, bits: vec![1; 27] };
        assert_eq!(grid_to_cloud(&full).unwrap().len(), 27);
        // Empty errors.
        let empty = BinaryGrid { spec, bits: vec![0; 27] };
        assert!(matches!(grid_to_cloud(&empty), Err(EvalError::EmptyGrid)));
    }

    #[test]
    fn chamfer_hand_case_crossed_segments() {
        // Both clouds are already normalized; each point's nearest
        // neighbor in the other cloud is at distance sqrt(0.5).
        let a = PointCloud { points: vec![Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)] };
        let b = PointCloud { points: vec![Vec3::new(0.0, -0.5, 0.0), Vec3::new(0.0, 0.5, 0.0)] };
        assert_abs_diff_eq!(chamfer(&a, &b).unwrap(), 100.0 * 0.5f64.sqrt(), epsilon = 1e-9);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let mut rng = ChaCha20Rng::seed_from_u64(60);
        for _ in 0..10 {
            let a = random_cloud(&mut rng, 120);
            let b = random_cloud(&mut rng, 90);
            let fast = chamfer(&a, &b).unwrap();
            let na = normalize_cloud(&a).unwrap();
            let nb = normalize_cloud(&b).unwrap();
            let brute = brute_chamfer(&na, &nb);
            assert_abs_diff_eq!(fast, brute, epsilon = 1e-9);
            assert_eq!(fast, chamfer(&b, &a).unwrap(), "chamfer must be symmetric");
        }
    }

    #[test]
    fn chamfer_is_invariant_to_translation_and_scale() {
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        let a = random_cloud(&mut rng, 80);
        let b = random_cloud(&mut rng, 80);
        let base = chamfer(&a, &b).unwrap();
        let shifted = PointCloud {
            points: a.points.iter().map(|&p| p + Vec3::new(10.0, -4.0, 2.5)).collect(),
        };
        assert_abs_diff_eq!(chamfer(&shifted, &b).unwrap(), base, epsilon = 1e-9);
        let scaled = PointCloud { points: b.points.iter().map(|&p| p * 37.0).collect() };
        assert_abs_diff_eq!(chamfer(&a, &scaled).unwrap(), base, epsilon = 1e-9);
    }

    #[test]
    fn chamfer_rejects_degenerate_inputs() {
        let empty = PointCloud { points: vec![] };
        let ok = PointCloud { points: vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)] };
        assert!(matches!(chamfer(&empty, &ok), Err(EvalError::EmptyCloud)));
        let collapsed = PointCloud { points: vec![Vec3::new(2.0, 2.0, 2.0); 5] };
        assert!(matches!(chamfer(&collapsed, &ok), Err(EvalError::DegenerateCloud)));
    }

    #[test]
    fn metric_report_round_trips_with_four_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = MetricReport {
            iou: 0.91,
            chamfer_x100: 3.25,
            pose_accuracy: 0.8,
            pose_median_deg: 4.5,
        };
        report.save_json(&path).unwrap();
        let back = MetricReport::load_json(&path).unwrap();
        assert_eq!(back, report);
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let obj = value.as_object().unwrap();
        assert_eq!(obj.len(), 4);
        for key in ["iou", "chamfer_x100", "pose_accuracy", "pose_median_deg"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
    }
}
