//! Triangle meshes, point clouds, and their plain-text interchange formats.
//!
//! Meshes are indexed triangle soups loaded from ASCII OBJ (only `v` and
//! `f` records; polygons are fan-triangulated). Before rendering or
//! voxelization a mesh is normalized to fit a unit-diameter sphere centered
//! at the origin, so one camera setup works for every model. Point clouds
//! use whitespace-separated `x y z` lines (XYZ format).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Face referencing a vertex that does not exist, or repeating a vertex.
    #[error("invalid face {face:?}: {msg}")]
    InvalidFace { face: [usize; 3], msg: String },
    /// Mesh with no vertices or no faces where at least one is required.
    #[error("mesh is empty")]
    EmptyMesh,
    /// Mesh whose vertices are (nearly) coincident or whose faces have
    /// (nearly) zero total area; it cannot be normalized or sampled.
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
}

/// Indexed triangle mesh. Face indices are zero-based into `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting faces with out-of-range or repeated indices.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<TriangleMesh, MeshError> {
        for &face in &faces {
            let [a, b, c] = face;
            if a >= vertices.len() || b >= vertices.len() || c >= vertices.len() {
                return Err(MeshError::InvalidFace { face, msg: "vertex index out of range".into() });
            }
            if a == b || b == c || a == c {
                return Err(MeshError::InvalidFace { face, msg: "repeated vertex index".into() });
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }

    /// Axis-aligned unit cube (side 1) centered at the origin.
    pub fn cube() -> TriangleMesh {
        let h = 0.5;
        let vertices = vec![
            Vec3::new(-h, -h, -h),
            Vec3::new(h, -h, -h),
            Vec3::new(h, h, -h),
            Vec3::new(-h, h, -h),
            Vec3::new(-h, -h, h),
            Vec3::new(h, -h, h),
            Vec3::new(h, h, h),
            Vec3::new(-h, h, h),
        ];
        let faces = vec![
            [0, 2, 1], [0, 3, 2], // z = -h
            [4, 5, 6], [4, 6, 7], // z = +h
            [0, 1, 5], [0, 5, 4], // y = -h
            [3, 6, 2], [3, 7, 6], // y = +h
            [0, 4, 7], [0, 7, 3], // x = -h
            [1, 2, 6], [1, 6, 5], // x = +h
        ];
        TriangleMesh { vertices, faces }
    }

    /// Regular icosahedron with unit golden-ratio coordinates.
    pub fn icosahedron() -> TriangleMesh {
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        let vertices = vec![
            Vec3::new(-1.0, p, 0.0),
            Vec3::new(1.0, p, 0.0),
            Vec3::new(-1.0, -p, 0.0),
            Vec3::new(1.0, -p, 0.0),
            Vec3::new(0.0, -1.0, p),
            Vec3::new(0.0, 1.0, p),
            Vec3::new(0.0, -1.0, -p),
            Vec3::new(0.0, 1.0, -p),
            Vec3::new(p, 0.0, -1.0),
            Vec3::new(p, 0.0, 1.0),
            Vec3::new(-p, 0.0, -1.0),
            Vec3::new(-p, 0.0, 1.0),
        ];
        let faces = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        TriangleMesh { vertices, faces }
    }

    /// Translates and scales the mesh so it fits a sphere of diameter 1
    /// centered at the origin: the box center moves to the origin and the
    /// farthest vertex lands at radius 0.5.
    pub fn normalize_unit_diameter(&mut self) -> Result<(), MeshError> {
        if self.vertices.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let (mut lo, mut hi) = (self.vertices[0], self.vertices[0]);
        for v in &self.vertices {
            lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        let center = (lo + hi) * 0.5;
        let radius = self
            .vertices
            .iter()
            .map(|&v| (v - center).norm())
            .fold(0.0f64, f64::max);
        if radius < 1e-12 {
            return Err(MeshError::DegenerateMesh("all vertices coincide".into()));
        }
        let s = 0.5 / radius;
        for v in &mut self.vertices {
            *v = (*v - center) * s;
        }
        Ok(())
    }

    pub fn face_area(&self, face: [usize; 3]) -> f64 {
        let [a, b, c] = face;
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        self.faces.iter().map(|&f| self.face_area(f)).sum()
    }

    /// Draws `n` points uniformly over the surface: faces are chosen with
    /// probability proportional to area, positions uniformly within each
    /// face. Deterministic for a fixed seed.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<PointCloud, MeshError> {
        if self.faces.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let mut cumulative = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for &f in &self.faces {
            total += self.face_area(f);
            cumulative.push(total);
        }
        if total < 1e-12 {
            return Err(MeshError::DegenerateMesh("zero surface area".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let t = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= t).min(self.faces.len() - 1);
            let [a, b, c] = self.faces[idx];
            let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let su = rng.gen::<f64>().sqrt();
            let r2 = rng.gen::<f64>();
            points.push(a * (1.0 - su) + b * (su * (1.0 - r2)) + c * (su * r2));
        }
        Ok(PointCloud { points })
    }

    /// Reads an ASCII OBJ file. Only `v` and `f` records are honored;
    /// polygonal faces are fan-triangulated and negative indices resolved
    /// relative to the vertices seen so far.
    pub fn load_obj(path: &Path) -> Result<TriangleMesh, MeshError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut vertices: Vec<Vec3> = Vec::new();
        let mut faces: Vec<[usize; 3]> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("v") => {
                    let mut coord = |axis: &str| -> Result<f64, MeshError> {
                        tokens
                            .next()
                            .ok_or_else(|| MeshError::Parse {
                                line: lineno,
                                msg: format!("missing {axis} coordinate"),
                            })?
                            .parse()
                            .map_err(|e| MeshError::Parse { line: lineno, msg: format!("{axis}: {e}") })
                    };
                    let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                    vertices.push(Vec3::new(x, y, z));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in tokens {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|e| MeshError::Parse {
                            line: lineno,
                            msg: format!("face index `{tok}`: {e}"),
                        })?;
                        let resolved = if i > 0 {
                            i as usize - 1
                        } else if i < 0 {
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(MeshError::Parse {
                                    line: lineno,
                                    msg: format!("relative index {i} out of range"),
                                });
                            }
                            vertices.len() - back
                        } else {
                            return Err(MeshError::Parse { line: lineno, msg: "face index 0".into() });
                        };
                        if resolved >= vertices.len() {
                            return Err(MeshError::Parse {
                                line: lineno,
                                msg: format!("face index {i} out of range"),
                            });
                        }
                        idx.push(resolved);
                    }
                    if idx.len() < 3 {
                        return Err(MeshError::Parse {
                            line: lineno,
                            msg: "face with fewer than 3 vertices".into(),
                        });
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {} // comments, normals, texture coords, groups...
            }
        }
        TriangleMesh::new(vertices, faces)
    }

    /// Writes the mesh as ASCII OBJ. Coordinates round-trip bit-exactly.
    pub fn save_obj(&self, path: &Path) -> Result<(), MeshError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in &self.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unordered set of 3D points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads whitespace-separated `x y z` lines; blank lines are skipped.
    pub fn load_xyz(path: &Path) -> Result<PointCloud, MeshError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut points = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|e| MeshError::Parse { line: lineno + 1, msg: e.to_string() })?;
            if vals.len() != 3 {
                return Err(MeshError::Parse {
                    line: lineno + 1,
                    msg: format!("expected 3 values, found {}", vals.len()),
                });
            }
            points.push(Vec3::new(vals[0], vals[1], vals[2]));
        }
        Ok(PointCloud { points })
    }

    pub fn save_xyz(&self, path: &Path) -> Result<(), MeshError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for p in &self.points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_has_expected_counts_and_area() {
        let cube = TriangleMesh::cube();
        assert_eq!(cube.vertices.len(), 8);
        assert_eq!(cube.faces.len(), 12);
        assert_abs_diff_eq!(cube.surface_area(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn icosahedron_is_regular() {
        let ico = TriangleMesh::icosahedron();
        assert_eq!(ico.vertices.len(), 12);
        assert_eq!(ico.faces.len(), 20);
        let r0 = ico.vertices[0].norm();
        for v in &ico.vertices {
            assert_abs_diff_eq!(v.norm(), r0, epsilon = 1e-12);
        }
        let a0 = ico.face_area(ico.faces[0]);
        for &f in &ico.faces {
            assert_abs_diff_eq!(ico.face_area(f), a0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalization_centers_and_scales() {
        let mut mesh = TriangleMesh::icosahedron();
        for v in &mut mesh.vertices {
            *v = *v * 3.0 + Vec3::new(1.0, -2.0, 0.5);
        }
        mesh.normalize_unit_diameter().unwrap();
        let max_r = mesh.vertices.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        assert_abs_diff_eq!(max_r, 0.5, epsilon = 1e-12);
        let (mut lo, mut hi) = (mesh.vertices[0], mesh.vertices[0]);
        for v in &mesh.vertices {
            lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        let center = (lo + hi) * 0.5;
        assert_abs_diff_eq!(center.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_faces() {
        let verts = vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        assert!(matches!(
            TriangleMesh::new(verts.clone(), vec![[0, 1, 3]]),
            Err(MeshError::InvalidFace { .. })
        ));
        assert!(matches!(
            TriangleMesh::new(verts, vec![[0, 1, 1]]),
            Err(MeshError::InvalidFace { .. })
        ));
    }

    #[test]
    fn obj_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.obj");
        let mut mesh = TriangleMesh::icosahedron();
        mesh.normalize_unit_diameter().unwrap();
        mesh.save_obj(&path).unwrap();
        let back = TriangleMesh::load_obj(&path).unwrap();
        assert_eq!(mesh, back);
    }

    #[test]
    fn obj_parser_handles_polygons_and_slashes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        std::fs::write(
            &path,
            "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3 -1\n",
        )
        .unwrap();
        let mesh = TriangleMesh::load_obj(&path).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_parser_rejects_bad_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap();
        assert!(matches!(TriangleMesh::load_obj(&path), Err(MeshError::Parse { line: 4, .. })));
    }

    #[test]
    fn surface_samples_lie_on_cube_faces() {
        let cloud = TriangleMesh::cube().sample_surface(2000, 7).unwrap();
        assert_eq!(cloud.len(), 2000);
        for p in &cloud.points {
            let m = p.x.abs().max(p.y.abs()).max(p.z.abs());
            assert_abs_diff_eq!(m, 0.5, epsilon = 1e-12);
            assert!(p.x.abs() <= 0.5 + 1e-12 && p.y.abs() <= 0.5 + 1e-12 && p.z.abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn surface_sampling_is_area_weighted_and_deterministic() {
        // Two triangles in the same plane with a 1:3 area ratio.
        let verts = vec![
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -3.0, 0.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [0, 3, 4]]).unwrap();
        let cloud = mesh.sample_surface(4000, 1).unwrap();
        let in_small = cloud.points.iter().filter(|p| p.x >= 0.0 && p.y >= 0.0).count();
        let frac = in_small as f64 / 4000.0;
        assert!((frac - 0.25).abs() < 0.05, "small-triangle fraction {frac}");
        assert_eq!(cloud, mesh.sample_surface(4000, 1).unwrap());
        assert_ne!(cloud, mesh.sample_surface(4000, 2).unwrap());
    }

    #[test]
    fn degenerate_meshes_are_rejected() {
        let mut flat = TriangleMesh::new(vec![Vec3::ZERO; 3], vec![]).unwrap();
        // Distinct indices but coincident vertices: zero area, zero radius.
        assert!(flat.normalize_unit_diameter().is_err());
        let tri = TriangleMesh::new(
            vec![Vec3::ZERO, Vec3::ZERO, Vec3::ZERO],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(tri.sample_surface(10, 0), Err(MeshError::DegenerateMesh(_))));
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(empty.sample_surface(10, 0), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn xyz_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.xyz");
        let cloud = TriangleMesh::cube().sample_surface(64, 3).unwrap();
        cloud.save_xyz(&path).unwrap();
        assert_eq!(PointCloud::load_xyz(&path).unwrap(), cloud);
    }
}
