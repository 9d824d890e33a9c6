//! Silhouette rendering and 2D distance-field machinery.
//!
//! Silhouettes are binary masks rasterized with an edge-function test at
//! pixel centers and a top-left fill convention, so triangles sharing an
//! edge never double-cover or leave gaps, and rendering a rotated mesh is
//! bit-identical to rendering a pre-rotated copy. Contour pixels feed an
//! exact Euclidean distance transform (two-pass lower-envelope algorithm
//! over squared distances), which the contour loss samples bilinearly.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::geometry::{CameraModel, UnitQuaternion, Vec3, MIN_DEPTH};
use crate::mesh::{PointCloud, TriangleMesh};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad image format: {0}")]
    BadFormat(String),
    /// Rasterization set no pixel (mesh out of frame or behind the camera).
    #[error("rendered silhouette is empty")]
    EmptyRender,
    /// Distance transform called with an empty seed set.
    #[error("distance transform needs at least one seed")]
    NoSeeds,
    #[error("seed ({row}, {col}) outside a {width}x{height} grid")]
    SeedOutOfBounds { row: usize, col: usize, width: usize, height: usize },
    /// No cloud point projects onto a contour pixel.
    #[error("no contour points could be lifted")]
    NoContourPoints,
    #[error("silhouette is {got_w}x{got_h} but the camera expects {want_w}x{want_h}")]
    SizeMismatch { got_w: usize, got_h: usize, want_w: usize, want_h: usize },
}

/// Binary mask; `1` is foreground. Row-major, indexed `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<u8>,
}

impl Silhouette {
    pub fn new(width: usize, height: usize) -> Silhouette {
        Silhouette { width, height, mask: vec![0; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.mask[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.mask[row * self.width + col] = value;
    }

    pub fn count_foreground(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }

    /// Writes binary PGM (P5, maxval 255): foreground 255, background 0.
    pub fn save_pgm(&self, path: &Path) -> Result<(), RasterError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.mask.iter().map(|&m| if m != 0 { 255 } else { 0 }).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    /// Reads binary PGM; pixels with value >= 128 become foreground.
    pub fn load_pgm(path: &Path) -> Result<Silhouette, RasterError> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let mut pos = 0usize;
        let mut token = |data: &[u8]| -> Result<String, RasterError> {
            // Skip whitespace and `#` comments between header tokens.
            loop {
                while pos < data.len() && data[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < data.len() && data[pos] == b'#' {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(RasterError::BadFormat("truncated header".into()));
            }
            Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
        };
        if token(&data)? != "P5" {
            return Err(RasterError::BadFormat("not a P5 PGM".into()));
        }
        let parse = |s: String| {
            s.parse::<usize>().map_err(|e| RasterError::BadFormat(format!("header value: {e}")))
        };
        let width = parse(token(&data)?)?;
        let height = parse(token(&data)?)?;
        let maxval = parse(token(&data)?)?;
        if maxval == 0 || maxval > 255 {
            return Err(RasterError::BadFormat(format!("unsupported maxval {maxval}")));
        }
        pos += 1; // single whitespace byte after maxval
        if data.len() < pos + width * height {
            return Err(RasterError::BadFormat("truncated pixel data".into()));
        }
        let mask = data[pos..pos + width * height]
            .iter()
            .map(|&b| u8::from(b >= 128))
            .collect();
        Ok(Silhouette { width, height, mask })
    }
}

/// Euclidean distances (in pixels) to the nearest seed, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub dist: Vec<f64>,
}

impl DistanceField {
    /// Bilinear interpolation at real-valued pixel coordinates `(u, v)`;
    /// coordinates beyond the border clamp to the nearest edge pixel, so
    /// wildly off-image reprojections still produce a large finite value.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let (u0, v0) = (u.floor() as usize, v.floor() as usize);
        let (u1, v1) = ((u0 + 1).min(self.width - 1), (v0 + 1).min(self.height - 1));
        let (fu, fv) = (u - u0 as f64, v - v0 as f64);
        let at = |r: usize, c: usize| self.dist[r * self.width + c];
        let top = at(v0, u0) * (1.0 - fu) + at(v0, u1) * fu;
        let bottom = at(v1, u0) * (1.0 - fu) + at(v1, u1) * fu;
        top * (1.0 - fv) + bottom * fv
    }
}

/// 3D points (in the camera frame of the view they were lifted from) whose
/// projections fall on silhouette contour pixels. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPointSet {
    pub points: Vec<Vec3>,
}

/// Renders the mesh under `rotation` into a binary silhouette. Triangles
/// with any vertex on or behind the camera plane are dropped; if nothing
/// lands in frame the render is rejected as empty.
pub fn render_silhouette(
    mesh: &TriangleMesh,
    rotation: UnitQuaternion,
    cam: &CameraModel,
) -> Result<Silhouette, RasterError> {
    let mut sil = Silhouette::new(cam.width, cam.height);
    let projected: Vec<Option<(f64, f64)>> = mesh
        .vertices
        .iter()
        .map(|&v| {
            let p = cam.camera_point(rotation, v);
            if p.z <= MIN_DEPTH {
                None
            } else {
                Some(cam.project(p).expect("depth checked"))
            }
        })
        .collect();
    for &[ia, ib, ic] in &mesh.faces {
        if let (Some(a), Some(b), Some(c)) = (projected[ia], projected[ib], projected[ic]) {
            fill_triangle(&mut sil, a, b, c);
        }
    }
    if sil.count_foreground() == 0 {
        return Err(RasterError::EmptyRender);
    }
    Ok(sil)
}

/// Signed twice-area of `(a, b, p)`; positive when `p` is on the interior
/// side of the directed edge `a -> b` for counter-clockwise triangles in
/// image coordinates (u right, v down).
#[inline]
fn edge_fn(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// A pixel center exactly on an edge belongs to the triangle only for top
/// and left edges, so adjacent triangles cover shared edges exactly once.
#[inline]
fn edge_accepts_zero(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

fn fill_triangle(sil: &mut Silhouette, a: (f64, f64), b: (f64, f64), c: (f64, f64)) {
    let area2 = edge_fn(a, b, c);
    if area2 == 0.0 {
        return; // degenerate in projection
    }
    let (b, c) = if area2 < 0.0 { (c, b) } else { (b, c) };
    let min_u = a.0.min(b.0).min(c.0);
    let max_u = a.0.max(b.0).max(c.0);
    let min_v = a.1.min(b.1).min(c.1);
    let max_v = a.1.max(b.1).max(c.1);
    if max_u < 0.0 || max_v < 0.0 || min_u > (sil.width - 1) as f64 || min_v > (sil.height - 1) as f64 {
        return;
    }
    let c0 = min_u.max(0.0).floor() as usize;
    let c1 = (max_u.min((sil.width - 1) as f64)).ceil() as usize;
    let r0 = min_v.max(0.0).floor() as usize;
    let r1 = (max_v.min((sil.height - 1) as f64)).ceil() as usize;
    let accept = [edge_accepts_zero(a, b), edge_accepts_zero(b, c), edge_accepts_zero(c, a)];
    for row in r0..=r1 {
        for col in c0..=c1 {
            let p = (col as f64, row as f64);
            let e = [edge_fn(a, b, p), edge_fn(b, c, p), edge_fn(c, a, p)];
            let inside = (0..3).all(|k| e[k] > 0.0 || (e[k] == 0.0 && accept[k]));
            if inside {
                sil.set(row, col, 1);
            }
        }
    }
}

/// Foreground pixels with at least one 4-neighbor that is background;
/// pixels outside the image count as background, so foreground touching
/// the border is contour. Returned in row-major scan order.
pub fn extract_contour_pixels(sil: &Silhouette) -> Vec<(usize, usize)> {
    let (w, h) = (sil.width, sil.height);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if sil.get(r, c) == 0 {
                continue;
            }
            let boundary = r == 0
                || r == h - 1
                || c == 0
                || c == w - 1
                || sil.get(r - 1, c) == 0
                || sil.get(r + 1, c) == 0
                || sil.get(r, c - 1) == 0
                || sil.get(r, c + 1) == 0;
            if boundary {
                out.push((r, c));
            }
        }
    }
    out
}

const DT_INF: f64 = 1e20;

/// Exact Euclidean distance transform: distance from every pixel to the
/// nearest seed. Runs the 1D lower-envelope pass over squared distances
/// along columns and then rows; results are exact (squared distances are
/// small integers), matching a brute-force scan bit for bit.
pub fn distance_transform(
    seeds: &[(usize, usize)],
    width: usize,
    height: usize,
) -> Result<DistanceField, RasterError> {
    if seeds.is_empty() {
        return Err(RasterError::NoSeeds);
    }
    let mut sq = vec![DT_INF; width * height];
    for &(row, col) in seeds {
        if row >= height || col >= width {
            return Err(RasterError::SeedOutOfBounds { row, col, width, height });
        }
        sq[row * width + col] = 0.0;
    }
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for col in 0..width {
        for row in 0..height {
            f[row] = sq[row * width + col];
        }
        dt_1d(&f[..height], &mut d, &mut v, &mut z);
        for row in 0..height {
            sq[row * width + col] = d[row];
        }
    }
    for row in 0..height {
        f[..width].copy_from_slice(&sq[row * width..row * width + width]);
        dt_1d(&f[..width], &mut d, &mut v, &mut z);
        sq[row * width..row * width + width].copy_from_slice(&d[..width]);
    }
    let dist = sq.into_iter().map(f64::sqrt).collect();
    Ok(DistanceField { width, height, dist })
}

/// One 1D pass of the lower-envelope squared-distance transform.
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -DT_INF;
    z[1] = DT_INF;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64;
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = DT_INF;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

/// Projects every cloud point under `rotation`, keeps those whose nearest
/// pixel is a contour pixel of `sil`, and returns them in the camera frame
/// (translation included). If more than `max_points` qualify, a uniform
/// seeded subsample is kept.
pub fn lift_contour_points(
    cloud: &PointCloud,
    rotation: UnitQuaternion,
    cam: &CameraModel,
    sil: &Silhouette,
    max_points: usize,
    seed: u64,
) -> Result<ContourPointSet, RasterError> {
    if sil.width != cam.width || sil.height != cam.height {
        return Err(RasterError::SizeMismatch {
            got_w: sil.width,
            got_h: sil.height,
            want_w: cam.width,
            want_h: cam.height,
        });
    }
    let contour = extract_contour_pixels(sil);
    let mut on_contour = vec![false; sil.width * sil.height];
    for &(r, c) in &contour {
        on_contour[r * sil.width + c] = true;
    }
    let mut points: Vec<Vec3> = Vec::new();
    for &p in &cloud.points {
        let q = cam.camera_point(rotation, p);
        if q.z <= MIN_DEPTH {
            continue;
        }
        let (u, v) = cam.project(q).expect("depth checked");
        let (col, row) = (u.round(), v.round());
        if col < 0.0 || row < 0.0 || col > (sil.width - 1) as f64 || row > (sil.height - 1) as f64 {
            continue;
        }
        if on_contour[row as usize * sil.width + col as usize] {
            points.push(q);
        }
    }
    if points.is_empty() || max_points == 0 {
        return Err(RasterError::NoContourPoints);
    }
    if points.len() > max_points {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for i in 0..max_points {
            let j = rng.gen_range(i..points.len());
            points.swap(i, j);
        }
        points.truncate(max_points);
    }
    Ok(ContourPointSet { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cam() -> CameraModel {
        CameraModel::default()
    }

    /// O(pixels x seeds) reference implementation.
    fn brute_force_dt(seeds: &[(usize, usize)], width: usize, height: usize) -> Vec<f64> {
        let mut out = vec![0.0; width * height];
        for r in 0..height {
            for c in 0..width {
                let best = seeds
                    .iter()
                    .map(|&(sr, sc)| {
                        let dr = r as i64 - sr as i64;
                        let dc = c as i64 - sc as i64;
                        (dr * dr + dc * dc) as f64
                    })
                    .fold(f64::INFINITY, f64::min);
                out[r * width + c] = best.sqrt();
            }
        }
        out
    }

    #[test]
    fn frustum_covering_triangle_fills_the_image() {
        let cam = cam();
        let t = cam.translation;
        let verts = vec![
            cam.unproject(-500.0, -500.0, 1.0) - t,
            cam.unproject(2000.0, -500.0, 1.0) - t,
            cam.unproject(-500.0, 2000.0, 1.0) - t,
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2]]).unwrap();
        let sil = render_silhouette(&mesh, UnitQuaternion::identity(), &cam).unwrap();
        assert_eq!(sil.count_foreground(), cam.width * cam.height);
        let ring = extract_contour_pixels(&sil);
        assert_eq!(ring.len(), 2 * cam.width + 2 * cam.height - 4);
    }

    #[test]
    fn centered_cube_renders_as_centered_square() {
        let cam = cam();
        let sil = render_silhouette(&TriangleMesh::cube(), UnitQuaternion::identity(), &cam).unwrap();
        // The near face (z = 2.2 - 0.5) dominates the silhouette: pixel
        // centers within f * 0.5 / 1.7 of the principal point.
        let half = cam.focal_px * 0.5 / 1.7;
        let mut expected = Silhouette::new(cam.width, cam.height);
        for r in 0..cam.height {
            for c in 0..cam.width {
                if (c as f64 - cam.cx).abs() <= half && (r as f64 - cam.cy).abs() <= half {
                    expected.set(r, c, 1);
                }
            }
        }
        assert_eq!(sil, expected);
        let side = expected.count_foreground();
        assert_eq!(sil.count_foreground(), side);
        assert!(side > 0);
    }

    #[test]
    fn shared_edge_pixels_are_covered_exactly_once() {
        // A square split along its diagonal, rasterized triangle by triangle.
        let a = (20.3, 20.7);
        let b = (100.9, 20.7);
        let c = (100.9, 99.2);
        let d = (20.3, 99.2);
        let mut t1 = Silhouette::new(128, 128);
        let mut t2 = Silhouette::new(128, 128);
        fill_triangle(&mut t1, a, b, c);
        fill_triangle(&mut t2, a, c, d);
        let mut union = Silhouette::new(128, 128);
        fill_triangle(&mut union, a, b, c);
        fill_triangle(&mut union, c, d, a);
        let mut overlap = 0;
        let mut gaps = 0;
        for i in 0..t1.mask.len() {
            if t1.mask[i] == 1 && t2.mask[i] == 1 {
                overlap += 1;
            }
            if union.mask[i] != (t1.mask[i] | t2.mask[i]) {
                gaps += 1;
            }
        }
        assert_eq!(overlap, 0);
        assert_eq!(gaps, 0);
        // Pixel centers 21..=100 x 21..=99 are all covered.
        assert_eq!(union.count_foreground(), 80 * 79);
    }

    #[test]
    fn render_commutes_with_vertex_rotation_bit_exactly() {
        let cam = cam();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let mut mesh = TriangleMesh::icosahedron();
        mesh.normalize_unit_diameter().unwrap();
        for _ in 0..10 {
            let q = UnitQuaternion::random_uniform(&mut rng);
            let rendered = render_silhouette(&mesh, q, &cam).unwrap();
            let mut pre = mesh.clone();
            for v in &mut pre.vertices {
                *v = q.rotate_point(*v);
            }
            let baked = render_silhouette(&pre, UnitQuaternion::identity(), &cam).unwrap();
            assert_eq!(rendered.mask, baked.mask);
        }
    }

    #[test]
    fn out_of_frame_or_behind_camera_is_empty_render() {
        let cam = cam();
        let mut behind = TriangleMesh::cube();
        for v in &mut behind.vertices {
            *v = *v + Vec3::new(0.0, 0.0, -5.0);
        }
        assert!(matches!(
            render_silhouette(&behind, UnitQuaternion::identity(), &cam),
            Err(RasterError::EmptyRender)
        ));
        let mut aside = TriangleMesh::cube();
        for v in &mut aside.vertices {
            *v = *v + Vec3::new(50.0, 0.0, 0.0);
        }
        assert!(matches!(
            render_silhouette(&aside, UnitQuaternion::identity(), &cam),
            Err(RasterError::EmptyRender)
        ));
    }

    #[test]
    fn contour_of_filled_block_is_its_perimeter() {
        let mut sil = Silhouette::new(32, 32);
        for r in 10..20 {
            for c in 10..20 {
                sil.set(r, c, 1);
            }
        }
        assert_eq!(extract_contour_pixels(&sil).len(), 36);
        let blank = Silhouette::new(16, 16);
        assert!(extract_contour_pixels(&blank).is_empty());
    }

    #[test]
    fn distance_transform_hand_case() {
        let field = distance_transform(&[(1, 1)], 3, 3).unwrap();
        let s2 = 2f64.sqrt();
        #[rustfmt::skip]
        let expected = vec![
            s2, 1.0, s2,
            1.0, 0.0, 1.0,
            s2, 1.0, s2,
        ];
        assert_eq!(field.dist, expected);
    }

    #[test]
    fn distance_transform_matches_brute_force_exactly() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (w, h) = (rng.gen_range(4..40), rng.gen_range(4..40));
            let n_seeds = rng.gen_range(1..60);
            let seeds: Vec<(usize, usize)> =
                (0..n_seeds).map(|_| (rng.gen_range(0..h), rng.gen_range(0..w))).collect();
            let field = distance_transform(&seeds, w, h).unwrap();
            assert_eq!(field.dist, brute_force_dt(&seeds, w, h));
        }
    }

    #[test]
    fn distance_transform_is_1_lipschitz() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(22);
        let (w, h) = (48, 37);
        let seeds: Vec<(usize, usize)> =
            (0..25).map(|_| (rng.gen_range(0..h), rng.gen_range(0..w))).collect();
        let field = distance_transform(&seeds, w, h).unwrap();
        for r in 0..h {
            for c in 0..w {
                if c + 1 < w {
                    assert!((field.dist[r * w + c] - field.dist[r * w + c + 1]).abs() <= 1.0 + 1e-12);
                }
                if r + 1 < h {
                    assert!((field.dist[r * w + c] - field.dist[(r + 1) * w + c]).abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn distance_transform_rejects_bad_seeds() {
        assert!(matches!(distance_transform(&[], 8, 8), Err(RasterError::NoSeeds)));
        assert!(matches!(
            distance_transform(&[(8, 0)], 8, 8),
            Err(RasterError::SeedOutOfBounds { .. })
        ));
    }

    #[test]
    fn bilinear_sampling_interpolates_and_clamps() {
        let field = distance_transform(&[(0, 0)], 4, 4).unwrap();
        // Exact at integer coordinates.
        assert_eq!(field.sample_bilinear(2.0, 0.0), 2.0);
        assert_eq!(field.sample_bilinear(3.0, 0.0), 3.0);
        // Midpoint of two known values.
        assert_abs_diff_eq!(field.sample_bilinear(2.5, 0.0), 2.5, epsilon = 1e-12);
        // Border clamp.
        assert_eq!(field.sample_bilinear(-7.0, 0.0), field.sample_bilinear(0.0, 0.0));
        assert_eq!(field.sample_bilinear(100.0, 100.0), field.sample_bilinear(3.0, 3.0));
    }

    #[test]
    fn lifted_points_reproject_onto_contour_pixels() {
        let cam = cam();
        let mesh = TriangleMesh::cube();
        let q = UnitQuaternion::from_axis_angle(Vec3::new(0.3, 1.0, 0.1), 0.7).unwrap();
        let sil = render_silhouette(&mesh, q, &cam).unwrap();
        let cloud = mesh.sample_surface(4000, 9).unwrap();
        let lifted = lift_contour_points(&cloud, q, &cam, &sil, usize::MAX, 0).unwrap();
        let on: std::collections::HashSet<(usize, usize)> =
            extract_contour_pixels(&sil).into_iter().collect();
        assert!(!lifted.points.is_empty());
        for &p in &lifted.points {
            // Already in the camera frame: project directly.
            let (u, v) = cam.project(p).unwrap();
            let key = (v.round() as usize, u.round() as usize);
            assert!(on.contains(&key), "lifted point projects to non-contour pixel {key:?}");
        }
    }

    #[test]
    fn lift_caps_and_is_deterministic() {
        let cam = cam();
        let mesh = TriangleMesh::cube();
        let q = UnitQuaternion::identity();
        let sil = render_silhouette(&mesh, q, &cam).unwrap();
        let cloud = mesh.sample_surface(6000, 11).unwrap();
        let full = lift_contour_points(&cloud, q, &cam, &sil, usize::MAX, 0).unwrap();
        assert!(full.points.len() > 50);
        let capped = lift_contour_points(&cloud, q, &cam, &sil, 50, 123).unwrap();
        assert_eq!(capped.points.len(), 50);
        assert_eq!(capped, lift_contour_points(&cloud, q, &cam, &sil, 50, 123).unwrap());
        for p in &capped.points {
            assert!(full.points.contains(p));
        }
    }

    #[test]
    fn lift_with_no_qualifying_points_fails() {
        let cam = cam();
        let sil = render_silhouette(&TriangleMesh::cube(), UnitQuaternion::identity(), &cam).unwrap();
        // A tiny cube deep inside the silhouette: every projection is interior.
        let mut tiny = TriangleMesh::cube();
        for v in &mut tiny.vertices {
            *v = *v * 0.05;
        }
        let cloud = tiny.sample_surface(500, 4).unwrap();
        assert!(matches!(
            lift_contour_points(&cloud, UnitQuaternion::identity(), &cam, &sil, 100, 0),
            Err(RasterError::NoContourPoints)
        ));
    }

    #[test]
    fn pgm_round_trip_and_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sil.pgm");
        let cam = cam();
        let sil = render_silhouette(&TriangleMesh::cube(), UnitQuaternion::identity(), &cam).unwrap();
        sil.save_pgm(&path).unwrap();
        assert_eq!(Silhouette::load_pgm(&path).unwrap(), sil);
        // 127 reads as background, 128 as foreground.
        let gray = dir.path().join("gray.pgm");
        std::fs::write(&gray, [b"P5\n2 1\n255\n".to_vec(), vec![127, 128]].concat()).unwrap();
        assert_eq!(Silhouette::load_pgm(&gray).unwrap().mask, vec![0, 1]);
    }
}
