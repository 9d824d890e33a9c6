//! Weighted silhouette carving into a voxel occupancy grid.
//!
//! Every voxel centroid is rotated into each view, projected, and looked up
//! in that view's silhouette at the nearest pixel (out-of-frustum lookups
//! read background). The occupancy value is the weighted fraction of views
//! that see the voxel as foreground; the reference view may carry a larger
//! weight than the rest. Thresholding yields a binary grid, optionally
//! tidied by a morphological closing and a largest-component filter.

use std::collections::VecDeque;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CameraModel, UnitQuaternion, Vec3, MIN_DEPTH};
use crate::raster::Silhouette;

#[derive(Debug, Error)]
pub enum CarveError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad voxel grid file: {0}")]
    BadFormat(String),
    #[error("{silhouettes} silhouettes, {rotations} rotations, {weights} weights")]
    LengthMismatch { silhouettes: usize, rotations: usize, weights: usize },
    #[error("silhouette is {got_w}x{got_h} but the camera expects {want_w}x{want_h}")]
    SizeMismatch { got_w: usize, got_h: usize, want_w: usize, want_h: usize },
    #[error("invalid weights for {n} views with reference weight {w1}")]
    InvalidWeight { n: usize, w1: f64 },
    #[error("binarization threshold {tau} outside (0, 1)")]
    InvalidThreshold { tau: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("at least one view is required")]
    EmptyViews,
}

/// Cubic voxel grid layout: `resolution^3` voxels covering an axis-aligned
/// cube of side `extent` centered on `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub center: Vec3,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(resolution: usize, center: Vec3, extent: f64) -> Result<GridSpec, CarveError> {
        let spec = GridSpec { resolution, center, extent };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CarveError> {
        if self.resolution < 2 {
            return Err(CarveError::InvalidGrid(format!("resolution {} < 2", self.resolution)));
        }
        if self.extent <= 0.0 || !self.extent.is_finite() {
            return Err(CarveError::InvalidGrid(format!("extent {}", self.extent)));
        }
        if ![self.center.x, self.center.y, self.center.z].iter().all(|c| c.is_finite()) {
            return Err(CarveError::InvalidGrid("non-finite center".into()));
        }
        Ok(())
    }

    pub fn voxel_size(&self) -> f64 {
        self.extent / self.resolution as f64
    }

    pub fn n_voxels(&self) -> usize {
        self.resolution * self.resolution * self.resolution
    }

    /// Flat index; x varies fastest, then y, then z.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.resolution + iy) * self.resolution + ix
    }

    /// World-space center of voxel `(ix, iy, iz)`.
    pub fn centroid(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        let v = self.voxel_size();
        let half = 0.5 * self.extent;
        Vec3::new(
            self.center.x - half + (ix as f64 + 0.5) * v,
            self.center.y - half + (iy as f64 + 0.5) * v,
            self.center.z - half + (iz as f64 + 0.5) * v,
        )
    }
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec { resolution: 32, center: Vec3::ZERO, extent: 1.1 }
    }
}

/// Per-view carving weights: the reference view gets `w1`, the remaining
/// weight is split evenly. Sums to 1 and never favors a non-reference view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights {
    pub weights: Vec<f64>,
}

impl ViewWeights {
    /// `n = 1` ignores `w1` (the only view gets weight 1). Otherwise `w1`
    /// must lie in `(0, 1)` and be at least `1/n` so the reference view is
    /// weighted no less than the others.
    pub fn make_weights(n: usize, w1: f64) -> Result<ViewWeights, CarveError> {
        if n == 0 {
            return Err(CarveError::EmptyViews);
        }
        if n == 1 {
            return Ok(ViewWeights { weights: vec![1.0] });
        }
        if !(w1 > 0.0 && w1 < 1.0) || w1 < 1.0 / n as f64 {
            return Err(CarveError::InvalidWeight { n, w1 });
        }
        let tail = (1.0 - w1) / (n - 1) as f64;
        let mut weights = vec![tail; n];
        weights[0] = w1;
        Ok(ViewWeights { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Soft occupancy values in `[0, 1]`, one per voxel, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

/// Hard occupancy bits (0/1), one per voxel, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    pub spec: GridSpec,
    pub bits: Vec<u8>,
}

impl BinaryGrid {
    pub fn count_occupied(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }
}

/// Carves an occupancy grid from silhouettes and their per-view absolute
/// rotations. A voxel's value is the weighted mean of the silhouette bits
/// at its projections; projections outside the image (or behind a camera)
/// read as background.
pub fn build_occupancy(
    silhouettes: &[Silhouette],
    rotations: &[UnitQuaternion],
    cam: &CameraModel,
    spec: GridSpec,
    weights: &ViewWeights,
) -> Result<OccupancyGrid, CarveError> {
    spec.validate()?;
    if silhouettes.is_empty() {
        return Err(CarveError::EmptyViews);
    }
    if silhouettes.len() != rotations.len() || silhouettes.len() != weights.len() {
        return Err(CarveError::LengthMismatch {
            silhouettes: silhouettes.len(),
            rotations: rotations.len(),
            weights: weights.len(),
        });
    }
    for sil in silhouettes {
        if sil.width != cam.width || sil.height != cam.height {
            return Err(CarveError::SizeMismatch {
                got_w: sil.width,
                got_h: sil.height,
                want_w: cam.width,
                want_h: cam.height,
            });
        }
    }
    let weight_sum: f64 = weights.weights.iter().sum();
    let res = spec.resolution;
    let mut values = vec![0.0f64; spec.n_voxels()];
    // One z-slice per task: voxels are independent, so the result does not
    // depend on the thread count.
    values
        .par_chunks_mut(res * res)
        .enumerate()
        .for_each(|(iz, slice)| {
            for iy in 0..res {
                for ix in 0..res {
                    let p = spec.centroid(ix, iy, iz);
                    let mut acc = 0.0;
                    for (view, &q) in rotations.iter().enumerate() {
                        let c = cam.camera_point(q, p);
                        if c.z <= MIN_DEPTH {
                            continue;
                        }
                        let (u, v) = cam.project(c).expect("depth checked");
                        let (col, row) = (u.round(), v.round());
                        if col < 0.0
                            || row < 0.0
                            || col > (cam.width - 1) as f64
                            || row > (cam.height - 1) as f64
                        {
                            continue;
                        }
                        if silhouettes[view].get(row as usize, col as usize) != 0 {
                            acc += weights.weights[view];
                        }
                    }
                    slice[iy * res + ix] = acc / weight_sum;
                }
            }
        });
    Ok(OccupancyGrid { spec, values })
}

/// Thresholds soft occupancy into bits: occupied iff `value >= tau`.
pub fn binarize(grid: &OccupancyGrid, tau: f64) -> Result<BinaryGrid, CarveError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(CarveError::InvalidThreshold { tau });
    }
    let bits = grid.values.iter().map(|&v| u8::from(v >= tau)).collect();
    Ok(BinaryGrid { spec: grid.spec, bits })
}

/// Morphological cleanup: a radius-1 6-connected closing (fills pinholes
/// and hairline cracks; voxels beyond the grid count as background for
/// dilation and foreground for erosion, so the closing never shrinks the
/// input), then keeps only the largest 6-connected component.
pub fn cleanup(grid: &BinaryGrid) -> BinaryGrid {
    let closed = erode(&dilate(grid));
    largest_component(&closed)
}

const NEIGHBORS: [(i64, i64, i64); 6] =
    [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)];

fn neighbor_index(spec: &GridSpec, ix: usize, iy: usize, iz: usize, d: (i64, i64, i64)) -> Option<usize> {
    let r = spec.resolution as i64;
    let (nx, ny, nz) = (ix as i64 + d.0, iy as i64 + d.1, iz as i64 + d.2);
    if nx < 0 || ny < 0 || nz < 0 || nx >= r || ny >= r || nz >= r {
        return None;
    }
    Some(spec.index(nx as usize, ny as usize, nz as usize))
}

fn dilate(grid: &BinaryGrid) -> BinaryGrid {
    let spec = grid.spec;
    let res = spec.resolution;
    let mut bits = grid.bits.clone();
    for iz in 0..res {
        for iy in 0..res {
            for ix in 0..res {
                if grid.bits[spec.index(ix, iy, iz)] != 0 {
                    continue;
                }
                let touched = NEIGHBORS.iter().any(|&d| {
                    neighbor_index(&spec, ix, iy, iz, d).is_some_and(|n| grid.bits[n] != 0)
                });
                if touched {
                    bits[spec.index(ix, iy, iz)] = 1;
                }
            }
        }
    }
    BinaryGrid { spec, bits }
}

fn erode(grid: &BinaryGrid) -> BinaryGrid {
    let spec = grid.spec;
    let res = spec.resolution;
    let mut bits = grid.bits.clone();
    for iz in 0..res {
        for iy in 0..res {
            for ix in 0..res {
                if grid.bits[spec.index(ix, iy, iz)] == 0 {
                    continue;
                }
                let hollow = NEIGHBORS.iter().any(|&d| {
                    neighbor_index(&spec, ix, iy, iz, d).is_some_and(|n| grid.bits[n] == 0)
                });
                if hollow {
                    bits[spec.index(ix, iy, iz)] = 0;
                }
            }
        }
    }
    BinaryGrid { spec, bits }
}

/// Keeps the largest 6-connected foreground component (first in scan order
/// on ties). An empty grid stays empty.
fn largest_component(grid: &BinaryGrid) -> BinaryGrid {
    let spec = grid.spec;
    let res = spec.resolution;
    let mut label = vec![0u32; grid.bits.len()]; // 0 = unvisited / background
    let mut best: (usize, u32) = (0, 0); // (size, label)
    let mut next = 1u32;
    let mut queue = VecDeque::new();
    for iz in 0..res {
        for iy in 0..res {
            for ix in 0..res {
                let start = spec.index(ix, iy, iz);
                if grid.bits[start] == 0 || label[start] != 0 {
                    continue;
                }
                let id = next;
                next += 1;
                label[start] = id;
                queue.push_back((ix, iy, iz));
                let mut size = 0usize;
                while let Some((cx, cy, cz)) = queue.pop_front() {
                    size += 1;
                    for &d in &NEIGHBORS {
                        if let Some(n) = neighbor_index(&spec, cx, cy, cz, d) {
                            if grid.bits[n] != 0 && label[n] == 0 {
                                label[n] = id;
                                let r = spec.resolution;
                                queue.push_back((n % r, (n / r) % r, n / (r * r)));
                            }
                        }
                    }
                }
                if size > best.0 {
                    best = (size, id);
                }
            }
        }
    }
    let bits = label.iter().map(|&l| u8::from(l != 0 && l == best.1)).collect();
    BinaryGrid { spec, bits }
}

const VOXG_MAGIC: &str = "VOXG1";

fn write_voxg_header(w: &mut impl Write, spec: &GridSpec, kind: &str) -> std::io::Result<()> {
    write!(
        w,
        "{VOXG_MAGIC} {} {} {} {} {}\n{kind}\n",
        spec.resolution, spec.center.x, spec.center.y, spec.center.z, spec.extent
    )
}

fn read_voxg_header(data: &[u8]) -> Result<(GridSpec, String, usize), CarveError> {
    let mut pos = 0usize;
    let mut line = |data: &[u8]| -> Result<String, CarveError> {
        let start = pos;
        while pos < data.len() && data[pos] != b'\n' {
            pos += 1;
        }
        if pos == data.len() {
            return Err(CarveError::BadFormat("truncated header".into()));
        }
        pos += 1;
        Ok(String::from_utf8_lossy(&data[start..pos - 1]).into_owned())
    };
    let header = line(data)?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(VOXG_MAGIC) {
        return Err(CarveError::BadFormat(format!("bad magic in `{header}`")));
    }
    let mut num = |name: &str| -> Result<f64, CarveError> {
        tokens
            .next()
            .ok_or_else(|| CarveError::BadFormat(format!("missing {name}")))?
            .parse()
            .map_err(|e| CarveError::BadFormat(format!("{name}: {e}")))
    };
    let resolution = num("resolution")? as usize;
    let center = Vec3::new(num("center x")?, num("center y")?, num("center z")?);
    let extent = num("extent")?;
    let kind = line(data)?;
    let spec = GridSpec { resolution, center, extent };
    spec.validate()?;
    Ok((spec, kind, pos))
}

impl OccupancyGrid {
    /// Writes `VOXG1` with an `F32` payload: little-endian 32-bit floats,
    /// x-fastest. Values are rounded to f32 on disk.
    pub fn save_voxg(&self, path: &Path) -> Result<(), CarveError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        write_voxg_header(&mut w, &self.spec, "F32")?;
        for &v in &self.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_voxg(path: &Path) -> Result<OccupancyGrid, CarveError> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let (spec, kind, offset) = read_voxg_header(&data)?;
        if kind != "F32" {
            return Err(CarveError::BadFormat(format!("expected F32 payload, found {kind}")));
        }
        let body = &data[offset..];
        if body.len() != 4 * spec.n_voxels() {
            return Err(CarveError::BadFormat(format!(
                "expected {} payload bytes, found {}",
                4 * spec.n_voxels(),
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Ok(OccupancyGrid { spec, values })
    }
}

impl BinaryGrid {
    /// Writes `VOXG1` with a `BIT` payload: one bit per voxel, x-fastest,
    /// least-significant bit first within each byte.
    pub fn save_voxg(&self, path: &Path) -> Result<(), CarveError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        write_voxg_header(&mut w, &self.spec, "BIT")?;
        let mut packed = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b != 0 {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&packed)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_voxg(path: &Path) -> Result<BinaryGrid, CarveError> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let (spec, kind, offset) = read_voxg_header(&data)?;
        if kind != "BIT" {
            return Err(CarveError::BadFormat(format!("expected BIT payload, found {kind}")));
        }
        let body = &data[offset..];
        let expected = spec.n_voxels().div_ceil(8);
        if body.len() != expected {
            return Err(CarveError::BadFormat(format!(
                "expected {expected} payload bytes, found {}",
                body.len()
            )));
        }
        let bits = (0..spec.n_voxels())
            .map(|i| (body[i / 8] >> (i % 8)) & 1)
            .collect();
        Ok(BinaryGrid { spec, bits })
    }
}
