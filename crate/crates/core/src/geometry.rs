//! Rotation and camera primitives shared by every stage of the pipeline.
//!
//! Rotations are unit quaternions in scalar-first `(w, x, y, z)` layout.
//! `q` and `-q` encode the same rotation (the double cover), so every
//! comparison goes through [`UnitQuaternion::geodesic_angle`], which is
//! sign-insensitive. Cameras are pinhole models with square pixels; view
//! poses share a single fixed translation, so only rotations vary.

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Depth threshold below which a point is considered to be on or behind the
/// camera plane and cannot be projected.
pub const MIN_DEPTH: f64 = 1e-6;

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// Point is on or behind the camera plane (`z <= MIN_DEPTH`).
    #[error("cannot project point with depth {z} (minimum {MIN_DEPTH})")]
    DegenerateDepth { z: f64 },
    /// Azimuth outside `[0, 360)` or elevation outside `[-90, 90]`.
    #[error("view rotation out of range: azimuth {azimuth_deg}, elevation {elevation_deg}")]
    InvalidViewRotation { azimuth_deg: f64, elevation_deg: f64 },
    /// Quaternion or axis with near-zero norm.
    #[error("vector norm {norm} too small to normalize")]
    ZeroNorm { norm: f64 },
}

/// Plain 3-vector. Serializes as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3 { x, y, z }
    }

    pub fn dot(self, rhs: Vec3) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn cross(self, rhs: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * rhs.z - self.z * rhs.y,
            y: self.z * rhs.x - self.x * rhs.z,
            z: self.x * rhs.y - self.y * rhs.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or an error for near-zero input.
    pub fn normalized(self) -> Result<Vec3, GeometryError> {
        let n = self.norm();
        if n < MIN_NORM {
            return Err(GeometryError::ZeroNorm { norm: n });
        }
        Ok(self * (1.0 / n))
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}

/// Unit quaternion in scalar-first layout. Serializes as `[w, x, y, z]` and
/// is re-normalized when read back, so stored poses stay unit-length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn identity() -> UnitQuaternion {
        Self::IDENTITY
    }

    /// Builds a unit quaternion from raw components, normalizing them.
    pub fn from_components(w: f64, x: f64, y: f64, z: f64) -> Result<UnitQuaternion, GeometryError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if norm < MIN_NORM {
            return Err(GeometryError::ZeroNorm { norm });
        }
        let s = 1.0 / norm;
        Ok(UnitQuaternion { w: w * s, x: x * s, y: y * s, z: z * s })
    }

    /// Rotation of `angle_rad` about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle_rad: f64) -> Result<UnitQuaternion, GeometryError> {
        let u = axis.normalized()?;
        let (s, c) = (0.5 * angle_rad).sin_cos();
        Ok(UnitQuaternion { w: c, x: u.x * s, y: u.y * s, z: u.z * s })
    }

    /// Hamilton product `self * rhs` (apply `rhs` first, then `self`),
    /// re-normalized so long chains cannot drift off the unit sphere.
    pub fn multiply(self, rhs: UnitQuaternion) -> UnitQuaternion {
        let (a, b) = (self, rhs);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        let s = 1.0 / (w * w + x * x + y * y + z * z).sqrt();
        UnitQuaternion { w: w * s, x: x * s, y: y * s, z: z * s }
    }

    /// Conjugate; equals the inverse for unit quaternions.
    pub fn conjugate(self) -> UnitQuaternion {
        UnitQuaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn dot(self, rhs: UnitQuaternion) -> f64 {
        self.w * rhs.w + self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    /// Rotates a point: the vector part of `q p q^-1`. The expansion used
    /// here makes the identity quaternion an exact no-op.
    pub fn rotate_point(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Equivalent rotation matrix. `q` and `-q` map to the same matrix.
    pub fn to_matrix(self) -> RotationMatrix {
        let UnitQuaternion { w, x, y, z } = self;
        RotationMatrix {
            m: [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ],
        }
    }

    /// Geodesic distance in radians, in `[0, pi]`, insensitive to the sign
    /// of either argument: `2 * acos(|Re(a * b^-1)|)`, where the real part
    /// of the product reduces to the component dot product.
    pub fn geodesic_angle(self, rhs: UnitQuaternion) -> f64 {
        2.0 * self.dot(rhs).abs().clamp(0.0, 1.0).acos()
    }

    /// Uniform random rotation (Shoemake's subgroup algorithm).
    pub fn random_uniform<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let u3: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        UnitQuaternion { w: b * u3.cos(), x: a * u2.sin(), y: a * u2.cos(), z: b * u3.sin() }
    }

    /// Random rotation with axis uniform on the sphere and angle uniform in
    /// `[0, max_angle_rad]`. Used as the pose-noise model.
    pub fn random_within_angle<R: Rng + ?Sized>(rng: &mut R, max_angle_rad: f64) -> UnitQuaternion {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let axis = Vec3::new(r * phi.cos(), r * phi.sin(), z);
        let angle = rng.gen::<f64>() * max_angle_rad;
        let (s, c) = (0.5 * angle).sin_cos();
        UnitQuaternion { w: c, x: axis.x * s, y: axis.y * s, z: axis.z * s }
    }
}

impl std::ops::Neg for UnitQuaternion {
    type Output = UnitQuaternion;
    fn neg(self) -> UnitQuaternion {
        UnitQuaternion { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.w, self.x, self.y, self.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<UnitQuaternion, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        UnitQuaternion::from_components(w, x, y, z)
            .map_err(|e| D::Error::custom(format!("invalid quaternion: {e}")))
    }
}

/// Row-major 3x3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix {
    pub m: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    pub fn multiply(self, rhs: RotationMatrix) -> RotationMatrix {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[r][0] * rhs.m[0][c] + self.m[r][1] * rhs.m[1][c] + self.m[r][2] * rhs.m[2][c];
            }
        }
        RotationMatrix { m: out }
    }

    /// Transpose; the inverse for rotation matrices.
    pub fn transpose(self) -> RotationMatrix {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[c][r];
            }
        }
        RotationMatrix { m: out }
    }

    pub fn mul_vec(self, v: Vec3) -> Vec3 {
        Vec3 {
            x: self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            y: self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            z: self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        }
    }
}

/// View pose on the orbit sphere: azimuth in `[0, 360)` degrees, elevation
/// in `[-90, 90]` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewRotation {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl ViewRotation {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<ViewRotation, GeometryError> {
        if !(0.0..360.0).contains(&azimuth_deg) || !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(GeometryError::InvalidViewRotation { azimuth_deg, elevation_deg });
        }
        Ok(ViewRotation { azimuth_deg, elevation_deg })
    }

    /// Object-to-camera rotation: azimuth about the y axis applied first,
    /// then elevation about the x axis.
    pub fn to_quat(self) -> UnitQuaternion {
        let az = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), self.azimuth_deg.to_radians())
            .expect("fixed axis");
        let el = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), self.elevation_deg.to_radians())
            .expect("fixed axis");
        el.multiply(az)
    }
}

/// Pinhole camera with square pixels. All views share one translation
/// `t` applied after rotation: `p_cam = R(q) p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Focal length in pixels.
    pub focal_px: f64,
    /// Image width in pixels.
    pub width: usize,
    /// Image height in pixels.
    pub height: usize,
    /// Principal point (u, v) in pixels.
    pub cx: f64,
    pub cy: f64,
    /// Translation from object frame to camera frame.
    pub translation: Vec3,
}

impl CameraModel {
    /// Camera with the principal point at the image center and the default
    /// object distance of 2.2 along +z.
    pub fn with_resolution(width: usize, height: usize, focal_px: f64) -> CameraModel {
        CameraModel {
            focal_px,
            width,
            height,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            translation: Vec3::new(0.0, 0.0, 2.2),
        }
    }

    /// Perspective projection of a camera-frame point (rotation and
    /// translation already applied by the caller) to pixel coordinates
    /// `(u, v)`; `u` grows to the right, `v` downward.
    pub fn project(&self, p: Vec3) -> Result<(f64, f64), GeometryError> {
        if p.z <= MIN_DEPTH {
            return Err(GeometryError::DegenerateDepth { z: p.z });
        }
        let u = self.focal_px * p.x / p.z + self.cx;
        let v = self.focal_px * p.y / p.z + self.cy;
        Ok((u, v))
    }

    /// Camera-frame point projecting to `(u, v)` at the given depth.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new((u - self.cx) * depth / self.focal_px, (v - self.cy) * depth / self.focal_px, depth)
    }

    /// Transforms an object-frame point into this camera's frame.
    pub fn camera_point(&self, rotation: UnitQuaternion, p: Vec3) -> Vec3 {
        rotation.rotate_point(p) + self.translation
    }
}

impl Default for CameraModel {
    fn default() -> CameraModel {
        CameraModel::with_resolution(128, 128, 140.0)
    }
}
