//! Losses for scoring a predicted relative rotation against a reference.
//!
//! Two complementary terms: an angular loss measuring pure rotational
//! deviation, and a contour loss measuring how far reference contour points
//! reproject from the silhouette outline when the predicted rotation
//! replaces the true one. The blended pose loss is their convex combination
//! (default 0.1 angular / 0.9 contour): the contour term carries most of
//! the signal but is blind to rotations that preserve the silhouette, which
//! the angular term penalizes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraModel, GeometryError, UnitQuaternion};
use crate::raster::{ContourPointSet, DistanceField};

#[derive(Debug, Error)]
pub enum LossError {
    /// Weights must be non-negative and sum to 1.
    #[error("invalid loss weights: alpha {alpha}, beta {beta}")]
    InvalidWeights { alpha: f64, beta: f64 },
    #[error("contour point set is empty")]
    EmptyContourSet,
    /// A reprojected contour point fell on or behind the camera plane.
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Convex blend weights for [`pose_loss`]: `alpha` on the angular term,
/// `beta` on the contour term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<LossWeights, LossError> {
        if alpha < 0.0 || beta < 0.0 || (alpha + beta - 1.0).abs() > 1e-9 {
            return Err(LossError::InvalidWeights { alpha, beta });
        }
        Ok(LossWeights { alpha, beta })
    }
}

impl Default for LossWeights {
    fn default() -> LossWeights {
        LossWeights { alpha: 0.1, beta: 0.9 }
    }
}

/// Angular deviation between the reference rotation `q_star` and the
/// prediction `q_tilde`: `1 - |Re(q_star * q_tilde^-1)|`, with the product
/// re-normalized. Zero iff both encode the same rotation (either sign),
/// growing to 1 at a half-turn; equals `1 - cos(theta / 2)` for geodesic
/// angle `theta`.
pub fn angular_loss(q_star: UnitQuaternion, q_tilde: UnitQuaternion) -> f64 {
    1.0 - q_star.multiply(q_tilde.conjugate()).w.abs()
}

/// Contour loss of a predicted relative rotation `q_tilde` against the
/// reference `q_star`, evaluated on lifted contour points `points` (camera
/// frame of the target view) against the target's contour distance field.
///
/// Each point is carried back through the reference rotation and forward
/// through the prediction — translation removed and restored around the
/// conjugation — then projected, and the distance field is sampled
/// bilinearly there. With `normalize` the distances are averaged rather
/// than summed, making values comparable across contour densities.
pub fn contour_loss(
    q_tilde: UnitQuaternion,
    q_star: UnitQuaternion,
    field: &DistanceField,
    points: &ContourPointSet,
    cam: &CameraModel,
    normalize: bool,
) -> Result<f64, LossError> {
    if points.points.is_empty() {
        return Err(LossError::EmptyContourSet);
    }
    let back = q_star.conjugate();
    let mut sum = 0.0;
    for &v in &points.points {
        let p = q_tilde.rotate_point(back.rotate_point(v - cam.translation)) + cam.translation;
        let (u, vpx) = cam.project(p)?;
        sum += field.sample_bilinear(u, vpx);
    }
    if normalize {
        sum /= points.points.len() as f64;
    }
    Ok(sum)
}

/// Blended pose-evaluation loss: `alpha * angular + beta * contour`, the
/// contour term mean-normalized.
pub fn pose_loss(
    q_tilde: UnitQuaternion,
    q_star: UnitQuaternion,
    field: &DistanceField,
    points: &ContourPointSet,
    cam: &CameraModel,
    weights: LossWeights,
) -> Result<f64, LossError> {
    let contour = contour_loss(q_tilde, q_star, field, points, cam, true)?;
    Ok(weights.alpha * angular_loss(q_star, q_tilde) + weights.beta * contour)
}
