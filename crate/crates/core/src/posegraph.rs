//! Relative-pose graphs and their rectification into absolute rotations.
//!
//! Pairwise rotation predictions are independent, so they are generally
//! inconsistent: chaining view 1 -> 2 -> 3 disagrees with the direct
//! 1 -> 3 prediction. Rectification restores consistency by estimating one
//! absolute rotation per view (view 1 pinned to the identity as gauge) that
//! minimizes the summed squared Frobenius distance between every predicted
//! relative rotation matrix and the one induced by the absolutes:
//!
//! `sum over ordered pairs (i, j) of ||R(q_j) R(q_i)^T - R(q_ij)||_F^2`
//!
//! Matrix differences sidestep the quaternion double cover (`q` and `-q`
//! give the same matrix). The solver is Levenberg-Marquardt over a 3-dof
//! tangent parameterization per free view with analytic Jacobians; the
//! damped normal equations are solved by dense Cholesky.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RotationMatrix, UnitQuaternion, Vec3};

#[derive(Debug, Error)]
pub enum PoseGraphError {
    #[error("a pose graph needs at least 2 views, got {n}")]
    TooFewViews { n: usize },
    #[error("edge ({i}, {j}) is invalid for {n} views (indices are 1-based, i != j)")]
    InvalidEdge { i: usize, j: usize, n: usize },
    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("incomplete graph, missing edges: {missing:?}")]
    IncompleteGraph { missing: Vec<(usize, usize)> },
    #[error("view index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {a} predicted vs {b} reference rotations")]
    LengthMismatch { a: usize, b: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Complete directed graph of predicted relative rotations: one entry per
/// ordered pair of distinct views. View indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePoseGraph {
    n_views: usize,
    edges: BTreeMap<(usize, usize), UnitQuaternion>,
}

impl RelativePoseGraph {
    /// Builds a graph from per-edge predictions, requiring exactly one
    /// prediction for every ordered pair of distinct views.
    pub fn from_edges(
        n_views: usize,
        predictions: impl IntoIterator<Item = (usize, usize, UnitQuaternion)>,
    ) -> Result<RelativePoseGraph, PoseGraphError> {
        if n_views < 2 {
            return Err(PoseGraphError::TooFewViews { n: n_views });
        }
        let mut edges = BTreeMap::new();
        for (i, j, q) in predictions {
            if i == j || i == 0 || j == 0 || i > n_views || j > n_views {
                return Err(PoseGraphError::InvalidEdge { i, j, n: n_views });
            }
            if edges.insert((i, j), q).is_some() {
                return Err(PoseGraphError::DuplicateEdge { i, j });
            }
        }
        let mut missing = Vec::new();
        for i in 1..=n_views {
            for j in 1..=n_views {
                if i != j && !edges.contains_key(&(i, j)) {
                    missing.push((i, j));
                }
            }
        }
        if !missing.is_empty() {
            return Err(PoseGraphError::IncompleteGraph { missing });
        }
        Ok(RelativePoseGraph { n_views, edges })
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    /// Predicted rotation for the ordered pair `(i, j)`.
    pub fn edge(&self, i: usize, j: usize) -> Option<UnitQuaternion> {
        self.edges.get(&(i, j)).copied()
    }

    /// Edges in deterministic `(i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, UnitQuaternion)> + '_ {
        self.edges.iter().map(|(&(i, j), &q)| (i, j, q))
    }

    pub fn load_json(path: &Path) -> Result<RelativePoseGraph, PoseGraphError> {
        let text = std::fs::read_to_string(path)?;
        let raw: GraphJson = serde_json::from_str(&text)?;
        RelativePoseGraph::from_edges(raw.n_views, raw.edges.into_iter().map(|e| (e.i, e.j, e.q)))
    }

    pub fn save_json(&self, path: &Path) -> Result<(), PoseGraphError> {
        let raw = GraphJson {
            n_views: self.n_views,
            edges: self.iter().map(|(i, j, q)| EdgeJson { i, j, q }).collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&raw)? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n_views: usize,
    edges: Vec<EdgeJson>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    i: usize,
    j: usize,
    q: UnitQuaternion,
}

/// Absolute rotations per view (view 1 is the identity gauge) with the
/// final objective value and the number of accepted solver steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsolutePoseSet {
    pub rotations: Vec<UnitQuaternion>,
    pub residual: f64,
    pub iterations: usize,
}

impl AbsolutePoseSet {
    pub fn load_json(path: &Path) -> Result<AbsolutePoseSet, PoseGraphError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), PoseGraphError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Levenberg-Marquardt controls for [`rectify`].
#[derive(Debug, Clone, Copy)]
pub struct RectifyOptions {
    /// Upper bound on accepted linearization steps.
    pub max_iterations: usize,
    /// Stop once the relative objective decrease of an accepted step drops
    /// to this value or below.
    pub tolerance: f64,
    /// Initial damping; grows 10x on every rejected step and halves on
    /// every accepted one.
    pub initial_damping: f64,
}

impl Default for RectifyOptions {
    fn default() -> RectifyOptions {
        RectifyOptions { max_iterations: 100, tolerance: 1e-12, initial_damping: 1e-4 }
    }
}

/// Objective trace: value at initialization, then after every accepted
/// step. Non-increasing by construction.
#[derive(Debug, Clone)]
pub struct RectifyTrace {
    pub objectives: Vec<f64>,
}

/// Objective below which the solution is treated as exact; guards against
/// churning on a noise-free graph whose initialization is already optimal.
const OBJECTIVE_FLOOR: f64 = 1e-24;
const MAX_DAMPING: f64 = 1e32;

/// Star initialization: view 1 is the identity, every other view takes its
/// direct prediction from view 1.
pub fn initialize_absolute(graph: &RelativePoseGraph) -> AbsolutePoseSet {
    let mut rotations = vec![UnitQuaternion::identity()];
    for j in 2..=graph.n_views() {
        rotations.push(graph.edge(1, j).expect("graph is complete"));
    }
    let residual = objective(graph, &rotations);
    AbsolutePoseSet { rotations, residual, iterations: 0 }
}

/// Summed squared Frobenius distance between every predicted relative
/// rotation matrix and the one induced by `rotations`.
pub fn objective(graph: &RelativePoseGraph, rotations: &[UnitQuaternion]) -> f64 {
    let mats: Vec<RotationMatrix> = rotations.iter().map(|q| q.to_matrix()).collect();
    let mut sum = 0.0;
    for (i, j, q) in graph.iter() {
        let induced = mats[j - 1].multiply(mats[i - 1].transpose());
        let target = q.to_matrix();
        for r in 0..3 {
            for c in 0..3 {
                let d = induced.m[r][c] - target.m[r][c];
                sum += d * d;
            }
        }
    }
    sum
}

/// Residual vector: 9 row-major entries of `R(q_j) R(q_i)^T - R(q_ij)` per
/// edge, edges in graph order.
pub fn residuals(graph: &RelativePoseGraph, rotations: &[UnitQuaternion]) -> DVector<f64> {
    let mats: Vec<RotationMatrix> = rotations.iter().map(|q| q.to_matrix()).collect();
    let mut r = DVector::zeros(9 * graph.edges.len());
    for (e, (i, j, q)) in graph.iter().enumerate() {
        let induced = mats[j - 1].multiply(mats[i - 1].transpose());
        let target = q.to_matrix();
        for row in 0..3 {
            for col in 0..3 {
                r[9 * e + 3 * row + col] = induced.m[row][col] - target.m[row][col];
            }
        }
    }
    r
}

/// Analytic Jacobian of [`residuals`] with respect to the tangent
/// parameters of views `2..=n` (3 per view, in view order), evaluated at
/// zero tangent step. For `A = R_j R_i^T`, perturbing view `j` by `delta`
/// gives `[delta]x A` and view `i` gives `-A [delta]x`, so column `k` is
/// the flattening of `[e_k]x A` (for `j`) or `-A [e_k]x` (for `i`).
pub fn jacobian(graph: &RelativePoseGraph, rotations: &[UnitQuaternion]) -> DMatrix<f64> {
    let mats: Vec<RotationMatrix> = rotations.iter().map(|q| q.to_matrix()).collect();
    let n = graph.n_views();
    let mut jac = DMatrix::zeros(9 * graph.edges.len(), 3 * (n - 1));
    for (e, (i, j, _)) in graph.iter().enumerate() {
        let a = mats[j - 1].multiply(mats[i - 1].transpose()).m;
        // d/d(delta_j)[k]: rows of [e_k]x A.
        if j >= 2 {
            let base = 3 * (j - 2);
            for c in 0..3 {
                // k = 0: row1 = -A.row2, row2 = A.row1
                jac[(9 * e + 3 + c, base)] = -a[2][c];
                jac[(9 * e + 6 + c, base)] = a[1][c];
                // k = 1: row0 = A.row2, row2 = -A.row0
                jac[(9 * e + c, base + 1)] = a[2][c];
                jac[(9 * e + 6 + c, base + 1)] = -a[0][c];
                // k = 2: row0 = -A.row1, row1 = A.row0
                jac[(9 * e + c, base + 2)] = -a[1][c];
                jac[(9 * e + 3 + c, base + 2)] = a[0][c];
            }
        }
        // d/d(delta_i)[k]: columns of -A [e_k]x.
        if i >= 2 {
            let base = 3 * (i - 2);
            for r in 0..3 {
                // k = 0: col1 = A.col2, col2 = -A.col1 (negated overall)
                jac[(9 * e + 3 * r + 1, base)] += -a[r][2];
                jac[(9 * e + 3 * r + 2, base)] += a[r][1];
                // k = 1: col0 = -A.col2, col2 = A.col0
                jac[(9 * e + 3 * r, base + 1)] += a[r][2];
                jac[(9 * e + 3 * r + 2, base + 1)] += -a[r][0];
                // k = 2: col0 = A.col1, col1 = -A.col0
                jac[(9 * e + 3 * r, base + 2)] += -a[r][1];
                jac[(9 * e + 3 * r + 1, base + 2)] += a[r][0];
            }
        }
    }
    jac
}

/// Exponential map from a tangent vector to a unit quaternion.
fn exp_map(delta: Vec3) -> UnitQuaternion {
    let angle = delta.norm();
    let (s, c) = (0.5 * angle).sin_cos();
    let k = if angle < 1e-9 { 0.5 } else { s / angle };
    UnitQuaternion { w: c, x: delta.x * k, y: delta.y * k, z: delta.z * k }
}

/// Applies a tangent step to every free view (views `2..=n`, 3 entries
/// each): `q_v <- exp(delta_v) * q_v`. View 1 stays pinned.
pub fn retract(rotations: &[UnitQuaternion], step: &DVector<f64>) -> Vec<UnitQuaternion> {
    assert_eq!(step.len(), 3 * (rotations.len() - 1), "one 3-vector per free view");
    let mut out = Vec::with_capacity(rotations.len());
    out.push(rotations[0]);
    for (v, &q) in rotations.iter().enumerate().skip(1) {
        let b = 3 * (v - 1);
        out.push(exp_map(Vec3::new(step[b], step[b + 1], step[b + 2])).multiply(q));
    }
    out
}

/// Rectifies a noisy relative-pose graph into consistent absolute
/// rotations. See [`rectify_detailed`] for the objective trace.
pub fn rectify(graph: &RelativePoseGraph, options: RectifyOptions) -> AbsolutePoseSet {
    rectify_detailed(graph, options).0
}

/// Levenberg-Marquardt rectification, also returning the objective value
/// at initialization and after every accepted step. Terminates on the
/// relative-decrease tolerance, `max_iterations`, damping overflow, or an
/// effectively-zero objective.
pub fn rectify_detailed(
    graph: &RelativePoseGraph,
    options: RectifyOptions,
) -> (AbsolutePoseSet, RectifyTrace) {
    let mut state = initialize_absolute(graph).rotations;
    let mut f = objective(graph, &state);
    let mut objectives = vec![f];
    let mut lambda = options.initial_damping;
    let mut iterations = 0usize;
    if f >= OBJECTIVE_FLOOR {
        'outer: for _ in 0..options.max_iterations {
            let r = residuals(graph, &state);
            let jac = jacobian(graph, &state);
            let grad = jac.transpose() * &r;
            let hess = jac.transpose() * &jac;
            loop {
                let mut damped = hess.clone();
                for d in 0..damped.nrows() {
                    damped[(d, d)] += lambda;
                }
                let step = match Cholesky::new(damped) {
                    Some(chol) => chol.solve(&(-&grad)),
                    None => {
                        lambda *= 10.0;
                        if lambda > MAX_DAMPING {
                            break 'outer;
                        }
                        continue;
                    }
                };
                let candidate = retract(&state, &step);
                let f_new = objective(graph, &candidate);
                if f_new.is_finite() && f_new <= f {
                    let decrease = f - f_new;
                    state = candidate;
                    f = f_new;
                    iterations += 1;
                    objectives.push(f);
                    lambda *= 0.5;
                    if f < OBJECTIVE_FLOOR || decrease <= options.tolerance * f.max(OBJECTIVE_FLOOR) {
                        break 'outer;
                    }
                    break;
                }
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    break 'outer;
                }
            }
        }
    }
    (AbsolutePoseSet { rotations: state, residual: f, iterations }, RectifyTrace { objectives })
}

/// Relative rotation induced by a rectified pose set: `q_j * q_i^-1`.
/// Indices are 1-based; `(i, i)` yields the identity exactly.
pub fn relative_from_absolute(
    poses: &AbsolutePoseSet,
    i: usize,
    j: usize,
) -> Result<UnitQuaternion, PoseGraphError> {
    let n = poses.rotations.len();
    for index in [i, j] {
        if index == 0 || index > n {
            return Err(PoseGraphError::IndexOutOfRange { index, n });
        }
    }
    Ok(poses.rotations[j - 1].multiply(poses.rotations[i - 1].conjugate()))
}

/// Accuracy (fraction of errors strictly below the threshold) and lower
/// median of geodesic errors, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseMetrics {
    pub accuracy: f64,
    pub median_deg: f64,
}

/// Compares predicted rotations to references pairwise by geodesic angle.
pub fn pose_metrics(
    predicted: &[UnitQuaternion],
    reference: &[UnitQuaternion],
    threshold_deg: f64,
) -> Result<PoseMetrics, PoseGraphError> {
    if predicted.is_empty() {
        return Err(PoseGraphError::EmptyInput);
    }
    if predicted.len() != reference.len() {
        return Err(PoseGraphError::LengthMismatch { a: predicted.len(), b: reference.len() });
    }
    let mut errors: Vec<f64> = predicted
        .iter()
        .zip(reference)
        .map(|(p, r)| p.geodesic_angle(*r).to_degrees())
        .collect();
    let hits = errors.iter().filter(|&&e| e < threshold_deg).count();
    errors.sort_by(|a, b| a.partial_cmp(b).expect("geodesic angles are finite"));
    Ok(PoseMetrics {
        accuracy: hits as f64 / errors.len() as f64,
        median_deg: errors[(errors.len() - 1) / 2],
    })
}
