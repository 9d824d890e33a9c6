//! Silhouette-based multi-view shape reconstruction.
//!
//! The pipeline takes a set of object silhouettes with (possibly noisy)
//! relative camera rotations between the views, rectifies the rotations into
//! a consistent absolute pose set by minimising pairwise rotation-matrix
//! residuals, and carves a voxel occupancy grid by back-projecting every
//! voxel into every silhouette. Reconstruction quality is scored against a
//! solid voxelization of the ground-truth mesh (volumetric IoU, Chamfer
//! distance) and pose quality against the ground-truth rotations (angular
//! accuracy and median error).
//!
//! Modules follow the data flow:
//!
//! * [`geometry`] — quaternions, rotations, pinhole camera.
//! * [`mesh`] — triangle meshes, OBJ/XYZ I/O, surface sampling.
//! * [`raster`] — silhouette rendering, contours, distance transforms.
//! * [`losses`] — angular / contour / blended pose-evaluation losses.
//! * [`posegraph`] — relative-pose graphs and rectification.
//! * [`carve`] — weighted occupancy carving, binarization, cleanup.
//! * [`eval`] — solid voxelization, IoU, Chamfer, pose metrics.
//! * [`scenario`] — synthetic scenario generation and perturbation.
//! * [`pipeline`] — end-to-end run producing a metric report.

pub mod carve;
pub mod eval;
pub mod geometry;
pub mod losses;
pub mod mesh;
pub mod pipeline;
pub mod posegraph;
pub mod raster;
pub mod scenario;

pub use carve::{BinaryGrid, GridSpec, OccupancyGrid, ViewWeights};
pub use eval::MetricReport;
pub use geometry::{CameraModel, RotationMatrix, UnitQuaternion, Vec3, ViewRotation};
pub use losses::LossWeights;
pub use mesh::{PointCloud, TriangleMesh};
pub use posegraph::{AbsolutePoseSet, RelativePoseGraph};
pub use raster::{ContourPointSet, DistanceField, Silhouette};
pub use scenario::{Scenario, ScenarioConfig};
