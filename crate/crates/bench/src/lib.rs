//! Shared fixtures for the stage benchmarks: deterministic meshes, views,
//! graphs and clouds sized like a typical reconstruction run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use voxhull::carve::{GridSpec, ViewWeights};
use voxhull::geometry::{CameraModel, UnitQuaternion, Vec3, ViewRotation};
use voxhull::mesh::{PointCloud, TriangleMesh};
use voxhull::posegraph::RelativePoseGraph;
use voxhull::raster::{render_silhouette, Silhouette};
use voxhull::scenario::{exact_relatives, perturb_graph};

/// The icosahedron scaled into the unit-diameter sphere; round enough to
/// exercise every rasterizer path without being trivially axis-aligned.
pub fn test_mesh() -> TriangleMesh {
    let mut mesh = TriangleMesh::icosahedron();
    mesh.normalize_unit_diameter().expect("static mesh");
    mesh
}

/// Evenly spread view rotations with a mild elevation sweep.
pub fn test_views(n: usize) -> Vec<UnitQuaternion> {
    (0..n)
        .map(|k| {
            let az = 360.0 * k as f64 / n as f64;
            let el = -20.0 + 50.0 * k as f64 / n as f64;
            ViewRotation::new(az, el).expect("angles in range").to_quat()
        })
        .collect()
}

/// Complete noisy relative-pose graph over `n` random ground-truth views.
pub fn noisy_graph(n: usize, noise_deg: f64, seed: u64) -> RelativePoseGraph {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let truth: Vec<UnitQuaternion> =
        (0..n).map(|_| UnitQuaternion::random_uniform(&mut rng)).collect();
    perturb_graph(&exact_relatives(&truth).expect("n >= 2"), noise_deg, seed)
}

/// Everything `build_occupancy` needs for an `n`-view carve.
pub fn carve_inputs(
    n: usize,
    cam: &CameraModel,
    resolution: usize,
) -> (Vec<Silhouette>, Vec<UnitQuaternion>, GridSpec, ViewWeights) {
    let mesh = test_mesh();
    let rotations = test_views(n);
    let silhouettes = rotations
        .iter()
        .map(|&q| render_silhouette(&mesh, q, cam).expect("mesh in frame"))
        .collect();
    let spec = GridSpec::new(resolution, Vec3::ZERO, GridSpec::default().extent)
        .expect("static grid");
    let weights = ViewWeights::make_weights(n, 0.4).expect("n >= 3");
    (silhouettes, rotations, spec, weights)
}

/// A pair of random clouds in the unit box.
pub fn random_clouds(n: usize, seed: u64) -> (PointCloud, PointCloud) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut cloud = |n: usize| PointCloud {
        points: (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect(),
    };
    (cloud(n), cloud(n))
}
