//! Synthetic experiment generation: seeded view sampling, silhouette
//! rendering, ground-truth relative poses, and a noise model that stands in
//! for a learned pose predictor.
//!
//! The noise model left-multiplies every directed relative pose by an
//! independent random rotation whose axis is uniform on the sphere and
//! whose angle is uniform in `[0, noise_max_deg]`. Perturbing `(i, j)` and
//! `(j, i)` independently makes the two directions of each pair disagree,
//! which is exactly the inconsistency rectification later removes.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraModel, GeometryError, UnitQuaternion, ViewRotation};
use crate::mesh::{MeshError, PointCloud, TriangleMesh};
use crate::posegraph::{PoseGraphError, RelativePoseGraph};
use crate::raster::{render_silhouette, RasterError, Silhouette};

/// Points drawn from the ground-truth surface for Chamfer evaluation.
pub const SURFACE_SAMPLES: usize = 2048;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("mesh error: {0}")]
    Mesh(#[from] MeshError),
    #[error("render error: {0}")]
    Raster(#[from] RasterError),
    #[error("pose graph error: {0}")]
    Graph(#[from] PoseGraphError),
    #[error("geometry error: {0}")]
    Geometry(#[from] GeometryError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

fn default_n_views() -> usize {
    5
}
fn default_azimuth_range() -> [f64; 2] {
    [0.0, 360.0]
}
fn default_elevation_range() -> [f64; 2] {
    [-20.0, 40.0]
}
fn default_noise_max_deg() -> f64 {
    10.0
}
fn default_w1() -> f64 {
    0.4
}
fn default_carve_tau() -> f64 {
    0.85
}
fn default_grid_resolution() -> usize {
    32
}
fn default_camera_width() -> usize {
    CameraModel::default().width
}
fn default_camera_height() -> usize {
    CameraModel::default().height
}
fn default_focal_px() -> f64 {
    CameraModel::default().focal_px
}

/// Optional camera override block in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraOverrides {
    #[serde(default = "default_camera_width")]
    pub width: usize,
    #[serde(default = "default_camera_height")]
    pub height: usize,
    #[serde(default = "default_focal_px")]
    pub focal_px: f64,
}

/// Complete description of one synthetic experiment. Every field except
/// `mesh_path` has a sensible default, so a minimal config is just the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mesh_path: PathBuf,
    #[serde(default = "default_n_views")]
    pub n_views: usize,
    #[serde(default)]
    pub seed: u64,
    /// Azimuth sampling box in degrees, `[lo, hi)` (degenerate `lo == hi`
    /// pins the azimuth).
    #[serde(default = "default_azimuth_range")]
    pub azimuth_range: [f64; 2],
    /// Elevation sampling box in degrees, inclusive.
    #[serde(default = "default_elevation_range")]
    pub elevation_range: [f64; 2],
    #[serde(default = "default_noise_max_deg")]
    pub noise_max_deg: f64,
    /// Carving weight of the reference view.
    #[serde(default = "default_w1")]
    pub w1: f64,
    /// Occupancy binarization threshold.
    #[serde(default = "default_carve_tau")]
    pub carve_tau: f64,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    #[serde(default)]
    pub camera: Option<CameraOverrides>,
}

impl ScenarioConfig {
    pub fn new(mesh_path: impl Into<PathBuf>) -> ScenarioConfig {
        ScenarioConfig {
            mesh_path: mesh_path.into(),
            n_views: default_n_views(),
            seed: 0,
            azimuth_range: default_azimuth_range(),
            elevation_range: default_elevation_range(),
            noise_max_deg: default_noise_max_deg(),
            w1: default_w1(),
            carve_tau: default_carve_tau(),
            grid_resolution: default_grid_resolution(),
            camera: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidConfig(msg));
        if self.n_views < 2 {
            return bad(format!("n_views {} < 2", self.n_views));
        }
        let [alo, ahi] = self.azimuth_range;
        if !(0.0..360.0).contains(&alo) || !(alo..=360.0).contains(&ahi) {
            return bad(format!("azimuth range [{alo}, {ahi}]"));
        }
        let [elo, ehi] = self.elevation_range;
        if !(-90.0..=90.0).contains(&elo) || !(elo..=90.0).contains(&ehi) {
            return bad(format!("elevation range [{elo}, {ehi}]"));
        }
        if self.noise_max_deg < 0.0 || !self.noise_max_deg.is_finite() {
            return bad(format!("noise_max_deg {}", self.noise_max_deg));
        }
        if !(self.w1 > 0.0 && self.w1 < 1.0) {
            return bad(format!("w1 {}", self.w1));
        }
        if !(self.carve_tau > 0.0 && self.carve_tau < 1.0) {
            return bad(format!("carve_tau {}", self.carve_tau));
        }
        if self.grid_resolution < 2 {
            return bad(format!("grid_resolution {}", self.grid_resolution));
        }
        Ok(())
    }

    /// Effective camera for this config (defaults unless overridden).
    pub fn camera_model(&self) -> CameraModel {
        match self.camera {
            Some(o) => CameraModel::with_resolution(o.width, o.height, o.focal_px),
            None => CameraModel::default(),
        }
    }

    pub fn load_json(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
        let cfg: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), ScenarioError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Materialized experiment state: everything downstream stages consume.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Per-view azimuth/elevation draws.
    pub views: Vec<ViewRotation>,
    /// Ground-truth absolute rotations, one per view.
    pub rotations: Vec<UnitQuaternion>,
    /// Rendered ground-truth silhouettes, one per view.
    pub silhouettes: Vec<Silhouette>,
    /// Exact relatives `q_j * q_i^-1` for every ordered pair (1-based).
    pub true_relatives: RelativePoseGraph,
    /// Noise-perturbed relatives standing in for a pose predictor.
    pub noisy_graph: RelativePoseGraph,
    /// Surface samples of the normalized mesh for Chamfer evaluation.
    pub surface: PointCloud,
    /// The normalized mesh itself.
    pub mesh: TriangleMesh,
    pub camera: CameraModel,
    pub seed: u64,
    pub noise_max_deg: f64,
}

/// Samples `n_views` rotations from the configured box, renders a
/// silhouette per view, and derives both the exact and the perturbed
/// relative-pose graphs. Fully determined by the config.
pub fn generate_views(cfg: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    cfg.validate()?;
    let mut mesh = TriangleMesh::load_obj(&cfg.mesh_path)?;
    mesh.normalize_unit_diameter()?;
    let camera = cfg.camera_model();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut views = Vec::with_capacity(cfg.n_views);
    for _ in 0..cfg.n_views {
        let [alo, ahi] = cfg.azimuth_range;
        let azimuth = if ahi > alo { rng.gen_range(alo..ahi) } else { alo };
        let [elo, ehi] = cfg.elevation_range;
        let elevation = if ehi > elo { rng.gen_range(elo..=ehi) } else { elo };
        views.push(ViewRotation::new(azimuth, elevation)?);
    }
    let rotations: Vec<UnitQuaternion> = views.iter().map(|v| v.to_quat()).collect();
    let silhouettes = views
        .iter()
        .map(|v| render_silhouette(&mesh, v.to_quat(), &camera))
        .collect::<Result<Vec<_>, _>>()?;
    let true_relatives = exact_relatives(&rotations)?;
    let noisy_graph = perturb_graph(&true_relatives, cfg.noise_max_deg, cfg.seed);
    let surface = mesh.sample_surface(SURFACE_SAMPLES, cfg.seed)?;
    Ok(Scenario {
        views,
        rotations,
        silhouettes,
        true_relatives,
        noisy_graph,
        surface,
        mesh,
        camera,
        seed: cfg.seed,
        noise_max_deg: cfg.noise_max_deg,
    })
}

/// Exact relative map `q_j * q_i^-1` over all ordered pairs of the given
/// absolute rotations (1-based views).
pub fn exact_relatives(
    rotations: &[UnitQuaternion],
) -> Result<RelativePoseGraph, ScenarioError> {
    let n = rotations.len();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                edges.push((i, j, rotations[j - 1].multiply(rotations[i - 1].conjugate())));
            }
        }
    }
    Ok(RelativePoseGraph::from_edges(n, edges)?)
}

/// Perturbs every directed edge independently: left-multiplication by a
/// rotation with axis uniform on the sphere and angle uniform in
/// `[0, noise_max_deg]`. Zero noise returns the input unchanged.
pub fn perturb_graph(
    graph: &RelativePoseGraph,
    noise_max_deg: f64,
    seed: u64,
) -> RelativePoseGraph {
    assert!(noise_max_deg >= 0.0, "noise bound must be non-negative");
    if noise_max_deg == 0.0 {
        return graph.clone();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let max_rad = noise_max_deg.to_radians();
    let edges: Vec<(usize, usize, UnitQuaternion)> = graph
        .iter()
        .map(|(i, j, q)| {
            let noise = UnitQuaternion::random_within_angle(&mut rng, max_rad);
            (i, j, noise.multiply(q))
        })
        .collect();
    RelativePoseGraph::from_edges(graph.n_views(), edges)
        .expect("perturbation preserves graph structure")
}

/// Perturbs a scenario's ground-truth relatives (see [`perturb_graph`]).
pub fn perturb_relative_poses(
    scenario: &Scenario,
    noise_max_deg: f64,
    seed: u64,
) -> RelativePoseGraph {
    perturb_graph(&scenario.true_relatives, noise_max_deg, seed)
}

/// On-disk view record: the sampled angles fully determine the rotation.
#[derive(Debug, Serialize, Deserialize)]
struct ViewJson {
    azimuth_deg: f64,
    elevation_deg: f64,
}

/// On-disk scenario metadata; silhouettes live in sibling PGM files and
/// the mesh in `mesh.obj`.
#[derive(Debug, Serialize, Deserialize)]
struct ScenarioJson {
    seed: u64,
    noise_max_deg: f64,
    camera: CameraJson,
    views: Vec<ViewJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraJson {
    width: usize,
    height: usize,
    focal_px: f64,
}

fn view_file_name(index: usize) -> String {
    format!("view_{index:03}.pgm")
}

impl Scenario {
    /// Writes `scenario.json`, `mesh.obj`, and one `view_NNN.pgm` per view
    /// into `dir` (created if missing).
    pub fn save(&self, dir: &Path) -> Result<(), ScenarioError> {
        std::fs::create_dir_all(dir)?;
        let json = ScenarioJson {
            seed: self.seed,
            noise_max_deg: self.noise_max_deg,
            camera: CameraJson {
                width: self.camera.width,
                height: self.camera.height,
                focal_px: self.camera.focal_px,
            },
            views: self
                .views
                .iter()
                .map(|v| ViewJson { azimuth_deg: v.azimuth_deg, elevation_deg: v.elevation_deg })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        std::fs::write(dir.join("scenario.json"), text)?;
        self.mesh.save_obj(&dir.join("mesh.obj"))?;
        for (i, sil) in self.silhouettes.iter().enumerate() {
            sil.save_pgm(&dir.join(view_file_name(i)))?;
        }
        Ok(())
    }

    /// Reconstructs a scenario from [`Scenario::save`] output. Silhouettes
    /// are read back from the PGM files (not re-rendered); the noisy graph
    /// and the surface cloud are regenerated from the stored seed, which
    /// reproduces them exactly.
    pub fn load(dir: &Path) -> Result<Scenario, ScenarioError> {
        let json: ScenarioJson =
            serde_json::from_str(&std::fs::read_to_string(dir.join("scenario.json"))?)?;
        if json.views.len() < 2 {
            return Err(ScenarioError::InvalidConfig(format!(
                "scenario has {} views, need at least 2",
                json.views.len()
            )));
        }
        let mesh = TriangleMesh::load_obj(&dir.join("mesh.obj"))?;
        let camera =
            CameraModel::with_resolution(json.camera.width, json.camera.height, json.camera.focal_px);
        let views = json
            .views
            .iter()
            .map(|v| ViewRotation::new(v.azimuth_deg, v.elevation_deg))
            .collect::<Result<Vec<_>, _>>()?;
        let rotations: Vec<UnitQuaternion> = views.iter().map(|v| v.to_quat()).collect();
        let mut silhouettes = Vec::with_capacity(views.len());
        for i in 0..views.len() {
            let sil = Silhouette::load_pgm(&dir.join(view_file_name(i)))?;
            if sil.width != camera.width || sil.height != camera.height {
                return Err(ScenarioError::InvalidConfig(format!(
                    "{} is {}x{}, camera expects {}x{}",
                    view_file_name(i),
                    sil.width,
                    sil.height,
                    camera.width,
                    camera.height
                )));
            }
            silhouettes.push(sil);
        }
        let true_relatives = exact_relatives(&rotations)?;
        let noisy_graph = perturb_graph(&true_relatives, json.noise_max_deg, json.seed);
        let surface = mesh.sample_surface(SURFACE_SAMPLES, json.seed)?;
        Ok(Scenario {
            views,
            rotations,
            silhouettes,
            true_relatives,
            noisy_graph,
            surface,
            mesh,
            camera,
            seed: json.seed,
            noise_max_deg: json.noise_max_deg,
        })
    }
}
