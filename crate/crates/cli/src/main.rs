//! `voxhull` — silhouette-based multi-view shape reconstruction from the
//! command line. Every subcommand wraps one stage of the library pipeline
//! so stages can be rerun, swapped or inspected individually; `pipeline`
//! runs them all back to back.
//!
//! Exit codes: 0 on success, 2 when arguments or configuration are
//! invalid, 1 when a stage fails at runtime.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use voxhull::carve::{binarize, build_occupancy, cleanup, BinaryGrid, GridSpec, OccupancyGrid, ViewWeights};
use voxhull::eval::{chamfer, grid_to_cloud, iou, voxelize_solid, MetricReport};
use voxhull::geometry::Vec3;
use voxhull::losses::{angular_loss, contour_loss, LossWeights};
use voxhull::mesh::PointCloud;
use voxhull::pipeline::{run_pipeline, POSE_ACCURACY_THRESHOLD_DEG};
use voxhull::posegraph::{
    pose_metrics, rectify, relative_from_absolute, AbsolutePoseSet, RectifyOptions,
    RelativePoseGraph,
};
use voxhull::raster::{distance_transform, extract_contour_pixels, lift_contour_points};
use voxhull::scenario::{generate_views, perturb_graph, Scenario, ScenarioConfig, ScenarioError};

#[derive(Parser)]
#[command(name = "voxhull", version, about = "Multi-view silhouette reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scenario: per-view silhouettes, pose metadata
    /// and a copy of the normalized mesh.
    Render {
        /// Wavefront OBJ mesh to render.
        #[arg(long)]
        mesh: PathBuf,
        /// Number of views to sample.
        #[arg(long, default_value_t = 5)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturb a scenario's exact relative poses into a noisy graph,
    /// standing in for an imperfect pose predictor.
    Perturb {
        /// Scenario directory produced by `render`.
        #[arg(long)]
        scenario: PathBuf,
        /// Maximum perturbation angle in degrees.
        #[arg(long = "noise-deg", default_value_t = 10.0)]
        noise_deg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output graph JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rectify a noisy relative-pose graph into consistent absolute
    /// rotations (view 1 pinned to the identity).
    Rectify {
        /// Relative-pose graph JSON.
        #[arg(long)]
        graph: PathBuf,
        /// Output absolute-pose JSON.
        #[arg(long)]
        out: PathBuf,
        /// Cap on accepted solver steps.
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Relative-decrease stopping tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Carve a soft occupancy grid from a scenario's silhouettes under
    /// the given absolute poses.
    Carve {
        #[arg(long)]
        scenario: PathBuf,
        /// Absolute-pose JSON (e.g. from `rectify`).
        #[arg(long)]
        poses: PathBuf,
        /// Weight of the reference view; the rest share the remainder.
        #[arg(long, default_value_t = 0.4)]
        w1: f64,
        /// Grid resolution per axis.
        #[arg(long, default_value_t = 32)]
        res: usize,
        /// Output occupancy grid (F32 payload).
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold an occupancy grid into a binary hull, optionally with
    /// morphological cleanup.
    Binarize {
        /// Occupancy grid from `carve`.
        #[arg(long)]
        grid: PathBuf,
        /// Occupancy threshold in (0, 1).
        #[arg(long, default_value_t = 0.85)]
        tau: f64,
        /// Apply closing and keep only the largest component.
        #[arg(long)]
        cleanup: bool,
        /// Output binary grid (BIT payload).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted hull against a scenario's ground truth.
    Eval {
        /// Predicted binary grid.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Absolute-pose JSON; when given, pose metrics compare its
        /// induced relative rotations to the ground truth.
        #[arg(long)]
        poses: Option<PathBuf>,
        /// Output report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-pair angular, contour and blended pose-evaluation losses
    /// for a set of absolute poses.
    EvalLoss {
        #[arg(long)]
        scenario: PathBuf,
        /// Absolute-pose JSON to evaluate.
        #[arg(long = "pose-file")]
        pose_file: PathBuf,
        /// Weight of the angular term.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Weight of the contour term.
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
    },
    /// Run generate -> perturb -> rectify -> carve -> binarize -> cleanup
    /// -> metrics in one go and write every intermediate artifact.
    Pipeline {
        /// Scenario configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for all artifacts.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failures split by exit code: bad user input versus broken execution.
enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

fn invalid(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Validation(err.into())
}

fn runtime(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(err.into())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Render { mesh, views, seed, out } => cmd_render(&mesh, views, seed, &out),
        Command::Perturb { scenario, noise_deg, seed, out } => {
            cmd_perturb(&scenario, noise_deg, seed, &out)
        }
        Command::Rectify { graph, out, max_iter, tol } => cmd_rectify(&graph, &out, max_iter, tol),
        Command::Carve { scenario, poses, w1, res, out } => {
            cmd_carve(&scenario, &poses, w1, res, &out)
        }
        Command::Binarize { grid, tau, cleanup, out } => cmd_binarize(&grid, tau, cleanup, &out),
        Command::Eval { pred, scenario, poses, out } => {
            cmd_eval(&pred, &scenario, poses.as_deref(), &out)
        }
        Command::EvalLoss { scenario, pose_file, alpha, beta } => {
            cmd_eval_loss(&scenario, &pose_file, alpha, beta)
        }
        Command::Pipeline { config, out } => cmd_pipeline(&config, &out),
    }
}

fn load_scenario(dir: &Path) -> Result<Scenario, CliError> {
    Scenario::load(dir).map_err(|e| match e {
        ScenarioError::InvalidConfig(_) => invalid(e),
        other => {
            runtime(anyhow!(other).context(format!("loading scenario from {}", dir.display())))
        }
    })
}

fn load_poses(path: &Path) -> Result<AbsolutePoseSet, CliError> {
    AbsolutePoseSet::load_json(path)
        .map_err(|e| runtime(anyhow!(e).context(format!("loading poses from {}", path.display()))))
}

fn cmd_render(mesh: &Path, views: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut cfg = ScenarioConfig::new(mesh);
    cfg.n_views = views;
    cfg.seed = seed;
    cfg.validate().map_err(invalid)?;
    let scenario = generate_views(&cfg).map_err(runtime)?;
    scenario.save(out).map_err(runtime)?;
    println!("wrote {} views to {}", views, out.display());
    Ok(())
}

fn cmd_perturb(scenario: &Path, noise_deg: f64, seed: u64, out: &Path) -> Result<(), CliError> {
    if !noise_deg.is_finite() || noise_deg < 0.0 {
        return Err(invalid(anyhow!("--noise-deg must be a finite non-negative angle, got {noise_deg}")));
    }
    let scenario = load_scenario(scenario)?;
    let graph = perturb_graph(&scenario.true_relatives, noise_deg, seed);
    graph.save_json(out).map_err(runtime)?;
    println!("wrote noisy graph ({} edges) to {}", graph.iter().count(), out.display());
    Ok(())
}

fn cmd_rectify(
    graph: &Path,
    out: &Path,
    max_iter: Option<usize>,
    tol: Option<f64>,
) -> Result<(), CliError> {
    let mut options = RectifyOptions::default();
    if let Some(k) = max_iter {
        options.max_iterations = k;
    }
    if let Some(t) = tol {
        if !t.is_finite() || t < 0.0 {
            return Err(invalid(anyhow!("--tol must be a finite non-negative value, got {t}")));
        }
        options.tolerance = t;
    }
    let graph = RelativePoseGraph::load_json(graph).map_err(runtime)?;
    let poses = rectify(&graph, options);
    poses.save_json(out).map_err(runtime)?;
    println!(
        "rectified {} views in {} accepted steps, objective {:.3e} -> {}",
        poses.rotations.len(),
        poses.iterations,
        poses.residual,
        out.display()
    );
    Ok(())
}

fn cmd_carve(
    scenario_dir: &Path,
    poses: &Path,
    w1: f64,
    res: usize,
    out: &Path,
) -> Result<(), CliError> {
    let spec = GridSpec::new(res, Vec3::ZERO, GridSpec::default().extent).map_err(invalid)?;
    let scenario = load_scenario(scenario_dir)?;
    let weights = ViewWeights::make_weights(scenario.silhouettes.len(), w1).map_err(invalid)?;
    let poses = load_poses(poses)?;
    if poses.rotations.len() != scenario.silhouettes.len() {
        return Err(invalid(anyhow!(
            "pose file has {} rotations but the scenario has {} views",
            poses.rotations.len(),
            scenario.silhouettes.len()
        )));
    }
    let grid =
        build_occupancy(&scenario.silhouettes, &poses.rotations, &scenario.camera, spec, &weights)
            .map_err(runtime)?;
    grid.save_voxg(out).map_err(runtime)?;
    println!(
        "carved {res}x{res}x{res} grid from {} views -> {}",
        scenario.silhouettes.len(),
        out.display()
    );
    Ok(())
}

fn cmd_binarize(grid: &Path, tau: f64, clean: bool, out: &Path) -> Result<(), CliError> {
    let occupancy = OccupancyGrid::load_voxg(grid).map_err(runtime)?;
    let mut hull = binarize(&occupancy, tau).map_err(invalid)?;
    if clean {
        hull = cleanup(&hull);
    }
    hull.save_voxg(out).map_err(runtime)?;
    println!(
        "kept {} of {} voxels at tau {tau} -> {}",
        hull.count_occupied(),
        hull.spec.n_voxels(),
        out.display()
    );
    Ok(())
}

fn print_report(report: &MetricReport) {
    println!(
        "iou {:.4}  chamfer_x100 {:.4}  pose_accuracy {:.4}  pose_median_deg {:.4}",
        report.iou, report.chamfer_x100, report.pose_accuracy, report.pose_median_deg
    );
}

fn cmd_eval(
    pred: &Path,
    scenario_dir: &Path,
    poses: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let hull = BinaryGrid::load_voxg(pred).map_err(runtime)?;
    let scenario = load_scenario(scenario_dir)?;
    let reference_rotation = scenario.rotations[0];
    let truth = voxelize_solid(&scenario.mesh, reference_rotation, hull.spec).map_err(runtime)?;
    let iou_value = iou(&hull, &truth).map_err(runtime)?;
    let hull_cloud = grid_to_cloud(&hull).map_err(runtime)?;
    let truth_cloud = PointCloud {
        points: scenario.surface.points.iter().map(|&p| reference_rotation.rotate_point(p)).collect(),
    };
    let chamfer_value = chamfer(&hull_cloud, &truth_cloud).map_err(runtime)?;
    // Without a pose file the hull is scored as-is and the pose metrics
    // report the exact-pose baseline.
    let (pose_accuracy, pose_median_deg) = match poses {
        None => (1.0, 0.0),
        Some(path) => {
            let poses = load_poses(path)?;
            if poses.rotations.len() != scenario.rotations.len() {
                return Err(invalid(anyhow!(
                    "pose file has {} rotations but the scenario has {} views",
                    poses.rotations.len(),
                    scenario.rotations.len()
                )));
            }
            let mut predicted = Vec::new();
            let mut reference = Vec::new();
            for (i, j, truth_edge) in scenario.true_relatives.iter() {
                predicted.push(relative_from_absolute(&poses, i, j).map_err(runtime)?);
                reference.push(truth_edge);
            }
            let metrics =
                pose_metrics(&predicted, &reference, POSE_ACCURACY_THRESHOLD_DEG).map_err(runtime)?;
            (metrics.accuracy, metrics.median_deg)
        }
    };
    let report = MetricReport {
        iou: iou_value,
        chamfer_x100: chamfer_value,
        pose_accuracy,
        pose_median_deg,
    };
    report.save_json(out).map_err(runtime)?;
    print_report(&report);
    Ok(())
}

fn cmd_eval_loss(
    scenario_dir: &Path,
    pose_file: &Path,
    alpha: f64,
    beta: f64,
) -> Result<(), CliError> {
    let weights = LossWeights::new(alpha, beta).map_err(invalid)?;
    let scenario = load_scenario(scenario_dir)?;
    let poses = load_poses(pose_file)?;
    if poses.rotations.len() != scenario.rotations.len() {
        return Err(invalid(anyhow!(
            "pose file has {} rotations but the scenario has {} views",
            poses.rotations.len(),
            scenario.rotations.len()
        )));
    }
    let cam = &scenario.camera;
    // Distance field and lifted contour points of every view, each built
    // once and shared by all pairs targeting that view.
    let mut targets = Vec::new();
    for (view, sil) in scenario.silhouettes.iter().enumerate() {
        let contour = extract_contour_pixels(sil);
        let field = distance_transform(&contour, sil.width, sil.height)
            .map_err(|e| runtime(anyhow!(e).context(format!("view {}", view + 1))))?;
        let points =
            lift_contour_points(&scenario.surface, scenario.rotations[view], cam, sil, 200, scenario.seed)
                .map_err(|e| runtime(anyhow!(e).context(format!("view {}", view + 1))))?;
        targets.push((field, points));
    }
    let mut blended_sum = 0.0;
    let mut pairs = 0usize;
    for (i, j, q_star) in scenario.true_relatives.iter() {
        let q_tilde = relative_from_absolute(&poses, i, j).map_err(runtime)?;
        let (field, points) = &targets[j - 1];
        let angular = angular_loss(q_star, q_tilde);
        let contour = contour_loss(q_tilde, q_star, field, points, cam, true)
            .map_err(|e| runtime(anyhow!(e).context(format!("pair {i}->{j}"))))?;
        let blended = weights.alpha * angular + weights.beta * contour;
        blended_sum += blended;
        pairs += 1;
        println!("pair {i}->{j}: angular {angular:.6}  contour {contour:.4} px  blended {blended:.4}");
    }
    println!("mean blended loss over {pairs} pairs: {:.4}", blended_sum / pairs as f64);
    Ok(())
}

fn cmd_pipeline(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load_json(config).map_err(|e| match e {
        ScenarioError::InvalidConfig(_) | ScenarioError::Json(_) => invalid(e),
        other => {
            runtime(anyhow!(other).context(format!("loading config from {}", config.display())))
        }
    })?;
    let report = run_pipeline(&cfg, out).map_err(|e| {
        if e.stage == "config" {
            invalid(e)
        } else {
            let context = format!("pipeline failed at stage '{}'", e.stage);
            runtime(anyhow!(e).context(context))
        }
    })?;
    print_report(&report);
    Ok(())
}
