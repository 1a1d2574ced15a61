//! Batch command-line surface over the bodyvol library.
//!
//! Exit codes are a stable contract for pipelines: 0 success, 2 i/o,
//! 3 geometry precondition, 4 empty result, 5 id mismatch, 6 format.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use bodyvol::annotations::{
    assign_splits, dataset_stats, read_clips_jsonl, read_flat_jsonl, read_frames_jsonl,
    write_clips_jsonl, AnnotationStore,
};
use bodyvol::error::{Error, Result};
use bodyvol::labels::{
    decode_heatmaps, decode_pose3d, encode_heatmaps, encode_pose3d, heatmaps_from_grid,
    heatmaps_to_grid, one_hot_from_grid, one_hot_segmentation, one_hot_to_grid,
    pose_grid_from_grid, pose_grid_to_grid, read_mask_pgm, segmentation_from_one_hot,
    write_mask_pgm, SegmentationMask, Skeleton2D, Skeleton3D, DEPTH_BINS, JOINT_COUNT,
    POSE_GRID_RES, SEGMENTATION_CLASSES,
};
use bodyvol::mesh::{close_holes, load_obj, mesh_volume, validate_manifold, TriangleMesh};
use bodyvol::metrics::{
    aggregate, pair_predictions, read_predictions_jsonl, write_curve_csv, write_report_json,
};
use bodyvol::parts::{
    load_labels, merge_labels, neutral_height, part_volumes, split_parts, LabelScheme, MergeMap,
};
use bodyvol::sweep::{rotation_sweep, write_sweep_csv, SweepAxis};
use bodyvol::voxel::{baseline_volume, read_voln, threshold, voxelize, write_voln, GridKind};

#[derive(Parser)]
#[command(
    name = "bodyvol",
    version,
    about = "Body-part volume toolkit: mesh volumes, voxel baselines, label codecs, metrics"
)]
struct Cli {
    /// Seed for randomized commands (split).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for voxelization-heavy commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output path; meaning depends on the command.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Source25,
    Merged14,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Y,
    Z,
}

#[derive(Subcommand)]
enum Command {
    /// Total mesh volume, optionally split into the 14 body parts.
    Volume {
        /// OBJ mesh path.
        mesh: PathBuf,
        /// Per-vertex label file (one integer per line).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Merge map JSON; defaults to the built-in 25-to-14 table.
        #[arg(long)]
        merge_map: Option<PathBuf>,
        /// Scheme of the label file.
        #[arg(long, value_enum, default_value_t = SchemeArg::Source25)]
        label_scheme: SchemeArg,
        /// Fill boundary loops before measuring.
        #[arg(long)]
        close_holes: bool,
    },
    /// Volume estimate from a voxel grid file and a known body height.
    Baseline {
        /// VOLN grid path (binary or probability).
        grid: PathBuf,
        /// True body height in meters.
        #[arg(long)]
        height_m: f64,
        /// Probability threshold; only meaningful for probability grids.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Rasterize a mesh into a binary VOLN grid (--output required).
    Voxelize {
        mesh: PathBuf,
        /// Cells per side of the cubic grid.
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long)]
        close_holes: bool,
    },
    /// Rotate a mesh through 360° and chart the baseline volume error.
    RotationSweep {
        mesh: PathBuf,
        /// y tumbles head-over-heels; z spins about the vertical.
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// True body height in meters (held fixed over the sweep).
        #[arg(long)]
        height_m: f64,
        #[arg(long, default_value_t = 128)]
        grid: usize,
    },
    /// Score predictions against annotations; writes report JSON and
    /// curve CSV next to --output (default "report").
    Evaluate {
        /// Predictions JSONL: {clip_id, frame_index, volumes_dm3}.
        predictions: PathBuf,
        /// Annotations: flat JSONL, or frames JSONL when --clips is given.
        #[arg(long)]
        truth: PathBuf,
        /// Sidecar clips JSONL (switches --truth to the frames file).
        #[arg(long)]
        clips: Option<PathBuf>,
        /// Success-rate tolerances in percent.
        #[arg(long, value_delimiter = ',', default_value = "5,10")]
        tolerances: Vec<f64>,
    },
    /// Encode labels (skeleton JSON or PGM mask) into a tensor grid file.
    Encode {
        /// .json skeleton (2D or 3D) or .pgm mask; detected by content.
        input: PathBuf,
        /// Heatmap resolution for 2D skeletons.
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Gaussian sigma in cells.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Depth sigma in bins (3D skeletons).
        #[arg(long, default_value_t = 1.0)]
        depth_sigma: f64,
        /// Also decode the result and print the max deviation.
        #[arg(long)]
        round_trip: bool,
    },
    /// Decode a tensor grid file back into labels.
    Decode {
        /// VOLN grid produced by encode; kind detected from dims.
        input: PathBuf,
    },
    /// Split/frame counts and mean part volumes of an annotation store.
    Stats {
        /// Annotations: flat JSONL, or frames JSONL when --clips is given.
        annotations: PathBuf,
        #[arg(long)]
        clips: Option<PathBuf>,
    },
    /// Assign train/val/test splits to whole clips.
    Split {
        /// Clips JSONL (sidecar form).
        clips: PathBuf,
        /// Train,val,test ratios; must sum to 1.
        #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
        ratios: Vec<f64>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 2,
        Error::OpenMesh(_)
        | Error::UnsupportedTopology(_)
        | Error::InvalidTransform(_)
        | Error::Bounds(_)
        | Error::Structure(_)
        | Error::MissingPart(_) => 3,
        Error::EmptyInput(_) => 4,
        Error::IdMismatch(_) => 5,
        Error::Parse { .. }
        | Error::UnsupportedFace { .. }
        | Error::Domain(_)
        | Error::KindMismatch { .. }
        | Error::UnknownSegment(_)
        | Error::ShapeMismatch(_)
        | Error::Format(_)
        | Error::Config(_) => 6,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_mesh(path: &Path, fill_holes: bool) -> Result<TriangleMesh> {
    let loaded = load_obj(open(path)?)?;
    if loaded.ignored_directives > 0 {
        eprintln!(
            "warning: ignored {} unsupported OBJ directive(s)",
            loaded.ignored_directives
        );
    }
    let mut mesh = loaded.mesh;
    let report = validate_manifold(&mesh);
    if !report.is_closed {
        if fill_holes {
            mesh = close_holes(&mesh)?;
        } else {
            eprintln!("manifold report for {}:", path.display());
            eprintln!("  edge manifold:          {}", report.is_edge_manifold);
            eprintln!("  closed:                 {}", report.is_closed);
            eprintln!(
                "  consistently oriented:  {}",
                report.is_consistently_oriented
            );
            eprintln!("  boundary loops:         {}", report.boundary_loops.len());
            eprintln!("  degenerate faces:       {}", report.degenerate_face_count);
            return Err(Error::OpenMesh(format!(
                "{} has {} boundary loop(s); rerun with --close-holes",
                path.display(),
                report.boundary_loops.len()
            )));
        }
    }
    Ok(mesh)
}

fn read_store(annotations: &Path, clips: Option<&Path>) -> Result<AnnotationStore> {
    match clips {
        None => read_flat_jsonl(open(annotations)?),
        Some(clips_path) => AnnotationStore::new(
            read_clips_jsonl(open(clips_path)?)?,
            read_frames_jsonl(open(annotations)?)?,
        ),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Volume {
            mesh,
            labels,
            merge_map,
            label_scheme,
            close_holes,
        } => cmd_volume(&mesh, labels.as_deref(), merge_map.as_deref(), label_scheme, close_holes),
        Command::Baseline {
            grid,
            height_m,
            threshold,
        } => cmd_baseline(&grid, height_m, threshold),
        Command::Voxelize {
            mesh,
            grid,
            close_holes,
        } => cmd_voxelize(&mesh, grid, close_holes, cli.output.as_deref()),
        Command::RotationSweep {
            mesh,
            axis,
            height_m,
            grid,
        } => cmd_rotation_sweep(&mesh, axis, height_m, grid, cli.output.as_deref()),
        Command::Evaluate {
            predictions,
            truth,
            clips,
            tolerances,
        } => cmd_evaluate(
            &predictions,
            &truth,
            clips.as_deref(),
            &tolerances,
            cli.output.as_deref(),
        ),
        Command::Encode {
            input,
            resolution,
            sigma,
            depth_sigma,
            round_trip,
        } => cmd_encode(
            &input,
            resolution,
            sigma,
            depth_sigma,
            round_trip,
            cli.output.as_deref(),
        ),
        Command::Decode { input } => cmd_decode(&input, cli.output.as_deref()),
        Command::Stats { annotations, clips } => cmd_stats(&annotations, clips.as_deref()),
        Command::Split { clips, ratios } => {
            cmd_split(&clips, &ratios, cli.seed, cli.output.as_deref())
        }
    }
}

fn cmd_volume(
    mesh_path: &Path,
    labels: Option<&Path>,
    merge_map: Option<&Path>,
    scheme: SchemeArg,
    fill_holes: bool,
) -> Result<()> {
    let mesh = load_mesh(mesh_path, fill_holes)?;

    match labels {
        None => {
            let volume = mesh_volume(&mesh)?;
            println!("total: {:.3} dm3", volume * 1000.0);
        }
        Some(labels_path) => {
            let raw_scheme = match scheme {
                SchemeArg::Source25 => LabelScheme::Source25,
                SchemeArg::Merged14 => LabelScheme::Merged14,
            };
            let labeling = load_labels(open(labels_path)?, raw_scheme)?;
            let labeling = match raw_scheme {
                LabelScheme::Source25 => {
                    let map = match merge_map {
                        Some(path) => MergeMap::from_json(open(path)?)?,
                        None => MergeMap::default_surreal(),
                    };
                    merge_labels(&labeling, &map)?
                }
                _ => labeling,
            };
            let parts = split_parts(&mesh, &labeling)?;
            let volumes = part_volumes(&parts)?;
            for (name, value) in volumes.display_order() {
                println!("{name:<16} {value:>10.3}");
            }
            println!("total: {:.3} dm3", volumes.total_dm3());
            println!("height: {:.1} cm", neutral_height(&mesh)?);
        }
    }
    Ok(())
}

fn cmd_baseline(grid_path: &Path, height_m: f64, tau: Option<f64>) -> Result<()> {
    let grid = read_voln(open(grid_path)?)?;
    let binary = match grid.kind() {
        GridKind::Probability => threshold(&grid, tau.unwrap_or(0.5))?,
        GridKind::Binary => {
            if tau.is_some() {
                eprintln!("warning: binary grid input, --threshold skipped");
            }
            grid
        }
    };
    let estimate = baseline_volume(&binary, height_m)?;
    println!("h_v:    {} voxels", estimate.voxel_height);
    println!("l_q:    {:.6} m", estimate.voxel_edge_m);
    println!("V_q:    {:.9e} m3", estimate.voxel_volume_m3);
    println!("filled: {}", estimate.filled_count);
    println!("V_tot:  {:.3} dm3", estimate.total_volume_dm3());
    Ok(())
}

fn cmd_voxelize(
    mesh_path: &Path,
    grid: usize,
    fill_holes: bool,
    output: Option<&Path>,
) -> Result<()> {
    let output =
        output.ok_or_else(|| Error::Config("voxelize writes binary data; pass --output".into()))?;
    let mesh = load_mesh(mesh_path, fill_holes)?;
    let bounds = mesh
        .bounding_box()
        .ok_or_else(|| Error::EmptyInput("mesh has no vertices".into()))?
        .bounding_cube();
    let voxels = voxelize(&mesh, (grid, grid, grid), &bounds)?;
    let mut writer = create(output)?;
    write_voln(&voxels, &mut writer)?;
    writer.flush()?;
    println!(
        "wrote {} ({} of {} cells filled)",
        output.display(),
        voxels.filled_count()?,
        grid * grid * grid
    );
    Ok(())
}

fn cmd_rotation_sweep(
    mesh_path: &Path,
    axis: AxisArg,
    height_m: f64,
    grid: usize,
    output: Option<&Path>,
) -> Result<()> {
    let mesh = load_mesh(mesh_path, false)?;
    let axis = match axis {
        AxisArg::Y => SweepAxis::Y,
        AxisArg::Z => SweepAxis::Z,
    };
    let result = rotation_sweep(&mesh, axis, height_m, grid)?;
    match output {
        Some(path) => {
            let mut writer = create(path)?;
            write_sweep_csv(&result, &mut writer)?;
            writer.flush()?;
            eprintln!(
                "axis {axis}: worst |PE| at {}° ; spread {:.2} points",
                result.worst_degree(),
                result.spread()
            );
        }
        None => write_sweep_csv(&result, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_evaluate(
    predictions_path: &Path,
    truth_path: &Path,
    clips: Option<&Path>,
    tolerances: &[f64],
    output: Option<&Path>,
) -> Result<()> {
    let store = read_store(truth_path, clips)?;
    let predictions = read_predictions_jsonl(open(predictions_path)?)?;
    let samples = pair_predictions(&store, &predictions)?;

    let splits: BTreeSet<String> = predictions
        .iter()
        .filter_map(|p| store.clip(&p.clip_id))
        .map(|c| c.split.to_string())
        .collect();
    let mut report = aggregate(&samples, tolerances)?;
    report.evaluated = Some(splits.into_iter().collect::<Vec<_>>().join("+"));

    let prefix = output.unwrap_or_else(|| Path::new("report"));
    let json_path = prefix.with_extension("json");
    let csv_path = prefix.with_extension("csv");
    write_report_json(&report, create(&json_path)?)?;
    write_curve_csv(&report, create(&csv_path)?)?;

    println!("samples: {}", report.sample_count);
    println!("MAPE total: {:.3} %", report.total.ape_mean);
    for (t, ratio) in &report.success_at {
        println!("success@{t}%: {ratio:.4}");
    }
    println!("report: {}", json_path.display());
    println!("curve:  {}", csv_path.display());
    Ok(())
}

/// What an encode input turned out to be.
enum EncodeInput {
    Pose2D(Skeleton2D),
    Pose3D(Skeleton3D),
    Mask(SegmentationMask),
}

fn detect_encode_input(path: &Path) -> Result<EncodeInput> {
    let extension = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match extension.as_str() {
        "pgm" => Ok(EncodeInput::Mask(read_mask_pgm(open(path)?)?)),
        "json" => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            // 3D skeletons require a depth per joint; try them first since
            // a 2D parse would silently drop the depths.
            if let Ok(skel) = serde_json::from_str::<Skeleton3D>(&text) {
                return Ok(EncodeInput::Pose3D(skel));
            }
            serde_json::from_str::<Skeleton2D>(&text)
                .map(EncodeInput::Pose2D)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        }
        other => Err(Error::Format(format!(
            "cannot encode '.{other}' files; expected .json or .pgm"
        ))),
    }
}

fn cmd_encode(
    input: &Path,
    resolution: usize,
    sigma: f64,
    depth_sigma: f64,
    round_trip: bool,
    output: Option<&Path>,
) -> Result<()> {
    let grid = match detect_encode_input(input)? {
        EncodeInput::Pose2D(skel) => {
            let stack = encode_heatmaps(&skel, resolution, sigma)?;
            if round_trip {
                let decoded = decode_heatmaps(&stack);
                let max_dev = skel
                    .joints()
                    .iter()
                    .zip(decoded.joints())
                    .filter(|(a, _)| a.visible)
                    .map(|(a, b)| (a.u - b.u).abs().max((a.v - b.v).abs()))
                    .fold(0.0f64, f64::max);
                println!("round-trip max deviation: {max_dev:.4} px");
            }
            heatmaps_to_grid(&stack)?
        }
        EncodeInput::Pose3D(skel) => {
            let grid3d = encode_pose3d(&skel, sigma, depth_sigma)?;
            if round_trip {
                let decoded = decode_pose3d(&grid3d);
                let max_px = skel
                    .joints()
                    .iter()
                    .zip(decoded.joints())
                    .map(|(a, b)| (a.u - b.u).abs().max((a.v - b.v).abs()))
                    .fold(0.0f64, f64::max);
                let max_depth = skel
                    .joints()
                    .iter()
                    .zip(decoded.joints())
                    .map(|(a, b)| (a.depth - b.depth).abs())
                    .fold(0.0f64, f64::max);
                println!("round-trip max deviation: {max_px:.4} px, {max_depth:.6} depth");
            }
            pose_grid_to_grid(&grid3d)?
        }
        EncodeInput::Mask(mask) => {
            let stack = one_hot_segmentation(&mask);
            if round_trip {
                let decoded = segmentation_from_one_hot(&stack);
                let mismatches = decoded
                    .classes()
                    .iter()
                    .zip(mask.classes())
                    .filter(|(a, b)| a != b)
                    .count();
                println!("round-trip mismatching pixels: {mismatches}");
            }
            one_hot_to_grid(&stack)?
        }
    };

    if let Some(path) = output {
        let mut writer = create(path)?;
        write_voln(&grid, &mut writer)?;
        writer.flush()?;
        println!("wrote {} with dims {:?}", path.display(), grid.dims());
    } else if !round_trip {
        return Err(Error::Config(
            "encode writes binary data; pass --output (or --round-trip)".into(),
        ));
    }
    Ok(())
}

fn cmd_decode(input: &Path, output: Option<&Path>) -> Result<()> {
    let grid = read_voln(open(input)?)?;
    let (nx, ny, nz) = grid.dims();
    if nx == ny && nz == JOINT_COUNT {
        let skel = decode_heatmaps(&heatmaps_from_grid(&grid)?);
        write_json_output(&skel, output)?;
    } else if (nx, ny, nz) == (POSE_GRID_RES, POSE_GRID_RES, DEPTH_BINS * JOINT_COUNT) {
        let skel = decode_pose3d(&pose_grid_from_grid(&grid)?);
        write_json_output(&skel, output)?;
    } else if nx == ny && nz == SEGMENTATION_CLASSES {
        let mask = segmentation_from_one_hot(&one_hot_from_grid(&grid)?);
        let path = output.ok_or_else(|| {
            Error::Config("decoded mask is binary PGM; pass --output".into())
        })?;
        let mut writer = create(path)?;
        write_mask_pgm(&mask, &mut writer)?;
        writer.flush()?;
        println!("wrote {}", path.display());
    } else {
        return Err(Error::Format(format!(
            "grid dims {:?} match no known label tensor",
            grid.dims()
        )));
    }
    Ok(())
}

fn write_json_output<T: serde::Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => {
            let mut writer = create(path)?;
            serde_json::to_writer_pretty(&mut writer, value)
                .map_err(|e| Error::Format(e.to_string()))?;
            writer.flush()?;
            println!("wrote {}", path.display());
        }
        None => {
            serde_json::to_writer_pretty(io::stdout().lock(), value)
                .map_err(|e| Error::Format(e.to_string()))?;
            println!();
        }
    }
    Ok(())
}

fn cmd_stats(annotations: &Path, clips: Option<&Path>) -> Result<()> {
    let store = read_store(annotations, clips)?;
    let stats = dataset_stats(&store)?;
    println!("{:<8} {:>8} {:>8} {:>16}", "split", "clips", "frames", "fully_visible");
    for (split, counts) in &stats.per_split {
        println!(
            "{:<8} {:>8} {:>8} {:>16}",
            split.to_string(),
            counts.clips,
            counts.frames,
            counts.fully_visible
        );
    }
    println!();
    println!("mean volumes over clips [dm3]:");
    for (name, value) in &stats.mean_volumes_dm3 {
        println!("{name:<16} {value:>10.3}");
    }
    println!("{:<16} {:>10.3}", "total", stats.mean_total_dm3);
    Ok(())
}

fn cmd_split(
    clips_path: &Path,
    ratios: &[f64],
    seed: u64,
    output: Option<&Path>,
) -> Result<()> {
    if ratios.len() != 3 {
        return Err(Error::Domain(format!(
            "--ratios needs train,val,test (3 values), got {}",
            ratios.len()
        )));
    }
    let clips = read_clips_jsonl(open(clips_path)?)?;
    let assigned = assign_splits(clips, (ratios[0], ratios[1], ratios[2]), seed)?;
    match output {
        Some(path) => {
            let mut writer = create(path)?;
            write_clips_jsonl(&assigned, &mut writer)?;
            writer.flush()?;
            let count = |s| assigned.iter().filter(|c| c.split == s).count();
            use bodyvol::annotations::Split;
            eprintln!(
                "assigned {} clips: {} train, {} val, {} test",
                assigned.len(),
                count(Split::Train),
                count(Split::Val),
                count(Split::Test)
            );
        }
        None => write_clips_jsonl(&assigned, io::stdout().lock())?,
    }
    Ok(())
}
