//! Voxelization and the height-scaled voxel-count volume baseline,
//! including the VOLN grid file format.
//!
//! Run with: cargo run --example voxel_baseline

use std::fs::File;
use std::io::{BufReader, BufWriter};

use bodyvol::mesh::{height_extremes, mesh_volume};
use bodyvol::shapes;
use bodyvol::voxel::{
    baseline_volume, cell_volume, read_voln, threshold, voxelize, write_voln, VoxelGrid,
};

fn main() -> bodyvol::Result<()> {
    // Voxelize a sphere in an exactly fitting cube.
    let sphere = shapes::icosphere(0.5, 4);
    let true_volume = mesh_volume(&sphere)?;
    let bounds = sphere.bounding_box().unwrap().bounding_cube();
    let dims = (96, 96, 96);
    let grid = voxelize(&sphere, dims, &bounds)?;
    let filled = grid.filled_count()?;
    let oracle = filled as f64 * cell_volume(&bounds, dims);
    println!(
        "sphere: true {true_volume:.6} m3, voxel oracle {oracle:.6} m3 ({} cells, {:.3}% off)",
        filled,
        100.0 * (oracle - true_volume).abs() / true_volume
    );

    // The baseline never sees the physical bounds. It recovers scale from
    // the subject's known height and the occupied voxel span.
    let height = height_extremes(&sphere)?.height_m;
    let estimate = baseline_volume(&grid, height)?;
    println!(
        "baseline: h_v {} voxels, l_q {:.6} m, V_tot {:.3} dm3 (true {:.3} dm3)",
        estimate.voxel_height,
        estimate.voxel_edge_m,
        estimate.total_volume_dm3(),
        true_volume * 1000.0
    );

    // Round-trip through the VOLN file format.
    let path = std::env::temp_dir().join("bodyvol_example_sphere.voln");
    write_voln(&grid, BufWriter::new(File::create(&path)?))?;
    let reloaded = read_voln(BufReader::new(File::open(&path)?))?;
    println!(
        "VOLN round trip via {}: grids identical = {}",
        path.display(),
        reloaded == grid
    );

    // Probability grids go through a threshold first (0.5 by default,
    // boundary inclusive).
    let probabilities: Vec<f32> = grid
        .binary_cells()?
        .iter()
        .map(|&filled| if filled { 0.9 } else { 0.2 })
        .collect();
    let soft = VoxelGrid::probability(dims, probabilities)?;
    let hard = threshold(&soft, 0.5)?;
    println!(
        "thresholded probability grid matches: {}",
        hard.filled_count()? == filled
    );
    Ok(())
}
