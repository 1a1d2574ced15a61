//! Rotation sweep: rotate a body mesh in 1° steps, run the voxel baseline
//! at each angle with the fixed true height, and record the signed volume
//! error. Rotating an upright subject away from vertical shrinks its
//! apparent voxel height while the reference height stays constant, which
//! is exactly the failure mode this experiment quantifies.

use std::io::Write;

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{mesh_volume, transform_mesh, TriangleMesh};
use crate::voxel::{baseline_volume, voxelize};

/// Sweep axis, named after the two classic moves: `Y` tumbles the subject
/// head-over-heels (rotation about the horizontal x-axis, so the apparent
/// height collapses at 90° and 270°); `Z` spins it like a pirouette
/// (rotation about the vertical y-axis, apparent height unchanged).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Y,
    Z,
}

impl SweepAxis {
    fn rotation(&self, radians: f64) -> Rotation3<f64> {
        match self {
            SweepAxis::Y => Rotation3::from_axis_angle(&Vector3::x_axis(), radians),
            SweepAxis::Z => Rotation3::from_axis_angle(&Vector3::y_axis(), radians),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::Y => write!(f, "y"),
            SweepAxis::Z => write!(f, "z"),
        }
    }
}

/// 360 rows of (degrees, signed percent error).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<(u32, f64)>,
}

impl SweepResult {
    /// Degree with the largest |PE|.
    pub fn worst_degree(&self) -> u32 {
        self.rows
            .iter()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(d, _)| *d)
            .unwrap_or(0)
    }

    /// max(PE) - min(PE) over all rows, in percentage points.
    pub fn spread(&self) -> f64 {
        let min = self.rows.iter().map(|(_, p)| *p).fold(f64::INFINITY, f64::min);
        let max = self
            .rows
            .iter()
            .map(|(_, p)| *p)
            .fold(f64::NEG_INFINITY, f64::max);
        max - min
    }
}

/// Rotate the mesh about its centroid in 1° steps over a full turn. Each
/// step voxelizes into an exactly-fitting cube at `grid`³ cells and runs
/// the baseline with the fixed `height_m`, so the percent error tracks how
/// the pose distorts the height reference.
pub fn rotation_sweep(
    mesh: &TriangleMesh,
    axis: SweepAxis,
    height_m: f64,
    grid: usize,
) -> Result<SweepResult> {
    if height_m <= 0.0 {
        return Err(Error::Domain(format!(
            "body height {height_m} m must be positive"
        )));
    }
    if grid == 0 {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let true_volume = mesh_volume(mesh)?;
    if true_volume <= 0.0 {
        return Err(Error::Domain(
            "mesh volume is not positive; check orientation".into(),
        ));
    }
    let centroid = mesh
        .centroid()
        .ok_or_else(|| Error::EmptyInput("mesh has no vertices".into()))?;

    let rows: Vec<(u32, f64)> = (0u32..360)
        .into_par_iter()
        .map(|deg| -> Result<(u32, f64)> {
            let radians = f64::from(deg).to_radians();
            let rotation = axis.rotation(radians);
            let translation = centroid.coords - rotation * centroid.coords;
            let rotated = transform_mesh(mesh, rotation.matrix(), &translation)?;
            let bounds = rotated
                .bounding_box()
                .expect("rotated mesh keeps its vertices")
                .bounding_cube();
            let voxels = voxelize(&rotated, (grid, grid, grid), &bounds)?;
            let estimate = baseline_volume(&voxels, height_m)?;
            let pe = 100.0 * (estimate.total_volume_m3 - true_volume) / true_volume;
            Ok((deg, pe))
        })
        .collect::<Result<_>>()?;

    Ok(SweepResult { axis, rows })
}

/// CSV with columns `deg,PE`, one row per degree.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut writer: W) -> Result<()> {
    writeln!(writer, "deg,PE")?;
    for (deg, pe) in &result.rows {
        writeln!(writer, "{deg},{pe:.6}")?;
    }
    Ok(())
}
