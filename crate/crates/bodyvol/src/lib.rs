//! Geometry and evaluation toolkit for human body-part volumes.
//!
//! The crate is organized around a small set of building blocks:
//!
//! - [`mesh`] — closed triangle meshes: OBJ loading, manifold validation,
//!   hole filling, signed (divergence-theorem) volume, height extremes.
//! - [`parts`] — splitting a labeled body mesh into 14 body parts and
//!   measuring per-part volumes.
//! - [`voxel`] — voxel grids, probability thresholding, mesh voxelization,
//!   and the height-scaled voxel-count volume baseline.
//! - [`labels`] — codecs for 2D-pose heatmaps, body-part segmentation
//!   masks, and depth-binned 3D-pose grids.
//! - [`metrics`] — AE/APE aggregates, cumulative error curves, tolerance
//!   success rates, PCK, IoU, and 3D-pose accuracy.
//! - [`annotations`] — clip/frame annotation records, split bookkeeping,
//!   height sampling, and dataset statistics.
//! - [`sweep`] — the rotation-sweep experiment that stresses the voxel
//!   baseline's height reference.
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `bodyvol` binary for the batch command-line surface.

pub mod annotations;
pub mod error;
pub mod labels;
pub mod mesh;
pub mod metrics;
pub mod parts;
pub mod shapes;
pub mod sweep;
pub mod voxel;

pub use error::{Error, Result};
