//! Voxel grids and the height-scaled voxel-count volume baseline.
//!
//! The baseline mirrors how an unscaled occupancy grid is turned into a
//! physical volume: the true body height in meters divided by the occupied
//! height in voxels gives the voxel edge length, its cube the voxel volume,
//! and the filled-cell count the total.

use std::io::{Read, Write};

use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{validate_manifold, Aabb, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Binary,
    Probability,
}

impl std::fmt::Display for GridKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridKind::Binary => write!(f, "binary"),
            GridKind::Probability => write!(f, "probability"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GridData {
    Binary(Vec<bool>),
    Probability(Vec<f32>),
}

/// Dense axis-aligned grid, x-fastest layout (`x + nx*(y + ny*z)`).
///
/// The grid itself carries no physical scale; callers that need one keep
/// the voxelization bounds, and the baseline derives its own scale from a
/// known body height.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: (usize, usize, usize),
    data: GridData,
}

impl VoxelGrid {
    pub fn binary(dims: (usize, usize, usize), cells: Vec<bool>) -> Result<Self> {
        Self::check_len(dims, cells.len())?;
        Ok(Self {
            dims,
            data: GridData::Binary(cells),
        })
    }

    pub fn probability(dims: (usize, usize, usize), cells: Vec<f32>) -> Result<Self> {
        Self::check_len(dims, cells.len())?;
        if let Some(bad) = cells.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            dims,
            data: GridData::Probability(cells),
        })
    }

    fn check_len(dims: (usize, usize, usize), len: usize) -> Result<()> {
        let expected = dims.0 * dims.1 * dims.2;
        if len != expected {
            return Err(Error::ShapeMismatch(format!(
                "grid data has {len} cells, dims {dims:?} require {expected}"
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn kind(&self) -> GridKind {
        match self.data {
            GridData::Binary(_) => GridKind::Binary,
            GridData::Probability(_) => GridKind::Probability,
        }
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    /// Occupancy of one cell; probability grids count cells > 0.5 here.
    pub fn is_filled(&self, x: usize, y: usize, z: usize) -> bool {
        let i = self.index(x, y, z);
        match &self.data {
            GridData::Binary(cells) => cells[i],
            GridData::Probability(cells) => cells[i] > 0.5,
        }
    }

    pub fn binary_cells(&self) -> Result<&[bool]> {
        match &self.data {
            GridData::Binary(cells) => Ok(cells),
            GridData::Probability(_) => Err(Error::KindMismatch {
                expected: "binary".into(),
                found: "probability".into(),
            }),
        }
    }

    pub fn probability_cells(&self) -> Result<&[f32]> {
        match &self.data {
            GridData::Probability(cells) => Ok(cells),
            GridData::Binary(_) => Err(Error::KindMismatch {
                expected: "probability".into(),
                found: "binary".into(),
            }),
        }
    }

    pub fn filled_count(&self) -> Result<usize> {
        Ok(self.binary_cells()?.iter().filter(|&&c| c).count())
    }
}

/// Volume estimate derived from a binary grid and a known body height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineEstimate {
    /// Occupied height in voxels (inclusive span).
    pub voxel_height: usize,
    /// True body height in meters supplied by the caller.
    pub height_m: f64,
    /// Edge length of one voxel in meters: `height_m / voxel_height`.
    pub voxel_edge_m: f64,
    /// Volume of one voxel in m³: the edge length cubed.
    pub voxel_volume_m3: f64,
    pub filled_count: usize,
    /// `voxel_volume_m3 * filled_count`.
    pub total_volume_m3: f64,
}

impl BaselineEstimate {
    pub fn total_volume_dm3(&self) -> f64 {
        self.total_volume_m3 * 1000.0
    }
}

/// Convert a probability grid to binary occupancy; a cell is filled when
/// its probability is at least `tau` (boundary inclusive).
pub fn threshold(grid: &VoxelGrid, tau: f64) -> Result<VoxelGrid> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("threshold {tau} outside (0, 1)")));
    }
    let cells = grid.probability_cells()?;
    let binary = cells.iter().map(|&p| f64::from(p) >= tau).collect();
    VoxelGrid::binary(grid.dims, binary)
}

/// Inclusive y-span of the filled cells, in voxels. A single filled voxel
/// has height 1.
pub fn voxel_height(grid: &VoxelGrid) -> Result<usize> {
    let cells = grid.binary_cells()?;
    let (nx, ny, nz) = grid.dims;
    let mut min_y = usize::MAX;
    let mut max_y = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            let offset = nx * (y + ny * z);
            if cells[offset..offset + nx].iter().any(|&c| c) {
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
    }
    if min_y == usize::MAX {
        return Err(Error::EmptyInput("no filled voxels".into()));
    }
    Ok(max_y - min_y + 1)
}

/// Scale a binary grid by the true body height and count filled voxels.
pub fn baseline_volume(grid: &VoxelGrid, height_m: f64) -> Result<BaselineEstimate> {
    if height_m <= 0.0 {
        return Err(Error::Domain(format!(
            "body height {height_m} m must be positive"
        )));
    }
    let filled_count = grid.filled_count()?;
    if filled_count == 0 {
        return Err(Error::EmptyInput("no filled voxels".into()));
    }
    let voxel_height = voxel_height(grid)?;
    let voxel_edge_m = height_m / voxel_height as f64;
    let voxel_volume_m3 = voxel_edge_m.powi(3);
    Ok(BaselineEstimate {
        voxel_height,
        height_m,
        voxel_edge_m,
        voxel_volume_m3,
        filled_count,
        total_volume_m3: voxel_volume_m3 * filled_count as f64,
    })
}

/// Physical volume of one grid cell for the given bounds and dims.
pub fn cell_volume(bounds: &Aabb, dims: (usize, usize, usize)) -> f64 {
    let ext = bounds.extents();
    (ext.x / dims.0 as f64) * (ext.y / dims.1 as f64) * (ext.z / dims.2 as f64)
}

/// Rasterize a closed mesh into a binary occupancy grid.
///
/// A cell is filled when its center lies inside the mesh, decided by
/// crossing parity of a ray cast along +x. Rays that graze an edge or
/// vertex are recast with a deterministic sub-cell jitter (up to three
/// retries); cells still unresolved after that are assigned the majority
/// of their resolved neighbors.
pub fn voxelize(
    mesh: &TriangleMesh,
    dims: (usize, usize, usize),
    bounds: &Aabb,
) -> Result<VoxelGrid> {
    let (nx, ny, nz) = dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::Domain("grid dims must be positive".into()));
    }
    let ext = bounds.extents();
    if ext.x <= 0.0 || ext.y <= 0.0 || ext.z <= 0.0 {
        return Err(Error::Domain("bounds must have positive extent".into()));
    }
    let mesh_box = mesh
        .bounding_box()
        .ok_or_else(|| Error::EmptyInput("cannot voxelize an empty mesh".into()))?;
    let report = validate_manifold(mesh);
    if !report.is_closed || !report.is_consistently_oriented {
        return Err(Error::OpenMesh(
            "voxelization requires a closed, consistently oriented mesh".into(),
        ));
    }
    if !bounds.contains(&mesh_box) {
        return Err(Error::Bounds(format!(
            "mesh box [{:?}, {:?}] not inside [{:?}, {:?}]",
            mesh_box.min, mesh_box.max, bounds.min, bounds.max
        )));
    }

    let sx = ext.x / nx as f64;
    let sy = ext.y / ny as f64;
    let sz = ext.z / nz as f64;

    let triangles: Vec<[Point3<f64>; 3]> = mesh
        .faces()
        .iter()
        .map(|f| {
            [
                mesh.vertices()[f[0]],
                mesh.vertices()[f[1]],
                mesh.vertices()[f[2]],
            ]
        })
        .collect();

    // Bucket triangles by the (y, z) cells their projection can touch, with
    // one cell of padding to absorb jitter.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); ny * nz];
    for (ti, tri) in triangles.iter().enumerate() {
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut z0, mut z1) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in tri {
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
            z0 = z0.min(p.z);
            z1 = z1.max(p.z);
        }
        let iy0 = cell_range_start(y0, bounds.min.y, sy);
        let iy1 = cell_range_end(y1, bounds.min.y, sy, ny);
        let iz0 = cell_range_start(z0, bounds.min.z, sz);
        let iz1 = cell_range_end(z1, bounds.min.z, sz, nz);
        for iz in iz0..=iz1 {
            for iy in iy0..=iy1 {
                buckets[iy + ny * iz].push(ti as u32);
            }
        }
    }

    let jitter_scale = 1e-7 * sy.min(sz);
    let rows: Vec<Option<Vec<bool>>> = (0..ny * nz)
        .into_par_iter()
        .map(|row| {
            let iy = row % ny;
            let iz = row / ny;
            let yc = bounds.min.y + (iy as f64 + 0.5) * sy;
            let zc = bounds.min.z + (iz as f64 + 0.5) * sz;
            // Deterministic jitter schedule; the two components differ so a
            // retry cannot stay on a diagonal edge.
            for attempt in 0..4i32 {
                let dy = jitter_scale * attempt as f64;
                let dz = jitter_scale * 2.0 * attempt as f64;
                if let Some(crossings) =
                    cast_row(&triangles, &buckets[row], yc + dy, zc + dz)
                {
                    return Some(fill_row(&crossings, bounds.min.x, sx, nx));
                }
            }
            None
        })
        .collect();

    let mut cells = vec![false; nx * ny * nz];
    let mut unresolved = Vec::new();
    for (row, result) in rows.iter().enumerate() {
        match result {
            Some(row_cells) => {
                let offset = nx * row;
                cells[offset..offset + nx].copy_from_slice(row_cells);
            }
            None => unresolved.push(row),
        }
    }
    for row in unresolved {
        let iy = (row % ny) as isize;
        let iz = (row / ny) as isize;
        for ix in 0..nx {
            let mut inside = 0usize;
            let mut total = 0usize;
            for (ny_off, nz_off) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (jy, jz) = (iy + ny_off, iz + nz_off);
                if jy < 0 || jz < 0 || jy >= ny as isize || jz >= nz as isize {
                    continue;
                }
                let neighbor = jy as usize + ny * jz as usize;
                if rows[neighbor].is_some() {
                    total += 1;
                    if cells[ix + nx * neighbor] {
                        inside += 1;
                    }
                }
            }
            cells[ix + nx * row] = inside * 2 > total;
        }
    }

    VoxelGrid::binary(dims, cells)
}

fn cell_range_start(coord: f64, origin: f64, step: f64) -> usize {
    let i = ((coord - origin) / step - 0.5).floor() as isize - 1;
    i.max(0) as usize
}

fn cell_range_end(coord: f64, origin: f64, step: f64, n: usize) -> usize {
    let i = ((coord - origin) / step - 0.5).ceil() as isize + 1;
    i.clamp(0, n as isize - 1) as usize
}

/// Crossing x-coordinates of the +x ray at `(y, z)`, or `None` when the ray
/// grazes an edge, vertex, or degenerate projection.
fn cast_row(
    triangles: &[[Point3<f64>; 3]],
    bucket: &[u32],
    y: f64,
    z: f64,
) -> Option<Vec<f64>> {
    let mut crossings = Vec::new();
    for &ti in bucket {
        let [a, b, c] = &triangles[ti as usize];
        let d0 = orient(a.y, a.z, b.y, b.z, y, z);
        let d1 = orient(b.y, b.z, c.y, c.z, y, z);
        let d2 = orient(c.y, c.z, a.y, a.z, y, z);
        let has_pos = d0 > 0.0 || d1 > 0.0 || d2 > 0.0;
        let has_neg = d0 < 0.0 || d1 < 0.0 || d2 < 0.0;
        if has_pos && has_neg {
            continue; // strictly outside the projected triangle
        }
        if d0 == 0.0 || d1 == 0.0 || d2 == 0.0 {
            return None; // grazing hit
        }
        // Barycentric interpolation of x at the ray point; d1 weights a,
        // d2 weights b, d0 weights c.
        let area = d0 + d1 + d2;
        crossings.push((d1 * a.x + d2 * b.x + d0 * c.x) / area);
    }
    if crossings.len() % 2 != 0 {
        return None; // tangency slipped through; force a recast
    }
    crossings.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    Some(crossings)
}

fn orient(ay: f64, az: f64, by: f64, bz: f64, py: f64, pz: f64) -> f64 {
    (by - ay) * (pz - az) - (bz - az) * (py - ay)
}

fn fill_row(crossings: &[f64], x_origin: f64, sx: f64, nx: usize) -> Vec<bool> {
    let mut row = vec![false; nx];
    let mut next = 0usize;
    let mut parity = false;
    for (ix, cell) in row.iter_mut().enumerate() {
        let xc = x_origin + (ix as f64 + 0.5) * sx;
        while next < crossings.len() && crossings[next] < xc {
            parity = !parity;
            next += 1;
        }
        *cell = parity;
    }
    row
}

const VOLN_MAGIC: &[u8; 4] = b"VOLN";
const VOLN_VERSION: u16 = 1;

/// Write the grid in the VOLN binary format: magic "VOLN", version u16,
/// kind u8 (0 = binary, 1 = f32 probability), dims as three little-endian
/// u32, then the payload (bit-packed occupancy per x-row, LSB first, or
/// little-endian f32s), x-fastest.
pub fn write_voln<W: Write>(grid: &VoxelGrid, mut writer: W) -> Result<()> {
    let (nx, ny, nz) = grid.dims;
    writer.write_all(VOLN_MAGIC)?;
    writer.write_all(&VOLN_VERSION.to_le_bytes())?;
    let kind_byte = match grid.kind() {
        GridKind::Binary => 0u8,
        GridKind::Probability => 1u8,
    };
    writer.write_all(&[kind_byte])?;
    for d in [nx, ny, nz] {
        writer.write_all(&(d as u32).to_le_bytes())?;
    }
    match &grid.data {
        GridData::Binary(cells) => {
            let row_bytes = nx.div_ceil(8);
            let mut packed = vec![0u8; row_bytes];
            for row in cells.chunks(nx) {
                packed.iter_mut().for_each(|b| *b = 0);
                for (x, &filled) in row.iter().enumerate() {
                    if filled {
                        packed[x / 8] |= 1 << (x % 8);
                    }
                }
                writer.write_all(&packed)?;
            }
        }
        GridData::Probability(cells) => {
            for &p in cells {
                writer.write_all(&p.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Read a grid written by [`write_voln`].
pub fn read_voln<R: Read>(mut reader: R) -> Result<VoxelGrid> {
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated VOLN header".into()))?;
    if &magic != VOLN_MAGIC {
        return Err(Error::Format("bad magic, not a VOLN file".into()));
    }
    let mut buf2 = [0u8; 2];
    reader
        .read_exact(&mut buf2)
        .map_err(|_| Error::Format("truncated VOLN header".into()))?;
    let version = u16::from_le_bytes(buf2);
    if version != VOLN_VERSION {
        return Err(Error::Format(format!("unsupported VOLN version {version}")));
    }
    let mut kind_byte = [0u8; 1];
    reader
        .read_exact(&mut kind_byte)
        .map_err(|_| Error::Format("truncated VOLN header".into()))?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut buf4 = [0u8; 4];
        reader
            .read_exact(&mut buf4)
            .map_err(|_| Error::Format("truncated VOLN header".into()))?;
        *d = u32::from_le_bytes(buf4) as usize;
    }
    let [nx, ny, nz] = dims;
    let cell_count = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| Error::Format("dims overflow".into()))?;

    match kind_byte[0] {
        0 => {
            let row_bytes = nx.div_ceil(8);
            let mut payload = vec![0u8; row_bytes * ny * nz];
            reader
                .read_exact(&mut payload)
                .map_err(|_| Error::Format("truncated VOLN payload".into()))?;
            let mut cells = Vec::with_capacity(cell_count);
            for row in payload.chunks(row_bytes) {
                for x in 0..nx {
                    cells.push(row[x / 8] & (1 << (x % 8)) != 0);
                }
            }
            VoxelGrid::binary((nx, ny, nz), cells)
        }
        1 => {
            let mut payload = vec![0u8; cell_count * 4];
            reader
                .read_exact(&mut payload)
                .map_err(|_| Error::Format("truncated VOLN payload".into()))?;
            let cells: Vec<f32> = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if cells.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Format("probability outside [0, 1]".into()));
            }
            VoxelGrid::probability((nx, ny, nz), cells)
        }
        k => Err(Error::Format(format!("unknown VOLN kind byte {k}"))),
    }
}
