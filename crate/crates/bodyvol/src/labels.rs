//! Codecs for the intermediate label representations: 2D-pose heatmaps,
//! body-part segmentation masks, and depth-binned 3D-pose grids.
//!
//! All encoders are pure and deterministic. Heatmap Gaussians are written
//! only inside a ±4σ window around the peak; everything outside is exactly
//! zero, which argmax decoding never notices.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 16 joints that describe a body pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JointName {
    Head,
    Neck,
    LeftShoulder,
    RightShoulder,
    LeftArm,
    RightArm,
    LeftForeArm,
    RightForeArm,
    LeftHand,
    RightHand,
    LeftHipJoint,
    RightHipJoint,
    LeftKnee,
    RightKnee,
    LeftFoot,
    RightFoot,
}

pub const JOINT_COUNT: usize = 16;

impl JointName {
    pub const ALL: [JointName; JOINT_COUNT] = [
        JointName::Head,
        JointName::Neck,
        JointName::LeftShoulder,
        JointName::RightShoulder,
        JointName::LeftArm,
        JointName::RightArm,
        JointName::LeftForeArm,
        JointName::RightForeArm,
        JointName::LeftHand,
        JointName::RightHand,
        JointName::LeftHipJoint,
        JointName::RightHipJoint,
        JointName::LeftKnee,
        JointName::RightKnee,
        JointName::LeftFoot,
        JointName::RightFoot,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            JointName::Head => "head",
            JointName::Neck => "neck",
            JointName::LeftShoulder => "left_shoulder",
            JointName::RightShoulder => "right_shoulder",
            JointName::LeftArm => "left_arm",
            JointName::RightArm => "right_arm",
            JointName::LeftForeArm => "left_fore_arm",
            JointName::RightForeArm => "right_fore_arm",
            JointName::LeftHand => "left_hand",
            JointName::RightHand => "right_hand",
            JointName::LeftHipJoint => "left_hip_joint",
            JointName::RightHipJoint => "right_hip_joint",
            JointName::LeftKnee => "left_knee",
            JointName::RightKnee => "right_knee",
            JointName::LeftFoot => "left_foot",
            JointName::RightFoot => "right_foot",
        }
    }

    pub fn from_str(name: &str) -> Option<JointName> {
        JointName::ALL.iter().find(|j| j.as_str() == name).copied()
    }

    pub fn index(&self) -> usize {
        JointName::ALL.iter().position(|j| j == self).unwrap()
    }
}

/// One joint in pixel coordinates (u right, v down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint2D {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

/// 16 named joints over a 256 x 256 image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<NamedJoint2D>", into = "Vec<NamedJoint2D>")]
pub struct Skeleton2D {
    joints: [Joint2D; JOINT_COUNT],
}

impl Skeleton2D {
    pub fn new(joints: [Joint2D; JOINT_COUNT]) -> Self {
        Self { joints }
    }

    pub fn joints(&self) -> &[Joint2D; JOINT_COUNT] {
        &self.joints
    }

    pub fn joint(&self, name: JointName) -> &Joint2D {
        &self.joints[name.index()]
    }
}

#[derive(Serialize, Deserialize)]
struct NamedJoint2D {
    name: String,
    u: f64,
    v: f64,
    #[serde(default = "default_visible")]
    visible: bool,
}

fn default_visible() -> bool {
    true
}

impl TryFrom<Vec<NamedJoint2D>> for Skeleton2D {
    type Error = String;

    fn try_from(entries: Vec<NamedJoint2D>) -> std::result::Result<Self, String> {
        let mut joints = [None; JOINT_COUNT];
        for entry in entries {
            let name = JointName::from_str(&entry.name)
                .ok_or_else(|| format!("unknown joint '{}'", entry.name))?;
            if joints[name.index()].is_some() {
                return Err(format!("duplicate joint '{}'", entry.name));
            }
            joints[name.index()] = Some(Joint2D {
                u: entry.u,
                v: entry.v,
                visible: entry.visible,
            });
        }
        let mut out = [Joint2D {
            u: 0.0,
            v: 0.0,
            visible: false,
        }; JOINT_COUNT];
        for (i, slot) in joints.into_iter().enumerate() {
            out[i] =
                slot.ok_or_else(|| format!("missing joint '{}'", JointName::ALL[i].as_str()))?;
        }
        Ok(Skeleton2D { joints: out })
    }
}

impl From<Skeleton2D> for Vec<NamedJoint2D> {
    fn from(skel: Skeleton2D) -> Self {
        JointName::ALL
            .iter()
            .map(|name| {
                let j = skel.joint(*name);
                NamedJoint2D {
                    name: name.as_str().to_owned(),
                    u: j.u,
                    v: j.v,
                    visible: j.visible,
                }
            })
            .collect()
    }
}

/// One joint with pixel position and relative depth in `[0, 1]`
/// (orthogonal projection, 0 = nearest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint3D {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// 16 named joints with relative depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<NamedJoint3D>", into = "Vec<NamedJoint3D>")]
pub struct Skeleton3D {
    joints: [Joint3D; JOINT_COUNT],
}

impl Skeleton3D {
    pub fn new(joints: [Joint3D; JOINT_COUNT]) -> Self {
        Self { joints }
    }

    pub fn joints(&self) -> &[Joint3D; JOINT_COUNT] {
        &self.joints
    }

    pub fn joint(&self, name: JointName) -> &Joint3D {
        &self.joints[name.index()]
    }
}

#[derive(Serialize, Deserialize)]
struct NamedJoint3D {
    name: String,
    u: f64,
    v: f64,
    depth: f64,
}

impl TryFrom<Vec<NamedJoint3D>> for Skeleton3D {
    type Error = String;

    fn try_from(entries: Vec<NamedJoint3D>) -> std::result::Result<Self, String> {
        let mut joints = [None; JOINT_COUNT];
        for entry in entries {
            let name = JointName::from_str(&entry.name)
                .ok_or_else(|| format!("unknown joint '{}'", entry.name))?;
            if joints[name.index()].is_some() {
                return Err(format!("duplicate joint '{}'", entry.name));
            }
            joints[name.index()] = Some(Joint3D {
                u: entry.u,
                v: entry.v,
                depth: entry.depth,
            });
        }
        let mut out = [Joint3D {
            u: 0.0,
            v: 0.0,
            depth: 0.0,
        }; JOINT_COUNT];
        for (i, slot) in joints.into_iter().enumerate() {
            out[i] =
                slot.ok_or_else(|| format!("missing joint '{}'", JointName::ALL[i].as_str()))?;
        }
        Ok(Skeleton3D { joints: out })
    }
}

impl From<Skeleton3D> for Vec<NamedJoint3D> {
    fn from(skel: Skeleton3D) -> Self {
        JointName::ALL
            .iter()
            .map(|name| {
                let j = skel.joint(*name);
                NamedJoint3D {
                    name: name.as_str().to_owned(),
                    u: j.u,
                    v: j.v,
                    depth: j.depth,
                }
            })
            .collect()
    }
}

/// 16 per-joint scalar fields at 64 or 256 square.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    resolution: usize,
    channels: Vec<Vec<f32>>,
}

impl HeatmapStack {
    pub fn new(resolution: usize, channels: Vec<Vec<f32>>) -> Result<Self> {
        if resolution != 64 && resolution != 256 {
            return Err(Error::Domain(format!(
                "heatmap resolution {resolution} is neither 64 nor 256"
            )));
        }
        if channels.len() != JOINT_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "{} heatmap channels, expected {JOINT_COUNT}",
                channels.len()
            )));
        }
        for channel in &channels {
            if channel.len() != resolution * resolution {
                return Err(Error::ShapeMismatch(
                    "heatmap channel size does not match resolution".into(),
                ));
            }
            if channel.iter().any(|v| !v.is_finite() || *v > 1.0) {
                return Err(Error::Domain(
                    "heatmap values must be finite and at most 1".into(),
                ));
            }
        }
        Ok(Self {
            resolution,
            channels,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }
}

/// Threshold below which a decoded channel counts as "no joint".
pub const VISIBILITY_EPSILON: f32 = 1e-6;

fn checked_peak(coord: f64, resolution: usize) -> Option<usize> {
    let cell = coord.round();
    if cell < 0.0 || cell >= resolution as f64 {
        return None;
    }
    Some(cell as usize)
}

/// Render one isotropic Gaussian per visible joint, peak exactly 1 at the
/// joint's nearest cell. Invisible joints produce all-zero channels.
///
/// Coordinates are in heatmap cells; callers encoding a 256-space skeleton
/// at resolution 64 scale them first.
pub fn encode_heatmaps(skel: &Skeleton2D, resolution: usize, sigma: f64) -> Result<HeatmapStack> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma {sigma} must be positive")));
    }
    if resolution != 64 && resolution != 256 {
        return Err(Error::Domain(format!(
            "heatmap resolution {resolution} is neither 64 nor 256"
        )));
    }
    let window = (4.0 * sigma).ceil() as i64 + 1;
    let mut channels = Vec::with_capacity(JOINT_COUNT);
    for (i, joint) in skel.joints().iter().enumerate() {
        let mut channel = vec![0.0f32; resolution * resolution];
        if joint.visible {
            let (cu, cv) = match (
                checked_peak(joint.u, resolution),
                checked_peak(joint.v, resolution),
            ) {
                (Some(cu), Some(cv)) => (cu, cv),
                _ => {
                    return Err(Error::Domain(format!(
                        "visible joint '{}' at ({}, {}) is outside the {resolution} grid",
                        JointName::ALL[i].as_str(),
                        joint.u,
                        joint.v
                    )))
                }
            };
            let denom = 2.0 * sigma * sigma;
            for dv in -window..=window {
                let y = cv as i64 + dv;
                if y < 0 || y >= resolution as i64 {
                    continue;
                }
                for du in -window..=window {
                    let x = cu as i64 + du;
                    if x < 0 || x >= resolution as i64 {
                        continue;
                    }
                    let r2 = (du * du + dv * dv) as f64;
                    channel[x as usize + resolution * y as usize] =
                        (-r2 / denom).exp() as f32;
                }
            }
        }
        channels.push(channel);
    }
    HeatmapStack::new(resolution, channels)
}

/// Per-channel argmax decoding. Ties resolve to the smallest row-major
/// index; a channel whose values all stay below [`VISIBILITY_EPSILON`]
/// decodes as an invisible joint at the origin.
pub fn decode_heatmaps(stack: &HeatmapStack) -> Skeleton2D {
    let resolution = stack.resolution;
    let mut joints = [Joint2D {
        u: 0.0,
        v: 0.0,
        visible: false,
    }; JOINT_COUNT];
    for (i, channel) in stack.channels.iter().enumerate() {
        let mut best = f32::NEG_INFINITY;
        let mut best_idx = 0usize;
        for (idx, &value) in channel.iter().enumerate() {
            if value > best {
                best = value;
                best_idx = idx;
            }
        }
        if best < VISIBILITY_EPSILON {
            continue;
        }
        joints[i] = Joint2D {
            u: (best_idx % resolution) as f64,
            v: (best_idx / resolution) as f64,
            visible: true,
        };
    }
    Skeleton2D::new(joints)
}

pub const POSE_GRID_RES: usize = 64;
pub const DEPTH_BINS: usize = 12;

/// Bin index of a relative depth in `[0, 1]`; the last bin absorbs 1.0.
pub fn depth_to_bin(depth: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&depth) {
        return Err(Error::Domain(format!("depth {depth} outside [0, 1]")));
    }
    Ok(((depth * DEPTH_BINS as f64).floor() as usize).min(DEPTH_BINS - 1))
}

/// Depth at the center of a bin.
pub fn bin_center_depth(bin: usize) -> f64 {
    (bin as f64 + 0.5) / DEPTH_BINS as f64
}

/// 16 voxel grids of 64 x 64 cells x 12 depth bins, one per joint.
/// Channel layout is x-fastest, then y, then depth bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGrid3D {
    channels: Vec<Vec<f32>>,
}

impl PoseGrid3D {
    pub const CHANNEL_LEN: usize = POSE_GRID_RES * POSE_GRID_RES * DEPTH_BINS;

    pub fn new(channels: Vec<Vec<f32>>) -> Result<Self> {
        if channels.len() != JOINT_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "{} pose-grid channels, expected {JOINT_COUNT}",
                channels.len()
            )));
        }
        for channel in &channels {
            if channel.len() != Self::CHANNEL_LEN {
                return Err(Error::ShapeMismatch(
                    "pose-grid channel has the wrong cell count".into(),
                ));
            }
            if channel.iter().any(|v| !v.is_finite() || *v > 1.0) {
                return Err(Error::Domain(
                    "pose-grid values must be finite and at most 1".into(),
                ));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn index(x: usize, y: usize, bin: usize) -> usize {
        x + POSE_GRID_RES * (y + POSE_GRID_RES * bin)
    }
}

/// Place one 3D Gaussian per joint with mean (u/4, v/4, depth bin).
/// Spatial sigma is in cells of the 64-grid, depth sigma in bins.
pub fn encode_pose3d(
    skel: &Skeleton3D,
    spatial_sigma: f64,
    depth_sigma: f64,
) -> Result<PoseGrid3D> {
    if !(spatial_sigma > 0.0) || !(depth_sigma > 0.0) {
        return Err(Error::Domain("sigmas must be positive".into()));
    }
    let s_window = (4.0 * spatial_sigma).ceil() as i64 + 1;
    let d_window = (4.0 * depth_sigma).ceil() as i64 + 1;
    let mut channels = Vec::with_capacity(JOINT_COUNT);
    for (i, joint) in skel.joints().iter().enumerate() {
        let bin = depth_to_bin(joint.depth)?;
        let mu = joint.u / 4.0;
        let mv = joint.v / 4.0;
        let (cu, cv) = match (
            checked_peak(mu, POSE_GRID_RES),
            checked_peak(mv, POSE_GRID_RES),
        ) {
            (Some(cu), Some(cv)) => (cu, cv),
            _ => {
                return Err(Error::Domain(format!(
                    "joint '{}' at ({}, {}) projects outside the 64 grid",
                    JointName::ALL[i].as_str(),
                    joint.u,
                    joint.v
                )))
            }
        };
        let s_denom = 2.0 * spatial_sigma * spatial_sigma;
        let d_denom = 2.0 * depth_sigma * depth_sigma;
        let mut channel = vec![0.0f32; PoseGrid3D::CHANNEL_LEN];
        for db in -d_window..=d_window {
            let b = bin as i64 + db;
            if b < 0 || b >= DEPTH_BINS as i64 {
                continue;
            }
            let depth_term = -(db * db) as f64 / d_denom;
            for dv in -s_window..=s_window {
                let y = cv as i64 + dv;
                if y < 0 || y >= POSE_GRID_RES as i64 {
                    continue;
                }
                let fy = y as f64 - mv;
                for du in -s_window..=s_window {
                    let x = cu as i64 + du;
                    if x < 0 || x >= POSE_GRID_RES as i64 {
                        continue;
                    }
                    let fx = x as f64 - mu;
                    let value = (-(fx * fx + fy * fy) / s_denom + depth_term).exp();
                    channel[PoseGrid3D::index(x as usize, y as usize, b as usize)] =
                        value as f32;
                }
            }
        }
        channels.push(channel);
    }
    PoseGrid3D::new(channels)
}

/// Per-channel argmax; the decoded depth is the center of the winning bin
/// and positions are scaled back to 256-image pixels.
pub fn decode_pose3d(grid: &PoseGrid3D) -> Skeleton3D {
    let mut joints = [Joint3D {
        u: 0.0,
        v: 0.0,
        depth: bin_center_depth(0),
    }; JOINT_COUNT];
    for (i, channel) in grid.channels.iter().enumerate() {
        let mut best = f32::NEG_INFINITY;
        let mut best_idx = 0usize;
        for (idx, &value) in channel.iter().enumerate() {
            if value > best {
                best = value;
                best_idx = idx;
            }
        }
        let x = best_idx % POSE_GRID_RES;
        let y = (best_idx / POSE_GRID_RES) % POSE_GRID_RES;
        let bin = best_idx / (POSE_GRID_RES * POSE_GRID_RES);
        joints[i] = Joint3D {
            u: (x * 4) as f64,
            v: (y * 4) as f64,
            depth: bin_center_depth(bin),
        };
    }
    Skeleton3D::new(joints)
}

pub const SEGMENTATION_CLASSES: usize = 15;

/// Per-pixel class ids in `[0, 14]`; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    resolution: usize,
    classes: Vec<u8>,
}

impl SegmentationMask {
    pub fn new(resolution: usize, classes: Vec<u8>) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::Domain("mask resolution must be positive".into()));
        }
        if classes.len() != resolution * resolution {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {resolution} square mask",
                classes.len()
            )));
        }
        if let Some(&bad) = classes.iter().find(|&&c| c as usize >= SEGMENTATION_CLASSES) {
            return Err(Error::Domain(format!(
                "class id {bad} outside [0, 14]"
            )));
        }
        Ok(Self {
            resolution,
            classes,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }
}

/// 15-channel expansion of a segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotStack {
    resolution: usize,
    channels: Vec<Vec<f32>>,
}

impl OneHotStack {
    pub fn new(resolution: usize, channels: Vec<Vec<f32>>) -> Result<Self> {
        if channels.len() != SEGMENTATION_CLASSES {
            return Err(Error::ShapeMismatch(format!(
                "{} one-hot channels, expected {SEGMENTATION_CLASSES}",
                channels.len()
            )));
        }
        for channel in &channels {
            if channel.len() != resolution * resolution {
                return Err(Error::ShapeMismatch(
                    "one-hot channel size does not match resolution".into(),
                ));
            }
        }
        Ok(Self {
            resolution,
            channels,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }
}

/// Exact one-hot expansion of the mask.
pub fn one_hot_segmentation(mask: &SegmentationMask) -> OneHotStack {
    let pixels = mask.resolution * mask.resolution;
    let mut channels = vec![vec![0.0f32; pixels]; SEGMENTATION_CLASSES];
    for (pixel, &class) in mask.classes.iter().enumerate() {
        channels[class as usize][pixel] = 1.0;
    }
    OneHotStack {
        resolution: mask.resolution,
        channels,
    }
}

/// Per-pixel argmax over the 15 channels; ties resolve to the smallest
/// class id, so this inverts [`one_hot_segmentation`] exactly.
pub fn segmentation_from_one_hot(stack: &OneHotStack) -> SegmentationMask {
    let pixels = stack.resolution * stack.resolution;
    let mut classes = vec![0u8; pixels];
    for (pixel, class) in classes.iter_mut().enumerate() {
        let mut best = f32::NEG_INFINITY;
        for (c, channel) in stack.channels.iter().enumerate() {
            if channel[pixel] > best {
                best = channel[pixel];
                *class = c as u8;
            }
        }
    }
    SegmentationMask {
        resolution: stack.resolution,
        classes,
    }
}

// Next whitespace-delimited PGM header token, skipping '#' comment lines.
fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Read a mask from a binary PGM (P5) with class ids as pixel values.
pub fn read_mask_pgm<R: BufRead>(mut reader: R) -> Result<SegmentationMask> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut pos = 0usize;

    if pgm_token(&bytes, &mut pos)? != "P5" {
        return Err(Error::Format("not a binary PGM (P5) file".into()));
    }
    let width: usize = pgm_token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Format("invalid PGM width".into()))?;
    let height: usize = pgm_token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Format("invalid PGM height".into()))?;
    let maxval: usize = pgm_token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Format("invalid PGM maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    if width != height {
        return Err(Error::Format(format!(
            "mask must be square, got {width} x {height}"
        )));
    }
    pos += 1; // single whitespace after maxval
    let expected = width * height;
    if bytes.len() < pos + expected {
        return Err(Error::Format("truncated PGM payload".into()));
    }
    SegmentationMask::new(width, bytes[pos..pos + expected].to_vec())
}

/// Write a mask as binary PGM (P5).
pub fn write_mask_pgm<W: Write>(mask: &SegmentationMask, mut writer: W) -> Result<()> {
    write!(writer, "P5\n{} {}\n255\n", mask.resolution, mask.resolution)?;
    writer.write_all(&mask.classes)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tensor containers: encoded stacks travel on disk as probability voxel
// grids with the channel axis stacked along z.
// ---------------------------------------------------------------------------

use crate::voxel::VoxelGrid;

/// Pack a heatmap stack into one grid: dims (res, res, 16).
pub fn heatmaps_to_grid(stack: &HeatmapStack) -> Result<VoxelGrid> {
    let res = stack.resolution;
    let mut cells = Vec::with_capacity(res * res * JOINT_COUNT);
    for channel in &stack.channels {
        cells.extend_from_slice(channel);
    }
    VoxelGrid::probability((res, res, JOINT_COUNT), cells)
}

/// Unpack a (res, res, 16) probability grid into a heatmap stack.
pub fn heatmaps_from_grid(grid: &VoxelGrid) -> Result<HeatmapStack> {
    let (nx, ny, nz) = grid.dims();
    if nx != ny || nz != JOINT_COUNT {
        return Err(Error::ShapeMismatch(format!(
            "grid dims {:?} do not hold a 16-channel heatmap stack",
            grid.dims()
        )));
    }
    let cells = grid.probability_cells()?;
    let channels = cells.chunks(nx * ny).map(<[f32]>::to_vec).collect();
    HeatmapStack::new(nx, channels)
}

/// Pack a 3D-pose grid into one grid: dims (64, 64, 12 * 16), each joint
/// occupying 12 consecutive z-slabs.
pub fn pose_grid_to_grid(grid3d: &PoseGrid3D) -> Result<VoxelGrid> {
    let mut cells = Vec::with_capacity(PoseGrid3D::CHANNEL_LEN * JOINT_COUNT);
    for channel in &grid3d.channels {
        cells.extend_from_slice(channel);
    }
    VoxelGrid::probability(
        (POSE_GRID_RES, POSE_GRID_RES, DEPTH_BINS * JOINT_COUNT),
        cells,
    )
}

/// Unpack a (64, 64, 192) probability grid into a 3D-pose grid.
pub fn pose_grid_from_grid(grid: &VoxelGrid) -> Result<PoseGrid3D> {
    if grid.dims() != (POSE_GRID_RES, POSE_GRID_RES, DEPTH_BINS * JOINT_COUNT) {
        return Err(Error::ShapeMismatch(format!(
            "grid dims {:?} do not hold a pose grid",
            grid.dims()
        )));
    }
    let cells = grid.probability_cells()?;
    let channels = cells
        .chunks(PoseGrid3D::CHANNEL_LEN)
        .map(<[f32]>::to_vec)
        .collect();
    PoseGrid3D::new(channels)
}

/// Pack a one-hot segmentation stack into one grid: dims (res, res, 15).
pub fn one_hot_to_grid(stack: &OneHotStack) -> Result<VoxelGrid> {
    let res = stack.resolution;
    let mut cells = Vec::with_capacity(res * res * SEGMENTATION_CLASSES);
    for channel in &stack.channels {
        cells.extend_from_slice(channel);
    }
    VoxelGrid::probability((res, res, SEGMENTATION_CLASSES), cells)
}

/// Unpack a (res, res, 15) probability grid into a one-hot stack.
pub fn one_hot_from_grid(grid: &VoxelGrid) -> Result<OneHotStack> {
    let (nx, ny, nz) = grid.dims();
    if nx != ny || nz != SEGMENTATION_CLASSES {
        return Err(Error::ShapeMismatch(format!(
            "grid dims {:?} do not hold a 15-channel one-hot stack",
            grid.dims()
        )));
    }
    let cells = grid.probability_cells()?;
    let channels = cells.chunks(nx * ny).map(<[f32]>::to_vec).collect();
    OneHotStack::new(nx, channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn skeleton_at(u: f64, v: f64) -> Skeleton2D {
        Skeleton2D::new([Joint2D { u, v, visible: true }; JOINT_COUNT])
    }

    #[test]
    fn heatmap_peak_is_one_at_the_joint() {
        let skel = skeleton_at(10.0, 20.0);
        let stack = encode_heatmaps(&skel, 64, 1.0).unwrap();
        let channel = &stack.channels()[0];
        let peak = channel[10 + 64 * 20];
        assert_eq!(peak, 1.0);
        let best = channel
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!((best % 64, best / 64), (10, 20));
    }

    #[test]
    fn invisible_joint_encodes_to_zero_channel() {
        let mut joints = [Joint2D {
            u: 5.0,
            v: 5.0,
            visible: true,
        }; JOINT_COUNT];
        joints[3].visible = false;
        let stack = encode_heatmaps(&Skeleton2D::new(joints), 64, 1.0).unwrap();
        assert!(stack.channels()[3].iter().all(|&v| v == 0.0));
        let decoded = decode_heatmaps(&stack);
        assert!(!decoded.joints()[3].visible);
        assert!(decoded.joints()[2].visible);
    }

    #[test]
    fn encoding_is_deterministic() {
        let skel = skeleton_at(31.25, 17.75);
        let a = encode_heatmaps(&skel, 64, 2.0).unwrap();
        let b = encode_heatmaps(&skel, 64, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_channel_decodes_to_origin() {
        let channels = vec![vec![0.25f32; 64 * 64]; JOINT_COUNT];
        let stack = HeatmapStack::new(64, channels).unwrap();
        let decoded = decode_heatmaps(&stack);
        assert_eq!((decoded.joints()[0].u, decoded.joints()[0].v), (0.0, 0.0));
        assert!(decoded.joints()[0].visible);
    }

    #[test]
    fn sigma_must_be_positive() {
        let skel = skeleton_at(1.0, 1.0);
        assert!(matches!(
            encode_heatmaps(&skel, 64, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn visible_joint_outside_grid_is_rejected() {
        let skel = skeleton_at(300.0, 10.0);
        assert!(matches!(
            encode_heatmaps(&skel, 256, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn depth_bin_examples() {
        assert_eq!(depth_to_bin(0.5).unwrap(), 6);
        assert!((bin_center_depth(6) - 6.5 / 12.0).abs() < 1e-15);
        assert_eq!(depth_to_bin(0.0).unwrap(), 0);
        assert!((bin_center_depth(0) - 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(depth_to_bin(1.0).unwrap(), 11);
        assert!(depth_to_bin(-0.1).is_err());
        assert!(depth_to_bin(1.1).is_err());
    }

    #[test]
    fn pose3d_round_trip_depth_and_position() {
        let joints = [Joint3D {
            u: 100.0,
            v: 60.0,
            depth: 0.37,
        }; JOINT_COUNT];
        let grid = encode_pose3d(&Skeleton3D::new(joints), 1.0, 1.0).unwrap();
        let decoded = decode_pose3d(&grid);
        for j in decoded.joints() {
            assert!((j.u - 100.0).abs() <= 2.0);
            assert!((j.v - 60.0).abs() <= 2.0);
            assert!((j.depth - 0.37).abs() <= 1.0 / 24.0 + 1e-12);
        }
    }

    #[test]
    fn one_hot_round_trip_and_background() {
        let mask = SegmentationMask::new(4, vec![0; 16]).unwrap();
        let stack = one_hot_segmentation(&mask);
        assert!(stack.channels()[0].iter().all(|&v| v == 1.0));
        assert!(stack.channels()[1..]
            .iter()
            .all(|c| c.iter().all(|&v| v == 0.0)));
        assert_eq!(segmentation_from_one_hot(&stack), mask);
    }

    #[test]
    fn mask_rejects_out_of_range_class() {
        assert!(matches!(
            SegmentationMask::new(2, vec![0, 1, 15, 3]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pgm_round_trip() {
        let mask = SegmentationMask::new(3, vec![0, 1, 2, 3, 4, 5, 6, 7, 14]).unwrap();
        let mut buf = Vec::new();
        write_mask_pgm(&mask, &mut buf).unwrap();
        let back = read_mask_pgm(buf.as_slice()).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn pgm_rejects_bad_class_values() {
        let bytes = b"P5\n2 2\n255\n\x00\x01\x0f\x02";
        assert!(read_mask_pgm(&bytes[..]).is_err());
    }

    #[test]
    fn skeleton_json_round_trip() {
        let mut joints = [Joint2D {
            u: 1.0,
            v: 2.0,
            visible: true,
        }; JOINT_COUNT];
        joints[5] = Joint2D {
            u: 200.5,
            v: 13.25,
            visible: false,
        };
        let skel = Skeleton2D::new(joints);
        let json = serde_json::to_string(&skel).unwrap();
        let back: Skeleton2D = serde_json::from_str(&json).unwrap();
        assert_eq!(back, skel);
    }

    #[test]
    fn skeleton_json_requires_all_joints() {
        let json = r#"[{"name": "head", "u": 1.0, "v": 2.0}]"#;
        assert!(serde_json::from_str::<Skeleton2D>(json).is_err());
    }

    proptest! {
        #[test]
        fn heatmap_round_trip_within_half_pixel(
            u in 0.0f64..255.0,
            v in 0.0f64..255.0,
        ) {
            let skel = skeleton_at(u, v);
            let decoded = decode_heatmaps(&encode_heatmaps(&skel, 256, 1.0).unwrap());
            for j in decoded.joints() {
                prop_assert!((j.u - u).abs() <= 0.5);
                prop_assert!((j.v - v).abs() <= 0.5);
            }
        }

        #[test]
        fn heatmap_exact_at_cell_centers(
            u in 0usize..256,
            v in 0usize..256,
        ) {
            let skel = skeleton_at(u as f64, v as f64);
            let decoded = decode_heatmaps(&encode_heatmaps(&skel, 256, 1.5).unwrap());
            prop_assert_eq!(decoded.joints()[7].u, u as f64);
            prop_assert_eq!(decoded.joints()[7].v, v as f64);
        }

        #[test]
        fn depth_quantization_bounded(d in 0.0f64..=1.0) {
            let bin = depth_to_bin(d).unwrap();
            prop_assert!((bin_center_depth(bin) - d).abs() <= 1.0 / 24.0 + 1e-12);
        }

        #[test]
        fn one_hot_is_bijective(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let res = 8;
            let classes: Vec<u8> = (0..res * res).map(|_| rng.gen_range(0..15)).collect();
            let mask = SegmentationMask::new(res, classes).unwrap();
            let back = segmentation_from_one_hot(&one_hot_segmentation(&mask));
            prop_assert_eq!(back, mask);
        }
    }
}
