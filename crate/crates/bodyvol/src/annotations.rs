//! Clip/frame annotation records, split bookkeeping, height sampling, and
//! dataset statistics.
//!
//! A clip groups up to 100 frames that share body shape, so height and the
//! per-part volumes are stored once per clip; frames carry only what varies
//! per image. Split membership is a clip property, never a frame property.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Skeleton2D, Skeleton3D};
use crate::parts::PartVolumes;

pub const MAX_FRAMES_PER_CLIP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

/// Per-clip constants: every frame of the clip shares these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub split: Split,
    pub gender: Gender,
    pub height_cm: f64,
    #[serde(rename = "volumes_dm3")]
    pub volumes: PartVolumes,
    pub frame_count: usize,
}

/// Per-frame annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub clip_id: String,
    pub frame_index: u32,
    pub fully_visible: bool,
    pub pose2d: Skeleton2D,
    pub pose3d: Skeleton3D,
    pub mask_path: Option<String>,
    pub image_path: Option<String>,
}

/// One line of the flat JSON-lines form: a frame with its clip constants
/// inlined.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FlatFrame {
    clip_id: String,
    frame_index: u32,
    split: Split,
    gender: Gender,
    height_cm: f64,
    volumes_dm3: PartVolumes,
    fully_visible: bool,
    pose2d: Skeleton2D,
    pose3d: Skeleton3D,
    mask_path: Option<String>,
    image_path: Option<String>,
}

/// Validated collection of clips and their frames.
#[derive(Debug, Clone)]
pub struct AnnotationStore {
    clips: BTreeMap<String, ClipRecord>,
    frames: Vec<FrameRecord>,
}

impl AnnotationStore {
    pub fn new(clips: Vec<ClipRecord>, mut frames: Vec<FrameRecord>) -> Result<Self> {
        let mut clip_map = BTreeMap::new();
        for clip in clips {
            if !(1..=MAX_FRAMES_PER_CLIP).contains(&clip.frame_count) {
                return Err(Error::Domain(format!(
                    "clip '{}' declares {} frames, allowed range is 1..=100",
                    clip.clip_id, clip.frame_count
                )));
            }
            if clip_map.insert(clip.clip_id.clone(), clip).is_some() {
                return Err(Error::Format("duplicate clip id".into()));
            }
        }

        frames.sort_by(|a, b| {
            (a.clip_id.as_str(), a.frame_index).cmp(&(b.clip_id.as_str(), b.frame_index))
        });
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for pair in frames.windows(2) {
            if pair[0].clip_id == pair[1].clip_id && pair[0].frame_index == pair[1].frame_index {
                return Err(Error::Format(format!(
                    "duplicate frame {}/{}",
                    pair[0].clip_id, pair[0].frame_index
                )));
            }
        }
        for frame in &frames {
            if !clip_map.contains_key(&frame.clip_id) {
                return Err(Error::IdMismatch(format!(
                    "frame references unknown clip '{}'",
                    frame.clip_id
                )));
            }
            *counts.entry(frame.clip_id.as_str()).or_insert(0) += 1;
        }
        for (clip_id, clip) in &clip_map {
            let actual = counts.get(clip_id.as_str()).copied().unwrap_or(0);
            if actual != clip.frame_count {
                return Err(Error::Format(format!(
                    "clip '{clip_id}' declares {} frames but {actual} are present",
                    clip.frame_count
                )));
            }
        }

        Ok(Self {
            clips: clip_map,
            frames,
        })
    }

    pub fn clips(&self) -> impl Iterator<Item = &ClipRecord> {
        self.clips.values()
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipRecord> {
        self.clips.get(clip_id)
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn frame(&self, clip_id: &str, frame_index: u32) -> Option<&FrameRecord> {
        self.frames
            .binary_search_by(|f| {
                (f.clip_id.as_str(), f.frame_index).cmp(&(clip_id, frame_index))
            })
            .ok()
            .map(|i| &self.frames[i])
    }

    pub fn clip_count(&self) -> usize {
        self.clips.len()
    }
}

/// Read the flat JSON-lines form, reconstructing clip records and checking
/// that every frame of a clip carries identical clip constants.
pub fn read_flat_jsonl<R: BufRead>(reader: R) -> Result<AnnotationStore> {
    let mut clips: BTreeMap<String, ClipRecord> = BTreeMap::new();
    let mut frames = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let flat: FlatFrame = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        let candidate = ClipRecord {
            clip_id: flat.clip_id.clone(),
            split: flat.split,
            gender: flat.gender,
            height_cm: flat.height_cm,
            volumes: flat.volumes_dm3.clone(),
            frame_count: 0, // fixed up below
        };
        match clips.get(&flat.clip_id) {
            None => {
                clips.insert(flat.clip_id.clone(), candidate);
            }
            Some(existing) => {
                let consistent = existing.split == candidate.split
                    && existing.gender == candidate.gender
                    && existing.height_cm == candidate.height_cm
                    && existing.volumes == candidate.volumes;
                if !consistent {
                    return Err(Error::Format(format!(
                        "clip '{}' has inconsistent constants at line {}",
                        flat.clip_id,
                        index + 1
                    )));
                }
            }
        }
        frames.push(FrameRecord {
            clip_id: flat.clip_id,
            frame_index: flat.frame_index,
            fully_visible: flat.fully_visible,
            pose2d: flat.pose2d,
            pose3d: flat.pose3d,
            mask_path: flat.mask_path,
            image_path: flat.image_path,
        });
    }
    let mut clip_list: Vec<ClipRecord> = clips.into_values().collect();
    for clip in &mut clip_list {
        clip.frame_count = frames.iter().filter(|f| f.clip_id == clip.clip_id).count();
    }
    AnnotationStore::new(clip_list, frames)
}

/// Write the flat JSON-lines form, one frame per line.
pub fn write_flat_jsonl<W: Write>(store: &AnnotationStore, mut writer: W) -> Result<()> {
    for frame in &store.frames {
        let clip = store
            .clip(&frame.clip_id)
            .expect("store invariants guarantee the clip exists");
        let flat = FlatFrame {
            clip_id: frame.clip_id.clone(),
            frame_index: frame.frame_index,
            split: clip.split,
            gender: clip.gender,
            height_cm: clip.height_cm,
            volumes_dm3: clip.volumes.clone(),
            fully_visible: frame.fully_visible,
            pose2d: frame.pose2d.clone(),
            pose3d: frame.pose3d.clone(),
            mask_path: frame.mask_path.clone(),
            image_path: frame.image_path.clone(),
        };
        serde_json::to_writer(&mut writer, &flat)
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Read clip records, one JSON object per line.
pub fn read_clips_jsonl<R: BufRead>(reader: R) -> Result<Vec<ClipRecord>> {
    let mut clips = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        clips.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: index + 1,
            message: e.to_string(),
        })?);
    }
    Ok(clips)
}

pub fn write_clips_jsonl<W: Write>(clips: &[ClipRecord], mut writer: W) -> Result<()> {
    for clip in clips {
        serde_json::to_writer(&mut writer, clip).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Read frame records, one JSON object per line (the sidecar form).
pub fn read_frames_jsonl<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>> {
    let mut frames = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: index + 1,
            message: e.to_string(),
        })?);
    }
    Ok(frames)
}

pub fn write_frames_jsonl<W: Write>(frames: &[FrameRecord], mut writer: W) -> Result<()> {
    for frame in frames {
        serde_json::to_writer(&mut writer, frame).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Assign splits to whole clips by seeded shuffle. Counts follow the
/// largest-remainder rule, so 10 clips at (0.8, 0.1, 0.1) come out 8/1/1.
pub fn assign_splits(
    mut clips: Vec<ClipRecord>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Vec<ClipRecord>> {
    let parts = [ratios.0, ratios.1, ratios.2];
    if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Domain("split ratios must lie in [0, 1]".into()));
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("split ratios sum to {sum}, not 1")));
    }

    let n = clips.len();
    let mut counts = [0usize; 3];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(3);
    for (i, r) in parts.iter().enumerate() {
        let exact = n as f64 * r;
        counts[i] = exact.floor() as usize;
        remainders.push((i, exact - exact.floor()));
    }
    let assigned: usize = counts.iter().sum();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..n - assigned {
        counts[remainders[k % 3].0] += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    for (rank, &clip_index) in order.iter().enumerate() {
        clips[clip_index].split = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(clips)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHeight {
    pub mean_cm: f64,
    pub std_cm: f64,
}

/// Per-gender Gaussian height distributions with a plausibility clamp.
/// The defaults are configuration, not measured values.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightSampler {
    male: Option<GaussianHeight>,
    female: Option<GaussianHeight>,
    clamp_cm: (f64, f64),
}

impl Default for HeightSampler {
    fn default() -> Self {
        Self {
            male: Some(GaussianHeight {
                mean_cm: 175.0,
                std_cm: 7.0,
            }),
            female: Some(GaussianHeight {
                mean_cm: 162.0,
                std_cm: 6.5,
            }),
            clamp_cm: (140.0, 210.0),
        }
    }
}

impl HeightSampler {
    pub fn new(
        male: Option<GaussianHeight>,
        female: Option<GaussianHeight>,
        clamp_cm: (f64, f64),
    ) -> Result<Self> {
        for params in [male, female].into_iter().flatten() {
            if params.std_cm < 0.0 || !params.mean_cm.is_finite() {
                return Err(Error::Config("invalid height distribution".into()));
            }
        }
        if clamp_cm.0 >= clamp_cm.1 {
            return Err(Error::Config("empty clamp range".into()));
        }
        Ok(Self {
            male,
            female,
            clamp_cm,
        })
    }

    /// Draw a height for the gender, clamped to the configured range.
    pub fn sample<R: Rng + ?Sized>(&self, gender: Gender, rng: &mut R) -> Result<f64> {
        let params = match gender {
            Gender::Male => self.male,
            Gender::Female => self.female,
        }
        .ok_or_else(|| Error::Config(format!("no height distribution for {gender:?}")))?;
        let normal = Normal::new(params.mean_cm, params.std_cm)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(normal.sample(rng).clamp(self.clamp_cm.0, self.clamp_cm.1))
    }
}

/// First fully visible frame of each validation clip; clips without one
/// are skipped.
pub fn validation_frame_selection(store: &AnnotationStore) -> Vec<&FrameRecord> {
    store
        .clips()
        .filter(|clip| clip.split == Split::Val)
        .filter_map(|clip| {
            store
                .frames
                .iter()
                .find(|f| f.clip_id == clip.clip_id && f.fully_visible)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub clips: usize,
    pub frames: usize,
    pub fully_visible: usize,
}

/// Counts per split plus per-part volume means over clips.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetStats {
    pub per_split: BTreeMap<Split, SplitCounts>,
    pub mean_volumes_dm3: BTreeMap<String, f64>,
    pub mean_total_dm3: f64,
}

pub fn dataset_stats(store: &AnnotationStore) -> Result<DatasetStats> {
    if store.clips.is_empty() {
        return Err(Error::EmptyInput("no clips".into()));
    }

    let mut per_split: BTreeMap<Split, SplitCounts> = BTreeMap::new();
    for clip in store.clips() {
        let counts = per_split.entry(clip.split).or_default();
        counts.clips += 1;
    }
    for frame in &store.frames {
        let split = store.clip(&frame.clip_id).unwrap().split;
        let counts = per_split.entry(split).or_default();
        counts.frames += 1;
        if frame.fully_visible {
            counts.fully_visible += 1;
        }
    }

    let first_names: Vec<String> = store
        .clips
        .values()
        .next()
        .unwrap()
        .volumes
        .names()
        .map(str::to_owned)
        .collect();
    let mut sums: BTreeMap<String, f64> = first_names.iter().map(|n| (n.clone(), 0.0)).collect();
    let mut total_sum = 0.0;
    for clip in store.clips() {
        for name in &first_names {
            let v = clip.volumes.get(name).ok_or_else(|| {
                Error::ShapeMismatch(format!(
                    "clip '{}' is missing part '{name}'",
                    clip.clip_id
                ))
            })?;
            *sums.get_mut(name).unwrap() += v;
        }
        total_sum += clip.volumes.total_dm3();
    }
    let n = store.clips.len() as f64;
    Ok(DatasetStats {
        per_split,
        mean_volumes_dm3: sums.into_iter().map(|(k, v)| (k, v / n)).collect(),
        mean_total_dm3: total_sum / n,
    })
}
