//! Splitting a labeled body mesh into its 14 parts and measuring them.
//!
//! Source meshes come with one segment id per vertex in a 25-segment
//! scheme (fingers, toes, and seven torso segments are separate there).
//! A [`MergeMap`] folds those into the 14 parts used everywhere else:
//! head, torso, and left/right upper arm, fore arm, hand, up leg, lower
//! leg, foot.

use std::collections::BTreeMap;
use std::io::{BufRead, Read};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mesh::{
    close_holes, height_extremes, mesh_volume, validate_manifold, NeumaierSum, TriangleMesh,
};

/// The 14 part names in display order.
pub const PART_NAMES: [&str; 14] = [
    "head",
    "torso",
    "left_upper_arm",
    "left_fore_arm",
    "left_hand",
    "right_upper_arm",
    "right_fore_arm",
    "right_hand",
    "left_up_leg",
    "left_lower_leg",
    "left_foot",
    "right_up_leg",
    "right_lower_leg",
    "right_foot",
];

pub const SOURCE_SEGMENT_COUNT: usize = 25;
pub const MERGED_PART_COUNT: usize = 14;

/// Name of a merged part id in `[1, 14]`.
pub fn canonical_part_name(id: usize) -> Option<&'static str> {
    PART_NAMES.get(id.checked_sub(1)?).copied()
}

/// Which labeling a [`PartLabeling`] carries.
///
/// `Reduced(n)` is a test-fixture scheme with parts `1..=n`; the
/// production path uses the full 14.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelScheme {
    Source25,
    Merged14,
    Reduced(usize),
}

impl LabelScheme {
    fn part_count(&self) -> Option<usize> {
        match self {
            LabelScheme::Source25 => None,
            LabelScheme::Merged14 => Some(MERGED_PART_COUNT),
            LabelScheme::Reduced(n) => Some(*n),
        }
    }

    fn validate_label(&self, label: usize) -> bool {
        match self {
            LabelScheme::Source25 => label < SOURCE_SEGMENT_COUNT,
            LabelScheme::Merged14 => (1..=MERGED_PART_COUNT).contains(&label),
            LabelScheme::Reduced(n) => (1..=*n).contains(&label),
        }
    }
}

/// One segment id per mesh vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartLabeling {
    labels: Vec<usize>,
    scheme: LabelScheme,
}

impl PartLabeling {
    pub fn new(labels: Vec<usize>, scheme: LabelScheme) -> Result<Self> {
        if let LabelScheme::Reduced(0) = scheme {
            return Err(Error::Domain("reduced scheme needs at least one part".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| !scheme.validate_label(l)) {
            return Err(Error::UnknownSegment(bad));
        }
        Ok(Self { labels, scheme })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Read a label file: one integer per line, line i labeling vertex i.
/// Blank lines are skipped.
pub fn load_labels<R: BufRead>(reader: R, scheme: LabelScheme) -> Result<PartLabeling> {
    let mut labels = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let label: usize = trimmed.parse().map_err(|_| Error::Parse {
            line: index + 1,
            message: format!("invalid label '{trimmed}'"),
        })?;
        labels.push(label);
    }
    PartLabeling::new(labels, scheme)
}

#[derive(Deserialize)]
struct MergeMapFile {
    mapping: BTreeMap<String, usize>,
    names: BTreeMap<String, String>,
}

/// Total map from the 25 source segment ids onto the 14 part ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeMap {
    targets: Vec<usize>, // indexed by source id 0..25
}

impl MergeMap {
    /// Build from an explicit table; must cover every source id in
    /// `[0, 24]` and hit every part id in `[1, 14]`.
    pub fn from_table(table: &BTreeMap<usize, usize>) -> Result<Self> {
        let mut targets = vec![0usize; SOURCE_SEGMENT_COUNT];
        for source in 0..SOURCE_SEGMENT_COUNT {
            let target = *table.get(&source).ok_or_else(|| {
                Error::Config(format!("merge map is missing source id {source}"))
            })?;
            if !(1..=MERGED_PART_COUNT).contains(&target) {
                return Err(Error::Config(format!(
                    "merge target {target} for source {source} outside [1, 14]"
                )));
            }
            targets[source] = target;
        }
        for extra in table.keys().filter(|&&k| k >= SOURCE_SEGMENT_COUNT) {
            return Err(Error::Config(format!(
                "merge map has out-of-range source id {extra}"
            )));
        }
        for part in 1..=MERGED_PART_COUNT {
            if !targets.contains(&part) {
                return Err(Error::Config(format!(
                    "merge map never produces part {part} ({})",
                    canonical_part_name(part).unwrap_or("?")
                )));
            }
        }
        Ok(Self { targets })
    }

    /// Parse the JSON form: `{"mapping": {"0": 2, ...}, "names": {...}}`.
    /// The names table must contain exactly the 14 canonical part names.
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let file: MergeMapFile = serde_json::from_reader(reader)
            .map_err(|e| Error::Format(format!("merge map: {e}")))?;
        let mut table = BTreeMap::new();
        for (key, value) in &file.mapping {
            let source: usize = key
                .parse()
                .map_err(|_| Error::Format(format!("merge map key '{key}' is not an id")))?;
            table.insert(source, *value);
        }
        let map = Self::from_table(&table)?;
        for part in 1..=MERGED_PART_COUNT {
            let expected = canonical_part_name(part).unwrap();
            match file.names.get(&part.to_string()) {
                Some(name) if name == expected => {}
                Some(name) => {
                    return Err(Error::Format(format!(
                        "merge map names part {part} '{name}', expected '{expected}'"
                    )))
                }
                None => {
                    return Err(Error::Format(format!(
                        "merge map names table is missing part {part}"
                    )))
                }
            }
        }
        Ok(map)
    }

    /// The built-in table: fingers into hands, toes into feet, and the
    /// seven torso segments (spines, hips, neck, shoulders) into torso.
    pub fn default_surreal() -> Self {
        Self::from_json(DEFAULT_MERGE_MAP_JSON.as_bytes())
            .expect("embedded merge map is valid")
    }

    pub fn apply(&self, source: usize) -> Result<usize> {
        self.targets
            .get(source)
            .copied()
            .ok_or(Error::UnknownSegment(source))
    }
}

/// The shipped default merge map (also at `data/surreal25_merge_map.json`).
pub const DEFAULT_MERGE_MAP_JSON: &str = include_str!("../data/surreal25_merge_map.json");

/// Replace every source segment id with its merged part id.
pub fn merge_labels(labeling: &PartLabeling, map: &MergeMap) -> Result<PartLabeling> {
    if labeling.scheme != LabelScheme::Source25 {
        return Err(Error::Domain(
            "merge_labels expects a 25-segment source labeling".into(),
        ));
    }
    let labels = labeling
        .labels
        .iter()
        .map(|&l| map.apply(l))
        .collect::<Result<Vec<_>>>()?;
    PartLabeling::new(labels, LabelScheme::Merged14)
}

/// The closed per-part meshes of one body.
#[derive(Debug, Clone)]
pub struct PartMeshSet {
    parts: BTreeMap<usize, TriangleMesh>,
    scheme: LabelScheme,
}

impl PartMeshSet {
    pub fn new(parts: BTreeMap<usize, TriangleMesh>, scheme: LabelScheme) -> Result<Self> {
        let count = scheme
            .part_count()
            .ok_or_else(|| Error::Domain("part sets use merged or reduced schemes".into()))?;
        for id in 1..=count {
            match parts.get(&id) {
                None => return Err(Error::MissingPart(part_display_name(id, scheme))),
                Some(mesh) => {
                    if !validate_manifold(mesh).is_closed {
                        return Err(Error::OpenMesh(format!(
                            "part {} is not closed",
                            part_display_name(id, scheme)
                        )));
                    }
                }
            }
        }
        if parts.len() != count {
            return Err(Error::Domain(format!(
                "part set has {} entries, scheme expects {count}",
                parts.len()
            )));
        }
        Ok(Self { parts, scheme })
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn get(&self, id: usize) -> Option<&TriangleMesh> {
        self.parts.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &TriangleMesh)> {
        self.parts.iter().map(|(&id, mesh)| (id, mesh))
    }
}

fn part_display_name(id: usize, scheme: LabelScheme) -> String {
    match scheme {
        LabelScheme::Merged14 => canonical_part_name(id)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("part_{id}")),
        _ => format!("part_{id}"),
    }
}

/// Part id for each face: the majority label of its three vertices, ties
/// broken by the smallest part id.
pub fn assign_faces(mesh: &TriangleMesh, labeling: &PartLabeling) -> Result<Vec<usize>> {
    if labeling.len() != mesh.vertex_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} vertices",
            labeling.len(),
            mesh.vertex_count()
        )));
    }
    Ok(mesh
        .faces()
        .iter()
        .map(|face| {
            let l = [
                labeling.labels[face[0]],
                labeling.labels[face[1]],
                labeling.labels[face[2]],
            ];
            if l[0] == l[1] || l[0] == l[2] {
                l[0]
            } else if l[1] == l[2] {
                l[1]
            } else {
                l[0].min(l[1]).min(l[2])
            }
        })
        .collect())
}

/// Split a closed labeled mesh into per-part meshes, re-indexing each part
/// and filling the cut boundaries so every part comes out closed.
pub fn split_parts(mesh: &TriangleMesh, labeling: &PartLabeling) -> Result<PartMeshSet> {
    let part_count = labeling.scheme.part_count().ok_or_else(|| {
        Error::Domain("split_parts needs merged (or reduced) labels; merge first".into())
    })?;
    let report = validate_manifold(mesh);
    if !report.is_closed {
        return Err(Error::OpenMesh(
            "split_parts requires a closed mesh".into(),
        ));
    }

    let face_parts = assign_faces(mesh, labeling)?;
    let mut parts = BTreeMap::new();
    for id in 1..=part_count {
        let mut vertex_map: BTreeMap<usize, usize> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (face, &part) in mesh.faces().iter().zip(&face_parts) {
            if part != id {
                continue;
            }
            let mut remapped = [0usize; 3];
            for (slot, &v) in remapped.iter_mut().zip(face) {
                *slot = *vertex_map.entry(v).or_insert_with(|| {
                    vertices.push(mesh.vertices()[v]);
                    vertices.len() - 1
                });
            }
            faces.push(remapped);
        }
        if faces.is_empty() {
            return Err(Error::MissingPart(part_display_name(id, labeling.scheme)));
        }
        let open = TriangleMesh::from_parts_unchecked(vertices, faces);
        parts.insert(id, close_holes(&open)?);
    }
    PartMeshSet::new(parts, labeling.scheme)
}

/// Volumes in dm³, keyed by part name, plus their total.
#[derive(Debug, Clone, PartialEq)]
pub struct PartVolumes {
    volumes_dm3: BTreeMap<String, f64>,
    total_dm3: f64,
}

impl PartVolumes {
    pub fn new(volumes_dm3: BTreeMap<String, f64>) -> Result<Self> {
        if volumes_dm3.is_empty() {
            return Err(Error::EmptyInput("no part volumes".into()));
        }
        for (name, &v) in &volumes_dm3 {
            if !(v > 0.0) {
                return Err(Error::Domain(format!(
                    "part '{name}' has non-positive volume {v}"
                )));
            }
        }
        let mut sum = NeumaierSum::default();
        volumes_dm3.values().for_each(|&v| sum.add(v));
        Ok(Self {
            volumes_dm3,
            total_dm3: sum.total(),
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.volumes_dm3.get(name).copied()
    }

    pub fn total_dm3(&self) -> f64 {
        self.total_dm3
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.volumes_dm3.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.volumes_dm3.iter().map(|(n, &v)| (n.as_str(), v))
    }

    /// Entries with the canonical 14 names first, in display order, then
    /// anything else alphabetically.
    pub fn display_order(&self) -> Vec<(&str, f64)> {
        let mut out = Vec::with_capacity(self.volumes_dm3.len());
        for name in PART_NAMES {
            if let Some(v) = self.get(name) {
                out.push((name, v));
            }
        }
        for (name, &v) in &self.volumes_dm3 {
            if !PART_NAMES.contains(&name.as_str()) {
                out.push((name.as_str(), v));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.volumes_dm3.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes_dm3.is_empty()
    }

    /// True when the entries are exactly the canonical 14 part names.
    pub fn is_canonical(&self) -> bool {
        self.volumes_dm3.len() == MERGED_PART_COUNT
            && PART_NAMES.iter().all(|n| self.volumes_dm3.contains_key(*n))
    }
}

impl Serialize for PartVolumes {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.volumes_dm3.len() + 1))?;
        for (name, value) in &self.volumes_dm3 {
            map.serialize_entry(name, value)?;
        }
        map.serialize_entry("total", &self.total_dm3)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for PartVolumes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mut raw: BTreeMap<String, f64> = BTreeMap::deserialize(deserializer)?;
        let stored_total = raw
            .remove("total")
            .ok_or_else(|| D::Error::custom("volumes table is missing 'total'"))?;
        let volumes = PartVolumes::new(raw).map_err(D::Error::custom)?;
        let err = (stored_total - volumes.total_dm3).abs();
        if err > 1e-9 * volumes.total_dm3.abs().max(1.0) {
            return Err(D::Error::custom(format!(
                "stored total {stored_total} disagrees with entry sum {}",
                volumes.total_dm3
            )));
        }
        Ok(volumes)
    }
}

/// Measure every part of a [`PartMeshSet`] in dm³.
pub fn part_volumes(set: &PartMeshSet) -> Result<PartVolumes> {
    let mut volumes = BTreeMap::new();
    for (id, mesh) in set.iter() {
        let v = mesh_volume(mesh)? * 1000.0;
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "part {} measured non-positive volume {v}",
                part_display_name(id, set.scheme)
            )));
        }
        volumes.insert(part_display_name(id, set.scheme), v);
    }
    PartVolumes::new(volumes)
}

/// Body height in centimeters from the mesh's y-extremes, measured in the
/// neutral pose.
pub fn neutral_height(neutral_mesh: &TriangleMesh) -> Result<f64> {
    Ok(height_extremes(neutral_mesh)?.height_m * 100.0)
}
