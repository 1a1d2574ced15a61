//! Closed triangle meshes and the volume math built on them.
//!
//! Meshes are plain indexed triangle soups. Counter-clockwise winding viewed
//! from outside is the outward-normal convention, so the signed
//! divergence-theorem volume of a closed mesh comes out positive.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

/// Indexed triangle mesh in meters.
///
/// Invariants held by construction: every face index is in range and no face
/// repeats a vertex index.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= vertices.len() {
                    return Err(Error::Structure(format!(
                        "face {i} references vertex {v}, but the mesh has {} vertices",
                        vertices.len()
                    )));
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::Structure(format!(
                    "face {i} repeats a vertex index: {face:?}"
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    /// Skips the index checks; callers must already hold the invariants.
    pub(crate) fn from_parts_unchecked(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Self {
        debug_assert!(faces
            .iter()
            .all(|f| f.iter().all(|&v| v < vertices.len())
                && f[0] != f[1]
                && f[1] != f[2]
                && f[0] != f[2]));
        Self { vertices, faces }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Axis-aligned bounding box, or `None` for a vertex-free mesh.
    pub fn bounding_box(&self) -> Option<Aabb> {
        let first = *self.vertices.first()?;
        let mut min = first;
        let mut max = first;
        for v in &self.vertices {
            min = Point3::new(min.x.min(v.x), min.y.min(v.y), min.z.min(v.z));
            max = Point3::new(max.x.max(v.x), max.y.max(v.y), max.z.max(v.z));
        }
        Some(Aabb { min, max })
    }

    /// Mean of the vertex positions.
    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.vertices.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.vertices.iter().map(|p| p.coords).sum();
        Some(Point3::from(sum / self.vertices.len() as f64))
    }

    /// Copy with every vertex shifted by `t`.
    pub fn translated(&self, t: Vector3<f64>) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Copy with every face winding reversed (flips all normals).
    pub fn reversed(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }
}

/// Axis-aligned box, inclusive on all sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from((self.min.coords + self.max.coords) * 0.5)
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && self.min.z <= other.min.z
            && self.max.x >= other.max.x
            && self.max.y >= other.max.y
            && self.max.z >= other.max.z
    }

    /// Smallest cube with the same center that contains this box. Rounding
    /// of `center ± half` can land a face one ulp inside the source box, so
    /// the result is clamped to keep containment exact.
    pub fn bounding_cube(&self) -> Aabb {
        let ext = self.extents();
        let side = ext.x.max(ext.y).max(ext.z);
        let half = Vector3::repeat(side * 0.5);
        let c = self.center();
        let lo = c - half;
        let hi = c + half;
        Aabb {
            min: Point3::new(
                lo.x.min(self.min.x),
                lo.y.min(self.min.y),
                lo.z.min(self.min.z),
            ),
            max: Point3::new(
                hi.x.max(self.max.x),
                hi.y.max(self.max.y),
                hi.z.max(self.max.z),
            ),
        }
    }
}

/// Manifold diagnostics; defects are reported, never raised as errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldReport {
    pub is_edge_manifold: bool,
    pub is_closed: bool,
    pub is_consistently_oriented: bool,
    /// Cycles of vertex indices along edges used by exactly one face, in the
    /// direction the adjacent faces traverse them.
    pub boundary_loops: Vec<Vec<usize>>,
    pub degenerate_face_count: usize,
}

/// Highest and lowest vertices (by y) and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightExtremes {
    pub highest: Point3<f64>,
    pub lowest: Point3<f64>,
    pub height_m: f64,
}

/// Result of [`load_obj`]: the mesh plus a count of directives that the
/// subset parser skipped (vn, vt, usemtl, ...).
#[derive(Debug, Clone)]
pub struct ObjLoad {
    pub mesh: TriangleMesh,
    pub ignored_directives: usize,
}

/// Neumaier compensated summation; keeps cancellation error near one ulp of
/// the running total instead of growing with the term count.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Signed volume of the mesh: the sum over faces of the scalar triple
/// product `v1 · (v2 × v3) / 6`.
///
/// No topology checks are performed; for an open mesh the value depends on
/// the position of the mesh relative to the origin and is only meaningful
/// as a diagnostic. Use [`mesh_volume`] for the checked variant.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    let mut acc = NeumaierSum::default();
    for face in &mesh.faces {
        let a = mesh.vertices[face[0]].coords;
        let b = mesh.vertices[face[1]].coords;
        let c = mesh.vertices[face[2]].coords;
        acc.add(a.dot(&b.cross(&c)) / 6.0);
    }
    acc.total()
}

/// Volume in m³ of a closed, consistently oriented mesh.
///
/// Outward (counter-clockwise) winding yields a positive value; a fully
/// inverted mesh yields the negated volume.
pub fn mesh_volume(mesh: &TriangleMesh) -> Result<f64> {
    let report = validate_manifold(mesh);
    if !report.is_closed {
        return Err(Error::OpenMesh(format!(
            "{} boundary loop(s); close the holes before measuring volume",
            report.boundary_loops.len()
        )));
    }
    if !report.is_consistently_oriented {
        return Err(Error::OpenMesh(
            "face windings are not consistently oriented".into(),
        ));
    }
    Ok(signed_volume(mesh))
}

/// Inspect edge topology and orientation.
pub fn validate_manifold(mesh: &TriangleMesh) -> ManifoldReport {
    // Per undirected edge: total use count and how often it was traversed in
    // (low, high) index order.
    let mut edges: HashMap<(usize, usize), (u32, u32)> = HashMap::new();
    for face in &mesh.faces {
        for (a, b) in face_edges(face) {
            let key = (a.min(b), a.max(b));
            let entry = edges.entry(key).or_insert((0, 0));
            entry.0 += 1;
            if a < b {
                entry.1 += 1;
            }
        }
    }

    let mut is_edge_manifold = true;
    let mut is_closed = true;
    let mut is_consistently_oriented = true;
    for &(count, forward) in edges.values() {
        if count > 2 {
            is_edge_manifold = false;
            is_consistently_oriented = false;
        }
        if count != 2 {
            is_closed = false;
        }
        if count == 2 && forward != 1 {
            // Both faces traverse the edge in the same direction.
            is_consistently_oriented = false;
        }
    }

    let boundary_loops = chain_boundary_loops(mesh, &edges);
    if !boundary_loops.is_empty() {
        is_closed = false;
    }

    let degenerate_face_count = mesh
        .faces
        .iter()
        .filter(|face| {
            let a = mesh.vertices[face[0]];
            let b = mesh.vertices[face[1]];
            let c = mesh.vertices[face[2]];
            (b - a).cross(&(c - a)).norm_squared() == 0.0
        })
        .count();

    ManifoldReport {
        is_edge_manifold,
        is_closed,
        is_consistently_oriented,
        boundary_loops,
        degenerate_face_count,
    }
}

fn face_edges(face: &[usize; 3]) -> [(usize, usize); 3] {
    [
        (face[0], face[1]),
        (face[1], face[2]),
        (face[2], face[0]),
    ]
}

/// Chain boundary edges (used by exactly one face) into cycles, following
/// the direction the owning faces traverse them. Starts each loop at its
/// smallest available vertex so output is deterministic.
fn chain_boundary_loops(
    mesh: &TriangleMesh,
    edges: &HashMap<(usize, usize), (u32, u32)>,
) -> Vec<Vec<usize>> {
    // successor[a] = sorted list of b with boundary edge (a, b).
    let mut successor: HashMap<usize, Vec<usize>> = HashMap::new();
    for face in &mesh.faces {
        for (a, b) in face_edges(face) {
            let key = (a.min(b), a.max(b));
            if edges[&key].0 == 1 {
                successor.entry(a).or_default().push(b);
            }
        }
    }
    for targets in successor.values_mut() {
        targets.sort_unstable_by(|x, y| y.cmp(x)); // pop() yields smallest
    }

    let mut loops = Vec::new();
    loop {
        let start = match successor
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&k, _)| k)
            .min()
        {
            Some(s) => s,
            None => break,
        };
        let mut cycle = vec![start];
        let mut current = start;
        loop {
            let next = match successor.get_mut(&current).and_then(|v| v.pop()) {
                Some(n) => n,
                // Dangling path: only possible on non-edge-manifold input.
                None => break,
            };
            if next == start {
                break;
            }
            cycle.push(next);
            current = next;
        }
        loops.push(cycle);
    }
    loops
}

/// Fill every boundary loop with a triangle fan from a new vertex at the
/// loop centroid, oriented consistently with the surrounding faces.
///
/// Already-closed meshes are returned unchanged.
pub fn close_holes(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let report = validate_manifold(mesh);
    if !report.is_edge_manifold {
        return Err(Error::UnsupportedTopology(
            "mesh has edges shared by more than two faces; cannot fill holes".into(),
        ));
    }
    if report.boundary_loops.is_empty() {
        return Ok(mesh.clone());
    }

    let mut vertices = mesh.vertices.clone();
    let mut faces = mesh.faces.clone();
    for cycle in &report.boundary_loops {
        if cycle.len() < 3 {
            return Err(Error::UnsupportedTopology(format!(
                "boundary loop with {} vertices cannot be filled",
                cycle.len()
            )));
        }
        let centroid: Vector3<f64> = cycle.iter().map(|&v| mesh.vertices[v].coords).sum();
        let center_index = vertices.len();
        vertices.push(Point3::from(centroid / cycle.len() as f64));
        // The loop runs in face direction; the fill triangles must traverse
        // each boundary edge in the opposite direction.
        for i in 0..cycle.len() {
            let a = cycle[i];
            let b = cycle[(i + 1) % cycle.len()];
            faces.push([b, a, center_index]);
        }
    }

    let filled = TriangleMesh::from_parts_unchecked(vertices, faces);
    let check = validate_manifold(&filled);
    if !check.is_closed {
        return Err(Error::UnsupportedTopology(
            "hole filling did not produce a closed mesh".into(),
        ));
    }
    Ok(filled)
}

/// Highest and lowest vertices by y and the height between them.
pub fn height_extremes(mesh: &TriangleMesh) -> Result<HeightExtremes> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyInput("mesh has no vertices".into()));
    }
    let mut highest = mesh.vertices[0];
    let mut lowest = mesh.vertices[0];
    for &v in &mesh.vertices {
        if v.y > highest.y {
            highest = v;
        }
        if v.y < lowest.y {
            lowest = v;
        }
    }
    Ok(HeightExtremes {
        highest,
        lowest,
        height_m: highest.y - lowest.y,
    })
}

const ROTATION_TOLERANCE: f64 = 1e-6;

/// Apply a rigid motion `v -> R v + t` to every vertex.
pub fn transform_mesh(
    mesh: &TriangleMesh,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Result<TriangleMesh> {
    let det = rotation.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(Error::InvalidTransform(format!(
            "matrix determinant {det} is not 1"
        )));
    }
    let gram = rotation * rotation.transpose() - Matrix3::identity();
    if gram.iter().any(|e| e.abs() > ROTATION_TOLERANCE) {
        return Err(Error::InvalidTransform(
            "matrix is not orthonormal".into(),
        ));
    }
    Ok(TriangleMesh {
        vertices: mesh
            .vertices
            .iter()
            .map(|v| Point3::from(rotation * v.coords + translation))
            .collect(),
        faces: mesh.faces.clone(),
    })
}

/// Parse the OBJ subset: `v x y z [w]` and triangular `f i j k` lines
/// (1-based indices, optional `i/t/n` suffixes). Comments and blank lines
/// are skipped; any other directive is counted and ignored.
pub fn load_obj<R: BufRead>(reader: R) -> Result<ObjLoad> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut ignored = 0;

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: line_no,
                            message: format!("invalid vertex coordinate '{t}'"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if coords.len() != 3 && coords.len() != 4 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("vertex line has {} coordinates", coords.len()),
                    });
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let indices: Vec<usize> = tokens
                    .map(|t| parse_face_index(t, line_no, vertices.len()))
                    .collect::<Result<_>>()?;
                if indices.len() != 3 {
                    return Err(Error::UnsupportedFace {
                        line: line_no,
                        vertex_count: indices.len(),
                    });
                }
                let face = [indices[0], indices[1], indices[2]];
                if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                    return Err(Error::Structure(format!(
                        "face at line {line_no} repeats a vertex index"
                    )));
                }
                faces.push(face);
            }
            Some(_) => ignored += 1,
            None => {}
        }
    }

    Ok(ObjLoad {
        mesh: TriangleMesh::from_parts_unchecked(vertices, faces),
        ignored_directives: ignored,
    })
}

fn parse_face_index(token: &str, line_no: usize, vertex_count: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let value: i64 = head.parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("invalid face index '{token}'"),
    })?;
    if value < 1 {
        return Err(Error::Structure(format!(
            "face index {value} at line {line_no} is not positive"
        )));
    }
    let zero_based = (value - 1) as usize;
    if zero_based >= vertex_count {
        return Err(Error::Structure(format!(
            "face index {value} at line {line_no} exceeds {vertex_count} vertices"
        )));
    }
    Ok(zero_based)
}

/// Write the mesh in the same OBJ subset that [`load_obj`] reads.
pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut writer: W) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(writer, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(writer, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;
    use std::io::Cursor;

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn load_obj_unit_cube() {
        let loaded = load_obj(Cursor::new(CUBE_OBJ)).unwrap();
        assert_eq!(loaded.mesh.vertex_count(), 8);
        assert_eq!(loaded.mesh.face_count(), 12);
        assert_eq!(loaded.ignored_directives, 0);
    }

    #[test]
    fn load_obj_index_out_of_range() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        match load_obj(Cursor::new(src)) {
            Err(Error::Structure(msg)) => assert!(msg.contains('9')),
            other => panic!("expected structure error, got {other:?}"),
        }
    }

    #[test]
    fn load_obj_empty_file() {
        let loaded = load_obj(Cursor::new("")).unwrap();
        assert_eq!(loaded.mesh.vertex_count(), 0);
        assert_eq!(loaded.mesh.face_count(), 0);
    }

    #[test]
    fn load_obj_rejects_quads() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        match load_obj(Cursor::new(src)) {
            Err(Error::UnsupportedFace { vertex_count, line }) => {
                assert_eq!(vertex_count, 4);
                assert_eq!(line, 5);
            }
            other => panic!("expected unsupported face, got {other:?}"),
        }
    }

    #[test]
    fn load_obj_reports_malformed_line_number() {
        let src = "v 0 0 0\nv oops 0 0\n";
        match load_obj(Cursor::new(src)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_obj_counts_ignored_directives() {
        let src = "mtllib m.mtl\nv 0 0 0\nvn 0 1 0\nvt 0 0\n";
        let loaded = load_obj(Cursor::new(src)).unwrap();
        assert_eq!(loaded.ignored_directives, 3);
    }

    #[test]
    fn obj_round_trip() {
        let cube = shapes::unit_cube();
        let mut buf = Vec::new();
        write_obj(&cube, &mut buf).unwrap();
        let loaded = load_obj(Cursor::new(buf)).unwrap();
        assert_eq!(loaded.mesh, cube);
    }

    #[test]
    fn cube_is_closed() {
        let report = validate_manifold(&shapes::unit_cube());
        assert!(report.is_edge_manifold);
        assert!(report.is_closed);
        assert!(report.is_consistently_oriented);
        assert!(report.boundary_loops.is_empty());
        assert_eq!(report.degenerate_face_count, 0);
    }

    #[test]
    fn cube_with_missing_face_has_one_loop() {
        let cube = shapes::unit_cube();
        let faces: Vec<[usize; 3]> = cube.faces()[1..].to_vec();
        let open = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
        let report = validate_manifold(&open);
        assert!(!report.is_closed);
        assert_eq!(report.boundary_loops.len(), 1);
        assert_eq!(report.boundary_loops[0].len(), 3);
    }

    #[test]
    fn flipped_winding_breaks_orientation() {
        let cube = shapes::unit_cube();
        let mut faces = cube.faces().to_vec();
        faces[0] = [faces[0][0], faces[0][2], faces[0][1]];
        let broken = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
        let report = validate_manifold(&broken);
        assert!(!report.is_consistently_oriented);
    }

    #[test]
    fn close_holes_restores_cube_volume() {
        let cube = shapes::unit_cube();
        let faces: Vec<[usize; 3]> = cube.faces()[1..].to_vec();
        let open = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
        let closed = close_holes(&open).unwrap();
        assert!(validate_manifold(&closed).is_closed);
        assert!((mesh_volume(&closed).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn close_holes_is_noop_on_closed_mesh() {
        let cube = shapes::unit_cube();
        let closed = close_holes(&cube).unwrap();
        assert_eq!(closed, cube);
    }

    #[test]
    fn close_holes_fills_both_cylinder_loops() {
        let cylinder = shapes::open_cylinder(0.5, 2.0, 32);
        let report = validate_manifold(&cylinder);
        assert_eq!(report.boundary_loops.len(), 2);
        let closed = close_holes(&cylinder).unwrap();
        let check = validate_manifold(&closed);
        assert!(check.is_closed);
        assert!(check.is_consistently_oriented);
        // Prism over a regular 32-gon cross-section.
        let expected = 0.5 * 32.0 * (2.0 * std::f64::consts::PI / 32.0).sin() * 0.25 * 2.0;
        assert!((mesh_volume(&closed).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_volume() {
        let tetra = shapes::unit_tetrahedron();
        assert!((mesh_volume(&tetra).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cube_volume() {
        assert!((mesh_volume(&shapes::unit_cube()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn icosphere_volume_close_to_sphere() {
        let sphere = shapes::icosphere(1.0, 4);
        let analytic = 4.0 * std::f64::consts::PI / 3.0;
        let volume = mesh_volume(&sphere).unwrap();
        assert!((volume - analytic).abs() / analytic < 0.01);
    }

    #[test]
    fn open_mesh_volume_is_an_error() {
        let cube = shapes::unit_cube();
        let faces: Vec<[usize; 3]> = cube.faces()[1..].to_vec();
        let open = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
        assert!(matches!(mesh_volume(&open), Err(Error::OpenMesh(_))));
    }

    #[test]
    fn height_extremes_cube() {
        let h = height_extremes(&shapes::unit_cube()).unwrap();
        assert_eq!(h.height_m, 1.0);
        let shifted = shapes::unit_cube().translated(Vector3::new(0.0, 5.0, 0.0));
        assert_eq!(height_extremes(&shifted).unwrap().height_m, 1.0);
    }

    #[test]
    fn height_extremes_single_vertex() {
        let mesh = TriangleMesh::new(vec![Point3::new(1.0, 2.0, 3.0)], vec![]).unwrap();
        let h = height_extremes(&mesh).unwrap();
        assert_eq!(h.height_m, 0.0);
    }

    #[test]
    fn height_extremes_empty_mesh() {
        let mesh = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(height_extremes(&mesh), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn transform_identity() {
        let cube = shapes::unit_cube();
        let same = transform_mesh(&cube, &Matrix3::identity(), &Vector3::zeros()).unwrap();
        assert_eq!(same, cube);
    }

    #[test]
    fn transform_rejects_scaling() {
        let cube = shapes::unit_cube();
        let scale = Matrix3::identity() * 2.0;
        assert!(matches!(
            transform_mesh(&cube, &scale, &Vector3::zeros()),
            Err(Error::InvalidTransform(_))
        ));
    }

    #[test]
    fn quarter_turn_permutes_axes() {
        let cube = shapes::unit_cube();
        let rot = nalgebra::Rotation3::from_axis_angle(
            &Vector3::z_axis(),
            std::f64::consts::FRAC_PI_2,
        );
        let turned = transform_mesh(&cube, rot.matrix(), &Vector3::zeros()).unwrap();
        let image = turned.vertices()[1]; // (1, 0, 0)
        assert!((image - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rotation_preserves_volume() {
        let sphere = shapes::icosphere(0.7, 3);
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), 0.83);
        let turned = transform_mesh(&sphere, rot.matrix(), &Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let v0 = mesh_volume(&sphere).unwrap();
        let v1 = mesh_volume(&turned).unwrap();
        assert!((v0 - v1).abs() < 1e-9 * (1.0 + v0.abs()));
    }

    #[test]
    fn reversed_windings_negate_volume() {
        let sphere = shapes::icosphere(1.0, 2);
        let v = signed_volume(&sphere);
        let flipped = signed_volume(&sphere.reversed());
        assert_eq!(v, -flipped);
    }

    #[test]
    fn degenerate_faces_are_counted_not_rejected() {
        // Two distinct indices sharing one position: zero area, valid indices.
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ];
        let mesh = TriangleMesh::new(vertices, vec![[0, 1, 2]]).unwrap();
        let report = validate_manifold(&mesh);
        assert_eq!(report.degenerate_face_count, 1);
    }

    #[test]
    fn new_rejects_repeated_index() {
        let vertices = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(TriangleMesh::new(vertices, vec![[0, 0, 1]]).is_err());
    }

    proptest! {
        #[test]
        fn closed_volume_translation_invariant(
            tx in -10.0f64..10.0,
            ty in -10.0f64..10.0,
            tz in -10.0f64..10.0,
        ) {
            let sphere = shapes::icosphere(1.0, 3);
            let v0 = signed_volume(&sphere);
            let v1 = signed_volume(&sphere.translated(Vector3::new(tx, ty, tz)));
            prop_assert!((v1 - v0).abs() <= 1e-9 * (1.0 + v0.abs()));
        }

        #[test]
        fn open_volume_depends_on_translation(
            ty in 2.0f64..10.0,
        ) {
            let sphere = shapes::icosphere(1.0, 2);
            let faces: Vec<[usize; 3]> = sphere.faces()[1..].to_vec();
            let open = TriangleMesh::new(sphere.vertices().to_vec(), faces).unwrap();
            let v0 = signed_volume(&open);
            let v1 = signed_volume(&open.translated(Vector3::new(0.0, ty, 0.0)));
            prop_assert!((v1 - v0).abs() > 1e-3 * v0.abs());
        }

        #[test]
        fn hole_filling_always_closes(missing in 0usize..12) {
            let cube = shapes::unit_cube();
            let faces: Vec<[usize; 3]> = cube
                .faces()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != missing)
                .map(|(_, f)| *f)
                .collect();
            let open = TriangleMesh::new(cube.vertices().to_vec(), faces).unwrap();
            let closed = close_holes(&open).unwrap();
            prop_assert!(validate_manifold(&closed).is_closed);
        }
    }
}
