//! Per-part volumes of a labeled body mesh: merge the 25-segment source
//! labels into 14 parts, split the mesh, and measure every part.
//!
//! The subject here is a boxy synthetic person whose segments carry the
//! source ids (fingers and toes separate, torso in four slabs), so the
//! merge step has real work to do.
//!
//! Run with: cargo run --example part_volumes

use nalgebra::Point3;

use bodyvol::mesh::{mesh_volume, TriangleMesh};
use bodyvol::parts::{
    merge_labels, neutral_height, part_volumes, split_parts, LabelScheme, MergeMap, PartLabeling,
};
use bodyvol::shapes;

/// Disjoint labeled boxes assembled into one mesh.
struct Builder {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    labels: Vec<usize>,
}

impl Builder {
    fn add(&mut self, segment: usize, min: (f64, f64, f64), max: (f64, f64, f64)) {
        let cube = shapes::axis_box(
            Point3::new(min.0, min.1, min.2),
            Point3::new(max.0, max.1, max.2),
        );
        let base = self.vertices.len();
        self.vertices.extend_from_slice(cube.vertices());
        self.faces
            .extend(cube.faces().iter().map(|f| f.map(|v| v + base)));
        self.labels.extend(std::iter::repeat(segment).take(8));
    }
}

fn box_person() -> (TriangleMesh, PartLabeling) {
    let mut b = Builder {
        vertices: Vec::new(),
        faces: Vec::new(),
        labels: Vec::new(),
    };
    // Source segment ids follow the 25-segment convention the default
    // merge map expects (head 15, torso slabs 3/6/9/24, fingers 22/23,
    // toes 10/11, ...).
    b.add(15, (-0.10, 1.55, -0.10), (0.10, 1.75, 0.10)); // head
    b.add(24, (-0.15, 0.80, -0.10), (0.15, 1.00, 0.10)); // hips
    b.add(3, (-0.15, 1.01, -0.10), (0.15, 1.20, 0.10)); // spine
    b.add(6, (-0.15, 1.21, -0.10), (0.15, 1.35, 0.10)); // spine1
    b.add(9, (-0.15, 1.36, -0.10), (0.15, 1.50, 0.10)); // spine2
    b.add(16, (0.20, 1.20, -0.05), (0.30, 1.45, 0.05)); // left upper arm
    b.add(18, (0.20, 0.95, -0.05), (0.30, 1.15, 0.05)); // left fore arm
    b.add(20, (0.20, 0.82, -0.05), (0.30, 0.92, 0.05)); // left hand
    b.add(22, (0.20, 0.74, -0.05), (0.30, 0.80, 0.05)); // left fingers
    b.add(17, (-0.30, 1.20, -0.05), (-0.20, 1.45, 0.05)); // right upper arm
    b.add(19, (-0.30, 0.95, -0.05), (-0.20, 1.15, 0.05)); // right fore arm
    b.add(21, (-0.30, 0.82, -0.05), (-0.20, 0.92, 0.05)); // right hand
    b.add(23, (-0.30, 0.74, -0.05), (-0.20, 0.80, 0.05)); // right fingers
    b.add(1, (0.02, 0.40, -0.06), (0.13, 0.78, 0.06)); // left up leg
    b.add(4, (0.02, 0.05, -0.06), (0.13, 0.38, 0.06)); // left lower leg
    b.add(7, (0.02, 0.00, -0.06), (0.13, 0.04, 0.15)); // left foot
    b.add(10, (0.02, 0.00, 0.16), (0.13, 0.03, 0.22)); // left toes
    b.add(2, (-0.13, 0.40, -0.06), (-0.02, 0.78, 0.06)); // right up leg
    b.add(5, (-0.13, 0.05, -0.06), (-0.02, 0.38, 0.06)); // right lower leg
    b.add(8, (-0.13, 0.00, -0.06), (-0.02, 0.04, 0.15)); // right foot
    b.add(11, (-0.13, 0.00, 0.16), (-0.02, 0.03, 0.22)); // right toes

    let mesh = TriangleMesh::new(b.vertices, b.faces).expect("builder output is valid");
    let labeling =
        PartLabeling::new(b.labels, LabelScheme::Source25).expect("segment ids are in range");
    (mesh, labeling)
}

fn main() -> bodyvol::Result<()> {
    let (mesh, source_labels) = box_person();
    println!(
        "box person: {} vertices, {} faces, height {:.1} cm",
        mesh.vertex_count(),
        mesh.face_count(),
        neutral_height(&mesh)?
    );

    let map = MergeMap::default_surreal();
    let merged = merge_labels(&source_labels, &map)?;
    let distinct: std::collections::BTreeSet<usize> = merged.labels().iter().copied().collect();
    println!(
        "merged {} source segments into {} parts",
        source_labels
            .labels()
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len(),
        distinct.len()
    );

    let parts = split_parts(&mesh, &merged)?;
    let volumes = part_volumes(&parts)?;
    println!("\n{:<16} {:>10}", "part", "dm3");
    for (name, value) in volumes.display_order() {
        println!("{name:<16} {value:>10.3}");
    }
    println!("{:<16} {:>10.3}", "total", volumes.total_dm3());

    let whole = mesh_volume(&mesh)? * 1000.0;
    println!(
        "\nwhole-mesh volume {whole:.3} dm3; split sum differs by {:.3e} (relative)",
        (whole - volumes.total_dm3()).abs() / whole
    );
    Ok(())
}
