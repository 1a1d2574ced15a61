//! Primitive mesh generators used by examples, tests, and the rotation
//! sweep fixtures. All solids come out closed and consistently oriented
//! (outward) except [`open_cylinder`], which deliberately has two holes.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::mesh::TriangleMesh;

/// Axis-aligned box between `min` and `max`.
pub fn axis_box(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let v = vec![
        Point3::new(min.x, min.y, min.z),
        Point3::new(max.x, min.y, min.z),
        Point3::new(max.x, max.y, min.z),
        Point3::new(min.x, max.y, min.z),
        Point3::new(min.x, min.y, max.z),
        Point3::new(max.x, min.y, max.z),
        Point3::new(max.x, max.y, max.z),
        Point3::new(min.x, max.y, max.z),
    ];
    let faces = vec![
        [0, 3, 2],
        [0, 2, 1],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::from_parts_unchecked(v, faces)
}

/// Unit cube spanning `[0, 1]^3`.
pub fn unit_cube() -> TriangleMesh {
    axis_box(Point3::origin(), Point3::new(1.0, 1.0, 1.0))
}

/// Tetrahedron (0,0,0), (1,0,0), (0,1,0), (0,0,1); volume 1/6.
pub fn unit_tetrahedron() -> TriangleMesh {
    let v = vec![
        Point3::origin(),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    TriangleMesh::from_parts_unchecked(v, faces)
}

/// Regular tetrahedron on alternating cube corners; volume 8/3.
pub fn regular_tetrahedron() -> TriangleMesh {
    let v = vec![
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(1.0, -1.0, -1.0),
        Point3::new(-1.0, 1.0, -1.0),
        Point3::new(-1.0, -1.0, 1.0),
    ];
    let faces = vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]];
    TriangleMesh::from_parts_unchecked(v, faces)
}

/// Sphere approximation: icosahedron subdivided `subdivisions` times with
/// all vertices pushed onto the sphere of the given radius.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| {
        let v = Vector3::new(x, y, z).normalize() * radius;
        Point3::from(v)
    })
    .collect();

    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for face in &faces {
            let mid = |cache: &mut HashMap<(usize, usize), usize>,
                       vertices: &mut Vec<Point3<f64>>,
                       a: usize,
                       b: usize| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let m = (vertices[a].coords + vertices[b].coords) / 2.0;
                    vertices.push(Point3::from(m.normalize() * radius));
                    vertices.len() - 1
                })
            };
            let [a, b, c] = *face;
            let ab = mid(&mut midpoints, &mut vertices, a, b);
            let bc = mid(&mut midpoints, &mut vertices, b, c);
            let ca = mid(&mut midpoints, &mut vertices, c, a);
            next_faces.push([a, ab, ca]);
            next_faces.push([b, bc, ab]);
            next_faces.push([c, ca, bc]);
            next_faces.push([ab, bc, ca]);
        }
        faces = next_faces;
    }

    TriangleMesh::from_parts_unchecked(vertices, faces)
}

/// Tube between y = 0 and y = `height` with no caps: two boundary loops.
pub fn open_cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    assert!(segments >= 3);
    let mut vertices = Vec::with_capacity(segments * 2);
    for i in 0..segments {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
        vertices.push(Point3::new(radius * theta.cos(), 0.0, radius * theta.sin()));
    }
    for i in 0..segments {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
        vertices.push(Point3::new(
            radius * theta.cos(),
            height,
            radius * theta.sin(),
        ));
    }
    let mut faces = Vec::with_capacity(segments * 2);
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (b0, b1) = (i, j);
        let (t0, t1) = (segments + i, segments + j);
        faces.push([b0, t0, t1]);
        faces.push([b0, t1, b1]);
    }
    TriangleMesh::from_parts_unchecked(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{mesh_volume, validate_manifold};

    #[test]
    fn primitives_are_closed_and_outward() {
        for (mesh, volume) in [
            (unit_cube(), 1.0),
            (unit_tetrahedron(), 1.0 / 6.0),
            (regular_tetrahedron(), 8.0 / 3.0),
        ] {
            let report = validate_manifold(&mesh);
            assert!(report.is_closed && report.is_consistently_oriented);
            assert!((mesh_volume(&mesh).unwrap() - volume).abs() < 1e-12);
        }
    }

    #[test]
    fn icosphere_face_count_grows_fourfold() {
        assert_eq!(icosphere(1.0, 0).face_count(), 20);
        assert_eq!(icosphere(1.0, 2).face_count(), 320);
        assert!(validate_manifold(&icosphere(1.0, 2)).is_closed);
    }

    #[test]
    fn open_cylinder_has_two_loops() {
        let report = validate_manifold(&open_cylinder(1.0, 1.0, 8));
        assert!(report.is_edge_manifold);
        assert!(!report.is_closed);
        assert_eq!(report.boundary_loops.len(), 2);
    }
}
