//! Acceptance suite: one test per criterion, each asserting its stated
//! tolerance and runtime budget. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the per-criterion detail lines).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bodyvol::annotations::{
    assign_splits, validation_frame_selection, write_flat_jsonl, AnnotationStore, ClipRecord,
    FrameRecord, Gender, Split,
};
use bodyvol::labels::{
    bin_center_depth, decode_heatmaps, decode_pose3d, depth_to_bin, encode_heatmaps,
    encode_pose3d, one_hot_segmentation, segmentation_from_one_hot, Joint2D, Joint3D,
    SegmentationMask, Skeleton2D, Skeleton3D,
};
use bodyvol::mesh::{
    height_extremes, mesh_volume, signed_volume, validate_manifold, Aabb, TriangleMesh,
};
use bodyvol::metrics::{aggregate, VolumePrediction};
use bodyvol::parts::{part_volumes, split_parts, LabelScheme, PartLabeling, PartVolumes};
use bodyvol::shapes;
use bodyvol::sweep::{rotation_sweep, SweepAxis};
use bodyvol::voxel::{baseline_volume, cell_volume, voxelize, VoxelGrid};

fn finish(criterion: &str, started: Instant, budget: Duration, detail: &str) {
    let elapsed = started.elapsed();
    println!("{criterion}: PASS ({detail}; {elapsed:.2?} of {budget:.2?} budget)");
    assert!(
        elapsed <= budget,
        "{criterion} exceeded its runtime budget: {elapsed:.2?} > {budget:.2?}"
    );
}

/// Combine triangle soups; components stay topologically separate.
fn merge_meshes(meshes: &[TriangleMesh]) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for mesh in meshes {
        let base = vertices.len();
        vertices.extend_from_slice(mesh.vertices());
        faces.extend(mesh.faces().iter().map(|f| f.map(|v| v + base)));
    }
    TriangleMesh::new(vertices, faces).expect("merged fixture is structurally valid")
}

/// Box person: a 0.4 x 1.75 x 0.3 m body with a detached 0.1 x 0.6 x 0.1 m
/// arm, either beside the torso (neutral) or floating above the head
/// (raised). Neutral standing height is 1.75 m either way.
fn box_person(arm_raised: bool) -> TriangleMesh {
    let body = shapes::axis_box(Point3::new(-0.2, 0.0, -0.15), Point3::new(0.2, 1.75, 0.15));
    let arm = if arm_raised {
        shapes::axis_box(Point3::new(0.25, 1.8, -0.05), Point3::new(0.35, 2.4, 0.05))
    } else {
        shapes::axis_box(Point3::new(0.25, 0.9, -0.05), Point3::new(0.35, 1.5, 0.05))
    };
    merge_meshes(&[body, arm])
}

#[test]
fn criterion_01_divergence_volume_exactness() {
    let started = Instant::now();

    let cube_volume = mesh_volume(&shapes::unit_cube()).unwrap();
    assert!(
        (cube_volume - 1.0).abs() < 1e-12,
        "unit cube volume {cube_volume}"
    );

    let tetra_volume = mesh_volume(&shapes::regular_tetrahedron()).unwrap();
    let analytic = 8.0 / 3.0;
    assert!(
        (tetra_volume - analytic).abs() < 1e-12,
        "regular tetrahedron volume {tetra_volume} vs {analytic}"
    );

    finish(
        "criterion 01 (volume exactness)",
        started,
        Duration::from_secs(1),
        &format!("cube {cube_volume}, tetra {tetra_volume}"),
    );
}

#[test]
fn criterion_02_closedness_discrimination() {
    let started = Instant::now();
    let shift = Vector3::new(10.0, -5.0, 3.0);

    let sphere = shapes::icosphere(1.0, 3);
    let closed_before = signed_volume(&sphere);
    let closed_after = signed_volume(&sphere.translated(shift));
    let closed_change = (closed_after - closed_before).abs() / closed_before.abs();
    assert!(
        closed_change < 1e-9,
        "closed mesh volume moved by {closed_change} under translation"
    );

    let open = TriangleMesh::new(
        sphere.vertices().to_vec(),
        sphere.faces()[1..].to_vec(),
    )
    .unwrap();
    let open_before = signed_volume(&open);
    let open_after = signed_volume(&open.translated(shift));
    let open_change = (open_after - open_before).abs() / open_before.abs();
    assert!(
        open_change > 1e-3,
        "open mesh volume moved by only {open_change} under translation"
    );

    finish(
        "criterion 02 (closedness discrimination)",
        started,
        Duration::from_secs(1),
        &format!("closed drift {closed_change:.2e}, open drift {open_change:.2e}"),
    );
}

#[test]
fn criterion_03_voxel_oracle_agreement() {
    let started = Instant::now();

    // Unit sphere at 128^3 in an exactly fitting cube.
    let sphere = shapes::icosphere(1.0, 4);
    let bounds = sphere.bounding_box().unwrap().bounding_cube();
    let dims = (128, 128, 128);
    let grid = voxelize(&sphere, dims, &bounds).unwrap();
    let voxel_estimate = grid.filled_count().unwrap() as f64 * cell_volume(&bounds, dims);
    let eq4 = mesh_volume(&sphere).unwrap();
    let sphere_err = (voxel_estimate - eq4).abs() / eq4;
    assert!(sphere_err < 0.02, "sphere voxel error {sphere_err}");

    // Lattice-aligned box in exactly fitting bounds with cubic cells:
    // every cell center is inside, so the count is exact.
    let aligned = shapes::axis_box(Point3::origin(), Point3::new(0.5, 1.0, 0.25));
    let aligned_bounds = aligned.bounding_box().unwrap();
    let aligned_dims = (32, 64, 16);
    let aligned_grid = voxelize(&aligned, aligned_dims, &aligned_bounds).unwrap();
    assert_eq!(aligned_grid.filled_count().unwrap(), 32 * 64 * 16);

    // Offset box inside a unit cube: per-axis counts are off by at most
    // one cell, so the estimate sits inside the one-voxel-shell bracket.
    let offset = shapes::axis_box(
        Point3::new(0.073, 0.141, 0.227),
        Point3::new(0.913, 0.869, 0.791),
    );
    let unit_bounds = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
    let n = 128usize;
    let offset_grid = voxelize(&offset, (n, n, n), &unit_bounds).unwrap();
    let estimate =
        offset_grid.filled_count().unwrap() as f64 * cell_volume(&unit_bounds, (n, n, n));
    let cell = 1.0 / n as f64;
    let extents = [0.913 - 0.073, 0.869 - 0.141, 0.791 - 0.227];
    let lower: f64 = extents.iter().map(|e| e - cell).product();
    let upper: f64 = extents.iter().map(|e| e + cell).product();
    assert!(
        (lower..=upper).contains(&estimate),
        "offset box estimate {estimate} outside [{lower}, {upper}]"
    );

    finish(
        "criterion 03 (voxelization oracle)",
        started,
        Duration::from_secs(30),
        &format!("sphere err {sphere_err:.4}, box bracket [{lower:.4}, {upper:.4}] holds"),
    );
}

#[test]
fn criterion_04_baseline_arithmetic() {
    let started = Instant::now();

    // Hand-computed: h_m 1.6 m, h_v 100, 16,000 voxels.
    let grid = VoxelGrid::binary((40, 100, 4), vec![true; 16_000]).unwrap();
    let estimate = baseline_volume(&grid, 1.6).unwrap();
    assert_eq!(estimate.voxel_height, 100);
    assert_eq!(estimate.filled_count, 16_000);
    assert_eq!(estimate.voxel_edge_m, 1.6 / 100.0);
    assert!((estimate.voxel_edge_m - 0.016).abs() < 1e-15);
    assert!((estimate.voxel_volume_m3 - 4.096e-6).abs() < 1e-18);
    assert!((estimate.total_volume_dm3() - 65.536).abs() < 1e-9);

    // Cubic homogeneity, exact for power-of-two scale factors.
    for scale in [2.0, 4.0, 8.0] {
        let scaled = baseline_volume(&grid, scale * 1.6).unwrap();
        assert_eq!(scaled.total_volume_m3, scale.powi(3) * estimate.total_volume_m3);
    }

    finish(
        "criterion 04 (baseline arithmetic)",
        started,
        Duration::from_secs(1),
        &format!("V_tot {} dm3, homogeneity exact", estimate.total_volume_dm3()),
    );
}

#[test]
fn criterion_05_height_reference_hazard() {
    let started = Instant::now();
    let n = 128usize;

    let neutral = box_person(false);
    let neutral_height = height_extremes(&neutral).unwrap().height_m;
    assert!((neutral_height - 1.75).abs() < 1e-12);
    let true_volume = mesh_volume(&neutral).unwrap();

    let mut errors = [0.0f64; 2];
    for (slot, mesh) in [&neutral, &box_person(true)].into_iter().enumerate() {
        let bounds = mesh.bounding_box().unwrap().bounding_cube();
        let grid = voxelize(mesh, (n, n, n), &bounds).unwrap();
        // The reference height is always the neutral standing height; in
        // the raised pose the occupied voxel span includes the arm.
        let estimate = baseline_volume(&grid, neutral_height).unwrap();
        errors[slot] = 100.0 * (estimate.total_volume_m3 - true_volume) / true_volume;
    }
    let [neutral_pe, raised_pe] = errors;

    assert!(
        raised_pe.abs() >= neutral_pe.abs() + 5.0,
        "raised-arm |PE| {:.2} not at least 5 points above neutral |PE| {:.2}",
        raised_pe.abs(),
        neutral_pe.abs()
    );
    assert!(raised_pe != 0.0, "discrepancy must be signed and nonzero");

    finish(
        "criterion 05 (height-reference hazard)",
        started,
        Duration::from_secs(60),
        &format!("PE neutral {neutral_pe:.2}%, raised {raised_pe:.2}%"),
    );
}

#[test]
fn criterion_06_rotation_sweep() {
    let started = Instant::now();
    let grid = 64usize;

    // A sphere has no height reference to distort: PE stays flat.
    let sphere = shapes::icosphere(0.5, 4);
    let sphere_height = height_extremes(&sphere).unwrap().height_m;
    let sphere_sweep = rotation_sweep(&sphere, SweepAxis::Y, sphere_height, grid).unwrap();
    let spread = sphere_sweep.spread();
    assert!(spread < 2.0, "sphere PE spread {spread:.3} points");

    // An upright elongated box tumbled head-over-heels loses its apparent
    // height near 90° and 270°, where |PE| must peak.
    let body = shapes::axis_box(
        Point3::new(-0.2, 0.0, -0.125),
        Point3::new(0.2, 1.5, 0.125),
    );
    let body_sweep = rotation_sweep(&body, SweepAxis::Y, 1.5, grid).unwrap();
    let worst_first_half = body_sweep.rows[..180]
        .iter()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .unwrap()
        .0;
    let worst_second_half = body_sweep.rows[180..]
        .iter()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .unwrap()
        .0;
    assert!(
        (80..=100).contains(&worst_first_half),
        "first-half |PE| peak at {worst_first_half}°"
    );
    assert!(
        (260..=280).contains(&worst_second_half),
        "second-half |PE| peak at {worst_second_half}°"
    );

    finish(
        "criterion 06 (rotation sweep)",
        started,
        Duration::from_secs(300),
        &format!(
            "sphere spread {spread:.3}, box peaks {worst_first_half}°/{worst_second_half}°"
        ),
    );
}

#[test]
fn criterion_07_codec_round_trips() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Heatmaps: 1,000 random continuous skeletons at 256.
    for _ in 0..1000 {
        let skel = Skeleton2D::new(std::array::from_fn(|_| Joint2D {
            u: rng.gen_range(0.0..255.0),
            v: rng.gen_range(0.0..255.0),
            visible: true,
        }));
        let decoded = decode_heatmaps(&encode_heatmaps(&skel, 256, 1.0).unwrap());
        for (a, b) in skel.joints().iter().zip(decoded.joints()) {
            assert!(b.visible);
            assert!((a.u - b.u).abs() <= 0.5 && (a.v - b.v).abs() <= 0.5);
        }
    }

    // Depth quantization: 1,000 random depths through the bin arithmetic,
    // plus full encode/decode grids on a subsample.
    for i in 0..1000 {
        let depth = rng.gen_range(0.0..=1.0);
        let bin = depth_to_bin(depth).unwrap();
        assert!((bin_center_depth(bin) - depth).abs() <= 1.0 / 24.0 + 1e-12);
        if i % 50 == 0 {
            let skel = Skeleton3D::new(std::array::from_fn(|_| Joint3D {
                u: rng.gen_range(0.0..253.0),
                v: rng.gen_range(0.0..253.0),
                depth,
            }));
            let decoded = decode_pose3d(&encode_pose3d(&skel, 1.0, 1.0).unwrap());
            for (a, b) in skel.joints().iter().zip(decoded.joints()) {
                assert!((a.depth - b.depth).abs() <= 1.0 / 24.0 + 1e-12);
                assert!((a.u - b.u).abs() <= 2.0 && (a.v - b.v).abs() <= 2.0);
            }
        }
    }

    // One-hot: 1,000 random masks, exact bijection.
    for _ in 0..1000 {
        let res = 32;
        let classes: Vec<u8> = (0..res * res).map(|_| rng.gen_range(0..15)).collect();
        let mask = SegmentationMask::new(res, classes).unwrap();
        let back = segmentation_from_one_hot(&one_hot_segmentation(&mask));
        assert_eq!(back, mask);
    }

    finish(
        "criterion 07 (codec round trips)",
        started,
        Duration::from_secs(10),
        "1,000 cases each: heatmap <= 0.5 px, depth <= 1/24, one-hot exact",
    );
}

#[test]
fn criterion_08_metric_harness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // Dyadic-rational APEs stay bitwise exact when volumes scale by 7.
    let denom = 1u64 << 16;
    let samples: Vec<VolumePrediction> = (0..1000)
        .map(|i| {
            let ape_target = rng.gen_range(0..=20 * denom) as f64 / denom as f64;
            let truth: BTreeMap<String, f64> = [("body".to_string(), 100.0)].into();
            VolumePrediction {
                id: format!("s{i}"),
                predicted: [("body".to_string(), 100.0 + ape_target)].into(),
                predicted_total: 100.0 + ape_target,
                truth: PartVolumes::new(truth).unwrap(),
            }
        })
        .collect();

    let report = aggregate(&samples, &[10.0]).unwrap();
    let success = report.success_ratio(10.0).unwrap();
    assert!(
        (success - 0.5).abs() <= 0.03,
        "success@10% = {success} not within 0.5 +- 0.03"
    );
    for pair in report.curve.windows(2) {
        assert!(pair[1].1 >= pair[0].1, "curve must be nondecreasing");
    }
    assert_eq!(report.curve.last().unwrap().1, 1.0);

    let scaled: Vec<VolumePrediction> = samples
        .iter()
        .map(|s| VolumePrediction {
            id: s.id.clone(),
            predicted: s
                .predicted
                .iter()
                .map(|(k, v)| (k.clone(), 7.0 * v))
                .collect(),
            predicted_total: 7.0 * s.predicted_total,
            truth: PartVolumes::new(
                s.truth.iter().map(|(k, v)| (k.to_string(), 7.0 * v)).collect(),
            )
            .unwrap(),
        })
        .collect();
    let scaled_report = aggregate(&scaled, &[10.0]).unwrap();
    assert_eq!(report.total.ape_mean, scaled_report.total.ape_mean);
    assert_eq!(report.total.ape_std, scaled_report.total.ape_std);
    assert_eq!(report.curve, scaled_report.curve);
    assert_eq!(report.success_at, scaled_report.success_at);

    finish(
        "criterion 08 (metric harness)",
        started,
        Duration::from_secs(5),
        &format!("success@10% {success:.3}, scale invariance exact under s = 7"),
    );
}

#[test]
fn criterion_09_split_integrity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let volumes = PartVolumes::new(
        [("part_1".to_string(), 30.0), ("part_2".to_string(), 50.0)].into(),
    )
    .unwrap();
    let mut clips = Vec::with_capacity(10_000);
    let mut frames = Vec::new();
    for i in 0..10_000u32 {
        let clip_id = format!("clip{i:05}");
        let frame_count = rng.gen_range(1..=5usize);
        for f in 0..frame_count {
            frames.push(FrameRecord {
                clip_id: clip_id.clone(),
                frame_index: f as u32,
                fully_visible: rng.gen_bool(0.7),
                pose2d: Skeleton2D::new(std::array::from_fn(|_| Joint2D {
                    u: 128.0,
                    v: 128.0,
                    visible: true,
                })),
                pose3d: Skeleton3D::new(std::array::from_fn(|_| Joint3D {
                    u: 128.0,
                    v: 128.0,
                    depth: 0.5,
                })),
                mask_path: None,
                image_path: None,
            });
        }
        clips.push(ClipRecord {
            clip_id,
            split: Split::Train,
            gender: if rng.gen_bool(0.5) {
                Gender::Male
            } else {
                Gender::Female
            },
            height_cm: 170.0,
            volumes: volumes.clone(),
            frame_count,
        });
    }

    let clips = assign_splits(clips, (0.8, 0.1, 0.1), 1234).unwrap();
    let store = AnnotationStore::new(clips, frames).unwrap();

    // Independent check over the serialized flat form: every line of a
    // clip must state the same split.
    let mut buf = Vec::new();
    write_flat_jsonl(&store, &mut buf).unwrap();
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    let mut straddlers = 0usize;
    for line in String::from_utf8(buf).unwrap().lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        let clip = value["clip_id"].as_str().unwrap().to_owned();
        let split = value["split"].as_str().unwrap().to_owned();
        match seen.get(&clip) {
            None => {
                seen.insert(clip, split);
            }
            Some(previous) if *previous != split => straddlers += 1,
            Some(_) => {}
        }
    }
    assert_eq!(straddlers, 0, "clips with frames in two splits");

    let selected = validation_frame_selection(&store);
    let mut per_clip: BTreeMap<&str, usize> = BTreeMap::new();
    for frame in &selected {
        assert!(frame.fully_visible, "selected frame is not fully visible");
        *per_clip.entry(frame.clip_id.as_str()).or_insert(0) += 1;
    }
    assert!(per_clip.values().all(|&c| c == 1), "clip selected twice");
    let val_clips = store.clips().filter(|c| c.split == Split::Val).count();
    assert!(selected.len() <= val_clips);

    finish(
        "criterion 09 (split integrity)",
        started,
        Duration::from_secs(10),
        &format!(
            "10,000 clips, 0 straddlers, {} of {val_clips} val clips selected",
            selected.len()
        ),
    );
}

#[test]
fn criterion_10_part_volume_sum_consistency() {
    let started = Instant::now();

    // Two stacked unit cubes with separate vertex sets.
    let lower = shapes::unit_cube();
    let upper = lower.translated(Vector3::new(0.0, 1.0, 0.0));
    let two_cubes = merge_meshes(&[lower, upper]);
    let labels: Vec<usize> = std::iter::repeat(1)
        .take(8)
        .chain(std::iter::repeat(2).take(8))
        .collect();
    let labeling = PartLabeling::new(labels, LabelScheme::Reduced(2)).unwrap();
    let whole = mesh_volume(&two_cubes).unwrap() * 1000.0;
    let parts = part_volumes(&split_parts(&two_cubes, &labeling).unwrap()).unwrap();
    let cube_gap = (whole - parts.total_dm3()).abs() / whole;
    assert!(cube_gap <= 0.02, "two-cube sum gap {cube_gap}");

    // Icosphere segmented into hemispheres; the cut boundary is a jagged
    // ring that hole filling caps on both sides.
    let sphere = shapes::icosphere(1.0, 4);
    let report = validate_manifold(&sphere);
    assert!(report.is_closed && report.is_consistently_oriented);
    let labels: Vec<usize> = sphere
        .vertices()
        .iter()
        .map(|p| if p.y >= 0.0 { 1 } else { 2 })
        .collect();
    let labeling = PartLabeling::new(labels, LabelScheme::Reduced(2)).unwrap();
    let whole = mesh_volume(&sphere).unwrap() * 1000.0;
    let parts = part_volumes(&split_parts(&sphere, &labeling).unwrap()).unwrap();
    let sphere_gap = (whole - parts.total_dm3()).abs() / whole;
    assert!(sphere_gap <= 0.02, "hemisphere sum gap {sphere_gap}");

    finish(
        "criterion 10 (part-volume sum consistency)",
        started,
        Duration::from_secs(5),
        &format!("two-cube gap {cube_gap:.2e}, hemisphere gap {sphere_gap:.2e}"),
    );
}
