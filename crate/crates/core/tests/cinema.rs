use std::fs;
use std::path::Path;
use std::time::Instant;

use darkroom_core::camera::Projection;
use darkroom_core::cinema::{gbuf, read_database, write_database, Constraint, Predicate, INDEX_FILE};
use darkroom_core::geometry::{shapes, Bvh};
use darkroom_core::grid::fibonacci_sphere_grid;
use darkroom_core::imaging::{render_gbuffer, GBuffer, RenderOptions};
use darkroom_core::math::Vec3;
use darkroom_core::Mesh;
use indexmap::IndexMap;
use proptest::prelude::*;

fn rendered_grid(n: usize) -> (darkroom_core::SamplingGrid, Vec<GBuffer>) {
    let mut mesh: Mesh = shapes::torus(1.0, 0.35, 24, 12);
    let height: Vec<f64> = mesh.vertices().iter().map(|v| v.y).collect();
    mesh.add_field("height", height).unwrap();
    let bvh = Bvh::build(&mesh).unwrap();
    let grid = fibonacci_sphere_grid(Vec3::zero(), 4.0, n, (24, 16), Projection::Perspective { fov_y: 45.0 }).unwrap();
    let options = RenderOptions {
        emit_position: true,
        emit_normal: true,
        jitter_seed: None,
    };
    let gbuffers = grid
        .cameras()
        .iter()
        .map(|cam| render_gbuffer(&mesh, &bvh, cam, &["height".to_owned()], &options).unwrap())
        .collect();
    (grid, gbuffers)
}

#[test]
fn write_then_read_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("torus");
    let (grid, gbuffers) = rendered_grid(6);
    let written = write_database(&root, &grid, &gbuffers, &IndexMap::new()).unwrap();
    let db = read_database(&root).unwrap();
    assert_eq!(db, written);
    assert_eq!(db.axes(), ["phi", "theta"]);
    for (i, g) in gbuffers.iter().enumerate() {
        let loaded = db.load_gbuffer(i).unwrap();
        assert_eq!(&loaded, g);
        // Bit-level, including NaN payloads in the background.
        let bytes = fs::read(db.file_path(i).unwrap()).unwrap();
        assert_eq!(bytes, gbuf::encode(g));
        assert_eq!(gbuf::encode(&loaded), bytes);
    }
}

#[test]
fn index_is_crlf_csv_with_file_last() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    let (grid, gbuffers) = rendered_grid(3);
    let extra = IndexMap::from([("time".to_owned(), vec![0.5, 1.0, 1.5])]);
    write_database(&root, &grid, &gbuffers, &extra).unwrap();
    let text = fs::read_to_string(root.join(INDEX_FILE)).unwrap();
    let lines: Vec<&str> = text.split_terminator("\r\n").collect();
    assert_eq!(lines[0], "phi,theta,time,FILE");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(",0.5,image/00000.gbuf"));
    assert!(!text.replace("\r\n", "").contains('\n'));
}

#[test]
fn rewriting_replaces_the_database() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    let (grid, gbuffers) = rendered_grid(4);
    write_database(&root, &grid, &gbuffers, &IndexMap::new()).unwrap();
    let (small_grid, small) = rendered_grid(2);
    write_database(&root, &small_grid, &small, &IndexMap::new()).unwrap();
    assert_eq!(read_database(&root).unwrap().len(), 2);
    assert_eq!(fs::read_dir(root.join("image")).unwrap().count(), 2);
    // No staging directories are left behind.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

/// An index over `rows` placeholder files that are not valid G-buffers.
fn synthetic_database(root: &Path, rows: usize) -> Vec<[f64; 3]> {
    fs::create_dir_all(root.join("image")).unwrap();
    let mut csv = String::from("phi,theta,time,FILE\r\n");
    let mut values = Vec::with_capacity(rows);
    for i in 0..rows {
        let v = [
            (i % 20) as f64 * 18.0,
            (i / 20 % 10) as f64 * 15.0 - 60.0,
            (i / 200) as f64 * 0.25,
        ];
        let file = format!("image/{i:05}.gbuf");
        fs::write(root.join(&file), b"not a gbuffer").unwrap();
        csv.push_str(&format!("{},{},{},{file}\r\n", v[0], v[1], v[2]));
        values.push(v);
    }
    fs::write(root.join(INDEX_FILE), csv).unwrap();
    values
}

#[test]
fn large_index_parses_quickly_without_pixel_data() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("big");
    synthetic_database(&root, 2400);
    let start = Instant::now();
    let db = read_database(&root).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(db.len(), 2400);
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
    assert!(db.load_gbuffer(0).is_err());
}

#[test]
fn dangling_reference_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    synthetic_database(&root, 3);
    fs::remove_file(root.join("image/00001.gbuf")).unwrap();
    assert!(read_database(&root).is_err());
}

fn constraint() -> impl Strategy<Value = Constraint> {
    prop_oneof![
        (0u32..20).prop_map(|k| Constraint::Exact(k as f64 * 18.0)),
        (-100.0f64..400.0, 0.0f64..200.0).prop_map(|(lo, span)| Constraint::Range([lo, lo + span])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn query_equals_linear_scan(
        phi in proptest::option::of(constraint()),
        theta in proptest::option::of(constraint()),
        time in proptest::option::of((0.0f64..3.0).prop_map(|lo| Constraint::Range([lo, lo + 0.5]))),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("db");
        let values = synthetic_database(&root, 300);
        let db = read_database(&root).unwrap();
        let mut predicate = Predicate::new();
        for (name, c) in [("phi", phi), ("theta", theta), ("time", time)] {
            if let Some(c) = c {
                predicate.insert(name.to_owned(), c);
            }
        }
        let expected: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| {
                predicate.iter().all(|(name, c)| {
                    let k = ["phi", "theta", "time"].iter().position(|a| a == name).unwrap();
                    c.matches(v[k])
                })
            })
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(db.query_indices(&predicate).unwrap(), expected);
    }
}

#[test]
fn unknown_axis_in_query() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    synthetic_database(&root, 2);
    let db = read_database(&root).unwrap();
    let predicate = Predicate::from([("zoom".to_owned(), Constraint::Exact(1.0))]);
    assert!(db.query_indices(&predicate).is_err());
}
