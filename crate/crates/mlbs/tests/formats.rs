use std::fs;

use mlbs::netpbm::{read_frame, read_label_map, write_frame, write_label_map};
use mlbs::sequence::load_frame_sequence;
use mlbs::tracks::{parse_trajectories, parse_trajectories_str, serialize_trajectories, write_trajectories};
use mlbs_core::{Dims, Frame, LabelMap, Point, Trajectory, TrajectorySet};
use proptest::prelude::*;

fn frame_strategy() -> impl Strategy<Value = Frame> {
    (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
        proptest::collection::vec(proptest::array::uniform3(0.0f64..=1.0), w * h)
            .prop_map(move |px| Frame::new(Dims::new(w, h), px).unwrap())
    })
}

#[test]
fn sequence_is_ordered_by_number() {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("f10.ppm", 0.2), ("f2.ppm", 0.4), ("f0001.ppm", 0.6)] {
        write_frame(&dir.path().join(name), &Frame::filled(Dims::new(2, 2), [v; 3])).unwrap();
    }
    fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let frames = load_frame_sequence(dir.path()).unwrap();
    let firsts: Vec<f64> = frames.iter().map(|f| f.at(0)[0]).collect();
    assert_eq!(firsts, vec![0.6, 0.4, 0.2]);
}

#[test]
fn mismatched_sizes_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_frame(&dir.path().join("f1.ppm"), &Frame::filled(Dims::new(2, 2), [0.0; 3])).unwrap();
    write_frame(&dir.path().join("f2.ppm"), &Frame::filled(Dims::new(3, 2), [0.0; 3])).unwrap();
    let err = load_frame_sequence(dir.path()).unwrap_err();
    assert!(err.to_string().contains("f2.ppm"), "{err}");
}

#[test]
fn corrupt_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("f1.ppm"), b"P6 4 4 255\n\x00").unwrap();
    let err = load_frame_sequence(dir.path()).unwrap_err();
    assert!(err.to_string().contains("f1.ppm"), "{err}");
}

#[test]
fn label_histogram_is_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    let map = LabelMap::new(Dims::new(3, 2), vec![0, 1, 2, 2, 1, 0]).unwrap();
    write_label_map(&path, &map).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5"));
    let mut values: Vec<u8> = bytes[bytes.len() - 6..].to_vec();
    values.sort_unstable();
    values.dedup();
    assert_eq!(values, vec![0, 1, 2]);
    assert_eq!(read_label_map(&path).unwrap(), map);
}

#[test]
fn all_zero_map_writes_zero_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.pgm");
    write_label_map(&path, &LabelMap::filled(Dims::new(4, 4), 0)).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert!(bytes[bytes.len() - 16..].iter().all(|&b| b == 0));
}

#[test]
fn trajectory_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    fs::write(&path, "# tracks\n1 0 1 1 2 2\n2 0 1 1 2\n").unwrap();
    let err = parse_trajectories(&path).unwrap_err();
    assert!(err.to_string().contains(":3:"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_round_trip_within_a_level(frame in frame_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ppm");
        write_frame(&path, &frame).unwrap();
        let back = read_frame(&path).unwrap();
        prop_assert_eq!(back.dims(), frame.dims());
        for (a, b) in frame.pixels().iter().zip(back.pixels()) {
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
        // Quantized values survive exactly.
        write_frame(&path, &back).unwrap();
        prop_assert_eq!(read_frame(&path).unwrap(), back);
    }

    #[test]
    fn label_maps_round_trip(w in 1usize..10, h in 1usize..10, seed in proptest::collection::vec(0u32..256, 100)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let map = LabelMap::new(Dims::new(w, h), seed[..w * h].to_vec()).unwrap();
        write_label_map(&path, &map).unwrap();
        prop_assert_eq!(read_label_map(&path).unwrap(), map);
    }

    #[test]
    fn trajectories_round_trip(
        tracks in proptest::collection::vec(
            (0usize..50, proptest::collection::vec((-0.5f64..640.5, -0.5f64..480.5), 1..12)),
            0..20,
        )
    ) {
        let set = TrajectorySet::new(
            tracks
                .into_iter()
                .enumerate()
                .map(|(i, (start, pts))| {
                    Trajectory::new(i as u64 * 3 + 1, start, pts.into_iter().map(|(x, y)| Point::new(x, y)).collect())
                })
                .collect(),
        );
        prop_assert_eq!(parse_trajectories_str(&serialize_trajectories(&set)).unwrap(), set.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        write_trajectories(&path, &set).unwrap();
        prop_assert_eq!(parse_trajectories(&path).unwrap(), set);
    }
}
