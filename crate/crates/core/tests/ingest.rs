//! Loading highD-format files and turning them into labeled pairs.

use std::path::PathBuf;

use proptest::prelude::*;
use sil_core::domain::Sector;
use sil_core::ingest::{
    detect_lane_changes, extract_pairs, load_pairs, load_tracks, write_pairs, ExtractConfig,
    LaneOrdering, Recording, TrackRow,
};
use sil_core::policy::LaneAction;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn small_fixture_groups_and_counts() {
    let rec = load_tracks(&fixture("tracks_small.csv")).unwrap();
    assert_eq!(rec.vehicles.len(), 2);
    assert_eq!(rec.row_count(), 10);
    for rows in rec.vehicles.values() {
        assert!(rows.windows(2).all(|w| w[0].frame < w[1].frame));
    }
    // frames 0, 2, 4 of each vehicle
    let cfg = ExtractConfig {
        stride: 2,
        ..ExtractConfig::default()
    };
    assert_eq!(extract_pairs(&rec, &cfg).len(), 6);
}

#[test]
fn upper_carriageway_fixture() {
    let rec = load_tracks(&fixture("tracks_upper.csv")).unwrap();
    assert_eq!(rec.row_count(), 200);
    let events = detect_lane_changes(&rec.vehicles[&1], LaneOrdering::LeftIncreasing, 10);
    assert_eq!(events.len(), 1);
    assert_eq!((events[0].frame, events[0].action), (20, LaneAction::LLC));

    let pairs = extract_pairs(&rec, &ExtractConfig::default());
    // 4 vehicles x frames 0, 5, ..., 45
    assert_eq!(pairs.len(), 40);
    // vehicle 1 at frames 0..=20 sees its change within 40 frames
    let llc: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs[i].label == LaneAction::LLC)
        .collect();
    assert_eq!(llc, vec![0, 1, 2, 3, 4]);
    assert_eq!(pairs[0].one_hot(), [0.0, 1.0, 0.0]);
    assert!(pairs
        .iter()
        .all(|p| p.features.iter().all(|f| (0.0..=1.0).contains(f))));

    // vehicle 1, frame 0: vehicle 2 is 40 m behind, vehicle 3 is 20 m ahead one lane left
    let f = pairs[0].features;
    assert!((f[Sector::Back.index()] - 0.355).abs() < 1e-12);
    assert!((f[Sector::FrontLeft.index()] - 0.155).abs() < 1e-12);
    assert_eq!(f[Sector::Front.index()], 1.0);
    assert!((f[8] - 30.0 / 50.0).abs() < 1e-12);
}

#[test]
fn pairs_file_round_trip() {
    let rec = load_tracks(&fixture("tracks_upper.csv")).unwrap();
    let pairs = extract_pairs(&rec, &ExtractConfig::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    write_pairs(&path, &pairs).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("f1,f2,f3,f4,f5,f6,f7,f8,f9,label\n"));
    assert_eq!(load_pairs(&path).unwrap(), pairs);
}

#[test]
fn extraction_is_deterministic() {
    let rec = load_tracks(&fixture("tracks_upper.csv")).unwrap();
    let cfg = ExtractConfig::default();
    assert_eq!(extract_pairs(&rec, &cfg), extract_pairs(&rec, &cfg));
}

/// Two passes: collapse to runs, then keep runs long enough to count.
fn naive_event_count(lanes: &[i32], debounce: usize) -> usize {
    let mut runs: Vec<(i32, usize)> = Vec::new();
    for &l in lanes {
        match runs.last_mut() {
            Some((lane, n)) if *lane == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    let mut kept: Vec<i32> = Vec::new();
    for (i, (lane, n)) in runs.iter().enumerate() {
        if i == 0 || *n >= debounce {
            kept.push(*lane);
        }
    }
    kept.windows(2).filter(|w| w[0] != w[1]).count()
}

fn rows_for(lanes: &[i32], id: u32, v: f64) -> Vec<TrackRow> {
    lanes
        .iter()
        .enumerate()
        .map(|(f, &lane)| TrackRow {
            frame: f as u32,
            vehicle_id: id,
            x: 100.0 * id as f64 + v * f as f64 / 25.0,
            y: 3.75 * lane as f64,
            width: 4.5,
            height: 2.0,
            x_velocity: v,
            lane_id: lane,
        })
        .collect()
}

fn lane_sequence() -> impl Strategy<Value = Vec<i32>> {
    proptest::collection::vec((1i32..=3, 1usize..30), 1..8).prop_map(|runs| {
        runs.into_iter()
            .flat_map(|(l, n)| std::iter::repeat_n(l, n))
            .collect()
    })
}

proptest! {
    #[test]
    fn event_count_matches_naive_scanner(lanes in lane_sequence(), debounce in 1usize..15) {
        let rows = rows_for(&lanes, 1, 25.0);
        let events = detect_lane_changes(&rows, LaneOrdering::RightIncreasing, debounce);
        prop_assert_eq!(events.len(), naive_event_count(&lanes, debounce));
        prop_assert!(events.iter().all(|e| e.action != LaneAction::LK));
    }

    #[test]
    fn features_and_labels_are_well_formed(
        seqs in proptest::collection::vec(lane_sequence(), 1..4),
        stride in 1u32..6,
    ) {
        let rows = seqs
            .iter()
            .enumerate()
            .flat_map(|(i, l)| rows_for(l, i as u32 + 1, 20.0 + 3.0 * i as f64));
        let rec = Recording::from_rows(rows);
        let cfg = ExtractConfig { stride, ..ExtractConfig::default() };
        let pairs = extract_pairs(&rec, &cfg);
        let expected: usize = seqs.iter().map(|l| (0..l.len() as u32).filter(|f| f % stride == 0).count()).sum();
        prop_assert_eq!(pairs.len(), expected);
        for p in &pairs {
            prop_assert!(p.features.iter().all(|f| (0.0..=1.0).contains(f)));
            let y = p.one_hot();
            prop_assert_eq!(y.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(y.iter().filter(|v| **v == 1.0).count(), 1);
        }
    }
}
