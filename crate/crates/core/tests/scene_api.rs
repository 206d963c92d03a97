mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use d123_core::error::Error;
use d123_core::geom::{TimeDelta, TimePoint};
use d123_core::ingest::{convert, synthesize, ConvertOptions, SyntheticScenarioConfig, FRONT_CAMERA_ID, TOP_LIDAR_ID};
use d123_core::log::{open_log, Modality, Record, StreamRecords};
use d123_core::map::MapLayer;
use d123_core::scene::{get_filtered_scenes, list_split_logs, LogCache, Lookup, SceneFilter, SceneLoader, SPLIT_MANIFEST};
use d123_core::sync::{MatchCriteria, MatchMode};
use proptest::prelude::*;

fn nearest_oracle(ts: &[TimePoint], q: TimePoint) -> usize {
    let mut best = 0;
    for (i, t) in ts.iter().enumerate() {
        if (t.micros() - q.micros()).abs() < (ts[best].micros() - q.micros()).abs() {
            best = i;
        }
    }
    best
}

#[test]
fn scene_count_follows_frame_arithmetic() {
    let tmp = tempfile::tempdir().unwrap();
    // 401 ego events at 20 Hz span exactly 20 s
    common::synthetic_corpus(tmp.path(), "train", 1, &["nuscenes"], 20.05, 1);
    let filter = SceneFilter::from_secs(&["train"], 0.5, 1.0, 4.0);
    let scenes = get_filtered_scenes(&filter, tmp.path()).unwrap();

    let log = open_log(&tmp.path().join("train/train_0000")).unwrap();
    let ego = log.stream(&Modality::EgoState).unwrap().timestamps().unwrap();
    let frames = ((ego[ego.len() - 1] - ego[0]).micros() / 500_000 + 1) as usize;
    assert_eq!(frames, 41);
    assert_eq!(filter.scene_length(), 11);
    assert_eq!(scenes.len(), frames / 11);
    assert_eq!(scenes.len(), 3);
    for (k, s) in scenes.iter().enumerate() {
        assert_eq!(s.frame_range(), k * 11..k * 11 + 11);
        assert_eq!(s.iteration_bounds(), (-2, 8));
        assert_eq!(s.num_iterations(), 11);
    }

    let overlapping = SceneFilter { stride: Some(1), ..filter };
    assert_eq!(get_filtered_scenes(&overlapping, tmp.path()).unwrap().len(), frames - 11 + 1);
}

#[test]
fn shuffle_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "a", 3, &["nuscenes", "av2_sensor"], 12.0, 7);
    common::synthetic_corpus(tmp.path(), "b", 2, &["wod_perception"], 12.0, 70);
    let filter = SceneFilter { shuffle: true, seed: 42, ..SceneFilter::from_secs(&["a", "b"], 0.5, 1.0, 1.0) };
    let key = |f: &SceneFilter| -> Vec<(String, usize)> {
        get_filtered_scenes(f, tmp.path()).unwrap().iter().map(|s| (s.log_id().to_string(), s.frame_range().start)).collect()
    };
    let first = key(&filter);
    assert_eq!(first, key(&filter));
    let unshuffled = key(&SceneFilter { shuffle: false, ..filter.clone() });
    assert_ne!(first, unshuffled);
    let mut sorted = first.clone();
    sorted.sort();
    let mut base = unshuffled.clone();
    base.sort();
    assert_eq!(sorted, base);
    assert_ne!(first, key(&SceneFilter { seed: 43, ..filter }));
    // unshuffled order: splits as given, logs by id, scenes by time
    assert!(unshuffled[0].0.starts_with("a_") && unshuffled.last().unwrap().0.starts_with("b_"));
}

#[test]
fn iteration_access_matches_brute_force() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "val", 2, &["nuplan", "nuscenes"], 10.0, 3);
    let scenes = get_filtered_scenes(&SceneFilter::from_secs(&["val"], 0.5, 1.0, 2.0), tmp.path()).unwrap();
    assert!(!scenes.is_empty());
    for s in &scenes {
        let log = s.log().unwrap();
        for (m, stream) in log.streams().map(|h| (h.modality().clone(), h)) {
            let ts = stream.timestamps().unwrap();
            for it in -2..=4 {
                let t = s.timestamp_at_iteration(it).unwrap();
                let rec = s.get_record_at_iteration(it, &m).unwrap();
                let expected = nearest_oracle(ts, t);
                let within = (ts[expected] - t).micros().abs() <= 500_000;
                match rec {
                    Lookup::Found(r) => {
                        assert!(within);
                        assert_eq!(r.timestamp(), ts[expected]);
                        // sync access equals async nearest access at the frame time
                        let crit = MatchCriteria::nearest().with_tolerance(TimeDelta::from_micros(500_000));
                        assert_eq!(s.get_record_at_timestamp(&m, t, &crit).unwrap(), r);
                    }
                    Lookup::AbsentModality => assert!(!within),
                }
            }
        }
        let ego = s.get_ego_state_se3_at_iteration(0).unwrap().found().unwrap();
        assert_eq!(ego.timestamp(), s.timestamp_at_iteration(0).unwrap());
        // rear-axle origin: the center sits 1.4 m ahead along the heading
        let yaw = ego.rear_axle.yaw();
        let c = ego.center_3d();
        assert!((c[0] - ego.rear_axle.translation[0] - 1.4 * yaw.cos()).abs() < 1e-9);
        assert!((c[1] - ego.rear_axle.translation[1] - 1.4 * yaw.sin()).abs() < 1e-9);
    }
}

#[test]
fn iteration_bounds_and_history() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "s", 1, &["nuscenes"], 10.0, 5);
    let scenes = get_filtered_scenes(&SceneFilter::from_secs(&["s"], 0.5, 1.0, 4.0), tmp.path()).unwrap();
    let s = &scenes[0];
    assert_eq!(s.frame_index(-2).unwrap(), s.frame_range().start);
    assert_eq!(s.timestamp_at_iteration(-2).unwrap(), s.sync_table().frame_timestamps()[0]);
    assert!(matches!(s.get_ego_state_se3_at_iteration(-3), Err(Error::IterationOutOfRange { iteration: -3, min: -2, max: 8 })));
    assert!(matches!(s.get_ego_state_se3_at_iteration(9), Err(Error::IterationOutOfRange { .. })));
    assert!(matches!(s.get_lidar_at_iteration(0, "nope"), Err(Error::UnknownSensorId(id)) if id == "nope"));
    // nuScenes rig has no traffic lights: a missing stream is absent, not an error
    assert!(s.get_traffic_lights_at_iteration(0).unwrap().is_absent());
}

#[test]
fn absent_cells_and_required_modalities() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { log_id: "gap".into(), duration_s: 20.0, lidar_points: 8, ..Default::default() };
    let (mut log, gt) = synthesize(&cfg).unwrap();
    let cutoff = gt.start_us + 8_000_000;
    for s in &mut log.streams {
        if let StreamRecords::Lidar(v) = &mut s.records {
            v.retain(|r| r.timestamp_start.micros() < cutoff);
        }
    }
    convert(&log, &tmp.path().join("s"), &ConvertOptions::default()).unwrap();
    let all = get_filtered_scenes(&SceneFilter::from_secs(&["s"], 0.5, 0.0, 0.0), tmp.path()).unwrap();
    let handle = all[0].log().unwrap();
    let lidar = handle.stream(&Modality::Lidar(TOP_LIDAR_ID.into())).unwrap().timestamps().unwrap().to_vec();
    let covered = |t: TimePoint| (lidar[nearest_oracle(&lidar, t)] - t).micros().abs() <= 500_000;

    let mut expected = 0;
    for s in &all {
        let t = s.timestamp_at_iteration(0).unwrap();
        let got = s.get_lidar_at_iteration(0, TOP_LIDAR_ID).unwrap();
        assert_eq!(got.is_absent(), !covered(t));
        expected += covered(t) as usize;
    }
    assert!(expected > 0 && expected < all.len());

    let required = SceneFilter {
        required_modalities: BTreeSet::from([Modality::Lidar(TOP_LIDAR_ID.into())]),
        ..SceneFilter::from_secs(&["s"], 0.5, 0.0, 0.0)
    };
    assert_eq!(get_filtered_scenes(&required, tmp.path()).unwrap().len(), expected);
    let never = SceneFilter { required_modalities: BTreeSet::from([Modality::TrafficLights]), ..required };
    assert!(get_filtered_scenes(&never, tmp.path()).unwrap().is_empty());
}

#[test]
fn camera_at_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "s", 1, &["nuscenes"], 6.0, 9);
    let scenes = get_filtered_scenes(&SceneFilter::from_secs(&["s"], 0.5, 0.0, 1.0), tmp.path()).unwrap();
    let s = &scenes[1];
    let log = s.log().unwrap();
    let cams = log.stream(&Modality::Camera(FRONT_CAMERA_ID.into())).unwrap().timestamps().unwrap().to_vec();

    let exact = s.get_camera_at_timestamp(cams[5], FRONT_CAMERA_ID, &MatchCriteria::new(MatchMode::Exact)).unwrap();
    assert_eq!(exact.timestamp, cams[5]);
    let missing = TimePoint::from_micros(cams[5].micros() + 1);
    assert!(matches!(
        s.get_camera_at_timestamp(missing, FRONT_CAMERA_ID, &MatchCriteria::new(MatchMode::Exact)),
        Err(Error::NoMatchWithinTolerance { .. })
    ));

    let lidar = s.get_lidar_at_iteration(0, TOP_LIDAR_ID).unwrap().found().unwrap();
    let cam = s.get_camera_at_timestamp(lidar.timestamp_start, FRONT_CAMERA_ID, &MatchCriteria::nearest()).unwrap();
    assert_eq!(cam.timestamp, cams[nearest_oracle(&cams, lidar.timestamp_start)]);
    assert_eq!(s.get_camera_bytes(&cam).unwrap().len(), s.get_camera_bytes(&cam).unwrap().len());

    let past = TimePoint::from_micros(cams.last().unwrap().micros() + 1);
    assert!(matches!(
        s.get_camera_at_timestamp(past, FRONT_CAMERA_ID, &MatchCriteria::new(MatchMode::Forward)),
        Err(Error::NoMatchWithinTolerance { .. })
    ));
    assert!(matches!(
        s.get_camera_at_timestamp(past, "pcam_x9", &MatchCriteria::nearest()),
        Err(Error::UnknownSensorId(_))
    ));
    let cloud = s.get_lidar_point_cloud(&lidar).unwrap();
    assert_eq!(cloud.len(), 16);
}

#[test]
fn map_cache_shares_instances() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "s", 1, &["nuscenes"], 60.0, 2);
    common::synthetic_corpus(tmp.path(), "nomap", 1, &["pandaset"], 4.0, 2);
    let loader = SceneLoader::new(tmp.path());
    let scenes = loader.get_filtered_scenes(&SceneFilter { stride: Some(1), ..SceneFilter::from_secs(&["s"], 0.5, 0.0, 0.0) }).unwrap();
    assert!(scenes.len() >= 100);
    let first = scenes[0].get_map_api().unwrap();
    for s in scenes.iter().take(100) {
        assert!(Arc::ptr_eq(&first, &s.get_map_api().unwrap()));
    }
    assert_eq!(loader.map_cache().load_count(), 1);
    let lanes = first.get_map_objects_in_radius([0.0, 0.0, 0.0], 50.0, &["lane", "crosswalk"]).unwrap();
    assert!(lanes.iter().any(|o| o.layer == MapLayer::Lane));

    let other = loader.get_filtered_scenes(&SceneFilter::from_secs(&["nomap"], 0.5, 0.0, 0.0)).unwrap();
    assert!(matches!(other[0].get_map_api(), Err(Error::MapUnavailable(_))));
}

#[test]
fn splits_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "train", 3, &["nuscenes"], 3.0, 1);
    assert_eq!(list_split_logs(tmp.path(), "train").unwrap().len(), 3);
    assert!(matches!(list_split_logs(tmp.path(), "test"), Err(Error::UnknownSplit(s)) if s == "test"));
    let f = SceneFilter::from_secs(&["train", "test"], 0.5, 0.0, 0.0);
    assert!(matches!(get_filtered_scenes(&f, tmp.path()), Err(Error::UnknownSplit(_))));
    assert!(matches!(
        get_filtered_scenes(&SceneFilter::from_secs(&["train"], 0.0, 0.0, 0.0), tmp.path()),
        Err(Error::InvalidFilter(_))
    ));

    std::fs::write(tmp.path().join("train").join(SPLIT_MANIFEST), r#"["train_0002", "train_0000"]"#).unwrap();
    let logs = list_split_logs(tmp.path(), "train").unwrap();
    let names: Vec<_> = logs.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
    assert_eq!(names, ["train_0000", "train_0002"]);
    std::fs::write(tmp.path().join("train").join(SPLIT_MANIFEST), r#"["train_0009"]"#).unwrap();
    assert!(matches!(list_split_logs(tmp.path(), "train"), Err(Error::CorruptFile { .. })));

    // filters that select nothing yield an empty list, not an error
    std::fs::remove_file(tmp.path().join("train").join(SPLIT_MANIFEST)).unwrap();
    let long = SceneFilter::from_secs(&["train"], 0.5, 10.0, 10.0);
    assert!(get_filtered_scenes(&long, tmp.path()).unwrap().is_empty());
}

#[test]
fn scenes_are_lazy_and_cache_bounded() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "s", 6, &["nuscenes", "wod_motion"], 8.0, 4);
    let loader = SceneLoader::with_cache_capacity(tmp.path(), 2);
    let scenes = loader.get_filtered_scenes(&SceneFilter { stride: Some(1), ..SceneFilter::from_secs(&["s"], 0.5, 0.5, 0.5) }).unwrap();
    let snap = loader.stats().snapshot();
    assert_eq!(snap.records_read, 0);
    assert_eq!(snap.record_batches, 0);
    assert!(snap.live_handles <= 2);
    assert!(loader.log_cache().len() <= 2);

    for s in scenes.iter().rev() {
        s.get_ego_state_se3_at_iteration(0).unwrap();
        assert!(loader.stats().snapshot().live_handles <= 2);
    }
    assert_eq!(loader.stats().snapshot().records_read, scenes.len() as u64);
}

#[test]
fn mixed_rates_share_the_period_grid() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_corpus(tmp.path(), "mix", 3, &["nuscenes", "wod_motion", "pai_av"], 9.0, 8);
    let scenes = get_filtered_scenes(&SceneFilter::from_secs(&["mix"], 0.5, 1.0, 2.0), tmp.path()).unwrap();
    let logs: BTreeSet<&str> = scenes.iter().map(|s| s.log_id()).collect();
    assert_eq!(logs.len(), 3);
    for s in &scenes {
        let (lo, hi) = s.iteration_bounds();
        for i in lo..hi {
            let dt = s.timestamp_at_iteration(i + 1).unwrap() - s.timestamp_at_iteration(i).unwrap();
            assert_eq!(dt.micros(), 500_000);
        }
    }
}

#[test]
fn evicted_handles_stay_valid_and_threads_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = common::synthetic_corpus(tmp.path(), "s", 4, &["nuscenes"], 3.0, 12);
    let cache = LogCache::new(2);
    let held = cache.get(&dirs[0]).unwrap();
    cache.get(&dirs[1]).unwrap();
    cache.get(&dirs[2]).unwrap();
    assert!(!cache.keys().contains(&dirs[0]));
    assert_eq!(cache.stats().snapshot().live_handles, 3);
    assert!(matches!(held.stream(&Modality::EgoState).unwrap().get(0).unwrap(), Record::EgoState(_)));
    drop(held);
    assert_eq!(cache.stats().snapshot().live_handles, 2);
    let again = cache.get(&dirs[2]).unwrap();
    assert!(Arc::ptr_eq(&again, &cache.get(&dirs[2]).unwrap()));

    let loader = SceneLoader::with_cache_capacity(tmp.path(), 2);
    let scenes = loader.get_filtered_scenes(&SceneFilter { stride: Some(1), ..SceneFilter::from_secs(&["s"], 0.5, 0.0, 0.0) }).unwrap();
    let sequential: Vec<_> = scenes.iter().map(|s| s.get_ego_state_se3_at_iteration(0).unwrap()).collect();
    let parallel: Vec<_> = std::thread::scope(|sc| {
        let jobs: Vec<_> = scenes
            .chunks(3)
            .map(|chunk| sc.spawn(move || chunk.iter().map(|s| s.get_ego_state_se3_at_iteration(0).unwrap()).collect::<Vec<_>>()))
            .collect();
        jobs.into_iter().flat_map(|j| j.join().unwrap()).collect()
    });
    assert_eq!(sequential, parallel);
    assert!(loader.log_cache().len() <= 2);
}

#[test]
fn persisted_scene_sync_is_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = common::synthetic_corpus(tmp.path(), "s", 1, &["nuscenes"], 5.0, 1);
    let f = SceneFilter::from_secs(&["s"], 0.25, 0.0, 0.0);
    let built = SceneLoader::new(tmp.path()).persist_sync_tables(true).get_filtered_scenes(&f).unwrap();
    assert!(dirs[0].join("sync_resample_250000us_ego_state.arrow").is_file());
    let loaded = get_filtered_scenes(&f, tmp.path()).unwrap();
    assert_eq!(built.len(), loaded.len());
    assert_eq!(built[3].sync_table(), loaded[3].sync_table());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eviction_matches_reference_lru(trace in prop::collection::vec(0usize..5, 1..40), cap in 1usize..4) {
        let tmp = tempfile::tempdir().unwrap();
        let dirs = common::synthetic_corpus(tmp.path(), "s", 5, &["wod_motion"], 1.0, 0);
        let cache = LogCache::new(cap);
        let mut model: Vec<usize> = Vec::new();
        for &i in &trace {
            cache.get(&dirs[i]).unwrap();
            model.retain(|&k| k != i);
            model.insert(0, i);
            model.truncate(cap);
            let keys: Vec<_> = model.iter().map(|&k| dirs[k].clone()).collect();
            prop_assert_eq!(cache.keys(), keys);
            prop_assert!(cache.stats().snapshot().live_handles as usize <= cap);
        }
    }
}
