use std::collections::BTreeMap;
use std::path::Path;

use d123_core::error::Error;
use d123_core::geom::Se3;
use d123_core::ingest::{
    convert, generate_synthetic, parse_jsonl_source, read_converted, straight_road, synthesize, write_jsonl_source, ConvertOptions,
    EgoPath, FrameTag, JsonlWriteOptions, MapTemplate, SyntheticScenarioConfig, FRONT_CAMERA_ID, TOP_LIDAR_ID,
};
use d123_core::log::{open_log, BoxFrame, Modality, StorageMode, StreamRecords};
use d123_core::map::{Attributes, MapLayer};
use d123_core::sync::{match_timestamp, MatchCriteria};

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const LOG_JSON: &str = r#"{
  "format": "d123-jsonl", "version": 1, "log_id": "tiny", "dataset": "handmade", "label_space": "synthetic",
  "vehicle": {"length_m": 4.9, "width_m": 2.0, "height_m": 1.8, "wheelbase_m": 2.9, "rear_axle_to_center_m": 1.4, "pose_origin": "rear_axle"},
  "cameras": {"front": {"model": "pinhole", "fx_px": 1000, "fy_px": 1000, "cx_px": 800, "cy_px": 450, "width_px": 1600, "height_px": 900,
    "extrinsic": {"frame": "body", "translation_m": [1.5, 0, 1.6], "rotation_wxyz": [0.5, -0.5, 0.5, -0.5]}}}
}"#;

fn ego_line(t_field: &str, t: &str, x: f64) -> String {
    format!(
        r#"{{"{t_field}": {t}, "frame": "global", "translation_m": [{x}, 0, 0], "rotation_wxyz": [1, 0, 0, 0], "velocity_mps": [10, 0, 0], "acceleration_mps2": [0, 0, 0], "yaw_rate_radps": 0}}"#
    )
}

fn tiny_source(dir: &Path, ego: &[String], boxes: &[&str]) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("log.json"), LOG_JSON).unwrap();
    std::fs::write(dir.join("ego_state.jsonl"), ego.join("\n") + "\n").unwrap();
    if !boxes.is_empty() {
        std::fs::write(dir.join("boxes.jsonl"), boxes.join("\n") + "\n").unwrap();
    }
}

fn box_line(t: i64, frame: &str, extent: &str) -> String {
    format!(
        r#"{{"timestamp_us": {t}, "boxes": [{{"track_id": "a", "label": "car", "frame": "{frame}", "translation_m": [0, 0, 10], "rotation_wxyz": [1, 0, 0, 0], "extent_m": {extent}}}]}}"#
    )
}

#[test]
fn minimal_source_parses_with_mixed_time_units() {
    let tmp = tempfile::tempdir().unwrap();
    let ego = vec![ego_line("timestamp_us", "1000000", 0.0), ego_line("timestamp_ms", "1100", 1.0), ego_line("timestamp_s", "1.2", 2.0)];
    tiny_source(tmp.path(), &ego, &[]);
    let parsed = parse_jsonl_source(tmp.path()).unwrap();
    assert_eq!(parsed.streams.len(), 1);
    let StreamRecords::EgoState(recs) = &parsed.streams[0].records else { panic!("expected ego stream") };
    let ts: Vec<i64> = recs.iter().map(|r| r.timestamp.micros()).collect();
    assert_eq!(ts, vec![1_000_000, 1_100_000, 1_200_000]);
    assert!(parsed.map.is_none());
}

#[test]
fn camera_frame_box_is_resolved_to_global() {
    let tmp = tempfile::tempdir().unwrap();
    let ego = vec![ego_line("timestamp_us", "0", 100.0), ego_line("timestamp_us", "100000", 101.0)];
    tiny_source(tmp.path(), &ego, &[&box_line(0, "camera:front", "[4, 2, 1.5]")]);
    let parsed = parse_jsonl_source(tmp.path()).unwrap();
    let frames = boxes(&parsed.streams);
    // 10 m along the optical axis of a forward camera at x=1.5, z=1.6 on an ego at x=100
    let t = frames[0].boxes[0].pose.translation;
    assert!((t[0] - 111.5).abs() < 1e-9 && t[1].abs() < 1e-9 && (t[2] - 1.6).abs() < 1e-9, "{t:?}");
}

fn boxes(streams: &[d123_core::log::EventStream]) -> &[BoxFrame] {
    streams
        .iter()
        .find_map(|s| match &s.records {
            StreamRecords::Boxes(f) => Some(f.as_slice()),
            _ => None,
        })
        .expect("box stream")
}

#[test]
fn negative_extent_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let ego = vec![ego_line("timestamp_us", "0", 0.0), ego_line("timestamp_us", "100000", 1.0)];
    tiny_source(tmp.path(), &ego, &[&box_line(0, "global", "[4, 2, 1.5]"), &box_line(100000, "global", "[4, -2, 1.5]")]);
    match parse_jsonl_source(tmp.path()) {
        Err(Error::SchemaViolation { path, line, .. }) => {
            assert!(path.ends_with("boxes.jsonl"));
            assert_eq!(line, 2);
        }
        other => panic!("expected schema violation, got {other:?}"),
    }
}

#[test]
fn non_monotonic_and_unknown_frame_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ego = vec![ego_line("timestamp_us", "0", 0.0), ego_line("timestamp_us", "200000", 1.0), ego_line("timestamp_us", "100000", 2.0)];
    tiny_source(tmp.path(), &ego, &[]);
    assert!(matches!(parse_jsonl_source(tmp.path()), Err(Error::NonMonotonicTimestamps { line: 3, .. })));

    let tmp = tempfile::tempdir().unwrap();
    let ego = vec![ego_line("timestamp_us", "0", 0.0)];
    tiny_source(tmp.path(), &ego, &[&box_line(0, "radar:front", "[4, 2, 1.5]")]);
    match parse_jsonl_source(tmp.path()) {
        Err(Error::UnknownFrameTag { tag, line: 1, .. }) => assert_eq!(tag, "radar:front"),
        other => panic!("expected unknown frame tag, got {other:?}"),
    }

    let tmp = tempfile::tempdir().unwrap();
    tiny_source(tmp.path(), &ego, &[&box_line(0, "camera:rear", "[4, 2, 1.5]")]);
    match parse_jsonl_source(tmp.path()) {
        Err(Error::SchemaViolation { line: 1, reason, .. }) => assert!(reason.contains("rear")),
        other => panic!("expected schema violation, got {other:?}"),
    }

    // a stream file for an undeclared sensor
    let tmp = tempfile::tempdir().unwrap();
    tiny_source(tmp.path(), &ego, &[]);
    std::fs::write(tmp.path().join("camera_rear.jsonl"), "").unwrap();
    assert!(matches!(parse_jsonl_source(tmp.path()), Err(Error::UnknownSensorId(id)) if id == "rear"));
}

#[test]
fn missing_time_field_is_a_schema_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let line = ego_line("timestamp_us", "0", 0.0).replace(r#""timestamp_us": 0, "#, "");
    tiny_source(tmp.path(), &[line], &[]);
    assert!(matches!(parse_jsonl_source(tmp.path()), Err(Error::SchemaViolation { line: 1, .. })));
}

fn same_pose(a: &Se3, b: &Se3, tol: f64) -> bool {
    let dq: f64 = a.rotation.wxyz().iter().zip(b.rotation.wxyz()).map(|(x, y)| x * y).sum();
    a.translation.iter().zip(b.translation).all(|(x, y)| (x - y).abs() < tol) && (1.0 - dq.abs()) < tol
}

#[test]
fn boxes_written_in_camera_frame_round_trip() {
    let cfg = SyntheticScenarioConfig { seed: 3, duration_s: 5.0, inline_payloads: true, ..Default::default() };
    let (log, _) = synthesize(&cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let opts = JsonlWriteOptions { box_frame: FrameTag::Camera(FRONT_CAMERA_ID.into()), inline_payloads: true };
    write_jsonl_source(&log, tmp.path(), &opts).unwrap();
    let raw = std::fs::read_to_string(tmp.path().join("boxes.jsonl")).unwrap();
    assert!(raw.contains("\"camera:pcam_f0\"") && !raw.contains("\"global\""));

    let back = parse_jsonl_source(tmp.path()).unwrap();
    let (a, b) = (boxes(&log.streams), boxes(&back.streams));
    assert_eq!(a.len(), b.len());
    for (fa, fb) in a.iter().zip(b) {
        assert_eq!(fa.timestamp, fb.timestamp);
        for (x, y) in fa.boxes.iter().zip(&fb.boxes) {
            assert_eq!(x.track_id, y.track_id);
            assert!(same_pose(&x.pose, &y.pose, 1e-9), "{:?} vs {:?}", x.pose, y.pose);
            for (u, v) in x.velocity.unwrap().iter().zip(y.velocity.unwrap()) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn circular_ego_speed_and_heading() {
    let cfg = SyntheticScenarioConfig {
        duration_s: 5.0,
        ego_hz: 10.0,
        ego_path: EgoPath::Circle { radius_m: 20.0, speed_mps: 10.0 },
        ..Default::default()
    };
    let (log, _) = synthesize(&cfg).unwrap();
    let StreamRecords::EgoState(ego) = &log.streams.iter().find(|s| s.modality == Modality::EgoState).unwrap().records else {
        unreachable!()
    };
    assert_eq!(ego.len(), 50);
    for w in ego.windows(3) {
        let dt = (w[2].timestamp - w[0].timestamp).as_secs_f64();
        let (p0, p2) = (w[0].pose.translation, w[2].pose.translation);
        let v = [(p2[0] - p0[0]) / dt, (p2[1] - p0[1]) / dt];
        assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 10.0).abs() < 0.01);
        let heading = v[1].atan2(v[0]);
        let d = (heading - w[1].pose.yaw() + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        assert!(d.abs() < 1e-3, "heading off by {d}");
    }
}

#[test]
fn nuscenes_rig_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { duration_s: 10.0, ..Default::default() };
    let gt = generate_synthetic(&cfg, &tmp.path().join("src")).unwrap();
    assert_eq!(gt.rates_hz["camera_pcam_f0"], 12.0);
    assert_eq!(gt.rates_hz["lidar_lidar_top"], 20.0);
    assert_eq!(gt.rates_hz["boxes"], 2.0);
    let parsed = parse_jsonl_source(&tmp.path().join("src")).unwrap();
    let dir = convert(&parsed, &tmp.path().join("out"), &ConvertOptions::default()).unwrap();
    let handle = open_log(&dir).unwrap();
    let sensors: Vec<_> = handle.modalities().filter(|m| **m != Modality::EgoState).collect();
    assert_eq!(sensors.len(), 8, "{sensors:?}");
    assert_eq!(sensors.iter().filter(|m| matches!(m, Modality::Camera(_))).count(), 6);
    assert_eq!(handle.stream(&Modality::Camera(FRONT_CAMERA_ID.into())).unwrap().len(), 120);
    assert_eq!(handle.stream(&Modality::Lidar(TOP_LIDAR_ID.into())).unwrap().len(), 200);
    assert_eq!(handle.stream(&Modality::Boxes).unwrap().len(), 20);
    for s in handle.streams() {
        assert_eq!(s.len(), gt.record_counts[&s.modality().to_string()]);
    }

    // every 2 Hz keyframe has a lidar sweep within 25 ms
    let lidar = handle.stream(&Modality::Lidar(TOP_LIDAR_ID.into())).unwrap().timestamps().unwrap().to_vec();
    let crit = MatchCriteria::nearest().with_tolerance(d123_core::geom::TimeDelta::from_micros(25_000));
    for t in handle.stream(&Modality::Boxes).unwrap().timestamps().unwrap() {
        assert!(match_timestamp(&lidar, *t, &crit).is_some());
    }
}

#[test]
fn camera_extrinsics_follow_the_optical_convention() {
    let cfg = SyntheticScenarioConfig::default();
    let (log, _) = synthesize(&cfg).unwrap();
    let n = log.metadata.cameras.len();
    for (i, id) in cfg.preset.camera_ids().iter().enumerate() {
        let cam = &log.metadata.cameras[id];
        let yaw = std::f64::consts::TAU * i as f64 / n as f64;
        let z = cam.extrinsic.rotation.rotate([0.0, 0.0, 1.0]);
        let y = cam.extrinsic.rotation.rotate([0.0, 1.0, 0.0]);
        assert!((z[0] - yaw.cos()).abs() < 1e-12 && (z[1] - yaw.sin()).abs() < 1e-12 && z[2].abs() < 1e-12);
        assert!((y[2] + 1.0).abs() < 1e-12, "camera y must point down");
    }
    // body forward lands in the front camera's positive-z hemisphere
    let front = &log.metadata.cameras[FRONT_CAMERA_ID];
    let p = front.extrinsic.inverse().transform_point([20.0, 0.0, front.extrinsic.translation[2]]);
    assert!(p[2] > 0.0);
}

#[test]
fn synthetic_generation_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { seed: 11, duration_s: 4.0, ..Default::default() }.with_preset("nuplan").unwrap();
    generate_synthetic(&cfg, &tmp.path().join("a")).unwrap();
    generate_synthetic(&cfg, &tmp.path().join("b")).unwrap();
    let (a, b) = (tree_bytes(&tmp.path().join("a")), tree_bytes(&tmp.path().join("b")));
    assert!(a.len() > 10);
    assert_eq!(a, b);
    let other = SyntheticScenarioConfig { seed: 12, ..cfg };
    generate_synthetic(&other, &tmp.path().join("c")).unwrap();
    assert_ne!(a, tree_bytes(&tmp.path().join("c")));
}

#[test]
fn conversion_is_repeatable_in_both_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { seed: 5, duration_s: 3.0, ..Default::default() };
    generate_synthetic(&cfg, &tmp.path().join("src")).unwrap();
    let parsed = parse_jsonl_source(&tmp.path().join("src")).unwrap();
    for mode in [StorageMode::SelfContained, StorageMode::External] {
        let opts = ConvertOptions { mode, ..Default::default() };
        let d = convert(&parsed, &tmp.path().join("out"), &opts).unwrap();
        let first = tree_bytes(&d);
        convert(&parsed, &tmp.path().join("out"), &opts).unwrap();
        assert_eq!(first, tree_bytes(&d));
        let h = open_log(&d).unwrap();
        assert!(h.sync_names().count() == 1);
        let back = read_converted(&d).unwrap();
        assert_eq!(back.streams.len(), parsed.streams.len());
    }
    let leftovers: Vec<_> = std::fs::read_dir(tmp.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 1, "{leftovers:?}");
}

#[test]
fn dangling_lane_reference_still_converts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { duration_s: 2.0, map_template: MapTemplate::StraightRoad, ..Default::default() };
    let (mut log, _) = synthesize(&cfg).unwrap();
    let map = log.map.as_mut().unwrap();
    let lane = map.objects.iter_mut().find(|o| o.layer == MapLayer::Lane).unwrap();
    let Attributes::Lane(a) = &mut lane.attributes else { unreachable!() };
    a.successors.push("lane_missing".into());
    let dir = convert(&log, tmp.path(), &ConvertOptions::default()).unwrap();
    let store = d123_core::map::load_map(&dir.join("map.arrow")).unwrap();
    let problems = store.validate().unwrap();
    assert_eq!(problems.len(), 1);
    assert!(problems[0].to_string().contains("lane_missing"));
}

#[test]
fn jsonl_convert_export_convert_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { seed: 9, duration_s: 3.0, ..Default::default() }.with_preset("carla_l3ad").unwrap();
    generate_synthetic(&cfg, &tmp.path().join("src")).unwrap();
    let parsed = parse_jsonl_source(&tmp.path().join("src")).unwrap();
    let first = convert(&parsed, &tmp.path().join("out1"), &ConvertOptions::default()).unwrap();

    let exported = read_converted(&first).unwrap();
    write_jsonl_source(&exported, &tmp.path().join("src2"), &JsonlWriteOptions::default()).unwrap();
    let reparsed = parse_jsonl_source(&tmp.path().join("src2")).unwrap();
    let second = convert(&reparsed, &tmp.path().join("out2"), &ConvertOptions::default()).unwrap();
    assert_eq!(tree_bytes(&first), tree_bytes(&second));
}

#[test]
fn dataset_wide_map_is_shared() {
    let tmp = tempfile::tempdir().unwrap();
    let mut ids = Vec::new();
    for i in 0..2 {
        let cfg = SyntheticScenarioConfig { log_id: format!("log_{i}"), duration_s: 1.0, ..Default::default() };
        let (mut log, _) = synthesize(&cfg).unwrap();
        let m = log.map.as_mut().unwrap();
        m.objects = straight_road(-100.0, 400.0, 4, 2, 0.0).unwrap();
        m.scope = d123_core::map::MapScope::DatasetWide;
        m.name = "town".into();
        ids.push(convert(&log, tmp.path(), &ConvertOptions::default()).unwrap());
    }
    for d in &ids {
        let h = open_log(d).unwrap();
        assert_eq!(h.metadata().map_ref.as_deref(), Some("../maps/town.arrow"));
    }
    assert!(tmp.path().join("maps/town.arrow").is_file());
    let back = read_converted(&ids[0]).unwrap();
    assert_eq!(back.map.unwrap().name, "town");
}

#[test]
fn box_interpolation_during_conversion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SyntheticScenarioConfig { duration_s: 5.0, ..Default::default() };
    let (log, gt) = synthesize(&cfg).unwrap();
    let opts = ConvertOptions { interpolate_boxes_hz: Some(10.0), ..Default::default() };
    let dir = convert(&log, tmp.path(), &opts).unwrap();
    let h = open_log(&dir).unwrap();
    let n = h.stream(&Modality::Boxes).unwrap().len();
    assert_eq!(n, (gt.record_counts["boxes"] - 1) * 5 + 1);
    // a constant-velocity agent stays on its line between keyframes
    let StreamRecords::Boxes(frames) = h.stream(&Modality::Boxes).unwrap().read_all().unwrap().records else { unreachable!() };
    let agent = gt.agents.iter().find(|a| matches!(a.motion, d123_core::ingest::Motion::Line { .. })).unwrap();
    for f in &frames {
        if let Some(b) = f.boxes.iter().find(|b| b.track_id == agent.track_id) {
            let s = agent.motion.state((f.timestamp.micros() - gt.start_us) as f64 * 1e-6);
            assert!((b.pose.translation[0] - s.position[0]).abs() < 1e-6);
            assert!((b.pose.translation[1] - s.position[1]).abs() < 1e-6);
        }
    }
}
