//! Acceptance checks, one line per criterion. Exits nonzero if any check fails.
//!
//! Run with `cargo test -p d123-core --test acceptance`.

// negated comparisons in checks are deliberate: NaN must fail them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use d123_core::analytics::*;
use d123_core::geom::*;
use d123_core::ingest::{convert, default_vehicle, synthesize, AgentConfig, ConvertOptions, EgoPath, RigPreset, SyntheticScenarioConfig};
use d123_core::log::*;
use d123_core::map::*;
use d123_core::scene::{SceneFilter, SceneLoader};
use d123_core::sync::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_bbox, brute_nearest, brute_radius, ids, random_map, synthetic_corpus};

const ROUND_TRIP_LOGS: usize = 50;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(60);
const MATCH_CASES: usize = 100_000;
const SYNC_LOGS: usize = 20;
const RESAMPLE_TRIALS: usize = 1_000;
const MAP_SIZES: [usize; 4] = [100, 1_000, 10_000, 100_000];
const MAP_QUERIES: usize = 1_000;
const MIN_RADIUS_SPEEDUP: f64 = 50.0;
const WKB_CASES: usize = 10_000;
const CONVENTION_TOL: f64 = 1e-12;
const LAZY_SCENES: usize = 10_000;
const LAZY_LOGS: usize = 100;
const LAZY_CACHE: usize = 32;
const JITTER_SIGMA_M: f64 = 0.1;
const TAIL_THRESHOLD: f64 = 5.0;
const LINEAR_SPEED_TOL: f64 = 1e-6;
const CENTRIPETAL_TOL: f64 = 0.05;
const LISTING_RADIUS_M: f64 = 50.0;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---- 1. format round-trip ----

/// Streams with payloads stripped, plus the decoded payloads in stream order.
fn split_payloads(streams: &[EventStream], base: &Path) -> Result<(Vec<EventStream>, Vec<DecodedPayload>), String> {
    let mut plain = Vec::new();
    let mut decoded = Vec::new();
    let blank = |p: &PayloadRef| PayloadRef { location: PayloadLocation::Inline(Vec::new()), codec: p.codec.clone() };
    for s in streams {
        let records = match &s.records {
            StreamRecords::Camera(v) => StreamRecords::Camera(
                v.iter()
                    .map(|r| {
                        decoded.push(decode_payload(&r.payload, base).map_err(e2s)?);
                        Ok(CameraFrameRecord { payload: blank(&r.payload), ..r.clone() })
                    })
                    .collect::<Result<_, String>>()?,
            ),
            StreamRecords::Lidar(v) => StreamRecords::Lidar(
                v.iter()
                    .map(|r| {
                        decoded.push(decode_payload(&r.payload, base).map_err(e2s)?);
                        Ok(LidarSweepRecord { payload: blank(&r.payload), ..r.clone() })
                    })
                    .collect::<Result<_, String>>()?,
            ),
            other => other.clone(),
        };
        plain.push(EventStream { modality: s.modality.clone(), records });
    }
    Ok((plain, decoded))
}

fn check_round_trip() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut presets = std::collections::BTreeSet::new();
    let mut payloads = 0;
    for i in 0..ROUND_TRIP_LOGS {
        let preset = RigPreset::NAMES[rng.gen_range(0..RigPreset::NAMES.len())];
        presets.insert(preset);
        let cfg = SyntheticScenarioConfig {
            seed: rng.gen(),
            log_id: format!("rt_{i:03}"),
            duration_s: rng.gen_range(2.0..8.0),
            lidar_points: rng.gen_range(1..96),
            lidar_codec: if rng.gen_bool(0.5) { Codec::RawF32Le } else { Codec::RawDeflate },
            ..Default::default()
        }
        .with_preset(preset)
        .map_err(e2s)?;
        let (log, _) = synthesize(&cfg).map_err(e2s)?;
        let mut expected = log.streams.clone();
        expected.sort_by(|a, b| a.modality.cmp(&b.modality));
        let (plain_src, payloads_src) = split_payloads(&expected, log.payload_base.as_deref().unwrap_or(Path::new(".")))?;

        for (name, mode) in [("ext", StorageMode::External), ("inl", StorageMode::SelfContained)] {
            let dir = convert(&log, &tmp.path().join(name), &ConvertOptions { mode, ..Default::default() }).map_err(e2s)?;
            let h = open_log(&dir).map_err(e2s)?;
            let mut md = h.metadata().clone();
            md.map_ref = log.metadata.map_ref.clone();
            ensure!(md == log.metadata, "{preset} {name}: metadata differs");
            let (plain, decoded) = split_payloads(&h.read_all().map_err(e2s)?, h.dir())?;
            ensure!(plain == plain_src, "{preset} {name}: records differ");
            ensure!(decoded == payloads_src, "{preset} {name}: decoded payloads differ");
        }
        payloads += payloads_src.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < ROUND_TRIP_BUDGET, "took {elapsed:.1?}, budget {ROUND_TRIP_BUDGET:?}");
    Ok(format!("{ROUND_TRIP_LOGS} logs, {} presets, {payloads} payloads x2 modes, {elapsed:.1?} < {ROUND_TRIP_BUDGET:?}", presets.len()))
}

// ---- 2. matching oracle ----

/// Linear-scan reference for `match_timestamp`.
fn scan(stream: &[i64], q: i64, mode: MatchMode, tol: Option<i64>) -> Option<usize> {
    let mut candidates = stream.iter().enumerate().filter(|(_, &t)| match mode {
        MatchMode::Exact => t == q,
        MatchMode::Forward => t >= q,
        MatchMode::Backward => t <= q,
        MatchMode::Nearest => true,
    });
    let best = match mode {
        MatchMode::Backward => candidates.next_back(),
        MatchMode::Nearest => candidates.min_by_key(|(i, &t)| ((t - q).abs(), *i)),
        _ => candidates.next(),
    };
    best.map(|(i, _)| i).filter(|&b| tol.map_or(true, |tol| (stream[b] - q).abs() <= tol))
}

const MODES: [MatchMode; 4] = [MatchMode::Exact, MatchMode::Nearest, MatchMode::Forward, MatchMode::Backward];

fn check_sync_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    let mut hits = 0usize;
    for case in 0..MATCH_CASES {
        let n = rng.gen_range(0..64);
        let mut raw: Vec<i64> = (0..n).map(|_| rng.gen_range(-1_000..1_000)).collect();
        raw.sort_unstable();
        raw.dedup();
        let stream: Vec<TimePoint> = raw.iter().map(|&t| TimePoint::from_micros(t)).collect();
        let q = rng.gen_range(-1_100..1_100);
        let mode = MODES[rng.gen_range(0..4)];
        let tol = rng.gen_bool(0.5).then(|| rng.gen_range(0..300));
        let mut criteria = MatchCriteria::new(mode);
        criteria.tolerance = tol.map(TimeDelta::from_micros);
        let got = match_timestamp(&stream, TimePoint::from_micros(q), &criteria);
        ensure!(got == scan(&raw, q, mode, tol), "case {case}: {mode} q={q} tol={tol:?} over {raw:?}: got {got:?}");
        hits += got.is_some() as usize;
    }

    let tmp = tempfile::tempdir().map_err(e2s)?;
    let dirs = synthetic_corpus(tmp.path(), "sync", SYNC_LOGS, &["nuscenes", "wod_motion", "av2_sensor", "nuplan", "pai_av"], 5.0, 200);
    let mut cells = 0usize;
    for dir in &dirs {
        let log = open_log(dir).map_err(e2s)?;
        let modalities: Vec<Modality> = log.modalities().cloned().collect();
        let reference = modalities[rng.gen_range(0..modalities.len())].clone();
        let period = TimeDelta::from_micros(rng.gen_range(50_000..1_000_000));
        let mut config = if rng.gen_bool(0.5) { SyncConfig::resample(period, reference.clone()) } else { SyncConfig::keyframes(reference.clone()) };
        config.default_mode = MODES[rng.gen_range(0..4)];
        let fixed = TimeDelta::from_micros(rng.gen_range(0..200_000));
        config.default_tolerance = [DefaultTolerance::Policy, DefaultTolerance::Unlimited, DefaultTolerance::Fixed(fixed)][rng.gen_range(0..3)];
        let table = build_sync_table(&log, &config).map_err(e2s)?;

        let times = |m: &Modality| -> Result<Vec<i64>, String> {
            Ok(log.stream(m).map_err(e2s)?.timestamps().map_err(e2s)?.iter().map(|t| t.micros()).collect())
        };
        let rt = times(&reference)?;
        let frames: Vec<i64> = match config.reference {
            SyncReference::Resample { period, .. } => {
                (0..=(rt[rt.len() - 1] - rt[0]) / period.micros()).map(|k| rt[0] + k * period.micros()).collect()
            }
            SyncReference::SourceKeyframes { .. } => rt.clone(),
        };
        ensure!(table.frame_timestamps().iter().map(|t| t.micros()).collect::<Vec<_>>() == frames, "{}: frame timeline differs", dir.display());
        let tol = match (config.default_tolerance, &config.reference) {
            (DefaultTolerance::Fixed(t), _) => Some(t.micros()),
            (DefaultTolerance::Unlimited, _) => None,
            (DefaultTolerance::Policy, SyncReference::Resample { period, .. }) => Some(period.micros()),
            (DefaultTolerance::Policy, SyncReference::SourceKeyframes { .. }) => None,
        };
        for m in &modalities {
            let ts = times(m)?;
            for (f, &t) in frames.iter().enumerate() {
                let expect = scan(&ts, t, config.default_mode, tol);
                ensure!(table.row(f, m) == expect, "{}: {m} frame {f}: {:?} vs {expect:?}", dir.display(), table.row(f, m));
                cells += 1;
            }
        }
    }
    Ok(format!("{MATCH_CASES} match cases ({hits} hits) = linear scan; {SYNC_LOGS} logs, {cells} sync cells = pointwise"))
}

// ---- 3. resampling count law ----

fn check_resample_count() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    for trial in 0..RESAMPLE_TRIALS {
        let first = rng.gen_range(-1_000_000_000_000i64..2_000_000_000_000_000);
        let span = rng.gen_range(0..600_000_000i64);
        let period = rng.gen_range(1..5_000_000i64);
        let (a, b) = (TimePoint::from_micros(first), TimePoint::from_micros(first + span));
        let expect = (span / period + 1) as usize;
        let grid = resample_grid(a, b, TimeDelta::from_micros(period));
        ensure!(grid.len() == expect, "trial {trial}: {} frames, expected {expect}", grid.len());
        ensure!(grid[0] == a && *grid.last().unwrap() <= b, "trial {trial}: grid leaves [first, last]");
        ensure!(grid.windows(2).all(|w| w[1].micros() - w[0].micros() == period), "trial {trial}: uneven grid");

        // the same law through a sync table over a two-event reference stream
        if trial % 10 == 0 && span > 0 {
            let reference = [a, b];
            let streams = BTreeMap::from([(Modality::EgoState, &reference[..])]);
            let table = SyncTable::build(&streams, &SyncConfig::resample(TimeDelta::from_micros(period.max(span / 50_000 + 1)), Modality::EgoState))
                .map_err(e2s)?;
            let p = period.max(span / 50_000 + 1);
            ensure!(table.len() == (span / p + 1) as usize, "trial {trial}: sync table has {} frames", table.len());
        }
    }
    Ok(format!("{RESAMPLE_TRIALS} trials: frames = floor((t_last - t_first) / period) + 1"))
}

// ---- 4. spatial index oracle ----

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn check_spatial_index() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4);
    let mut speedup = 0.0;
    for (k, &n) in MAP_SIZES.iter().enumerate() {
        let objs = random_map(n, 40 + k as u64);
        let store = MapStore::new(objs.clone(), MapScope::PerLog).map_err(e2s)?;
        for l in MapLayer::ALL {
            if let Some(t) = store.tree(l) {
                t.check_invariants().map_err(|e| format!("n={n} {l}: {e}"))?;
                ensure!(t.len() == objs.iter().filter(|o| o.layer == l).count(), "n={n} {l}: tree size");
            }
        }
        let side = (n as f64).sqrt() * 25.0 + 50.0;
        let (mut fast, mut slow) = (Vec::new(), Vec::new());
        for q in 0..MAP_QUERIES {
            let p = [rng.gen_range(-20.0..side + 20.0), rng.gen_range(-20.0..side + 20.0)];
            let layers: Vec<MapLayer> = MapLayer::ALL.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let r = rng.gen_range(0.0..60.0);

            let t0 = Instant::now();
            let got = store.objects_in_radius(p, r, &layers).map_err(e2s)?;
            fast.push(t0.elapsed());
            let t0 = Instant::now();
            let expect = brute_radius(&objs, p, r, &layers);
            slow.push(t0.elapsed());
            ensure!(ids(&got) == expect, "n={n} radius query {q} differs");

            let rect = Rect::around(p, r);
            ensure!(ids(&store.objects_in_bbox(&rect, &layers).map_err(e2s)?) == brute_bbox(&objs, &rect, &layers), "n={n} range query {q} differs");

            let layer = MapLayer::ALL[rng.gen_range(0..MapLayer::ALL.len())];
            let got = store.nearest(p, layer).ok().map(|(o, d)| (o.id.as_str(), d));
            ensure!(got == brute_nearest(&objs, p, layer), "n={n} nearest query {q} differs");
        }
        if n == 100_000 {
            speedup = median(slow).as_secs_f64() / median(fast).as_secs_f64().max(1e-9);
        }
    }
    ensure!(speedup >= MIN_RADIUS_SPEEDUP, "1e5 radius median speedup {speedup:.0}x < {MIN_RADIUS_SPEEDUP}x");
    Ok(format!("sizes {MAP_SIZES:?} x {MAP_QUERIES} radius/range/nearest = brute force; 1e5 radius median {speedup:.0}x >= {MIN_RADIUS_SPEEDUP}x"))
}

// ---- 5. WKB conformance ----

#[derive(serde::Deserialize)]
struct Vector {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    has_z: bool,
    coordinates: serde_json::Value,
    wkb_le: String,
    wkb_be: String,
}

fn hex(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

fn random_geometry(rng: &mut impl Rng) -> Geometry {
    let dim = if rng.gen_bool(0.5) { Dim::Xyz } else { Dim::Xy };
    let coord = |rng: &mut dyn rand::RngCore| -> Coord {
        let z = if dim == Dim::Xyz { rng.gen_range(-1e6..1e6) } else { 0.0 };
        [rng.gen_range(-1e7..1e7), rng.gen_range(-1e7..1e7), z]
    };
    match rng.gen_range(0..3) {
        0 => Geometry::Point { dim, coord: coord(rng) },
        1 => Geometry::LineString { dim, coords: (0..rng.gen_range(2..20)).map(|_| coord(rng)).collect() },
        _ => Geometry::Polygon {
            dim,
            rings: (0..rng.gen_range(1..4))
                .map(|_| {
                    let mut ring: Vec<Coord> = (0..rng.gen_range(3..10)).map(|_| coord(rng)).collect();
                    ring.push(ring[0]);
                    ring
                })
                .collect(),
        },
    }
}

fn check_wkb() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    for i in 0..WKB_CASES {
        let g = random_geometry(&mut rng);
        let b = wkb_encode(&g);
        let back = wkb_decode(&b).map_err(|e| format!("case {i}: {e}"))?;
        ensure!(back == g, "case {i}: decoded geometry differs");
        ensure!(wkb_encode(&back) == b, "case {i}: re-encoded bytes differ");
    }
    let vectors: Vec<Vector> = serde_json::from_str(include_str!("fixtures/wkb_vectors.json")).map_err(e2s)?;
    for v in &vectors {
        let g = Geometry::from_geojson(&serde_json::json!({"type": v.kind, "coordinates": v.coordinates})).map_err(e2s)?;
        ensure!((g.dim() == Dim::Xyz) == v.has_z, "{}: dimension", v.name);
        ensure!(wkb_encode(&g) == hex(&v.wkb_le), "{}: encoded bytes differ from fixture", v.name);
        ensure!(wkb_decode(&hex(&v.wkb_le)).map_err(e2s)? == g, "{}: little-endian decode", v.name);
        ensure!(wkb_decode(&hex(&v.wkb_be)).map_err(e2s)? == g, "{}: big-endian decode", v.name);
    }
    Ok(format!("{WKB_CASES} random round-trips exact; {} fixture vectors byte-equal", vectors.len()))
}

// ---- 6. conventions ----

fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
    (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
}

fn check_conventions() -> Outcome {
    let r = optical_to_body_rotation();
    // camera x right, y down, z forward; body x forward, y left, z up
    for (cam, body) in [([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]), ([1.0, 0.0, 0.0], [0.0, -1.0, 0.0]), ([0.0, 1.0, 0.0], [0.0, 0.0, -1.0])] {
        ensure!(close(r.rotate(cam), body, CONVENTION_TOL), "camera {cam:?} maps to {:?}, expected body {body:?}", r.rotate(cam));
    }
    let front = CameraModel::pinhole(1000.0, 1000.0, 960.0, 540.0, 1920, 1080, looking_camera_extrinsic([1.5, 0.0, 1.6], 0.0));
    for (body, cam) in [([11.5, 0.0, 1.6], [0.0, 0.0, 10.0]), ([1.5, 2.0, 1.6], [-2.0, 0.0, 0.0]), ([1.5, 0.0, 3.6], [0.0, -2.0, 0.0])] {
        let got = front.body_point_in_camera(body);
        ensure!(close(got, cam, CONVENTION_TOL), "body {body:?} seen at {got:?}, expected {cam:?}");
    }
    let px = front.project_point([0.0, 0.0, 10.0]).ok_or("point ahead not projected")?;
    ensure!((px[0] - 960.0).abs() <= 1e-9 && (px[1] - 540.0).abs() <= 1e-9, "optical axis projects to {px:?}");
    let left = looking_camera_extrinsic([0.0; 3], std::f64::consts::FRAC_PI_2);
    ensure!(close(left.rotation.rotate([0.0, 0.0, 1.0]), [0.0, 1.0, 0.0], CONVENTION_TOL), "left camera does not look along body +y");

    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let d = rng.gen_range(0.2..2.5);
        let rear = VehicleParameters::new(4.8, 1.9, 1.6, 2.9, d, PoseOrigin::RearAxle).map_err(e2s)?;
        let center = VehicleParameters::new(4.8, 1.9, 1.6, 2.9, d, PoseOrigin::Center).map_err(e2s)?;
        let q = Quaternion::from_euler(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let pose = Se3::new([rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4), rng.gen_range(-50.0..50.0)], q);
        let c = pose_at_reference(&pose, &rear, ReferencePoint::Center).map_err(e2s)?;
        // independent rotation of the body x offset
        let nq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q.wxyz()[0], q.wxyz()[1], q.wxyz()[2], q.wxyz()[3]));
        let off = nq * nalgebra::Vector3::new(d, 0.0, 0.0);
        let expect = [pose.translation[0] + off.x, pose.translation[1] + off.y, pose.translation[2] + off.z];
        ensure!(close(c.translation, expect, 1e-9), "center pose {:?} vs {expect:?}", c.translation);
        let back = pose_at_reference(&c, &center, ReferencePoint::RearAxle).map_err(e2s)?;
        let err = (0..3).map(|i| (back.translation[i] - pose.translation[i]).abs()).fold(0.0, f64::max);
        let rot = back.rotation.angle_to(&pose.rotation);
        worst = worst.max(err).max(rot);
    }
    ensure!(worst <= CONVENTION_TOL, "rear-axle/center round trip error {worst:e}");
    Ok(format!("axis mapping exact to {CONVENTION_TOL:e}; 1000 rear-axle<->center round trips, max error {worst:.1e}"))
}

// ---- 7. scene laziness ----

fn check_laziness() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    // 20 Hz ego over exactly 10 s, resampled at 10 Hz: 101 frames, 100 two-frame scenes per log
    synthetic_corpus(tmp.path(), "lazy", LAZY_LOGS, &["wod_motion"], 10.05, 700);
    let loader = SceneLoader::with_cache_capacity(tmp.path(), LAZY_CACHE);
    let filter = SceneFilter { stride: Some(1), ..SceneFilter::from_secs(&["lazy"], 0.1, 0.0, 0.1) };
    let scenes = loader.get_filtered_scenes(&filter).map_err(e2s)?;
    let snap = loader.stats().snapshot();
    ensure!(scenes.len() >= LAZY_SCENES, "{} scenes < {LAZY_SCENES}", scenes.len());
    ensure!(snap.records_read == 0 && snap.record_batches == 0, "listing read {} rows in {} batches", snap.records_read, snap.record_batches);
    ensure!(snap.live_handles <= LAZY_CACHE as i64, "{} open handles after listing", snap.live_handles);
    ensure!(loader.log_cache().len() <= LAZY_CACHE, "cache holds {}", loader.log_cache().len());

    let mut peak = 0;
    for (i, s) in scenes.iter().enumerate().step_by(7) {
        s.get_ego_state_se3_at_iteration(0).map_err(e2s)?.found().ok_or(format!("scene {i}: no ego"))?;
        peak = peak.max(loader.stats().snapshot().live_handles);
    }
    ensure!(peak <= LAZY_CACHE as i64, "{peak} handles open during access");
    let read = loader.stats().snapshot().records_read;
    ensure!(read == scenes.len().div_ceil(7) as u64, "first access read {read} rows");
    Ok(format!(
        "{} scenes over {LAZY_LOGS} logs: 0 rows read, {} handles <= {LAZY_CACHE} after listing, peak {peak} during access",
        scenes.len(),
        snap.live_handles
    ))
}

// ---- 8. annotation statistics ----

fn acceleration_tail(set: &HistogramSet) -> Result<(f64, u64), String> {
    let spec = set.bins.acceleration;
    let mut all = Histogram::new(spec);
    for (k, h) in &set.histograms {
        if k.quantity == Quantity::Acceleration {
            all.counts.iter_mut().zip(&h.counts).for_each(|(a, b)| *a += b);
        }
    }
    ensure!(all.counts.iter().sum::<u64>() > 0, "no acceleration samples");
    Ok((all.tail_mass(TAIL_THRESHOLD), all.counts.iter().sum()))
}

fn timed_boxes(times_s: &[f64], f: impl Fn(f64) -> [f64; 2]) -> Vec<(TimePoint, BoxDetection)> {
    times_s
        .iter()
        .map(|&t| {
            let p = f(t);
            let b = BoxDetection { track_id: "t".into(), raw_label: "car".into(), pose: Se3::from_xy_yaw(p[0], p[1], 0.0), extent: [4.0, 2.0, 1.6], velocity: None };
            (TimePoint::from_micros((t * 1e6).round() as i64), b)
        })
        .collect()
}

fn check_statistics() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let base = SyntheticScenarioConfig {
        duration_s: 20.0,
        ego_path: EgoPath::Line { speed_mps: 8.0, heading_rad: 0.0 },
        agents: AgentConfig { count: 20, ..Default::default() },
        lidar_points: 4,
        ..Default::default()
    }
    .with_preset("wod_motion")
    .map_err(e2s)?;
    ensure!(base.preset.box_hz == Some(10.0), "box rate is not 10 Hz");
    let mut tails = Vec::new();
    for (k, sigma) in [0.0, JITTER_SIGMA_M].into_iter().enumerate() {
        let mut dirs = Vec::new();
        for i in 0..5 {
            let cfg = SyntheticScenarioConfig { seed: 800 + i, log_id: format!("pop{k}_{i}"), box_noise_sigma_m: sigma, ..base.clone() };
            let (log, _) = synthesize(&cfg).map_err(e2s)?;
            dirs.push(convert(&log, &tmp.path().join(format!("pop{k}")), &Default::default()).map_err(e2s)?);
        }
        let set = build_histograms(&dirs, &TaxonomyMap::builtin(), &BinsConfig::default()).map_err(e2s)?;
        tails.push(acceleration_tail(&set)?);
    }
    let ((clean, nc), (noisy, nn)) = (tails[0], tails[1]);
    ensure!(noisy > clean, "jittered tail {noisy:.4} <= clean {clean:.4}");

    let vehicle = default_vehicle();
    let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
    let line = timed_boxes(&t, |t| [3.0 + 6.0 * t, -1.0 + 8.0 * t]);
    let k = track_kinematics(&line.iter().map(|(t, b)| (*t, b)).collect::<Vec<_>>(), &[], &vehicle).map_err(e2s)?;
    let speed_err = k.samples.iter().map(|s| (s.speed.unwrap() - 10.0).abs()).fold(0.0, f64::max);
    ensure!(speed_err <= LINEAR_SPEED_TOL, "linear speed error {speed_err:e}");

    let (r, w) = (20.0, 0.5);
    let t: Vec<f64> = (0..120).map(|i| i as f64 * 0.1).collect();
    let circle = timed_boxes(&t, |t| [r * (w * t).cos(), r * (w * t).sin()]);
    let k = track_kinematics(&circle.iter().map(|(t, b)| (*t, b)).collect::<Vec<_>>(), &[], &vehicle).map_err(e2s)?;
    let acc_err = k.samples[2..k.samples.len() - 2].iter().map(|s| (s.acceleration.unwrap().abs() - r * w * w).abs()).fold(0.0, f64::max);
    ensure!(acc_err <= CENTRIPETAL_TOL, "centripetal error {acc_err:.4}");
    Ok(format!(
        "tail mass >{TAIL_THRESHOLD} m/s^2: jittered {noisy:.4} ({nn} samples) > clean {clean:.4} ({nc}); speed err {speed_err:.1e} <= {LINEAR_SPEED_TOL:e}; centripetal err {acc_err:.4} <= {CENTRIPETAL_TOL}"
    ))
}

// ---- 9. listing workflow ----

fn nearest_row(ts: &[TimePoint], q: TimePoint) -> usize {
    (0..ts.len()).min_by_key(|&i| ((ts[i].micros() - q.micros()).abs(), i)).unwrap()
}

fn check_listing() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    synthetic_corpus(tmp.path(), "test", 8, &["nuscenes", "nuplan", "av2_sensor", "carla_l3ad"], 12.0, 900);
    let loader = SceneLoader::new(tmp.path());
    let filter = SceneFilter { shuffle: true, ..SceneFilter::from_secs(&["test"], 0.5, 1.0, 4.0) };
    let scenes = loader.get_filtered_scenes(&filter).map_err(e2s)?;
    ensure!(!scenes.is_empty(), "no scenes");
    let mut objects = 0;
    for (i, scene) in scenes.iter().enumerate() {
        let ego = scene.get_ego_state_se3_at_iteration(0).map_err(e2s)?.found().ok_or(format!("scene {i}: no ego"))?;
        let lidar = scene.get_lidar_at_iteration(0, "lidar_top").map_err(e2s)?.found().ok_or(format!("scene {i}: no lidar"))?;
        let camera = scene.get_camera_at_timestamp(lidar.timestamp_start, "pcam_f0", &MatchCriteria::nearest()).map_err(e2s)?;
        let map_api = scene.get_map_api().map_err(e2s)?;
        let found = map_api.get_map_objects_in_radius(ego.center_3d(), LISTING_RADIUS_M, &["lane", "crosswalk"]).map_err(e2s)?;

        // oracles read the raw streams and the full map
        let raw = open_log(scene.log_dir()).map_err(e2s)?;
        let frame = scene.timestamp_at_iteration(0).map_err(e2s)?;
        let ego_ts = raw.stream(&Modality::EgoState).map_err(e2s)?.timestamps().map_err(e2s)?.to_vec();
        let Record::EgoState(ego_rec) = raw.stream(&Modality::EgoState).map_err(e2s)?.get(nearest_row(&ego_ts, frame)).map_err(e2s)? else {
            unreachable!()
        };
        ensure!(ego.record == ego_rec, "scene {i}: ego differs from nearest-event oracle");
        let lid = Modality::Lidar("lidar_top".into());
        let lidar_ts = raw.stream(&lid).map_err(e2s)?.timestamps().map_err(e2s)?.to_vec();
        ensure!(lidar.timestamp_start == lidar_ts[nearest_row(&lidar_ts, frame)], "scene {i}: lidar differs from oracle");
        let cam_ts = raw.stream(&Modality::Camera("pcam_f0".into())).map_err(e2s)?.timestamps().map_err(e2s)?.to_vec();
        ensure!(camera.timestamp == cam_ts[nearest_row(&cam_ts, lidar.timestamp_start)], "scene {i}: camera differs from oracle");

        let map_path = scene.log_dir().join(raw.metadata().map_ref.clone().ok_or(format!("scene {i}: no map"))?);
        let all: Vec<MapObject> = load_map(&map_path).map_err(e2s)?.objects().map_err(e2s)?.into_iter().cloned().collect();
        let c = ego.center_3d();
        let mut expect = brute_radius(&all, [c[0], c[1]], LISTING_RADIUS_M, &[MapLayer::Lane, MapLayer::Crosswalk]);
        let mut got = ids(&found);
        got.sort();
        expect.sort();
        ensure!(got == expect, "scene {i}: radius query differs from brute force");
        ensure!(found.iter().any(|o| o.layer == MapLayer::Lane), "scene {i}: no lane within {LISTING_RADIUS_M} m");
        objects += found.len();
    }
    Ok(format!("{} scenes: ego, lidar, nearest camera and {objects} lane/crosswalk objects match oracles", scenes.len()))
}

fn main() {
    let checks: [Check; 9] = [
        ("format round-trip", check_round_trip),
        ("sync oracle", check_sync_oracle),
        ("resampling count law", check_resample_count),
        ("spatial-index oracle", check_spatial_index),
        ("WKB conformance", check_wkb),
        ("conventions", check_conventions),
        ("scene laziness", check_laziness),
        ("annotation statistics", check_statistics),
        ("listing workflow", check_listing),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{}] {status} {name}: {detail} ({:.1?})", i + 1, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} of {} checks failed", checks.len());
        std::process::exit(1);
    }
}
