//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use d123_core::geom::TimePoint;
use d123_core::ingest::{convert, synthesize, ConvertOptions, SyntheticScenarioConfig};
use d123_core::log::StorageMode;
use d123_core::map::{Attributes, Coord, Dim, Geometry, MapLayer, MapObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` strictly increasing timestamps with jittered gaps around `period_us`.
pub fn jittered_stream(n: usize, period_us: i64, seed: u64) -> Vec<TimePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0i64;
    (0..n)
        .map(|_| {
            t += rng.gen_range(period_us / 2..=period_us * 3 / 2).max(1);
            TimePoint::from_micros(t)
        })
        .collect()
}

/// Random small polygons at constant density.
pub fn random_objects(n: usize, seed: u64) -> Vec<MapObject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt() * 25.0 + 50.0;
    let layers = [MapLayer::Crosswalk, MapLayer::Walkway, MapLayer::Carpark, MapLayer::GenericDrivable, MapLayer::StopZone];
    (0..n)
        .map(|i| {
            let layer = layers[rng.gen_range(0..layers.len())];
            let c = [rng.gen_range(0.0..side), rng.gen_range(0.0..side)];
            let r = rng.gen_range(0.5..12.0);
            let k = rng.gen_range(3..8);
            let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let pts: Vec<Coord> = angles.iter().map(|a| [c[0] + r * a.cos(), c[1] + r * a.sin(), 0.0]).collect();
            let geometry = Geometry::polygon(vec![pts], Dim::Xy).unwrap();
            MapObject::new(format!("obj_{i:06}"), layer, geometry, Attributes::Generic(Default::default())).unwrap()
        })
        .collect()
}

/// Side length of the square [`random_objects`] spreads `n` objects over.
pub fn extent_for(n: usize) -> f64 {
    (n as f64).sqrt() * 25.0 + 50.0
}

/// Converts one synthetic log per seed into `root` and returns the log directories.
pub fn synthetic_logs(root: &Path, preset: &str, seeds: &[u64], duration_s: f64) -> Vec<PathBuf> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = SyntheticScenarioConfig { seed, duration_s, lidar_points: 1024, log_id: format!("{preset}_{seed:04}"), ..Default::default() }
                .with_preset(preset)
                .unwrap();
            let (log, _) = synthesize(&cfg).unwrap();
            convert(&log, root, &ConvertOptions { mode: StorageMode::SelfContained, ..Default::default() }).unwrap()
        })
        .collect()
}
