use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use d123_bench::{extent_for, random_objects};
use d123_core::map::{wkb_decode, wkb_encode, MapLayer, MapScope, MapStore};

const LAYERS: [MapLayer; 5] = [MapLayer::Crosswalk, MapLayer::Walkway, MapLayer::Carpark, MapLayer::GenericDrivable, MapLayer::StopZone];

fn bench_radius(c: &mut Criterion) {
    let mut group = c.benchmark_group("radius_50m");
    for n in [1_000usize, 10_000, 100_000] {
        let objects = random_objects(n, 7);
        let store = MapStore::new(objects.clone(), MapScope::PerLog).unwrap();
        let side = extent_for(n);
        let mut k = 0u64;
        let mut next = move || {
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            [(k >> 11) as f64 / (1u64 << 53) as f64 * side, (k >> 20) as f64 / (1u64 << 44) as f64 * side]
        };
        group.bench_function(BenchmarkId::new("str_tree", n), |b| {
            b.iter(|| black_box(store.objects_in_radius(next(), 50.0, &LAYERS).unwrap().len()))
        });
        if n <= 10_000 {
            group.bench_function(BenchmarkId::new("linear_scan", n), |b| {
                b.iter(|| {
                    let p = next();
                    black_box(objects.iter().filter(|o| o.geometry.distance_xy(p) <= 50.0).count())
                })
            });
        }
    }
    group.finish();
}

fn bench_build(c: &mut Criterion) {
    let objects = random_objects(100_000, 8);
    c.bench_function("str_build_100k", |b| b.iter(|| black_box(MapStore::new(objects.clone(), MapScope::PerLog).unwrap())));
}

fn bench_wkb(c: &mut Criterion) {
    let objects = random_objects(1_000, 9);
    let encoded: Vec<Vec<u8>> = objects.iter().map(|o| wkb_encode(&o.geometry)).collect();
    c.bench_function("wkb_encode_1k", |b| b.iter(|| objects.iter().map(|o| wkb_encode(&o.geometry).len()).sum::<usize>()));
    c.bench_function("wkb_decode_1k", |b| b.iter(|| encoded.iter().for_each(|e| { black_box(wkb_decode(e).unwrap()); })));
}

criterion_group!(benches, bench_radius, bench_build, bench_wkb);
criterion_main!(benches);
