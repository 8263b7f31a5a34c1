use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nbp_core::baselines::rrt_mi::full_fov_mi;
use nbp_core::exploration::{map_entropy_total, ExplorationConfig, ExplorationRun, Method};
use nbp_core::planner::{self, mi_at_pose};
use nbp_core::sensor::raycast_truth;
use nbp_core::{scenarios, ObjectiveConfig, Pose2, SensorModel, Vec2};

/// Rooms map after the initial scan from the default start.
fn rooms_run() -> ExplorationRun {
    let start = scenarios::start_pose("rooms").unwrap();
    ExplorationRun::new(
        scenarios::rooms(),
        start,
        Method::Functional,
        ExplorationConfig::default(),
        1,
    )
    .unwrap()
}

fn map_kernels(c: &mut Criterion) {
    let run = rooms_run();
    let map = run.map().clone();
    let mut g = c.benchmark_group("map");
    g.bench_function("predict_occupancy", |b| {
        b.iter(|| map.predict_occupancy(black_box(&Vec2::new(3.3, 10.2))))
    });
    g.bench_function("occupancy_with_gradient", |b| {
        b.iter(|| map.occupancy_with_gradient(black_box(&Vec2::new(3.3, 10.2))))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scan = raycast_truth(
        run.env(),
        &Pose2::new(4.0, 10.0, 0.0),
        &SensorModel::scanner(),
        0.25,
        &mut rng,
    )
    .unwrap();
    g.sample_size(20);
    g.bench_function("train_sgd_one_scan_5_epochs", |b| {
        b.iter_batched(
            || map.clone(),
            |mut m| m.train_sgd(&scan, 5, &mut rng),
            criterion::BatchSize::LargeInput,
        )
    });
    g.bench_function("entropy_total_rooms", |b| {
        b.iter(|| map_entropy_total(&map, 0.25, &run.env().bounds()).unwrap())
    });
    g.finish();
}

fn information(c: &mut Criterion) {
    let run = rooms_run();
    let map = run.map();
    let cfg = ObjectiveConfig::default();
    let sensor = SensorModel::expected();
    let pose = Pose2::new(4.0, 10.0, 0.0);
    let mut g = c.benchmark_group("information");
    g.sample_size(20);
    g.bench_function("mi_at_pose_arc", |b| {
        b.iter(|| mi_at_pose(map, black_box(&pose), &sensor, &cfg).unwrap())
    });
    g.bench_function("full_fov_mi", |b| {
        b.iter(|| full_fov_mi(map, black_box(&pose), &sensor, &cfg, 0.5).unwrap())
    });
    g.finish();
}

fn planning(c: &mut Criterion) {
    let map = scenarios::toy_wall_map();
    let sensor = SensorModel::expected();
    let cfg = ObjectiveConfig::default();
    let start = Pose2::new(-3.0, 0.0, 0.0);
    let mut g = c.benchmark_group("planner");
    g.sample_size(10);
    g.bench_function("optimize_toy_wall", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        b.iter(|| planner::optimize(&map, &start, &cfg, &sensor, None, &mut rng).unwrap())
    });
    g.finish();
}

criterion_group!(benches, map_kernels, information, planning);
criterion_main!(benches);
