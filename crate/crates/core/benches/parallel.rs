//! Sequential vs rayon execution of the three data-parallel stages on a small
//! cabin. Build with `--no-default-features` to bench the fallback build,
//! where both arms run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use raychannel::channel::AugmentSpec;
use raychannel::datagen::generate_from_links;
use raychannel::forest::{train_forest, Hyperparams, Samples};
use raychannel::scene::make_cabin_scene;
use raychannel::tracer::trace_all;
use raychannel::Parallelism;

const POLICIES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("rayon", Parallelism::Auto)];

fn stages(c: &mut Criterion) {
    let scene = make_cabin_scene(10.0, 3.0, 2.0, 3, 0).expect("cabin");
    let links = trace_all(&scene, Parallelism::Auto).expect("trace");
    let spec = AugmentSpec::sweep(2, 7);
    let dataset = generate_from_links(&scene, &links, &spec, Parallelism::Auto).expect("dataset");
    let samples = Samples::from_rows(&dataset.rows).expect("samples");
    let hp = Hyperparams {
        n_trees: 32,
        ..Hyperparams::default()
    };

    let mut group = c.benchmark_group("trace_all");
    group.sample_size(10);
    for (name, par) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| trace_all(black_box(&scene), par).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("generate_dataset");
    group.sample_size(10);
    for (name, par) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_from_links(&scene, black_box(&links), &spec, par).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("train_forest");
    group.sample_size(10);
    for (name, par) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_forest(black_box(&samples), None, &hp, 1, par).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
