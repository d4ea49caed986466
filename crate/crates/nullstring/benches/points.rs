use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use nullstring::catalog::Catalog;
use nullstring::verify::{eval_points, eval_points_serial};

fn points(c: &mut Criterion) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/catalog.json");
    let cat = Catalog::load(path).expect("shipped catalog loads");
    let mut group = c.benchmark_group("eval_points");
    group.sample_size(20);
    for id in ["dee-ii-e.general-n", "klein-beltrami", "dnn-n-e.hyperheavenly"] {
        let rec = cat.get(id).expect("record exists");
        let pts = rec.sample_points(64, 1).expect("samples");
        group.bench_with_input(BenchmarkId::new("parallel", id), &pts, |b, p| b.iter(|| eval_points(black_box(rec), p)));
        group.bench_with_input(BenchmarkId::new("serial", id), &pts, |b, p| b.iter(|| eval_points_serial(black_box(rec), p)));
    }
    group.finish();
}

criterion_group!(benches, points);
criterion_main!(benches);
