use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use maestro_bench::{patterned_score, patterned_training_set};
use maestro_core::diff::{apply_delta, diff_scores};
use maestro_core::generate::{generate, GenerationConfig};
use maestro_core::io::{export_midi, parse_canonical, write_canonical};
use maestro_core::regression::train;
use maestro_core::segment::{featurize, segment_score};
use maestro_core::survey::Emotion;

fn bench_featurize(c: &mut Criterion) {
    let score = patterned_score(12, 200);
    let segments = segment_score(&score);
    c.bench_function("featurize 12x200", |b| {
        b.iter(|| {
            for segment in &segments {
                black_box(featurize(black_box(&score), segment));
            }
        })
    });
}

fn bench_train(c: &mut Criterion) {
    let ts = patterned_training_set(64);
    c.bench_function("train 64x14 ridge", |b| {
        b.iter(|| train(black_box(&ts), 1e-6).unwrap())
    });
}

fn bench_diff_apply(c: &mut Criterion) {
    let original = patterned_score(12, 200);
    let mut interpretation = original.clone();
    for part in &mut interpretation.parts {
        for measure in &mut part.measures {
            for note in &mut measure.notes {
                if let Some(level) = note.dynamic.offset(1) {
                    note.dynamic = level;
                }
            }
        }
    }
    c.bench_function("diff 12x200", |b| {
        b.iter(|| diff_scores(black_box(&original), black_box(&interpretation)).unwrap())
    });
    let deltas = diff_scores(&original, &interpretation).unwrap();
    c.bench_function("apply 12x200", |b| {
        b.iter(|| apply_delta(black_box(&original), black_box(&deltas)).unwrap())
    });
}

fn bench_generate(c: &mut Criterion) {
    let score = patterned_score(12, 200);
    let model = train(&patterned_training_set(64), 1e-6).unwrap();
    let config = GenerationConfig::new(Emotion::Sadness);
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    group.bench_function("grid 253125 plans, 12x200 score", |b| {
        b.iter(|| {
            generate(
                black_box(&score),
                black_box(&model),
                black_box(&config),
                None,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bench_io(c: &mut Criterion) {
    let score = patterned_score(12, 200);
    let bytes = write_canonical(&score).unwrap();
    c.bench_function("write_canonical 12x200", |b| {
        b.iter(|| write_canonical(black_box(&score)).unwrap())
    });
    c.bench_function("parse_canonical 12x200", |b| {
        b.iter_batched(
            || bytes.clone(),
            |input| parse_canonical(black_box(&input)).unwrap(),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("export_midi 12x200", |b| {
        b.iter(|| export_midi(black_box(&score)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_featurize,
    bench_train,
    bench_diff_apply,
    bench_generate,
    bench_io
);
criterion_main!(benches);
