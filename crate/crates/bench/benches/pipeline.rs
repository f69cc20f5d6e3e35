use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ovgrasp_bench::{ap_instance, catalog_vocabulary, kitchen, region_embedding, rig_offset, table_depth};
use ovgrasp_core::eval::average_precision;
use ovgrasp_core::geometry::{register_depth, HandCentroid, Intrinsics};
use ovgrasp_core::intent::Token;
use ovgrasp_core::ovdetect::{classify_region, SimilarityParams};
use ovgrasp_core::protocol::command::encode_token;
use ovgrasp_core::protocol::CommandDecoder;
use ovgrasp_core::sim::{run_scenario, Pipeline};

fn classify(c: &mut Criterion) {
    let (space, vocab) = catalog_vocabulary(0);
    let e = region_embedding(&space, "plum");
    let p = SimilarityParams::default();
    c.bench_function("classify_region/15 prompts", |b| {
        b.iter(|| classify_region(black_box(&e), &vocab, &p).unwrap())
    });
}

fn registration(c: &mut Criterion) {
    let intr = Intrinsics::default_sensor();
    let depth = table_depth(intr.width, intr.height);
    let ext = rig_offset();
    c.bench_function("register_depth/640x480", |b| {
        b.iter(|| register_depth(black_box(&depth), &intr, &intr, &ext))
    });
}

fn pipeline(c: &mut Criterion) {
    let s = kitchen();
    let mut p = Pipeline::new(&s).unwrap();
    let hand = HandCentroid::new(322.0, 300.0, 500.0);
    c.bench_function("pipeline/step", |b| {
        b.iter(|| {
            if p.frame() > 1000 {
                p.reset();
            }
            p.step(black_box(hand), None)
        })
    });
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    g.bench_function("kitchen 8 s", |b| b.iter(|| run_scenario(&s).unwrap()));
    g.finish();
}

fn ap(c: &mut Criterion) {
    let (dets, gts) = ap_instance(500);
    c.bench_function("average_precision/1500 boxes", |b| {
        b.iter(|| average_precision(black_box(&dets), &gts, 0.5))
    });
}

fn protocol(c: &mut Criterion) {
    let bytes: Vec<u8> = (0..=255u8).flat_map(|s| encode_token(Token::Grip, s)).collect();
    c.bench_function("command_decoder/256 frames", |b| {
        b.iter(|| CommandDecoder::new().push(black_box(&bytes)).len())
    });
}

criterion_group!(benches, classify, registration, pipeline, ap, protocol);
criterion_main!(benches);
