use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lcm_bench::{random_graph, sentences, small_config};
use lcm_core::analysis::laplacian_spectrum;
use lcm_core::extract::extract_triples;
use lcm_core::graph::TriangleMode;
use lcm_core::manifold::{gt_refine, project, GtConfig, HashedNgramEncoder, ManifoldConfig};
use lcm_core::oracle::Oracle;
use lcm_core::pipeline::{run_pipeline, Output};

fn extraction(c: &mut Criterion) {
    let text = sentences(1000);
    c.bench_function("extract_1000_sentences", |b| {
        b.iter(|| text.iter().map(|s| extract_triples(black_box(s), "econ").len()).sum::<usize>())
    });
}

fn triangles(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect_triangles");
    for n in [500, 2000] {
        let g = random_graph(n, 3 * n, 1);
        group.bench_with_input(BenchmarkId::new("chain", n), &g, |b, g| b.iter(|| g.detect_triangles(TriangleMode::ChainSameDomain).len()));
        group.bench_with_input(BenchmarkId::new("cycle", n), &g, |b, g| b.iter(|| g.detect_triangles(TriangleMode::Cycle).len()));
    }
    group.finish();
}

fn refinement(c: &mut Criterion) {
    let mut group = c.benchmark_group("gt_refine");
    group.sample_size(10);
    let enc = HashedNgramEncoder::new(256, 0);
    for n in [500, 2000] {
        let g = random_graph(n, 2 * n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| gt_refine(g, &GtConfig::default(), &enc).unwrap())
        });
    }
    group.finish();
}

fn layout(c: &mut Criterion) {
    let mut group = c.benchmark_group("umap_project");
    group.sample_size(10);
    let enc = HashedNgramEncoder::new(256, 0);
    for n in [500, 2000] {
        let g = random_graph(n, 2 * n, 3);
        let (_, h) = gt_refine(&g, &GtConfig::default(), &enc).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| b.iter(|| project(h, &ManifoldConfig::default()).unwrap()));
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian_spectrum_k10");
    group.sample_size(10);
    for n in [200, 1000, 5000] {
        let g = random_graph(n, n, 4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| b.iter(|| laplacian_spectrum(g, 10).unwrap()));
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    let cfg = small_config(2, 100);
    group.bench_function("synthetic_depth2_100_topics", |b| {
        b.iter(|| run_pipeline(&cfg, &Oracle::new(cfg.oracle.clone()).unwrap(), Output::Discard).unwrap())
    });
    group.finish();
}

criterion_group!(benches, extraction, triangles, refinement, layout, spectrum, pipeline);
criterion_main!(benches);
