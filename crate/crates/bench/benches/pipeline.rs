use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyperrole::embed::{contrastive_gradient, init_embeddings, positive_edges, train, TrainConfig};
use hyperrole::geometry::{distance, PoincareBall};
use hyperrole::hierfeat::hier_features;
use hyperrole::lar::{all_edge_lars, node_trust, refine, RefineConfig};
use hyperrole::walkfeat::{generate_walks, train_walk_embeddings, WalkConfig};
use hyperrole_bench::planted_graph;

fn geometry(c: &mut Criterion) {
    let ball = PoincareBall::default();
    let u: Vec<f64> = (0..64).map(|k| 0.01 * (k as f64).sin()).collect();
    let v: Vec<f64> = (0..64).map(|k| 0.01 * (k as f64).cos()).collect();
    c.bench_function("distance_d64", |b| b.iter(|| distance(black_box(&u), black_box(&v))));
    c.bench_function("mobius_add_d64", |b| b.iter(|| ball.mobius_add(black_box(&u), black_box(&v))));
}

fn embedding(c: &mut Criterion) {
    let graph = planted_graph(1, 0);
    let cfg = TrainConfig::default();
    let emb = init_embeddings(&graph, &cfg);
    let pos = positive_edges(&graph);
    let neg: Vec<usize> = pos.iter().map(|&(i, _)| (i * 7 + 3) % graph.node_count()).collect();
    c.bench_function("contrastive_gradient_planted", |b| {
        b.iter(|| contrastive_gradient(black_box(&emb), &pos, &neg, 1.0))
    });
    let short = TrainConfig {
        epochs: 10,
        ..Default::default()
    };
    c.bench_function("train_10_epochs_planted", |b| b.iter(|| train(&graph, &short).unwrap()));
}

fn refinement_and_features(c: &mut Criterion) {
    let mut group = c.benchmark_group("planted_scale");
    group.sample_size(10);
    for factor in [1usize, 4] {
        let graph = planted_graph(factor, 1);
        let emb = init_embeddings(&graph, &TrainConfig::default());
        let rcfg = RefineConfig::default();
        group.bench_with_input(BenchmarkId::new("lar_trust_refine", factor), &graph, |b, g| {
            b.iter(|| {
                let trust = node_trust(g, &all_edge_lars(g, &rcfg), &rcfg);
                refine(&emb, g, &trust, &rcfg).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("hier_features_k1", factor), &graph, |b, g| {
            b.iter(|| hier_features(&emb, g, 1).unwrap())
        });
        let wcfg = WalkConfig::default();
        group.bench_with_input(BenchmarkId::new("walks_and_skipgram", factor), &graph, |b, g| {
            b.iter(|| train_walk_embeddings(g, &generate_walks(g, &wcfg), &wcfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, geometry, embedding, refinement_and_features);
criterion_main!(benches);
