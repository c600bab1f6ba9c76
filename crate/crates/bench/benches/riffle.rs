use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riffle_core::learning::{em_fit_params, EmConfig, RankingDataset};
use riffle_core::rng::seeded;
use riffle_core::{pr_condition, Hierarchy, ItemSet, PartialRanking, RiffleModel};

fn chain_model(n: usize) -> RiffleModel {
    let items = Arc::new(ItemSet::numbered(n).unwrap());
    let h = Arc::new(Hierarchy::chain_n(n).unwrap());
    RiffleModel::random(items, h, &mut seeded(n as u64), 1.0).unwrap()
}

fn top_k_observations(model: &RiffleModel, count: usize, seed: u64) -> Vec<PartialRanking> {
    let mut rng = seeded(seed);
    let n = model.n_items();
    (0..count).map(|k| PartialRanking::top_k(&model.sample(&mut rng), 1 + k % (n - 1))).collect()
}

fn conditioning(c: &mut Criterion) {
    let mut group = c.benchmark_group("pr_condition");
    for n in [8, 12, 16] {
        let model = chain_model(n);
        let obs = top_k_observations(&model, 64, 1);
        group.bench_with_input(BenchmarkId::new("chain_top_k", n), &n, |b, _| {
            b.iter(|| {
                for o in &obs {
                    black_box(pr_condition(&model, o).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn em(c: &mut Criterion) {
    let mut group = c.benchmark_group("em");
    group.sample_size(10);
    let truth = chain_model(8);
    let h = truth.hierarchy_arc().clone();
    for records in [500, 2000] {
        let mut data = RankingDataset::empty(truth.items_arc().clone());
        for o in top_k_observations(&truth, records, 2) {
            data.push(o, 1).unwrap();
        }
        let cfg = EmConfig { max_iters: 10, ..EmConfig::default() };
        group.bench_with_input(BenchmarkId::new("chain8_top_k", records), &records, |b, _| {
            b.iter(|| black_box(em_fit_params(h.clone(), &data, &cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, conditioning, em);
criterion_main!(benches);
