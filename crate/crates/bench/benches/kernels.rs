use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tbpr::synthetic::{planted_preferences, PlantedConfig};
use tbpr::{
    auc, compose_item_features, select_test_pairs, sgd_step, split, synth_embeddings, Dataset, Dims,
    DocScope, EvalSetting, ModelKind, SettingKind, StopWords, TrainConfig,
};
use tbpr_bench::{random_model, random_triples};

fn sgd_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sgd_step");
    for kind in [ModelKind::Mf, ModelKind::Diff, ModelKind::Shared] {
        for items in [1_000, 10_000] {
            let (mut params, features) = random_model(kind, 200, items, Dims::default(), 1);
            let triples = random_triples(200, items, 4096, 2);
            let cfg = TrainConfig::for_kind(kind);
            let mut next = 0;
            group.bench_function(BenchmarkId::new(kind.id(), items), |b| {
                b.iter(|| {
                    let t = triples[next % triples.len()];
                    next += 1;
                    black_box(sgd_step(&mut params, &features, t, &cfg).unwrap())
                })
            });
        }
    }
    group.finish();
}

fn exact_auc(c: &mut Criterion) {
    let planted = planted_preferences(&PlantedConfig::default());
    let d = &planted.dataset;
    let s = split(d, 0).unwrap();
    let dims = Dims::new(15, 15, 16);
    let (params, features) = random_model(ModelKind::Mf, d.user_count(), d.item_count(), dims, 3);
    let scorer = params.scorer(&features).unwrap();
    let pairs = select_test_pairs(&s, d, &EvalSetting::new(SettingKind::All));
    c.bench_function("auc/all_users", |b| b.iter(|| black_box(auc(&scorer, d, &pairs).unwrap())));
}

fn review_corpus(users: usize, items: usize, words_per_review: usize) -> Dataset {
    let mut positives = vec![Vec::new(); users];
    let mut docs = BTreeMap::new();
    for (u, set) in positives.iter_mut().enumerate() {
        for k in 0..6 {
            let i = (u * 7 + k * 13) % items;
            if set.contains(&i) {
                continue;
            }
            set.push(i);
            let text: Vec<String> = (0..words_per_review).map(|w| format!("w{}", (u + i + w) % 500)).collect();
            docs.insert((u, i), text.join(" the "));
        }
    }
    Dataset::from_parts(
        (0..users).map(|u| format!("u{u}")).collect(),
        (0..items).map(|i| format!("i{i}")).collect(),
        positives,
        docs,
    )
    .unwrap()
}

fn features(c: &mut Criterion) {
    let d = review_corpus(400, 200, 50);
    let s = split(&d, 0).unwrap();
    let vocab: Vec<String> = (0..500).map(|w| format!("w{w}")).collect();
    let table = synth_embeddings(vocab.iter().map(String::as_str), 200, 0);
    let stopwords = StopWords::english();
    c.bench_function("compose_item_features/400x200", |b| {
        b.iter(|| black_box(compose_item_features(&d, &s, &table, &stopwords, DocScope::AllReviews)))
    });
}

criterion_group!(benches, sgd_steps, exact_auc, features);
criterion_main!(benches);
