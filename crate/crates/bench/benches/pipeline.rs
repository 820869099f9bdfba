use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use mmcode::dataset::{extract_corpus, extract_record};
use mmcode::frontend::{lex, parse};
use mmcode::modalities::{binarize, build_cfg, simplify_cfg};
use mmcode::retrieval::{build_index, search};
use mmcode::synthetic::{random_function, templated_corpus};
use mmcode::training::{batch_gradients, sample_triples};
use mmcode::{Model, ModelConfig, Vocabularies};

fn small_config() -> ModelConfig {
    let mut config = ModelConfig::default();
    config.hyper.ggnn_rounds = 3;
    config.hyper.embed_dim = 32;
    config
}

fn frontend(c: &mut Criterion) {
    let sources: Vec<String> = (0..32).map(random_function).collect();
    let mut g = c.benchmark_group("frontend");
    g.bench_function("lex_32", |b| {
        b.iter(|| {
            sources
                .iter()
                .map(|s| lex(black_box(s)).tokens.len())
                .sum::<usize>()
        })
    });
    g.bench_function("parse_32", |b| {
        b.iter(|| {
            sources
                .iter()
                .map(|s| parse(black_box(s)).unwrap().len())
                .sum::<usize>()
        })
    });
    let asts: Vec<_> = sources.iter().map(|s| parse(s).unwrap()).collect();
    g.bench_function("binarize_32", |b| {
        b.iter(|| {
            asts.iter()
                .map(|a| binarize(black_box(a)).len())
                .sum::<usize>()
        })
    });
    g.bench_function("cfg_32", |b| {
        b.iter(|| {
            asts.iter()
                .map(|a| {
                    simplify_cfg(&build_cfg(black_box(a)).unwrap())
                        .unwrap()
                        .len()
                })
                .sum::<usize>()
        })
    });
    let corpus = templated_corpus();
    g.bench_function("extract_record", |b| {
        b.iter(|| extract_record(black_box(&corpus[9])).unwrap())
    });
    g.finish();
}

fn model(c: &mut Criterion) {
    let records = extract_corpus(&templated_corpus()).records;
    let config = small_config();
    let vocabs = Vocabularies::build(&records, &config);
    let model: Model<f32> = Model::init(config, vocabs, 42);
    let mut g = c.benchmark_group("model");
    g.bench_function("code_vector", |b| {
        b.iter(|| model.code_vector(black_box(&records[3])).unwrap())
    });
    g.bench_function("description_vector", |b| {
        b.iter(|| {
            model
                .description_vector(black_box(&records[3].description_tokens))
                .unwrap()
        })
    });
    let triples = sample_triples(records.len(), 42, 0).unwrap();
    g.sample_size(20);
    g.bench_function("batch_gradients_32", |b| {
        b.iter(|| batch_gradients(&model, &records, black_box(&triples[..32]), None).unwrap())
    });
    g.finish();
}

fn retrieval(c: &mut Criterion) {
    let records = extract_corpus(&templated_corpus()).records;
    let config = small_config();
    let vocabs = Vocabularies::build(&records, &config);
    let model: Model<f32> = Model::init(config, vocabs, 42);
    let mut g = c.benchmark_group("retrieval");
    g.sample_size(20);
    g.bench_function("build_index_64", |b| {
        b.iter(|| build_index(&model, black_box(&records)).unwrap())
    });
    let (index, _) = build_index(&model, &records).unwrap();
    g.bench_function("search_top10", |b| {
        b.iter_batched(
            || "find the largest value among the prices".to_string(),
            |q| search(&q, &index, &model, 10).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, frontend, model, retrieval);
criterion_main!(benches);
