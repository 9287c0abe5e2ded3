use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sacg_core::autodiff::Tape;
use sacg_core::classifier::Example;
use sacg_core::eval::{bleu, ted};
use sacg_core::syntax::{generate_synthetic, SyntheticGrammar};
use sacg_core::{Classifier, ClassifierConfig, SacgConfig, SacgModel, Vocab};

fn matmul(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(0);
    let a = Array2::from_shape_simple_fn((64, 256), || rng.gen_range(-1.0..1.0));
    let b = Array2::from_shape_simple_fn((256, 256), || rng.gen_range(-1.0..1.0));
    c.bench_function("tape_matmul_backward_64x256x256", |bench| {
        bench.iter(|| {
            let mut t = Tape::new();
            let x = t.variable(a.clone());
            let w = t.variable(b.clone());
            let y = t.matmul(x, w).unwrap();
            let s = t.sum(y);
            t.backward(s).unwrap();
            black_box(t.grad(w).is_some())
        })
    });
}

fn models(c: &mut Criterion) {
    let g = SyntheticGrammar::default();
    let sents: Vec<_> = generate_synthetic(&g, 32, 1).unwrap().into_iter().map(|i| i.sentence).collect();
    let vocab = Vocab::build(sents.iter().map(|s| &s.tokens));
    let cfg = ClassifierConfig {
        embed_dim: 64,
        lstm_hidden: 32,
        gcn_dim: 64,
        ..Default::default()
    };
    let mut clf = Classifier::syntax(cfg, vocab.clone()).unwrap();
    clf.freeze();
    let exs: Vec<Example> = sents.iter().map(|s| clf.example(s, &g)).collect();
    c.bench_function("classifier_predict_32", |b| b.iter(|| black_box(clf.predict(&exs).unwrap())));

    let sc = SacgConfig {
        latent_dim: 64,
        style_code_dim: 16,
        embed_dim: 48,
        lstm_hidden: 32,
        decoder_hidden: 64,
        ..Default::default()
    };
    let model = SacgModel::new(sc, vocab).unwrap();
    let targets: Vec<usize> = exs.iter().map(|e| 1 - e.style).collect();
    c.bench_function("sacg_transfer_32", |b| {
        b.iter(|| black_box(model.transfer_corpus(&exs, &targets).unwrap()))
    });
}

fn metrics(c: &mut Criterion) {
    let g = SyntheticGrammar::default();
    let items = generate_synthetic(&g, 200, 3).unwrap();
    let hyps: Vec<Vec<String>> = items.iter().map(|i| i.sentence.tokens.clone()).collect();
    let refs: Vec<Vec<Vec<String>>> = items.iter().map(|i| vec![i.reference.tokens.clone()]).collect();
    c.bench_function("bleu_200", |b| b.iter(|| black_box(bleu(&hyps, &refs).unwrap())));

    let a = items[0].sentence.ctree.clone().unwrap();
    let r = items[1].reference.ctree.clone().unwrap();
    c.bench_function("ted_grammar_trees", |b| b.iter(|| black_box(ted(&a, &r))));
}

criterion_group!(benches, matmul, models, metrics);
criterion_main!(benches);
