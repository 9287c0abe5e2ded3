//! Acceptance run. Prints one PASS/FAIL line per criterion, then the
//! supplementary checks, and exits non-zero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use sacg_core::autodiff::{cross_entropy, grad_check, gumbel_softmax, Noise, ParamStore, SparseRows, Tape, Tensor, Var};
use sacg_core::checkpoint::{checkpoint_sha256, parameter_hash};
use sacg_core::classifier::{syntax_probe, Example};
use sacg_core::eval::{bleu, cosine_similarity, gscore, ted, word_overlap, EvalReport, NGramLm, Pooling};
use sacg_core::experiment::{
    evaluate_run, fit_classifier, gen_data, read_split, train_classifier_run, train_sacg_run, EvaluateArgs,
};
use sacg_core::nn::{gcn_layer, Activation, Gcn, SeqBatch};
use sacg_core::syntax::{generate_synthetic, opposite, AdjacencyMatrix, Orientation, Sentence, SyntheticGrammar};
use sacg_core::{AblationKind, Classifier, ClassifierConfig, ExperimentConfig, SacgConfig, SacgModel, Vocab};

use common::{all_trees, brute_ted, gcn_per_node, random_tree};

const GSCORE_TOL: f64 = 0.02;

const GRAD_TRIALS: u64 = 20;
const GRAD_EPS: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(60);

const GCN_GRAPHS: usize = 100;
const GCN_MAX_NODES: usize = 8;
const GCN_TOL: f64 = 1e-10;

const TED_EXHAUSTIVE_NODES: usize = 5;
const TED_TRIPLES: usize = 100;
const TED_TRIPLE_NODES: usize = 8;
const TED_BUDGET: Duration = Duration::from_secs(120);

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const CORPUS_SIZE: usize = 2500;
const CLASSIFIER_MIN_ACC: f64 = 0.99;
const TRANSFER_MIN_ACC: f64 = 0.90;
const SELF_BLEU_MIN: f64 = 40.0;
const RUN_BUDGET: Duration = Duration::from_secs(15 * 60);
const END_TO_END_MIN_SEEDS: usize = 4;
const MAJORITY: usize = 3;

const METRIC_TOL: f64 = 1e-12;
const DECOMPOSITION_TOL: f64 = 1e-10;
const ROUND_TRIP_MIN: f64 = 0.70;

/// Desk-scale widths shared by every end-to-end run.
const RUN_CONFIG: &str = r#"
[classifier]
embed_dim = 38
lstm_hidden = 32
gcn_dim = 64

[sacg]
latent_dim = 64
decoder_hidden = 64
embed_dim = 38
lstm_hidden = 32
learning_rate = 0.003
epochs = 40
batch_size = 16
"#;

#[derive(Default)]
struct Ledger {
    failed: Vec<String>,
}

impl Ledger {
    fn line(&mut self, id: &str, pass: bool, detail: impl AsRef<str>) {
        println!("{} {id}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    fn soft(&self, id: &str, pass: bool, detail: impl AsRef<str>) {
        println!("{} {id} (soft): {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

// ---------------------------------------------------------------- 1

type Row = (&'static str, f64, f64, f64, f64, f64, f64);

const FORMALITY_ROWS: [Row; 16] = [
    ("ARAE", 76.2, 2.2, 0.903, 0.042, 35.0, 0.71),
    ("DeleteOnly", 18.7, 16.2, 0.945, 0.431, 74.0, 1.11),
    ("Template", 44.7, 19.0, 0.943, 0.509, 102.0, 1.32),
    ("Del&Retri", 50.7, 11.8, 0.934, 0.345, 74.0, 1.21),
    ("DualRL", 59.8, 18.8, 0.944, 0.447, 266.0, 1.12),
    ("DAST", 78.3, 14.3, 0.934, 0.350, 352.0, 1.01),
    ("DAST-C", 79.2, 13.8, 0.927, 0.328, 363.0, 0.98),
    ("DRLST", 49.8, 2.7, 0.909, 0.342, 31.0, 1.06),
    ("PFST", 48.3, 16.5, 0.940, 0.393, 116.0, 1.25),
    ("HPAY", 43.1, 10.4, 0.942, 0.418, 92.0, 1.17),
    ("DIRR", 71.8, 18.2, 0.942, 0.451, 145.0, 1.28),
    ("SACG", 84.1, 21.1, 0.962, 0.591, 73.0, 1.69),
    ("Human0", 84.6, 24.6, 0.942, 0.393, 24.0, 2.00),
    ("Human1", 83.8, 24.3, 0.931, 0.342, 27.0, 1.89),
    ("Human2", 83.6, 24.6, 0.932, 0.354, 27.0, 1.91),
    ("Human3", 82.1, 24.7, 0.931, 0.354, 27.0, 1.90),
];

const SENTIMENT_ROWS: [Row; 12] = [
    ("ARAE", 83.2, 18.0, 0.874, 0.270, 79.0, 1.35),
    ("DeleteOnly", 84.2, 28.7, 0.893, 0.501, 130.0, 1.53),
    ("Template", 78.2, 48.1, 0.850, 0.603, 250.0, 1.50),
    ("Del&Retri", 88.1, 30.0, 0.897, 0.464, 88.0, 1.66),
    ("DualRL", 79.0, 58.3, 0.970, 0.801, 117.0, 1.98),
    ("DAST", 90.7, 49.7, 0.961, 0.705, 181.0, 1.76),
    ("DAST-C", 93.6, 41.2, 0.933, 0.560, 274.0, 1.49),
    ("DRLST", 91.2, 7.6, 0.904, 0.484, 65.0, 1.36),
    ("PFST", 85.3, 41.7, 0.902, 0.527, 94.0, 1.78),
    ("HPAY", 86.5, 31.2, 0.886, 0.450, 85.0, 1.66),
    ("DIRR", 94.2, 52.6, 0.957, 0.715, 292.0, 1.63),
    ("SACG", 93.0, 57.7, 0.971, 0.778, 74.0, 2.23),
];

fn criterion_gscore(ledger: &mut Ledger) {
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for (task, rows) in [("formality", &FORMALITY_ROWS[..]), ("sentiment", &SENTIMENT_ROWS[..])] {
        for &(name, acc, b, cs, wo, ppl, published) in rows {
            let g = gscore(acc, b, cs, wo, ppl).expect("published factors are positive");
            let d = (g - published).abs();
            worst = worst.max(d);
            if d > GSCORE_TOL {
                misses.push(format!("{task}/{name} {g:.3} vs {published:.2}"));
            }
        }
    }
    let spot = [
        gscore(84.1, 21.1, 0.962, 0.591, 73.0).unwrap(),
        gscore(93.0, 57.7, 0.971, 0.778, 74.0).unwrap(),
        gscore(76.2, 2.2, 0.903, 0.042, 35.0).unwrap(),
        gscore(79.0, 58.3, 0.970, 0.801, 117.0).unwrap(),
    ];
    let spot_ok = spot.iter().zip([1.69, 2.23, 0.71, 1.98]).all(|(g, want)| (g - want).abs() <= GSCORE_TOL);
    let total = FORMALITY_ROWS.len() + SENTIMENT_ROWS.len();
    ledger.line(
        "1 G-Score reproduction",
        misses.is_empty() && spot_ok,
        format!(
            "{}/{total} rows within ±{GSCORE_TOL}, worst |Δ| = {worst:.3}; spot checks {:.2} {:.2} {:.2} {:.2}{}",
            total - misses.len(),
            spot[0],
            spot[1],
            spot[2],
            spot[3],
            if misses.is_empty() { String::new() } else { format!("; off: {}", misses.join(", ")) }
        ),
    );
}

// ---------------------------------------------------------------- 2

type Shapes = Vec<(usize, usize)>;
type ShapeFn = fn(&mut StdRng) -> Shapes;
type OpFn = fn(&mut Tape, &[Var], &mut StdRng) -> sacg_core::Result<Var>;

fn dims(rng: &mut StdRng) -> (usize, usize) {
    (rng.gen_range(1..=4), rng.gen_range(1..=4))
}

fn one(rng: &mut StdRng) -> Shapes {
    vec![dims(rng)]
}

fn same2(rng: &mut StdRng) -> Shapes {
    let d = dims(rng);
    vec![d, d]
}

fn random_labels(t: &Tape, x: Var, rng: &mut StdRng) -> Vec<usize> {
    let [r, c] = t.shape(x);
    (0..r).map(|_| rng.gen_range(0..c)).collect()
}

fn ops() -> Vec<(&'static str, ShapeFn, OpFn)> {
    vec![
        (
            "matmul",
            |rng| {
                let (m, k) = dims(rng);
                vec![(m, k), (k, rng.gen_range(1..=4))]
            },
            |t, x, _| t.matmul(x[0], x[1]),
        ),
        ("transpose", one, |t, x, _| Ok(t.transpose(x[0]))),
        ("add", same2, |t, x, _| t.add(x[0], x[1])),
        ("sub", same2, |t, x, _| t.sub(x[0], x[1])),
        ("mul", same2, |t, x, _| t.mul(x[0], x[1])),
        (
            "add_row",
            |rng| {
                let (r, c) = dims(rng);
                vec![(r, c), (1, c)]
            },
            |t, x, _| t.add_row(x[0], x[1]),
        ),
        ("scale", one, |t, x, _| Ok(t.scale(x[0], -1.7))),
        ("sigmoid", one, |t, x, _| Ok(t.sigmoid(x[0]))),
        ("tanh", one, |t, x, _| Ok(t.tanh(x[0]))),
        ("relu", one, |t, x, _| Ok(t.relu(x[0]))),
        ("leaky_relu", one, |t, x, _| Ok(t.leaky_relu(x[0], 0.01))),
        (
            "concat_cols",
            |rng| {
                let r = rng.gen_range(1..=4);
                vec![(r, rng.gen_range(1..=3)), (r, rng.gen_range(1..=3))]
            },
            |t, x, _| t.concat_cols(x),
        ),
        (
            "stack_rows",
            |rng| {
                let c = rng.gen_range(1..=4);
                vec![(rng.gen_range(1..=3), c), (rng.gen_range(1..=3), c)]
            },
            |t, x, _| t.stack_rows(x),
        ),
        (
            "slice_cols",
            |rng| vec![(rng.gen_range(1..=4), rng.gen_range(2..=5))],
            |t, x, rng| {
                let c = t.shape(x[0])[1];
                let s = rng.gen_range(0..c - 1);
                t.slice_cols(x[0], s, rng.gen_range(s + 1..=c))
            },
        ),
        (
            "slice_rows",
            |rng| vec![(rng.gen_range(2..=5), rng.gen_range(1..=4))],
            |t, x, rng| {
                let r = t.shape(x[0])[0];
                let s = rng.gen_range(0..r - 1);
                t.slice_rows(x[0], s, rng.gen_range(s + 1..=r))
            },
        ),
        ("gather_rows", one, |t, x, rng| {
            let v = t.shape(x[0])[0];
            let ids: Vec<usize> = (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(0..v)).collect();
            t.gather_rows(x[0], &ids)
        }),
        ("sparse_mix", one, |t, x, rng| {
            let n = t.shape(x[0])[0];
            let rows = (0..rng.gen_range(1..=5))
                .map(|_| {
                    (0..rng.gen_range(0..=3))
                        .map(|_| (rng.gen_range(0..n), rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect();
            t.sparse_mix(x[0], Arc::new(SparseRows { cols: n, rows }))
        }),
        ("max_over_rows", one, |t, x, _| Ok(t.max_over_rows(x[0]))),
        ("mean_rows", one, |t, x, _| Ok(t.mean_rows(x[0]))),
        ("sum", one, |t, x, _| Ok(t.sum(x[0]))),
        ("softmax", one, |t, x, _| t.softmax(x[0])),
        ("cross_entropy", one, |t, x, rng| {
            let labels = random_labels(t, x[0], rng);
            let p = t.softmax(x[0])?;
            cross_entropy(t, p, &labels)
        }),
        ("nll", one, |t, x, rng| {
            let labels = random_labels(t, x[0], rng);
            let w: Vec<f64> = labels.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            let p = t.softmax(x[0])?;
            t.nll(p, &labels, &w)
        }),
        ("gumbel_softmax", one, |t, x, rng| {
            let tau = rng.gen_range(0.3..2.0);
            gumbel_softmax(t, x[0], tau, &mut Noise::Gumbel(rng))
        }),
    ]
}

/// Relative error of `Σ f(x) ⊙ R` for one random draw.
fn op_trial(shapes: ShapeFn, f: OpFn, trial: u64, eps: f64) -> f64 {
    let mut rng = StdRng::seed_from_u64(5000 + trial);
    let shapes = shapes(&mut rng);
    let mut store = ParamStore::new();
    let ids: Vec<_> = shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| store.add(format!("x{i}"), Tensor::uniform(r, c, 1.0, &mut rng)))
        .collect();
    let op_seed: u64 = rng.gen();
    let mut probe = Tape::new();
    let xs: Vec<Var> = ids.iter().map(|&id| probe.param(&store, id)).collect();
    let out = f(&mut probe, &xs, &mut StdRng::seed_from_u64(op_seed)).unwrap();
    let [r, c] = probe.shape(out);
    let proj = Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0));
    grad_check(
        |tape, store| {
            let xs: Vec<Var> = ids.iter().map(|&id| tape.param(store, id)).collect();
            let out = f(tape, &xs, &mut StdRng::seed_from_u64(op_seed))?;
            let p = tape.constant(proj.clone());
            let m = tape.mul(out, p)?;
            Ok(tape.sum(m))
        },
        &mut store,
        eps,
    )
    .unwrap()
}

fn small_corpus(n: usize, seed: u64) -> (SyntheticGrammar, Vec<Sentence>, Vocab) {
    let g = SyntheticGrammar::default();
    let sents: Vec<Sentence> = generate_synthetic(&g, n, seed).unwrap().into_iter().map(|i| i.sentence).collect();
    let vocab = Vocab::build(g.vocabulary().iter().map(std::slice::from_ref));
    (g, sents, vocab)
}

/// A few sentences with a vocabulary covering only their own words.
fn trial_corpus(n: usize, seed: u64) -> (SyntheticGrammar, Vec<Sentence>, Vocab) {
    let g = SyntheticGrammar::default();
    let sents: Vec<Sentence> = generate_synthetic(&g, n, seed).unwrap().into_iter().map(|i| i.sentence).collect();
    let vocab = Vocab::build(sents.iter().map(|s| &s.tokens));
    (g, sents, vocab)
}

fn tiny_classifier_config(seed: u64) -> ClassifierConfig {
    ClassifierConfig {
        embed_dim: 6,
        lstm_hidden: 4,
        gcn_dim: 8,
        seed,
        ..Default::default()
    }
}

fn tiny_sacg_config(seed: u64, lambda: f64) -> SacgConfig {
    SacgConfig {
        latent_dim: 6,
        style_code_dim: 2,
        embed_dim: 4,
        lstm_hidden: 4,
        decoder_hidden: 6,
        max_decode_len: 14,
        lambda,
        seed,
        ..Default::default()
    }
}

fn classifier_trial(syntax: bool, trial: u64, eps: f64) -> f64 {
    let (g, sents, vocab) = trial_corpus(2, 2100 + trial);
    let c = if syntax {
        Classifier::syntax(tiny_classifier_config(trial), vocab).unwrap()
    } else {
        let cfg = ClassifierConfig {
            embed_dim: 1,
            ..tiny_classifier_config(trial)
        };
        Classifier::textcnn(cfg, vocab).unwrap()
    };
    let exs: Vec<Example> = sents.iter().map(|s| c.example(s, &g)).collect();
    let refs: Vec<&Example> = exs.iter().collect();
    let labels: Vec<usize> = exs.iter().map(|e| e.style).collect();
    let mut store = c.store.clone();
    grad_check(
        |t, s| {
            let p = c.forward_ids_with(t, s, &refs)?;
            cross_entropy(t, p, &labels)
        },
        &mut store,
        eps,
    )
    .unwrap()
}

fn sacg_trial(trial: u64, eps: f64) -> f64 {
    let (g, sents, vocab) = trial_corpus(1, 2200 + trial);
    let mut clf = Classifier::syntax(tiny_classifier_config(trial), vocab.clone()).unwrap();
    clf.freeze();
    let m = SacgModel::new(tiny_sacg_config(trial, 0.7), vocab).unwrap();
    let ex = clf.example(&sents[0], &g);
    let refs = [&ex];
    let mut store = m.store.clone();
    grad_check(
        |t, s| {
            let mut rng = StdRng::seed_from_u64(trial);
            let (loss, _, _) = m.objective(t, s, &clf, &refs, 0.5, &mut Noise::Gumbel(&mut rng))?;
            Ok(loss)
        },
        &mut store,
        eps,
    )
    .unwrap()
}

/// Redraws allowed per check for draws that straddle a kink.
const MAX_REDRAWS: usize = 2;

struct GradTally {
    worst: f64,
    redrawn: usize,
}

/// Scores `GRAD_TRIALS` draws at ε. A draw that fails at ε but passes at
/// ε/10 has a ReLU or max switch inside its difference window; it is redrawn,
/// at most `MAX_REDRAWS` times. A wrong analytic gradient fails at both.
fn tally(check: impl Fn(u64, f64) -> f64) -> GradTally {
    let mut t = GradTally { worst: 0.0, redrawn: 0 };
    let (mut draw, mut scored) = (0u64, 0u64);
    while scored < GRAD_TRIALS {
        let err = check(draw, GRAD_EPS);
        if !(err < GRAD_TOL) && t.redrawn < MAX_REDRAWS && check(draw, GRAD_EPS / 10.0) < GRAD_TOL {
            t.redrawn += 1;
        } else {
            t.worst = t.worst.max(err);
            scored += 1;
        }
        draw += 1;
    }
    t
}

fn criterion_gradients(ledger: &mut Ledger) {
    let start = Instant::now();
    let ops_start = Instant::now();
    let mut checks: Vec<(&str, GradTally)> = ops()
        .into_iter()
        .map(|(name, s, f)| (name, tally(|k, eps| op_trial(s, f, k, eps))))
        .collect();
    eprintln!("  tape ops: {:.1}s", ops_start.elapsed().as_secs_f64());
    let timed = |name: &'static str, check: &dyn Fn(u64, f64) -> f64| {
        let t = Instant::now();
        let tally = tally(check);
        eprintln!("  {name}: {:.1}s", t.elapsed().as_secs_f64());
        (name, tally)
    };
    checks.push(timed("syntax classifier", &|k, eps| classifier_trial(true, k, eps)));
    checks.push(timed("textcnn classifier", &|k, eps| classifier_trial(false, k, eps)));
    checks.push(timed("sacg objective", &sacg_trial));
    let elapsed = start.elapsed();
    let mut worst = ("", 0.0f64);
    let mut bad = Vec::new();
    let mut redrawn = Vec::new();
    for (name, t) in &checks {
        if t.worst > worst.1 {
            worst = (name, t.worst);
        }
        if !(t.worst < GRAD_TOL) {
            bad.push(format!("{name} {:.1e}", t.worst));
        }
        if t.redrawn > 0 {
            redrawn.push(format!("{name} ×{}", t.redrawn));
        }
    }
    ledger.line(
        "2 gradient correctness",
        bad.is_empty() && elapsed < GRAD_BUDGET,
        format!(
            "{} checks × {GRAD_TRIALS} trials, ε = {GRAD_EPS:e}, worst {:.1e} ({}) < {GRAD_TOL:e}, {:.1}s < {}s; \
             kink redraws: {}{}",
            checks.len(),
            worst.1,
            worst.0,
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs(),
            if redrawn.is_empty() { "none".to_string() } else { redrawn.join(", ") },
            if bad.is_empty() { String::new() } else { format!("; over: {}", bad.join(", ")) }
        ),
    );
}

// ---------------------------------------------------------------- 3

fn random_heads(n: usize, rng: &mut StdRng) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![None; n];
    for k in 1..n {
        heads[order[k]] = Some(order[rng.gen_range(0..k)]);
    }
    heads
}

fn criterion_gcn(ledger: &mut Ledger) {
    let mut rng = StdRng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for trial in 0..GCN_GRAPHS {
        let n = rng.gen_range(1..=GCN_MAX_NODES);
        let orientation = if trial % 2 == 0 { Orientation::DependentRow } else { Orientation::HeadRow };
        let adj = AdjacencyMatrix::from_heads(&random_heads(n, &mut rng), orientation).unwrap();
        let (d_in, d_out) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let h = Array2::from_shape_simple_fn((n, d_in), || rng.gen_range(-1.0..1.0));
        let mut store = ParamStore::new();
        let gcn = Gcn::new(&mut store, "g", d_in, d_out, 1, Activation::Relu, &mut rng);
        let (wid, bid) = (gcn.layers[0].w, gcn.layers[0].b);
        let w = store.get(wid).value().clone();
        let b: Vec<f64> = store.get(bid).data().to_vec();
        let want = gcn_per_node(&h, &adj.to_dense(), &w, &b, |x| x.max(0.0));
        let mut t = Tape::new();
        let hv = t.constant(h);
        let wv = t.param(&store, wid);
        let bv = t.param(&store, bid);
        let dense = gcn_layer(&mut t, hv, &adj, wv, bv, Activation::Relu).unwrap();
        let sparse = gcn.forward(&mut t, &store, hv, &SeqBatch::new(vec![n]), std::slice::from_ref(&adj)).unwrap();
        for out in [dense, sparse] {
            let d = (t.value(out) - &want).mapv(f64::abs).fold(0.0f64, |m, &x| m.max(x));
            worst = worst.max(d);
        }
    }
    ledger.line(
        "3 GCN per-node vs matrix form",
        worst < GCN_TOL,
        format!("{GCN_GRAPHS} graphs with n ≤ {GCN_MAX_NODES}, max |Δ| = {worst:.1e} < {GCN_TOL:e}"),
    );
}

// ---------------------------------------------------------------- 4

fn criterion_ted(ledger: &mut Ledger) {
    let start = Instant::now();
    let trees = all_trees(TED_EXHAUSTIVE_NODES, &["a", "b"]);
    let mut mismatches = 0usize;
    for x in &trees {
        for y in &trees {
            if ted(x, y) != brute_ted(x, y) {
                mismatches += 1;
            }
        }
    }
    let pairs = trees.len() * trees.len();
    let mut rng = StdRng::seed_from_u64(404);
    let mut violations = 0usize;
    for _ in 0..TED_TRIPLES {
        let [x, y, z] = [0; 3].map(|_| random_tree(&mut rng, TED_TRIPLE_NODES, &["a", "b", "c"]));
        let (xy, yz, xz) = (ted(&x, &y), ted(&y, &z), ted(&x, &z));
        let ok = ted(&x, &x) == 0
            && (xy == 0) == (x == y)
            && xy == ted(&y, &x)
            && xz <= xy + yz
            && xy <= xz + yz
            && yz <= xy + xz;
        violations += usize::from(!ok);
    }
    let elapsed = start.elapsed();
    ledger.line(
        "4 TED oracle and metric axioms",
        mismatches == 0 && violations == 0 && elapsed < TED_BUDGET,
        format!(
            "{mismatches} mismatches over {pairs} pairs (≤ {TED_EXHAUSTIVE_NODES} nodes, 2 labels), \
             {violations} axiom violations over {TED_TRIPLES} triples (≤ {TED_TRIPLE_NODES} nodes), {:.1}s < {}s",
            elapsed.as_secs_f64(),
            TED_BUDGET.as_secs()
        ),
    );
}

// ---------------------------------------------------------------- 5, 6, 7

struct SeedResult {
    seed: u64,
    classifier_acc: f64,
    classifier_early_loss_ok: bool,
    reports: HashMap<AblationKind, EvalReport>,
    full_elapsed: Duration,
    delta_syntax: f64,
    delta_textcnn: f64,
    round_trip: f64,
    classifier_unchanged: bool,
}

fn toml_path(p: &Path) -> String {
    format!("{:?}", p.display().to_string())
}

/// Mean fraction of source tokens recovered after transferring to the
/// opposite style and back, counted as a multiset intersection.
fn round_trip_recovery(model: &SacgModel, test: &[Sentence], grammar: &SyntheticGrammar) -> f64 {
    let orientation = model.config.adjacency_orientation;
    let ex: Vec<Example> = test.iter().map(|s| Example::from_sentence(&model.vocab, s, grammar, orientation)).collect();
    let targets: Vec<_> = test.iter().map(|s| opposite(s.style)).collect();
    let forward = model.transfer_corpus(&ex, &targets).unwrap();
    let mid: Vec<Example> = forward
        .iter()
        .zip(&targets)
        .map(|(o, &t)| Example::from_sentence(&model.vocab, &Sentence::new(o.clone(), t).unwrap(), grammar, orientation))
        .collect();
    let back_targets: Vec<_> = test.iter().map(|s| s.style).collect();
    let back = model.transfer_corpus(&mid, &back_targets).unwrap();
    let mut total = 0.0;
    for (src, out) in test.iter().zip(&back) {
        let mut pool: HashMap<&str, usize> = HashMap::new();
        for w in out {
            *pool.entry(w.as_str()).or_default() += 1;
        }
        let mut hit = 0usize;
        for w in &src.tokens {
            if let Some(c) = pool.get_mut(w.as_str()).filter(|c| **c > 0) {
                *c -= 1;
                hit += 1;
            }
        }
        total += hit as f64 / src.tokens.len() as f64;
    }
    total / test.len() as f64
}

fn run_seed(seed: u64) -> SeedResult {
    let dir = tempfile::tempdir().unwrap();
    let files = gen_data(&dir.path().join("data"), CORPUS_SIZE, seed).unwrap();
    let base = format!(
        "seed = {seed}\nout_dir = {}\n\n[data]\ntrain = {}\ndev = {}\n{RUN_CONFIG}",
        toml_path(&dir.path().join("clf")),
        toml_path(&files.train),
        toml_path(&files.dev),
    );
    let cfg = ExperimentConfig::from_toml(&base).unwrap();
    let grammar = SyntheticGrammar::default();

    let start = Instant::now();
    let clf_run = train_classifier_run(&cfg).unwrap();
    let clf_path = clf_run.checkpoint.clone();
    let sha_before = checkpoint_sha256(&clf_path).unwrap();
    let params_before = parameter_hash(&clf_run.classifier.store);

    let mut reports = HashMap::new();
    let mut full_elapsed = Duration::ZERO;
    let mut round_trip = 0.0;
    let test = read_split(&files.test, cfg.data.max_len).unwrap();
    for kind in AblationKind::ALL {
        let mut run_cfg = cfg.clone();
        run_cfg.out_dir = dir.path().join(kind.as_str());
        let run = train_sacg_run(&run_cfg, &clf_path, Some(kind)).unwrap();
        let eval_dir = run_cfg.out_dir.join("eval");
        let report = evaluate_run(&EvaluateArgs {
            model: &run.checkpoint,
            classifier: &clf_path,
            test: &files.test,
            refs: None,
            trees: None,
            out_dir: &eval_dir,
            lm_train: None,
            eval: &cfg.eval,
        })
        .unwrap();
        if kind == AblationKind::Full {
            full_elapsed = start.elapsed();
            round_trip = round_trip_recovery(&run.model, &test, &grammar);
        }
        eprintln!(
            "  seed {seed} {kind}: acc {:.1} self-BLEU {:.2} PPL {:.2} G {:?} ({:.0}s)",
            report.acc_percent,
            report.self_bleu.unwrap_or(f64::NAN),
            report.ppl,
            report.g_score,
            start.elapsed().as_secs_f64()
        );
        reports.insert(kind, report);
    }
    let reloaded = Classifier::load(&clf_path).unwrap();
    let classifier_unchanged =
        checkpoint_sha256(&clf_path).unwrap() == sha_before && parameter_hash(&reloaded.store) == params_before;

    let train = read_split(&files.train, cfg.data.max_len).unwrap();
    let dev = read_split(&files.dev, cfg.data.max_len).unwrap();
    let vocab = clf_run.classifier.vocab.clone();
    let (cnn, _) = fit_classifier(&cfg.classifier, false, vocab.clone(), &train, &dev).unwrap();
    let delta_syntax = syntax_probe(&clf_run.classifier, &test, &grammar, seed).unwrap().delta;
    let delta_textcnn = syntax_probe(&cnn, &test, &grammar, seed).unwrap().delta;

    let early = ClassifierConfig {
        epochs: 3,
        stop_on_perfect: false,
        patience: 3,
        ..cfg.classifier.clone()
    };
    let (_, early_log) = fit_classifier(&early, true, vocab, &train, &dev).unwrap();
    let losses: Vec<f64> = early_log.epochs.iter().map(|e| e.loss).collect();
    let classifier_early_loss_ok =
        losses.len() == 3 && losses.iter().all(|l| l.is_finite()) && losses.windows(2).all(|w| w[1] <= w[0]);

    SeedResult {
        seed,
        classifier_acc: clf_run.log.best_val_accuracy,
        classifier_early_loss_ok,
        reports,
        full_elapsed,
        delta_syntax,
        delta_textcnn,
        round_trip,
        classifier_unchanged,
    }
}

fn g(r: &EvalReport) -> f64 {
    r.g_score.unwrap_or(0.0)
}

fn criteria_runs(ledger: &mut Ledger, results: &[SeedResult]) {
    let mut e2e = 0;
    let mut rows = Vec::new();
    for r in results {
        let full = &r.reports[&AblationKind::Full];
        let acc = full.acc_percent / 100.0;
        let sb = full.self_bleu.unwrap_or(0.0);
        let ok = r.classifier_acc >= CLASSIFIER_MIN_ACC
            && acc >= TRANSFER_MIN_ACC
            && sb >= SELF_BLEU_MIN
            && r.full_elapsed < RUN_BUDGET;
        e2e += usize::from(ok);
        rows.push(format!(
            "s{}[clf {:.3} acc {:.3} sBLEU {:.1} {:.0}s]",
            r.seed,
            r.classifier_acc,
            acc,
            sb,
            r.full_elapsed.as_secs_f64()
        ));
    }
    ledger.line(
        "5 end-to-end run",
        e2e >= END_TO_END_MIN_SEEDS,
        format!(
            "{e2e}/{} seeds meet clf ≥ {CLASSIFIER_MIN_ACC}, acc ≥ {TRANSFER_MIN_ACC}, self-BLEU ≥ {SELF_BLEU_MIN}, \
             < {}s (need {END_TO_END_MIN_SEEDS}): {}",
            results.len(),
            RUN_BUDGET.as_secs(),
            rows.join(" ")
        ),
    );

    let (mut order, mut fluency) = (0, 0);
    let mut rows = Vec::new();
    for r in results {
        let [f, e, b] = AblationKind::ALL.map(|k| &r.reports[&k]);
        order += usize::from(g(f) >= g(e) && g(e) >= g(b));
        fluency += usize::from(b.ppl > f.ppl);
        rows.push(format!(
            "s{}[G {:.3}/{:.3}/{:.3} PPL {:.2}/{:.2}]",
            r.seed,
            g(f),
            g(e),
            g(b),
            f.ppl,
            b.ppl
        ));
    }
    ledger.line(
        "6 ablation trend",
        order >= MAJORITY && fluency >= MAJORITY,
        format!(
            "G-Score full ≥ no_syntax_encoder ≥ no_syntax_both in {order}/{n}, PPL no_syntax_both > full in {fluency}/{n} \
             (need {MAJORITY}): {}",
            rows.join(" "),
            n = results.len()
        ),
    );

    let probe = results.iter().filter(|r| r.delta_syntax > r.delta_textcnn).count();
    let rows: Vec<String> = results
        .iter()
        .map(|r| format!("s{}[{:.3} vs {:.3}]", r.seed, r.delta_syntax, r.delta_textcnn))
        .collect();
    ledger.line(
        "7 word-order probe",
        probe >= MAJORITY,
        format!(
            "delta_syntax > delta_textcnn in {probe}/{} (need {MAJORITY}): {}",
            results.len(),
            rows.join(" ")
        ),
    );
}

// ---------------------------------------------------------------- 8

fn loss_decomposition_gap() -> f64 {
    let (g, sents, vocab) = small_corpus(16, 81);
    let mut clf = Classifier::syntax(tiny_classifier_config(0), vocab.clone()).unwrap();
    clf.freeze();
    let exs: Vec<Example> = sents.iter().map(|s| clf.example(s, &g)).collect();
    let refs: Vec<&Example> = exs.iter().collect();
    let mut worst: f64 = 0.0;
    for (i, lambda) in [0.0, 0.5, 1.0, 3.0].into_iter().enumerate() {
        let m = SacgModel::new(tiny_sacg_config(i as u64, lambda), vocab.clone()).unwrap();
        let mut rng = StdRng::seed_from_u64(i as u64);
        let mut t = Tape::new();
        let (l, r, c) = m.objective(&mut t, &m.store, &clf, &refs, 0.5, &mut Noise::Gumbel(&mut rng)).unwrap();
        worst = worst.max((t.scalar(l) - (t.scalar(r) + lambda * t.scalar(c))).abs());
    }
    worst
}

fn criterion_metrics(ledger: &mut Ledger, results: &[SeedResult]) {
    let hyps = vec![toks("the cat sat on the mat ."), toks("a dog barked")];
    let refs: Vec<Vec<Vec<String>>> = hyps.iter().map(|h| vec![h.clone()]).collect();
    let b = bleu(&hyps, &refs).unwrap();

    let none = Default::default();
    let wo = [
        word_overlap(&toks("a b c"), &toks("c b a"), &none),
        word_overlap(&toks("a b"), &toks("c d"), &none),
        word_overlap(&toks("a b c"), &toks("b c d"), &none),
    ];
    let wo_ok = wo.iter().zip([1.0, 0.0, 0.5]).all(|(x, y)| (x - y).abs() <= METRIC_TOL);

    let table = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
    let cs = cosine_similarity(&[0], &[2], &table, Pooling::Mean).unwrap();
    let cs_ok = (cs - 0.5f64.sqrt()).abs() <= METRIC_TOL;

    let v = 37;
    let ppl = NGramLm::uniform(v).unwrap().perplexity(&toks("w1 w2 w3 w4 w5")).unwrap();
    let ppl_ok = (ppl - v as f64).abs() <= 1e-9;

    let gap = loss_decomposition_gap();
    let unchanged = results.iter().all(|r| r.classifier_unchanged);

    ledger.line(
        "8 metric unit suite",
        (b - 100.0).abs() <= METRIC_TOL && wo_ok && cs_ok && ppl_ok && gap <= DECOMPOSITION_TOL && unchanged,
        format!(
            "BLEU identity {b}, WO {:?}, CS {cs:.6} (1/√2), uniform PPL {ppl:.6} (V = {v}), \
             |L − (L_rec + λ·L_cla)| = {gap:.1e} ≤ {DECOMPOSITION_TOL:e}, classifier hash unchanged in {}/{} seeds",
            wo,
            results.iter().filter(|r| r.classifier_unchanged).count(),
            results.len()
        ),
    );
}

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| only.is_empty() || only.contains(&n);
    let mut ledger = Ledger::default();
    if wanted(1) {
        criterion_gscore(&mut ledger);
    }
    if wanted(2) {
        criterion_gradients(&mut ledger);
    }
    if wanted(3) {
        criterion_gcn(&mut ledger);
    }
    if wanted(4) {
        criterion_ted(&mut ledger);
    }

    if (5..=8).any(wanted) {
        let results: Vec<SeedResult> = SEEDS
            .iter()
            .map(|&seed| {
                eprintln!("seed {seed}");
                run_seed(seed)
            })
            .collect();
        criteria_runs(&mut ledger, &results);
        criterion_metrics(&mut ledger, &results);

        let early = results.iter().filter(|r| r.classifier_early_loss_ok).count();
        ledger.soft(
            "classifier early loss",
            early >= END_TO_END_MIN_SEEDS,
            format!("finite and non-increasing over 3 epochs in {early}/{} seeds", results.len()),
        );
        let trips: Vec<f64> = results.iter().map(|r| r.round_trip).collect();
        let good = trips.iter().filter(|&&x| x >= ROUND_TRIP_MIN).count();
        ledger.soft(
            "transfer round trip",
            good >= MAJORITY,
            format!("token recovery ≥ {ROUND_TRIP_MIN} in {good}/{} seeds: {trips:.3?}", results.len()),
        );
    }

    if ledger.failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing {}", ledger.failed.join("; "));
        ExitCode::FAILURE
    }
}

