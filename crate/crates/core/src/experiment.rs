//! End-to-end runs behind the command-line front end: data generation,
//! classifier pretraining, generator training, transfer, evaluation and the
//! word-order probe. Every artifact is written atomically; wall-clock
//! timings live only in the run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::checkpoint::checkpoint_sha256;
use crate::classifier::{pretrain, syntax_probe, Classifier, ClassifierConfig, Example, ProbeReport, TrainingLog};
use crate::config::{EvalConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus, EvalContext, EvalReport, NGramLm};
use crate::io::{write_atomic, write_json, write_jsonl};
use crate::sacg::{train_sacg, AblationKind, SacgLog, SacgModel};
use crate::syntax::corpus::{
    corpus_to_jsonl, parse_references, read_corpus, read_text, references_to_jsonl, trees_to_lines,
};
use crate::syntax::{generate_synthetic, parse_ptb_lines, ConstituencyTree, Sentence, Style, SyntheticGrammar};
use crate::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: BTreeMap<String, PathBuf>,
    pub timings_secs: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config,
            files: BTreeMap::new(),
            timings_secs: BTreeMap::new(),
        }
    }

    fn write(&self, dir: &Path) -> Result<PathBuf> {
        for (key, path) in &self.files {
            if !path.exists() {
                return Err(Error::Checkpoint(format!("manifest entry `{key}` missing at {}", path.display())));
            }
        }
        let path = dir.join(format!("{}.run.json", self.command));
        write_json(&path, self)?;
        Ok(path)
    }
}

fn split_seed(seed: u64, split: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFiles {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub refs: PathBuf,
    pub trees: PathBuf,
}

/// Writes an 80/10/10 split of the synthetic corpus. Each split is generated
/// separately so that every one is style-balanced. The test split also gets
/// its ground-truth transfers as references and their trees.
pub fn gen_data(out: &Path, count: usize, seed: u64) -> Result<DataFiles> {
    if count < 10 {
        return Err(Error::InvalidArgument("count must be at least 10".into()));
    }
    let grammar = SyntheticGrammar::default();
    let train_n = count * 8 / 10;
    let dev_n = count / 10;
    let test_n = count - train_n - dev_n;
    let files = DataFiles {
        train: out.join("train.jsonl"),
        dev: out.join("dev.jsonl"),
        test: out.join("test.jsonl"),
        refs: out.join("test.refs.jsonl"),
        trees: out.join("test.ref_trees.txt"),
    };
    for (k, (n, path)) in [(train_n, &files.train), (dev_n, &files.dev), (test_n, &files.test)]
        .into_iter()
        .enumerate()
    {
        let items = generate_synthetic(&grammar, n, split_seed(seed, k as u64))?;
        let sentences: Vec<Sentence> = items.iter().map(|i| i.sentence.clone()).collect();
        write_atomic(path, corpus_to_jsonl(&sentences).as_bytes())?;
        if k == 2 {
            let refs: Vec<Vec<String>> = items.iter().map(|i| vec![i.reference.text()]).collect();
            write_atomic(&files.refs, references_to_jsonl(&refs).as_bytes())?;
            let trees: Vec<ConstituencyTree> = items
                .iter()
                .map(|i| i.reference.ctree.clone().expect("grammar sentences carry trees"))
                .collect();
            write_atomic(&files.trees, trees_to_lines(&trees).as_bytes())?;
        }
    }
    Ok(files)
}

/// Reads a corpus file and checks every sentence against `max_len`.
pub fn read_split(path: &Path, max_len: usize) -> Result<Vec<Sentence>> {
    let sentences = read_corpus(path)?;
    if sentences.is_empty() {
        return Err(Error::Empty("corpus file"));
    }
    for (i, s) in sentences.iter().enumerate() {
        s.validate(max_len).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(sentences)
}

pub fn examples(classifier: &Classifier, sentences: &[Sentence], grammar: &SyntheticGrammar) -> Vec<Example> {
    sentences.iter().map(|s| classifier.example(s, grammar)).collect()
}

/// Builds, pretrains and freezes a classifier of the requested kind.
pub fn fit_classifier(
    config: &ClassifierConfig,
    syntax: bool,
    vocab: Vocab,
    train: &[Sentence],
    dev: &[Sentence],
) -> Result<(Classifier, TrainingLog)> {
    let grammar = SyntheticGrammar::default();
    let mut c = if syntax {
        Classifier::syntax(config.clone(), vocab)?
    } else {
        Classifier::textcnn(config.clone(), vocab)?
    };
    let tr = examples(&c, train, &grammar);
    let dv = examples(&c, dev, &grammar);
    let log = pretrain(&mut c, &tr, &dv)?;
    Ok((c, log))
}

pub struct ClassifierRun {
    pub classifier: Classifier,
    pub log: TrainingLog,
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// Pretrains the dependency-aware classifier on `data.train`, stopping on
/// `data.dev`, and saves it frozen under `out_dir`.
pub fn train_classifier_run(cfg: &ExperimentConfig) -> Result<ClassifierRun> {
    let start = Instant::now();
    let train_path = ExperimentConfig::require(&cfg.data.train, "data.train")?;
    let dev_path = ExperimentConfig::require(&cfg.data.dev, "data.dev")?;
    let train = read_split(&train_path, cfg.data.max_len)?;
    let dev = read_split(&dev_path, cfg.data.max_len)?;
    let vocab = Vocab::build(train.iter().map(|s| &s.tokens));
    let (classifier, log) = fit_classifier(&cfg.classifier, true, vocab, &train, &dev)?;
    let checkpoint = classifier.save(&cfg.out_dir.join("classifier"))?;
    let log_path = cfg.out_dir.join("classifier_log.jsonl");
    write_jsonl(&log_path, &log.epochs)?;
    let mut m = RunManifest::new("train-classifier", cfg.classifier.seed, config_json(cfg));
    m.files.insert("checkpoint".into(), checkpoint.clone());
    m.files.insert("log".into(), log_path);
    m.timings_secs.insert("total".into(), start.elapsed().as_secs_f64());
    let manifest = m.write(&cfg.out_dir)?;
    Ok(ClassifierRun {
        classifier,
        log,
        checkpoint,
        manifest,
    })
}

pub struct SacgRun {
    pub model: SacgModel,
    pub log: SacgLog,
    pub checkpoint: PathBuf,
    pub classifier_sha256: String,
    pub manifest: PathBuf,
}

/// Trains the generator against a frozen classifier checkpoint. The
/// `no_syntax_both` ablation pretrains a TextCNN guide on the same data
/// first. Fails if the classifier checkpoint changes during the run.
pub fn train_sacg_run(cfg: &ExperimentConfig, classifier_path: &Path, ablation: Option<AblationKind>) -> Result<SacgRun> {
    let start = Instant::now();
    let before = checkpoint_sha256(classifier_path)?;
    let classifier = Classifier::load(classifier_path)?;
    if !classifier.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let train_path = ExperimentConfig::require(&cfg.data.train, "data.train")?;
    let dev_path = ExperimentConfig::require(&cfg.data.dev, "data.dev")?;
    let train = read_split(&train_path, cfg.data.max_len)?;
    let dev = read_split(&dev_path, cfg.data.max_len)?;
    let kind = ablation.unwrap_or(cfg.sacg.ablation);
    let mut sacg_cfg = cfg.sacg.clone();
    sacg_cfg.ablation = kind;
    sacg_cfg.adjacency_orientation = classifier.config.adjacency_orientation;
    let mut manifest = RunManifest::new("train-sacg", sacg_cfg.seed, config_json(cfg));
    let mut metadata = BTreeMap::new();
    metadata.insert("train".to_string(), train_path.display().to_string());
    metadata.insert("classifier_sha256".to_string(), before.clone());

    let guide = if kind.syntax_classifier() {
        classifier.clone()
    } else {
        let t = Instant::now();
        let (cnn, log) = fit_classifier(&cfg.classifier, false, classifier.vocab.clone(), &train, &dev)?;
        let path = cnn.save(&cfg.out_dir.join("guide_textcnn"))?;
        let log_path = cfg.out_dir.join("guide_textcnn_log.jsonl");
        write_jsonl(&log_path, &log.epochs)?;
        metadata.insert("guide".to_string(), path.display().to_string());
        manifest.files.insert("guide".into(), path);
        manifest.files.insert("guide_log".into(), log_path);
        manifest.timings_secs.insert("guide".into(), t.elapsed().as_secs_f64());
        cnn
    };

    let grammar = SyntheticGrammar::default();
    let tr = examples(&guide, &train, &grammar);
    let dv = examples(&guide, &dev, &grammar);
    let mut model = SacgModel::new(sacg_cfg, classifier.vocab.clone())?;
    let t = Instant::now();
    let log = train_sacg(&mut model, &guide, &tr, &dv, |_| {})?;
    manifest.timings_secs.insert("sacg".into(), t.elapsed().as_secs_f64());
    let checkpoint = model.save(&cfg.out_dir.join("sacg"), metadata)?;
    let log_path = cfg.out_dir.join("sacg_log.jsonl");
    write_jsonl(&log_path, &log.epochs)?;

    let after = checkpoint_sha256(classifier_path)?;
    if after != before {
        return Err(Error::Checkpoint("classifier checkpoint changed during generator training".into()));
    }
    manifest.files.insert("checkpoint".into(), checkpoint.clone());
    manifest.files.insert("log".into(), log_path);
    manifest.files.insert("classifier".into(), crate::checkpoint::manifest_path(classifier_path));
    manifest.timings_secs.insert("total".into(), start.elapsed().as_secs_f64());
    let manifest = manifest.write(&cfg.out_dir)?;
    Ok(SacgRun {
        model,
        log,
        checkpoint,
        classifier_sha256: before,
        manifest,
    })
}

/// Greedy transfer of every sentence in `input` toward `target`, written
/// as corpus JSONL. Returns the number of sentences.
pub fn transfer_file(model_path: &Path, input: &Path, target: Style, out: &Path) -> Result<usize> {
    if target > 1 {
        return Err(Error::Label {
            label: target,
            classes: 2,
        });
    }
    let (model, _) = SacgModel::load(model_path)?;
    let sentences = read_corpus(input)?;
    let grammar = SyntheticGrammar::default();
    let ex: Vec<Example> = sentences
        .iter()
        .map(|s| Example::from_sentence(&model.vocab, s, &grammar, model.config.adjacency_orientation))
        .collect();
    let targets = vec![target; ex.len()];
    let outputs = model.transfer_corpus(&ex, &targets)?;
    let transferred = outputs
        .into_iter()
        .map(|o| Sentence::new(o, target))
        .collect::<Result<Vec<_>>>()?;
    write_atomic(out, corpus_to_jsonl(&transferred).as_bytes())?;
    Ok(transferred.len())
}

pub struct EvaluateArgs<'a> {
    pub model: &'a Path,
    pub classifier: &'a Path,
    pub test: &'a Path,
    pub refs: Option<&'a Path>,
    pub trees: Option<&'a Path>,
    pub out_dir: &'a Path,
    /// Language-model training corpus; defaults to the generator's own.
    pub lm_train: Option<&'a Path>,
    pub eval: &'a EvalConfig,
}

pub fn read_reference_trees(path: &Path) -> Result<Vec<Vec<ConstituencyTree>>> {
    Ok(parse_ptb_lines(&read_text(path)?)?
        .into_iter()
        .map(|t| vec![t])
        .collect())
}

/// Transfers the test split toward the opposite style and writes
/// `report.json`, `report.txt` and `transferred.jsonl` under `out_dir`.
pub fn evaluate_run(args: &EvaluateArgs<'_>) -> Result<EvalReport> {
    let start = Instant::now();
    let (model, metadata) = SacgModel::load(args.model)?;
    let classifier = Classifier::load(args.classifier)?;
    if !classifier.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let lm_path = match args.lm_train {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(
            metadata
                .get("train")
                .ok_or_else(|| Error::Checkpoint("generator checkpoint records no training corpus".into()))?,
        ),
    };
    let lm_corpus: Vec<Vec<String>> = read_corpus(&lm_path)?.into_iter().map(|s| s.tokens).collect();
    let lm = NGramLm::train(&lm_corpus, args.eval.lm_order)?;
    let test = read_corpus(args.test)?;
    let refs = args.refs.map(|p| parse_references(&read_text(p)?)).transpose()?;
    let trees = args.trees.map(read_reference_trees).transpose()?;
    for (name, len) in [("references", refs.as_ref().map(Vec::len)), ("trees", trees.as_ref().map(Vec::len))] {
        if let Some(n) = len {
            if n != test.len() {
                return Err(Error::Parse {
                    line: n.min(test.len()) + 1,
                    msg: format!("{name} hold {n} entries for {} test sentences", test.len()),
                });
            }
        }
    }
    let grammar = SyntheticGrammar::default();
    let options = args.eval.options();
    let ctx = EvalContext {
        classifier: &classifier,
        lm: &lm,
        grammar: &grammar,
        options: &options,
    };
    let (report, transferred) = evaluate_corpus(&model, &ctx, &test, refs.as_deref(), trees.as_deref())?;
    let report_path = args.out_dir.join("report.json");
    let table_path = args.out_dir.join("report.txt");
    let out_path = args.out_dir.join("transferred.jsonl");
    write_json(&report_path, &report)?;
    write_atomic(&table_path, report.to_table(model.kind().as_str()).as_bytes())?;
    write_atomic(&out_path, corpus_to_jsonl(&transferred).as_bytes())?;
    let mut m = RunManifest::new(
        "evaluate",
        model.config.seed,
        serde_json::json!({ "eval": args.eval, "lm_train": lm_path }),
    );
    m.files.insert("report".into(), report_path);
    m.files.insert("table".into(), table_path);
    m.files.insert("transferred".into(), out_path);
    m.timings_secs.insert("total".into(), start.elapsed().as_secs_f64());
    m.write(args.out_dir)?;
    Ok(report)
}

pub fn probe_run(classifier: &Path, test: &Path, seed: u64) -> Result<ProbeReport> {
    let classifier = Classifier::load(classifier)?;
    let sentences = read_corpus(test)?;
    syntax_probe(&classifier, &sentences, &SyntheticGrammar::default(), seed)
}
