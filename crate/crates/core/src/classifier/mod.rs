//! Style classifiers: the dependency-aware network, the TextCNN baseline,
//! pretraining, and the word-order probe.

mod probe;
mod textcnn;

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    cross_entropy, OptimizerState, ParamId, ParamStore, Tape, UpdateRule, Var,
};
use crate::error::{Error, Result};
use crate::nn::{attention_pool, embed, gcn_layer, Activation, Linear, SeqBatch, SyntaxEncoder};
use crate::syntax::{adjacency_for, AdjacencyMatrix, Orientation, Sentence, SyntheticGrammar};
use crate::vocab::{Vocab, PAD};

pub use probe::{syntax_probe, ProbeReport};
pub use textcnn::{TextCnn, FILTERS_PER_WIDTH, FILTER_WIDTHS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub embed_dim: usize,
    pub lstm_hidden: usize,
    pub gcn_layers: usize,
    pub gcn_dim: usize,
    pub num_styles: usize,
    pub activation: Activation,
    pub adjacency_orientation: Orientation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Stop as soon as validation accuracy reaches 1.
    pub stop_on_perfect: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            lstm_hidden: 250,
            gcn_layers: 2,
            gcn_dim: 500,
            num_styles: 2,
            activation: Activation::Relu,
            adjacency_orientation: Orientation::DependentRow,
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: Some(5.0),
            patience: 5,
            stop_on_perfect: true,
            seed: 1,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("gcn_dim", self.gcn_dim),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("classifier.{name} must be positive")));
            }
        }
        if self.num_styles != 2 {
            return Err(Error::Config("classifier.num_styles must be 2".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("classifier.learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// A sentence ready for the network: vocabulary ids, adjacency, and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub adjacency: AdjacencyMatrix,
    pub style: usize,
}

impl Example {
    pub fn new(ids: Vec<usize>, adjacency: AdjacencyMatrix, style: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        if adjacency.n() != ids.len() {
            return Err(Error::shape("adjacency", &[adjacency.n(); 2], &[ids.len(), 1]));
        }
        Ok(Self {
            ids,
            adjacency,
            style,
        })
    }

    /// Gold heads when present, else the grammar parse, else self-loops.
    pub fn from_sentence(
        vocab: &Vocab,
        s: &Sentence,
        grammar: &SyntheticGrammar,
        orientation: Orientation,
    ) -> Self {
        let adjacency = adjacency_for(&s.tokens, s.dep_heads.as_deref(), grammar, orientation);
        Self {
            ids: vocab.encode(&s.tokens),
            adjacency,
            style: s.style,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ClassifierNet {
    Syntax { encoder: SyntaxEncoder, fc: Linear },
    TextCnn(TextCnn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Syntax,
    TextCnn,
}

/// A style classifier together with its parameters and vocabulary.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub vocab: Vocab,
    pub embedding: ParamId,
    pub net: ClassifierNet,
    pub store: ParamStore,
}

impl Classifier {
    /// Embedding → BiLSTM → GCN stack → attention pool → linear → softmax.
    pub fn syntax(config: ClassifierConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = StdRng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let embedding = store.add("embedding", crate::nn::init_table(vocab.len(), config.embed_dim, &mut rng));
        let encoder = SyntaxEncoder::new(
            &mut store,
            "encoder",
            config.embed_dim,
            config.lstm_hidden,
            config.gcn_layers,
            config.gcn_dim,
            config.activation,
            &mut rng,
        );
        let fc = Linear::new(&mut store, "fc", encoder.output_dim(), config.num_styles, &mut rng);
        Ok(Self {
            config,
            vocab,
            embedding,
            net: ClassifierNet::Syntax { encoder, fc },
            store,
        })
    }

    /// Convolutional baseline without any structural input.
    pub fn textcnn(config: ClassifierConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = StdRng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let embedding = store.add("embedding", crate::nn::init_table(vocab.len(), config.embed_dim, &mut rng));
        let cnn = TextCnn::new(&mut store, config.embed_dim, config.num_styles, &mut rng);
        Ok(Self {
            config,
            vocab,
            embedding,
            net: ClassifierNet::TextCnn(cnn),
            store,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.net {
            ClassifierNet::Syntax { .. } => ClassifierKind::Syntax,
            ClassifierNet::TextCnn(_) => ClassifierKind::TextCnn,
        }
    }

    pub fn uses_syntax(&self) -> bool {
        self.kind() == ClassifierKind::Syntax
    }

    pub fn is_frozen(&self) -> bool {
        self.store.is_frozen()
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }

    pub fn example(&self, s: &Sentence, grammar: &SyntheticGrammar) -> Example {
        Example::from_sentence(&self.vocab, s, grammar, self.config.adjacency_orientation)
    }

    /// Style probabilities `B × styles` for a time-major embedded batch,
    /// with parameters read from `store`.
    pub fn forward_with(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        batch: &SeqBatch,
        adjacency: &[AdjacencyMatrix],
    ) -> Result<Var> {
        let logits = match &self.net {
            ClassifierNet::Syntax { encoder, fc } => {
                let pooled = encoder.forward(tape, store, x, batch, adjacency)?;
                fc.forward(tape, store, pooled)?
            }
            ClassifierNet::TextCnn(cnn) => cnn.forward(tape, store, x, batch)?,
        };
        tape.softmax(logits)
    }

    pub fn forward_embedded(
        &self,
        tape: &mut Tape,
        x: Var,
        batch: &SeqBatch,
        adjacency: &[AdjacencyMatrix],
    ) -> Result<Var> {
        self.forward_with(tape, &self.store, x, batch, adjacency)
    }

    /// Embeds id sequences and classifies them.
    pub fn forward_ids_with(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        examples: &[&Example],
    ) -> Result<Var> {
        let batch = SeqBatch::new(examples.iter().map(|e| e.ids.len()).collect());
        let seqs: Vec<Vec<usize>> = examples.iter().map(|e| e.ids.clone()).collect();
        let ids = batch.time_major_ids(&seqs, PAD);
        for &id in &ids {
            if id >= self.vocab.len() {
                return Err(Error::Vocabulary {
                    id,
                    size: self.vocab.len(),
                });
            }
        }
        let x = embed(tape, store, self.embedding, &ids)?;
        let adjacency: Vec<AdjacencyMatrix> = examples.iter().map(|e| e.adjacency.clone()).collect();
        self.forward_with(tape, store, x, &batch, &adjacency)
    }

    /// Probability rows for every example, in input order.
    pub fn predict_proba(&self, examples: &[Example]) -> Result<Array2<f64>> {
        const CHUNK: usize = 128;
        let mut out = Array2::zeros((examples.len(), self.config.num_styles));
        for (c, chunk) in examples.chunks(CHUNK).enumerate() {
            let refs: Vec<&Example> = chunk.iter().collect();
            let mut tape = Tape::new();
            let p = self.forward_ids_with(&mut tape, &self.store, &refs)?;
            let v = tape.value(p);
            out.slice_mut(ndarray::s![c * CHUNK..c * CHUNK + chunk.len(), ..])
                .assign(v);
        }
        Ok(out)
    }

    pub fn predict(&self, examples: &[Example]) -> Result<Vec<usize>> {
        Ok(crate::autodiff::argmax_rows(&self.predict_proba(examples)?))
    }

    /// Fraction of examples whose prediction equals their label.
    pub fn accuracy(&self, examples: &[Example]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let pred = self.predict(examples)?;
        let hits = pred.iter().zip(examples).filter(|(p, e)| **p == e.style).count();
        Ok(hits as f64 / examples.len() as f64)
    }

    /// Row `i` is the concatenated forward and backward state at token `i`.
    pub fn bilstm_encode(&self, tape: &mut Tape, ids: &[usize]) -> Result<Var> {
        let ClassifierNet::Syntax { encoder, .. } = &self.net else {
            return Err(Error::InvalidArgument("TextCNN has no BiLSTM".into()));
        };
        if ids.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let batch = SeqBatch::new(vec![ids.len()]);
        let x = embed(tape, &self.store, self.embedding, ids)?;
        encoder.bilstm.forward(tape, &self.store, x, &batch)
    }

    /// Single-sentence composition through dense GCN layers.
    pub fn classify(&self, ids: &[usize], adjacency: &AdjacencyMatrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = match &self.net {
            ClassifierNet::Syntax { encoder, fc } => {
                if adjacency.n() != ids.len() {
                    return Err(Error::shape("classify", &[adjacency.n(); 2], &[ids.len(), 1]));
                }
                let mut h = self.bilstm_encode(&mut tape, ids)?;
                for layer in &encoder.gcn.layers {
                    let w = tape.param(&self.store, layer.w);
                    let b = tape.param(&self.store, layer.b);
                    h = gcn_layer(&mut tape, h, adjacency, w, b, encoder.gcn.activation)?;
                }
                let pooled = attention_pool(&mut tape, h, &SeqBatch::new(vec![ids.len()]))?;
                let logits = fc.forward(&mut tape, &self.store, pooled)?;
                tape.softmax(logits)?
            }
            ClassifierNet::TextCnn(_) => {
                let e = Example::new(ids.to_vec(), adjacency.clone(), 0)?;
                self.forward_ids_with(&mut tape, &self.store, &[&e])?
            }
        };
        Ok(tape.value(p).iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Mean cross-entropy of a batch under the store's current parameters.
pub fn batch_loss(classifier: &Classifier, tape: &mut Tape, examples: &[&Example]) -> Result<Var> {
    let probs = classifier.forward_ids_with(tape, &classifier.store, examples)?;
    let labels: Vec<usize> = examples.iter().map(|e| e.style).collect();
    cross_entropy(tape, probs, &labels)
}

/// Minimizes cross-entropy with early stopping on validation accuracy,
/// restores the best epoch's parameters, and freezes the model.
pub fn pretrain(classifier: &mut Classifier, train: &[Example], dev: &[Example]) -> Result<TrainingLog> {
    let cfg = classifier.config.clone();
    let styles: std::collections::BTreeSet<usize> = train.iter().map(|e| e.style).collect();
    if styles.len() < 2 {
        return Err(Error::InvalidArgument("training corpus holds a single style".into()));
    }
    if dev.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if classifier.is_frozen() {
        return Err(Error::InvalidArgument("classifier is already frozen".into()));
    }
    let mut opt = OptimizerState::new(cfg.learning_rate, UpdateRule::default())?.with_clip_norm(cfg.clip_norm);
    let mut rng = StdRng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog {
        best_val_accuracy: -1.0,
        ..Default::default()
    };
    let mut best = classifier.store.clone();
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let mut tape = Tape::new();
            let loss = batch_loss(classifier, &mut tape, &batch)?;
            let value = tape.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("classifier loss at epoch {epoch}")));
            }
            total += value * batch.len() as f64;
            tape.backward(loss)?;
            tape.accumulate_into(&mut classifier.store);
            opt.step(&mut classifier.store)?;
        }
        let val_accuracy = classifier.accuracy(dev)?;
        log.epochs.push(EpochRecord {
            epoch,
            loss: total / train.len() as f64,
            val_accuracy,
        });
        if val_accuracy > log.best_val_accuracy {
            log.best_val_accuracy = val_accuracy;
            log.best_epoch = epoch;
            best.copy_values_from(&classifier.store);
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience || (cfg.stop_on_perfect && val_accuracy >= 1.0) {
            break;
        }
    }
    classifier.store.copy_values_from(&best);
    classifier.freeze();
    Ok(log)
}
