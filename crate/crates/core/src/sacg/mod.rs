//! Style-conditioned encoder-decoder guided by a frozen style classifier.

mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    argmax_rows, cross_entropy, gumbel_softmax, Noise, OptimizerState, ParamId, ParamStore, Tape, Var,
};
use crate::classifier::{Classifier, Example};
use crate::error::{Error, Result};
use crate::nn::{embed, init_table, Activation, Gru, Linear, Lstm, SeqBatch, SyntaxEncoder};
use crate::syntax::{adjacency_for, opposite, AdjacencyMatrix, Orientation, Sentence, Style, SyntheticGrammar};
use crate::vocab::{Vocab, BOS, EOS, OUTPUT_OFFSET, PAD};

pub use train::{train_sacg, validate, SacgEpochRecord, SacgLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    /// Dependency-aware encoder guided by the dependency-aware classifier.
    #[default]
    Full,
    /// One-layer GRU encoder; the guiding classifier is unchanged.
    NoSyntaxEncoder,
    /// GRU encoder guided by a TextCNN.
    NoSyntaxBoth,
}

impl AblationKind {
    pub const ALL: [AblationKind; 3] = [
        AblationKind::Full,
        AblationKind::NoSyntaxEncoder,
        AblationKind::NoSyntaxBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationKind::Full => "full",
            AblationKind::NoSyntaxEncoder => "no_syntax_encoder",
            AblationKind::NoSyntaxBoth => "no_syntax_both",
        }
    }

    pub fn syntax_encoder(self) -> bool {
        self == AblationKind::Full
    }

    pub fn syntax_classifier(self) -> bool {
        self != AblationKind::NoSyntaxBoth
    }
}

impl fmt::Display for AblationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacgConfig {
    pub latent_dim: usize,
    pub style_code_dim: usize,
    pub lambda: f64,
    pub temperature: f64,
    /// Per-epoch multiplier on the temperature; 1 keeps it fixed.
    pub temperature_decay: f64,
    pub min_temperature: f64,
    pub max_decode_len: usize,
    pub embed_dim: usize,
    pub lstm_hidden: usize,
    pub gcn_layers: usize,
    pub activation: Activation,
    pub adjacency_orientation: Orientation,
    pub decoder_hidden: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub ablation: AblationKind,
}

impl Default for SacgConfig {
    fn default() -> Self {
        Self {
            latent_dim: 500,
            style_code_dim: 200,
            lambda: 1.0,
            temperature: 0.5,
            temperature_decay: 1.0,
            min_temperature: 0.1,
            max_decode_len: 20,
            embed_dim: 300,
            lstm_hidden: 250,
            gcn_layers: 2,
            activation: Activation::Relu,
            adjacency_orientation: Orientation::DependentRow,
            decoder_hidden: 500,
            learning_rate: 1e-5,
            clip_norm: Some(5.0),
            epochs: 10,
            batch_size: 32,
            seed: 1,
            ablation: AblationKind::Full,
        }
    }
}

impl SacgConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("latent_dim", self.latent_dim),
            ("style_code_dim", self.style_code_dim),
            ("max_decode_len", self.max_decode_len),
            ("embed_dim", self.embed_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("sacg.{name} must be positive")));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("sacg.lambda must be non-negative".into()));
        }
        if !(self.temperature > 0.0) || !(self.min_temperature > 0.0) {
            return Err(Error::Config("sacg temperatures must be positive".into()));
        }
        if !(self.temperature_decay > 0.0) {
            return Err(Error::Config("sacg.temperature_decay must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("sacg.learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Encoder {
    Syntax(SyntaxEncoder),
    Gru(Gru),
}

/// Relaxed decoding: one probability row block per step plus the hard
/// argmax path.
#[derive(Debug, Clone)]
pub struct SoftDecode {
    /// `B × outputs` per step.
    pub probs: Vec<Var>,
    /// Tokens before the first `<eos>`, at least one per example.
    pub lengths: Vec<usize>,
    /// Argmax token ids, truncated to `lengths`.
    pub tokens: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub loss: f64,
    pub loss_rec: f64,
    pub loss_cla: f64,
}

#[derive(Debug, Clone)]
pub struct SacgModel {
    pub config: SacgConfig,
    pub vocab: Vocab,
    pub grammar: SyntheticGrammar,
    pub embedding: ParamId,
    pub encoder: Encoder,
    pub style_codes: ParamId,
    pub init: Linear,
    pub decoder: Lstm,
    pub output: Linear,
    pub store: ParamStore,
}

impl SacgModel {
    pub fn new(config: SacgConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = StdRng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let embedding = store.add("embedding", init_table(vocab.len(), config.embed_dim, &mut rng));
        let encoder = if config.ablation.syntax_encoder() {
            Encoder::Syntax(SyntaxEncoder::new(
                &mut store,
                "encoder",
                config.embed_dim,
                config.lstm_hidden,
                config.gcn_layers,
                config.latent_dim,
                config.activation,
                &mut rng,
            ))
        } else {
            Encoder::Gru(Gru::new(&mut store, "encoder.gru", config.embed_dim, config.latent_dim, &mut rng))
        };
        let style_codes = store.add("style_codes", init_table(2, config.style_code_dim, &mut rng));
        let init_layer = Linear::new(
            &mut store,
            "decoder.init",
            config.latent_dim + config.style_code_dim,
            2 * config.decoder_hidden,
            &mut rng,
        );
        let decoder = Lstm::new(&mut store, "decoder.lstm", config.embed_dim, config.decoder_hidden, &mut rng);
        let output = Linear::new(&mut store, "decoder.out", config.decoder_hidden, vocab.num_outputs(), &mut rng);
        Ok(Self {
            config,
            vocab,
            grammar: SyntheticGrammar::default(),
            embedding,
            encoder,
            style_codes,
            init: init_layer,
            decoder,
            output,
            store,
        })
    }

    pub fn kind(&self) -> AblationKind {
        self.config.ablation
    }

    /// Number of scalar parameters in the encoder alone.
    pub fn encoder_parameters(&self) -> usize {
        self.store
            .iter()
            .filter(|(_, name, _)| name.starts_with("encoder."))
            .map(|(_, _, t)| t.len())
            .sum()
    }

    /// Latent codes `B × latent_dim`.
    pub fn encode_with(&self, tape: &mut Tape, store: &ParamStore, examples: &[&Example]) -> Result<Var> {
        let batch = SeqBatch::new(examples.iter().map(|e| e.ids.len()).collect());
        let seqs: Vec<Vec<usize>> = examples.iter().map(|e| e.ids.clone()).collect();
        let ids = batch.time_major_ids(&seqs, PAD);
        let x = embed(tape, store, self.embedding, &ids)?;
        match &self.encoder {
            Encoder::Syntax(enc) => {
                let adjacency: Vec<AdjacencyMatrix> = examples.iter().map(|e| e.adjacency.clone()).collect();
                enc.forward(tape, store, x, &batch, &adjacency)
            }
            Encoder::Gru(gru) => gru.final_state(tape, store, x, &batch),
        }
    }

    /// Latent code of one sentence under the given adjacency.
    pub fn encode(&self, ids: &[usize], adjacency: &AdjacencyMatrix) -> Result<Vec<f64>> {
        let e = Example::new(ids.to_vec(), adjacency.clone(), 0)?;
        let mut tape = Tape::new();
        let z = self.encode_with(&mut tape, &self.store, &[&e])?;
        Ok(tape.value(z).iter().copied().collect())
    }

    /// Initial decoder state from `[z ; y]`.
    fn initial_state(&self, tape: &mut Tape, store: &ParamStore, z: Var, styles: &[Style]) -> Result<(Var, Var)> {
        let codes = tape.param(store, self.style_codes);
        let y = tape.gather_rows(codes, styles)?;
        let zy = tape.concat_cols(&[z, y])?;
        let s = self.init.forward(tape, store, zy)?;
        let hd = self.config.decoder_hidden;
        let h = tape.slice_cols(s, 0, hd)?;
        let h = tape.tanh(h);
        let c = tape.slice_cols(s, hd, 2 * hd)?;
        Ok((h, c))
    }

    /// Teacher-forced output distributions in the packed layout: example
    /// `b` contributes `|s_b| + 1` rows, the last predicting `<eos>`.
    pub fn decode_reconstruct(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        z: Var,
        styles: &[Style],
        targets: &[&[usize]],
    ) -> Result<Var> {
        for t in targets {
            if t.len() > self.config.max_decode_len {
                return Err(Error::InvalidArgument(format!(
                    "sentence of {} tokens exceeds max decode length {}",
                    t.len(),
                    self.config.max_decode_len
                )));
            }
        }
        let inputs: Vec<Vec<usize>> = targets
            .iter()
            .map(|t| std::iter::once(BOS).chain(t.iter().copied()).collect())
            .collect();
        let batch = SeqBatch::new(inputs.iter().map(Vec::len).collect());
        let bsz = batch.batch_size();
        let ids = batch.time_major_ids(&inputs, PAD);
        let x = embed(tape, store, self.embedding, &ids)?;
        let dec = self.decoder.place(tape, store);
        let xw = tape.matmul(x, dec.wx)?;
        let xw = tape.add_row(xw, dec.b)?;
        let (mut h, mut c) = self.initial_state(tape, store, z, styles)?;
        let mut hs = Vec::with_capacity(batch.max_len());
        for t in 0..batch.max_len() {
            let xt = tape.slice_rows(xw, t * bsz, (t + 1) * bsz)?;
            (h, c) = dec.cell(tape, xt, h, c)?;
            hs.push(h);
        }
        let hs = tape.stack_rows(&hs)?;
        let hs = tape.gather_rows(hs, &batch.packed_rows())?;
        let logits = self.output.forward(tape, store, hs)?;
        tape.softmax(logits)
    }

    /// Decodes toward `styles` with Gumbel-Softmax relaxation. Each step's
    /// input is the probability-weighted mix of word embeddings.
    pub fn decode_transfer_soft<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        z: Var,
        styles: &[Style],
        temperature: f64,
        noise: &mut Noise<'_, R>,
    ) -> Result<SoftDecode> {
        let bsz = styles.len();
        let v = self.vocab.len();
        let dec = self.decoder.place(tape, store);
        let table = tape.param(store, self.embedding);
        let words = tape.slice_rows(table, OUTPUT_OFFSET, v)?;
        let (mut h, mut c) = self.initial_state(tape, store, z, styles)?;
        let mut x = tape.gather_rows(table, &vec![BOS; bsz])?;
        let mut probs = Vec::new();
        let mut hard: Vec<Vec<usize>> = vec![Vec::new(); bsz];
        let mut lengths: Vec<Option<usize>> = vec![None; bsz];
        for t in 0..self.config.max_decode_len {
            (h, c) = dec.step(tape, x, h, c)?;
            let logits = self.output.forward(tape, store, h)?;
            let p = gumbel_softmax(tape, logits, temperature, noise)?;
            for (b, k) in argmax_rows(tape.value(p)).into_iter().enumerate() {
                if lengths[b].is_some() {
                    continue;
                }
                let id = k + OUTPUT_OFFSET;
                if id == EOS {
                    lengths[b] = Some(t);
                } else {
                    hard[b].push(id);
                }
            }
            probs.push(p);
            if lengths.iter().all(Option::is_some) {
                break;
            }
            x = tape.matmul(p, words)?;
        }
        let lengths: Vec<usize> = lengths
            .into_iter()
            .map(|l| l.unwrap_or(probs.len()).max(1))
            .collect();
        for (tokens, &n) in hard.iter_mut().zip(&lengths) {
            if tokens.is_empty() {
                tokens.push(EOS);
            }
            tokens.truncate(n);
        }
        Ok(SoftDecode {
            probs,
            lengths,
            tokens: hard,
        })
    }

    /// Cross-entropy of the frozen classifier on the soft sentences against
    /// `targets`. The adjacency comes from parsing the hard argmax tokens and
    /// is a constant.
    pub fn loss_cla(
        &self,
        tape: &mut Tape,
        classifier: &Classifier,
        soft: &SoftDecode,
        targets: &[Style],
    ) -> Result<Var> {
        if !classifier.is_frozen() {
            return Err(Error::NotFrozen);
        }
        if classifier.vocab != self.vocab {
            return Err(Error::InvalidArgument("classifier and generator vocabularies differ".into()));
        }
        let batch = SeqBatch::new(soft.lengths.clone());
        let steps = tape.stack_rows(&soft.probs[..batch.max_len()])?;
        let table = tape.param(&classifier.store, classifier.embedding);
        let words = tape.slice_rows(table, OUTPUT_OFFSET, self.vocab.len())?;
        let x = tape.matmul(steps, words)?;
        let adjacency: Vec<AdjacencyMatrix> = soft
            .tokens
            .iter()
            .map(|ids| {
                let tokens: Vec<String> = ids.iter().map(|&i| self.vocab.word(i).to_string()).collect();
                adjacency_for(&tokens, None, &self.grammar, classifier.config.adjacency_orientation)
            })
            .collect();
        let probs = classifier.forward_embedded(tape, x, &batch, &adjacency)?;
        cross_entropy(tape, probs, targets)
    }

    /// Joint objective on one batch with parameters read from `store`.
    /// Returns `(loss, loss_rec, loss_cla)` as tape variables.
    pub fn objective<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        classifier: &Classifier,
        batch: &[&Example],
        temperature: f64,
        noise: &mut Noise<'_, R>,
    ) -> Result<(Var, Var, Var)> {
        let z = self.encode_with(tape, store, batch)?;
        let own: Vec<Style> = batch.iter().map(|e| e.style).collect();
        let targets: Vec<&[usize]> = batch.iter().map(|e| e.ids.as_slice()).collect();
        let probs = self.decode_reconstruct(tape, store, z, &own, &targets)?;
        let rec = loss_rec(tape, probs, &targets)?;
        let flipped: Vec<Style> = own.iter().map(|&s| opposite(s)).collect();
        let soft = self.decode_transfer_soft(tape, store, z, &flipped, temperature, noise)?;
        let cla = self.loss_cla(tape, classifier, &soft, &flipped)?;
        let weighted = tape.scale(cla, self.config.lambda);
        let loss = tape.add(rec, weighted)?;
        Ok((loss, rec, cla))
    }

    /// One optimizer step on `L_rec + λ·L_cla`.
    pub fn train_step<R: Rng>(
        &mut self,
        classifier: &Classifier,
        batch: &[&Example],
        optimizer: &mut OptimizerState,
        temperature: f64,
        rng: &mut R,
    ) -> Result<StepReport> {
        let mut tape = Tape::new();
        let mut noise = Noise::Gumbel(rng);
        let (loss, rec, cla) = self.objective(&mut tape, &self.store, classifier, batch, temperature, &mut noise)?;
        let report = StepReport {
            loss: tape.scalar(loss),
            loss_rec: tape.scalar(rec),
            loss_cla: tape.scalar(cla),
        };
        if !report.loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "generator loss (rec {}, cla {})",
                report.loss_rec, report.loss_cla
            )));
        }
        tape.backward(loss)?;
        tape.accumulate_into(&mut self.store);
        optimizer.step(&mut self.store)?;
        Ok(report)
    }

    /// Greedy decoding toward `targets`. Every output holds at least one
    /// token and never `<pad>`, `<bos>` or `<eos>`.
    pub fn transfer_batch(&self, examples: &[&Example], targets: &[Style]) -> Result<Vec<Vec<usize>>> {
        let mut tape = Tape::new();
        let store = &self.store;
        let bsz = examples.len();
        let z = self.encode_with(&mut tape, store, examples)?;
        let dec = self.decoder.place(&mut tape, store);
        let table = tape.param(store, self.embedding);
        let (mut h, mut c) = self.initial_state(&mut tape, store, z, targets)?;
        let mut next = vec![BOS; bsz];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); bsz];
        let mut done = vec![false; bsz];
        for t in 0..self.config.max_decode_len {
            let x = tape.gather_rows(table, &next)?;
            (h, c) = dec.step(&mut tape, x, h, c)?;
            let logits = self.output.forward(&mut tape, store, h)?;
            let mut lv: Array2<f64> = tape.value(logits).clone();
            if t == 0 {
                lv.column_mut(EOS - OUTPUT_OFFSET).fill(f64::NEG_INFINITY);
            }
            for (b, k) in argmax_rows(&lv).into_iter().enumerate() {
                let id = k + OUTPUT_OFFSET;
                next[b] = id;
                if done[b] {
                    continue;
                }
                if id == EOS {
                    done[b] = true;
                } else {
                    out[b].push(id);
                }
            }
            if done.iter().all(|&d| d) {
                break;
            }
        }
        Ok(out)
    }

    /// Greedy transfer of one sentence.
    pub fn transfer(&self, s: &Sentence, adjacency: &AdjacencyMatrix, target: Style) -> Result<Sentence> {
        let e = Example::new(self.vocab.encode(&s.tokens), adjacency.clone(), s.style)?;
        let ids = self.transfer_batch(&[&e], &[target])?.remove(0);
        Sentence::new(self.words(&ids), target)
    }

    /// Transfers a corpus in chunks, each sentence toward its own target.
    pub fn transfer_corpus(&self, examples: &[Example], targets: &[Style]) -> Result<Vec<Vec<String>>> {
        const CHUNK: usize = 128;
        let mut out = Vec::with_capacity(examples.len());
        for (chunk, tgt) in examples.chunks(CHUNK).zip(targets.chunks(CHUNK)) {
            let refs: Vec<&Example> = chunk.iter().collect();
            for ids in self.transfer_batch(&refs, tgt)? {
                out.push(self.words(&ids));
            }
        }
        Ok(out)
    }

    pub fn words(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.vocab.word(i).to_string()).collect()
    }
}

/// `−Σ_t log p(gold_t)` averaged over the batch, where the gold sequence of
/// each example is its tokens followed by `<eos>`.
pub fn loss_rec(tape: &mut Tape, probs: Var, targets: &[&[usize]]) -> Result<Var> {
    if targets.is_empty() {
        return Err(Error::Empty("targets"));
    }
    let labels: Vec<usize> = targets
        .iter()
        .flat_map(|t| t.iter().copied().chain(std::iter::once(EOS)))
        .map(|id| id.checked_sub(OUTPUT_OFFSET).unwrap_or(usize::MAX))
        .collect();
    let rows = tape.shape(probs)[0];
    if rows != labels.len() {
        return Err(Error::shape("loss_rec", &[rows], &[labels.len()]));
    }
    let w = vec![1.0 / targets.len() as f64; labels.len()];
    tape.nll(probs, &labels, &w)
}
