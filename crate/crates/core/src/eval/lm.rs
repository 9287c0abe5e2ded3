use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BOS: &str = "<bos>";
const EOS: &str = "<eos>";
const UNK: &str = "<unk>";

pub const DEFAULT_WEIGHTS: [f64; 3] = [0.5, 0.3, 0.2];
pub const DEFAULT_ADD_K: f64 = 0.01;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Model {
    Uniform(usize),
    Interpolated {
        /// Highest order first, unigram last.
        weights: Vec<f64>,
        add_k: f64,
        /// `counts[n]` maps an (n+1)-gram to its count.
        counts: Vec<HashMap<Vec<String>, usize>>,
        /// `context_totals[n]` maps an n-gram context to its continuation count.
        context_totals: Vec<HashMap<Vec<String>, usize>>,
        unigram_total: usize,
    },
}

/// Interpolated n-gram language model. Probabilities are defined over the
/// training vocabulary plus `<unk>` and `<eos>`; unseen contexts fall back to
/// the next lower order so every conditional distribution sums to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NGramLm {
    order: usize,
    vocab: Vec<String>,
    model: Model,
}

impl NGramLm {
    pub fn train(corpus: &[Vec<String>], order: usize) -> Result<Self> {
        let tail = &DEFAULT_WEIGHTS[3 - order.clamp(1, 3)..];
        let mass: f64 = tail.iter().sum();
        let weights: Vec<f64> = tail.iter().map(|w| w / mass).collect();
        Self::train_with(corpus, order, &weights, DEFAULT_ADD_K)
    }

    /// `weights` lists interpolation weights from the highest order down to
    /// the unigram and must sum to one.
    pub fn train_with(corpus: &[Vec<String>], order: usize, weights: &[f64], add_k: f64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("language model corpus"));
        }
        if order == 0 || weights.len() != order {
            return Err(Error::InvalidArgument(format!(
                "order {order} needs {order} interpolation weights, got {}",
                weights.len()
            )));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("interpolation weights must be a distribution".into()));
        }
        if !(add_k > 0.0) {
            return Err(Error::InvalidArgument("add-k must be positive".into()));
        }
        let mut vocab: Vec<String> = corpus.iter().flatten().cloned().collect();
        vocab.push(UNK.into());
        vocab.push(EOS.into());
        vocab.sort();
        vocab.dedup();
        let mut counts = vec![HashMap::new(); order];
        let mut context_totals = vec![HashMap::new(); order];
        let mut unigram_total = 0;
        for s in corpus {
            let padded = pad(s, order);
            for i in order - 1..padded.len() {
                unigram_total += 1;
                for n in 0..order {
                    let gram = padded[i - n..=i].to_vec();
                    *context_totals[n].entry(gram[..n].to_vec()).or_insert(0) += 1;
                    *counts[n].entry(gram).or_insert(0) += 1;
                }
            }
        }
        Ok(Self {
            order,
            vocab,
            model: Model::Interpolated {
                weights: weights.to_vec(),
                add_k,
                counts,
                context_totals,
                unigram_total,
            },
        })
    }

    /// Assigns `1 / vocab_size` to every word.
    pub fn uniform(vocab_size: usize) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::Empty("vocabulary"));
        }
        Ok(Self {
            order: 1,
            vocab: Vec::new(),
            model: Model::Uniform(vocab_size),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Words over which the model distributes probability.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn known(&self, w: &str) -> String {
        if self.vocab.binary_search_by(|v| v.as_str().cmp(w)).is_ok() {
            w.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// `p(word | context)`; only the last `order - 1` context words matter.
    pub fn prob(&self, context: &[String], word: &str) -> f64 {
        match &self.model {
            Model::Uniform(v) => 1.0 / *v as f64,
            Model::Interpolated {
                weights,
                add_k,
                counts,
                context_totals,
                unigram_total,
            } => {
                let word = self.known(word);
                let ctx: Vec<String> = context
                    .iter()
                    .rev()
                    .take(self.order - 1)
                    .rev()
                    .map(|w| if w == BOS { w.clone() } else { self.known(w) })
                    .collect();
                let v = self.vocab.len() as f64;
                let uni = (counts[0].get(std::slice::from_ref(&word)).copied().unwrap_or(0) as f64 + add_k)
                    / (*unigram_total as f64 + add_k * v);
                let mut levels = vec![uni];
                for n in 1..self.order {
                    let lower = *levels.last().expect("unigram present");
                    if ctx.len() < n {
                        levels.push(lower);
                        continue;
                    }
                    let c = ctx[ctx.len() - n..].to_vec();
                    let p = match context_totals[n].get(&c) {
                        Some(&total) if total > 0 => {
                            let mut gram = c;
                            gram.push(word.clone());
                            counts[n].get(&gram).copied().unwrap_or(0) as f64 / total as f64
                        }
                        _ => lower,
                    };
                    levels.push(p);
                }
                levels.iter().rev().zip(weights).map(|(p, w)| p * w).sum()
            }
        }
    }

    /// `exp(-(1/T) Σ log p)` over the sentence tokens plus `<eos>`.
    pub fn perplexity(&self, sentence: &[String]) -> Result<f64> {
        if sentence.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let padded = pad(sentence, self.order.max(1));
        let start = self.order.max(1) - 1;
        let mut log_sum = 0.0;
        for i in start..padded.len() {
            log_sum += self.prob(&padded[..i], &padded[i]).ln();
        }
        let t = (padded.len() - start) as f64;
        Ok((-log_sum / t).exp())
    }

    /// Mean of the per-sentence perplexities.
    pub fn corpus_perplexity(&self, sentences: &[Vec<String>]) -> Result<f64> {
        if sentences.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let mut total = 0.0;
        for s in sentences {
            total += self.perplexity(s)?;
        }
        Ok(total / sentences.len() as f64)
    }
}

fn pad(s: &[String], order: usize) -> Vec<String> {
    let mut out = vec![BOS.to_string(); order - 1];
    out.extend(s.iter().cloned());
    out.push(EOS.to_string());
    out
}
