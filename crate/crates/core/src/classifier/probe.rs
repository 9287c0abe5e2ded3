use serde::{Deserialize, Serialize};

use super::{Classifier, Example};
use crate::error::Result;
use crate::syntax::{permute_tokens, Sentence, SyntheticGrammar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub accuracy_original: f64,
    pub accuracy_permuted: f64,
    /// `accuracy_original - accuracy_permuted`.
    pub delta: f64,
}

/// Accuracy on the corpus as given versus with every sentence's word order
/// shuffled. Shuffled sentences are re-parsed; unparseable ones fall back to
/// self-loops. Single-token sentences are kept unchanged.
pub fn syntax_probe(
    classifier: &Classifier,
    corpus: &[Sentence],
    grammar: &SyntheticGrammar,
    seed: u64,
) -> Result<ProbeReport> {
    let original: Vec<Example> = corpus.iter().map(|s| classifier.example(s, grammar)).collect();
    let permuted: Vec<Example> = corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let shuffled = permute_tokens(s, seed.wrapping_add(i as u64)).unwrap_or_else(|_| s.clone());
            classifier.example(&shuffled, grammar)
        })
        .collect();
    let accuracy_original = classifier.accuracy(&original)?;
    let accuracy_permuted = classifier.accuracy(&permuted)?;
    Ok(ProbeReport {
        accuracy_original,
        accuracy_permuted,
        delta: accuracy_original - accuracy_permuted,
    })
}
