//! Automatic evaluation: transfer accuracy, BLEU family, embedding cosine,
//! word overlap, n-gram perplexity, G-Score, and tree edit distance.

mod bleu;
mod lm;
mod similarity;
mod ted;

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, self_bleu, MAX_ORDER};
pub use lm::{NGramLm, DEFAULT_ADD_K, DEFAULT_WEIGHTS};
pub use similarity::{cosine, cosine_similarity, sentence_embedding, word_overlap, Pooling};
pub use ted::{ted, ted_corpus, TedSummary};

use crate::classifier::{Classifier, Example};
use crate::error::{Error, Result};
use crate::sacg::SacgModel;
use crate::syntax::{adjacency_for, opposite, tree_for, ConstituencyTree, Sentence, Style, SyntheticGrammar};

/// Geometric mean of accuracy (percent), a BLEU variant, cosine similarity,
/// word overlap and inverse perplexity.
pub fn gscore(acc_percent: f64, bleu_like: f64, cs: f64, wo: f64, ppl: f64) -> Result<f64> {
    let factors = [
        ("accuracy", acc_percent),
        ("bleu", bleu_like),
        ("cosine similarity", cs),
        ("word overlap", wo),
        ("perplexity", ppl),
    ];
    for (name, v) in factors {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok((acc_percent * bleu_like * cs * wo / ppl).powf(0.2))
}

/// Fraction of outputs the classifier assigns to their target style.
/// Outputs are parsed with the grammar, falling back to self-loops.
pub fn transfer_accuracy(
    classifier: &Classifier,
    outputs: &[Vec<String>],
    targets: &[Style],
    grammar: &SyntheticGrammar,
) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Empty("transferred corpus"));
    }
    if outputs.len() != targets.len() {
        return Err(Error::shape("transfer_accuracy", &[outputs.len()], &[targets.len()]));
    }
    let examples = outputs
        .iter()
        .zip(targets)
        .map(|(toks, &style)| {
            let adjacency = adjacency_for(toks, None, grammar, classifier.config.adjacency_orientation);
            Example::new(classifier.vocab.encode(toks), adjacency, style)
        })
        .collect::<Result<Vec<_>>>()?;
    classifier.accuracy(&examples)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub pooling: Pooling,
    pub stopwords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    pub acc_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_bleu: Option<f64>,
    pub cs: f64,
    pub wo: f64,
    pub ppl: f64,
    /// Absent when a factor is not positive.
    pub g_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ted_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ted_min: Option<f64>,
}

impl EvalReport {
    /// The BLEU variant that feeds the G-Score.
    pub fn bleu_like(&self) -> f64 {
        self.bleu.or(self.self_bleu).unwrap_or(0.0)
    }

    pub fn recompute_g_score(&self) -> Option<f64> {
        gscore(self.acc_percent, self.bleu_like(), self.cs, self.wo, self.ppl).ok()
    }

    /// Aligned plain-text table in the order
    /// ACC, BLEU or self-BLEU, CS, WO, PPL, G-Score, then TED when present.
    pub fn to_table(&self, model: &str) -> String {
        let bleu_header = if self.bleu.is_some() { "BLEU" } else { "self-BLEU" };
        let mut headers = vec!["Model", "ACC(%)", bleu_header, "CS", "WO", "PPL", "G-Score"];
        let mut cells = vec![
            model.to_string(),
            format!("{:.1}", self.acc_percent),
            format!("{:.1}", self.bleu_like()),
            format!("{:.3}", self.cs),
            format!("{:.3}", self.wo),
            format!("{:.1}", self.ppl),
            self.g_score.map_or("-".into(), |g| format!("{g:.2}")),
        ];
        if let Some(t) = self.ted_mean {
            headers.push("TED");
            cells.push(format!("{t:.2}"));
        }
        let widths: Vec<usize> = headers.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
        let mut out = String::new();
        for (i, h) in headers.iter().enumerate() {
            let _ = write!(out, "{}{:<w$}", if i > 0 { "  " } else { "" }, h, w = widths[i]);
        }
        out.push('\n');
        for (i, c) in cells.iter().enumerate() {
            let _ = write!(out, "{}{:<w$}", if i > 0 { "  " } else { "" }, c, w = widths[i]);
        }
        out.push('\n');
        out
    }
}

/// Inputs shared by every corpus evaluation.
pub struct EvalContext<'a> {
    pub classifier: &'a Classifier,
    pub lm: &'a NGramLm,
    pub grammar: &'a SyntheticGrammar,
    pub options: &'a EvalOptions,
}

/// Scores already-transferred outputs against their sources. With
/// references the report carries BLEU, otherwise self-BLEU.
pub fn evaluate_outputs(
    ctx: &EvalContext<'_>,
    sources: &[Sentence],
    outputs: &[Vec<String>],
    targets: &[Style],
    references: Option<&[Vec<Vec<String>>]>,
    reference_trees: Option<&[Vec<ConstituencyTree>]>,
) -> Result<EvalReport> {
    if sources.len() != outputs.len() {
        return Err(Error::shape("evaluate", &[sources.len()], &[outputs.len()]));
    }
    if outputs.iter().any(Vec::is_empty) {
        return Err(Error::Empty("transferred sentence"));
    }
    let acc = transfer_accuracy(ctx.classifier, outputs, targets, ctx.grammar)?;
    let source_tokens: Vec<Vec<String>> = sources.iter().map(|s| s.tokens.clone()).collect();
    let (bleu_v, self_bleu_v) = match references {
        Some(r) => (Some(bleu(outputs, r)?), None),
        None => (None, Some(self_bleu(outputs, &source_tokens)?)),
    };
    let table = ctx.classifier.store.get(ctx.classifier.embedding).value();
    let vocab = &ctx.classifier.vocab;
    let stop: HashSet<String> = ctx.options.stopwords.iter().cloned().collect();
    let (mut cs, mut wo) = (0.0, 0.0);
    for (src, out) in source_tokens.iter().zip(outputs) {
        cs += cosine_similarity(&vocab.encode(src), &vocab.encode(out), table, ctx.options.pooling)?;
        wo += word_overlap(src, out, &stop);
    }
    let n = outputs.len() as f64;
    let ppl = ctx.lm.corpus_perplexity(outputs)?;
    let (ted_mean, ted_min) = match reference_trees {
        Some(trees) => {
            let hyp: Vec<ConstituencyTree> = outputs.iter().map(|o| tree_for(o, ctx.grammar)).collect();
            let s = ted_corpus(&hyp, trees)?;
            (Some(s.mean_of_means), Some(s.mean_of_minima))
        }
        None => (None, None),
    };
    let mut report = EvalReport {
        sentences: outputs.len(),
        acc_percent: 100.0 * acc,
        bleu: bleu_v,
        self_bleu: self_bleu_v,
        cs: cs / n,
        wo: wo / n,
        ppl,
        g_score: None,
        ted_mean,
        ted_min,
    };
    report.g_score = report.recompute_g_score();
    Ok(report)
}

/// Transfers every test sentence toward the opposite style and scores the
/// result. Returns the report and the transferred sentences.
pub fn evaluate_corpus(
    model: &SacgModel,
    ctx: &EvalContext<'_>,
    test: &[Sentence],
    references: Option<&[Vec<Vec<String>>]>,
    reference_trees: Option<&[Vec<ConstituencyTree>]>,
) -> Result<(EvalReport, Vec<Sentence>)> {
    if test.is_empty() {
        return Err(Error::Empty("test corpus"));
    }
    let orientation = ctx.classifier.config.adjacency_orientation;
    let examples: Vec<Example> = test
        .iter()
        .map(|s| Example::from_sentence(&model.vocab, s, ctx.grammar, orientation))
        .collect();
    let targets: Vec<Style> = test.iter().map(|s| opposite(s.style)).collect();
    let outputs = model.transfer_corpus(&examples, &targets)?;
    let report = evaluate_outputs(ctx, test, &outputs, &targets, references, reference_trees)?;
    let transferred = outputs
        .into_iter()
        .zip(&targets)
        .map(|(o, &t)| Sentence::new(o, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((report, transferred))
}
