use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU on a 0–100 scale.
///
/// Uniform weights up to `min(4, shortest hypothesis)`, counts clipped by
/// the largest count in any single reference, add-one smoothing for
/// higher orders with no match, and a brevity penalty against the closest
/// reference length (the shorter one on ties).
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::shape("bleu", &[hypotheses.len()], &[references.len()]));
    }
    if hypotheses.is_empty() {
        return Err(Error::Empty("hypothesis corpus"));
    }
    if hypotheses.iter().any(Vec::is_empty) {
        return Err(Error::Empty("hypothesis"));
    }
    if references.iter().any(|r| r.is_empty() || r.iter().any(Vec::is_empty)) {
        return Err(Error::Empty("reference set"));
    }
    let order = hypotheses.iter().map(Vec::len).min().unwrap_or(1).min(MAX_ORDER);
    let mut matches = vec![0usize; order];
    let mut totals = vec![0usize; order];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (hyp, refs) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(hyp.len()), r))
            .expect("non-empty reference set");
        for n in 1..=order {
            let h = ngrams(hyp, n);
            let mut best: HashMap<&[String], usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngrams(r, n) {
                    let e = best.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &h {
                matches[n - 1] += (*c).min(best.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += hyp.len() + 1 - n;
        }
    }
    if matches[0] == 0 {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..order)
        .map(|i| {
            let (m, t) = if i > 0 && matches[i] == 0 {
                (1.0, totals[i] as f64 + 1.0)
            } else {
                (matches[i] as f64, totals[i] as f64)
            };
            (m / t).ln()
        })
        .sum::<f64>()
        / order as f64;
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * log_precision.exp())
}

/// BLEU of each transferred sentence against its own source.
pub fn self_bleu(transferred: &[Vec<String>], originals: &[Vec<String>]) -> Result<f64> {
    let refs: Vec<Vec<Vec<String>>> = originals.iter().map(|o| vec![o.clone()]).collect();
    bleu(transferred, &refs)
}
