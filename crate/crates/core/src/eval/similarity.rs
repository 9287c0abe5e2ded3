use std::collections::HashSet;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    Max,
    Min,
    /// Concatenation of min, mean and max.
    MinMeanMax,
}

/// Sentence vector from rows of an embedding table.
pub fn sentence_embedding(ids: &[usize], table: &Array2<f64>, pooling: Pooling) -> Result<Array1<f64>> {
    if ids.is_empty() {
        return Err(Error::Empty("sentence"));
    }
    if let Some(&id) = ids.iter().find(|&&i| i >= table.nrows()) {
        return Err(Error::Vocabulary {
            id,
            size: table.nrows(),
        });
    }
    let rows = table.select(Axis(0), ids);
    let fold = |init: f64, f: fn(f64, f64) -> f64| rows.fold_axis(Axis(0), init, |&a, &b| f(a, b));
    let mean = || rows.mean_axis(Axis(0)).expect("non-empty");
    Ok(match pooling {
        Pooling::Mean => mean(),
        Pooling::Max => fold(f64::NEG_INFINITY, f64::max),
        Pooling::Min => fold(f64::INFINITY, f64::min),
        Pooling::MinMeanMax => ndarray::concatenate![
            Axis(0),
            fold(f64::INFINITY, f64::min),
            mean(),
            fold(f64::NEG_INFINITY, f64::max)
        ],
    })
}

/// Cosine of two vectors; 0 when either is the zero vector.
pub fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (a.dot(b) / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Cosine similarity of two sentences' pooled embeddings.
pub fn cosine_similarity(a: &[usize], b: &[usize], table: &Array2<f64>, pooling: Pooling) -> Result<f64> {
    Ok(cosine(
        &sentence_embedding(a, table, pooling)?,
        &sentence_embedding(b, table, pooling)?,
    ))
}

/// Jaccard overlap of the two token sets after removing stopwords. Two
/// empty sets count as identical.
pub fn word_overlap(a: &[String], b: &[String], stopwords: &HashSet<String>) -> f64 {
    let keep = |s: &[String]| -> HashSet<String> {
        s.iter().filter(|w| !stopwords.contains(*w)).cloned().collect()
    };
    let (sa, sb) = (keep(a), keep(b));
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}
