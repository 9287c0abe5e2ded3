//! Composite operations built from tape primitives.

use ndarray::Array2;
use rand::Rng;

use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Clamp applied to uniform draws before the double logarithm.
pub const GUMBEL_CLAMP: f64 = 1e-10;

/// Source of Gumbel perturbations.
pub enum Noise<'a, R: Rng> {
    /// No perturbation; the relaxation reduces to a tempered softmax.
    Zero,
    Gumbel(&'a mut R),
}

impl<R: Rng> Noise<'_, R> {
    /// Draws a `rows × cols` matrix of Gumbel(0, 1) samples.
    pub fn sample(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        match self {
            Noise::Zero => Array2::zeros((rows, cols)),
            Noise::Gumbel(rng) => Array2::from_shape_simple_fn((rows, cols), || {
                let u: f64 = rng.gen::<f64>().clamp(GUMBEL_CLAMP, 1.0 - GUMBEL_CLAMP);
                -(-u.ln()).ln()
            }),
        }
    }
}

/// Gumbel-Softmax relaxation: `softmax((logits + g) / τ)` per row.
pub fn gumbel_softmax<R: Rng>(
    tape: &mut Tape,
    logits: Var,
    temperature: f64,
    noise: &mut Noise<'_, R>,
) -> Result<Var> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let [rows, cols] = tape.shape(logits);
    let perturbed = match noise {
        Noise::Zero => logits,
        _ => {
            let g = tape.constant(noise.sample(rows, cols));
            tape.add(logits, g)?
        }
    };
    let scaled = tape.scale(perturbed, 1.0 / temperature);
    tape.softmax(scaled)
}

/// Mean cross-entropy of probability rows against class labels.
pub fn cross_entropy(tape: &mut Tape, probs: Var, labels: &[usize]) -> Result<Var> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let w = vec![1.0 / labels.len() as f64; labels.len()];
    tape.nll(probs, labels, &w)
}

/// `[[1, 2]]`-style convenience constructor for small constants in tests
/// and examples.
pub fn matrix(rows: &[&[f64]]) -> Array2<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    Array2::from_shape_fn((r, c), |(i, j)| rows[i][j])
}

/// Index of the largest entry of each row.
pub fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
