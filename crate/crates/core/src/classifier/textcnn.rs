use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::nn::{init, Linear, SeqBatch};

pub const FILTER_WIDTHS: [usize; 3] = [3, 4, 5];
pub const FILTERS_PER_WIDTH: usize = 100;

/// One-layer convolutional sentence classifier with max-over-time pooling.
#[derive(Debug, Clone)]
pub struct TextCnn {
    /// `(width, W [width·embed × filters], b [1 × filters])` per filter bank.
    pub convs: Vec<(usize, ParamId, ParamId)>,
    pub fc: Linear,
    pub embed_dim: usize,
}

impl TextCnn {
    pub fn new<R: Rng>(store: &mut ParamStore, embed_dim: usize, classes: usize, rng: &mut R) -> Self {
        let convs = FILTER_WIDTHS
            .iter()
            .map(|&w| {
                let wt = store.add(format!("conv{w}.w"), init(w * embed_dim, FILTERS_PER_WIDTH, w * embed_dim, rng));
                let b = store.add(format!("conv{w}.b"), init(1, FILTERS_PER_WIDTH, w * embed_dim, rng));
                (w, wt, b)
            })
            .collect();
        let fc = Linear::new(store, "fc", FILTER_WIDTHS.len() * FILTERS_PER_WIDTH, classes, rng);
        Self { convs, fc, embed_dim }
    }

    /// Logits `B × classes` for a time-major embedded batch. Padding
    /// positions are zeroed and sequences shorter than a filter are padded
    /// with zero rows.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, batch: &SeqBatch) -> Result<Var> {
        let bsz = batch.batch_size();
        let t = batch.max_len();
        let e = self.embed_dim;
        let widest = FILTER_WIDTHS.iter().copied().max().unwrap_or(1);
        let padded_len = t.max(widest);
        let mut mask = Array2::zeros((padded_len * bsz, e));
        for (b, &n) in batch.lengths().iter().enumerate() {
            for step in 0..n {
                mask.row_mut(step * bsz + b).fill(1.0);
            }
        }
        let x = if padded_len > t {
            let zeros = tape.constant(Array2::zeros(((padded_len - t) * bsz, e)));
            tape.stack_rows(&[x, zeros])?
        } else {
            x
        };
        let mask = tape.constant(mask);
        let x = tape.mul(x, mask)?;

        let mut pooled = Vec::with_capacity(self.convs.len());
        for &(w, wt, bias) in &self.convs {
            let wt = tape.param(store, wt);
            let bias = tape.param(store, bias);
            let positions = padded_len - w + 1;
            let mut acc: Option<Var> = None;
            for k in 0..w {
                let xs = tape.slice_rows(x, k * bsz, (k + positions) * bsz)?;
                let wk = tape.slice_rows(wt, k * e, (k + 1) * e)?;
                let term = tape.matmul(xs, wk)?;
                acc = Some(match acc {
                    Some(a) => tape.add(a, term)?,
                    None => term,
                });
            }
            let z = tape.add_row(acc.expect("width is positive"), bias)?;
            let f = tape.relu(z);
            let mut rows = Vec::with_capacity(bsz);
            for (b, &n) in batch.lengths().iter().enumerate() {
                let valid = n.max(w) - w + 1;
                let idx: Vec<usize> = (0..valid).map(|p| p * bsz + b).collect();
                let fb = tape.gather_rows(f, &idx)?;
                rows.push(tape.max_over_rows(fb));
            }
            pooled.push(tape.stack_rows(&rows)?);
        }
        let features = tape.concat_cols(&pooled)?;
        self.fc.forward(tape, store, features)
    }
}
