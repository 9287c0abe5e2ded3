use std::sync::Arc;

use ndarray::Array2;

use crate::autodiff::SparseRows;
use crate::syntax::AdjacencyMatrix;

/// Lengths of a batch of variable-length sequences.
///
/// Two layouts are used. The *time-major* layout pads every sequence to
/// `max_len` and stores step `t` of example `b` at row `t * B + b`. The
/// *packed* layout concatenates the real positions example by example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqBatch {
    lengths: Vec<usize>,
    max_len: usize,
}

impl SeqBatch {
    pub fn new(lengths: Vec<usize>) -> Self {
        assert!(!lengths.is_empty(), "empty batch");
        assert!(lengths.iter().all(|&l| l > 0), "empty sequence in batch");
        let max_len = *lengths.iter().max().expect("non-empty");
        Self { lengths, max_len }
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn total(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn time_major_ids(&self, seqs: &[Vec<usize>], pad: usize) -> Vec<usize> {
        let b = self.batch_size();
        let mut out = vec![pad; b * self.max_len];
        for (i, s) in seqs.iter().enumerate() {
            for (t, &id) in s.iter().enumerate() {
                out[t * b + i] = id;
            }
        }
        out
    }

    /// Time-major rows holding real positions, in packed order.
    pub fn packed_rows(&self) -> Vec<usize> {
        let b = self.batch_size();
        self.lengths
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| (0..n).map(move |t| t * b + i))
            .collect()
    }

    /// Packed offset of each example.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.lengths
            .iter()
            .map(|&n| {
                let o = acc;
                acc += n;
                o
            })
            .collect()
    }

    /// `B × width` matrix of ones for examples still running at step `t`.
    pub fn step_mask(&self, t: usize, width: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.batch_size(), width), |(b, _)| {
            if t < self.lengths[b] {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Block-diagonal adjacency over the packed layout.
    pub fn packed_adjacency(&self, adjacency: &[AdjacencyMatrix]) -> Arc<SparseRows> {
        let offsets = self.offsets();
        let mut rows = Vec::with_capacity(self.total());
        for (a, &off) in adjacency.iter().zip(&offsets) {
            for i in 0..a.n() {
                rows.push(a.neighbors(i).map(|j| (off + j, 1.0)).collect());
            }
        }
        Arc::new(SparseRows {
            cols: self.total(),
            rows,
        })
    }
}
