use serde::{Deserialize, Serialize};

use super::sentence::validate_heads;
use crate::error::{Error, Result};

/// Which index of a dependency edge is the row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rows are dependents and columns are heads: `A[dep][head] = 1`.
    #[default]
    DependentRow,
    /// The transpose: `A[head][dep] = 1`.
    HeadRow,
}

/// Binary dependency matrix with self-loops on the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<u8>,
}

impl AdjacencyMatrix {
    /// Self-loops only.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Self { n, entries }
    }

    pub fn from_heads(heads: &[Option<usize>], orientation: Orientation) -> Result<Self> {
        validate_heads(heads)?;
        let mut a = Self::identity(heads.len());
        for (dep, head) in heads.iter().enumerate() {
            if let Some(head) = *head {
                match orientation {
                    Orientation::DependentRow => a.set(dep, head),
                    Orientation::HeadRow => a.set(head, dep),
                }
            }
        }
        Ok(a)
    }

    fn set(&mut self, i: usize, j: usize) {
        self.entries[i * self.n + j] = 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.n + j]
    }

    pub fn ones(&self) -> usize {
        self.entries.iter().filter(|&&e| e == 1).count()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.entries.chunks(self.n).map(<[u8]>::to_vec).collect()
    }

    /// Column indices of the nonzero entries of row `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.entries[i * self.n..(i + 1) * self.n]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == 1)
            .map(|(j, _)| j)
    }

    /// Re-indexes nodes so that new node `k` is old node `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::shape("permute", &[self.n], &[order.len()]));
        }
        let mut out = Self {
            n: self.n,
            entries: vec![0; self.n * self.n],
        };
        for (i, &oi) in order.iter().enumerate() {
            for (j, &oj) in order.iter().enumerate() {
                out.entries[i * self.n + j] = self.get(oi, oj);
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        ndarray::Array2::from_shape_fn((self.n, self.n), |(i, j)| f64::from(self.get(i, j)))
    }
}

pub fn build_adjacency(heads: &[Option<usize>]) -> Result<AdjacencyMatrix> {
    AdjacencyMatrix::from_heads(heads, Orientation::DependentRow)
}
