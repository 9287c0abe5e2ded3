//! Batched neural building blocks on top of the autodiff tape.

mod batch;
mod layers;

use rand::Rng;

pub use batch::SeqBatch;
pub use layers::{attention_pool, gcn_layer, Activation, BiLstm, Gcn, Gru, Linear, Lstm, LstmVars};
pub(crate) use layers::{init, init_table};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::syntax::AdjacencyMatrix;

/// Embedding lookup for a time-major id list.
pub fn embed(tape: &mut Tape, store: &ParamStore, table: ParamId, ids: &[usize]) -> Result<Var> {
    let e = tape.param(store, table);
    tape.gather_rows(e, ids)
}

/// BiLSTM followed by graph convolutions over the dependency adjacency and
/// self-attention pooling.
#[derive(Debug, Clone)]
pub struct SyntaxEncoder {
    pub bilstm: BiLstm,
    pub gcn: Gcn,
}

impl SyntaxEncoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        lstm_hidden: usize,
        gcn_layers: usize,
        gcn_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bilstm = BiLstm::new(store, &format!("{name}.bilstm"), input, lstm_hidden, rng);
        let gcn = Gcn::new(store, &format!("{name}.gcn"), 2 * lstm_hidden, gcn_dim, gcn_layers, activation, rng);
        Self { bilstm, gcn }
    }

    pub fn output_dim(&self) -> usize {
        self.gcn.output_dim
    }

    /// Encodes a time-major embedded batch into `B × d` sentence vectors.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        batch: &SeqBatch,
        adjacency: &[AdjacencyMatrix],
    ) -> Result<Var> {
        let h = self.bilstm.forward(tape, store, x, batch)?;
        let g = self.gcn.forward(tape, store, h, batch, adjacency)?;
        attention_pool(tape, g, batch)
    }
}
