use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batch::SeqBatch;
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::syntax::AdjacencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    LeakyRelu,
}

impl Activation {
    pub const LEAKY_SLOPE: f64 = 0.01;

    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu => tape.leaky_relu(x, Self::LEAKY_SLOPE),
        }
    }
}

/// Uniform in `±1/√fan_in`.
pub(crate) fn init<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Tensor {
    Tensor::uniform(rows, cols, 1.0 / (fan_in.max(1) as f64).sqrt(), rng)
}

/// Unit-variance lookup table.
pub(crate) fn init_table<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    Tensor::uniform(rows, cols, 3f64.sqrt(), rng)
}

/// Affine map `x · W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: store.add(format!("{name}.w"), init(input, output, input, rng)),
            b: store.add(format!("{name}.b"), init(1, output, input, rng)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

/// Single-direction LSTM with fused gate matrices ordered
/// input, forget, cell candidate, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

/// LSTM weights placed on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub wx: Var,
    pub wh: Var,
    pub b: Var,
    pub hidden: usize,
}

impl Lstm {
    /// The forget-gate bias starts at 1.
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut b = init(1, 4 * hidden, hidden, rng);
        b.value_mut().slice_mut(ndarray::s![.., hidden..2 * hidden]).mapv_inplace(|x| x + 1.0);
        Self {
            wx: store.add(format!("{name}.wx"), init(input, 4 * hidden, hidden, rng)),
            wh: store.add(format!("{name}.wh"), init(hidden, 4 * hidden, hidden, rng)),
            b: store.add(format!("{name}.b"), b),
            hidden,
        }
    }

    pub fn place(&self, tape: &mut Tape, store: &ParamStore) -> LstmVars {
        LstmVars {
            wx: tape.param(store, self.wx),
            wh: tape.param(store, self.wh),
            b: tape.param(store, self.b),
            hidden: self.hidden,
        }
    }

    /// Runs over a time-major input `[T·B × in]` and returns the hidden
    /// state at every step, indexed by time. In reverse mode the sequence is
    /// consumed right to left and the state is held at zero over padding, so
    /// each example starts from its own last token.
    pub fn run(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        batch: &SeqBatch,
        reverse: bool,
    ) -> Result<Vec<Var>> {
        let v = self.place(tape, store);
        let bsz = batch.batch_size();
        let xw = tape.matmul(x, v.wx)?;
        let xw = tape.add_row(xw, v.b)?;
        let zeros = Array2::zeros((bsz, self.hidden));
        let mut h = tape.constant(zeros.clone());
        let mut c = tape.constant(zeros);
        let mut out = vec![h; batch.max_len()];
        let steps: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..batch.max_len()).rev())
        } else {
            Box::new(0..batch.max_len())
        };
        for t in steps {
            let xw_t = tape.slice_rows(xw, t * bsz, (t + 1) * bsz)?;
            let (h_new, c_new) = v.cell(tape, xw_t, h, c)?;
            if reverse && batch.lengths().iter().any(|&n| n <= t) {
                let m = tape.constant(batch.step_mask(t, self.hidden));
                h = masked_update(tape, h, h_new, m)?;
                c = masked_update(tape, c, c_new, m)?;
            } else {
                h = h_new;
                c = c_new;
            }
            out[t] = h;
        }
        Ok(out)
    }
}

/// `prev + mask ⊙ (new - prev)`.
pub(crate) fn masked_update(tape: &mut Tape, prev: Var, new: Var, mask: Var) -> Result<Var> {
    let d = tape.sub(new, prev)?;
    let d = tape.mul(d, mask)?;
    tape.add(prev, d)
}

impl LstmVars {
    /// One step given the input projection `x · Wx + b` for this step.
    pub fn cell(&self, tape: &mut Tape, xw: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hd = self.hidden;
        let hw = tape.matmul(h, self.wh)?;
        let gates = tape.add(xw, hw)?;
        let i = tape.slice_cols(gates, 0, hd)?;
        let f = tape.slice_cols(gates, hd, 2 * hd)?;
        let g = tape.slice_cols(gates, 2 * hd, 3 * hd)?;
        let o = tape.slice_cols(gates, 3 * hd, 4 * hd)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let tc = tape.tanh(c_new);
        let h_new = tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    /// One step from a raw input row block.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let xw = tape.matmul(x, self.wx)?;
        let xw = tape.add_row(xw, self.b)?;
        self.cell(tape, xw, h, c)
    }
}

/// Bidirectional LSTM returning `[→h ; ←h]` per real position in the packed
/// layout.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

impl BiLstm {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            fwd: Lstm::new(store, &format!("{name}.fwd"), input, hidden, rng),
            bwd: Lstm::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, batch: &SeqBatch) -> Result<Var> {
        let rows = batch.packed_rows();
        let f = self.fwd.run(tape, store, x, batch, false)?;
        let b = self.bwd.run(tape, store, x, batch, true)?;
        let f = tape.stack_rows(&f)?;
        let f = tape.gather_rows(f, &rows)?;
        let b = tape.stack_rows(&b)?;
        let b = tape.gather_rows(b, &rows)?;
        tape.concat_cols(&[f, b])
    }
}

/// One-layer GRU whose final state (at each example's last real token) is
/// the sentence encoding.
#[derive(Debug, Clone)]
pub struct Gru {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bx: ParamId,
    pub bh: ParamId,
    pub hidden: usize,
}

impl Gru {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            wx: store.add(format!("{name}.wx"), init(input, 3 * hidden, hidden, rng)),
            wh: store.add(format!("{name}.wh"), init(hidden, 3 * hidden, hidden, rng)),
            bx: store.add(format!("{name}.bx"), init(1, 3 * hidden, hidden, rng)),
            bh: store.add(format!("{name}.bh"), init(1, 3 * hidden, hidden, rng)),
            hidden,
        }
    }

    pub fn final_state(&self, tape: &mut Tape, store: &ParamStore, x: Var, batch: &SeqBatch) -> Result<Var> {
        let hd = self.hidden;
        let bsz = batch.batch_size();
        let wx = tape.param(store, self.wx);
        let wh = tape.param(store, self.wh);
        let bx = tape.param(store, self.bx);
        let bh = tape.param(store, self.bh);
        let xw = tape.matmul(x, wx)?;
        let xw = tape.add_row(xw, bx)?;
        let mut h = tape.constant(Array2::zeros((bsz, hd)));
        for t in 0..batch.max_len() {
            let xt = tape.slice_rows(xw, t * bsz, (t + 1) * bsz)?;
            let ht = tape.matmul(h, wh)?;
            let ht = tape.add_row(ht, bh)?;
            let xr = tape.slice_cols(xt, 0, hd)?;
            let xu = tape.slice_cols(xt, hd, 2 * hd)?;
            let xn = tape.slice_cols(xt, 2 * hd, 3 * hd)?;
            let hr = tape.slice_cols(ht, 0, hd)?;
            let hu = tape.slice_cols(ht, hd, 2 * hd)?;
            let hn = tape.slice_cols(ht, 2 * hd, 3 * hd)?;
            let r = tape.add(xr, hr)?;
            let r = tape.sigmoid(r);
            let u = tape.add(xu, hu)?;
            let u = tape.sigmoid(u);
            let rn = tape.mul(r, hn)?;
            let n = tape.add(xn, rn)?;
            let n = tape.tanh(n);
            // h' = n + u ⊙ (h - n)
            let diff = tape.sub(h, n)?;
            let keep = tape.mul(u, diff)?;
            let h_new = tape.add(n, keep)?;
            h = if batch.lengths().iter().any(|&len| len <= t) {
                let m = tape.constant(batch.step_mask(t, hd));
                masked_update(tape, h, h_new, m)?
            } else {
                h_new
            };
        }
        Ok(h)
    }
}

/// One graph convolution over a dense single-sentence adjacency:
/// `σ(A · H · W + 1 bᵀ)`.
pub fn gcn_layer(
    tape: &mut Tape,
    h: Var,
    adjacency: &AdjacencyMatrix,
    w: Var,
    b: Var,
    activation: Activation,
) -> Result<Var> {
    let a = tape.constant(adjacency.to_dense());
    let ah = tape.matmul(a, h)?;
    let ahw = tape.matmul(ah, w)?;
    let z = tape.add_row(ahw, b)?;
    Ok(activation.apply(tape, z))
}

/// Stack of graph convolutions over the packed batch layout.
#[derive(Debug, Clone)]
pub struct Gcn {
    pub layers: Vec<Linear>,
    pub activation: Activation,
    pub output_dim: usize,
}

impl Gcn {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        dim: usize,
        depth: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let fan_in = if l == 0 { input } else { dim };
                Linear::new(store, &format!("{name}{l}"), fan_in, dim, rng)
            })
            .collect();
        let output_dim = if depth == 0 { input } else { dim };
        Self { layers, activation, output_dim }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h: Var,
        batch: &SeqBatch,
        adjacency: &[AdjacencyMatrix],
    ) -> Result<Var> {
        let mix = batch.packed_adjacency(adjacency);
        let mut h = h;
        for layer in &self.layers {
            let ah = tape.sparse_mix(h, mix.clone())?;
            let z = layer.forward(tape, store, ah)?;
            h = self.activation.apply(tape, z);
        }
        Ok(h)
    }
}

/// Scaled dot-product self-attention with `Q = K = V = H`, followed by the
/// mean over positions. Input is packed, output is `B × d`.
pub fn attention_pool(tape: &mut Tape, h: Var, batch: &SeqBatch) -> Result<Var> {
    let d = tape.shape(h)[1];
    let scale = 1.0 / (d as f64).sqrt();
    let mut pooled = Vec::with_capacity(batch.batch_size());
    for (&off, &n) in batch.offsets().iter().zip(batch.lengths()) {
        let hb = tape.slice_rows(h, off, off + n)?;
        let ht = tape.transpose(hb);
        let scores = tape.matmul(hb, ht)?;
        let scores = tape.scale(scores, scale);
        let weights = tape.softmax(scores)?;
        let attended = tape.matmul(weights, hb)?;
        pooled.push(tape.mean_rows(attended));
    }
    tape.stack_rows(&pooled)
}
