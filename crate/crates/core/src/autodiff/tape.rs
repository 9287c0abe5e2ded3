//! Reverse-mode differentiation tape over 2-D `f64` matrices.
//!
//! Every operation appends one node holding its forward value. Nodes are
//! only ever appended, so the node vector is already in topological order
//! and [`Tape::backward`] is a single reverse sweep.

use std::str::FromStr;
use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use super::tensor::{Matrix, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Probabilities below this are clamped before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Constant sparse row-mixing matrix: `out[i] = Σ w · x[j]` over `rows[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Mul,
    ConcatLastAxis,
    Sigmoid,
    Tanh,
    Relu,
}

impl FromStr for ElementwiseOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "add" => Self::Add,
            "mul" => Self::Mul,
            "concat" | "concat-last-axis" => Self::ConcatLastAxis,
            "sigmoid" => Self::Sigmoid,
            "tanh" => Self::Tanh,
            "relu" => Self::Relu,
            other => return Err(Error::UnknownOp(other.to_string())),
        })
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    GatherRows(Var, Vec<usize>),
    SparseMix(Var, Arc<SparseRows>),
    SoftmaxRows(Var),
    MaxOverRows(Var, Vec<usize>),
    MeanRows(Var),
    Sum(Var),
    Nll {
        probs: Var,
        labels: Vec<usize>,
        weights: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    param: Option<(u64, ParamId)>,
}

/// Record of executed operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
}

fn shape_of(m: &Matrix) -> [usize; 2] {
    [m.nrows(), m.ncols()]
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_rows_in_place(m: &mut Matrix) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.mapv_inplace(|v| v / total);
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        shape_of(&self.nodes[v.0].value)
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf that receives a gradient but is not tied to a parameter store.
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Places a parameter on the tape. Gradients flow back to the store only
    /// if the tensor requires them.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let t = store.get(id);
        let v = self.push(t.value().clone(), Op::Leaf, t.requires_grad);
        self.nodes[v.0].param = Some((store.uid(), id));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(Error::shape("matmul", av.shape(), bv.shape()));
        }
        let out = av.dot(bv);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        let rg = self.rg(&[a]);
        self.push(out, Op::Transpose(a), rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(op, av.shape(), bv.shape()));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Adds a `1 × n` row to every row of an `m × n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.nrows() != 1 || rv.ncols() != av.ncols() {
            return Err(Error::shape("add_row", av.shape(), rv.shape()));
        }
        let out = av + rv;
        let rg = self.rg(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a) * factor;
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self
            .value(a)
            .mapv(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(&[a]);
        self.push(out, Op::LeakyRelu(a, slope), rg)
    }

    /// Concatenation along the last axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat inputs"))?;
        let rows = self.value(first).nrows();
        for &p in parts {
            if self.value(p).nrows() != rows {
                return Err(Error::shape(
                    "concat",
                    self.value(first).shape(),
                    self.value(p).shape(),
                ));
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let rg = self.rg(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Concatenation along the first axis.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("stack inputs"))?;
        let cols = self.value(first).ncols();
        for &p in parts {
            if self.value(p).ncols() != cols {
                return Err(Error::shape(
                    "stack",
                    self.value(first).shape(),
                    self.value(p).shape(),
                ));
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("column counts checked");
        let rg = self.rg(parts);
        Ok(self.push(out, Op::StackRows(parts.to_vec()), rg))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        if start >= end || end > av.ncols() {
            return Err(Error::shape("slice_cols", av.shape(), &[start, end]));
        }
        let out = av.slice(s![.., start..end]).to_owned();
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::SliceCols(a, start, end), rg))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        if start >= end || end > av.nrows() {
            return Err(Error::shape("slice_rows", av.shape(), &[start, end]));
        }
        let out = av.slice(s![start..end, ..]).to_owned();
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::SliceRows(a, start, end), rg))
    }

    /// Row gather; the backward pass scatter-adds into the source rows.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if ids.is_empty() {
            return Err(Error::Empty("row ids"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= tv.nrows()) {
            return Err(Error::Vocabulary {
                id: bad,
                size: tv.nrows(),
            });
        }
        let out = tv.select(Axis(0), ids);
        let rg = self.rg(&[table]);
        Ok(self.push(out, Op::GatherRows(table, ids.to_vec()), rg))
    }

    /// Left-multiplies by a constant sparse matrix.
    pub fn sparse_mix(&mut self, a: Var, mix: Arc<SparseRows>) -> Result<Var> {
        let av = self.value(a);
        if mix.cols != av.nrows() {
            return Err(Error::shape("sparse_mix", &[mix.rows.len(), mix.cols], av.shape()));
        }
        let mut out = Array2::zeros((mix.rows.len(), av.ncols()));
        for (i, row) in mix.rows.iter().enumerate() {
            let mut dst = out.row_mut(i);
            for &(j, w) in row {
                dst.scaled_add(w, &av.row(j));
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::SparseMix(a, mix), rg))
    }

    /// Softmax along the last axis, stabilized by max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if self.value(a).ncols() == 0 {
            return Err(Error::Empty("softmax axis"));
        }
        let mut out = self.value(a).clone();
        softmax_rows_in_place(&mut out);
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::SoftmaxRows(a), rg))
    }

    /// Column-wise maximum over rows, giving a `1 × n` row.
    pub fn max_over_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut arg = vec![0usize; av.ncols()];
        let mut out = Array2::from_elem((1, av.ncols()), f64::NEG_INFINITY);
        for (r, row) in av.rows().into_iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                if x > out[[0, c]] {
                    out[[0, c]] = x;
                    arg[c] = r;
                }
            }
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::MaxOverRows(a, arg), rg)
    }

    /// Mean over rows, giving a `1 × n` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("matrices have at least one row")
            .insert_axis(Axis(0));
        let rg = self.rg(&[a]);
        self.push(out, Op::MeanRows(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    /// Weighted negative log-likelihood `Σ_i w_i · -ln max(p[i, label_i], floor)`.
    pub fn nll(&mut self, probs: Var, labels: &[usize], weights: &[f64]) -> Result<Var> {
        let pv = self.value(probs);
        if labels.len() != pv.nrows() || weights.len() != pv.nrows() {
            return Err(Error::shape("nll", pv.shape(), &[labels.len(), weights.len()]));
        }
        let mut total = 0.0;
        for (i, (&l, &w)) in labels.iter().zip(weights).enumerate() {
            if l >= pv.ncols() {
                return Err(Error::Label {
                    label: l,
                    classes: pv.ncols(),
                });
            }
            if w != 0.0 {
                total -= w * pv[[i, l]].max(PROB_FLOOR).ln();
            }
        }
        let out = Array2::from_elem((1, 1), total);
        let rg = self.rg(&[probs]);
        Ok(self.push(
            out,
            Op::Nll {
                probs,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    /// Dispatches one of the named elementwise operations.
    pub fn elementwise(&mut self, op: ElementwiseOp, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{op:?} takes {n} inputs, got {}",
                    inputs.len()
                )));
            }
            Ok(())
        };
        match op {
            ElementwiseOp::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            ElementwiseOp::Mul => {
                arity(2)?;
                self.mul(inputs[0], inputs[1])
            }
            ElementwiseOp::ConcatLastAxis => self.concat_cols(inputs),
            ElementwiseOp::Sigmoid => {
                arity(1)?;
                Ok(self.sigmoid(inputs[0]))
            }
            ElementwiseOp::Tanh => {
                arity(1)?;
                Ok(self.tanh(inputs[0]))
            }
            ElementwiseOp::Relu => {
                arity(1)?;
                Ok(self.relu(inputs[0]))
            }
        }
    }

    /// Propagates gradients from a scalar loss to every reachable node that
    /// requires them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::StaleTape);
        }
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(Error::NonScalarLoss(shape.to_vec()));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[id];
        let out = &node.value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, delta: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(*a) {
                    acc(*a, g.dot(&self.value(*b).t()));
                }
                if needs(*b) {
                    acc(*b, self.value(*a).t().dot(g));
                }
            }
            Op::Transpose(a) => acc(*a, g.t().to_owned()),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    acc(*a, g * self.value(*b));
                }
                if needs(*b) {
                    acc(*b, g * self.value(*a));
                }
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                if needs(*row) {
                    acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Scale(a, f) => acc(*a, g * *f),
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(out).for_each(|d, &y| *d *= y * (1.0 - y));
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(out).for_each(|d, &y| *d *= 1.0 - y * y);
                acc(*a, d);
            }
            Op::LeakyRelu(a, slope) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*a))
                    .for_each(|d, &x| {
                        if x <= 0.0 {
                            *d *= slope
                        }
                    });
                acc(*a, d);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    if needs(p) {
                        acc(p, g.slice(s![.., start..start + w]).to_owned());
                    }
                    start += w;
                }
            }
            Op::StackRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.value(p).nrows();
                    if needs(p) {
                        acc(p, g.slice(s![start..start + h, ..]).to_owned());
                    }
                    start += h;
                }
            }
            Op::SliceCols(a, start, end) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                d.slice_mut(s![.., *start..*end]).assign(g);
                acc(*a, d);
            }
            Op::SliceRows(a, start, end) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                d.slice_mut(s![*start..*end, ..]).assign(g);
                acc(*a, d);
            }
            Op::GatherRows(a, ids) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                for (r, &i) in ids.iter().enumerate() {
                    let mut dst = d.row_mut(i);
                    dst += &g.row(r);
                }
                acc(*a, d);
            }
            Op::SparseMix(a, mix) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                for (i, row) in mix.rows.iter().enumerate() {
                    for &(j, w) in row {
                        d.row_mut(j).scaled_add(w, &g.row(i));
                    }
                }
                acc(*a, d);
            }
            Op::SoftmaxRows(a) => {
                let mut d = g * out;
                for (mut drow, yrow) in d.rows_mut().into_iter().zip(out.rows()) {
                    let dot: f64 = drow.sum();
                    Zip::from(&mut drow)
                        .and(&yrow)
                        .for_each(|dv, &y| *dv -= y * dot);
                }
                acc(*a, d);
            }
            Op::MaxOverRows(a, arg) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                for (c, &r) in arg.iter().enumerate() {
                    d[[r, c]] += g[[0, c]];
                }
                acc(*a, d);
            }
            Op::MeanRows(a) => {
                let av = self.value(*a);
                let m = av.nrows() as f64;
                let row = g.row(0).mapv(|x| x / m);
                let d = row.broadcast(av.raw_dim()).expect("row broadcast").to_owned();
                acc(*a, d);
            }
            Op::Sum(a) => acc(*a, Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]])),
            Op::Nll {
                probs,
                labels,
                weights,
            } => {
                let pv = self.value(*probs);
                let mut d = Array2::zeros(pv.raw_dim());
                for (i, (&l, &w)) in labels.iter().zip(weights).enumerate() {
                    let p = pv[[i, l]];
                    if w != 0.0 && p > PROB_FLOOR {
                        d[[i, l]] = -g[[0, 0]] * w / p;
                    }
                }
                acc(*probs, d);
            }
        }
    }

    /// Adds the gradients of this tape's parameter leaves into `store`.
    /// Every trainable tensor ends up with a gradient, zero if it was not
    /// reached.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        let uid = store.uid();
        for (node, g) in self.nodes.iter().zip(&self.grads) {
            if let (Some((owner, id)), Some(g)) = (node.param, g) {
                if owner == uid && node.requires_grad {
                    store.get_mut(id).accumulate_grad(g);
                }
            }
        }
        for (_, t) in store.tensors_mut() {
            if t.requires_grad && t.grad().is_none() {
                let z = Array2::zeros(t.value().raw_dim());
                t.set_grad(Some(z));
            }
        }
    }
}
