use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// A dense row-major 2-D array of `f64` with an optional gradient buffer.
///
/// Vectors are represented as `1 × n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    value: Matrix,
    pub requires_grad: bool,
    grad: Option<Matrix>,
}

impl Tensor {
    pub fn new(value: Matrix, requires_grad: bool) -> Self {
        Self {
            value,
            requires_grad,
            grad: None,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() || rows == 0 || cols == 0 {
            return Err(Error::shape("tensor", &[rows, cols], &[data.len()]));
        }
        let value = Array2::from_shape_vec((rows, cols), data)
            .map_err(|_| Error::shape("tensor", &[rows, cols], &[]))?;
        Ok(Self::new(value, true))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Array2::zeros((rows, cols)), true)
    }

    /// Uniform initialization in `[-scale, scale]`.
    pub fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let value = Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..=scale));
        Self::new(value, true)
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Matrix {
        &mut self.value
    }

    /// Row-major view of the data.
    pub fn data(&self) -> &[f64] {
        self.value
            .as_slice()
            .expect("tensors are stored in standard layout")
    }

    pub fn grad(&self) -> Option<&Matrix> {
        self.grad.as_ref()
    }

    pub fn set_grad(&mut self, grad: Option<Matrix>) {
        self.grad = grad;
    }

    pub(crate) fn accumulate_grad(&mut self, g: &Matrix) {
        match &mut self.grad {
            Some(existing) => *existing += g,
            None => self.grad = Some(g.as_standard_layout().into_owned()),
        }
    }
}

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of named parameter tensors.
///
/// Declaration order is significant: checkpoints serialize parameters in
/// this order.
#[derive(Debug)]
pub struct ParamStore {
    uid: u64,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        Self {
            uid: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            names: self.names.clone(),
            tensors: self.tensors.clone(),
            index: self.index.clone(),
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            uid: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub(crate) fn uid(&self) -> u64 {
        self.uid
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(id)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(&mut self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Marks every tensor as constant. Frozen stores contribute values but
    /// never gradients to a tape.
    pub fn freeze(&mut self) {
        for t in &mut self.tensors {
            t.requires_grad = false;
            t.grad = None;
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.tensors.iter().all(|t| !t.requires_grad)
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.grad = None;
        }
    }

    /// Replaces every value with the corresponding tensor of `other`.
    pub(crate) fn copy_values_from(&mut self, other: &ParamStore) {
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            dst.value.assign(&src.value);
        }
    }
}
