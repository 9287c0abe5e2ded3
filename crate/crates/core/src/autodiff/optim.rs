use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::tensor::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Plain gradient descent.
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for UpdateRule {
    fn default() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Learning rate plus per-parameter moment accumulators.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub rule: UpdateRule,
    /// Rescale the global gradient norm down to this value when exceeded.
    pub clip_norm: Option<f64>,
    step: u64,
    moments: Vec<Option<(Array2<f64>, Array2<f64>)>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, rule: UpdateRule) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            learning_rate,
            rule,
            clip_norm: None,
            step: 0,
            moments: Vec::new(),
        })
    }

    pub fn with_clip_norm(mut self, clip: Option<f64>) -> Self {
        self.clip_norm = clip;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter and zeroes the
    /// gradients afterwards.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        let mut sq = 0.0;
        for (name, t) in params.tensors_mut() {
            if !t.requires_grad {
                continue;
            }
            let g = t.grad().ok_or_else(|| Error::MissingGrad(name.to_string()))?;
            sq += g.iter().map(|x| x * x).sum::<f64>();
        }
        if !sq.is_finite() {
            return Err(Error::NonFinite("gradient norm".into()));
        }
        let factor = match self.clip_norm {
            Some(c) if sq.sqrt() > c => c / sq.sqrt(),
            _ => 1.0,
        };

        self.step += 1;
        if self.moments.len() < params.len() {
            self.moments.resize(params.len(), None);
        }
        let lr = self.learning_rate;
        for (slot, (_, t)) in self.moments.iter_mut().zip(params.tensors_mut()) {
            if !t.requires_grad {
                continue;
            }
            let g = t.grad().expect("checked above").clone() * factor;
            match self.rule {
                UpdateRule::Sgd => t.value_mut().scaled_add(-lr, &g),
                UpdateRule::Adam { beta1, beta2, eps } => {
                    let (m, v) = slot.get_or_insert_with(|| {
                        (Array2::zeros(g.raw_dim()), Array2::zeros(g.raw_dim()))
                    });
                    let c1 = 1.0 - beta1.powi(self.step as i32);
                    let c2 = 1.0 - beta2.powi(self.step as i32);
                    Zip::from(t.value_mut())
                        .and(m)
                        .and(v)
                        .and(&g)
                        .for_each(|w, m, v, &g| {
                            *m = beta1 * *m + (1.0 - beta1) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                        });
                }
            }
            let zero = Array2::zeros(g.raw_dim());
            t.set_grad(Some(zero));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn plain_step() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::from_vec(1, 1, vec![1.0]).unwrap());
        store.get_mut(id).set_grad(Some(Array2::ones((1, 1))));
        let mut opt = OptimizerState::new(0.1, UpdateRule::Sgd).unwrap();
        opt.step(&mut store).unwrap();
        assert!((store.get(id).data()[0] - 0.9).abs() < 1e-15);
        assert_eq!(store.get(id).grad().unwrap()[[0, 0]], 0.0);
    }

    #[test]
    fn zero_grad_is_fixed_point() {
        for rule in [UpdateRule::Sgd, UpdateRule::default()] {
            let mut store = ParamStore::new();
            let id = store.add("w", Tensor::from_vec(1, 2, vec![0.3, -2.0]).unwrap());
            store.get_mut(id).set_grad(Some(Array2::zeros((1, 2))));
            let mut opt = OptimizerState::new(0.5, rule).unwrap();
            opt.step(&mut store).unwrap();
            assert_eq!(store.get(id).data(), &[0.3, -2.0]);
        }
    }

    #[test]
    fn quadratic_descends() {
        // loss = (w - 3)^2
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::from_vec(1, 1, vec![0.0]).unwrap());
        let mut opt = OptimizerState::new(0.1, UpdateRule::Sgd).unwrap();
        let loss = |w: f64| (w - 3.0) * (w - 3.0);
        let mut prev = loss(0.0);
        for _ in 0..2 {
            let w = store.get(id).data()[0];
            store.get_mut(id).set_grad(Some(Array2::from_elem((1, 1), 2.0 * (w - 3.0))));
            opt.step(&mut store).unwrap();
            let now = loss(store.get(id).data()[0]);
            assert!(now < prev);
            prev = now;
        }
        // hand iteration: 0 -> 0.6 -> 1.08
        assert!((store.get(id).data()[0] - 1.08).abs() < 1e-12);
    }

    #[test]
    fn missing_grad_is_error() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::zeros(1, 1));
        let mut opt = OptimizerState::new(0.1, UpdateRule::Sgd).unwrap();
        assert!(matches!(opt.step(&mut store), Err(Error::MissingGrad(_))));
    }

    #[test]
    fn rejects_non_positive_rate() {
        assert!(OptimizerState::new(0.0, UpdateRule::Sgd).is_err());
    }
}
