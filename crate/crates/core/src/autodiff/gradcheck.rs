use super::tape::{Tape, Var};
use super::tensor::ParamStore;
use crate::error::{Error, Result};

/// Compares tape gradients against central finite differences.
///
/// `f` builds a scalar loss from the parameters in `store`; it must be
/// deterministic. Returns the largest
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)` over every entry
/// of every trainable parameter.
pub fn grad_check<F>(f: F, store: &mut ParamStore, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let base = tape.scalar(loss);
    if !base.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    tape.backward(loss)?;
    tape.accumulate_into(store);

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let l = f(&mut t, store)?;
        let v = t.scalar(l);
        if !v.is_finite() {
            return Err(Error::NonFinite("perturbed loss".into()));
        }
        Ok(v)
    };

    let ids: Vec<_> = store
        .iter()
        .filter(|(_, _, t)| t.requires_grad)
        .map(|(id, _, _)| id)
        .collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = store
            .get(id)
            .grad()
            .map(|g| g.as_standard_layout().into_owned())
            .ok_or_else(|| Error::MissingGrad(store.name(id).to_string()))?;
        for k in 0..store.get(id).len() {
            let orig = store.get(id).value().as_slice().expect("standard layout")[k];
            let set = |store: &mut ParamStore, v: f64| {
                store.get_mut(id).value_mut().as_slice_mut().expect("standard layout")[k] = v;
            };
            set(store, orig + epsilon);
            let plus = eval(store);
            set(store, orig - epsilon);
            let minus = eval(store);
            set(store, orig);
            let numeric = (plus? - minus?) / (2.0 * epsilon);
            let a = analytic.as_slice().expect("standard layout")[k];
            if !a.is_finite() {
                return Err(Error::NonFinite("analytic gradient".into()));
            }
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    store.zero_grads();
    Ok(worst)
}
