use std::collections::HashMap;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A named model parameter.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Ordered collection of named parameters.
///
/// `version` increases by one every time the optimizer writes new values.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    pub version: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a parameter. Frozen parameters never track gradients.
    pub fn insert(&mut self, name: &str, mut tensor: Tensor, trainable: bool) {
        tensor.requires_grad = trainable;
        tensor.grad = None;
        let p = Param {
            name: name.to_string(),
            tensor,
            trainable,
        };
        match self.index.get(name) {
            Some(&i) => self.params[i] = p,
            None => {
                self.index.insert(name.to_string(), self.params.len());
                self.params.push(p);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.params[i].tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.params[i].tensor)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Invariant(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.tensor.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            if p.trainable {
                p.tensor.zero_grad();
            } else {
                p.tensor.grad = None;
            }
        }
    }

    /// Records every parameter on `tape` and returns a name → var binding.
    pub fn bind(&self, tape: &mut Tape) -> Bindings {
        let vars = self.params.iter().map(|p| Some(tape.input(&p.tensor))).collect();
        Bindings {
            vars,
            index: self.index.clone(),
        }
    }

    /// Like [`bind`](Self::bind) but leaves frozen parameters off the tape;
    /// callers read frozen values straight from the store.
    pub fn bind_trainable(&self, tape: &mut Tape) -> Bindings {
        let vars = self
            .params
            .iter()
            .map(|p| p.trainable.then(|| tape.input(&p.tensor)))
            .collect();
        Bindings {
            vars,
            index: self.index.clone(),
        }
    }

    /// Adds the tape gradients of every trainable parameter into its slot.
    pub fn accumulate(&mut self, bindings: &Bindings, grads: &Gradients) {
        for (p, v) in self.params.iter_mut().zip(&bindings.vars) {
            let Some(v) = *v else { continue };
            if !p.trainable {
                continue;
            }
            match grads.get(v) {
                Some(g) => p.tensor.accumulate_grad(g),
                None => {
                    let n = p.tensor.len();
                    p.tensor.grad.get_or_insert_with(|| vec![0.0; n]);
                }
            }
        }
    }

    /// Multiplies every accumulated gradient by `factor`.
    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            if let Some(g) = &mut p.tensor.grad {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    /// Grad slices of trainable parameters, in store order.
    pub fn grads_mut(&mut self) -> Vec<&mut [f64]> {
        self.params
            .iter_mut()
            .filter(|p| p.trainable)
            .filter_map(|p| p.tensor.grad.as_deref_mut())
            .collect()
    }

    /// Bitwise equality of names, shapes and values.
    pub fn same_values(&self, other: &Self) -> bool {
        self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| {
                a.name == b.name
                    && a.tensor.shape == b.tensor.shape
                    && a.tensor
                        .data
                        .iter()
                        .zip(&b.tensor.data)
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Tape handles for a [`ParameterStore`].
#[derive(Clone, Debug)]
pub struct Bindings {
    vars: Vec<Option<Var>>,
    index: HashMap<String, usize>,
}

impl Bindings {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.try_var(name)
            .ok_or_else(|| Error::Invariant(format!("parameter `{name}` is not bound")))
    }

    pub fn try_var(&self, name: &str) -> Option<Var> {
        self.index.get(name).and_then(|&i| self.vars[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_params_never_get_grads() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::vector(vec![1.0, 2.0]), true);
        store.insert("frozen", Tensor::vector(vec![3.0]), false);
        let mut tape = Tape::new();
        let b = store.bind(&mut tape);
        let w = b.var("w").unwrap();
        let f = b.var("frozen").unwrap();
        assert!(!tape.requires_grad(f));
        let fw = tape.constant_vector(vec![tape.value(f)[0]; 2]);
        let prod = tape.mul(w, fw).unwrap();
        let s = tape.sum(prod);
        let g = tape.backward(s).unwrap();
        store.accumulate(&b, &g);
        assert_eq!(store.get("w").unwrap().grad.as_deref(), Some(&[3.0, 3.0][..]));
        assert!(store.get("frozen").unwrap().grad.is_none());
    }

    #[test]
    fn insert_replaces_in_place() {
        let mut store = ParameterStore::new();
        store.insert("a", Tensor::scalar(1.0), true);
        store.insert("b", Tensor::scalar(2.0), true);
        store.insert("a", Tensor::scalar(5.0), false);
        let names: Vec<_> = store.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(store.get("a").unwrap().data, vec![5.0]);
        assert!(!store.iter().next().unwrap().trainable);
    }
}
