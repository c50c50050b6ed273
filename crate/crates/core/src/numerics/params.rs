use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors with one gradient slot each. Iteration follows
/// insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    lookup: HashMap<String, ParamId>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let id = ParamId(self.values.len());
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    /// `(name, value, grad)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .zip(&self.grads)
            .map(|((n, v), g)| (n.as_str(), v, g))
    }

    pub fn values(&self) -> Values<'_> {
        Values(&self.values)
    }

    /// Borrow values immutably and gradients mutably at the same time.
    pub fn split_mut(&mut self) -> (Values<'_>, Grads<'_>) {
        (Values(&self.values), Grads(&mut self.grads))
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Read-only view of parameter values.
#[derive(Clone, Copy)]
pub struct Values<'a>(&'a [Tensor]);

impl<'a> Values<'a> {
    #[inline]
    pub fn get(&self, id: ParamId) -> &'a Tensor {
        &self.0[id.0]
    }

    #[inline]
    pub fn data(&self, id: ParamId) -> &'a [f64] {
        self.0[id.0].data()
    }
}

/// Mutable view of gradient slots.
pub struct Grads<'a>(&'a mut [Tensor]);

impl Grads<'_> {
    #[inline]
    pub fn data_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.0[id.0].data_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_order_and_unique_names() {
        let mut store = ParamStore::new();
        store.insert("b", Tensor::zeros(&[2])).unwrap();
        store.insert("a", Tensor::zeros(&[3, 1])).unwrap();
        assert!(store.insert("a", Tensor::zeros(&[1])).is_err());
        let names: Vec<_> = store.names().collect();
        assert_eq!(names, ["b", "a"]);
        let a = store.id("a").unwrap();
        assert_eq!(store.grad(a).shape(), &[3, 1]);
        assert!(store.id("c").is_err());
    }
}
