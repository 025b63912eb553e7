use std::collections::BTreeMap;

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// A named trainable tensor with an optional gradient buffer.
///
/// `grad` is `None` until a backward pass reaches the parameter; the
/// optimizer reads `None` as a zero gradient.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    name: String,
    value: Tensor<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> Parameter<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor<T> {
        &mut self.value
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient with `None` read as zeros.
    pub fn grad_or_zero(&self) -> Vec<T> {
        self.grad
            .clone()
            .unwrap_or_else(|| vec![T::zero(); self.value.len()])
    }

    pub(crate) fn accumulate(&mut self, g: &[T]) {
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => self.grad = Some(g.to_vec()),
        }
    }

    /// Weight tensors (kernels and matrices) as opposed to biases.
    pub fn is_weight(&self) -> bool {
        self.name.ends_with("/weight")
    }
}

/// Name-ordered parameter collection. Iteration order is the lexicographic
/// order of names, which is stable across runs.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Parameter<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::Usage(format!("duplicate parameter name {name}")));
        }
        self.params.insert(
            name.clone(),
            Parameter {
                name,
                value,
                grad: None,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        self.params.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Parameter<T>> {
        self.params
            .get(name)
            .ok_or_else(|| Error::Usage(format!("unknown parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.values_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar values.
    pub fn numel(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_is_name_ordered() {
        let mut s = ParamStore::<f32>::new();
        s.insert("b/weight", Tensor::zeros(&[1])).unwrap();
        s.insert("a/bias", Tensor::zeros(&[1])).unwrap();
        s.insert("c/weight", Tensor::zeros(&[1])).unwrap();
        let names: Vec<_> = s.names().collect();
        assert_eq!(names, ["a/bias", "b/weight", "c/weight"]);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = ParamStore::<f32>::new();
        s.insert("x/weight", Tensor::zeros(&[1])).unwrap();
        assert!(s.insert("x/weight", Tensor::zeros(&[1])).is_err());
    }
}
