use indexmap::IndexMap;

use crate::{Scalar, Tensor, Var};

/// Ordered, named parameter tensors of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T: Scalar> {
    entries: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self { entries: IndexMap::new() }
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a duplicate name.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        let name = name.into();
        let prev = self.entries.insert(name.clone(), value);
        assert!(prev.is_none(), "duplicate parameter {name}");
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries.
    pub fn count(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Largest absolute entry over all tensors.
    pub fn max_abs(&self) -> T {
        self.entries.values().fold(T::zero(), |m, t| m.max(t.max_abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(Tensor::all_finite)
    }

    /// Wrap every tensor as a graph leaf. Trainable leaves record gradients.
    pub fn bind(&self, trainable: bool) -> Bound<T> {
        let vars = self
            .entries
            .iter()
            .map(|(k, t)| {
                let v = if trainable { Var::parameter(t.clone()) } else { Var::constant(t.clone()) };
                (k.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet { entries: self.entries.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }
}

/// Parameters bound into one forward pass.
pub struct Bound<T: Scalar> {
    vars: IndexMap<String, Var<T>>,
}

impl<T: Scalar> Bound<T> {
    /// Panics if the network asks for a parameter it never declared.
    pub fn get(&self, name: &str) -> &Var<T> {
        self.vars.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn vars(&self) -> Vec<&Var<T>> {
        self.vars.values().collect()
    }
}
