use std::collections::BTreeMap;

use super::{Tensor, TensorError};
use crate::real::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// A trainable tensor with its Adam moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<R> {
    pub value: Tensor<R>,
    pub m: Tensor<R>,
    pub v: Tensor<R>,
}

impl<R: Real> Parameter<R> {
    pub fn new(value: Tensor<R>) -> Self {
        let m = Tensor::zeros(value.shape());
        let v = Tensor::zeros(value.shape());
        Self { value, m, v }
    }
}

/// Named trainable parameters plus the optimizer step counter.
///
/// Names iterate in sorted order, which keeps checkpoints and update order
/// deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet<R> {
    entries: BTreeMap<String, Parameter<R>>,
    step: u64,
}

impl<R: Real> ParameterSet<R> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
            step: 0,
        }
    }

    /// Adds a parameter with zeroed moments. Replaces any previous entry of the same name.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<R>) {
        self.entries.insert(name.into(), Parameter::new(value));
    }

    pub fn insert_with_moments(&mut self, name: impl Into<String>, param: Parameter<R>) {
        self.entries.insert(name.into(), param);
    }

    pub fn value(&self, name: &str) -> Option<&Tensor<R>> {
        self.entries.get(name).map(|p| &p.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Option<&mut Tensor<R>> {
        self.entries.get_mut(name).map(|p| &mut p.value)
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<R>> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter<R>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// Total number of scalar weights.
    pub fn num_weights(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    /// One Adam update (β1 = 0.9, β2 = 0.999, ε = 1e-8, bias-corrected).
    ///
    /// Every parameter must have a gradient of matching shape; nothing is
    /// modified when validation fails.
    pub fn adam_step(&mut self, grads: &Gradients<R>, lr: R) -> Result<(), TensorError> {
        for (name, p) in &self.entries {
            let g = grads
                .get(name)
                .ok_or_else(|| TensorError::MissingGradient(name.clone()))?;
            if g.shape() != p.value.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    left: p.value.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let b1 = R::from_f64_lossy(ADAM_BETA1);
        let b2 = R::from_f64_lossy(ADAM_BETA2);
        let eps = R::from_f64_lossy(ADAM_EPSILON);
        let t = self.step as f64;
        let c1 = R::from_f64_lossy(1.0 - ADAM_BETA1.powf(t));
        let c2 = R::from_f64_lossy(1.0 - ADAM_BETA2.powf(t));
        for (name, p) in self.entries.iter_mut() {
            let g = grads.get(name).expect("validated above");
            let Parameter { value, m, v } = p;
            for (((w, m), v), &g) in value
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *m = b1 * *m + (R::one() - b1) * g;
                *v = b2 * *v + (R::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Gradients keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients<R> {
    entries: BTreeMap<String, Tensor<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn insert(&mut self, name: String, grad: Tensor<R>) {
        self.entries.insert(name, grad);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<R>> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<R>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `other` into `self`, name by name.
    pub fn accumulate(&mut self, other: &Gradients<R>) {
        for (name, g) in &other.entries {
            match self.entries.get_mut(name) {
                Some(acc) => {
                    for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                None => {
                    self.entries.insert(name.clone(), g.clone());
                }
            }
        }
    }

    pub fn global_norm(&self) -> R {
        self.entries
            .values()
            .flat_map(|g| g.data().iter())
            .map(|&x| x * x)
            .sum::<R>()
            .sqrt()
    }

    /// Rescales all gradients so their joint L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: R) -> R {
        let norm = self.global_norm();
        if norm > max_norm && norm > R::zero() {
            let scale = max_norm / norm;
            for g in self.entries.values_mut() {
                for x in g.data_mut() {
                    *x *= scale;
                }
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParameterSet<f64> {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::vector(vec![value]));
        p
    }

    fn grad(value: f64) -> Gradients<f64> {
        let mut g = Gradients::default();
        g.insert("w".into(), Tensor::vector(vec![value]));
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = single(1.0);
        let lr = 1e-3;
        p.adam_step(&grad(1.0), lr).unwrap();
        // m̂ = 1, v̂ = 1 at t = 1, so the step is lr / (1 + ε).
        let expected = 1.0 - lr / (1.0 + ADAM_EPSILON);
        assert!((p.value("w").unwrap().item() - expected).abs() < 1e-15);
        assert_eq!(p.step(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut p = single(0.25);
        p.adam_step(&grad(0.0), 0.1).unwrap();
        assert_eq!(p.value("w").unwrap().item(), 0.25);
    }

    #[test]
    fn missing_gradient_is_rejected_without_update() {
        let mut p = single(0.25);
        p.insert("b", Tensor::vector(vec![0.0]));
        let err = p.adam_step(&grad(1.0), 0.1).unwrap_err();
        assert_eq!(err, TensorError::MissingGradient("b".into()));
        assert_eq!(p.step(), 0);
        assert_eq!(p.value("w").unwrap().item(), 0.25);
    }

    #[test]
    fn trajectory_is_reproducible() {
        let run = || {
            let mut p = single(0.5);
            for i in 0..5 {
                p.adam_step(&grad(0.3 * i as f64 - 0.4), 0.01).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = Gradients::default();
        g.insert("a".into(), Tensor::vector(vec![3.0, 4.0]));
        let before = g.clip_global_norm(1.0);
        assert_eq!(before, 5.0);
        assert!((g.global_norm() - 1.0_f64).abs() < 1e-12);
    }
}
