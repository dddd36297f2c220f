//! Named parameter storage shared by all trainable models.
//!
//! Parameters live outside the tape: each forward pass copies current values
//! onto a fresh tape as leaves, and [`ParamStore::absorb_grads`] routes the
//! resulting gradients back. Insertion order is stable and defines the
//! serialization order of checkpoints.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Stable handle to one parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Initialization schemes for [`ParamStore::register`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform on `[-limit, limit]` with `limit = sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform { fan_in: usize, fan_out: usize },
    /// Uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone)]
struct Parameter<S: Scalar> {
    name: String,
    value: Tensor<S>,
    grad: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct ParamStore<S: Scalar> {
    params: Vec<Parameter<S>>,
    by_name: HashMap<String, usize>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new(), by_name: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Create a parameter. Names must be unique; duplicates are a programming
    /// error and panic.
    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let value = match init {
            Init::Zeros => Tensor::zeros(shape),
            Init::Constant(c) => Tensor::filled(shape, S::c(c)),
            Init::GlorotUniform { fan_in, fan_out } => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                sample_uniform(shape, -limit, limit, rng)
            }
            Init::Uniform { low, high } => sample_uniform(shape, low, high, rng),
        };
        self.register_tensor(name, value)
    }

    /// Create a parameter from an explicit value (e.g. loaded embeddings).
    pub fn register_tensor(&mut self, name: &str, value: Tensor<S>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "parameter name already registered: {name}"
        );
        let grad = Tensor::zeros(value.shape());
        let idx = self.params.len();
        self.by_name.insert(name.to_string(), idx);
        self.params.push(Parameter { name: name.to_string(), value, grad });
        ParamId(idx)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0].grad
    }

    /// Iterate `(id, name, value)` in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<S>)> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| (ParamId(i), p.name.as_str(), &p.value))
    }

    /// Copy the current value of `id` onto `tape` as a parameter leaf.
    pub fn var(&self, tape: &mut Tape<S>, id: ParamId) -> Var {
        tape.param(self.params[id.0].value.clone(), id.0)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = S::zero();
            }
        }
    }

    /// Add the gradients recorded on `tape` (after its backward sweep) into
    /// the per-parameter accumulators. A parameter placed on the tape more
    /// than once receives the sum of all of its leaf gradients.
    pub fn absorb_grads(&mut self, tape: &Tape<S>) {
        for &(node, slot) in tape.param_nodes() {
            if let Some(g) = tape.grad(Var(node)) {
                let p = &mut self.params[slot];
                let dst = &mut p.grad;
                assert_eq!(
                    dst.shape(),
                    g.shape(),
                    "gradient shape mismatch for parameter {}",
                    p.name
                );
                for (d, &s) in dst.data_mut().iter_mut().zip(g.data().iter()) {
                    *d += s;
                }
            }
        }
    }

    /// Global L2 norm over all gradients.
    pub fn grad_norm(&self) -> S {
        self.params
            .iter()
            .fold(S::zero(), |acc, p| {
                p.grad.data().iter().fold(acc, |a, &g| a + g * g)
            })
            .sqrt()
    }

    /// Scale all gradients so the global norm is at most `max_norm`.
    pub fn clip_grads(&mut self, max_norm: S) {
        let norm = self.grad_norm();
        if norm > max_norm && norm > S::zero() {
            let factor = max_norm / norm;
            for p in &mut self.params {
                for g in p.grad.data_mut() {
                    *g *= factor;
                }
            }
        }
    }

    /// Global L2 norm over all values (reported in training history).
    pub fn value_norm(&self) -> S {
        self.params
            .iter()
            .fold(S::zero(), |acc, p| {
                p.value.data().iter().fold(acc, |a, &v| a + v * v)
            })
            .sqrt()
    }

    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Snapshot all values in registration order (used for best-epoch restore).
    pub fn snapshot(&self) -> Vec<Tensor<S>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<S>]) {
        assert_eq!(
            snapshot.len(),
            self.params.len(),
            "snapshot has {} tensors, store has {} parameters",
            snapshot.len(),
            self.params.len()
        );
        for (p, s) in self.params.iter_mut().zip(snapshot.iter()) {
            assert_eq!(p.value.shape(), s.shape(), "snapshot shape mismatch for {}", p.name);
            p.value = s.clone();
        }
    }
}

fn sample_uniform<S: Scalar>(
    shape: &[usize],
    low: f64,
    high: f64,
    rng: &mut ChaCha8Rng,
) -> Tensor<S> {
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| S::c(rng.random_range(low..=high)))
        .collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn register_and_lookup() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.register("w", &[2, 3], Init::Zeros, &mut rng());
        let b = store.register("b", &[2], Init::Constant(1.5), &mut rng());
        assert_eq!(store.len(), 2);
        assert_eq!(store.name(w), "w");
        assert_eq!(store.id("b"), Some(b));
        assert_eq!(store.value(b).data(), &[1.5, 1.5]);
    }

    #[test]
    #[should_panic(expected = "already registered")]
    fn duplicate_name_panics() {
        let mut store: ParamStore<f64> = ParamStore::new();
        store.register("w", &[1], Init::Zeros, &mut rng());
        store.register("w", &[1], Init::Zeros, &mut rng());
    }

    #[test]
    fn glorot_respects_limit_and_is_seeded() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let id = store.register(
            "w",
            &[10, 20],
            Init::GlorotUniform { fan_in: 20, fan_out: 10 },
            &mut rng(),
        );
        let limit = (6.0 / 30.0f64).sqrt();
        assert!(store.value(id).data().iter().all(|v| v.abs() <= limit));

        let mut store2: ParamStore<f64> = ParamStore::new();
        let id2 = store2.register(
            "w",
            &[10, 20],
            Init::GlorotUniform { fan_in: 20, fan_out: 10 },
            &mut rng(),
        );
        assert_eq!(store.value(id), store2.value(id2));
    }

    #[test]
    fn absorb_grads_sums_repeated_leaves() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.register("w", &[2], Init::Constant(2.0), &mut rng());
        let mut tape = Tape::new();
        let v1 = store.var(&mut tape, w);
        let v2 = store.var(&mut tape, w);
        let prod = tape.mul(v1, v2);
        let loss = tape.sum(prod);
        tape.backward(loss);
        store.zero_grads();
        store.absorb_grads(&tape);
        // d(w*w)/dw = 2w = 4 per element, summed across both leaves.
        assert_eq!(store.grad(w).data(), &[4.0, 4.0]);
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.register("w", &[2], Init::Zeros, &mut rng());
        store.params[w.0].grad = Tensor::vector(vec![3.0, 4.0]);
        store.clip_grads(1.0);
        let g = store.grad(w);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        assert!((g.data()[0] - 0.6).abs() < 1e-12);

        store.params[w.0].grad = Tensor::vector(vec![0.3, 0.4]);
        store.clip_grads(1.0);
        assert_eq!(store.grad(w).data(), &[0.3, 0.4]);
    }

    #[test]
    fn snapshot_restore_round_trips() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.register("w", &[3], Init::Uniform { low: -1.0, high: 1.0 }, &mut rng());
        let snap = store.snapshot();
        let before = store.value(w).clone();
        store.value_mut(w).data_mut()[0] = 99.0;
        store.restore(&snap);
        assert_eq!(store.value(w), &before);
    }
}
