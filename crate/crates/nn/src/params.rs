use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{BnBatchStats, Gradients};
use crate::{NnError, Real, Result, Tensor};

/// How a parameter is initialised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / fan_in)`.
    FanInUniform {
        fan_in: usize,
    },
    Zeros,
    Ones,
}

/// Declared parameter: produced by tracing a model architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: [usize; 4],
    pub init: Init,
    /// `false` for batch-norm running statistics.
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry<T> {
    tensor: Arc<Tensor<T>>,
    trainable: bool,
}

/// Named parameters and buffers, iterated in name order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    entries: BTreeMap<String, Entry<T>>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            entries: BTreeMap::new(),
        }
    }
}

impl<T: Real> ParamStore<T> {
    /// Initialises every spec in declaration order from one seeded stream.
    pub fn init(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        for spec in specs {
            let len: usize = spec.shape.iter().product();
            let data = match spec.init {
                Init::Zeros => vec![T::zero(); len],
                Init::Ones => vec![T::one(); len],
                Init::FanInUniform { fan_in } => {
                    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound).map_err(|e| NnError::Config(e.to_string()))?;
                    (0..len).map(|_| T::of(dist.sample(&mut rng))).collect()
                }
            };
            store.insert(&spec.name, Tensor::new(spec.shape, data)?, spec.trainable)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<T>, trainable: bool) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(NnError::Config(format!("duplicate parameter `{name}`")));
        }
        self.entries.insert(
            name.to_owned(),
            Entry {
                tensor: Arc::new(tensor),
                trainable,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.get_shared(name).map(|t| &**t)
    }

    /// Shared handle for reading a tensor onto a graph without copying.
    pub fn get_shared(&self, name: &str) -> Result<&Arc<Tensor<T>>> {
        self.entries
            .get(name)
            .map(|e| &e.tensor)
            .ok_or_else(|| NnError::UnknownParam(name.to_owned()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.entries
            .get_mut(name)
            .map(|e| Arc::make_mut(&mut e.tensor))
            .ok_or_else(|| NnError::UnknownParam(name.to_owned()))
    }

    pub fn is_trainable(&self, name: &str) -> Result<bool> {
        self.entries
            .get(name)
            .map(|e| e.trainable)
            .ok_or_else(|| NnError::UnknownParam(name.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every tensor (parameters and buffers) in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), &*e.tensor))
    }

    /// Trainable parameters in name order.
    pub fn trainable(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries
            .iter()
            .filter(|(_, e)| e.trainable)
            .map(|(k, e)| (k.as_str(), &*e.tensor))
    }

    pub fn trainable_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries
            .iter_mut()
            .filter(|(_, e)| e.trainable)
            .map(|(k, e)| (k.as_str(), Arc::make_mut(&mut e.tensor)))
    }

    /// Number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.trainable().map(|(_, t)| t.len()).sum()
    }

    /// Copies gradients into the parameters' grad slots; parameters the
    /// loss did not reach get none.
    pub fn set_grads(&mut self, grads: &Gradients<T>) -> Result<()> {
        for e in self.entries.values_mut() {
            if e.tensor.grad().is_some() {
                Arc::make_mut(&mut e.tensor).clear_grad();
            }
        }
        for (name, g) in grads.params() {
            let e = self
                .entries
                .get_mut(name)
                .ok_or_else(|| NnError::UnknownParam(name.to_owned()))?;
            Arc::make_mut(&mut e.tensor).set_grad(g.to_vec())?;
        }
        Ok(())
    }

    /// Exponential running-statistics update for every recorded batch norm:
    /// `running = momentum * running + (1 - momentum) * batch`, with the
    /// batch variance made unbiased.
    pub fn apply_running_stats(&mut self, stats: &[BnBatchStats<T>], momentum: T) -> Result<()> {
        let keep = momentum;
        let take = T::one() - momentum;
        for s in stats {
            let correction = if s.count > 1 {
                T::of(s.count as f64 / (s.count - 1) as f64)
            } else {
                T::one()
            };
            let mean = self.get_mut(&format!("{}.running_mean", s.name))?;
            for (r, &b) in mean.data_mut().iter_mut().zip(&s.mean) {
                *r = keep * *r + take * b;
            }
            let var = self.get_mut(&format!("{}.running_var", s.name))?;
            for (r, &b) in var.data_mut().iter_mut().zip(&s.var) {
                *r = keep * *r + take * b * correction;
            }
        }
        Ok(())
    }

    /// Replaces values from `(name, tensor)` pairs; names and shapes must
    /// match this store exactly.
    pub fn assign(&mut self, tensors: Vec<(String, Tensor<T>)>) -> Result<()> {
        if tensors.len() != self.entries.len() {
            return Err(NnError::Config(format!(
                "expected {} tensors, got {}",
                self.entries.len(),
                tensors.len()
            )));
        }
        for (name, t) in tensors {
            let cur = self.get_mut(&name)?;
            if cur.shape() != t.shape() {
                return Err(NnError::shape(
                    "assign",
                    format!("`{name}` is {:?}, checkpoint has {:?}", cur.shape(), t.shape()),
                ));
            }
            *cur = t;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, e)| {
                    (
                        k.clone(),
                        Entry {
                            tensor: Arc::new(e.tensor.cast()),
                            trainable: e.trainable,
                        },
                    )
                })
                .collect(),
        }
    }
}
