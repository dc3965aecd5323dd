use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor2;
use crate::error::{KgeError, Result};

/// Independent random sub-streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Permutations = 2,
    Batching = 3,
    Dropout = 4,
    Sampling = 5,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Uniform Xavier/Glorot initialization in `[-b, b]`, `b = sqrt(6 / (rows + cols))`.
pub fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Tensor2> {
    if rows == 0 || cols == 0 {
        return Err(KgeError::InvalidArgument(format!(
            "xavier init needs non-zero extents, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Tensor2::from_vec(rows, cols, data)
}

/// Seeded convenience wrapper around [`xavier_uniform`].
pub fn xavier_init(rows: usize, cols: usize, seed: u64) -> Result<Tensor2> {
    xavier_uniform(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// A trainable tensor with its gradient and Adam moments.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub value: Tensor2,
    pub grad: Tensor2,
    pub m: Tensor2,
    pub v: Tensor2,
}

impl Parameter {
    pub fn new(value: Tensor2) -> Self {
        let (r, c) = value.shape();
        Parameter {
            value,
            grad: Tensor2::zeros(r, c),
            m: Tensor2::zeros(r, c),
            v: Tensor2::zeros(r, c),
        }
    }
}

/// Named parameters of a model, kept in name order so that iteration (and
/// therefore checkpoints) are deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    params: BTreeMap<String, Parameter>,
    step: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor2) {
        self.params.insert(name.into(), Parameter::new(value));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Parameter> {
        self.params
            .get(name)
            .ok_or_else(|| KgeError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Parameter> {
        self.params
            .get_mut(name)
            .ok_or_else(|| KgeError::UnknownParameter(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor2> {
        Ok(&self.get(name)?.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor2> {
        Ok(&mut self.get_mut(name)?.value)
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Tensor2> {
        Ok(&mut self.get_mut(name)?.grad)
    }

    /// Adds `g` into the gradient buffer of `name`.
    pub fn accumulate(&mut self, name: &str, g: &Tensor2) -> Result<()> {
        let p = self.get_mut(name)?;
        if !p.grad.same_shape(g) {
            return Err(KgeError::Shape(format!(
                "gradient for `{name}` is {:?}, parameter is {:?}",
                g.shape(),
                p.grad.shape()
            )));
        }
        p.grad.add_assign(g);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// Total number of stored scalars across all parameter values.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Number of scalars in parameters whose name starts with `prefix`.
    pub fn num_scalars_with_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, p)| p.value.len())
            .sum()
    }

    /// Copies parameter values (not optimizer state) from `other`.
    pub fn load_values_from(&mut self, other: &ParameterStore) -> Result<()> {
        for (name, p) in &mut self.params {
            let src = other.value(name)?;
            if !src.same_shape(&p.value) {
                return Err(KgeError::Shape(format!(
                    "`{name}`: stored {:?}, expected {:?}",
                    src.shape(),
                    p.value.shape()
                )));
            }
            p.value = src.clone();
        }
        Ok(())
    }
}
