use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::Tensor4;

/// Where a pool answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolChoice {
    Fresh,
    Stored(usize),
}

/// History buffer of generated samples shown to the discriminator.
#[derive(Debug, Clone)]
pub struct ImagePool {
    capacity: usize,
    buffer: Vec<Tensor4>,
    rng: ChaCha8Rng,
}

impl ImagePool {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self { capacity, buffer: Vec::with_capacity(capacity), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn query(&mut self, fresh: Tensor4) -> Tensor4 {
        self.query_traced(fresh).0
    }

    /// While filling, stores and returns `fresh`. Once full, returns `fresh`
    /// with probability 1/2, otherwise swaps it for a uniformly chosen stored sample.
    pub fn query_traced(&mut self, fresh: Tensor4) -> (Tensor4, PoolChoice) {
        if self.capacity == 0 {
            return (fresh, PoolChoice::Fresh);
        }
        if self.buffer.len() < self.capacity {
            self.buffer.push(fresh.clone());
            return (fresh, PoolChoice::Fresh);
        }
        if self.rng.random_bool(0.5) {
            let i = self.rng.random_range(0..self.buffer.len());
            (std::mem::replace(&mut self.buffer[i], fresh), PoolChoice::Stored(i))
        } else {
            (fresh, PoolChoice::Fresh)
        }
    }
}
