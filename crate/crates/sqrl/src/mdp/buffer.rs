use std::collections::VecDeque;

use crate::error::{Result, SqrlError};
use crate::mdp::RngStream;

/// Fixed-capacity FIFO replay buffer with uniform, with-replacement sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    /// Panics if `capacity == 0`.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Append, evicting the oldest item when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = T>) {
        for item in items {
            self.push(item);
        }
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// Draw `batch_size` items uniformly with replacement.
    ///
    /// Fails rather than returning a short batch when fewer than
    /// `batch_size` items are stored.
    pub fn sample(&self, batch_size: usize, rng: &mut RngStream) -> Result<Vec<&T>> {
        if self.items.len() < batch_size || self.items.is_empty() {
            return Err(SqrlError::Underfull {
                size: self.items.len(),
                batch: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.below(self.items.len())])
            .collect())
    }
}
