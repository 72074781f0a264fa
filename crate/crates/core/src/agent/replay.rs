use rand::Rng;

use super::state::{ActionIndex, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: ActionIndex,
    pub reward: f64,
    pub next_state: StateVector,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    min_size: usize,
    /// Slot the next push writes once the ring is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, min_size: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, min_size, head: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn ready(&self) -> bool {
        self.items.len() >= self.min_size
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform draw with replacement of storage slots.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Result<Vec<usize>> {
        if !self.ready() || self.items.is_empty() {
            return Err(Error::Usage(format!("replay buffer holds {} transitions, sampling needs {}", self.items.len(), self.min_size)));
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Result<Vec<&Transition>> {
        Ok(self.sample_indices(rng, batch)?.into_iter().map(|i| &self.items[i]).collect())
    }
}
