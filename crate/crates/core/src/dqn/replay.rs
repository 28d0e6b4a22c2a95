use rand::Rng;

use crate::env::Observation;
use crate::rng::SeededRng;

/// `(s, a, r, s', terminal)` as executed in the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    /// True only for goal/hazard endings; time-limit truncation bootstraps.
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buffer: Vec<Transition>,
    capacity: usize,
    initial_size: usize,
    next: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, initial_size: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            buffer: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            initial_size,
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() < self.capacity {
            self.buffer.push(t);
        } else {
            self.buffer[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Enough transitions stored for training to begin.
    pub fn is_ready(&self) -> bool {
        !self.buffer.is_empty() && self.buffer.len() >= self.initial_size
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<&Transition> {
        (0..n)
            .map(|_| &self.buffer[rng.gen_range(0..self.buffer.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }
}
