use std::collections::VecDeque;

use rand::Rng;

/// One stored interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Network input features at decision time.
    pub observation: Vec<f64>,
    /// Chosen index per head of the source xApp.
    pub actions: Vec<usize>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub done: bool,
    /// Per-head teacher Q-vectors, recorded during distillation collection.
    pub teacher_q: Option<Vec<Vec<f64>>>,
    /// Index of the producing xApp in the owning buffer's source list.
    pub source: u16,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
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

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform sample of `n` distinct transitions (fewer if the buffer is
    /// smaller).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

impl Extend<Transition> for ReplayBuffer {
    fn extend<I: IntoIterator<Item = Transition>>(&mut self, iter: I) {
        for t in iter {
            self.push(t);
        }
    }
}
