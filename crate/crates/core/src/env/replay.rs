use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action::HybridAction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: HybridAction,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    records: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, records: Vec::with_capacity(capacity.min(4096)), next: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stores a transition, overwriting the oldest once full.
    pub fn push(&mut self, t: Transition) {
        if self.records.len() < self.capacity {
            self.records.push(t);
        } else {
            self.records[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform draw of min(n, len) distinct records.
    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        let n = n.min(self.records.len());
        index::sample(rng, self.records.len(), n).into_iter().map(|i| &self.records[i]).collect()
    }

    /// Two disjoint uniform draws (support and validation batches).
    pub fn sample_split<'a>(
        &'a self,
        n_first: usize,
        n_second: usize,
        rng: &mut impl Rng,
    ) -> (Vec<&'a Transition>, Vec<&'a Transition>) {
        let total = (n_first + n_second).min(self.records.len());
        let idx = index::sample(rng, self.records.len(), total).into_vec();
        let cut = n_first.min(total);
        (
            idx[..cut].iter().map(|&i| &self.records[i]).collect(),
            idx[cut..].iter().map(|&i| &self.records[i]).collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.records.iter()
    }
}
