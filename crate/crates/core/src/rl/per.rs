//! Prioritised replay: a sum tree over `p^alpha` and a ring buffer of
//! transitions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: [f64; 4],
    pub action: f64,
    pub reward: f64,
    pub next_state: [f64; 4],
    pub done: bool,
}

/// Binary tree of partial sums. Leaves live at `capacity..2*capacity`; node 0
/// is unused and node 1 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 || !capacity.is_power_of_two() {
            return Err(Error::Argument(format!("sum tree capacity {capacity} is not a power of two")));
        }
        Ok(SumTree {
            capacity,
            nodes: vec![0.0; 2 * capacity],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    /// Sets a leaf and recomputes every ancestor from its two children.
    pub fn set(&mut self, leaf: usize, value: f64) {
        let mut i = self.capacity + leaf;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass`, for `mass` in
    /// `[0, total)`. Never returns a zero-weight leaf while the total is
    /// positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut i = 1;
        let mut mass = mass;
        while i < self.capacity {
            let left = self.nodes[2 * i];
            let right = self.nodes[2 * i + 1];
            if (mass < left || right <= 0.0) && left > 0.0 {
                i *= 2;
            } else {
                mass -= left;
                i = 2 * i + 1;
            }
        }
        i - self.capacity
    }

    /// Largest relative mismatch between a parent and the sum of its children.
    pub fn max_node_error(&self) -> f64 {
        (1..self.capacity)
            .map(|i| {
                let sum = self.nodes[2 * i] + self.nodes[2 * i + 1];
                (self.nodes[i] - sum).abs() / sum.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerSample {
    pub indices: Vec<usize>,
    pub transitions: Vec<Transition>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerBuffer {
    tree: SumTree,
    data: Vec<Transition>,
    next: usize,
    pub alpha: f64,
    pub epsilon: f64,
    max_priority: f64,
}

impl PerBuffer {
    pub fn new(capacity: usize, alpha: f64, epsilon: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(epsilon > 0.0) {
            return Err(Error::Argument(format!("invalid PER alpha {alpha} / epsilon {epsilon}")));
        }
        Ok(PerBuffer {
            tree: SumTree::new(capacity)?,
            data: Vec::new(),
            next: 0,
            alpha,
            epsilon,
            max_priority: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.tree.capacity()
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    /// Stores `t` at the running maximum priority, overwriting the oldest
    /// entry once full.
    pub fn insert(&mut self, t: Transition) {
        let slot = self.next;
        if slot == self.data.len() {
            self.data.push(t);
        } else {
            self.data[slot] = t;
        }
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.next = (self.next + 1) % self.capacity();
    }

    /// Sampling probability of slot `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    /// `k` independent proportional draws with importance weights
    /// `(N * P(i))^-beta`, scaled so the largest weight in the batch is 1.
    pub fn sample<R: Rng>(&self, k: usize, beta: f64, rng: &mut R) -> Result<PerSample> {
        if self.is_empty() {
            return Err(Error::Usage("cannot sample from an empty replay buffer".into()));
        }
        if k == 0 || k > self.len() {
            return Err(Error::Usage(format!("batch of {k} from a buffer holding {}", self.len())));
        }
        let total = self.tree.total();
        let n = self.len() as f64;
        let mut indices = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        for _ in 0..k {
            let i = self.tree.find(rng.random::<f64>() * total).min(self.len() - 1);
            indices.push(i);
            weights.push((n * self.probability(i)).powf(-beta));
        }
        let w_max = weights.iter().cloned().fold(0.0, f64::max);
        for w in &mut weights {
            *w /= w_max;
        }
        let transitions = indices.iter().map(|&i| self.data[i].clone()).collect();
        Ok(PerSample {
            indices,
            transitions,
            weights,
        })
    }

    /// Resets priorities to `|td| + epsilon` for the given slots.
    pub fn update(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::Shape(format!("{} indices but {} td errors", indices.len(), td_errors.len())));
        }
        for (&i, &td) in indices.iter().zip(td_errors) {
            if !td.is_finite() {
                return Err(Error::Argument(format!("non-finite td error {td}")));
            }
            if i >= self.len() {
                return Err(Error::Argument(format!("replay index {i} out of range")));
            }
            let p = td.abs() + self.epsilon;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.alpha));
        }
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.data.get(i)
    }
}
