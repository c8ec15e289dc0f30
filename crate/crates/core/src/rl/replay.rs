use std::collections::VecDeque;

use rand::Rng;

use crate::envs::StackedFrames;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// One `(s, a, r, s', terminal)` sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Tensor,
    pub action: usize,
    pub reward: f64,
    pub next_state: Tensor,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
struct Record {
    state: StackedFrames,
    action: usize,
    reward: f64,
    next_state: StackedFrames,
    terminal: bool,
}

impl Record {
    fn materialize(&self) -> Transition {
        Transition {
            state: self.state.to_tensor(),
            action: self.action,
            reward: self.reward,
            next_state: self.next_state.to_tensor(),
            terminal: self.terminal,
        }
    }
}

/// Bounded FIFO of transitions. Frames pushed through [`ReplayBuffer::push_stacked`]
/// are shared between consecutive observations, so memory grows with one frame
/// per transition rather than one stack.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Record>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
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

    fn insert(&mut self, r: Record) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(r);
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        self.insert(Record {
            state: StackedFrames::whole(t.state),
            action: t.action,
            reward: t.reward,
            next_state: StackedFrames::whole(t.next_state),
            terminal: t.terminal,
        });
    }

    pub fn push_stacked(
        &mut self,
        state: StackedFrames,
        action: usize,
        reward: f64,
        next_state: StackedFrames,
        terminal: bool,
    ) {
        self.insert(Record {
            state,
            action,
            reward,
            next_state,
            terminal,
        });
    }

    /// Transition at position `i`, oldest first.
    pub fn get(&self, i: usize) -> Option<Transition> {
        self.items.get(i).map(Record::materialize)
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| self.items[i].materialize())
            .collect())
    }

    /// Positions that [`ReplayBuffer::sample`] would return for the same generator state.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::Underfilled {
                have: self.items.len(),
                want: n.max(1),
            });
        }
        Ok((0..n).map(|_| rng.gen_range(0..self.items.len())).collect())
    }
}
