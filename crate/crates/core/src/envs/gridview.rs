use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid_action, Environment, Step};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const WALL: f64 = 0.4;
pub const GOAL: f64 = 0.7;
pub const AGENT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridViewSpec {
    pub size: usize,
    pub horizon: usize,
    pub step_penalty: f64,
    pub goal_reward: f64,
    /// Seed of the maze layout, which stays fixed across episodes.
    pub maze_seed: u64,
}

impl Default for GridViewSpec {
    fn default() -> Self {
        Self {
            size: 24,
            horizon: 200,
            step_penalty: -0.01,
            goal_reward: 1.0,
            maze_seed: 7,
        }
    }
}

/// Perfect maze carved by randomized depth-first search on the odd pixel
/// lattice. `true` marks open floor.
fn carve(size: usize, seed: u64) -> Vec<bool> {
    let mut open = vec![false; size * size];
    let cells = (size - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visited = vec![false; cells * cells];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    open[size + 1] = true;
    while let Some(&(r, c)) = stack.last() {
        let mut nbrs = Vec::with_capacity(4);
        if r > 0 && !visited[(r - 1) * cells + c] {
            nbrs.push((r - 1, c));
        }
        if r + 1 < cells && !visited[(r + 1) * cells + c] {
            nbrs.push((r + 1, c));
        }
        if c > 0 && !visited[r * cells + c - 1] {
            nbrs.push((r, c - 1));
        }
        if c + 1 < cells && !visited[r * cells + c + 1] {
            nbrs.push((r, c + 1));
        }
        match nbrs.choose(&mut rng) {
            Some(&(nr, nc)) => {
                visited[nr * cells + nc] = true;
                let (pr, pc) = (2 * r + 1, 2 * c + 1);
                let (qr, qc) = (2 * nr + 1, 2 * nc + 1);
                open[((pr + qr) / 2) * size + (pc + qc) / 2] = true;
                open[qr * size + qc] = true;
                stack.push((nr, nc));
            }
            None => {
                stack.pop();
            }
        }
    }
    open
}

/// Agent (one pixel) walks a fixed maze towards a goal pixel in the far
/// corner. Actions: up, down, left, right; moves into walls leave the agent
/// in place. Each non-goal step costs `step_penalty`, reaching the goal pays
/// `goal_reward` and ends the episode, which is otherwise cut at `horizon`.
#[derive(Clone, Debug)]
pub struct GridView {
    spec: GridViewSpec,
    open: Vec<bool>,
    free: Vec<usize>,
    goal: usize,
    agent: usize,
    t: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl GridView {
    pub fn new(spec: GridViewSpec, seed: u64) -> Self {
        assert!(spec.size >= 5, "maze too small");
        let open = carve(spec.size, spec.maze_seed);
        let cells = (spec.size - 1) / 2;
        let goal = (2 * cells - 1) * spec.size + 2 * cells - 1;
        let free = (0..open.len()).filter(|&i| open[i] && i != goal).collect();
        let mut env = Self {
            spec,
            open,
            free,
            goal,
            agent: 0,
            t: 0,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        env.reset();
        env
    }

    pub fn spec(&self) -> GridViewSpec {
        self.spec
    }

    pub fn agent(&self) -> (usize, usize) {
        (self.agent / self.spec.size, self.agent % self.spec.size)
    }

    pub fn goal(&self) -> (usize, usize) {
        (self.goal / self.spec.size, self.goal % self.spec.size)
    }

    pub fn is_open(&self, row: usize, col: usize) -> bool {
        row < self.spec.size && col < self.spec.size && self.open[row * self.spec.size + col]
    }

    /// Puts the agent on a chosen open pixel at the start of an episode.
    pub fn place_agent(&mut self, row: usize, col: usize) -> Result<()> {
        if !self.is_open(row, col) || row * self.spec.size + col == self.goal {
            return Err(Error::invalid(format!("({row}, {col}) is not an open non-goal pixel")));
        }
        self.agent = row * self.spec.size + col;
        self.t = 0;
        self.done = false;
        Ok(())
    }

    fn render(&self) -> Tensor {
        let n = self.spec.size;
        let data = (0..n * n)
            .map(|i| {
                if i == self.agent {
                    AGENT
                } else if i == self.goal {
                    GOAL
                } else if self.open[i] {
                    0.0
                } else {
                    WALL
                }
            })
            .collect();
        Tensor::from_parts(vec![1, n, n], data)
    }
}

impl Environment for GridView {
    fn n_actions(&self) -> usize {
        4
    }

    fn frame_shape(&self) -> [usize; 3] {
        [1, self.spec.size, self.spec.size]
    }

    fn reset(&mut self) -> Tensor {
        self.agent = self.free[self.rng.gen_range(0..self.free.len())];
        self.t = 0;
        self.done = false;
        self.render()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if action >= 4 {
            return Err(invalid_action(action, 4));
        }
        if self.done {
            return Err(Error::invalid("step called on a finished episode; reset first"));
        }
        let n = self.spec.size;
        let (r, c) = self.agent();
        let (nr, nc) = match action {
            0 => (r.wrapping_sub(1), c),
            1 => (r + 1, c),
            2 => (r, c.wrapping_sub(1)),
            _ => (r, c + 1),
        };
        if self.is_open(nr, nc) {
            self.agent = nr * n + nc;
        }
        self.t += 1;
        let (reward, terminal) = if self.agent == self.goal {
            (self.spec.goal_reward, true)
        } else {
            (self.spec.step_penalty, self.t >= self.spec.horizon)
        };
        self.done = terminal;
        Ok(Step {
            observation: self.render(),
            reward,
            terminal,
        })
    }

    fn observe(&self) -> Tensor {
        self.render()
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}
