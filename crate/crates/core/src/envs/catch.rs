use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid_action, Environment, Step};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatchSpec {
    pub height: usize,
    pub width: usize,
}

impl Default for CatchSpec {
    fn default() -> Self {
        Self { height: 24, width: 24 }
    }
}

impl CatchSpec {
    /// Paddle column at the start of every episode.
    pub fn paddle_start(&self) -> usize {
        self.width / 2
    }

    /// Steps from spawn to the terminal row.
    pub fn episode_steps(&self) -> usize {
        self.height - 1
    }
}

/// Ball on row `ball_row`, column `ball_col`; paddle on the bottom row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CatchState {
    pub ball_row: usize,
    pub ball_col: usize,
    pub paddle_col: usize,
}

/// A ball falls one row per step from a random column of the top row; the
/// paddle on the bottom row moves left, stays or moves right (0, 1, 2).
/// When the ball reaches the bottom row the episode ends with +1 if the
/// paddle is under it and −1 otherwise.
#[derive(Clone, Debug)]
pub struct Catch {
    spec: CatchSpec,
    rng: ChaCha8Rng,
    state: CatchState,
    done: bool,
}

impl Catch {
    pub fn new(spec: CatchSpec, seed: u64) -> Self {
        assert!(spec.height >= 2 && spec.width >= 1, "catch grid too small");
        let mut env = Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: CatchState {
                ball_row: 0,
                ball_col: 0,
                paddle_col: spec.paddle_start(),
            },
            done: true,
        };
        env.reset();
        env
    }

    /// Places the environment in an arbitrary mid-episode state.
    pub fn from_state(spec: CatchSpec, state: CatchState) -> Result<Self> {
        if state.ball_row >= spec.height - 1 || state.ball_col >= spec.width || state.paddle_col >= spec.width {
            return Err(Error::invalid(format!("catch state {state:?} outside the grid")));
        }
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(0),
            state,
            done: false,
        })
    }

    pub fn spec(&self) -> CatchSpec {
        self.spec
    }

    pub fn state(&self) -> CatchState {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps_remaining(&self) -> usize {
        self.spec.height - 1 - self.state.ball_row
    }

    fn render(&self) -> Tensor {
        let CatchSpec { height, width } = self.spec;
        let mut t = Tensor::zeros(&[1, height, width]);
        let d = t.data_mut();
        d[self.state.ball_row * width + self.state.ball_col] = 1.0;
        d[(height - 1) * width + self.state.paddle_col] = 1.0;
        t
    }
}

impl Environment for Catch {
    fn n_actions(&self) -> usize {
        3
    }

    fn frame_shape(&self) -> [usize; 3] {
        [1, self.spec.height, self.spec.width]
    }

    fn reset(&mut self) -> Tensor {
        self.state = CatchState {
            ball_row: 0,
            ball_col: self.rng.gen_range(0..self.spec.width),
            paddle_col: self.spec.paddle_start(),
        };
        self.done = false;
        self.render()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if action >= 3 {
            return Err(invalid_action(action, 3));
        }
        if self.done {
            return Err(Error::invalid("step called on a finished episode; reset first"));
        }
        let s = &mut self.state;
        s.paddle_col = match action {
            0 => s.paddle_col.saturating_sub(1),
            1 => s.paddle_col,
            _ => (s.paddle_col + 1).min(self.spec.width - 1),
        };
        s.ball_row += 1;
        let terminal = s.ball_row == self.spec.height - 1;
        let reward = match (terminal, s.ball_col == s.paddle_col) {
            (false, _) => 0.0,
            (true, true) => 1.0,
            (true, false) => -1.0,
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_renders_ball_and_paddle() {
        let mut env = Catch::new(CatchSpec::default(), 3);
        for _ in 0..20 {
            let obs = env.reset();
            assert_eq!(obs.shape(), [1, 24, 24]);
            assert_eq!(obs.data().iter().filter(|&&v| v != 0.0).count(), 2);
            assert!(obs.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn staying_under_the_ball_catches_it() {
        let spec = CatchSpec::default();
        let mut env = Catch::from_state(
            spec,
            CatchState {
                ball_row: 0,
                ball_col: 12,
                paddle_col: 12,
            },
        )
        .unwrap();
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            let s = env.step(1).unwrap();
            ret += s.reward;
            steps += 1;
            if s.terminal {
                break;
            }
        }
        assert_eq!(ret, 1.0);
        assert_eq!(steps, spec.episode_steps());
        assert!(env.step(1).is_err());
    }

    #[test]
    fn paddle_is_clamped_and_bad_actions_rejected() {
        let mut env = Catch::from_state(
            CatchSpec::default(),
            CatchState {
                ball_row: 0,
                ball_col: 5,
                paddle_col: 0,
            },
        )
        .unwrap();
        env.step(0).unwrap();
        assert_eq!(env.state().paddle_col, 0);
        assert!(env.step(3).is_err());
    }

    #[test]
    fn same_seed_same_spawns() {
        let mut a = Catch::new(CatchSpec::default(), 9);
        let mut b = Catch::new(CatchSpec::default(), 9);
        for _ in 0..10 {
            assert_eq!(a.reset(), b.reset());
        }
    }
}
