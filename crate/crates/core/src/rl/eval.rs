use serde::{Deserialize, Serialize};

use crate::envs::{Environment, FrameStack};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::qnet::{Architecture, NetworkParams, Simulator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation of the episode returns.
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalResult {
    pub fn from_returns(returns: Vec<f64>) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Empty("episode returns"));
        }
        let (mean, var) = crate::numerics::mean_var_raw(&returns);
        Ok(Self {
            mean,
            std: var.sqrt(),
            returns,
        })
    }
}

/// Runs `episodes` episodes with an arbitrary policy over stacked observations.
/// The environment is reseeded with `seed` first.
pub fn evaluate_policy<F>(
    env: &mut dyn Environment,
    n_stack: usize,
    episodes: usize,
    seed: u64,
    mut policy: F,
) -> Result<EvalResult>
where
    F: FnMut(&Tensor) -> Result<usize>,
{
    if episodes == 0 {
        return Err(Error::invalid("evaluation needs at least one episode"));
    }
    env.seed(seed);
    let mut stack = FrameStack::new(n_stack)?;
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = stack.reset(env.reset())?.to_tensor();
        let mut ret = 0.0;
        loop {
            let step = env.step(policy(&obs)?)?;
            ret += step.reward;
            if step.terminal {
                break;
            }
            obs = stack.push(step.observation)?.to_tensor();
        }
        returns.push(ret);
    }
    EvalResult::from_returns(returns)
}

/// Greedy (ε = 0) rollouts of the spiking Q network.
pub fn evaluate(
    params: &NetworkParams,
    arch: &Architecture,
    env: &mut dyn Environment,
    episodes: usize,
    seed: u64,
) -> Result<EvalResult> {
    let mut sim = Simulator::new();
    evaluate_policy(env, arch.input_shape[0], episodes, seed, |obs| {
        Ok(sim.q_values(obs, params, arch)?.argmax())
    })
}
