//! GridView maze: shortest-path agent versus uniformly random play, and the
//! rendered 24×24 observation.
//!
//! cargo run --example gridview_rollout -- [seed]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdqn::envs::{Environment, GridView, GridViewSpec};
use sdqn::numerics::Tensor;
use sdqn::rl::evaluate_policy;

fn draw(obs: &Tensor) {
    let n = obs.shape()[2];
    for row in obs.data().chunks(n) {
        let line: String = row
            .iter()
            .map(|&v| match v {
                0.0 => ' ',
                v if v < 0.5 => '#',
                v if v < 0.9 => 'G',
                _ => 'A',
            })
            .collect();
        println!("|{line}|");
    }
}

/// First action of a shortest path to the goal (up, down, left, right).
fn toward_goal(env: &GridView) -> usize {
    let n = env.spec().size;
    let start = env.agent();
    let mut first = vec![None; n * n];
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::from([start]);
    seen[start.0 * n + start.1] = true;
    while let Some((r, c)) = queue.pop_front() {
        if (r, c) == env.goal() {
            return first[r * n + c].unwrap_or(0);
        }
        let moves = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for (a, &(nr, nc)) in moves.iter().enumerate() {
            if env.is_open(nr, nc) && !seen[nr * n + nc] {
                seen[nr * n + nc] = true;
                first[nr * n + nc] = Some(first[r * n + c].unwrap_or(a));
                queue.push_back((nr, nc));
            }
        }
    }
    0
}

fn main() -> sdqn::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(Ok(0), |s| s.parse())
        .expect("seed must be an integer");
    let mut env = GridView::new(GridViewSpec::default(), seed);
    let obs = env.reset();
    println!("agent {:?}, goal {:?}", env.agent(), env.goal());
    draw(&obs);

    let mut ret = 0.0;
    let mut steps = 0;
    loop {
        let step = env.step(toward_goal(&env))?;
        ret += step.reward;
        steps += 1;
        if step.terminal {
            break;
        }
    }
    println!("shortest-path agent: {steps} steps, return {ret:.2}");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = evaluate_policy(&mut env, 4, 20, seed, |_| Ok(rng.gen_range(0..4)))?;
    println!("random play over 20 episodes: {:.3} ± {:.3}", random.mean, random.std);
    Ok(())
}
