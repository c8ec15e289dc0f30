//! Potential-based layer normalization on a weak postsynaptic potential map:
//! the raw map never reaches threshold, the normalized one does.
//!
//! cargo run --example pbln_normalization

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdqn::lif::{lif_step, LifLayerState, LifParams};
use sdqn::numerics::{mean_and_variance, Tensor};
use sdqn::pbln::{pbln_forward, pbln_init, pbln_lif_step};

fn main() -> sdqn::Result<()> {
    let lif = LifParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = [4, 6, 6];
    let n: usize = shape.iter().product();
    // A PSP ten times too small to drive the neurons on its own.
    let x = Tensor::new(&shape, (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect())?;
    let p = pbln_init(&lif, shape[0])?;
    let (y, cache) = pbln_forward(&x, &p)?;
    let (m, v) = mean_and_variance(&x)?;
    let x_hat = Tensor::new(&shape, cache.x_hat.clone())?;
    let (mh, vh) = mean_and_variance(&x_hat)?;
    println!("raw PSP:        mean {m:+.4}  variance {v:.5}");
    println!("normalized x̂:   mean {mh:+.2e}  variance {vh:.6}");
    let (my, vy) = mean_and_variance(&y)?;
    println!(
        "after λ, β:     mean {my:+.4}  variance {vy:.4}  (λ = {}, β = {})",
        p.lambda.data()[0],
        p.beta.data()[0]
    );

    let mut raw = LifLayerState::resting(&shape, &lif);
    let mut normed = raw.clone();
    let (mut raw_spikes, mut norm_spikes) = (0.0, 0.0);
    for _ in 0..16 {
        raw = lif_step(&raw, &x, &lif)?;
        normed = pbln_lif_step(&normed, &x, &lif, &p)?;
        raw_spikes += raw.o.sum();
        norm_spikes += normed.o.sum();
    }
    println!(
        "spikes over 16 steps: raw {raw_spikes}, pbLN {norm_spikes} (of {} neuron-steps)",
        n * 16
    );
    Ok(())
}
