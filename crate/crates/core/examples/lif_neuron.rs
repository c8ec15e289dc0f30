//! One LIF neuron under constant drive: potential, spikes and the surrogate
//! derivative used in training.
//!
//! cargo run --example lif_neuron -- [drive]

use sdqn::lif::{lif_step, LifLayerState, LifParams};
use sdqn::numerics::Tensor;

fn main() -> sdqn::Result<()> {
    let drive: f64 = std::env::args()
        .nth(1)
        .map_or(Ok(1.5), |s| s.parse())
        .expect("drive must be a number");
    let p = LifParams::default();
    let x = Tensor::vector(&[drive])?;
    let mut state = LifLayerState::resting(&[1], &p);
    println!(
        "tau {} v_th {} v_reset {} alpha {}, drive {drive}",
        p.tau,
        p.v_th,
        p.v_reset,
        p.alpha()
    );
    println!("{:>2}  {:>8}  {:>5}  {:>10}", "t", "u", "spike", "surrogate");
    let mut spikes = 0.0;
    for t in 0..16 {
        let before = state.u.data()[0];
        state = lif_step(&state, &x, &p)?;
        let a = p.alpha() * before + (1.0 - p.alpha()) * drive;
        spikes += state.o.data()[0];
        println!("{t:>2}  {:>8.5}  {:>5}  {:>10.5}", a, state.o.data()[0], p.surrogate(a));
    }
    println!("firing rate over 16 steps: {:.4}", spikes / 16.0);
    Ok(())
}
