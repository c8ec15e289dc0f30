//! Backpropagation through time against central finite differences on a tiny
//! network. With smooth spikes the surrogate is the true derivative, so the
//! two must agree.
//!
//! cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdqn::learn::bptt;
use sdqn::lif::LifParams;
use sdqn::numerics::{ConvSpec, Tensor};
use sdqn::qnet::{forward_with, init_params, Architecture, NetworkParams, PbLnPlacement, SpikeMode};

fn loss(x: &Tensor, p: &NetworkParams, arch: &Architecture, c: &[f64]) -> sdqn::Result<f64> {
    let (q, _) = forward_with(x, p, arch, SpikeMode::Smooth)?;
    Ok(q.data().iter().zip(c).map(|(a, b)| a * b).sum())
}

fn main() -> sdqn::Result<()> {
    let arch = Architecture {
        input_shape: [2, 6, 6],
        conv_specs: vec![ConvSpec::new(2, 3, 3, 1), ConvSpec::new(3, 4, 2, 2)],
        fc_width: 8,
        n_actions: 3,
        time_window: 6,
        lif: LifParams::default(),
        pbln: PbLnPlacement::CONV_ONLY,
    };
    let mut params = init_params(&arch, 11)?;
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v *= 3.0;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Tensor::new(&arch.input_shape, (0..72).map(|_| rng.gen_range(0.0..1.0)).collect())?;
    let c = [1.0, -0.5, 0.25];
    let (_, trace) = forward_with(&x, &params, &arch, SpikeMode::Smooth)?;
    let grads = bptt(&trace, &c, &params, &arch)?;
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let h = 1e-6;
    println!("{:<16} {:>8} {:>12}", "tensor", "elements", "max rel err");
    for (ti, (name, g)) in names.iter().zip(grads.tensors()).enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data_mut()[i] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data_mut()[i] -= h;
            let fd = (loss(&x, &plus, &arch, &c)? - loss(&x, &minus, &arch, &c)?) / (2.0 * h);
            let ga = g.data()[i];
            worst = worst.max((fd - ga).abs() / (1e-6 + fd.abs().max(ga.abs())));
        }
        println!("{name:<16} {:>8} {worst:>12.2e}", g.len());
    }
    Ok(())
}
