//! Shared test oracles.

#![allow(dead_code)]

pub mod gradcheck;
pub mod tape;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdqn::lif::LifParams;
use sdqn::numerics::{ConvSpec, Tensor};
use sdqn::qnet::{Architecture, PbLnPlacement};

/// Two small conv layers, FC 8, three actions, four steps.
pub fn tiny_arch(pbln: PbLnPlacement) -> Architecture {
    Architecture {
        input_shape: [2, 6, 6],
        conv_specs: vec![ConvSpec::new(2, 2, 3, 1), ConvSpec::new(2, 3, 2, 2)],
        fc_width: 8,
        n_actions: 3,
        time_window: 4,
        lif: LifParams::default(),
        pbln,
    }
}

pub fn uniform_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a − b| ≤ rel·max(|a|, |b|) + abs`
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

/// Largest relative discrepancy over paired slices, with `floor` guarding
/// against division by values that are zero in both.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
