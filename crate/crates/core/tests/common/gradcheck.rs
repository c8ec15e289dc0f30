//! Gradient checks shared by the gradient tests and the acceptance run:
//! every hand-written adjoint against central differences, and full BPTT
//! against an independently unrolled scalar graph.

use rand::Rng;
use sdqn::learn::bptt;
use sdqn::lif::LifParams;
use sdqn::numerics::{conv2d_backward, conv2d_forward, linear_backward, linear_forward, ConvSpec, Tensor};
use sdqn::pbln::{pbln_backward, pbln_forward, pbln_init, PbLnParams};
use sdqn::qnet::{forward, forward_with, init_params, Architecture, NetworkParams, PbLnPlacement, SpikeMode};

use super::tape::unrolled_gradients;
use super::{close, max_rel_err, rng, tiny_arch, uniform_tensor};

/// Largest error seen and where it occurred.
#[derive(Debug, Default)]
pub struct Worst {
    pub error: f64,
    pub at: String,
}

impl Worst {
    fn note(&mut self, e: f64, at: impl FnOnce() -> String) {
        if e > self.error || e.is_nan() {
            self.error = e;
            self.at = at();
        }
    }
}

fn dot(a: &Tensor, c: &[f64]) -> f64 {
    a.data().iter().zip(c).map(|(x, y)| x * y).sum()
}

/// Central differences of `f` at every element of `x`.
fn numeric_grad(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.clone();
            p.data_mut()[i] += h;
            let mut m = x.clone();
            m.data_mut()[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn random_conv(r: &mut impl Rng) -> (ConvSpec, [usize; 3]) {
    let k = r.gen_range(1..=3);
    let spec =
        ConvSpec::new(r.gen_range(1..=3), r.gen_range(1..=3), k, r.gen_range(1..=2)).with_padding(r.gen_range(0..=1));
    let h = r.gen_range(k..=7);
    let w = r.gen_range(k..=7);
    (spec, [spec.in_channels, h, w])
}

/// Worst relative error of `conv2d_backward` over 20 random instances.
pub fn conv_worst() -> Worst {
    let mut r = rng(1);
    let mut worst = Worst::default();
    for case in 0..20 {
        let (spec, shape) = random_conv(&mut r);
        let x = uniform_tensor(&shape, -1.0, 1.0, &mut r);
        let k = uniform_tensor(&spec.kernel_shape(), -1.0, 1.0, &mut r);
        let out = conv2d_forward(&x, &k, &spec).unwrap();
        let c: Vec<f64> = (0..out.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let g = Tensor::new(out.shape(), c.clone()).unwrap();
        let (gx, gk) = conv2d_backward(&g, &x, &k, &spec).unwrap();
        let fx = numeric_grad(&x, 1e-5, |x| dot(&conv2d_forward(x, &k, &spec).unwrap(), &c));
        let fk = numeric_grad(&k, 1e-5, |k| dot(&conv2d_forward(&x, k, &spec).unwrap(), &c));
        let ex = max_rel_err(gx.data(), &fx, 1e-8);
        let ek = max_rel_err(gk.data(), &fk, 1e-8);
        worst.note(ex.max(ek), || {
            format!("case {case} {spec:?} {shape:?}: input {ex}, kernel {ek}")
        });
    }
    worst
}

/// Worst relative error of `linear_backward` over 20 random instances.
pub fn linear_worst() -> Worst {
    let mut r = rng(2);
    let mut worst = Worst::default();
    for case in 0..20 {
        let (m, n) = (r.gen_range(1..=6), r.gen_range(1..=9));
        let x = uniform_tensor(&[n], -1.0, 1.0, &mut r);
        let w = uniform_tensor(&[m, n], -1.0, 1.0, &mut r);
        let c: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
        let g = Tensor::new(&[m], c.clone()).unwrap();
        let (gx, gw) = linear_backward(&g, &x, &w).unwrap();
        let fx = numeric_grad(&x, 1e-5, |x| dot(&linear_forward(x, &w).unwrap(), &c));
        let fw = numeric_grad(&w, 1e-5, |w| dot(&linear_forward(&x, w).unwrap(), &c));
        let ex = max_rel_err(gx.data(), &fx, 1e-8);
        let ew = max_rel_err(gw.data(), &fw, 1e-8);
        worst.note(ex.max(ew), || {
            format!("case {case} [{m},{n}]: input {ex}, weights {ew}")
        });
    }
    worst
}

fn pbln_loss(x: &Tensor, p: &PbLnParams, c: &[f64]) -> f64 {
    dot(&pbln_forward(x, p).unwrap().0, c)
}

/// Worst relative error of `pbln_backward` over 20 random instances.
pub fn pbln_worst() -> Worst {
    let mut r = rng(3);
    let mut worst = Worst::default();
    for case in 0..20 {
        let ch = r.gen_range(1..=3);
        let shape = [ch, r.gen_range(1..=4), r.gen_range(2..=4)];
        let x = uniform_tensor(&shape, -2.0, 2.0, &mut r);
        let mut p = pbln_init(&LifParams::default(), ch).unwrap();
        p.lambda = uniform_tensor(&[ch], 0.5, 1.5, &mut r);
        p.beta = uniform_tensor(&[ch], -0.5, 0.5, &mut r);
        let c: Vec<f64> = (0..x.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (_, cache) = pbln_forward(&x, &p).unwrap();
        let g = Tensor::new(&shape, c.clone()).unwrap();
        let (gx, gl, gb) = pbln_backward(&g, &cache, &p).unwrap();

        let h = 1e-5;
        let fx = numeric_grad(&x, h, |x| pbln_loss(x, &p, &c));
        let fl = numeric_grad(&p.lambda, h, |l| {
            pbln_loss(
                &x,
                &PbLnParams {
                    lambda: l.clone(),
                    ..p.clone()
                },
                &c,
            )
        });
        let fb = numeric_grad(&p.beta, h, |b| {
            pbln_loss(
                &x,
                &PbLnParams {
                    beta: b.clone(),
                    ..p.clone()
                },
                &c,
            )
        });
        for (what, a, n) in [
            ("x", gx.data(), &fx),
            ("lambda", gl.data(), &fl),
            ("beta", gb.data(), &fb),
        ] {
            let e = max_rel_err(a, n, 1e-6);
            worst.note(e, || format!("case {case} {shape:?}: grad {what} error {e}"));
        }
    }
    worst
}

fn scaled_params(arch: &Architecture, seed: u64, scale: f64) -> NetworkParams {
    let mut params = init_params(arch, seed).unwrap();
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v *= scale;
        }
    }
    params
}

fn smooth_loss(x: &Tensor, p: &NetworkParams, arch: &Architecture, c: &[f64]) -> f64 {
    dot(&forward_with(x, p, arch, SpikeMode::Smooth).unwrap().0, c)
}

/// With the smooth spike the surrogate is the true derivative, so BPTT must
/// agree with central differences of the network output.
pub fn smooth_bptt_worst() -> Worst {
    let mut overall = Worst::default();
    let placements = [
        PbLnPlacement::OFF,
        PbLnPlacement::CONV_ONLY,
        PbLnPlacement { conv: true, fc: true },
    ];
    for pbln in placements {
        let arch = tiny_arch(pbln);
        for seed in 0..3 {
            let params = scaled_params(&arch, seed, 3.0);
            let x = uniform_tensor(&arch.input_shape, 0.0, 1.0, &mut rng(seed + 100));
            let c = [0.7, -1.3, 0.4];
            let (_, trace) = forward_with(&x, &params, &arch, SpikeMode::Smooth).unwrap();
            let grads = bptt(&trace, &c, &params, &arch).unwrap();
            let h = 1e-6;
            let mut worst: f64 = 0.0;
            for (ti, g) in grads.tensors().iter().enumerate() {
                for (i, &ga) in g.data().iter().enumerate() {
                    let mut plus = params.clone();
                    plus.tensors_mut()[ti].data_mut()[i] += h;
                    let mut minus = params.clone();
                    minus.tensors_mut()[ti].data_mut()[i] -= h;
                    let fd = (smooth_loss(&x, &plus, &arch, &c) - smooth_loss(&x, &minus, &arch, &c)) / (2.0 * h);
                    worst = worst.max((fd - ga).abs() / (1e-6 + fd.abs().max(ga.abs())));
                }
            }
            overall.note(worst, || format!("pbln {pbln:?} seed {seed}"));
        }
    }
    overall
}

/// Binary spikes and the surrogate derivative, checked against the scalar
/// tape on plain, padded and fully normalized variants of the tiny network.
/// Returns the worst gradient error and the number of instances compared.
pub fn heaviside_bptt_worst() -> (Worst, usize) {
    let mut worst = Worst::default();
    let mut padded = tiny_arch(PbLnPlacement::CONV_ONLY);
    padded.conv_specs = vec![
        ConvSpec::new(2, 2, 3, 1).with_padding(1),
        ConvSpec::new(2, 3, 3, 2).with_padding(1),
    ];
    let variants = [
        tiny_arch(PbLnPlacement::OFF),
        tiny_arch(PbLnPlacement::CONV_ONLY),
        tiny_arch(PbLnPlacement { conv: true, fc: true }),
        padded,
    ];
    let mut compared = 0;
    for (v, arch) in variants.iter().enumerate() {
        for seed in 0..4u64 {
            let params = scaled_params(arch, seed, 3.0);
            let mut r = rng(1000 + seed);
            let x = uniform_tensor(&arch.input_shape, 0.0, 1.0, &mut r);
            let c: Vec<f64> = (0..arch.n_actions).map(|_| r.gen_range(-1.0..1.0)).collect();
            let oracle = unrolled_gradients(&x, &params, arch, &c);
            if oracle.min_margin < 1e-9 {
                continue;
            }
            let (q, trace) = forward(&x, &params, arch).unwrap();
            for (a, b) in q.data().iter().zip(&oracle.q) {
                if !close(*a, *b, 1e-12, 1e-14) {
                    worst.note(f64::INFINITY, || {
                        format!("variant {v} seed {seed}: q {a} vs oracle {b}")
                    });
                }
            }
            let grads = bptt(&trace, &c, &params, arch).unwrap();
            let named = params.named_tensors();
            for ((name, _), (g, o)) in named.iter().zip(grads.tensors().iter().zip(&oracle.grads)) {
                let e = max_rel_err(g.data(), o, 1e-12);
                worst.note(e, || format!("variant {v} seed {seed}: {name}"));
            }
            compared += 1;
        }
    }
    (worst, compared)
}
