//! Scalar reverse-mode differentiation over an explicitly unrolled network.
//!
//! Every multiply, add and normalization step of the forward window becomes
//! one node with its local partials, so the gradients it produces share no
//! code with the library's hand-written adjoints. A spike node carries the
//! surrogate as its local derivative; a reset node passes gradient only when
//! the neuron did not fire.

use sdqn::numerics::Tensor;
use sdqn::qnet::{Architecture, NetworkParams};

#[derive(Default)]
pub struct Tape {
    value: Vec<f64>,
    parents: Vec<Vec<(usize, f64)>>,
}

impl Tape {
    pub fn leaf(&mut self, v: f64) -> usize {
        self.node(v, Vec::new())
    }

    fn node(&mut self, v: f64, parents: Vec<(usize, f64)>) -> usize {
        self.value.push(v);
        self.parents.push(parents);
        self.value.len() - 1
    }

    pub fn value(&self, i: usize) -> f64 {
        self.value[i]
    }

    pub fn add(&mut self, a: usize, b: usize) -> usize {
        self.node(self.value[a] + self.value[b], vec![(a, 1.0), (b, 1.0)])
    }

    pub fn mul(&mut self, a: usize, b: usize) -> usize {
        let (va, vb) = (self.value[a], self.value[b]);
        self.node(va * vb, vec![(a, vb), (b, va)])
    }

    /// `Σ cᵢ·xᵢ` for constant coefficients.
    pub fn lin(&mut self, terms: &[(usize, f64)]) -> usize {
        let v = terms.iter().map(|&(i, c)| c * self.value[i]).sum();
        self.node(v, terms.to_vec())
    }

    pub fn sum(&mut self, xs: &[usize]) -> usize {
        let terms: Vec<(usize, f64)> = xs.iter().map(|&i| (i, 1.0)).collect();
        self.lin(&terms)
    }

    /// `(x + eps)^(-1/2)`
    pub fn rsqrt(&mut self, x: usize, eps: f64) -> usize {
        let s = self.value[x] + eps;
        self.node(s.powf(-0.5), vec![(x, -0.5 * s.powf(-1.5))])
    }

    /// Gradient of node `out` with respect to every node.
    pub fn backward(&self, out: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.value.len()];
        g[out] = 1.0;
        for i in (0..=out).rev() {
            if g[i] == 0.0 {
                continue;
            }
            for &(p, d) in &self.parents[i] {
                g[p] += g[i] * d;
            }
        }
        g
    }
}

pub struct Unrolled {
    pub q: Vec<f64>,
    /// `∂L/∂θ` per tensor, in `NetworkParams::named_tensors` order.
    pub grads: Vec<Vec<f64>>,
    /// Smallest `|a − V_th|` over every pre-reset potential; a tie-break
    /// hazard when tiny.
    pub min_margin: f64,
}

fn leaves(tape: &mut Tape, t: &Tensor) -> Vec<usize> {
    t.data().iter().map(|&v| tape.leaf(v)).collect()
}

/// Cross-correlation written out term by term.
#[allow(clippy::too_many_arguments)]
fn conv(
    tape: &mut Tape,
    input: &[usize],
    [c, h, w]: [usize; 3],
    kernel: &[usize],
    o: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<usize>, [usize; 3]) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = Vec::with_capacity(o * oh * ow);
    for oc in 0..o {
        for y in 0..oh {
            for x in 0..ow {
                let mut terms = Vec::new();
                for ic in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (y * stride + ky) as isize - pad as isize;
                            let ix = (x * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let wi = kernel[((oc * c + ic) * k + ky) * k + kx];
                            let xi = input[(ic * h + iy as usize) * w + ix as usize];
                            terms.push(tape.mul(wi, xi));
                        }
                    }
                }
                out.push(tape.sum(&terms));
            }
        }
    }
    (out, [o, oh, ow])
}

fn dense(tape: &mut Tape, input: &[usize], weights: &[usize], rows: usize) -> Vec<usize> {
    let n = input.len();
    (0..rows)
        .map(|r| {
            let terms: Vec<usize> = (0..n).map(|j| tape.mul(weights[r * n + j], input[j])).collect();
            tape.sum(&terms)
        })
        .collect()
}

fn normalize(tape: &mut Tape, x: &[usize], channels: usize, lambda: &[usize], beta: &[usize], eps: f64) -> Vec<usize> {
    let n = x.len() as f64;
    let coef: Vec<(usize, f64)> = x.iter().map(|&i| (i, 1.0 / n)).collect();
    let mean = tape.lin(&coef);
    let dev: Vec<usize> = x.iter().map(|&i| tape.lin(&[(i, 1.0), (mean, -1.0)])).collect();
    let sq: Vec<usize> = dev.iter().map(|&d| tape.mul(d, d)).collect();
    let coef: Vec<(usize, f64)> = sq.iter().map(|&i| (i, 1.0 / n)).collect();
    let var = tape.lin(&coef);
    let inv = tape.rsqrt(var, eps);
    let per = x.len() / channels;
    dev.iter()
        .enumerate()
        .map(|(i, &d)| {
            let xh = tape.mul(d, inv);
            let scaled = tape.mul(lambda[i / per], xh);
            tape.add(scaled, beta[i / per])
        })
        .collect()
}

/// Forward window and the gradient of `L = Σ_a c_a·q_a` by reverse sweep.
pub fn unrolled_gradients(frames: &Tensor, params: &NetworkParams, arch: &Architecture, c: &[f64]) -> Unrolled {
    let lif = arch.lif;
    let alpha = 1.0 - 1.0 / lif.tau;
    let mut tape = Tape::default();

    let named = params.named_tensors();
    let ids: Vec<Vec<usize>> = named.iter().map(|(_, t)| leaves(&mut tape, t)).collect();
    let mut next = ids.iter();
    let mut conv_k = Vec::new();
    let mut conv_norm = Vec::new();
    for i in 0..arch.conv_specs.len() {
        conv_k.push(next.next().unwrap().clone());
        conv_norm.push(if params.conv_pbln[i].is_some() {
            Some((next.next().unwrap().clone(), next.next().unwrap().clone()))
        } else {
            None
        });
    }
    let fc_w = next.next().unwrap().clone();
    let fc_norm = params
        .fc_pbln
        .as_ref()
        .map(|_| (next.next().unwrap().clone(), next.next().unwrap().clone()));
    let readout = next.next().unwrap().clone();
    let eps_of = |l: usize| {
        if l < arch.conv_specs.len() {
            params.conv_pbln[l].as_ref().map_or(0.0, |p| p.epsilon)
        } else {
            params.fc_pbln.as_ref().map_or(0.0, |p| p.epsilon)
        }
    };

    let input = leaves(&mut tape, frames);
    let n_conv = arch.conv_specs.len();
    let n_layers = n_conv + 1;
    let mut u: Vec<Vec<usize>> = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut q_terms: Vec<Vec<usize>> = vec![Vec::new(); arch.n_actions];

    // Layer 0 sees the same frames at every step, so its drive is built once.
    let s0 = arch.conv_specs[0];
    let (x0, shape0) = conv(
        &mut tape,
        &input,
        arch.input_shape,
        &conv_k[0],
        s0.out_channels,
        s0.kernel_size,
        s0.stride,
        s0.padding,
    );
    let drive0 = match &conv_norm[0] {
        Some((l, b)) => normalize(&mut tape, &x0, shape0[0], l, b, eps_of(0)),
        None => x0,
    };
    let mut shapes = vec![shape0];
    for l in 1..n_conv {
        let s = arch.conv_specs[l];
        let prev = shapes[l - 1];
        let oh = (prev[1] + 2 * s.padding - s.kernel_size) / s.stride + 1;
        let ow = (prev[2] + 2 * s.padding - s.kernel_size) / s.stride + 1;
        shapes.push([s.out_channels, oh, ow]);
    }
    for sh in &shapes {
        let n: usize = sh.iter().product();
        u.push((0..n).map(|_| tape.leaf(lif.v_reset)).collect());
    }
    u.push((0..arch.fc_width).map(|_| tape.leaf(lif.v_reset)).collect());

    for _t in 0..arch.time_window {
        let mut below: Vec<usize> = Vec::new();
        for l in 0..n_layers {
            let drive = if l == 0 {
                drive0.clone()
            } else if l < n_conv {
                let s = arch.conv_specs[l];
                let (x, _) = conv(
                    &mut tape,
                    &below,
                    shapes[l - 1],
                    &conv_k[l],
                    s.out_channels,
                    s.kernel_size,
                    s.stride,
                    s.padding,
                );
                match &conv_norm[l] {
                    Some((lam, b)) => normalize(&mut tape, &x, s.out_channels, lam, b, eps_of(l)),
                    None => x,
                }
            } else {
                let x = dense(&mut tape, &below, &fc_w, arch.fc_width);
                match &fc_norm {
                    Some((lam, b)) => normalize(&mut tape, &x, arch.fc_width, lam, b, eps_of(l)),
                    None => x,
                }
            };
            let mut spikes = Vec::with_capacity(drive.len());
            for (i, &y) in drive.iter().enumerate() {
                let a = tape.lin(&[(u[l][i], alpha), (y, 1.0 - alpha)]);
                let av = tape.value(a);
                min_margin = min_margin.min((av - lif.v_th).abs());
                let fired = av >= lif.v_th;
                let z = std::f64::consts::PI * lif.tau * (av - lif.v_th);
                let surrogate = 2.0 * lif.tau / (4.0 + z * z);
                spikes.push(tape.node(if fired { 1.0 } else { 0.0 }, vec![(a, surrogate)]));
                u[l][i] = if fired {
                    tape.leaf(lif.v_reset)
                } else {
                    tape.lin(&[(a, 1.0)])
                };
            }
            below = spikes;
        }
        for (act, terms) in q_terms.iter_mut().enumerate() {
            for (j, &s) in below.iter().enumerate() {
                terms.push(tape.mul(readout[act * arch.fc_width + j], s));
            }
        }
    }
    let t = arch.time_window as f64;
    let q: Vec<usize> = q_terms
        .iter()
        .map(|terms| {
            let coef: Vec<(usize, f64)> = terms.iter().map(|&i| (i, 1.0 / t)).collect();
            tape.lin(&coef)
        })
        .collect();
    let loss_terms: Vec<(usize, f64)> = q.iter().zip(c).map(|(&qi, &ci)| (qi, ci)).collect();
    let loss = tape.lin(&loss_terms);
    let g = tape.backward(loss);
    Unrolled {
        q: q.iter().map(|&i| tape.value(i)).collect(),
        grads: ids.iter().map(|v| v.iter().map(|&i| g[i]).collect()).collect(),
        min_margin,
    }
}
