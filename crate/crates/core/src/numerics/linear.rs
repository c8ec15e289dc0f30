use super::Tensor;
use crate::error::{Error, Result};

/// Indices of the non-zero entries, ascending.
fn nonzero(input: &[f64]) -> Vec<usize> {
    input
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v != 0.0).then_some(i))
        .collect()
}

/// `out[j] = Σ_k w[j, k]·x[k]` over the non-zero `x[k]`, summed in ascending `k`.
pub(crate) fn forward_raw(input: &[f64], weights: &[f64], rows: usize, out: &mut [f64]) {
    let n = input.len();
    let nz = nonzero(input);
    for (j, o) in out.iter_mut().enumerate().take(rows) {
        let row = &weights[j * n..(j + 1) * n];
        *o = nz.iter().fold(0.0, |acc, &k| acc + row[k] * input[k]);
    }
}

/// Accumulates `wᵀ·g` into `grad_input`.
pub(crate) fn grad_input_raw(weights: &[f64], grad_out: &[f64], grad_input: &mut [f64]) {
    let n = grad_input.len();
    for (j, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &weights[j * n..(j + 1) * n];
        for (gi, &w) in grad_input.iter_mut().zip(row) {
            *gi += g * w;
        }
    }
}

/// Accumulates `g ⊗ x` into `grad_weights`.
pub(crate) fn grad_weights_raw(input: &[f64], grad_out: &[f64], grad_weights: &mut [f64]) {
    let n = input.len();
    let nz = nonzero(input);
    for (j, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut grad_weights[j * n..(j + 1) * n];
        for &k in &nz {
            row[k] += g * input[k];
        }
    }
}

fn dims(input: &Tensor, weights: &Tensor) -> Result<(usize, usize)> {
    match *weights.shape() {
        [m, n] if n == input.len() => Ok((m, n)),
        ref s => Err(Error::shape(
            "linear",
            format!("weights {s:?} incompatible with input of {} elements", input.len()),
        )),
    }
}

/// Weighted sum without bias: `out = W·x` for `W: [M, N]` and a flat `x` of `N` values.
pub fn linear_forward(input: &Tensor, weights: &Tensor) -> Result<Tensor> {
    let (m, _) = dims(input, weights)?;
    let mut out = vec![0.0; m];
    forward_raw(input.data(), weights.data(), m, &mut out);
    Ok(Tensor::from_parts(vec![m], out))
}

/// Adjoint of [`linear_forward`]: returns `(grad_input, grad_weights)`.
pub fn linear_backward(grad_out: &Tensor, input: &Tensor, weights: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, n) = dims(input, weights)?;
    if grad_out.len() != m {
        return Err(Error::shape(
            "linear_backward",
            format!("grad_out has {} elements, expected {m}", grad_out.len()),
        ));
    }
    let mut gi = vec![0.0; n];
    let mut gw = vec![0.0; m * n];
    grad_input_raw(weights.data(), grad_out.data(), &mut gi);
    grad_weights_raw(input.data(), grad_out.data(), &mut gw);
    Ok((
        Tensor::from_parts(input.shape().to_vec(), gi),
        Tensor::from_parts(vec![m, n], gw),
    ))
}
