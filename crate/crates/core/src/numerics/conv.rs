//! 2-D cross-correlation and its adjoints.
//!
//! Kernels are laid out `[out, in, k, k]`, feature maps `[channels, height, width]`.
//! The forward pass scatters every non-zero input element into the outputs it
//! reaches, so spike maps (mostly zeros) cost proportionally to their activity.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding: 0,
        }
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel_size == 0 || self.stride == 0 {
            return Err(Error::invalid(format!("conv spec extents must be positive: {self:?}")));
        }
        Ok(())
    }

    /// `floor((input + 2·padding − kernel) / stride) + 1`, or an error when the
    /// kernel does not fit.
    pub fn output_extent(&self, input: usize) -> Result<usize> {
        self.validate()?;
        let padded = input + 2 * self.padding;
        if padded < self.kernel_size {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "kernel {} does not fit input extent {input} with padding {}",
                    self.kernel_size, self.padding
                ),
            ));
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    /// Trailing input rows (or columns) no kernel position reaches, because
    /// the stride does not divide the padded extent minus the kernel.
    /// Padding is not counted.
    pub fn uncovered_tail(&self, input: usize) -> Result<usize> {
        let out = self.output_extent(input)?;
        let reach = (out - 1) * self.stride + self.kernel_size;
        Ok((input + self.padding).saturating_sub(reach))
    }

    /// Output `[out_channels, h', w']` for an input `[in_channels, h, w]`.
    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        if input[0] != self.in_channels {
            return Err(Error::shape(
                "conv2d",
                format!("input has {} channels, spec expects {}", input[0], self.in_channels),
            ));
        }
        Ok([
            self.out_channels,
            self.output_extent(input[1])?,
            self.output_extent(input[2])?,
        ])
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_size, self.kernel_size]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }
}

/// Precomputed index maps for one (spec, input extent) pair: for every input
/// row (column) the `(kernel offset, output index)` pairs it contributes to.
#[derive(Clone, Debug)]
pub(crate) struct ConvGeometry {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub k: usize,
    pub oh: usize,
    pub ow: usize,
    stride: usize,
    pad: usize,
    rows: Vec<Vec<(usize, usize)>>,
    cols: Vec<Vec<(usize, usize)>>,
}

fn tap_map(input: usize, out: usize, k: usize, stride: usize, pad: usize) -> Vec<Vec<(usize, usize)>> {
    (0..input)
        .map(|i| {
            (0..k)
                .filter_map(|kk| {
                    let p = i + pad;
                    if p < kk {
                        return None;
                    }
                    let d = p - kk;
                    (d.is_multiple_of(stride) && d / stride < out).then_some((kk, d / stride))
                })
                .collect()
        })
        .collect()
}

impl ConvGeometry {
    pub fn new(spec: &ConvSpec, input: [usize; 3]) -> Result<Self> {
        let [o, oh, ow] = spec.output_shape(input)?;
        let k = spec.kernel_size;
        Ok(Self {
            c: input[0],
            h: input[1],
            w: input[2],
            o,
            k,
            oh,
            ow,
            stride: spec.stride,
            pad: spec.padding,
            rows: tap_map(input[1], oh, k, spec.stride, spec.padding),
            cols: tap_map(input[2], ow, k, spec.stride, spec.padding),
        })
    }

    pub fn in_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn out_len(&self) -> usize {
        self.o * self.oh * self.ow
    }

    pub fn kernel_len(&self) -> usize {
        self.o * self.c * self.k * self.k
    }

    #[inline]
    fn kidx(&self, o: usize, c: usize, ky: usize, kx: usize) -> usize {
        ((o * self.c + c) * self.k + ky) * self.k + kx
    }

    /// `out` is overwritten.
    pub fn forward(&self, input: &[f64], kernels: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let plane = self.oh * self.ow;
        for c in 0..self.c {
            for iy in 0..self.h {
                for ix in 0..self.w {
                    let v = input[(c * self.h + iy) * self.w + ix];
                    if v == 0.0 {
                        continue;
                    }
                    for o in 0..self.o {
                        let base = o * plane;
                        for &(ky, oy) in &self.rows[iy] {
                            for &(kx, ox) in &self.cols[ix] {
                                out[base + oy * self.ow + ox] += kernels[self.kidx(o, c, ky, kx)] * v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates `∂L/∂kernels` into `grad_kernels`.
    pub fn grad_kernels(&self, input: &[f64], grad_out: &[f64], grad_kernels: &mut [f64]) {
        let plane = self.oh * self.ow;
        for c in 0..self.c {
            for iy in 0..self.h {
                for ix in 0..self.w {
                    let v = input[(c * self.h + iy) * self.w + ix];
                    if v == 0.0 {
                        continue;
                    }
                    for o in 0..self.o {
                        let base = o * plane;
                        for &(ky, oy) in &self.rows[iy] {
                            for &(kx, ox) in &self.cols[ix] {
                                grad_kernels[self.kidx(o, c, ky, kx)] += grad_out[base + oy * self.ow + ox] * v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Output positions `[lo, hi)` whose tap `kk` lands inside an input of length `extent`.
    fn valid_range(&self, kk: usize, extent: usize, out: usize) -> (usize, usize) {
        let lo = if self.pad > kk {
            (self.pad - kk).div_ceil(self.stride)
        } else {
            0
        };
        let hi = if extent + self.pad > kk {
            ((extent + self.pad - kk - 1) / self.stride + 1).min(out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    /// Accumulates `∂L/∂input` into `grad_input`: first the per-tap products
    /// `col[(c,ky,kx), p] = Σ_o K[o,c,ky,kx]·g[o,p]`, then a scatter of each tap
    /// row onto the input positions it reads.
    pub fn grad_input(&self, kernels: &[f64], grad_out: &[f64], grad_input: &mut [f64]) {
        let plane = self.oh * self.ow;
        let taps = self.c * self.k * self.k;
        let mut col = vec![0.0; taps * plane];
        for o in 0..self.o {
            let g = &grad_out[o * plane..(o + 1) * plane];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (r, &w) in kernels[o * taps..(o + 1) * taps].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (cv, &gv) in col[r * plane..(r + 1) * plane].iter_mut().zip(g) {
                    *cv += w * gv;
                }
            }
        }
        let (s, pad) = (self.stride, self.pad);
        for c in 0..self.c {
            let in_plane = &mut grad_input[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                let (oy_lo, oy_hi) = self.valid_range(ky, self.h, self.oh);
                for kx in 0..self.k {
                    let (ox_lo, ox_hi) = self.valid_range(kx, self.w, self.ow);
                    let row = &col[((c * self.k + ky) * self.k + kx) * plane..][..plane];
                    for oy in oy_lo..oy_hi {
                        let in_row = &mut in_plane[(oy * s + ky - pad) * self.w..][..self.w];
                        let c_row = &row[oy * self.ow..(oy + 1) * self.ow];
                        for ox in ox_lo..ox_hi {
                            in_row[ox * s + kx - pad] += c_row[ox];
                        }
                    }
                }
            }
        }
    }
}

fn input_dims(input: &Tensor) -> Result<[usize; 3]> {
    match *input.shape() {
        [c, h, w] => Ok([c, h, w]),
        ref s => Err(Error::shape("conv2d", format!("input must be [C,H,W], got {s:?}"))),
    }
}

fn check_kernels(kernels: &Tensor, spec: &ConvSpec) -> Result<()> {
    if kernels.shape() != spec.kernel_shape() {
        return Err(Error::shape(
            "conv2d",
            format!(
                "kernels {:?} do not match spec {:?}",
                kernels.shape(),
                spec.kernel_shape()
            ),
        ));
    }
    Ok(())
}

/// Cross-correlation of `input [C,H,W]` with `kernels [O,C,K,K]`.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    check_kernels(kernels, spec)?;
    let geom = ConvGeometry::new(spec, input_dims(input)?)?;
    let mut out = vec![0.0; geom.out_len()];
    geom.forward(input.data(), kernels.data(), &mut out);
    Ok(Tensor::from_parts(vec![geom.o, geom.oh, geom.ow], out))
}

/// Adjoint of [`conv2d_forward`]: returns `(grad_input, grad_kernels)`.
pub fn conv2d_backward(
    grad_out: &Tensor,
    input: &Tensor,
    kernels: &Tensor,
    spec: &ConvSpec,
) -> Result<(Tensor, Tensor)> {
    check_kernels(kernels, spec)?;
    let geom = ConvGeometry::new(spec, input_dims(input)?)?;
    if grad_out.shape() != [geom.o, geom.oh, geom.ow] {
        return Err(Error::shape(
            "conv2d_backward",
            format!(
                "grad_out {:?} does not match forward output {:?}",
                grad_out.shape(),
                [geom.o, geom.oh, geom.ow]
            ),
        ));
    }
    let mut gi = vec![0.0; geom.in_len()];
    let mut gk = vec![0.0; geom.kernel_len()];
    geom.grad_input(kernels.data(), grad_out.data(), &mut gi);
    geom.grad_kernels(input.data(), grad_out.data(), &mut gk);
    Ok((
        Tensor::from_parts(input.shape().to_vec(), gi),
        Tensor::from_parts(kernels.shape().to_vec(), gk),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncovered_tails() {
        assert_eq!(ConvSpec::new(1, 1, 3, 2).uncovered_tail(22).unwrap(), 1);
        assert_eq!(ConvSpec::new(1, 1, 3, 2).with_padding(1).uncovered_tail(24).unwrap(), 0);
        assert_eq!(ConvSpec::new(1, 1, 8, 4).uncovered_tail(84).unwrap(), 0);
        assert_eq!(ConvSpec::new(1, 1, 3, 1).uncovered_tail(5).unwrap(), 0);
    }

    #[test]
    fn two_by_two_window_sums() {
        let input = Tensor::new(&[1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let k = Tensor::full(&[1, 1, 2, 2], 1.0);
        let out = conv2d_forward(&input, &k, &ConvSpec::new(1, 1, 2, 1)).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[2.0]);
    }

    #[test]
    fn zero_kernels_give_zero_output() {
        let input = Tensor::new(&[2, 4, 4], (0..32).map(|i| i as f64 * 0.1).collect()).unwrap();
        let out = conv2d_forward(&input, &Tensor::zeros(&[3, 2, 3, 3]), &ConvSpec::new(2, 3, 3, 1)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_kernel_is_identity() {
        let input = Tensor::new(&[1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let out = conv2d_forward(&input, &Tensor::full(&[1, 1, 1, 1], 1.0), &ConvSpec::new(1, 1, 1, 1)).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn scalar_backward_chain_rule() {
        let (x, k, g) = (1.5, -0.75, 2.0);
        let input = Tensor::new(&[1, 1, 1], vec![x]).unwrap();
        let kern = Tensor::new(&[1, 1, 1, 1], vec![k]).unwrap();
        let go = Tensor::new(&[1, 1, 1], vec![g]).unwrap();
        let (gi, gk) = conv2d_backward(&go, &input, &kern, &ConvSpec::new(1, 1, 1, 1)).unwrap();
        assert_eq!(gi.data(), &[g * k]);
        assert_eq!(gk.data(), &[g * x]);
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let spec = ConvSpec::new(2, 2, 3, 2).with_padding(1);
        let input = Tensor::new(&[2, 5, 5], (0..50).map(|i| (i as f64).sin()).collect()).unwrap();
        let kern = Tensor::new(&[2, 2, 3, 3], (0..36).map(|i| (i as f64).cos()).collect()).unwrap();
        let out = conv2d_forward(&input, &kern, &spec).unwrap();
        let (gi, gk) = conv2d_backward(&Tensor::zeros(out.shape()), &input, &kern, &spec).unwrap();
        assert!(gi.data().iter().chain(gk.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn output_extents() {
        let spec = ConvSpec::new(4, 32, 8, 4);
        assert_eq!(spec.output_shape([4, 84, 84]).unwrap(), [32, 20, 20]);
        assert_eq!(
            ConvSpec::new(32, 64, 4, 2).output_shape([32, 20, 20]).unwrap(),
            [64, 9, 9]
        );
        assert_eq!(
            ConvSpec::new(64, 64, 3, 1).output_shape([64, 9, 9]).unwrap(),
            [64, 7, 7]
        );
        assert_eq!(
            ConvSpec::new(1, 1, 3, 1)
                .with_padding(1)
                .output_shape([1, 5, 5])
                .unwrap(),
            [1, 5, 5]
        );
        assert!(ConvSpec::new(1, 1, 5, 1).output_shape([1, 3, 3]).is_err());
        assert!(ConvSpec::new(2, 1, 1, 1).output_shape([1, 3, 3]).is_err());
    }

    #[test]
    fn rejects_mismatched_kernels_and_grads() {
        let input = Tensor::zeros(&[1, 4, 4]);
        let spec = ConvSpec::new(1, 2, 3, 1);
        assert!(conv2d_forward(&input, &Tensor::zeros(&[2, 1, 2, 2]), &spec).is_err());
        assert!(conv2d_forward(&Tensor::zeros(&[16]), &Tensor::zeros(&[2, 1, 3, 3]), &spec).is_err());
        let bad_grad = Tensor::zeros(&[2, 3, 3]);
        assert!(conv2d_backward(&bad_grad, &input, &Tensor::zeros(&[2, 1, 3, 3]), &spec).is_err());
    }
}
