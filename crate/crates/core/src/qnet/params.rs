use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Architecture;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::pbln::{pbln_init, PbLnParams};

/// Every learnable value of the spiking Q network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    /// `[out, in, k, k]` per conv layer.
    pub conv_kernels: Vec<Tensor>,
    /// Normalization parameters per conv layer, `None` where pbLN is off.
    pub conv_pbln: Vec<Option<PbLnParams>>,
    /// `[fc_width, flat_features]`.
    pub fc_weights: Tensor,
    pub fc_pbln: Option<PbLnParams>,
    /// `[n_actions, fc_width]`.
    pub readout_weights: Tensor,
}

/// Bound of the uniform initializer for a layer with the given fan-in.
pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

fn uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let k = init_bound(fan_in);
    let dist = Uniform::new_inclusive(-k, k);
    let n = shape.iter().product();
    Tensor::from_parts(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect())
}

/// Draws every weight i.i.d. from `U(−k, k)` with `k = 1/√fan_in`, in
/// declaration order (conv kernels, FC, readout); pbLN parameters start at
/// `λ = V_th − V_reset`, `β = V_reset`.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<NetworkParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv_kernels = Vec::new();
    let mut conv_pbln = Vec::new();
    for spec in &arch.conv_specs {
        conv_kernels.push(uniform(&spec.kernel_shape(), spec.fan_in(), &mut rng));
        conv_pbln.push(if arch.pbln.conv {
            Some(pbln_init(&arch.lif, spec.out_channels)?)
        } else {
            None
        });
    }
    let flat = arch.flat_features()?;
    let fc_weights = uniform(&[arch.fc_width, flat], flat, &mut rng);
    let fc_pbln = if arch.pbln.fc {
        Some(pbln_init(&arch.lif, arch.fc_width)?)
    } else {
        None
    };
    let readout_weights = uniform(&[arch.n_actions, arch.fc_width], arch.fc_width, &mut rng);
    Ok(NetworkParams {
        conv_kernels,
        conv_pbln,
        fc_weights,
        fc_pbln,
        readout_weights,
    })
}

impl NetworkParams {
    /// Named tensors in canonical order: per conv layer `kernel`, `lambda`,
    /// `beta`; then `fc.weight`, `fc.lambda`, `fc.beta`; then `readout.weight`.
    /// Absent pbLN entries are skipped.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, (k, p)) in self.conv_kernels.iter().zip(&self.conv_pbln).enumerate() {
            out.push((format!("conv{}.kernel", i + 1), k));
            if let Some(p) = p {
                out.push((format!("conv{}.lambda", i + 1), &p.lambda));
                out.push((format!("conv{}.beta", i + 1), &p.beta));
            }
        }
        out.push(("fc.weight".into(), &self.fc_weights));
        if let Some(p) = &self.fc_pbln {
            out.push(("fc.lambda".into(), &p.lambda));
            out.push(("fc.beta".into(), &p.beta));
        }
        out.push(("readout.weight".into(), &self.readout_weights));
        out
    }

    /// Mutable tensors in the order of [`NetworkParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for (k, p) in self.conv_kernels.iter_mut().zip(self.conv_pbln.iter_mut()) {
            out.push(k);
            if let Some(p) = p {
                out.push(&mut p.lambda);
                out.push(&mut p.beta);
            }
        }
        out.push(&mut self.fc_weights);
        if let Some(p) = &mut self.fc_pbln {
            out.push(&mut p.lambda);
            out.push(&mut p.beta);
        }
        out.push(&mut self.readout_weights);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Checks every tensor shape against the architecture.
    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let mismatch = |what: String| Err(Error::shape("NetworkParams", what));
        if self.conv_kernels.len() != arch.conv_specs.len() || self.conv_pbln.len() != arch.conv_specs.len() {
            return mismatch(format!(
                "{} conv kernels for {} conv layers",
                self.conv_kernels.len(),
                arch.conv_specs.len()
            ));
        }
        for (i, spec) in arch.conv_specs.iter().enumerate() {
            if self.conv_kernels[i].shape() != spec.kernel_shape() {
                return mismatch(format!(
                    "conv{} kernel {:?}, expected {:?}",
                    i + 1,
                    self.conv_kernels[i].shape(),
                    spec.kernel_shape()
                ));
            }
            match (&self.conv_pbln[i], arch.pbln.conv) {
                (Some(p), true) if p.channels() == spec.out_channels && p.beta.len() == spec.out_channels => {}
                (None, false) => {}
                _ => return mismatch(format!("conv{} pbLN parameters inconsistent with architecture", i + 1)),
            }
        }
        let flat = arch.flat_features()?;
        if self.fc_weights.shape() != [arch.fc_width, flat] {
            return mismatch(format!(
                "fc weights {:?}, expected {:?}",
                self.fc_weights.shape(),
                [arch.fc_width, flat]
            ));
        }
        match (&self.fc_pbln, arch.pbln.fc) {
            (Some(p), true) if p.channels() == arch.fc_width && p.beta.len() == arch.fc_width => {}
            (None, false) => {}
            _ => return mismatch("fc pbLN parameters inconsistent with architecture".into()),
        }
        if self.readout_weights.shape() != [arch.n_actions, arch.fc_width] {
            return mismatch(format!(
                "readout {:?}, expected {:?}",
                self.readout_weights.shape(),
                [arch.n_actions, arch.fc_width]
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_params() {
        let arch = Architecture::desk_small(3);
        let a = init_params(&arch, 11).unwrap();
        let b = init_params(&arch, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&arch, 12).unwrap());
        a.check(&arch).unwrap();
    }

    #[test]
    fn uniform_moments_match_closed_form() {
        // fan-in 100 → k = 0.1, D(W) = k²/3
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let w = uniform(&[n], 100, &mut rng);
        let k: f64 = 0.1;
        let mean = w.sum() / n as f64;
        let var = w.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let d = k * k / 3.0;
        let se_mean = (d / n as f64).sqrt();
        // Var of (W−μ)² for uniform: k⁴/5 − (k²/3)²
        let se_var = ((k.powi(4) / 5.0 - d * d) / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - d).abs() < 3.0 * se_var, "var {var} vs {d}");
        assert!(w.data().iter().all(|x| x.abs() <= k));
    }

    #[test]
    fn pbln_presence_follows_placement() {
        let arch = Architecture::desk_small(3).with_pbln(false);
        let p = init_params(&arch, 0).unwrap();
        assert!(p.conv_pbln.iter().all(Option::is_none));
        assert_eq!(p.named_tensors().len(), 4);
        let mut arch = Architecture::desk_small(3);
        arch.pbln.fc = true;
        let p = init_params(&arch, 0).unwrap();
        let names: Vec<_> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            [
                "conv1.kernel",
                "conv1.lambda",
                "conv1.beta",
                "conv2.kernel",
                "conv2.lambda",
                "conv2.beta",
                "fc.weight",
                "fc.lambda",
                "fc.beta",
                "readout.weight"
            ]
        );
        assert!(p.check(&Architecture::desk_small(3)).is_err());
    }
}
