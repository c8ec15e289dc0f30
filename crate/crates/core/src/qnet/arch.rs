use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::LifParams;
use crate::numerics::ConvSpec;

/// Where potential-based layer normalization is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PbLnPlacement {
    pub conv: bool,
    pub fc: bool,
}

impl PbLnPlacement {
    pub const CONV_ONLY: Self = Self { conv: true, fc: false };
    pub const OFF: Self = Self { conv: false, fc: false };
}

/// Network structure plus the neuron settings shared by every spiking layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// `(channels, height, width)` of one stacked observation.
    pub input_shape: [usize; 3],
    pub conv_specs: Vec<ConvSpec>,
    pub fc_width: usize,
    pub n_actions: usize,
    /// Simulation steps per inference (`T`).
    pub time_window: usize,
    pub lif: LifParams,
    pub pbln: PbLnPlacement,
}

impl Architecture {
    /// The DQN-shaped stack on `4×84×84` frames: c32k8s4, c64k4s2, c64k3s1, FC 512.
    pub fn dqn_atari(n_actions: usize) -> Self {
        Self {
            input_shape: [4, 84, 84],
            conv_specs: vec![
                ConvSpec::new(4, 32, 8, 4),
                ConvSpec::new(32, 64, 4, 2),
                ConvSpec::new(64, 64, 3, 1),
            ],
            fc_width: 512,
            n_actions,
            time_window: 16,
            lif: LifParams::default(),
            pbln: PbLnPlacement::CONV_ONLY,
        }
    }

    /// Two-conv network for the 24×24 desk environments: c8k3s1, c16k3s2, FC 64.
    /// Both convs pad by one so the border rows, where the Catch paddle lives,
    /// reach the FC layer (unpadded, the stride-2 layer skips the last row).
    pub fn desk_small(n_actions: usize) -> Self {
        Self {
            input_shape: [4, 24, 24],
            conv_specs: vec![
                ConvSpec::new(4, 8, 3, 1).with_padding(1),
                ConvSpec::new(8, 16, 3, 2).with_padding(1),
            ],
            fc_width: 64,
            n_actions,
            time_window: 16,
            lif: LifParams::default(),
            pbln: PbLnPlacement::CONV_ONLY,
        }
    }

    /// Three-conv network for 24×24 frames with the DQN channel counts and
    /// kernel sizes, strides shrunk to fit: c32k8s2, c64k4s1, c64k3s1, FC 512.
    pub fn desk_deep(n_actions: usize) -> Self {
        Self {
            input_shape: [4, 24, 24],
            conv_specs: vec![
                ConvSpec::new(4, 32, 8, 2),
                ConvSpec::new(32, 64, 4, 1),
                ConvSpec::new(64, 64, 3, 1),
            ],
            fc_width: 512,
            n_actions,
            time_window: 16,
            lif: LifParams::default(),
            pbln: PbLnPlacement::CONV_ONLY,
        }
    }

    pub fn with_pbln(mut self, conv: bool) -> Self {
        self.pbln.conv = conv;
        self
    }

    pub fn with_time_window(mut self, t: usize) -> Self {
        self.time_window = t;
        self
    }

    /// Output shape of every conv layer, checking the chain end to end.
    pub fn conv_output_shapes(&self) -> Result<Vec<[usize; 3]>> {
        let mut shape = self.input_shape;
        let mut out = Vec::with_capacity(self.conv_specs.len());
        for (i, spec) in self.conv_specs.iter().enumerate() {
            shape = spec
                .output_shape(shape)
                .map_err(|e| e.context(format!("conv{}", i + 1)))?;
            out.push(shape);
        }
        Ok(out)
    }

    /// Number of features entering the FC layer (channel-major flatten).
    pub fn flat_features(&self) -> Result<usize> {
        let shapes = self.conv_output_shapes()?;
        Ok(match shapes.last() {
            Some(s) => s.iter().product(),
            None => self.input_shape.iter().product(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        if self.input_shape.contains(&0) {
            return Err(Error::invalid(format!(
                "input shape {:?} has a zero extent",
                self.input_shape
            )));
        }
        if self.conv_specs.is_empty() {
            return Err(Error::invalid("need at least one conv layer"));
        }
        if self.fc_width == 0 || self.n_actions == 0 {
            return Err(Error::invalid("fc_width and n_actions must be positive"));
        }
        if self.time_window == 0 {
            return Err(Error::invalid("time_window must be at least 1"));
        }
        let mut shape_in = self.input_shape;
        for (i, spec) in self.conv_specs.iter().enumerate() {
            let ctx = |e: Error| e.context(format!("conv{}", i + 1));
            let shape = spec.output_shape(shape_in).map_err(ctx)?;
            for extent in [shape_in[1], shape_in[2]] {
                let tail = spec.uncovered_tail(extent).map_err(ctx)?;
                if tail > 0 {
                    return Err(Error::invalid(format!(
                        "conv{} never sees the last {tail} of {extent} input rows/columns",
                        i + 1
                    )));
                }
            }
            shape_in = shape;
        }
        Ok(())
    }

    /// Layer names in forward order: `conv1..convN`, `fc`.
    pub fn layer_names(&self) -> Vec<String> {
        (1..=self.conv_specs.len())
            .map(|i| format!("conv{i}"))
            .chain(std::iter::once("fc".to_string()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dqn_shapes() {
        let a = Architecture::dqn_atari(6);
        assert_eq!(
            a.conv_output_shapes().unwrap(),
            vec![[32, 20, 20], [64, 9, 9], [64, 7, 7]]
        );
        assert_eq!(a.flat_features().unwrap(), 3136);
        a.validate().unwrap();
    }

    #[test]
    fn desk_shapes() {
        assert_eq!(
            Architecture::desk_small(3).conv_output_shapes().unwrap(),
            vec![[8, 24, 24], [16, 12, 12]]
        );
        assert_eq!(
            Architecture::desk_deep(3).conv_output_shapes().unwrap(),
            vec![[32, 9, 9], [64, 6, 6], [64, 4, 4]]
        );
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut a = Architecture::desk_small(3);
        a.conv_specs[1].in_channels = 7;
        assert!(a.validate().is_err());
        let a = Architecture::desk_small(3).with_time_window(0);
        assert!(a.validate().is_err());
        let mut a = Architecture::desk_small(3);
        a.conv_specs[1].padding = 0;
        assert!(a
            .validate()
            .unwrap_err()
            .to_string()
            .contains("conv2 never sees the last 1"));
    }
}
