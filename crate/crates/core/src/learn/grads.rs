use crate::numerics::Tensor;
use crate::qnet::NetworkParams;

/// `∂L/∂θ` for every learnable tensor, laid out like [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub conv_kernels: Vec<Tensor>,
    pub conv_lambda: Vec<Option<Tensor>>,
    pub conv_beta: Vec<Option<Tensor>>,
    pub fc_weights: Tensor,
    pub fc_lambda: Option<Tensor>,
    pub fc_beta: Option<Tensor>,
    pub readout_weights: Tensor,
}

fn zeros(t: &Tensor) -> Tensor {
    Tensor::zeros(t.shape())
}

impl ParamGrads {
    pub fn zeros_like(p: &NetworkParams) -> Self {
        Self {
            conv_kernels: p.conv_kernels.iter().map(zeros).collect(),
            conv_lambda: p
                .conv_pbln
                .iter()
                .map(|n| n.as_ref().map(|n| zeros(&n.lambda)))
                .collect(),
            conv_beta: p.conv_pbln.iter().map(|n| n.as_ref().map(|n| zeros(&n.beta))).collect(),
            fc_weights: zeros(&p.fc_weights),
            fc_lambda: p.fc_pbln.as_ref().map(|n| zeros(&n.lambda)),
            fc_beta: p.fc_pbln.as_ref().map(|n| zeros(&n.beta)),
            readout_weights: zeros(&p.readout_weights),
        }
    }

    /// Same order as [`NetworkParams::named_tensors`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for i in 0..self.conv_kernels.len() {
            out.push(&self.conv_kernels[i]);
            out.extend(self.conv_lambda[i].as_ref());
            out.extend(self.conv_beta[i].as_ref());
        }
        out.push(&self.fc_weights);
        out.extend(self.fc_lambda.as_ref());
        out.extend(self.fc_beta.as_ref());
        out.push(&self.readout_weights);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for ((k, l), b) in self
            .conv_kernels
            .iter_mut()
            .zip(self.conv_lambda.iter_mut())
            .zip(self.conv_beta.iter_mut())
        {
            out.push(k);
            out.extend(l.as_mut());
            out.extend(b.as_mut());
        }
        out.push(&mut self.fc_weights);
        out.extend(self.fc_lambda.as_mut());
        out.extend(self.fc_beta.as_mut());
        out.push(&mut self.readout_weights);
        out
    }

    /// Euclidean norm over every element, accumulated in canonical order.
    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().fold(0.0, |acc, t| acc + t.sum_sq()).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.data_mut() {
                *v *= s;
            }
        }
    }

    pub fn accumulate(&mut self, other: &ParamGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.data().iter().all(|&v| v == 0.0))
    }
}
