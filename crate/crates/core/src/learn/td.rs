use super::{bptt_accumulate, ParamGrads};
use crate::error::{Error, Result};
use crate::qnet::{Architecture, NetworkParams, Simulator};
use crate::rl::Transition;

#[derive(Clone, Debug, PartialEq)]
pub struct TdLoss {
    /// `mean_b (y_b − Q(s_b, a_b))²`
    pub loss: f64,
    /// Signed TD error `y_b − Q(s_b, a_b)` per sample.
    pub delta: Vec<f64>,
    pub q_taken: Vec<f64>,
    pub targets: Vec<f64>,
}

fn check(batch: &[Transition], arch: &Architecture, gamma: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("TD batch"));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    for (i, t) in batch.iter().enumerate() {
        if t.action >= arch.n_actions {
            return Err(Error::invalid(format!(
                "sample {i}: action {} outside {} actions",
                t.action, arch.n_actions
            )));
        }
        if !t.reward.is_finite() {
            return Err(Error::invalid(format!("sample {i}: reward {}", t.reward)));
        }
    }
    Ok(())
}

/// Bootstrap target `r + γ·max_a' Q_target(s', a')`, or `r` at terminal transitions.
pub fn td_target(t: &Transition, target: &NetworkParams, arch: &Architecture, gamma: f64) -> Result<f64> {
    target_with(&mut Simulator::new(), t, target, arch, gamma)
}

fn target_with(
    sim: &mut Simulator,
    t: &Transition,
    target: &NetworkParams,
    arch: &Architecture,
    gamma: f64,
) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let q = sim.q_values(&t.next_state, target, arch)?;
    Ok(t.reward + gamma * q.data()[q.argmax()])
}

/// Mean squared TD error over the batch.
pub fn td_loss(
    batch: &[Transition],
    online: &NetworkParams,
    target: &NetworkParams,
    arch: &Architecture,
    gamma: f64,
) -> Result<TdLoss> {
    check(batch, arch, gamma)?;
    let mut sim = Simulator::new();
    let mut q_taken = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        targets.push(target_with(&mut sim, t, target, arch, gamma)?);
        q_taken.push(sim.q_values(&t.state, online, arch)?.data()[t.action]);
    }
    Ok(assemble(q_taken, targets))
}

fn assemble(q_taken: Vec<f64>, targets: Vec<f64>) -> TdLoss {
    let delta: Vec<f64> = targets.iter().zip(&q_taken).map(|(y, q)| y - q).collect();
    let loss = delta.iter().map(|d| d * d).sum::<f64>() / delta.len() as f64;
    TdLoss {
        loss,
        delta,
        q_taken,
        targets,
    }
}

/// TD loss and its gradient with respect to the online parameters. Each
/// sample is simulated and backpropagated on its own, in batch order, and the
/// per-sample gradients are summed; the target network is only evaluated.
pub fn td_gradients(
    batch: &[Transition],
    online: &NetworkParams,
    target: &NetworkParams,
    arch: &Architecture,
    gamma: f64,
) -> Result<(TdLoss, ParamGrads)> {
    check(batch, arch, gamma)?;
    let b = batch.len() as f64;
    let mut grads = ParamGrads::zeros_like(online);
    let mut q_taken = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    let mut grad_q = vec![0.0; arch.n_actions];
    let mut sim = Simulator::new();
    for t in batch {
        let y = target_with(&mut sim, t, target, arch, gamma)?;
        let trace = sim.forward(&t.state, online, arch)?;
        let qa = trace.q.data()[t.action];
        grad_q.fill(0.0);
        grad_q[t.action] = -2.0 * (y - qa) / b;
        bptt_accumulate(trace, &grad_q, online, arch, &mut grads)?;
        q_taken.push(qa);
        targets.push(y);
    }
    Ok((assemble(q_taken, targets), grads))
}
