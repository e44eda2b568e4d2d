//! Backpropagation through time with surrogate derivatives.
//!
//! Hidden layers are LIF neurons; the last layer is a non-spiking linear
//! readout whose per-step output is its input current. The loss is
//! cross-entropy on the readout averaged over time. Credit flows back
//! through the leak (`∂u[t+1]/∂u[t] = λ`) and through the subtractive reset
//! (`∂u[t+1]/∂s[t] = −λV_th`), with the surrogate standing in for `∂s/∂u`.

use super::{error_to_previous, softmax_cross_entropy, times_surrogate, BatchResult, ErrorPropConfig, GradPacket, LayerGrad, Target};
use crate::error::{HlopError, Result};
use crate::network::Network;
use crate::neuron::{LayerState, NeuronConfig};
use crate::numeric::Matrix;

/// Everything the backward pass needs from the forward pass.
#[derive(Clone, Debug, Default)]
pub struct BpttTape {
    /// `[layer][t]` presynaptic rows.
    pub presynaptic: Vec<Vec<Matrix>>,
    /// `[layer][t]` membrane potential after the step, hidden layers only.
    pub potentials: Vec<Vec<Matrix>>,
    /// Readout output per step.
    pub readout: Vec<Matrix>,
    pub batch: usize,
}

impl BpttTape {
    pub fn steps(&self) -> usize {
        self.readout.len()
    }

    /// Time-averaged readout, `batch × outputs`.
    pub fn output_mean(&self) -> Matrix {
        let mut r = self.readout[0].clone();
        for s in &self.readout[1..] {
            r.add_scaled(s, 1.0).expect("same shape");
        }
        r.scale(1.0 / self.steps() as f64);
        r
    }
}

pub fn bptt_forward(net: &Network, x: &Matrix, cfg: &NeuronConfig) -> Result<BpttTape> {
    let batch = x.rows();
    let last = net.len() - 1;
    let mut states: Vec<LayerState> = net.layers[..last].iter().map(|l| LayerState::new(batch, l.neurons())).collect();
    let mut tape = BpttTape {
        presynaptic: vec![Vec::new(); net.len()],
        potentials: vec![Vec::new(); last],
        readout: Vec::new(),
        batch,
    };
    let first_rows = net.layers[0].presynaptic_rows(x)?;
    let first_current = net.layers[0].current_from_rows(&first_rows, batch)?;
    for _ in 0..cfg.time_steps {
        let mut input = None::<Matrix>;
        for (l, layer) in net.layers.iter().enumerate() {
            let current = match &input {
                None => {
                    tape.presynaptic[l].push(first_rows.clone());
                    first_current.clone()
                }
                Some(xin) => {
                    let rows = layer.presynaptic_rows(xin)?;
                    let c = layer.current_from_rows(&rows, batch)?;
                    tape.presynaptic[l].push(rows);
                    c
                }
            };
            if l == last {
                tape.readout.push(current);
                break;
            }
            states[l].step(&current, cfg)?;
            tape.potentials[l].push(states[l].u.clone());
            input = Some(layer.pool(&states[l].s));
        }
    }
    Ok(tape)
}

/// Gradient packet for one batch from a stored forward pass.
pub fn bptt_sg_backward(
    net: &Network,
    tape: &BpttTape,
    target: &Target,
    cfg: &NeuronConfig,
    ep: &ErrorPropConfig,
) -> Result<(GradPacket, f64)> {
    let steps = tape.steps();
    if steps == 0
        || steps != cfg.time_steps
        || tape.potentials.len() + 1 != net.len()
        || tape.potentials.iter().any(|p| p.len() != steps)
    {
        return Err(HlopError::InvalidArgument("BPTT backward needs the stored forward pass of every step".into()));
    }
    let (loss, mut g_out) = softmax_cross_entropy(&tape.output_mean(), target)?;
    g_out.scale(1.0 / steps as f64);
    let last = net.len() - 1;
    let mut layers: Vec<Option<LayerGrad>> = vec![None; net.len()];
    let readout = &net.layers[last];
    let mut grad = LayerGrad::empty(readout.out_features(), readout.fan_in());
    let mut spatial = Vec::with_capacity(steps);
    for t in 0..steps {
        grad.append(&LayerGrad::new(readout.error_rows(&g_out)?, tape.presynaptic[last][t].clone())?)?;
        if last > 0 {
            spatial.push(error_to_previous(net, last, &g_out, ep)?);
        }
    }
    layers[last] = Some(grad);
    let leak = cfg.lambda;
    let reset = -cfg.lambda * cfg.v_th;

    // `spatial[t]` is ∂L/∂s[t] arriving from the layer above.
    for l in (0..last).rev() {
        let layer = &net.layers[l];
        let u = &tape.potentials[l];
        let mut deltas: Vec<Matrix> = vec![Matrix::zeros(0, 0); steps];
        let mut du_next = Matrix::zeros(tape.batch, layer.neurons());
        for t in (0..steps).rev() {
            // ∂L/∂s[t] = spatial + ∂L/∂u[t+1]·(−λV_th)
            let mut ds = spatial[t].clone();
            ds.add_scaled(&du_next, reset)?;
            // ∂L/∂u[t] = ∂L/∂s[t]·σ'(u[t]) + ∂L/∂u[t+1]·λ
            let mut du = times_surrogate(&ds, &u[t], cfg);
            du.add_scaled(&du_next, leak)?;
            deltas[t] = du.clone();
            du_next = du;
        }
        let mut grad = LayerGrad::empty(layer.out_features(), layer.fan_in());
        for t in 0..steps {
            grad.append(&LayerGrad::new(layer.error_rows(&deltas[t])?, tape.presynaptic[l][t].clone())?)?;
        }
        layers[l] = Some(grad);
        if l > 0 {
            spatial = deltas.iter().map(|d| error_to_previous(net, l, d, ep)).collect::<Result<_>>()?;
        }
    }
    let layers = layers.into_iter().map(|g| g.expect("filled above")).collect();
    Ok((GradPacket { layers, batch: tape.batch }, loss / tape.batch as f64))
}

pub fn bptt_batch(net: &Network, x: &Matrix, target: &Target, cfg: &NeuronConfig, ep: &ErrorPropConfig) -> Result<BatchResult> {
    let tape = bptt_forward(net, x, cfg)?;
    let (packet, loss) = bptt_sg_backward(net, &tape, target, cfg, ep)?;
    let hebbian = tape
        .presynaptic
        .iter()
        .enumerate()
        .map(|(l, steps)| {
            // Static input: one copy suffices for a batch-mean update.
            let used = if l == 0 { &steps[..1] } else { &steps[..] };
            used.iter().try_fold(Matrix::zeros(0, net.layers[l].fan_in()), |acc, m| acc.vstack(m))
        })
        .collect::<Result<_>>()?;
    Ok(BatchResult { packet, hebbian, loss })
}

/// Summed loss of the network on `x` under the forward pass configured in
/// `cfg` (used by gradient checks).
pub fn bptt_loss(net: &Network, x: &Matrix, target: &Target, cfg: &NeuronConfig) -> Result<f64> {
    let tape = bptt_forward(net, x, cfg)?;
    Ok(softmax_cross_entropy(&tape.output_mean(), target)?.0)
}
