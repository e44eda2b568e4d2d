//! Training on weighted firing rates.
//!
//! Spike trains are summarized by `a[T] = V_th·Σλ^{T−t}s[t] / Σλ^{T−t}Δt`,
//! and layer-to-layer maps are treated as `a^l ≈ clamp((W a^{l−1} + b)/τ,
//! 0, V_th/Δt)`. Errors flow back through that clamp chain, and the weight
//! gradient is `δ^l · a^{l−1}ᵀ`.

use super::{error_to_previous, softmax_cross_entropy, BatchResult, ErrorPropConfig, GradPacket, LayerGrad, Target};
use crate::error::Result;
use crate::layer::rate_forward_transform;
use crate::network::Network;
use crate::neuron::{rate_clamp_gate, rate_neuron_step, NeuronConfig, RateAccumulator};
use crate::numeric::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateForward {
    /// Simulate spiking neurons for `T` steps and read their weighted rates.
    Spiking,
    /// Evaluate the closed-form clamp chain directly.
    Analytic,
}

#[derive(Clone, Debug)]
pub struct RateTape {
    /// Input to each layer in rate units (`batch × input_len`).
    pub inputs: Vec<Matrix>,
    /// `W·a + b` at each layer's neurons, computed from the stored rates.
    pub currents: Vec<Matrix>,
    /// Rate of the readout layer.
    pub output: Matrix,
}

pub fn rate_forward(net: &Network, x: &Matrix, cfg: &NeuronConfig, mode: RateForward) -> Result<RateTape> {
    let batch = x.rows();
    let mut inputs = Vec::with_capacity(net.len());
    let mut currents = Vec::with_capacity(net.len());
    match mode {
        RateForward::Analytic => {
            let mut a = x.clone();
            for layer in &net.layers {
                currents.push(layer.current(&a)?);
                let z = rate_forward_transform(&a, layer, cfg)?;
                inputs.push(a);
                a = layer.pool(&z);
            }
            Ok(RateTape { inputs, currents, output: a })
        }
        RateForward::Spiking => {
            // Spikes travel between layers as currents of V_th/Δt per spike,
            // which keeps every layer's input in rate units.
            let spike_current = cfg.rate_bound();
            let mut potentials: Vec<Matrix> = net.layers.iter().map(|l| Matrix::zeros(batch, l.neurons())).collect();
            let mut spikes = potentials.clone();
            let mut rates: Vec<RateAccumulator> = net.layers.iter().map(|l| RateAccumulator::new(batch * l.output_len())).collect();
            let first_current = net.layers[0].current(x)?;
            for _ in 0..cfg.time_steps {
                let mut input = None::<Matrix>;
                for (l, layer) in net.layers.iter().enumerate() {
                    let current = match &input {
                        None => first_current.clone(),
                        Some(xin) => layer.current(xin)?,
                    };
                    rate_neuron_step(potentials[l].as_mut_slice(), spikes[l].as_mut_slice(), current.as_slice(), cfg);
                    let out = layer.pool(&spikes[l]);
                    rates[l].push(out.as_slice(), cfg);
                    input = Some(out.scaled(spike_current));
                }
            }
            let mut a = x.clone();
            for (l, layer) in net.layers.iter().enumerate() {
                currents.push(layer.current(&a)?);
                inputs.push(a);
                a = Matrix::from_vec(batch, layer.output_len(), rates[l].rate(cfg))?;
            }
            Ok(RateTape { inputs, currents, output: a })
        }
    }
}

/// Errors through the clamp chain; traces are the presynaptic rates.
pub fn rate_backward(
    net: &Network,
    tape: &RateTape,
    target: &Target,
    cfg: &NeuronConfig,
    ep: &ErrorPropConfig,
) -> Result<(GradPacket, f64)> {
    let batch = tape.output.rows();
    let (loss, g) = softmax_cross_entropy(&tape.output, target)?;
    let last = net.len() - 1;
    let mut delta = gate(&net.layers[last].unpool(&g), &tape.currents[last], cfg);
    let mut layers: Vec<Option<LayerGrad>> = vec![None; net.len()];
    for l in (0..net.len()).rev() {
        let layer = &net.layers[l];
        layers[l] = Some(LayerGrad::new(layer.error_rows(&delta)?, layer.presynaptic_rows(&tape.inputs[l])?)?);
        if l > 0 {
            let g = error_to_previous(net, l, &delta, ep)?;
            delta = gate(&g, &tape.currents[l - 1], cfg);
        }
    }
    let layers = layers.into_iter().map(|g| g.expect("filled above")).collect();
    Ok((GradPacket { layers, batch }, loss / batch as f64))
}

fn gate(g: &Matrix, current: &Matrix, cfg: &NeuronConfig) -> Matrix {
    let mut out = g.clone();
    for (o, &c) in out.as_mut_slice().iter_mut().zip(current.as_slice()) {
        *o *= rate_clamp_gate(c, cfg);
    }
    out
}

/// One batch on simulated spikes. The Hebbian rows are the presynaptic
/// rates scaled by `Δt/V_th` into firing probabilities, which leaves the
/// principal subspace unchanged while keeping the lateral rule's step
/// size independent of the rate units.
pub fn rate_batch(net: &Network, x: &Matrix, target: &Target, cfg: &NeuronConfig, ep: &ErrorPropConfig) -> Result<BatchResult> {
    let tape = rate_forward(net, x, cfg, RateForward::Spiking)?;
    let (packet, loss) = rate_backward(net, &tape, target, cfg, ep)?;
    let hebbian = net
        .layers
        .iter()
        .zip(&tape.inputs)
        .enumerate()
        .map(|(l, (layer, a))| {
            let rows = layer.presynaptic_rows(a)?;
            Ok(if l == 0 { rows } else { rows.scaled(1.0 / cfg.rate_bound()) })
        })
        .collect::<Result<_>>()?;
    Ok(BatchResult { packet, hebbian, loss })
}

/// Summed loss of the closed-form rate network (used by gradient checks).
pub fn rate_loss(net: &Network, x: &Matrix, target: &Target, cfg: &NeuronConfig) -> Result<f64> {
    let tape = rate_forward(net, x, cfg, RateForward::Analytic)?;
    Ok(softmax_cross_entropy(&tape.output, target)?.0)
}
