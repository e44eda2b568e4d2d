//! Online training through time.
//!
//! Each layer keeps an eligibility trace of its presynaptic activity,
//! `â[t] = λâ[t−1] + s[t]`. At every step the instantaneous loss
//! `L[t] = CE(o[t], y)/T` on the linear readout `o[t]` is propagated
//! spatially only (no unrolling) and the step's contribution to `∇W` is
//! `g_u[t]·â[t]ᵀ`.

use super::{error_to_previous, softmax_cross_entropy, times_surrogate, BatchResult, ErrorPropConfig, GradPacket, LayerGrad, Target};
use crate::error::{HlopError, Result};
use crate::network::Network;
use crate::neuron::{LayerState, NeuronConfig};
use crate::numeric::Matrix;

/// Per-sample state carried between steps: membranes, spikes and the
/// eligibility trace of each hidden layer, plus the input trace. The entry
/// for the readout layer is never stepped.
#[derive(Clone, Debug)]
pub struct OtttState {
    pub layers: Vec<LayerState>,
    /// `â` of the network input (batch × input_len).
    pub input_trace: Matrix,
}

impl OtttState {
    pub fn new(net: &Network, batch: usize) -> Self {
        Self {
            layers: net.layers.iter().map(|l| LayerState::new(batch, l.neurons())).collect(),
            input_trace: Matrix::zeros(batch, net.input_len()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OtttStep {
    pub packet: GradPacket,
    /// Presynaptic activity (not traces) of this step, per layer.
    pub presynaptic: Vec<Matrix>,
    pub loss: f64,
}

/// Advances the network one step on `input` and returns this step's
/// gradient contribution. With `target = None` the instantaneous error is
/// zero and so is the packet.
pub fn ottt_step(
    net: &Network,
    state: &mut OtttState,
    input: &Matrix,
    target: Option<&Target>,
    cfg: &NeuronConfig,
    ep: &ErrorPropConfig,
) -> Result<OtttStep> {
    let batch = input.rows();
    if state.layers.len() != net.len() || state.input_trace.shape() != (batch, net.input_len()) {
        return Err(HlopError::Shape("OTTT state does not match network/batch".into()));
    }
    let lambda = cfg.lambda;
    for (a, &x) in state.input_trace.as_mut_slice().iter_mut().zip(input.as_slice()) {
        *a = lambda * *a + x;
    }

    // Forward, remembering presynaptic activity and traces per layer.
    let mut presynaptic = Vec::with_capacity(net.len());
    let mut traces = Vec::with_capacity(net.len());
    let last = net.len() - 1;
    let mut x = input.clone();
    let mut output = Matrix::zeros(0, 0);
    for (l, layer) in net.layers.iter().enumerate() {
        let rows = layer.presynaptic_rows(&x)?;
        let trace_in = if l == 0 { state.input_trace.clone() } else { net.layers[l - 1].pool(&state.layers[l - 1].trace) };
        traces.push(layer.presynaptic_rows(&trace_in)?);
        let current = layer.current_from_rows(&rows, batch)?;
        presynaptic.push(rows);
        if l == last {
            output = current;
            break;
        }
        let st = &mut state.layers[l];
        st.step(&current, cfg)?;
        st.accumulate_trace(lambda);
        x = layer.pool(&st.s);
    }

    let (loss, mut g_out) = match target {
        Some(t) => softmax_cross_entropy(&output, t)?,
        None => (0.0, Matrix::zeros(batch, net.layers[last].neurons())),
    };
    let inv_t = 1.0 / cfg.time_steps as f64;
    g_out.scale(inv_t);

    let mut grads: Vec<Option<LayerGrad>> = vec![None; net.len()];
    // The readout is linear: its error is the loss gradient itself.
    let mut delta = g_out;
    for l in (0..net.len()).rev() {
        let layer = &net.layers[l];
        let trace = std::mem::replace(&mut traces[l], Matrix::zeros(0, 0));
        grads[l] = Some(LayerGrad::new(layer.error_rows(&delta)?, trace)?);
        if l > 0 {
            let g = error_to_previous(net, l, &delta, ep)?;
            delta = times_surrogate(&g, &state.layers[l - 1].u, cfg);
        }
    }
    let layers = grads.into_iter().map(|g| g.expect("filled above")).collect();
    Ok(OtttStep { packet: GradPacket { layers, batch }, presynaptic, loss: loss * inv_t })
}

/// Runs `T` online steps on a static input and merges the per-step packets.
///
/// Hebbian rows are the presynaptic activity of every step; for the input
/// layer the activity is the same each step, so one copy is kept (the
/// batch-mean Hebbian update is unchanged by the duplicates).
pub fn ottt_batch(net: &Network, x: &Matrix, target: &Target, cfg: &NeuronConfig, ep: &ErrorPropConfig) -> Result<BatchResult> {
    let batch = x.rows();
    let mut state = OtttState::new(net, batch);
    let mut layers: Vec<LayerGrad> = net.layers.iter().map(|l| LayerGrad::empty(l.out_features(), l.fan_in())).collect();
    let mut hebbian: Vec<Matrix> = net.layers.iter().map(|l| Matrix::zeros(0, l.fan_in())).collect();
    let mut loss = 0.0;
    for t in 0..cfg.time_steps {
        let step = ottt_step(net, &mut state, x, Some(target), cfg, ep)?;
        loss += step.loss;
        for (acc, g) in layers.iter_mut().zip(&step.packet.layers) {
            acc.append(g)?;
        }
        for (l, rows) in step.presynaptic.into_iter().enumerate() {
            if l > 0 || t == 0 {
                hebbian[l] = hebbian[l].vstack(&rows)?;
            }
        }
    }
    Ok(BatchResult { packet: GradPacket { layers, batch }, hebbian, loss: loss / batch as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    #[test]
    fn eligibility_trace_recurrence() {
        let mut st = LayerState::new(1, 1);
        let mut seen = Vec::new();
        for s in [1.0, 0.0, 1.0] {
            st.s[(0, 0)] = s;
            st.accumulate_trace(0.5);
            seen.push(st.trace[(0, 0)]);
        }
        assert_eq!(seen, vec![1.0, 0.5, 1.25]);
    }

    #[test]
    fn no_error_means_empty_update() {
        let mut rng = Rng::new(4);
        let net = Network::mlp(5, &[4], 3, &mut rng).unwrap();
        let cfg = NeuronConfig::default();
        let mut state = OtttState::new(&net, 2);
        let x = Matrix::from_rows(&[[1.0, 0.5, 0.9, 0.0, 2.0], [0.3, 1.2, 0.0, 1.0, 0.8]]);
        for _ in 0..3 {
            let step = ottt_step(&net, &mut state, &x, None, &cfg, &ErrorPropConfig::bp()).unwrap();
            for l in 0..net.len() {
                assert_eq!(step.packet.weight_grad(l).unwrap().max_abs(), 0.0);
            }
        }
        assert!(state.input_trace.max_abs() > 0.0);
    }

    #[test]
    fn state_shape_checked() {
        let mut rng = Rng::new(4);
        let net = Network::mlp(5, &[4], 3, &mut rng).unwrap();
        let mut state = OtttState::new(&net, 1);
        let x = Matrix::zeros(2, 5);
        assert!(ottt_step(&net, &mut state, &x, None, &NeuronConfig::default(), &ErrorPropConfig::bp()).is_err());
    }
}
