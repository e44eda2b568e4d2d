//! Gradient producers for spiking networks.
//!
//! Three schemes share one output format, a [`GradPacket`] of per-layer
//! (error, presynaptic trace) rows:
//!
//! - [`rate`]: weighted firing rates and the closed-form clamp transform;
//!   the trace is the presynaptic rate.
//! - [`bptt`]: backpropagation through time with surrogate derivatives;
//!   the traces are the presynaptic spikes at every step.
//! - [`ottt`]: online training through time with eligibility traces and
//!   instantaneous errors; the traces are the eligibility traces.
//!
//! Error transport between layers is pluggable via [`errorprop`].

pub mod bptt;
pub mod errorprop;
pub mod ottt;
pub mod packet;
pub mod rate;

use std::fmt;
use std::str::FromStr;

pub use errorprop::{backprop_error, ErrorPropConfig, ErrorPropMode};
pub use packet::{sgd_update, GradPacket, LayerGrad};

use crate::error::{HlopError, Result};
use crate::network::Network;
use crate::neuron::{surrogate_derivative, NeuronConfig};
use crate::numeric::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrainerKind {
    Rate,
    Bptt,
    #[default]
    Ottt,
}

impl FromStr for TrainerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rate" => Ok(Self::Rate),
            "bptt" => Ok(Self::Bptt),
            "ottt" => Ok(Self::Ottt),
            _ => Err(format!("unknown trainer `{s}` (expected rate, bptt or ottt)")),
        }
    }
}

impl fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rate => "rate",
            Self::Bptt => "bptt",
            Self::Ottt => "ottt",
        })
    }
}

/// Labels for a batch, optionally restricted to a subset of output units
/// (one head of a multi-head readout).
#[derive(Clone, Copy, Debug)]
pub struct Target<'a> {
    pub labels: &'a [usize],
    pub classes: Option<&'a [usize]>,
}

impl<'a> Target<'a> {
    pub fn new(labels: &'a [usize]) -> Self {
        Self { labels, classes: None }
    }

    pub fn with_classes(labels: &'a [usize], classes: &'a [usize]) -> Self {
        Self { labels, classes: Some(classes) }
    }
}

/// Softmax cross-entropy over the allowed output units. Returns the summed
/// loss and `∂L/∂scores` (zero outside the allowed units).
pub fn softmax_cross_entropy(scores: &Matrix, target: &Target) -> Result<(f64, Matrix)> {
    if scores.rows() != target.labels.len() {
        return Err(HlopError::Shape(format!("{} score rows for {} labels", scores.rows(), target.labels.len())));
    }
    let all: Vec<usize> = (0..scores.cols()).collect();
    let classes = target.classes.unwrap_or(&all);
    let mut grad = Matrix::zeros(scores.rows(), scores.cols());
    let mut loss = 0.0;
    for (r, &label) in target.labels.iter().enumerate() {
        if !classes.contains(&label) || label >= scores.cols() {
            return Err(HlopError::InvalidArgument(format!("label {label} outside the active output units")));
        }
        let row = scores.row(r);
        let max = classes.iter().map(|&c| row[c]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = classes.iter().map(|&c| (row[c] - max).exp()).sum();
        loss += z.ln() + max - row[label];
        let g = grad.row_mut(r);
        for &c in classes {
            g[c] = (row[c] - max).exp() / z;
        }
        g[label] -= 1.0;
    }
    Ok((loss, grad))
}

/// Argmax over allowed units of `scores`, ties broken by `tie_break`, then
/// by lowest index.
pub fn predict(scores: &Matrix, tie_break: &Matrix, classes: Option<&[usize]>) -> Vec<usize> {
    let all: Vec<usize> = (0..scores.cols()).collect();
    let classes = classes.unwrap_or(&all);
    (0..scores.rows())
        .map(|r| {
            let mut best = classes[0];
            for &c in &classes[1..] {
                let (s, b) = (scores[(r, c)], scores[(r, best)]);
                if s > b || (s == b && tie_break[(r, c)] > tie_break[(r, best)]) {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Everything one training batch produces.
#[derive(Clone, Debug)]
pub struct BatchResult {
    pub packet: GradPacket,
    /// Presynaptic rows per layer for the lateral Hebbian rule.
    pub hebbian: Vec<Matrix>,
    pub loss: f64,
}

/// Output scores for evaluation: (primary score, tie-break score).
pub fn infer(kind: TrainerKind, net: &Network, x: &Matrix, cfg: &NeuronConfig) -> Result<(Matrix, Matrix)> {
    match kind {
        TrainerKind::Rate => {
            let tape = rate::rate_forward(net, x, cfg, rate::RateForward::Spiking)?;
            let tie = tape.currents.last().cloned().unwrap_or_else(|| Matrix::zeros(x.rows(), 0));
            Ok((tape.output, tie))
        }
        TrainerKind::Bptt | TrainerKind::Ottt => spiking_inference(net, x, cfg),
    }
}

/// Runs the LIF network for `T` steps on a static input; returns the summed
/// readout and, as tie-break, the readout of the final step.
pub fn spiking_inference(net: &Network, x: &Matrix, cfg: &NeuronConfig) -> Result<(Matrix, Matrix)> {
    let batch = x.rows();
    let last = net.len() - 1;
    let mut states: Vec<_> = net.layers[..last].iter().map(|l| crate::neuron::LayerState::new(batch, l.neurons())).collect();
    let first_current = net.layers[0].current(x)?;
    let mut sum = Matrix::zeros(batch, net.output_len());
    let mut latest = Matrix::zeros(batch, net.output_len());
    for _ in 0..cfg.time_steps {
        let mut input = None::<Matrix>;
        for (l, layer) in net.layers.iter().enumerate() {
            let current = match &input {
                None => first_current.clone(),
                Some(xin) => layer.current(xin)?,
            };
            if l == last {
                latest = current;
                break;
            }
            states[l].step(&current, cfg)?;
            input = Some(layer.pool(&states[l].s));
        }
        sum.add_scaled(&latest, 1.0)?;
    }
    Ok((sum, latest))
}

/// `g ⊙ σ'(u)` elementwise.
pub(crate) fn times_surrogate(g: &Matrix, u: &Matrix, cfg: &NeuronConfig) -> Matrix {
    let mut out = g.clone();
    for (o, &ui) in out.as_mut_slice().iter_mut().zip(u.as_slice()) {
        *o *= surrogate_derivative(ui, cfg);
    }
    out
}

/// Carries an error on layer `l`'s neurons down to the neurons (pre-pool
/// spikes) of layer `l − 1`, before the surrogate factor.
pub(crate) fn error_to_previous(
    net: &Network,
    l: usize,
    delta: &Matrix,
    ep: &ErrorPropConfig,
) -> Result<Matrix> {
    let layer = &net.layers[l];
    let rows = backprop_error(&layer.error_rows(delta)?, l, layer, ep)?;
    let on_input = layer.fold_input_error(rows, delta.rows())?;
    Ok(net.layers[l - 1].unpool(&on_input))
}
