//! Leaky integrate-and-fire dynamics, the surrogate derivative, and the
//! weighted-firing-rate representation.

use crate::error::{HlopError, Result};
use crate::numeric::Matrix;

/// How the forward pass turns membrane potential into output.
///
/// `Sigmoid` replaces the step with `σ((u − V_th)/a₂)`, whose exact derivative
/// is the surrogate. It exists so gradients can be checked by finite
/// differences on a smooth network; training always uses `Heaviside`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Firing {
    #[default]
    Heaviside,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronConfig {
    /// Leak factor per step, `0 < λ < 1`.
    pub lambda: f64,
    pub v_th: f64,
    /// Time steps per forward pass.
    pub time_steps: usize,
    /// Surrogate width.
    pub a2: f64,
    /// Discrete step size; only the rate representation uses it.
    pub delta_t: f64,
    /// Time constant of the rate transform.
    pub tau: f64,
    pub firing: Firing,
}

/// Resting potential. Membranes start here and nothing else moves it.
pub const U_REST: f64 = 0.0;

impl Default for NeuronConfig {
    fn default() -> Self {
        Self { lambda: 0.5, v_th: 1.0, time_steps: 6, a2: 0.25, delta_t: 0.05, tau: 1.0, firing: Firing::Heaviside }
    }
}

impl NeuronConfig {
    /// Settings for weighted-firing-rate training: `T = 20, V_th = 0.3,
    /// τ = 1, Δt = 0.05`, leak `λ = exp(−Δt/τ)`.
    pub fn rate_default() -> Self {
        let (delta_t, tau) = (0.05, 1.0);
        Self {
            lambda: (-delta_t / tau as f64).exp(),
            v_th: 0.3,
            time_steps: 20,
            a2: 0.25,
            delta_t,
            tau,
            firing: Firing::Heaviside,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(HlopError::config(field, msg));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda", "must lie strictly between 0 and 1");
        }
        if !(self.v_th > 0.0) {
            return bad("v_th", "must be positive");
        }
        if self.time_steps == 0 {
            return bad("time_steps", "must be at least 1");
        }
        if !(self.a2 > 0.0) {
            return bad("a2", "must be positive");
        }
        if !(self.delta_t > 0.0) {
            return bad("delta_t", "must be positive");
        }
        if !(self.tau > 0.0) {
            return bad("tau", "must be positive");
        }
        Ok(())
    }

    /// Upper clamp of the rate transform, `V_th / Δt`.
    pub fn rate_bound(&self) -> f64 {
        self.v_th / self.delta_t
    }

    #[inline]
    pub fn fire(&self, u: f64) -> f64 {
        match self.firing {
            Firing::Heaviside => {
                if u >= self.v_th {
                    1.0
                } else {
                    0.0
                }
            }
            Firing::Sigmoid => 1.0 / (1.0 + ((self.v_th - u) / self.a2).exp()),
        }
    }
}

/// Potentials, last spikes and eligibility traces for a batch of samples
/// (one row per sample).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub u: Matrix,
    pub s: Matrix,
    pub trace: Matrix,
}

impl LayerState {
    pub fn new(batch: usize, neurons: usize) -> Self {
        Self { u: Matrix::zeros(batch, neurons), s: Matrix::zeros(batch, neurons), trace: Matrix::zeros(batch, neurons) }
    }

    /// Advances every row one step under `input` (same shape as `u`).
    pub fn step(&mut self, input: &Matrix, cfg: &NeuronConfig) -> Result<()> {
        if input.shape() != self.u.shape() {
            return Err(HlopError::Shape(format!(
                "lif_step input {:?} vs state {:?}",
                input.shape(),
                self.u.shape()
            )));
        }
        lif_step(self.u.as_mut_slice(), self.s.as_mut_slice(), input.as_slice(), cfg)
    }

    /// `â ← λâ + s` using the current spikes.
    pub fn accumulate_trace(&mut self, lambda: f64) {
        let s = self.s.as_slice();
        for (a, &si) in self.trace.as_mut_slice().iter_mut().zip(s) {
            *a = lambda * *a + si;
        }
    }
}

/// One LIF step with reset by subtraction:
/// `u ← λ(u − V_th·s) + input`, then `s ← H(u − V_th)`.
pub fn lif_step(u: &mut [f64], s: &mut [f64], input: &[f64], cfg: &NeuronConfig) -> Result<()> {
    if u.len() != input.len() || s.len() != input.len() {
        return Err(HlopError::Shape(format!("lif_step: {} neurons, {} inputs", u.len(), input.len())));
    }
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(HlopError::NonFinite(format!("lif_step input current {i}")));
    }
    for ((ui, si), &x) in u.iter_mut().zip(s.iter_mut()).zip(input) {
        *ui = cfg.lambda * (*ui - cfg.v_th * *si) + x;
        *si = cfg.fire(*ui);
    }
    Ok(())
}

/// Rate-coding neuron step: `u = λv + (1 − λ)I`, `s = H(u − V_th)`,
/// `v = u − V_th·s`. Here `v` is the post-reset potential carried between steps.
pub fn rate_neuron_step(v: &mut [f64], s: &mut [f64], input: &[f64], cfg: &NeuronConfig) {
    let gain = 1.0 - cfg.lambda;
    for ((vi, si), &x) in v.iter_mut().zip(s.iter_mut()).zip(input) {
        let u = cfg.lambda * *vi + gain * x;
        *si = cfg.fire(u);
        *vi = u - cfg.v_th * *si;
    }
}

/// Sigmoid surrogate for `∂s/∂u`:
/// `(1/a₂)·e^{(V_th−u)/a₂} / (1 + e^{(V_th−u)/a₂})²`.
#[inline]
pub fn surrogate_derivative(u: f64, cfg: &NeuronConfig) -> f64 {
    let z = (cfg.v_th - u) / cfg.a2;
    // Even in z; evaluate on the non-positive side so exp never overflows.
    let e = (-z.abs()).exp();
    if !e.is_finite() || e == 0.0 {
        return 0.0;
    }
    e / (cfg.a2 * (1.0 + e) * (1.0 + e))
}

/// Weighted firing rate `V_th·Σλ^{T−t}s[t] / (Σλ^{T−t}·Δt)` of a spike train
/// given as `T` equally sized vectors.
pub fn rate_representation(spike_train: &[Vec<f64>], cfg: &NeuronConfig) -> Result<Vec<f64>> {
    let first = spike_train
        .first()
        .ok_or_else(|| HlopError::InvalidArgument("rate_representation needs T >= 1".into()))?;
    let mut acc = RateAccumulator::new(first.len());
    for s in spike_train {
        if s.len() != first.len() {
            return Err(HlopError::Shape("rate_representation: ragged spike train".into()));
        }
        acc.push(s, cfg);
    }
    Ok(acc.rate(cfg))
}

/// Streaming form of [`rate_representation`].
#[derive(Clone, Debug)]
pub struct RateAccumulator {
    numer: Vec<f64>,
    denom: f64,
}

impl RateAccumulator {
    pub fn new(n: usize) -> Self {
        Self { numer: vec![0.0; n], denom: 0.0 }
    }

    pub fn push(&mut self, spikes: &[f64], cfg: &NeuronConfig) {
        for (a, &s) in self.numer.iter_mut().zip(spikes) {
            *a = cfg.lambda * *a + s;
        }
        self.denom = cfg.lambda * self.denom + cfg.delta_t;
    }

    pub fn rate(&self, cfg: &NeuronConfig) -> Vec<f64> {
        if self.denom == 0.0 {
            return vec![0.0; self.numer.len()];
        }
        self.numer.iter().map(|a| cfg.v_th * a / self.denom).collect()
    }
}

/// Clamp of the rate transform, `clamp(x/τ, 0, V_th/Δt)`, applied to a
/// pre-computed current `x = Wz + b`.
#[inline]
pub fn rate_clamp(current: f64, cfg: &NeuronConfig) -> f64 {
    (current / cfg.tau).clamp(0.0, cfg.rate_bound())
}

/// Derivative of [`rate_clamp`]: `1/τ` strictly inside the clamp, 0 outside.
#[inline]
pub fn rate_clamp_gate(current: f64, cfg: &NeuronConfig) -> f64 {
    let z = current / cfg.tau;
    if z > 0.0 && z < cfg.rate_bound() {
        1.0 / cfg.tau
    } else {
        0.0
    }
}
