//! Error transport across a layer: exact transpose (BP), fixed random
//! feedback (FA), or scaled sign of the forward weights (SS).

use std::fmt;
use std::str::FromStr;

use crate::error::{HlopError, Result};
use crate::layer::Layer;
use crate::network::Network;
use crate::numeric::{kaiming_uniform_init, matmul, matmul_nt, Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ErrorPropMode {
    #[default]
    Bp,
    Fa,
    Ss,
}

impl FromStr for ErrorPropMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bp" => Ok(Self::Bp),
            "fa" => Ok(Self::Fa),
            "ss" => Ok(Self::Ss),
            _ => Err(format!("unknown error propagation `{s}` (expected bp, fa or ss)")),
        }
    }
}

impl fmt::Display for ErrorPropMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bp => "bp",
            Self::Fa => "fa",
            Self::Ss => "ss",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorPropConfig {
    pub mode: ErrorPropMode,
    /// FA only: one frozen `[fan_in × out_features]` matrix per layer.
    pub feedback: Vec<Matrix>,
    /// SS only: fixed scale; `None` uses the mean |W| of the layer.
    pub ss_scale: Option<f64>,
}

impl ErrorPropConfig {
    pub fn bp() -> Self {
        Self { mode: ErrorPropMode::Bp, feedback: Vec::new(), ss_scale: None }
    }

    pub fn ss(scale: Option<f64>) -> Self {
        Self { mode: ErrorPropMode::Ss, feedback: Vec::new(), ss_scale: scale }
    }

    /// Draws FA feedback matrices from the forward layers' init distribution.
    pub fn fa(net: &Network, rng: &mut Rng) -> Result<Self> {
        let feedback = net
            .layers
            .iter()
            .map(|l| kaiming_uniform_init(l.fan_in(), l.out_features(), l.fan_in(), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mode: ErrorPropMode::Fa, feedback, ss_scale: None })
    }

    pub fn for_mode(mode: ErrorPropMode, net: &Network, rng: &mut Rng) -> Result<Self> {
        match mode {
            ErrorPropMode::Bp => Ok(Self::bp()),
            ErrorPropMode::Fa => Self::fa(net, rng),
            ErrorPropMode::Ss => Ok(Self::ss(None)),
        }
    }
}

/// Mean absolute forward weight, the default SS scale.
pub fn mean_abs_weight(w: &Matrix) -> f64 {
    let n = w.as_slice().len().max(1);
    w.as_slice().iter().map(|v| v.abs()).sum::<f64>() / n as f64
}

/// Maps errors on a layer's outputs (`rows × out_features`) to errors on
/// its presynaptic rows (`rows × fan_in`). Forward weights are read only.
pub fn backprop_error(delta_out: &Matrix, layer_index: usize, layer: &Layer, ep: &ErrorPropConfig) -> Result<Matrix> {
    match ep.mode {
        ErrorPropMode::Bp => matmul(delta_out, &layer.weights),
        ErrorPropMode::Fa => {
            let f = ep.feedback.get(layer_index).ok_or_else(|| {
                HlopError::InvalidArgument(format!("feedback alignment has no feedback matrix for layer {layer_index}"))
            })?;
            if f.shape() != (layer.fan_in(), layer.out_features()) {
                return Err(HlopError::Shape(format!(
                    "feedback matrix {:?} for layer {layer_index} with weights {:?}",
                    f.shape(),
                    layer.weights.shape()
                )));
            }
            matmul_nt(delta_out, f)
        }
        ErrorPropMode::Ss => {
            let s = ep.ss_scale.unwrap_or_else(|| mean_abs_weight(&layer.weights));
            let mut sign = layer.weights.clone();
            sign.map_inplace(|w| if w > 0.0 { s } else if w < 0.0 { -s } else { 0.0 });
            matmul(delta_out, &sign)
        }
    }
}
