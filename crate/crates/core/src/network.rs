use crate::error::{HlopError, Result};
use crate::layer::{ConvGeometry, Layer};
use crate::numeric::Rng;

/// A feedforward stack of spiking layers; the last layer is the readout.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(HlopError::InvalidArgument("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_len() != pair[1].input_len() {
                return Err(HlopError::Shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].output_len(),
                    i + 1,
                    pair[1].input_len()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Fully connected `inputs → hidden… → outputs`.
    pub fn mlp(inputs: usize, hidden: &[usize], outputs: usize, rng: &mut Rng) -> Result<Self> {
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        let layers = widths.windows(2).map(|w| Layer::dense(w[0], w[1], rng)).collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    /// Small conv net for 28×28 grayscale input: conv(5×5, stride 1) with
    /// 2×2 average pooling, a second conv(5×5) with pooling, then a dense
    /// readout.
    pub fn small_conv(channels: [usize; 2], outputs: usize, rng: &mut Rng) -> Result<Self> {
        let g1 = ConvGeometry { height: 28, width: 28, channels: 1, kernel: 5, stride: 1 };
        let l1 = Layer::conv(g1, channels[0], 2, rng)?;
        let g2 = ConvGeometry { height: 12, width: 12, channels: channels[0], kernel: 5, stride: 1 };
        let l2 = Layer::conv(g2, channels[1], 2, rng)?;
        let l3 = Layer::dense(l2.output_len(), outputs, rng)?;
        Self::new(vec![l1, l2, l3])
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, Layer::output_len)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}
