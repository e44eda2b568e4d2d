//! Weight updates formed as `ΔW = δᵀ·x` from (error, trace) row pairs.
//!
//! Every trainer reports its gradient in this factored form so a lateral
//! circuit can rewrite the traces before the product is taken.

use crate::error::{HlopError, Result};
use crate::hlop::LateralSubspace;
use crate::layer::Layer;
use crate::numeric::{matmul_tn, Matrix};

/// Error and presynaptic-trace rows for one layer. Row `r` of `delta`
/// pairs with row `r` of `trace`; rows may span samples, time steps and
/// conv positions.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    /// `rows × out_features`
    pub delta: Matrix,
    /// `rows × fan_in`
    pub trace: Matrix,
}

impl LayerGrad {
    pub fn new(delta: Matrix, trace: Matrix) -> Result<Self> {
        if delta.rows() != trace.rows() {
            return Err(HlopError::Shape(format!(
                "gradient packet: {} error rows vs {} trace rows",
                delta.rows(),
                trace.rows()
            )));
        }
        Ok(Self { delta, trace })
    }

    pub fn empty(out_features: usize, fan_in: usize) -> Self {
        Self { delta: Matrix::zeros(0, out_features), trace: Matrix::zeros(0, fan_in) }
    }

    pub fn append(&mut self, other: &LayerGrad) -> Result<()> {
        self.delta = self.delta.vstack(&other.delta)?;
        self.trace = self.trace.vstack(&other.trace)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradPacket {
    pub layers: Vec<LayerGrad>,
    /// Samples in the batch; updates are averaged over this.
    pub batch: usize,
}

impl GradPacket {
    /// Raw `Σ_r δ_rᵀ x_r / batch` for one layer (loss gradient, no projection).
    pub fn weight_grad(&self, layer: usize) -> Result<Matrix> {
        let g = &self.layers[layer];
        let mut w = matmul_tn(&g.delta, &g.trace)?;
        w.scale(1.0 / self.batch.max(1) as f64);
        Ok(w)
    }

    pub fn bias_grad(&self, layer: usize) -> Vec<f64> {
        let d = &self.layers[layer].delta;
        let mut b = vec![0.0; d.cols()];
        for r in 0..d.rows() {
            for (bi, v) in b.iter_mut().zip(d.row(r)) {
                *bi += v;
            }
        }
        let inv = 1.0 / self.batch.max(1) as f64;
        b.iter_mut().for_each(|v| *v *= inv);
        b
    }
}

/// `W ← W − lr·δᵀx̂ / batch`, where `x̂` is the trace projected by the
/// consolidated lateral circuit when one is given. Biases follow the raw
/// error and are never projected.
pub fn sgd_update(
    layer: &mut Layer,
    grad: &LayerGrad,
    batch: usize,
    lr: f64,
    projection: Option<&LateralSubspace>,
    update_bias: bool,
) -> Result<()> {
    if grad.delta.cols() != layer.out_features() || grad.trace.cols() != layer.fan_in() {
        return Err(HlopError::Shape(format!(
            "packet {}|{} vs layer {}x{}",
            grad.delta.cols(),
            grad.trace.cols(),
            layer.out_features(),
            layer.fan_in()
        )));
    }
    if lr == 0.0 || grad.delta.rows() == 0 {
        return Ok(());
    }
    let scale = -lr / batch.max(1) as f64;
    let dw = match projection {
        Some(sub) => matmul_tn(&grad.delta, &sub.project_rows(&grad.trace)?)?,
        None => matmul_tn(&grad.delta, &grad.trace)?,
    };
    layer.weights.add_scaled(&dw, scale)?;
    if update_bias {
        for r in 0..grad.delta.rows() {
            for (b, d) in layer.bias.iter_mut().zip(grad.delta.row(r)) {
                *b += scale * d;
            }
        }
    }
    if !layer.weights.all_finite() {
        return Err(HlopError::NonFinite("weights diverged during update".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hlop::{HebbianConfig, LateralMode};
    use crate::layer::LayerKind;

    fn scalar_layer(w: f64) -> Layer {
        Layer::from_parts(Matrix::from_rows(&[[w]]), vec![0.0], LayerKind::Dense { inputs: 1, outputs: 1 }).unwrap()
    }

    #[test]
    fn single_entry_update() {
        let mut layer = scalar_layer(0.0);
        let g = LayerGrad::new(Matrix::from_rows(&[[1.0]]), Matrix::from_rows(&[[2.0]])).unwrap();
        sgd_update(&mut layer, &g, 1, 0.1, None, false).unwrap();
        assert!((layer.weights[(0, 0)] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_or_zero_trace_is_noop() {
        let mut layer = scalar_layer(0.7);
        let g = LayerGrad::new(Matrix::from_rows(&[[1.0]]), Matrix::from_rows(&[[2.0]])).unwrap();
        sgd_update(&mut layer, &g, 1, 0.0, None, true).unwrap();
        assert_eq!(layer.weights[(0, 0)], 0.7);

        let mut sub = LateralSubspace::new(1, HebbianConfig::default(), LateralMode::Linear);
        sub.set_consolidated(Matrix::from_rows(&[[1.0]])).unwrap();
        sgd_update(&mut layer, &g, 1, 0.5, Some(&sub), false).unwrap();
        assert_eq!(layer.weights[(0, 0)], 0.7);
    }

    #[test]
    fn mismatched_rows_rejected() {
        assert!(LayerGrad::new(Matrix::zeros(2, 1), Matrix::zeros(3, 1)).is_err());
    }
}
