//! Fully connected and convolutional layers over flattened HWC feature maps.
//!
//! A convolution is a dense map applied to every receptive-field patch, so
//! both kinds share one weight layout `[out_features × fan_in]`. For a conv
//! layer the "presynaptic vector" seen by weight updates and lateral
//! circuits is a patch of length `kernel² · in_channels`, and each patch of
//! each sample is one row.

use crate::error::{HlopError, Result};
use crate::neuron::{rate_clamp, NeuronConfig};
use crate::numeric::{kaiming_uniform_init, matmul_nt, Matrix, Rng};

/// Spatial geometry of a convolution on an `height × width × channels` map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kernel >= 1
            && self.stride >= 1
            && self.channels >= 1
            && self.kernel <= self.height
            && self.kernel <= self.width
            && (self.height - self.kernel) % self.stride == 0
            && (self.width - self.kernel) % self.stride == 0;
        if ok {
            Ok(())
        } else {
            Err(HlopError::Shape(format!(
                "kernel {} stride {} does not tile a {}x{} map",
                self.kernel, self.stride, self.height, self.width
            )))
        }
    }

    pub fn out_height(&self) -> usize {
        (self.height - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width - self.kernel) / self.stride + 1
    }

    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.channels
    }

    pub fn map_len(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// One row per receptive field, columns ordered `(ky, kx, channel)`.
pub fn unfold_patches(map: &[f64], geom: &ConvGeometry) -> Result<Matrix> {
    geom.validate()?;
    if map.len() != geom.map_len() {
        return Err(HlopError::Shape(format!("feature map has {} values, geometry needs {}", map.len(), geom.map_len())));
    }
    let mut out = Matrix::zeros(geom.positions(), geom.patch_len());
    unfold_into(map, geom, out.as_mut_slice());
    Ok(out)
}

fn unfold_into(map: &[f64], g: &ConvGeometry, out: &mut [f64]) {
    let (c, k, plen) = (g.channels, g.kernel, g.patch_len());
    let mut row = 0;
    for oy in 0..g.out_height() {
        for ox in 0..g.out_width() {
            let dst = &mut out[row * plen..(row + 1) * plen];
            for ky in 0..k {
                let y = oy * g.stride + ky;
                let src = (y * g.width + ox * g.stride) * c;
                dst[ky * k * c..(ky + 1) * k * c].copy_from_slice(&map[src..src + k * c]);
            }
            row += 1;
        }
    }
}

/// Adjoint of [`unfold_patches`]: scatters patch rows back onto the map,
/// summing overlaps.
pub fn fold_patches(patches: &[f64], g: &ConvGeometry, map: &mut [f64]) {
    let (c, k, plen) = (g.channels, g.kernel, g.patch_len());
    map.iter_mut().for_each(|v| *v = 0.0);
    let mut row = 0;
    for oy in 0..g.out_height() {
        for ox in 0..g.out_width() {
            let src = &patches[row * plen..(row + 1) * plen];
            for ky in 0..k {
                let y = oy * g.stride + ky;
                let dst = (y * g.width + ox * g.stride) * c;
                for (m, p) in map[dst..dst + k * c].iter_mut().zip(&src[ky * k * c..(ky + 1) * k * c]) {
                    *m += p;
                }
            }
            row += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    /// `pool` is the side of a non-overlapping average pool applied to the
    /// spike map (1 = none).
    Conv { geom: ConvGeometry, out_channels: usize, pool: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `[out_features × fan_in]`
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub kind: LayerKind,
}

impl Layer {
    pub fn dense(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<Self> {
        let weights = kaiming_uniform_init(outputs, inputs, inputs, rng)?;
        Ok(Self { weights, bias: vec![0.0; outputs], kind: LayerKind::Dense { inputs, outputs } })
    }

    pub fn conv(geom: ConvGeometry, out_channels: usize, pool: usize, rng: &mut Rng) -> Result<Self> {
        geom.validate()?;
        if pool == 0 || geom.out_height() % pool != 0 || geom.out_width() % pool != 0 {
            return Err(HlopError::Shape(format!(
                "pool {pool} does not tile {}x{} conv output",
                geom.out_height(),
                geom.out_width()
            )));
        }
        let fan_in = geom.patch_len();
        let weights = kaiming_uniform_init(out_channels, fan_in, fan_in, rng)?;
        Ok(Self { weights, bias: vec![0.0; out_channels], kind: LayerKind::Conv { geom, out_channels, pool } })
    }

    pub fn from_parts(weights: Matrix, bias: Vec<f64>, kind: LayerKind) -> Result<Self> {
        let layer = Self { weights, bias, kind };
        let (rows, cols) = layer.weights.shape();
        if rows != layer.out_features() || cols != layer.fan_in() || layer.bias.len() != rows {
            return Err(HlopError::Shape(format!(
                "weights {rows}x{cols} / bias {} inconsistent with {:?}",
                layer.bias.len(),
                layer.kind
            )));
        }
        Ok(layer)
    }

    /// Length of one presynaptic (trace) vector: layer inputs, or a patch.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv { geom, .. } => geom.patch_len(),
        }
    }

    pub fn out_features(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv { out_channels, .. } => out_channels,
        }
    }

    /// Flattened input size per sample.
    pub fn input_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv { geom, .. } => geom.map_len(),
        }
    }

    /// Spiking neurons per sample.
    pub fn neurons(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv { geom, out_channels, .. } => geom.positions() * out_channels,
        }
    }

    /// Flattened output size per sample, after pooling.
    pub fn output_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv { geom, out_channels, pool } => geom.positions() / (pool * pool) * out_channels,
        }
    }

    /// Trace rows per sample (1 for dense, patch count for conv).
    pub fn rows_per_sample(&self) -> usize {
        match self.kind {
            LayerKind::Dense { .. } => 1,
            LayerKind::Conv { geom, .. } => geom.positions(),
        }
    }

    /// Presynaptic rows seen by the weights: the input itself for dense
    /// layers, unfolded patches for conv layers.
    pub fn presynaptic_rows(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        match self.kind {
            LayerKind::Dense { .. } => Ok(x.clone()),
            LayerKind::Conv { geom, .. } => {
                let (p, plen) = (geom.positions(), geom.patch_len());
                let mut out = Matrix::zeros(x.rows() * p, plen);
                for b in 0..x.rows() {
                    unfold_into(x.row(b), &geom, &mut out.as_mut_slice()[b * p * plen..(b + 1) * p * plen]);
                }
                Ok(out)
            }
        }
    }

    /// Input currents `W·x + b` for a batch; `batch × neurons`.
    pub fn current(&self, x: &Matrix) -> Result<Matrix> {
        let rows = self.presynaptic_rows(x)?;
        self.current_from_rows(&rows, x.rows())
    }

    pub fn current_from_rows(&self, rows: &Matrix, batch: usize) -> Result<Matrix> {
        let mut out = matmul_nt(rows, &self.weights)?;
        let f = self.out_features();
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        // Conv rows are (sample, position) pairs of `f` channels: reading the
        // same buffer as `batch × (positions·f)` gives the HWC layout.
        Matrix::from_vec(batch, out.rows() * f / batch.max(1), out.into_vec())
    }

    /// Reshapes a `batch × neurons` error into `(batch·rows_per_sample) × out_features`.
    pub fn error_rows(&self, delta: &Matrix) -> Result<Matrix> {
        Matrix::from_vec(delta.rows() * self.rows_per_sample(), self.out_features(), delta.as_slice().to_vec())
    }

    /// Maps errors on presynaptic rows (`rows × fan_in`) back to `batch × input_len`.
    pub fn fold_input_error(&self, rows: Matrix, batch: usize) -> Result<Matrix> {
        match self.kind {
            LayerKind::Dense { .. } => Ok(rows),
            LayerKind::Conv { geom, .. } => {
                let (p, plen) = (geom.positions(), geom.patch_len());
                let mut out = Matrix::zeros(batch, geom.map_len());
                for b in 0..batch {
                    fold_patches(&rows.as_slice()[b * p * plen..(b + 1) * p * plen], &geom, out.row_mut(b));
                }
                Ok(out)
            }
        }
    }

    /// Average-pools a `batch × neurons` activity map to `batch × output_len`.
    pub fn pool(&self, s: &Matrix) -> Matrix {
        match self.kind {
            LayerKind::Conv { geom, out_channels, pool } if pool > 1 => {
                let (oh, ow, c) = (geom.out_height(), geom.out_width(), out_channels);
                let (ph, pw) = (oh / pool, ow / pool);
                let inv = 1.0 / (pool * pool) as f64;
                let mut out = Matrix::zeros(s.rows(), ph * pw * c);
                for b in 0..s.rows() {
                    let src = s.row(b);
                    let dst = out.row_mut(b);
                    for y in 0..oh {
                        for x in 0..ow {
                            let d = ((y / pool) * pw + x / pool) * c;
                            let o = (y * ow + x) * c;
                            for ch in 0..c {
                                dst[d + ch] += inv * src[o + ch];
                            }
                        }
                    }
                }
                out
            }
            _ => s.clone(),
        }
    }

    /// Adjoint of [`Layer::pool`].
    pub fn unpool(&self, g: &Matrix) -> Matrix {
        match self.kind {
            LayerKind::Conv { geom, out_channels, pool } if pool > 1 => {
                let (oh, ow, c) = (geom.out_height(), geom.out_width(), out_channels);
                let pw = ow / pool;
                let inv = 1.0 / (pool * pool) as f64;
                let mut out = Matrix::zeros(g.rows(), oh * ow * c);
                for b in 0..g.rows() {
                    let src = g.row(b);
                    let dst = out.row_mut(b);
                    for y in 0..oh {
                        for x in 0..ow {
                            let d = ((y / pool) * pw + x / pool) * c;
                            let o = (y * ow + x) * c;
                            for ch in 0..c {
                                dst[o + ch] = inv * src[d + ch];
                            }
                        }
                    }
                }
                out
            }
            _ => g.clone(),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_len() {
            return Err(HlopError::Shape(format!("layer expects {} inputs, got {}", self.input_len(), x.cols())));
        }
        Ok(())
    }
}

/// Closed-form rate map of one layer: `clamp((W·z + b)/τ, 0, V_th/Δt)`.
pub fn rate_forward_transform(z_prev: &Matrix, layer: &Layer, cfg: &NeuronConfig) -> Result<Matrix> {
    let mut z = layer.current(z_prev)?;
    z.map_inplace(|v| rate_clamp(v, cfg));
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(h: usize, c: usize, k: usize, stride: usize) -> ConvGeometry {
        ConvGeometry { height: h, width: h, channels: c, kernel: k, stride }
    }

    #[test]
    fn patch_counts() {
        let p = unfold_patches(&[1.0, 2.0, 3.0, 4.0], &geom(2, 1, 2, 1)).unwrap();
        assert_eq!(p.shape(), (1, 4));
        assert_eq!(p.row(0), &[1.0, 2.0, 3.0, 4.0]);
        let map: Vec<f64> = (0..9).map(f64::from).collect();
        let p = unfold_patches(&map, &geom(3, 1, 2, 1)).unwrap();
        assert_eq!(p.shape(), (4, 4));
        assert_eq!(p.row(3), &[4.0, 5.0, 7.0, 8.0]);
    }

    #[test]
    fn constant_map_gives_identical_patches() {
        let g = geom(5, 2, 3, 1);
        let p = unfold_patches(&vec![0.7; g.map_len()], &g).unwrap();
        for r in 1..p.rows() {
            assert_eq!(p.row(r), p.row(0));
        }
    }

    #[test]
    fn incompatible_geometry_rejected() {
        assert!(unfold_patches(&[0.0; 16], &geom(4, 1, 3, 2)).is_err());
        assert!(unfold_patches(&[0.0; 4], &geom(2, 1, 3, 1)).is_err());
        assert!(unfold_patches(&[0.0; 5], &geom(2, 1, 2, 1)).is_err());
    }

    #[test]
    fn fold_is_adjoint_of_unfold() {
        let g = geom(5, 2, 3, 2);
        let mut rng = Rng::new(1);
        let x: Vec<f64> = (0..g.map_len()).map(|_| rng.uniform() - 0.5).collect();
        let y: Vec<f64> = (0..g.positions() * g.patch_len()).map(|_| rng.uniform() - 0.5).collect();
        let ux = unfold_patches(&x, &g).unwrap();
        let mut fy = vec![0.0; g.map_len()];
        fold_patches(&y, &g, &mut fy);
        let lhs: f64 = ux.as_slice().iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&fy).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn pool_is_adjoint_of_unpool() {
        let mut rng = Rng::new(2);
        let layer = Layer::conv(geom(6, 1, 3, 1), 3, 2, &mut rng).unwrap();
        let s = Matrix::from_vec(2, layer.neurons(), (0..2 * layer.neurons()).map(|_| rng.uniform()).collect()).unwrap();
        let g = Matrix::from_vec(2, layer.output_len(), (0..2 * layer.output_len()).map(|_| rng.uniform()).collect()).unwrap();
        let lhs: f64 = layer.pool(&s).as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = s.as_slice().iter().zip(layer.unpool(&g).as_slice()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn conv_current_matches_direct_sum() {
        let mut rng = Rng::new(4);
        let g = geom(4, 2, 2, 2);
        let layer = Layer::conv(g, 3, 1, &mut rng).unwrap();
        let x = Matrix::from_vec(1, g.map_len(), (0..g.map_len()).map(|_| rng.uniform()).collect()).unwrap();
        let cur = layer.current(&x).unwrap();
        // Output (oy=1, ox=0, channel 2).
        let mut want = layer.bias[2];
        for ky in 0..2 {
            for kx in 0..2 {
                for c in 0..2 {
                    let w = layer.weights[(2, (ky * 2 + kx) * 2 + c)];
                    want += w * x[(0, ((2 + ky) * 4 + kx) * 2 + c)];
                }
            }
        }
        assert!((cur[(0, (2 * 3) + 2)] - want).abs() < 1e-12);
    }

    #[test]
    fn rate_transform_clamps() {
        let cfg = NeuronConfig::rate_default();
        let mut layer = Layer::dense(1, 3, &mut Rng::new(0)).unwrap();
        layer.weights = Matrix::from_rows(&[[-1.0], [2.0], [10.0]]);
        let z = rate_forward_transform(&Matrix::from_rows(&[[1.0]]), &layer, &cfg).unwrap();
        assert_eq!(z[(0, 0)], 0.0);
        assert_eq!(z[(0, 1)], 2.0);
        assert!((z[(0, 2)] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn from_parts_checks_shapes() {
        let kind = LayerKind::Dense { inputs: 3, outputs: 2 };
        assert!(Layer::from_parts(Matrix::zeros(2, 3), vec![0.0; 2], kind).is_ok());
        assert!(Layer::from_parts(Matrix::zeros(3, 2), vec![0.0; 2], kind).is_err());
    }
}
