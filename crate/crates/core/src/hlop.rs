//! Lateral circuits: Hebbian subspace extraction and orthogonal projection.
//!
//! Each host layer owns one [`LateralSubspace`] over its presynaptic vectors
//! (length `n`). Subspace neurons receive `y = Hx` and feed back `x⁻ = −Hᵀy`
//! through the skew-symmetric return path, so the corrected trace
//! `x̂ = x + x⁻ = (I − HᵀH)x` is the activity with the protected subspace
//! removed. Rows of `H` are the consolidated neurons of finished tasks and
//! never change again; rows of `H_new` are the neurons being trained by the
//! two-stage Hebbian rule on the current task.

use crate::error::{HlopError, Result};
use crate::numeric::{kaiming_uniform_init, matmul, matmul_nt, matmul_tn, Matrix, Rng};

/// Burst-rate quantizer for spiking subspace neurons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantConfig {
    pub scale: f64,
    /// Burst length in lateral time steps.
    pub steps: usize,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self { scale: 20.0, steps: 40 }
    }
}

impl QuantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(HlopError::config("quant_scale", "must be positive"));
        }
        if self.steps == 0 {
            return Err(HlopError::config("quant_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// `scale · round(clamp(y, ±scale)/scale · T_l) / T_l`, ties away from zero.
#[inline]
pub fn quantize(y: f64, q: &QuantConfig) -> f64 {
    let t = q.steps as f64;
    q.scale * ((y.clamp(-q.scale, q.scale) / q.scale) * t).round() / t
}

pub fn quantize_subspace_output(y: &[f64], q: &QuantConfig) -> Vec<f64> {
    y.iter().map(|&v| quantize(v, q)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum LateralMode {
    #[default]
    Linear,
    Spiking(QuantConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HebbianConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Updates per presented batch; responses are recomputed before each.
    pub repeats: usize,
    /// `H_new` rows start Kaiming-uniform times this factor; the default
    /// gives rows of unit expected norm.
    pub init_scale: f64,
}

impl Default for HebbianConfig {
    fn default() -> Self {
        Self { lr: 0.01, momentum: 0.9, repeats: 5, init_scale: std::f64::consts::FRAC_1_SQRT_2 }
    }
}

/// Signals of one presynaptic vector through both lateral circuits.
#[derive(Clone, Debug, PartialEq)]
pub struct LateralResponse {
    /// Consolidated neuron outputs `Hx` (quantized in spiking mode).
    pub y: Vec<f64>,
    /// `−Hᵀy`
    pub x_minus: Vec<f64>,
    /// New neuron outputs `H_new·x`.
    pub y_new: Vec<f64>,
    /// `−H_newᵀy_new`
    pub x_minus_new: Vec<f64>,
    /// Integrated response `x⁻ + x⁻′` driving the anti-Hebbian stage.
    pub x_tilde: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LateralSubspace {
    consolidated: Matrix,
    fresh: Matrix,
    velocity: Matrix,
    pub hebbian: HebbianConfig,
    pub mode: LateralMode,
}

impl LateralSubspace {
    pub fn new(n: usize, hebbian: HebbianConfig, mode: LateralMode) -> Self {
        Self {
            consolidated: Matrix::zeros(0, n),
            fresh: Matrix::zeros(0, n),
            velocity: Matrix::zeros(0, n),
            hebbian,
            mode,
        }
    }

    /// Rebuilds a subspace from stored parts (checkpoint restore).
    pub fn from_parts(
        consolidated: Matrix,
        fresh: Matrix,
        velocity: Matrix,
        hebbian: HebbianConfig,
        mode: LateralMode,
    ) -> Result<Self> {
        let n = consolidated.cols();
        if fresh.cols() != n || velocity.shape() != fresh.shape() {
            return Err(HlopError::Shape(format!(
                "subspace parts: H {:?}, H_new {:?}, velocity {:?}",
                consolidated.shape(),
                fresh.shape(),
                velocity.shape()
            )));
        }
        Ok(Self { consolidated, fresh, velocity, hebbian, mode })
    }

    pub fn dim(&self) -> usize {
        self.consolidated.cols()
    }

    /// Consolidated rows `H`.
    pub fn consolidated(&self) -> &Matrix {
        &self.consolidated
    }

    /// In-training rows `H_new`.
    pub fn fresh(&self) -> &Matrix {
        &self.fresh
    }

    pub fn velocity(&self) -> &Matrix {
        &self.velocity
    }

    pub fn set_consolidated(&mut self, h: Matrix) -> Result<()> {
        if h.cols() != self.dim() {
            return Err(HlopError::Shape(format!("H width {} vs subspace dim {}", h.cols(), self.dim())));
        }
        self.consolidated = h;
        Ok(())
    }

    pub fn set_fresh(&mut self, h_new: Matrix) -> Result<()> {
        if h_new.cols() != self.dim() {
            return Err(HlopError::Shape(format!("H_new width {} vs subspace dim {}", h_new.cols(), self.dim())));
        }
        self.velocity = Matrix::zeros(h_new.rows(), h_new.cols());
        self.fresh = h_new;
        Ok(())
    }

    fn quantize_rows(&self, y: &mut Matrix) {
        if let LateralMode::Spiking(q) = self.mode {
            y.map_inplace(|v| quantize(v, &q));
        }
    }

    /// Outputs of the subspace neurons `rows` for each row of `x`, quantized
    /// in spiking mode.
    fn respond(&self, rows: &Matrix, x: &Matrix) -> Result<Matrix> {
        let mut y = matmul_nt(x, rows)?;
        self.quantize_rows(&mut y);
        Ok(y)
    }

    /// `x̂ = x − Hᵀy` with `y = Hx` through the consolidated circuit only.
    pub fn project_trace(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.project_rows(&Matrix::row_vector(x))?.into_vec())
    }

    /// [`project_trace`](Self::project_trace) applied to every row.
    pub fn project_rows(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        if self.consolidated.rows() == 0 {
            return Ok(x.clone());
        }
        let y = self.respond(&self.consolidated, x)?;
        let mut out = x.clone();
        out.add_scaled(&matmul(&y, &self.consolidated)?, -1.0)?;
        Ok(out)
    }

    pub fn lateral_response(&self, x: &[f64]) -> Result<LateralResponse> {
        let xm = Matrix::row_vector(x);
        self.check_width(&xm)?;
        let y = self.respond(&self.consolidated, &xm)?;
        let y_new = self.respond(&self.fresh, &xm)?;
        let mut x_minus = matmul(&y, &self.consolidated)?;
        x_minus.scale(-1.0);
        let mut x_minus_new = matmul(&y_new, &self.fresh)?;
        x_minus_new.scale(-1.0);
        let x_tilde: Vec<f64> = x_minus.as_slice().iter().zip(x_minus_new.as_slice()).map(|(a, b)| a + b).collect();
        Ok(LateralResponse {
            y: y.into_vec(),
            x_minus: x_minus.into_vec(),
            y_new: y_new.into_vec(),
            x_minus_new: x_minus_new.into_vec(),
            x_tilde,
        })
    }

    /// Batch-mean two-stage Hebbian update `mean(y′xᵀ + y′x̃ᵀ)` at the current
    /// weights, without applying it.
    pub fn hebbian_delta(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let return_consolidated = if self.consolidated.rows() > 0 {
            Some(matmul(&self.respond(&self.consolidated, x)?, &self.consolidated)?)
        } else {
            None
        };
        self.hebbian_delta_with(x, return_consolidated.as_ref())
    }

    /// `consolidated_return` is `Hᵀy` per row, which stays fixed while only
    /// `H_new` moves.
    fn hebbian_delta_with(&self, x: &Matrix, consolidated_return: Option<&Matrix>) -> Result<Matrix> {
        let y_new = self.respond(&self.fresh, x)?;
        // x + x̃ = x − Hᵀy − H_newᵀy′
        let mut drive = x.clone();
        drive.add_scaled(&matmul(&y_new, &self.fresh)?, -1.0)?;
        if let Some(r) = consolidated_return {
            drive.add_scaled(r, -1.0)?;
        }
        let mut delta = matmul_tn(&y_new, &drive)?;
        delta.scale(1.0 / x.rows().max(1) as f64);
        Ok(delta)
    }

    /// Trains `H_new` on a batch of presynaptic rows: `repeats` momentum
    /// steps, each on freshly computed responses. `H` is never touched.
    pub fn hebbian_update(&mut self, x: &Matrix) -> Result<()> {
        self.check_width(x)?;
        if self.fresh.rows() == 0 || x.rows() == 0 {
            return Ok(());
        }
        let consolidated_return = if self.consolidated.rows() > 0 {
            Some(matmul(&self.respond(&self.consolidated, x)?, &self.consolidated)?)
        } else {
            None
        };
        for _ in 0..self.hebbian.repeats {
            let delta = self.hebbian_delta_with(x, consolidated_return.as_ref())?;
            self.velocity.scale(self.hebbian.momentum);
            self.velocity.add_scaled(&delta, 1.0)?;
            self.fresh.add_scaled(&self.velocity, self.hebbian.lr)?;
        }
        if !self.fresh.all_finite() {
            return Err(HlopError::NonFinite("Hebbian update diverged".into()));
        }
        Ok(())
    }

    /// Adds `k_add` new subspace neurons and clears the momentum buffer.
    pub fn expand(&mut self, k_add: usize, rng: &mut Rng) -> Result<()> {
        if k_add == 0 {
            return Ok(());
        }
        let n = self.dim();
        let mut rows = kaiming_uniform_init(k_add, n, n, rng)?;
        rows.scale(self.hebbian.init_scale);
        self.fresh = self.fresh.vstack(&rows)?;
        self.velocity = Matrix::zeros(self.fresh.rows(), n);
        Ok(())
    }

    /// Appends `H_new` to `H` and empties `H_new`.
    pub fn consolidate(&mut self) -> Result<()> {
        let n = self.dim();
        self.consolidated = self.consolidated.vstack(&self.fresh)?;
        self.fresh = Matrix::zeros(0, n);
        self.velocity = Matrix::zeros(0, n);
        Ok(())
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(HlopError::Shape(format!("trace width {} vs subspace dim {}", x.cols(), self.dim())));
        }
        Ok(())
    }
}

/// Reference Oja subspace rule, batch-mean `yxᵀ − yyᵀH` with `y = Hx`.
pub fn oja_subspace_delta(h: &Matrix, x: &Matrix) -> Result<Matrix> {
    let y = matmul_nt(x, h)?;
    let mut delta = matmul_tn(&y, x)?;
    let yy = matmul_tn(&y, &y)?;
    delta.add_scaled(&matmul(&yy, h)?, -1.0)?;
    delta.scale(1.0 / x.rows().max(1) as f64);
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::orthonormalize_rows;

    fn linear(n: usize) -> LateralSubspace {
        LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear)
    }

    #[test]
    fn empty_subspace_is_identity() {
        let s = linear(3);
        assert_eq!(s.project_trace(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn projection_examples() {
        let mut s = linear(2);
        s.set_consolidated(Matrix::from_rows(&[[1.0, 0.0]])).unwrap();
        assert_eq!(s.project_trace(&[3.0, 4.0]).unwrap(), vec![0.0, 4.0]);
        s.set_consolidated(Matrix::identity(2)).unwrap();
        assert_eq!(s.project_trace(&[3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn response_examples() {
        let mut s = linear(2);
        s.set_consolidated(Matrix::from_rows(&[[1.0, 0.0]])).unwrap();
        s.set_fresh(Matrix::from_rows(&[[0.0, 1.0]])).unwrap();
        let r = s.lateral_response(&[1.0, 1.0]).unwrap();
        assert_eq!(r.x_tilde, vec![-1.0, -1.0]);

        let mut s = linear(2);
        s.set_fresh(Matrix::from_rows(&[[0.6, 0.8]])).unwrap();
        let r = s.lateral_response(&[1.0, 2.0]).unwrap();
        assert!(r.y.is_empty());
        assert_eq!(r.x_tilde, r.x_minus_new);

        let mut s = linear(2);
        s.set_fresh(Matrix::zeros(1, 2)).unwrap();
        let r = s.lateral_response(&[1.0, 2.0]).unwrap();
        assert_eq!(r.y_new, vec![0.0]);
        assert_eq!(r.x_minus_new, vec![0.0, 0.0]);
    }

    #[test]
    fn converged_subspace_is_stationary() {
        let mut s = linear(3);
        s.set_fresh(Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])).unwrap();
        let x = Matrix::from_rows(&[[2.0, -1.0, 0.0], [0.5, 3.0, 0.0]]);
        assert!(s.hebbian_delta(&x).unwrap().max_abs() < 1e-15);
        let before = s.fresh().clone();
        s.hebbian_update(&x).unwrap();
        assert_eq!(s.fresh(), &before);
    }

    #[test]
    fn two_stage_matches_oja_without_consolidated() {
        let mut rng = Rng::new(7);
        let mut s = linear(5);
        s.set_fresh(kaiming_uniform_init(3, 5, 5, &mut rng).unwrap()).unwrap();
        let x = kaiming_uniform_init(8, 5, 2, &mut rng).unwrap();
        let a = s.hebbian_delta(&x).unwrap();
        let b = oja_subspace_delta(s.fresh(), &x).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn expand_and_consolidate_shapes() {
        let mut rng = Rng::new(1);
        let mut s = linear(10);
        s.expand(0, &mut rng).unwrap();
        assert_eq!(s.fresh().rows(), 0);
        s.expand(3, &mut rng).unwrap();
        assert_eq!(s.fresh().shape(), (3, 10));
        assert_eq!(s.project_trace(&[1.0; 10]).unwrap(), vec![1.0; 10]);
        s.consolidate().unwrap();
        s.expand(2, &mut rng).unwrap();
        s.consolidate().unwrap();
        assert_eq!(s.consolidated().rows(), 5);
        let before = s.clone();
        s.consolidate().unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn hebbian_never_touches_consolidated() {
        let mut rng = Rng::new(3);
        let mut s = linear(6);
        s.set_consolidated(orthonormalize_rows(&kaiming_uniform_init(2, 6, 6, &mut rng).unwrap())).unwrap();
        s.expand(2, &mut rng).unwrap();
        let h = s.consolidated().clone();
        for _ in 0..20 {
            let x = kaiming_uniform_init(16, 6, 2, &mut rng).unwrap();
            s.hebbian_update(&x).unwrap();
        }
        assert_eq!(s.consolidated().as_slice(), h.as_slice());
    }

    #[test]
    fn quantizer_examples() {
        let q = QuantConfig { scale: 20.0, steps: 40 };
        assert_eq!(quantize(25.0, &q), 20.0);
        assert_eq!(quantize(-25.0, &q), -20.0);
        assert!((quantize(3.27, &q) - 3.5).abs() < 1e-12);
        // 0.25 grid units is a tie: away from zero on both sides.
        let q1 = QuantConfig { scale: 1.0, steps: 2 };
        assert_eq!(quantize(0.25, &q1), 0.5);
        assert_eq!(quantize(-0.25, &q1), -0.5);
        let fine = QuantConfig { scale: 20.0, steps: 1_000_000 };
        assert!((quantize(3.27, &fine) - 3.27).abs() < 1e-5);
    }

    #[test]
    fn spiking_projection_quantizes_y() {
        let q = QuantConfig { scale: 20.0, steps: 40 };
        let mut s = LateralSubspace::new(2, HebbianConfig::default(), LateralMode::Spiking(q));
        s.set_consolidated(Matrix::from_rows(&[[1.0, 0.0]])).unwrap();
        let r = s.lateral_response(&[3.27, 1.0]).unwrap();
        assert!((r.y[0] - 3.5).abs() < 1e-12);
        let p = s.project_trace(&[3.27, 1.0]).unwrap();
        assert!((p[0] + 0.23).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_rejected() {
        let s = linear(3);
        assert!(s.project_trace(&[1.0, 2.0]).is_err());
        assert!(s.lateral_response(&[1.0]).is_err());
    }
}
