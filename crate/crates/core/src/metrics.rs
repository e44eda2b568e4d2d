//! Continual-learning metrics and the subspace comparison used by oracles.

use crate::error::{HlopError, Result};
use crate::numeric::{rowspace_projector, Matrix};

/// Pseudo-inverse cutoff when forming the projector of a learned `H`.
pub const PINV_TOL: f64 = 1e-8;

/// Lower-triangular table: `acc[k][i]` is the accuracy (%) on task `i`
/// after learning tasks `0..=k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new();
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Appends the row for the next finished task; it must hold one entry
    /// per task seen so far.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.rows.len() + 1 {
            return Err(HlopError::Shape(format!(
                "accuracy row {} needs {} entries, got {}",
                self.rows.len(),
                self.rows.len() + 1,
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(HlopError::InvalidArgument(format!("accuracy {v} outside [0, 100]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, after: usize, task: usize) -> Option<f64> {
        self.rows.get(after).and_then(|r| r.get(task)).copied()
    }
}

/// Average accuracy and backward transfer after `k` tasks (`k ≥ 1`).
///
/// `avg_acc = mean_i acc[k−1][i]`, `avg_bwt = mean_{i<k−1} acc[k−1][i] − acc[i][i]`;
/// BWT is `None` for a single task.
pub fn compute_acc_bwt(m: &AccuracyMatrix, k: usize) -> Result<(f64, Option<f64>)> {
    if k == 0 || k > m.tasks() {
        return Err(HlopError::InvalidArgument(format!("k={k} with {} recorded tasks", m.tasks())));
    }
    let last = &m.rows[k - 1];
    let acc = last.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return Ok((acc, None));
    }
    let bwt = (0..k - 1).map(|i| last[i] - m.rows[i][i]).sum::<f64>() / (k - 1) as f64;
    Ok((acc, Some(bwt)))
}

/// `‖P_H − P_M‖_F / √(2k)`, with `P_H` the projector onto rowspace(H)
/// (pseudo-inverse, tolerance [`PINV_TOL`]) and `P_M = MᵀM`, `k = rows(M)`.
pub fn subspace_alignment_error(h: &Matrix, m: &Matrix) -> Result<f64> {
    if h.cols() != m.cols() {
        return Err(HlopError::Shape(format!("alignment: H has {} columns, M has {}", h.cols(), m.cols())));
    }
    let k = m.rows();
    if k == 0 {
        return Err(HlopError::InvalidArgument("alignment against an empty reference".into()));
    }
    let p_h = rowspace_projector(h, PINV_TOL)?;
    let p_m = crate::numeric::matmul_tn(m, m)?;
    Ok(p_h.sub(&p_m)?.frobenius_norm() / (2.0 * k as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_matrix() {
        let m = AccuracyMatrix::from_rows(vec![vec![90.0], vec![85.0, 92.0]]).unwrap();
        assert_eq!(compute_acc_bwt(&m, 2).unwrap(), (88.5, Some(-5.0)));
        assert_eq!(compute_acc_bwt(&m, 1).unwrap(), (90.0, None));
        assert!(compute_acc_bwt(&m, 3).is_err());
    }

    #[test]
    fn no_forgetting_zero_bwt() {
        let m = AccuracyMatrix::from_rows(vec![vec![80.0], vec![80.0, 70.0], vec![80.0, 70.0, 60.0]]).unwrap();
        assert_eq!(compute_acc_bwt(&m, 3).unwrap().1, Some(0.0));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(AccuracyMatrix::from_rows(vec![vec![1.0, 2.0]]).is_err());
        assert!(AccuracyMatrix::from_rows(vec![vec![101.0]]).is_err());
    }

    #[test]
    fn alignment_extremes() {
        let m = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]);
        assert!(subspace_alignment_error(&m, &m).unwrap() < 1e-12);
        let orth = Matrix::from_rows(&[[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]);
        assert!((subspace_alignment_error(&orth, &m).unwrap() - 1.0).abs() < 1e-12);
        // Row mixing leaves the projector alone.
        let mixed = Matrix::from_rows(&[[2.0, 1.0, 0.0, 0.0], [-3.0, 0.5, 0.0, 0.0]]);
        assert!(subspace_alignment_error(&mixed, &m).unwrap() < 1e-10);
    }
}
