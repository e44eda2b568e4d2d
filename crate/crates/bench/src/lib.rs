//! Fixtures shared by the criterion benches.

use hlop_core::{Matrix, Rng};

/// `rows × cols` matrix of uniform draws in `[lo, hi)`.
pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform_range(lo, hi)).collect()).expect("shape")
}

/// Inputs resembling an MNIST batch: sparse pixels in `[0, 1]`.
pub fn pixel_batch(batch: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(
        batch,
        784,
        (0..batch * 784).map(|_| if rng.uniform() < 0.2 { rng.uniform() } else { 0.0 }).collect(),
    )
    .expect("shape")
}
