//! Fixtures shared by the criterion benches.

use xaml_core::synthetic;
use xaml_core::Matrix;

/// Deterministic `rows × cols` matrix with entries in `[-1, 1]`.
pub fn fixture_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    // Reuse the noise generator so the benches need no RNG of their own.
    let d = synthetic::pure_noise(rows, cols, seed);
    let values = d.features.iter().map(|v| v.tanh()).collect();
    Matrix::from_row_major(rows, cols, values).expect("finite values")
}
