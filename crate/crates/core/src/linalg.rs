//! Dense matrices and the least-squares solves used to fit output weights.
//!
//! Two entry points are exposed: [`pseudoinverse_solve`] computes the
//! minimum-norm least-squares solution through an SVD, and [`ridge_solve`]
//! solves the Tikhonov normal equations `(HᵀH + αI) B = HᵀY`. When several
//! regularization strengths are tried against the same design matrix,
//! [`RidgeSystem`] caches the Gram matrix (or the SVD) between solves.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense row-major-indexed matrix of finite `f64` values.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    inner: DMatrix<f64>,
}

impl Matrix {
    /// Builds a matrix from values listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for a {rows}x{cols} matrix", rows * cols),
                actual: format!("{} values", values.len()),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(rows, cols, &values),
        })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                expected: format!("{cols} columns"),
                actual: format!("{} columns in row {bad}", rows[bad].len()),
            });
        }
        let values = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, values)
    }

    /// Single-column matrix.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::from_row_major(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub(crate) fn from_inner(inner: DMatrix<f64>) -> Self {
        Self { inner }
    }

    pub(crate) fn inner(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub(crate) fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.inner.row(row).iter().copied().collect()
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        self.inner.column(col).iter().copied().collect()
    }

    /// Values listed row by row.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.inner.transpose().as_slice().to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r)).collect()
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        Self {
            inner: self.inner.select_rows(indices.iter()),
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols() != other.cols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", self.cols()),
                actual: format!("{} columns", other.cols()),
            });
        }
        let mut out = DMatrix::zeros(self.rows() + other.rows(), self.cols());
        out.rows_mut(0, self.rows()).copy_from(&self.inner);
        out.rows_mut(self.rows(), other.rows()).copy_from(&other.inner);
        Ok(Self { inner: out })
    }

    /// Concatenates column blocks side by side.
    pub fn hstack(blocks: &[Matrix]) -> Result<Matrix> {
        let rows = blocks.first().map_or(0, Matrix::rows);
        if let Some(bad) = blocks.iter().find(|b| b.rows() != rows) {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows} rows"),
                actual: format!("{} rows", bad.rows()),
            });
        }
        let cols = blocks.iter().map(Matrix::cols).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            out.columns_mut(at, b.cols()).copy_from(&b.inner);
            at += b.cols();
        }
        Ok(Self { inner: out })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols() != other.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows on the right operand", self.cols()),
                actual: format!("{} rows", other.rows()),
            });
        }
        Ok(Self {
            inner: &self.inner * &other.inner,
        })
    }

    pub fn transpose(&self) -> Matrix {
        Self {
            inner: self.inner.transpose(),
        }
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Self {
            inner: &self.inner * factor,
        }
    }

    /// Largest absolute entry; zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference. Panics on a shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff: shape mismatch");
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.inner.iter()
    }

    /// Index of the largest entry in each row, lowest index on ties.
    pub fn row_argmax(&self) -> Vec<usize> {
        (0..self.rows())
            .map(|r| {
                let row = self.inner.row(r);
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}", self.rows(), self.cols())?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Serialized form: shape plus row-major values.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            values: self.to_row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        Matrix::from_row_major(r.rows, r.cols, r.values).map_err(serde::de::Error::custom)
    }
}

fn check_system(h: &Matrix, y: &Matrix) -> Result<()> {
    if h.rows() != y.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} target rows", h.rows()),
            actual: format!("{} target rows", y.rows()),
        });
    }
    if h.rows() == 0 || h.cols() == 0 || y.cols() == 0 {
        return Err(invalid(format!(
            "empty system: H is {}x{}, Y is {}x{}",
            h.rows(),
            h.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if h.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite entry in least-squares system"));
    }
    Ok(())
}

fn thin_svd(h: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    SVD::try_new(h.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::DegenerateInput("SVD failed to converge".into()))
}

/// `V · diag(shrink(σ)) · Uᵀ · Y` for a thin SVD of `H`.
fn svd_apply(
    svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    y: &DMatrix<f64>,
    shrink: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let u = svd.u.as_ref().expect("U computed");
    let v_t = svd.v_t.as_ref().expect("Vᵀ computed");
    let mut projected = u.tr_mul(y);
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        let f = shrink(*sigma);
        projected.row_mut(i).scale_mut(f);
    }
    v_t.tr_mul(&projected)
}

fn pinv_cutoff(n: usize, m: usize, sigma_max: f64) -> f64 {
    n.max(m) as f64 * sigma_max * f64::EPSILON
}

/// Minimum-norm least-squares solution of `H B = Y`.
///
/// Singular values at or below `max(n, m) · σ_max · ε` are treated as zero.
pub fn pseudoinverse_solve(h: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_system(h, y)?;
    let svd = thin_svd(&h.inner)?;
    Ok(Matrix::from_inner(pinv_apply(&svd, h.shape(), &y.inner)))
}

fn pinv_apply(
    svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    (n, m): (usize, usize),
    y: &DMatrix<f64>,
) -> DMatrix<f64> {
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let tau = pinv_cutoff(n, m, sigma_max);
    svd_apply(svd, y, |s| if s > tau { 1.0 / s } else { 0.0 })
}

/// Solves `(HᵀH + αI) B = HᵀY`. With `alpha == 0` this is
/// [`pseudoinverse_solve`].
pub fn ridge_solve(h: &Matrix, y: &Matrix, alpha: f64) -> Result<Matrix> {
    RidgeSystem::new(h.clone(), y.clone())?.solve(alpha)
}

/// A least-squares system `H B ≈ Y` prepared for repeated ridge solves.
///
/// For tall or square `H` the Gram matrix `HᵀH` and `HᵀY` are formed once
/// and each [`solve`](Self::solve) runs a Cholesky factorization of
/// `HᵀH + αI`. The SVD of `H` is computed lazily, only when the system is
/// wide, the factorization fails, or `α == 0`.
pub struct RidgeSystem {
    h: DMatrix<f64>,
    y: DMatrix<f64>,
    normal: Option<(DMatrix<f64>, DMatrix<f64>)>,
    svd: OnceLock<std::result::Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, String>>,
}

impl RidgeSystem {
    pub fn new(h: Matrix, y: Matrix) -> Result<Self> {
        check_system(&h, &y)?;
        let (h, y) = (h.into_inner(), y.into_inner());
        let normal = (h.ncols() <= h.nrows()).then(|| {
            let h_t = h.transpose();
            (&h_t * &h, &h_t * &y)
        });
        Ok(Self {
            h,
            y,
            normal,
            svd: OnceLock::new(),
        })
    }

    /// Number of unknown rows in the solution (columns of `H`).
    pub fn unknowns(&self) -> usize {
        self.h.ncols()
    }

    fn svd(&self) -> Result<&SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        self.svd
            .get_or_init(|| thin_svd(&self.h).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::DegenerateInput(e.clone()))
    }

    pub fn solve(&self, alpha: f64) -> Result<Matrix> {
        if alpha.is_nan() || alpha < 0.0 || !alpha.is_finite() {
            return Err(invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if alpha == 0.0 {
            let svd = self.svd()?;
            return Ok(Matrix::from_inner(pinv_apply(svd, self.h.shape(), &self.y)));
        }
        if let Some((gram, rhs)) = &self.normal {
            let mut a = gram.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += alpha;
            }
            if let Some(chol) = Cholesky::new(a) {
                let beta = chol.solve(rhs);
                if beta.iter().all(|v| v.is_finite()) {
                    return Ok(Matrix::from_inner(beta));
                }
            }
        }
        let svd = self.svd()?;
        Ok(Matrix::from_inner(svd_apply(svd, &self.y, |s| {
            s / (s * s + alpha)
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_length() {
        assert!(Matrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let a = Matrix::from_row_major(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(a.get(0, 2), 3.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.to_row_major(), vec![1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn pinv_identity() {
        let b = pseudoinverse_solve(&Matrix::identity(2), &m(&[&[1.], &[2.]])).unwrap();
        assert!(b.max_abs_diff(&m(&[&[1.], &[2.]])) < 1e-15);
    }

    #[test]
    fn pinv_tall_column() {
        let b = pseudoinverse_solve(&m(&[&[1.], &[2.]]), &m(&[&[1.], &[2.]])).unwrap();
        assert!((b.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_rank_deficient_minimum_norm() {
        let b = pseudoinverse_solve(&m(&[&[1., 1.], &[1., 1.]]), &m(&[&[2.], &[2.]])).unwrap();
        assert!(b.max_abs_diff(&m(&[&[1.], &[1.]])) < 1e-12);
    }

    #[test]
    fn ridge_scalar_and_identity() {
        let b = ridge_solve(&m(&[&[1.]]), &m(&[&[1.]]), 1.0).unwrap();
        assert!((b.get(0, 0) - 0.5).abs() < 1e-15);
        let b = ridge_solve(&Matrix::identity(2), &m(&[&[2.], &[4.]]), 1.0).unwrap();
        assert!(b.max_abs_diff(&m(&[&[1.], &[2.]])) < 1e-15);
    }

    #[test]
    fn ridge_rejects_negative_alpha_and_mismatch() {
        let h = Matrix::identity(2);
        assert!(matches!(
            ridge_solve(&h, &m(&[&[1.], &[1.]]), -1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ridge_solve(&h, &m(&[&[1.]]), 1.0),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            ridge_solve(&h, &m(&[&[1.], &[1.]]), f64::NAN),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ridge_zero_alpha_matches_pinv() {
        let h = m(&[&[1., 2.], &[3., 4.], &[5., 7.]]);
        let y = m(&[&[1.], &[0.], &[2.]]);
        let a = ridge_solve(&h, &y, 0.0).unwrap();
        let b = pseudoinverse_solve(&h, &y).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wide_system_uses_svd_path() {
        // 1x2: H = [1 1], Y = [2]; ridge solution is Hᵀ(HHᵀ+α)⁻¹Y = [2/(2+α)] * [1 1]
        let h = m(&[&[1., 1.]]);
        let y = m(&[&[2.]]);
        let b = ridge_solve(&h, &y, 0.5).unwrap();
        assert!(b.max_abs_diff(&m(&[&[0.8], &[0.8]])) < 1e-14);
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        let s = m(&[&[0.2, 0.9, -0.1], &[0.5, 0.5, 0.0]]);
        assert_eq!(s.row_argmax(), vec![1, 0]);
    }

    #[test]
    fn stacking() {
        let a = m(&[&[1., 2.]]);
        let b = m(&[&[3., 4.]]);
        assert_eq!(a.vstack(&b).unwrap(), m(&[&[1., 2.], &[3., 4.]]));
        assert_eq!(
            Matrix::hstack(&[a.clone(), b.clone()]).unwrap(),
            m(&[&[1., 2., 3., 4.]])
        );
        assert!(a.vstack(&Matrix::zeros(1, 3)).is_err());
    }
}
