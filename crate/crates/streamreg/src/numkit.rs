//! Dense linear algebra for the small symmetric systems the learners maintain.
//!
//! Matrices are row-major. Windows never exceed a few hundred rows, so every
//! routine here is a straightforward O(n²) or O(n³) loop.

use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Rank-1 denominators below this magnitude are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {index} = {pivot})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("rank-1 denominator {denominator} is numerically zero")]
    SingularUpdate { denominator: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::identity(n);
        m.scale_in_place(s);
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows × cols");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.scale_in_place(s);
        m
    }

    pub fn add(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// xᵀ·M·x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Adds `s·u·vᵀ` in place.
    pub fn add_outer(&mut self, s: f64, u: &[f64], v: &[f64]) {
        assert_eq!((self.rows, self.cols), (u.len(), v.len()));
        for (i, &ui) in u.iter().enumerate() {
            let f = s * ui;
            if f == 0.0 {
                continue;
            }
            for (m, &vj) in self.row_mut(i).iter_mut().zip(v) {
                *m += f * vj;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ‖self − I‖ in the max norm.
    pub fn identity_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                m = m.max((self[(i, j)] - target).abs());
            }
        }
        m
    }

    /// Copy of the matrix with row and column `k` removed.
    pub fn without_row_col(&self, k: usize) -> Self {
        let n = self.rows;
        assert!(self.is_square() && k < n);
        let mut data = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|&i| i != k) {
            for j in (0..n).filter(|&j| j != k) {
                data.push(self[(i, j)]);
            }
        }
        Self { rows: n - 1, cols: n - 1, data }
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn require_square(m: &Matrix) -> Result<(), LinalgError> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected: m.rows, got: m.cols })
    }
}

fn require_len(m: &Matrix, x: &[f64]) -> Result<(), LinalgError> {
    require_square(m)?;
    if x.len() == m.rows {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected: m.rows, got: x.len() })
    }
}

/// Lower Cholesky factor without pivoting. Only the lower triangle of `m` is read.
pub fn cholesky_lower(m: &Matrix) -> Result<Matrix, LinalgError> {
    require_square(m)?;
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let pivot = m[(j, j)] - dot(lj, lj);
        if !(pivot > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l.data[j * n + j] = d;
        for i in (j + 1)..n {
            let s = m[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l.data[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution, column by column.
pub fn invert_lower(l: &Matrix) -> Matrix {
    let n = l.rows;
    let mut inv = Matrix::zeros(n, n);
    for c in 0..n {
        inv[(c, c)] = 1.0 / l[(c, c)];
        for i in (c + 1)..n {
            let mut s = 0.0;
            for k in c..i {
                s += l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Solves L·z = b for lower-triangular L.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &z[..i]);
        z[i] = s / l[(i, i)];
    }
    z
}

/// Solves Lᵀ·z = b for lower-triangular L.
pub fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Solves A·z = b given the Cholesky factor of A.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// ln|A| from its Cholesky factor.
pub fn log_det_from_cholesky(l: &Matrix) -> f64 {
    2.0 * (0..l.rows).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// A⁻¹ = L⁻ᵀ·L⁻¹ from the Cholesky factor.
pub fn inverse_from_cholesky(l: &Matrix) -> Matrix {
    let n = l.rows;
    let li = invert_lower(l);
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += li[(k, i)] * li[(k, j)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

pub fn invert_psd(m: &Matrix) -> Result<Matrix, LinalgError> {
    Ok(inverse_from_cholesky(&cholesky_lower(m)?))
}

/// In-place (A + x·xᵀ)⁻¹ from A⁻¹.
pub fn rank1_update_inverse_in_place(a_inv: &mut Matrix, x: &[f64]) -> Result<(), LinalgError> {
    rank1_in_place(a_inv, x, 1.0)
}

/// In-place (A − x·xᵀ)⁻¹ from A⁻¹.
pub fn rank1_downdate_inverse_in_place(a_inv: &mut Matrix, x: &[f64]) -> Result<(), LinalgError> {
    rank1_in_place(a_inv, x, -1.0)
}

fn rank1_in_place(a_inv: &mut Matrix, x: &[f64], sign: f64) -> Result<(), LinalgError> {
    require_len(a_inv, x)?;
    let u = a_inv.mul_vec(x);
    let denominator = 1.0 + sign * dot(x, &u);
    if denominator.abs() < SINGULAR_TOL || !denominator.is_finite() {
        return Err(LinalgError::SingularUpdate { denominator });
    }
    // A⁻¹ is symmetric, so xᵀA⁻¹ equals u.
    a_inv.add_outer(-sign / denominator, &u, &u);
    Ok(())
}

pub fn rank1_update_inverse(a_inv: &Matrix, x: &[f64]) -> Result<Matrix, LinalgError> {
    let mut out = a_inv.clone();
    rank1_update_inverse_in_place(&mut out, x)?;
    Ok(out)
}

pub fn rank1_downdate_inverse(a_inv: &Matrix, x: &[f64]) -> Result<Matrix, LinalgError> {
    let mut out = a_inv.clone();
    rank1_downdate_inverse_in_place(&mut out, x)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn cholesky_of_identity_and_diagonal() {
        assert_eq!(cholesky_lower(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let l = cholesky_lower(&Matrix::diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(l, Matrix::diagonal(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(cholesky_lower(&m), Err(LinalgError::NotPositiveDefinite { index: 1, .. })));
        let z = Matrix::zeros(2, 2);
        assert!(cholesky_lower(&z).is_err());
    }

    #[test]
    fn invert_diagonal() {
        let inv = invert_psd(&Matrix::diagonal(&[2.0, 4.0])).unwrap();
        assert!(close(&inv, &Matrix::diagonal(&[0.5, 0.25]), 1e-15));
        assert!(close(&invert_psd(&Matrix::identity(4)).unwrap(), &Matrix::identity(4), 0.0));
    }

    #[test]
    fn rank1_examples() {
        let up = rank1_update_inverse(&Matrix::identity(2), &[1.0, 0.0]).unwrap();
        assert!(close(&up, &Matrix::diagonal(&[0.5, 1.0]), 1e-15));
        let same = rank1_update_inverse(&Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(same, Matrix::identity(2));
        let down = rank1_downdate_inverse(&Matrix::diagonal(&[0.5, 1.0]), &[1.0, 0.0]).unwrap();
        assert!(close(&down, &Matrix::identity(2), 1e-15));
    }

    #[test]
    fn downdate_to_singular_is_reported() {
        let err = rank1_downdate_inverse(&Matrix::identity(2), &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, LinalgError::SingularUpdate { .. }));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        assert!(matches!(
            rank1_update_inverse(&Matrix::identity(2), &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        assert!(cholesky_lower(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn triangular_solves() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]]);
        let l = cholesky_lower(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let z = cholesky_solve(&l, &b);
        let back = a.mul_vec(&z);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let det = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.4) + 0.4 * (2.0 - 5.0 * 0.4);
        assert!((log_det_from_cholesky(&l) - f64::ln(det)).abs() < 1e-12);
    }
}
