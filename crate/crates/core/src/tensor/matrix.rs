use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} ", self.rows, self.cols)?;
        if self.rows * self.cols <= 64 {
            f.debug_list()
                .entries(self.data.chunks(self.cols.max(1)))
                .finish()
        } else {
            write!(f, "[..]")
        }
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, data).expect("non-empty rows")
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Same data, new shape. Row-major layout makes this free.
    pub fn reshaped(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.data.len() || rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: self.shape(),
                right: (rows, cols),
            });
        }
        self.rows = rows;
        self.cols = cols;
        Ok(self)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        gemm(self, false, other, false, 1.0)
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other, op)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "subtract", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "hadamard", |a, b| a * b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|m[i][j] - m[j][i]|`; infinite for non-square input.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    /// `(M + Mᵀ) / 2`, computed so that the result is exactly symmetric.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = self`.
    ///
    /// Reads only the lower triangle.
    pub fn cholesky(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch {
                op: "cholesky",
                left: self.shape(),
                right: (self.cols, self.rows),
            });
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let (li, lj) = (&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let v = self.data[i * n + j] - dot;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: v });
                    }
                    l.data[i * n + i] = v.sqrt();
                } else {
                    l.data[i * n + j] = v / l.data[j * n + j];
                }
            }
        }
        Ok(l)
    }

    /// Inverse of a lower-triangular matrix, by row-wise forward substitution.
    pub fn lower_triangular_inverse(&self) -> Self {
        let n = self.rows;
        let mut x = Self::zeros(n, n);
        let mut row = vec![0.0; n];
        for i in 0..n {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[i] = 1.0;
            for k in 0..i {
                let lik = self.data[i * n + k];
                if lik != 0.0 {
                    let xk = &x.data[k * n..k * n + k + 1];
                    for (r, v) in row[..=k].iter_mut().zip(xk) {
                        *r -= lik * v;
                    }
                }
            }
            let d = 1.0 / self.data[i * n + i];
            for (dst, v) in x.data[i * n..i * n + i + 1].iter_mut().zip(&row[..=i]) {
                *dst = v * d;
            }
        }
        x
    }

    /// Inverse of a symmetric positive definite matrix through its Cholesky
    /// factor: `M⁻¹ = L⁻ᵀ L⁻¹`. The input is symmetrized first; asymmetry
    /// beyond `1e-9` (relative to the largest entry) is rejected.
    pub fn spd_inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch {
                op: "spd_inverse",
                left: self.shape(),
                right: (self.cols, self.rows),
            });
        }
        let asym = self.max_asymmetry();
        if asym > SYMMETRY_TOLERANCE * self.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let l = self.symmetrized().cholesky()?;
        let l_inv = l.lower_triangular_inverse();
        let inv = gemm(&l_inv, true, &l_inv, false, 1.0)?;
        // gemm rounding can leave a last-bit asymmetry
        Ok(inv.symmetrized())
    }
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// `alpha · op(a) · op(b)` where `op` optionally transposes. Transposition is
/// done through strides, never materialized.
pub fn gemm(a: &DenseMatrix, ta: bool, b: &DenseMatrix, tb: bool, alpha: f64) -> Result<DenseMatrix> {
    let m = if ta { a.cols } else { a.rows };
    let n = if tb { b.rows } else { b.cols };
    let mut out = DenseMatrix::zeros(m, n);
    gemm_into(a, ta, b, tb, alpha, 0.0, &mut out)?;
    Ok(out)
}

/// `out ← alpha · op(a) · op(b) + beta · out`.
pub fn gemm_into(
    a: &DenseMatrix,
    ta: bool,
    b: &DenseMatrix,
    tb: bool,
    alpha: f64,
    beta: f64,
    out: &mut DenseMatrix,
) -> Result<()> {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: (m, k),
            right: (k2, n),
        });
    }
    if out.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            op: "matmul output",
            left: (m, n),
            right: out.shape(),
        });
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: strides describe in-bounds views of `a.data`, `b.data` and
    // `out.data` for the stated m×k, k×n and m×n shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn matmul_identity_and_small_product() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(DenseMatrix::identity(2).matmul(&x).unwrap(), x);
        assert_eq!(x.matmul(&DenseMatrix::identity(2)).unwrap(), x);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn gemm_transposes_match_naive() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.5 - 1.0);
        let b = DenseMatrix::from_fn(4, 5, |i, j| ((i + 2 * j) % 7) as f64 - 3.0);
        let got = gemm(&a, true, &b, false, 1.0).unwrap();
        let want = naive(&a.transpose(), &b);
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);

        let c = DenseMatrix::from_fn(5, 3, |i, j| (i as f64) - (j as f64) * 0.25);
        let got = gemm(&a, false, &c, true, 2.0).unwrap();
        let want = naive(&a, &c.transpose()).scale(2.0);
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn spd_inverse_diagonal() {
        let m = DenseMatrix::diag(&[2.0, 4.0]);
        let inv = m.spd_inverse().unwrap();
        assert!(inv.max_abs_diff(&DenseMatrix::diag(&[0.5, 0.25])).unwrap() < 1e-15);
        assert_eq!(DenseMatrix::identity(3).spd_inverse().unwrap(), DenseMatrix::identity(3));
    }

    #[test]
    fn spd_inverse_rejects_indefinite_and_asymmetric() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(m.spd_inverse(), Err(Error::NotPositiveDefinite { .. })));
        let m = DenseMatrix::from_rows(&[[2.0, 0.5], [0.0, 2.0]]);
        assert!(matches!(m.spd_inverse(), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn cholesky_reconstructs() {
        let b = DenseMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let m = gemm(&b, true, &b, false, 1.0).unwrap().add(&DenseMatrix::identity(5)).unwrap();
        let l = m.cholesky().unwrap();
        let back = gemm(&l, false, &l, true, 1.0).unwrap();
        assert!(back.max_abs_diff(&m).unwrap() < 1e-12);
    }

    #[test]
    fn reshape_keeps_row_major_order() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let col = m.clone().reshaped(4, 1).unwrap();
        assert_eq!(col.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(m.reshaped(3, 1).is_err());
    }
}
