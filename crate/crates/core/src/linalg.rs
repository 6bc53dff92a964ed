//! Dense matrix primitives and the recursive least-squares decoder update.
//!
//! Everything here works on small, row-major `f64` matrices. The decoder
//! path only ever inverts `k x k` (or batch-sized) systems, so a plain
//! partially pivoted LU factorization is all the numerics we need.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Tikhonov term added to the Gram matrix when the decoder is
/// initialized from the first batch.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Columns whose norm falls below this after orthogonalization are
/// considered degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Mat::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice yields `0 x 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "Mat::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        if let Some(bad) = columns.iter().find(|c| c.as_ref().len() != rows) {
            return Err(Error::shape(
                "Mat::from_columns",
                format!("columns of length {rows}"),
                format!("column of length {}", bad.as_ref().len()),
            ));
        }
        Ok(Mat::from_fn(rows, columns.len(), |i, j| columns[j].as_ref()[i]))
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Mat {
        assert!(start <= end && end <= self.rows, "row range out of bounds");
        Mat {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Mat) -> Result<Mat> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            return Err(Error::shape(
                "vstack",
                format!("{} columns", self.cols),
                format!("{} columns", other.cols),
            ));
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Mat {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "matmul",
                format!("lhs cols == rhs rows ({})", self.cols),
                format!("{}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            ));
        }
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (p, &a) in lhs_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * rhs.cols..(p + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.rows != rhs.rows {
            return Err(Error::shape(
                "t_matmul",
                format!("equal row counts ({})", self.rows),
                format!("{} and {}", self.rows, rhs.rows),
            ));
        }
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = rhs.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Mat, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(
                op,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|a_ij - a_ji|`; zero for non-square input is not meaningful.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn inverse(&self, name: &'static str) -> Result<Mat> {
        Lu::factor(self, name)?.solve(&Mat::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Mat, name: &'static str) -> Result<Lu> {
        if a.rows != a.cols {
            return Err(Error::shape(
                "lu",
                "square matrix",
                format!("{}x{}", a.rows, a.cols),
            ));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = f64::EPSILON * (n.max(1) as f64) * a.max_abs();

        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= tol || pivot_abs == 0.0 {
                return Err(Error::Singular { matrix: name });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.data.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[(col, col)];
            for r in (col + 1)..n {
                let factor = lu[(r, col)] / pivot;
                lu[(r, col)] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in (col + 1)..n {
                    let v = lu[(col, j)];
                    lu[(r, j)] -= factor * v;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solves `A X = B` for every column of `B`.
    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.lu.rows;
        if b.rows != n {
            return Err(Error::shape(
                "lu solve",
                format!("{n} rows"),
                format!("{} rows", b.rows),
            ));
        }
        let m = b.cols;
        let mut x = Mat::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).copy_from_slice(b.row(p));
        }
        // forward substitution with the unit lower factor
        for i in 0..n {
            for p in 0..i {
                let f = self.lu[(i, p)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = x[(p, j)];
                    x[(i, j)] -= f * v;
                }
            }
        }
        for i in (0..n).rev() {
            for p in (i + 1)..n {
                let f = self.lu[(i, p)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = x[(p, j)];
                    x[(i, j)] -= f * v;
                }
            }
            let d = self.lu[(i, i)];
            for j in 0..m {
                x[(i, j)] /= d;
            }
        }
        Ok(x)
    }
}

/// Orthonormalizes `columns` with Gram-Schmidt, failing on a degenerate
/// column.
pub fn gram_schmidt(columns: &[Vec<f64>]) -> Result<Mat> {
    gram_schmidt_with(columns, |column, norm| Err(Error::Degenerate { column, norm }))
}

/// Gram-Schmidt where a degenerate column is replaced by a fresh vector
/// from `regenerate` and orthogonalized again.
///
/// `regenerate` receives the column index and the offending residual norm;
/// it may itself fail, which aborts the whole orthonormalization.
pub fn gram_schmidt_with(
    columns: &[Vec<f64>],
    mut regenerate: impl FnMut(usize, f64) -> Result<Vec<f64>>,
) -> Result<Mat> {
    let len = columns.first().map_or(0, Vec::len);
    if columns.len() > len {
        return Err(Error::InvalidArgument(format!(
            "cannot orthonormalize {} vectors of length {len}",
            columns.len()
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for (i, column) in columns.iter().enumerate() {
        if column.len() != len {
            return Err(Error::shape(
                "gram_schmidt",
                format!("vectors of length {len}"),
                format!("vector {i} of length {}", column.len()),
            ));
        }
        let mut candidate = column.clone();
        loop {
            let mut v = candidate.clone();
            for a in &basis {
                let proj = dot(a, &v);
                for (vi, ai) in v.iter_mut().zip(a) {
                    *vi -= proj * ai;
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm.is_finite() && norm >= DEGENERATE_NORM {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
                break;
            }
            candidate = regenerate(i, norm)?;
            if candidate.len() != len {
                return Err(Error::shape(
                    "gram_schmidt",
                    format!("regenerated vector of length {len}"),
                    candidate.len(),
                ));
            }
        }
    }
    Mat::from_columns(&basis)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Recursive least-squares decoder state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlsState {
    /// `(HᵀH + ridge·I)⁻¹` over all absorbed rows, `k x k`.
    pub inverse_gram: Mat,
    /// Decoding matrix, `k x l`.
    pub beta: Mat,
    /// Number of rows absorbed so far.
    pub seen: usize,
}

impl RlsState {
    pub fn reduced_dim(&self) -> usize {
        self.beta.rows()
    }

    pub fn label_dim(&self) -> usize {
        self.beta.cols()
    }
}

/// Solves the ridge-regularized least-squares problem `min ‖L − Hβ‖² + ridge‖β‖²`
/// in one shot and returns it as an RLS starting point.
pub fn batch_least_squares(h: &Mat, labels: &Mat, ridge: f64) -> Result<RlsState> {
    if h.rows() == 0 {
        return Err(Error::InvalidArgument(
            "least squares needs at least one row".into(),
        ));
    }
    if h.rows() != labels.rows() {
        return Err(Error::shape(
            "batch_least_squares",
            format!("{} label rows", h.rows()),
            format!("{} label rows", labels.rows()),
        ));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    if !h.is_finite() {
        return Err(Error::NonFinite("pseudo-label matrix"));
    }
    if !labels.is_finite() {
        return Err(Error::NonFinite("label matrix"));
    }
    let k = h.cols();
    let mut gram = h.t_matmul(h)?;
    for i in 0..k {
        gram[(i, i)] += ridge;
    }
    let mut inverse_gram = gram.inverse("Gram matrix HᵀH")?;
    inverse_gram.symmetrize();
    let beta = inverse_gram.matmul(&h.t_matmul(labels)?)?;
    Ok(RlsState {
        inverse_gram,
        beta,
        seen: h.rows(),
    })
}

/// Absorbs a new batch into the decoder with the Woodbury identity:
///
/// ```text
/// K' = K − K Hᵀ (I + H K Hᵀ)⁻¹ H K
/// β' = β + K' Hᵀ (L − H β)
/// ```
pub fn rls_update(state: &mut RlsState, h_new: &Mat, l_new: &Mat) -> Result<()> {
    let k = state.reduced_dim();
    let l = state.label_dim();
    if h_new.cols() != k || l_new.cols() != l || h_new.rows() != l_new.rows() {
        return Err(Error::shape(
            "rls_update",
            format!("n x {k} pseudo labels and n x {l} labels"),
            format!(
                "{}x{} and {}x{}",
                h_new.rows(),
                h_new.cols(),
                l_new.rows(),
                l_new.cols()
            ),
        ));
    }
    if !h_new.is_finite() {
        return Err(Error::NonFinite("pseudo-label batch"));
    }
    if !l_new.is_finite() {
        return Err(Error::NonFinite("label batch"));
    }
    let n = h_new.rows();
    if n == 0 {
        return Ok(());
    }

    let hk = h_new.matmul(&state.inverse_gram)?; // n x k, equals (K Hᵀ)ᵀ since K is symmetric
    let mut capacitance = hk.matmul(&h_new.transpose())?;
    for i in 0..n {
        capacitance[(i, i)] += 1.0;
    }
    let correction = Lu::factor(&capacitance, "capacitance I + H K Hᵀ")?.solve(&hk)?;
    let mut inverse_gram = state.inverse_gram.sub(&hk.t_matmul(&correction)?)?;
    inverse_gram.symmetrize();

    let residual = l_new.sub(&h_new.matmul(&state.beta)?)?;
    let step = inverse_gram.matmul(&h_new.t_matmul(&residual)?)?;
    let beta = state.beta.add(&step)?;
    if !beta.is_finite() || !inverse_gram.is_finite() {
        return Err(Error::NonFinite("decoder update"));
    }
    state.inverse_gram = inverse_gram;
    state.beta = beta;
    state.seen += n;
    Ok(())
}

/// Applies [`rls_update`] to consecutive row blocks of at most `block_rows`
/// rows. The result equals a single update on the whole batch; the
/// capacitance systems stay `block_rows x block_rows`.
pub fn rls_update_blocked(
    state: &mut RlsState,
    h_new: &Mat,
    l_new: &Mat,
    block_rows: usize,
) -> Result<()> {
    if block_rows == 0 {
        return Err(Error::InvalidArgument("block size must be >= 1".into()));
    }
    if h_new.rows() != l_new.rows() {
        return Err(Error::shape(
            "rls_update_blocked",
            format!("{} label rows", h_new.rows()),
            l_new.rows(),
        ));
    }
    let n = h_new.rows();
    let mut start = 0;
    while start < n {
        let end = (start + block_rows).min(n);
        rls_update(
            state,
            &h_new.slice_rows(start, end),
            &l_new.slice_rows(start, end),
        )?;
        start = end;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &Mat, b: &Mat, tol: f64) -> bool {
        a.shape() == b.shape() && a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn gram_schmidt_keeps_standard_basis() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let q = gram_schmidt(&cols).unwrap();
        assert_eq!(q, Mat::from_columns(&cols).unwrap());
    }

    #[test]
    fn gram_schmidt_two_by_two_by_hand() {
        // v = (1,1) - 1*(1,0) = (0,1)
        let q = gram_schmidt(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(approx_eq(&q, &Mat::identity(2), 1e-15));
    }

    #[test]
    fn gram_schmidt_reports_degenerate_column() {
        let err = gram_schmidt(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert!(matches!(err, Error::Degenerate { column: 1, .. }));
    }

    #[test]
    fn gram_schmidt_regenerates_degenerate_column() {
        let q = gram_schmidt_with(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0]], |_, _| {
            Ok(vec![0.0, 0.0, 3.0])
        })
        .unwrap();
        let gram = q.t_matmul(&q).unwrap();
        assert!(approx_eq(&gram, &Mat::identity(2), 1e-12));
        assert!((q[(2, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_rejects_too_many_columns() {
        assert!(gram_schmidt(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn least_squares_identity_design() {
        let l = Mat::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]).unwrap();
        let s = batch_least_squares(&Mat::identity(2), &l, 0.0).unwrap();
        assert!(approx_eq(&s.beta, &l, 1e-14));
        assert_eq!(s.seen, 2);
    }

    #[test]
    fn least_squares_scaled_identity() {
        let h = Mat::identity(2).scale(2.0);
        let s = batch_least_squares(&h, &Mat::identity(2), 0.0).unwrap();
        assert!(approx_eq(&s.inverse_gram, &Mat::identity(2).scale(0.25), 1e-15));
        assert!(approx_eq(&s.beta, &Mat::identity(2).scale(0.5), 1e-15));
    }

    #[test]
    fn least_squares_zero_design_is_singular() {
        let err = batch_least_squares(&Mat::zeros(3, 2), &Mat::zeros(3, 4), 0.0).unwrap_err();
        match err {
            Error::Singular { matrix } => assert!(matrix.contains("Gram")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn least_squares_zero_design_with_ridge_is_fine() {
        let s = batch_least_squares(&Mat::zeros(3, 2), &Mat::zeros(3, 4), 1e-6).unwrap();
        assert_eq!(s.beta, Mat::zeros(2, 4));
    }

    #[test]
    fn zero_update_leaves_state_unchanged() {
        let h = Mat::from_rows(&[[1.0, 0.5], [0.2, -1.0], [0.3, 0.3]]).unwrap();
        let l = Mat::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let mut s = batch_least_squares(&h, &l, DEFAULT_RIDGE).unwrap();
        let before = s.clone();
        rls_update(&mut s, &Mat::zeros(2, 2), &Mat::from_rows(&[[1.0, 1.0, 1.0], [0.0, 1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(s.inverse_gram, before.inverse_gram);
        assert_eq!(s.beta, before.beta);
        assert_eq!(s.seen, before.seen + 2);
    }

    #[test]
    fn zero_residual_keeps_beta() {
        let h = Mat::from_rows(&[[1.0, 0.5], [0.2, -1.0], [0.3, 0.3]]).unwrap();
        let l = Mat::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let mut s = batch_least_squares(&h, &l, DEFAULT_RIDGE).unwrap();
        let h_new = Mat::from_rows(&[[0.7, -0.2], [1.5, 2.0]]).unwrap();
        let l_new = h_new.matmul(&s.beta).unwrap();
        let before = s.beta.clone();
        rls_update(&mut s, &h_new, &l_new).unwrap();
        assert!(s.beta.sub(&before).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn update_rejects_bad_shapes_and_values() {
        let mut s = batch_least_squares(&Mat::identity(2), &Mat::identity(2), 0.0).unwrap();
        assert!(rls_update(&mut s, &Mat::zeros(1, 3), &Mat::zeros(1, 2)).is_err());
        let nan = Mat::from_rows(&[[f64::NAN, 0.0]]).unwrap();
        assert!(matches!(
            rls_update(&mut s, &nan, &Mat::zeros(1, 2)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = Mat::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]).unwrap();
        let inv = a.inverse("a").unwrap();
        assert!(approx_eq(&a.matmul(&inv).unwrap(), &Mat::identity(3), 1e-14));
    }

    #[test]
    fn matmul_shape_mismatch() {
        assert!(Mat::zeros(2, 3).matmul(&Mat::zeros(2, 3)).is_err());
    }
}
