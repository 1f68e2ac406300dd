//! Small dense linear algebra.
//!
//! The age systems solved here have at most a few dozen unknowns, so a
//! row-major `Vec<f64>` with Gaussian elimination and partial pivoting is all
//! that is needed.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the largest initial entry are
/// treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Square-or-rectangular dense matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices. Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Principal submatrix on the given index set (same set for rows and columns).
    pub fn principal(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len(), idx.len());
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                m[(i, j)] = self[(r, c)];
            }
        }
        m
    }

    /// Determinant by elimination with partial pivoting. Returns exactly 0.0
    /// when a column has no nonzero pivot candidate.
    pub fn determinant(&self) -> f64 {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let (piv, piv_abs) =
                (col..n)
                    .map(|r| (r, a[(r, col)].abs()))
                    .fold(
                        (col, -1.0),
                        |best, cand| if cand.1 > best.1 { cand } else { best },
                    );
            if piv_abs == 0.0 {
                return 0.0;
            }
            if piv != col {
                a.swap_rows(piv, col);
                det = -det;
            }
            let d = a[(col, col)];
            det *= d;
            for r in col + 1..n {
                let f = a[(r, col)] / d;
                if f != 0.0 {
                    for c in col..n {
                        let v = a[(col, c)];
                        a[(r, c)] -= f * v;
                    }
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
///
/// Fails with [`Error::Singular`] when a pivot falls below
/// [`PIVOT_TOLERANCE`] times the largest entry of `a`.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::BadDimension(format!(
            "matrix is {}x{}, right-hand side has {} entries",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let threshold = PIVOT_TOLERANCE * a.max_abs();
    let mut m = a.clone();
    let mut rhs = b.to_vec();

    for col in 0..n {
        let (piv, piv_abs) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold(
                    (col, -1.0),
                    |best, cand| if cand.1 > best.1 { cand } else { best },
                );
        if !(piv_abs > threshold) {
            return Err(Error::Singular {
                column: col,
                pivot: piv_abs,
            });
        }
        m.swap_rows(piv, col);
        rhs.swap(piv, col);
        let d = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            m[(r, col)] = 0.0;
            for c in col + 1..n {
                let v = m[(col, c)];
                m[(r, c)] -= f * v;
            }
            rhs[r] -= f * rhs[col];
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| m[(r, c)] * x[c]).sum();
        x[r] = (rhs[r] - tail) / m[(r, r)];
    }
    Ok(x)
}

/// Infinity norm of `a·x − b`.
pub fn residual_inf(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .fold(0.0_f64, |m, (ax, bi)| m.max((ax - bi).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_returns_rhs() {
        let b = [3.0, -1.5, 7.25, 0.0];
        let x = solve_dense(&DenseMatrix::identity(4), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]);
        assert_eq!(solve_dense(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn needs_pivoting() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(solve_dense(&a, &[5.0, 6.0]).unwrap(), vec![6.0, 5.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(
            solve_dense(&a, &[1.0, 1.0]),
            Err(Error::Singular { column: 1, .. })
        ));
        assert!(matches!(
            solve_dense(&DenseMatrix::zeros(2, 2), &[0.0, 0.0]),
            Err(Error::Singular { column: 0, .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let a = DenseMatrix::identity(3);
        assert!(matches!(
            solve_dense(&a, &[1.0, 2.0]),
            Err(Error::BadDimension(_))
        ));
    }

    #[test]
    fn determinant_small_cases() {
        let a = DenseMatrix::from_rows(&[[0.0, 2.0], [3.0, 1.0]]);
        assert_eq!(a.determinant(), -6.0);
        let b = DenseMatrix::from_rows(&[[2.0, 0.0, 0.0], [1.0, 3.0, 0.0], [4.0, 5.0, 0.5]]);
        assert!((b.determinant() - 3.0).abs() < 1e-15);
        assert_eq!(DenseMatrix::zeros(3, 3).determinant(), 0.0);
    }

    fn well_conditioned(n: usize) -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(entries, b)| {
                let mut a = DenseMatrix::zeros(n, n);
                for r in 0..n {
                    for c in 0..n {
                        a[(r, c)] = entries[r * n + c];
                    }
                    // Diagonal dominance keeps the condition number bounded.
                    a[(r, r)] += n as f64 + 1.0;
                }
                (a, b)
            })
    }

    proptest! {
        #[test]
        fn residual_is_small((a, b) in (1usize..16).prop_flat_map(well_conditioned)) {
            let x = solve_dense(&a, &b).unwrap();
            let bound = 1e-10 * (1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
            prop_assert!(residual_inf(&a, &x, &b) <= bound);
        }
    }
}
