//! Compressed-row sparse matrices for finite-difference stencils and
//! Newton Jacobians, with a sparse LU backend for the linear solves.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("matrix shape {rows}x{cols} is not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("sparse LU factorization failed: {0}")]
    Factorization(String),
    #[error("factorization produced non-finite values (matrix numerically singular)")]
    Singular,
}

/// Row-major sparse matrix. Column indices within a row are sorted and unique.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Duplicate columns
    /// are summed; exact zeros are kept so the sparsity pattern stays stable.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < ncols, "column {c} out of range {ncols}");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_rows(ncols, vec![Vec::new(); nrows])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * yi;
            }
        }
        out
    }

    /// Multiplies row `i` by `scale[i]`.
    pub fn scale_rows(&self, scale: &[f64]) -> Self {
        assert_eq!(scale.len(), self.nrows);
        let mut out = self.clone();
        for i in 0..self.nrows {
            for v in &mut out.values[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *v *= scale[i];
            }
        }
        out
    }

    /// Dense copy, row-major. Test and diagnostics use only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        dense
    }

    pub fn lu(&self) -> Result<SparseLu, LinearError> {
        if self.nrows != self.ncols {
            return Err(LinearError::NotSquare {
                rows: self.nrows,
                cols: self.ncols,
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push(Triplet::new(i, c, v));
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| LinearError::Factorization(format!("{e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| LinearError::Factorization(format!("{e:?}")))?;
        Ok(SparseLu { lu, n: self.nrows })
    }
}

pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinearError> {
        self.solve_impl(rhs, false)
    }

    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>, LinearError> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>, LinearError> {
        assert_eq!(rhs.len(), self.n);
        let mut x = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        if transpose {
            self.lu.solve_transpose_in_place(x.as_mut());
        } else {
            self.lu.solve_in_place(x.as_mut());
        }
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(LinearError::Singular)
        }
    }
}

/// Estimates the smallest singular value of a square matrix by inverse power
/// iteration on `(AᵀA)⁻¹`.
pub fn smallest_singular_value(matrix: &SparseMatrix, iterations: usize) -> Result<f64, LinearError> {
    let lu = matrix.lu()?;
    let n = matrix.nrows();
    // deterministic, non-symmetric start so no eigenvector is missed by symmetry
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64).collect();
    normalize(&mut x);
    let mut growth = 0.0;
    for _ in 0..iterations.max(1) {
        let y = lu.solve_transpose(&lu.solve(&x)?)?;
        growth = norm(&y);
        if growth == 0.0 || !growth.is_finite() {
            return Err(LinearError::Singular);
        }
        x = y;
        normalize(&mut x);
    }
    Ok(1.0 / growth.sqrt())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    x.iter_mut().for_each(|v| *v /= n);
}
