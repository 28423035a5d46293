//! Sparse storage and the linear/eigen solvers shared by the analysis modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Systems with at most this many unknowns are solved by dense LU.
pub const DENSE_LIMIT: usize = 2000;
/// Relative residual target of the iterative solver.
pub const ITERATIVE_TOL: f64 = 1e-12;
/// Sweep cap of the iterative solver.
pub const MAX_SWEEPS: usize = 1_000_000;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut counts = vec![0usize; nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                counts[r] += 1;
                last = Some((r, c));
            }
        }
        // drop entries that summed to exactly zero
        let mut k = 0;
        let mut out_idx = Vec::with_capacity(indices.len());
        let mut out_val = Vec::with_capacity(values.len());
        for (r, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                if values[k] != 0.0 {
                    out_idx.push(indices[k]);
                    out_val.push(values[k]);
                }
                k += 1;
            }
            indptr[r + 1] = out_idx.len();
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices: out_idx,
            values: out_val,
        }
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Row vector times matrix: `x^T A`.
    pub fn left_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += xi * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }
}

/// Solves `A X = B` for a square sparse `A` and dense right-hand sides.
///
/// Dense LU up to [`DENSE_LIMIT`] unknowns, Gauss–Seidel above it. The
/// iterative branch assumes `A` is a nonsingular M-matrix (weakly diagonally
/// dominant with an absorbing boundary), which holds for every system built
/// by this crate.
pub fn solve(a: &CsrMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    assert_eq!(a.nrows(), a.ncols());
    assert_eq!(a.nrows(), b.nrows());
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    if a.nrows() <= DENSE_LIMIT {
        solve_dense(a.to_dense(), b)
    } else {
        let cols = (0..b.ncols())
            .into_par_iter()
            .map(|c| {
                let col: Vec<f64> = b.column(c).iter().copied().collect();
                gauss_seidel(a, &col, ITERATIVE_TOL, MAX_SWEEPS)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut x = DMatrix::zeros(b.nrows(), b.ncols());
        for (c, sol) in cols.into_iter().enumerate() {
            x.set_column(c, &DVector::from_vec(sol));
        }
        Ok(x)
    }
}

pub fn solve_dense(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.lu();
    lu.solve(b).ok_or(Error::Singular)
}

/// Gauss–Seidel iteration for `A x = b` with relative residual `tol`.
pub fn gauss_seidel(a: &CsrMatrix, b: &[f64], tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if diag.iter().any(|&d| d == 0.0) {
        return Err(Error::Singular);
    }
    let mut x = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut sweep = 0;
    while sweep < max_sweeps {
        for i in 0..n {
            let mut acc = b[i];
            for (j, v) in a.row(i) {
                if j != i {
                    acc -= v * x[j];
                }
            }
            x[i] = acc / diag[i];
        }
        sweep += 1;
        if sweep % 8 == 0 || sweep == max_sweeps {
            residual = relative_residual(a, &x, b, bnorm);
            if residual < tol {
                return Ok(x);
            }
            if !residual.is_finite() {
                break;
            }
        }
    }
    Err(Error::NotConverged {
        sweeps: sweep,
        residual,
    })
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.mul_vec(x);
    ax.iter()
        .zip(b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        / bnorm
}

/// Largest eigenpair of a symmetric operator, optionally restricted to the
/// orthogonal complement of a unit vector.
///
/// Lanczos with full reorthogonalization; the Ritz problem is solved densely.
pub fn lanczos_largest<F>(
    n: usize,
    apply: F,
    deflate: Option<&[f64]>,
    max_steps: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let project = |v: &mut [f64], basis: &[Vec<f64>]| {
        for _ in 0..2 {
            if let Some(d) = deflate {
                let c = dot(v, d);
                axpy(-c, d, v);
            }
            for q in basis {
                let c = dot(v, q);
                axpy(-c, q, v);
            }
        }
    };

    // deterministic, well-spread start vector
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.754_877_666).fract())
        .collect();
    project(&mut v, &[]);
    let norm = dot(&v, &v).sqrt();
    if norm == 0.0 {
        return Err(Error::Eigen("empty Krylov space".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);

    let steps = max_steps.min(n);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_theta = f64::NAN;
    let mut result: Option<(f64, Vec<f64>)> = None;

    for j in 0..steps {
        apply(&basis[j], &mut w);
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        project(&mut w, &basis);
        let beta = dot(&w, &w).sqrt();

        let k = alphas.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c {
                betas[r]
            } else if c + 1 == r {
                betas[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, theta) = eig.eigenvalues.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, e)| if e > acc.1 { (i, e) } else { acc },
        );
        let y = eig.eigenvectors.column(imax);
        let ritz_residual = beta * y[k - 1].abs();
        let converged = ritz_residual < tol
            || (theta - last_theta).abs() < tol * 1e-2 && ritz_residual < tol.sqrt();
        if converged || beta < 1e-13 || j + 1 == steps {
            let mut vec = vec![0.0; n];
            for (i, q) in basis.iter().enumerate() {
                axpy(y[i], q, &mut vec);
            }
            result = Some((theta, vec));
            break;
        }
        last_theta = theta;
        betas.push(beta);
        let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
        basis.push(next);
    }
    result.ok_or_else(|| Error::Eigen("Lanczos produced no Ritz pair".into()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
