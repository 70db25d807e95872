//! Linear solves for the interior (Schur-complement) systems.
//!
//! Small systems are factored densely with partial-pivoting LU; above
//! `dense_limit` unknowns a Jacobi-preconditioned Krylov method is used
//! (conjugate gradients for symmetric matrices, BiCGSTAB otherwise). Every
//! solution is accepted only if its normwise backward error
//! `|b - Ax| / (|A| |x| + |b|)` (infinity norms) is at most `tolerance`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub dense_limit: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { dense_limit: 2000, tolerance: 1e-10, max_iterations: 20_000 }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Rows of `(col, value)`; duplicate columns within a row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                debug_assert!(c < n);
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                rows[j].push((i, a));
            }
        }
        Self::from_rows(rows)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, a)| a)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.transpose() == *self
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, a)| a.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                m[(i, j)] += a;
            }
        }
        m
    }
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normwise backward error of `x` as a solution of `a x = b`.
pub fn backward_error(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let denom = a.norm_inf() * norm_inf(x) + norm_inf(b);
    if denom == 0.0 {
        norm_inf(&r)
    } else {
        norm_inf(&r) / denom
    }
}

enum Backend {
    Dense { lu: LU<f64, Dyn, Dyn>, lu_t: OnceLock<LU<f64, Dyn, Dyn>> },
    Iterative,
}

/// A square system prepared for repeated solves with `A` and `A^T`.
pub struct LinearSystem {
    a: SparseMatrix,
    at: OnceLock<SparseMatrix>,
    symmetric: bool,
    backend: Backend,
    opts: SolverOptions,
}

impl LinearSystem {
    pub fn new(a: SparseMatrix, opts: SolverOptions) -> Result<Self> {
        let symmetric = a.is_symmetric();
        let backend = if a.dim() <= opts.dense_limit {
            let lu = a.to_dense().lu();
            if !lu.is_invertible() {
                return Err(Error::Singular("zero pivot in LU factorization".into()));
            }
            Backend::Dense { lu, lu_t: OnceLock::new() }
        } else {
            Backend::Iterative
        };
        Ok(Self { a, at: OnceLock::new(), symmetric, backend, opts })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense { .. })
    }

    fn transposed(&self) -> &SparseMatrix {
        if self.symmetric {
            &self.a
        } else {
            self.at.get_or_init(|| self.a.transpose())
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_with(b, false)
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_with(b, true)
    }

    fn solve_with(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.dim(), "right-hand side has wrong length");
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let a = if transpose { self.transposed() } else { &self.a };
        let x = match &self.backend {
            Backend::Dense { lu, lu_t } => {
                let f = if transpose && !self.symmetric {
                    lu_t.get_or_init(|| a.to_dense().lu())
                } else {
                    lu
                };
                f.solve(&DVector::from_column_slice(b))
                    .ok_or_else(|| Error::Singular("LU solve failed".into()))?
                    .as_slice()
                    .to_vec()
            }
            Backend::Iterative => {
                if self.symmetric {
                    conjugate_gradient(a, b, &self.opts)?
                } else {
                    bicgstab(a, b, &self.opts)?
                }
            }
        };
        let err = backward_error(a, &x, b);
        if !(err <= self.opts.tolerance) {
            return Err(Error::Singular(format!(
                "backward error {err:e} exceeds {:e}",
                self.opts.tolerance
            )));
        }
        Ok(x)
    }

    /// Solves against each column of the identity; only for diagnostics.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e)?;
            inv.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        Ok(inv)
    }
}

fn jacobi(a: &SparseMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .map(|d| {
            if d != 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::Singular("zero diagonal entry".into()))
            }
        })
        .collect()
}

fn converged(a: &SparseMatrix, x: &[f64], b: &[f64], opts: &SolverOptions) -> bool {
    backward_error(a, x, b) <= 0.01 * opts.tolerance
}

fn conjugate_gradient(a: &SparseMatrix, b: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = a.dim();
    let inv_diag = jacobi(a)?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..opts.max_iterations {
        if norm_inf(&r) == 0.0 || (it % 16 == 0 && converged(a, &x, b, opts)) {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if converged(a, &x, b, opts) {
        return Ok(x);
    }
    Err(Error::SolverDiverged {
        iterations: opts.max_iterations,
        residual: backward_error(a, &x, b),
    })
}

fn bicgstab(a: &SparseMatrix, b: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = a.dim();
    let inv_diag = jacobi(a)?;
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(v, d)| v * d).collect() };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut restarts = 0;
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 0..opts.max_iterations {
        if norm_inf(&r) == 0.0 || (it % 8 == 0 && converged(a, &x, b, opts)) {
            return Ok(x);
        }
        let rho_next = dot(&r_hat, &r);
        if rho_next.abs() < 1e-300 || omega == 0.0 {
            // breakdown: restart from the current iterate
            restarts += 1;
            if restarts > 50 {
                break;
            }
            let ax = a.mul_vec(&x);
            r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = a.mul_vec(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        let s_hat = precond(&s);
        let t = a.mul_vec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    if converged(a, &x, b, opts) {
        return Ok(x);
    }
    Err(Error::SolverDiverged {
        iterations: opts.max_iterations,
        residual: backward_error(a, &x, b),
    })
}
