//! Preconditioned conjugate gradients for symmetric positive definite systems.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::scalar::Real;
use crate::sparse::{dot, norm, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖` (absolute residual when `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Inverse diagonal.
    #[default]
    Jacobi,
    /// Sparse Cholesky factorization (fill-reducing ordering) computed once per matrix,
    /// in double precision. CG then converges in one or two steps.
    Cholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None, preconditioner: Preconditioner::Jacobi }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn cholesky(mut self) -> Self {
        self.preconditioner = Preconditioner::Cholesky;
        self
    }
}

fn inverse_diagonal<T: Real>(a: &CsrMatrix<T>) -> Result<Vec<T>> {
    a.diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| if d > T::zero() { Ok(T::one() / d) } else { Err(Error::NotSpd(format!("diagonal entry {i} is {d:e}"))) })
        .collect()
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x0` (zero if
/// `None`). Negative or zero curvature raises [`Error::NotSpd`]; running out of
/// iterations is reported in the returned [`SolveReport`], not as an error.
pub fn pcg_solve<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<T>, SolveReport)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(input(format!("system size mismatch: {}x{} matrix, rhs of length {}", n, a.ncols(), b.len())));
    }
    let inv_d = inverse_diagonal(a)?;
    pcg_with(a, b, x0, tol, max_iter, |r, z| {
        for i in 0..r.len() {
            z[i] = r[i] * inv_d[i];
        }
    })
}

/// Conjugate gradients with the preconditioner `apply(r, z)`: `z = M^{-1} r`.
pub fn pcg_with<T: Real, P: Fn(&[T], &mut [T])>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: f64,
    max_iter: usize,
    apply: P,
) -> Result<(Vec<T>, SolveReport)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(input(format!("system size mismatch: {}x{} matrix, rhs of length {}", n, a.ncols(), b.len())));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(input("initial guess has wrong length")),
        None => vec![T::zero(); n],
    };
    let bnorm = norm(b);
    let mut r = a.mul_vec(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let scale = if bnorm > T::zero() { bnorm } else { T::one() };
    let tol_t = T::lit(tol);
    let mut res = norm(&r) / scale;
    if res <= tol_t || n == 0 {
        return Ok((x, SolveReport { iterations: 0, relative_residual: res.as_f64(), converged: true }));
    }
    let mut z = vec![T::zero(); n];
    apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let curv = dot(&p, &ap);
        if !(curv > T::zero()) {
            return Err(Error::NotSpd(format!("non-positive curvature {curv:e} at iteration {it}")));
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / scale;
        if res <= tol_t {
            return Ok((x, SolveReport { iterations: it, relative_residual: res.as_f64(), converged: true }));
        }
        apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((x, SolveReport { iterations: max_iter, relative_residual: res.as_f64(), converged: false }))
}

enum Factor<T> {
    Jacobi(Vec<T>),
    Cholesky(Llt<usize, f64>),
}

/// A matrix with its preconditioner, for repeated solves.
pub struct SpdSolver<T> {
    matrix: CsrMatrix<T>,
    factor: Factor<T>,
    opts: SolverOptions,
}

impl<T: Real> SpdSolver<T> {
    pub fn new(matrix: CsrMatrix<T>, opts: SolverOptions) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(input("matrix must be square"));
        }
        let inv_d = inverse_diagonal(&matrix)?;
        let factor = match opts.preconditioner {
            Preconditioner::Jacobi => Factor::Jacobi(inv_d),
            Preconditioner::Cholesky => {
                let n = matrix.nrows();
                let mut lower = Vec::with_capacity(matrix.nnz() / 2 + n);
                for i in 0..n {
                    for (j, v) in matrix.row(i) {
                        if j <= i {
                            lower.push(Triplet::new(i, j, v.as_f64()));
                        }
                    }
                }
                let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower)
                    .map_err(|e| Error::Numerical(format!("sparse matrix conversion failed: {e:?}")))?;
                let llt = m.sp_cholesky(Side::Lower).map_err(|e| Error::NotSpd(format!("Cholesky factorization failed: {e:?}")))?;
                Factor::Cholesky(llt)
            }
        };
        Ok(Self { matrix, factor, opts })
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn solve(&self, b: &[T], x0: Option<&[T]>) -> Result<(Vec<T>, SolveReport)> {
        let a = &self.matrix;
        let max_iter = self.opts.max_iter.unwrap_or(10 * a.nrows().max(1));
        match &self.factor {
            Factor::Jacobi(inv_d) => pcg_with(a, b, x0, self.opts.tol, max_iter, |r, z| {
                for i in 0..r.len() {
                    z[i] = r[i] * inv_d[i];
                }
            }),
            Factor::Cholesky(llt) => {
                let n = a.nrows();
                pcg_with(a, b, x0, self.opts.tol, max_iter, |r, z| {
                    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| r[i].as_f64());
                    llt.solve_in_place(rhs.as_mut());
                    for (i, zi) in z.iter_mut().enumerate() {
                        *zi = T::lit(rhs[(i, 0)]);
                    }
                })
            }
        }
    }
}

/// One-off solve with [`SolverOptions`].
pub fn solve<T: Real>(a: &CsrMatrix<T>, b: &[T], x0: Option<&[T]>, opts: &SolverOptions) -> Result<(Vec<T>, SolveReport)> {
    match opts.preconditioner {
        Preconditioner::Jacobi => pcg_solve(a, b, x0, opts.tol, opts.max_iter.unwrap_or(10 * a.nrows().max(1))),
        Preconditioner::Cholesky => SpdSolver::new(a.clone(), *opts)?.solve(b, x0),
    }
}
