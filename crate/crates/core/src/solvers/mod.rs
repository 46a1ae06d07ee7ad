//! Krylov solvers, dense factorizations and the relaxed Jacobi iteration.

mod dense;
mod jacobi;
mod krylov;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dense::{dense_solve, CholeskySolver};
pub use jacobi::{find_sigma_threshold, relaxed_jacobi, run_relaxed_jacobi, JacobiConfig, JacobiOutcome, SigmaSearch};
pub use krylov::{cg, gmres};

/// A linear map on `R^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
}

impl LinearOperator for CsrMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
}

/// Inverse of the diagonal of a sparse matrix.
pub struct DiagonalPreconditioner {
    inv_diag: DVector<f64>,
}

impl DiagonalPreconditioner {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        let mut inv_diag = DVector::zeros(a.nrows());
        for (i, row) in a.row_iter().enumerate() {
            let d = row
                .col_indices()
                .iter()
                .zip(row.values())
                .find(|(&c, _)| c == i)
                .map(|(_, &v)| v)
                .unwrap_or(0.0);
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "Jacobi preconditioner needs a positive diagonal (row {i} has {d})"
                )));
            }
            inv_diag[i] = 1.0 / d;
        }
        Ok(Self { inv_diag })
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let mut inv_diag = DVector::zeros(a.nrows());
        for i in 0..a.nrows() {
            let d = a[(i, i)];
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "Jacobi preconditioner needs a positive diagonal (row {i} has {d})"
                )));
            }
            inv_diag[i] = 1.0 / d;
        }
        Ok(Self { inv_diag })
    }
}

/// Exact inverse of a sparse SPD matrix. Decoupled blocks (as in mass
/// matrices of discontinuous spaces) are factorized separately; anything else
/// falls back to a dense Cholesky factorization.
pub struct SpdInverse {
    dim: usize,
    blocks: Vec<(Vec<usize>, CholeskySolver)>,
}

impl SpdInverse {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument("SpdInverse needs a square matrix".into()));
        }
        // connected components of the sparsity graph
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for (i, j, v) in a.triplet_iter() {
            if *v != 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut local = vec![0usize; n];
        let mut blocks = Vec::with_capacity(groups.len());
        for (_, idx) in groups {
            for (k, &i) in idx.iter().enumerate() {
                local[i] = k;
            }
            let mut m = DMatrix::zeros(idx.len(), idx.len());
            for &i in &idx {
                let row = a.row(i);
                for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                    m[(local[i], local[j])] += v;
                }
            }
            let chol = CholeskySolver::new(m)?;
            blocks.push((idx, chol));
        }
        Ok(Self { dim: n, blocks })
    }
}

impl LinearOperator for SpdInverse {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        for (idx, chol) in &self.blocks {
            let b = DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i]));
            let z = chol.solve(&b);
            for (k, &i) in idx.iter().enumerate() {
                y[i] = z[k];
            }
        }
        y
    }
}

impl LinearOperator for DiagonalPreconditioner {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.inv_diag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KrylovMethod {
    Cg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    None,
    /// Diagonal scaling.
    Jacobi,
    /// Inverse of the Gram (mass) matrix of the unknown's space.
    Mass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: KrylovMethod,
    /// Relative (preconditioned) residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: PreconditionerKind,
    /// GMRES restart length.
    pub restart: usize,
}

impl SolverConfig {
    pub fn cg(tolerance: f64, preconditioner: PreconditionerKind) -> Self {
        Self {
            method: KrylovMethod::Cg,
            tolerance,
            max_iterations: 5000,
            preconditioner,
            restart: 200,
        }
    }

    pub fn gmres(tolerance: f64, preconditioner: PreconditionerKind) -> Self {
        Self {
            method: KrylovMethod::Gmres,
            ..Self::cg(tolerance, preconditioner)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if self.method == KrylovMethod::Gmres && self.restart == 0 {
            return Err(Error::InvalidArgument("GMRES restart must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dispatches to [`cg`] or [`gmres`] according to `config.method`.
pub fn krylov_solve(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    rhs: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationTrace)> {
    match config.method {
        KrylovMethod::Cg => cg(op, precond, rhs, config),
        KrylovMethod::Gmres => gmres(op, precond, rhs, config),
    }
}

/// Per-iteration record of a solver run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Relative residuals; entry 0 is the initial residual.
    pub residuals: Vec<f64>,
    /// L2(Γ) norms of trace increments (relaxed Jacobi only).
    pub increments: Vec<f64>,
    /// Seconds elapsed at each recorded iteration.
    pub times: Vec<f64>,
    pub wall_time: f64,
    pub converged: bool,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1).max(self.increments.len())
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// CSV with columns `iteration,residual,increment,time`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "residual", "increment", "time"])?;
        let n = self.residuals.len().max(self.increments.len());
        for i in 0..n {
            let cell = |v: Option<&f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
            w.write_record([
                i.to_string(),
                cell(self.residuals.get(i)),
                cell(self.increments.get(i)),
                cell(self.times.get(i)),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Self(Instant::now())
    }
    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
