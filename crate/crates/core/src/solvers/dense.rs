use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result, SolverError};

/// Solves `A x = b` by LU with partial pivoting.
///
/// Fails with [`SolverError::Singular`] when the factorization has a zero
/// pivot or the relative residual of the computed solution exceeds 1e-10
/// scaled by a crude condition estimate.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "dense_solve needs a square matrix matching the rhs, got {}x{} and {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(SolverError::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Singular.into());
    }
    // pivot ratio as a cheap conditioning proxy
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    let (dmin, dmax) = (diag.min(), diag.max());
    if dmax == 0.0 || dmin <= dmax * f64::EPSILON * a.nrows() as f64 {
        return Err(SolverError::Singular.into());
    }
    let bn = b.norm();
    if bn > 0.0 {
        let rel = (a * &x - b).norm() / bn;
        let allowed = 1e-10 * (dmax / dmin).max(1.0);
        if rel > allowed {
            return Err(Error::Factorization(format!(
                "LU residual check failed: relative residual {rel:.3e}"
            )));
        }
    }
    Ok(x)
}

/// Cholesky factorization kept for repeated solves with an SPD matrix.
#[derive(Clone)]
pub struct CholeskySolver {
    chol: Cholesky<f64, Dyn>,
}

impl CholeskySolver {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument("Cholesky needs a square matrix".into()));
        }
        let chol = Cholesky::new(a).ok_or_else(|| Error::Factorization("matrix is not positive definite".into()))?;
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Solves with the lower factor only: returns `L^-1 B`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let l = self.chol.l_dirty();
        let mut out = b.clone();
        // l_dirty has garbage above the diagonal; the lower solve ignores it
        l.solve_lower_triangular_mut(&mut out);
        out
    }
}

impl super::LinearOperator for CholeskySolver {
    fn dim(&self) -> usize {
        CholeskySolver::dim(self)
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.solve(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let b = DVector::from_vec(vec![3.0, -1.0, 2.0]);
        let x = dense_solve(&DMatrix::identity(3, 3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn hilbert_inverse() {
        let h = DMatrix::from_fn(4, 4, |i, j| 1.0 / (i + j + 1) as f64);
        // analytic inverse of the 4x4 Hilbert matrix
        let inv = DMatrix::from_row_slice(
            4,
            4,
            &[
                16.0, -120.0, 240.0, -140.0, -120.0, 1200.0, -2700.0, 1680.0, 240.0, -2700.0, 6480.0, -4200.0, -140.0,
                1680.0, -4200.0, 2800.0,
            ],
        );
        for j in 0..4 {
            let e = DVector::from_fn(4, |i, _| if i == j { 1.0 } else { 0.0 });
            let x = dense_solve(&h, &e).unwrap();
            for i in 0..4 {
                assert!((x[i] - inv[(i, j)]).abs() < 1e-8, "{} vs {}", x[i], inv[(i, j)]);
            }
        }
    }

    #[test]
    fn random_residual_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let a = DMatrix::from_fn(100, 100, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(100, |_, _| rng.gen_range(-1.0..1.0));
        let x = dense_solve(&a, &b).unwrap();
        assert!((&a * x - &b).norm() / b.norm() < 1e-10);
    }

    #[test]
    fn singular_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(dense_solve(&a, &b), Err(Error::Solver(SolverError::Singular))));
    }

    #[test]
    fn cholesky_lower_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let c = CholeskySolver::new(a.clone()).unwrap();
        let y = c.solve_lower(&DMatrix::identity(2, 2));
        // L^-1 A L^-T = I
        let r = &y * &a * y.transpose();
        assert!((r - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
        assert!(CholeskySolver::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }
}
