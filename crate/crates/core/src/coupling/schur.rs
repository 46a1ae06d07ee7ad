use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use super::{CoupledConfig, CoupledSystem};
use crate::bem::ExteriorSolver;
use crate::error::{Error, Result};
use crate::fem::solve_interior_system;
use crate::solvers::{
    krylov_solve, DiagonalPreconditioner, FnOperator, IterationTrace, LinearOperator, PreconditionerKind, SolverConfig,
    SpdInverse,
};

/// The Schur complement of the coupled system on ũ. Applying it runs one
/// interior and one exterior solve and evaluates the ṽ-row of the full form.
pub struct SchurComplement<'a> {
    system: &'a CoupledSystem,
    interior: SolverConfig,
    outer: SolverConfig,
    exterior: ExteriorSolver<'a>,
    counts: RefCell<(Vec<usize>, Vec<usize>)>,
}

impl<'a> SchurComplement<'a> {
    pub fn new(system: &'a CoupledSystem, config: &CoupledConfig) -> Result<Self> {
        config.validate()?;
        let ext_cfg = config.exterior_for_method();
        Ok(Self {
            system,
            interior: config.interior.clone(),
            outer: config.outer.clone(),
            exterior: ExteriorSolver::new(&system.exterior, &ext_cfg)?,
            counts: RefCell::new((Vec::new(), Vec::new())),
        })
    }

    pub fn dim(&self) -> usize {
        self.system.layout.n_trace
    }

    /// Interior and exterior solutions for a given trace, with or without
    /// the volume load.
    pub fn inner_solves(
        &self,
        u_tilde: &DVector<f64>,
        with_load: bool,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let int = &self.system.interior;
        let mut rhs = -(&int.coupling * u_tilde);
        if with_load {
            rhs += &int.load;
        }
        let (um, t_int) = solve_interior_system(int, &rhs, &self.interior)?;
        let (fw, fl) = self.system.exterior.apply_trace_columns(u_tilde);
        let (up, lam, t_ext) = self.exterior.solve(&(-fw), &(-fl))?;
        let mut c = self.counts.borrow_mut();
        c.0.push(t_int.iterations());
        c.1.push(t_ext.iterations());
        Ok((um, up, lam))
    }

    /// ṽ-row residual after both inner solves.
    pub fn residual(&self, u_tilde: &DVector<f64>, with_load: bool) -> Result<DVector<f64>> {
        let (um, up, lam) = self.inner_solves(u_tilde, with_load)?;
        Ok(self.system.trace_row(&um, &up, &lam, u_tilde))
    }

    /// Right-hand side `g` of `S ũ = g`.
    pub fn rhs(&self) -> Result<DVector<f64>> {
        Ok(-self.residual(&DVector::zeros(self.dim()), true)?)
    }

    /// Dense Schur matrix, one column per basis vector.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut s = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            s.set_column(j, &self.residual(&e, false)?);
        }
        Ok(s)
    }

    /// Sum of the interior and exterior ũ-penalty blocks, `2τP_mm`.
    fn penalty_block(&self) -> nalgebra_sparse::CsrMatrix<f64> {
        &self.system.interior.nitsche.penalty_mm + &self.system.exterior.penalty_mm
    }

    pub fn solve(&self) -> Result<(DVector<f64>, IterationTrace)> {
        let g = self.rhs()?;
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let op = FnOperator::new(self.dim(), |x: &DVector<f64>| match self.residual(x, false) {
            Ok(y) => y,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                DVector::from_element(x.len(), f64::NAN)
            }
        });
        let precond: Option<Box<dyn LinearOperator>> = match self.outer.preconditioner {
            PreconditionerKind::None => None,
            PreconditionerKind::Jacobi => Some(Box::new(DiagonalPreconditioner::new(&self.penalty_block())?)),
            PreconditionerKind::Mass => Some(Box::new(SpdInverse::new(&self.penalty_block())?)),
        };
        let result = krylov_solve(&op, precond.as_deref(), &g, &self.outer);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        result
    }

    /// Iteration counts of every interior and exterior solve so far.
    pub fn inner_iteration_counts(&self) -> (Vec<usize>, Vec<usize>) {
        self.counts.borrow().clone()
    }
}

/// ṽ-row residual of the full system for a given trace ũ, with the interior
/// and exterior unknowns eliminated by inner solves.
pub fn schur_residual(system: &CoupledSystem, u_tilde: &DVector<f64>, config: &CoupledConfig) -> Result<DVector<f64>> {
    if u_tilde.len() != system.layout.n_trace {
        return Err(Error::InvalidArgument(format!(
            "trace vector has {} entries, expected {}",
            u_tilde.len(),
            system.layout.n_trace
        )));
    }
    SchurComplement::new(system, config)?.residual(u_tilde, true)
}
