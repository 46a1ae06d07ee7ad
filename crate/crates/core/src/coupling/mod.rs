//! The hybrid interior/exterior system, its Schur complement on the trace
//! unknown ũ, and error norms.

mod norms;
mod schur;

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bem::{symmetric_reduce, ExteriorBlocks, TraceSpace};
use crate::error::{Error, Result};
use crate::fem::{InteriorBlocks, VolumeSpace};
use crate::solvers::{dense_solve, IterationTrace, KrylovMethod, PreconditionerKind, SolverConfig, Stopwatch};

pub use norms::{error_norms, interface_mismatch, ErrorNorms, ExactSolution};
pub use schur::{schur_residual, SchurComplement};

/// The spaces of one discretization: V_h (interior), W_h (u⁺), Λ_h (λ) and
/// M_h (ũ). All trace spaces live on the boundary of the volume mesh.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub volume: VolumeSpace,
    pub w: TraceSpace,
    pub lambda: TraceSpace,
    pub m: TraceSpace,
}

impl Spaces {
    pub fn check(&self) -> Result<()> {
        if !std::sync::Arc::ptr_eq(self.volume.surface(), self.m.surface()) {
            return Err(Error::Structure(
                "trace space is not on the volume mesh boundary".into(),
            ));
        }
        if !self.m.same_surface(&self.w) || !self.m.same_surface(&self.lambda) {
            return Err(Error::Structure("trace spaces live on different surface meshes".into()));
        }
        Ok(())
    }
}

/// Offsets of the unknowns (u⁻, u⁺, λ, ũ) in the monolithic vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n_minus: usize,
    pub n_plus: usize,
    pub n_lambda: usize,
    pub n_trace: usize,
}

impl BlockLayout {
    pub fn total(&self) -> usize {
        self.n_minus + self.n_plus + self.n_lambda + self.n_trace
    }

    pub fn offsets(&self) -> [usize; 4] {
        [
            0,
            self.n_minus,
            self.n_minus + self.n_plus,
            self.n_minus + self.n_plus + self.n_lambda,
        ]
    }

    /// Splits a monolithic vector into (u⁻, u⁺, λ, ũ).
    pub fn split(&self, x: &DVector<f64>) -> [DVector<f64>; 4] {
        let o = self.offsets();
        [
            x.rows(o[0], self.n_minus).into_owned(),
            x.rows(o[1], self.n_plus).into_owned(),
            x.rows(o[2], self.n_lambda).into_owned(),
            x.rows(o[3], self.n_trace).into_owned(),
        ]
    }

    pub fn join(&self, parts: [&DVector<f64>; 4]) -> DVector<f64> {
        let mut x = DVector::zeros(self.total());
        let o = self.offsets();
        for (k, p) in parts.iter().enumerate() {
            x.rows_mut(o[k], p.len()).copy_from(p);
        }
        x
    }
}

/// Interior and exterior forms sharing the trace unknown ũ.
///
/// The only coupling between the two sides runs through ũ:
///
/// ```text
/// [ A_vv   0       0       A_vm         ] u⁻
/// [ 0      B_ww    B_wλ    B_wm         ] u⁺
/// [ 0      B_λw    V       B_λm         ] λ
/// [ A_mv   B_mw    B_mλ    A_mm + B_mm  ] ũ
/// ```
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub spaces: Spaces,
    pub interior: InteriorBlocks,
    pub exterior: ExteriorBlocks,
    pub tau: f64,
    pub layout: BlockLayout,
}

pub fn assemble_coupled(
    spaces: Spaces,
    interior: InteriorBlocks,
    exterior: ExteriorBlocks,
    tau: f64,
) -> Result<CoupledSystem> {
    spaces.check()?;
    if interior.tau() != tau || exterior.tau != tau {
        return Err(Error::Structure(format!(
            "penalty mismatch: interior {}, exterior {}, requested {tau}",
            interior.tau(),
            exterior.tau
        )));
    }
    let layout = BlockLayout {
        n_minus: interior.n_volume(),
        n_plus: exterior.n_w(),
        n_lambda: exterior.n_lambda(),
        n_trace: interior.n_trace(),
    };
    if layout.n_minus != spaces.volume.n_dofs()
        || layout.n_plus != spaces.w.n_dofs()
        || layout.n_lambda != spaces.lambda.n_dofs()
        || layout.n_trace != spaces.m.n_dofs()
        || exterior.n_m() != layout.n_trace
    {
        return Err(Error::Structure("block sizes do not match the spaces".into()));
    }
    Ok(CoupledSystem {
        spaces,
        interior,
        exterior,
        tau,
        layout,
    })
}

impl CoupledSystem {
    /// Blockwise product with a monolithic vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let [um, up, lam, ut] = self.layout.split(x);
        let i = &self.interior;
        let y_minus = &i.system * &um + &i.coupling * &ut;
        let (mut y_plus, mut y_lam) = self.exterior.apply_exterior(&up, &lam);
        let (tw, tl) = self.exterior.apply_trace_columns(&ut);
        y_plus += tw;
        y_lam += tl;
        let y_trace = self.trace_row(&um, &up, &lam, &ut);
        self.layout.join([&y_minus, &y_plus, &y_lam, &y_trace])
    }

    /// The ṽ-row of the full form.
    pub fn trace_row(
        &self,
        um: &DVector<f64>,
        up: &DVector<f64>,
        lam: &DVector<f64>,
        ut: &DVector<f64>,
    ) -> DVector<f64> {
        self.interior.coupling.transpose() * um
            + &self.interior.nitsche.penalty_mm * ut
            + self.exterior.apply_trace_row(up, lam, ut)
    }

    pub fn rhs(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.layout.total());
        b.rows_mut(0, self.layout.n_minus).copy_from(&self.interior.load);
        b
    }

    /// Dense monolithic matrix; for coarse meshes only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let l = self.layout;
        let n = l.total();
        let mut a = DMatrix::zeros(n, n);
        let o = l.offsets();
        let int = self.interior.to_dense();
        let map_int = |k: usize| if k < l.n_minus { k } else { o[3] + k - l.n_minus };
        for j in 0..int.ncols() {
            for i in 0..int.nrows() {
                let v = int[(i, j)];
                if v != 0.0 {
                    a[(map_int(i), map_int(j))] += v;
                }
            }
        }
        let ext = self.exterior.to_dense();
        let mut block = a.view_mut((o[1], o[1]), (ext.nrows(), ext.ncols()));
        block += &ext;
        a
    }

    pub fn symmetric_part(&self) -> DMatrix<f64> {
        let a = self.to_dense();
        (&a + a.transpose()) * 0.5
    }

    /// Residual `b − A x` of a bundle against every test basis function.
    pub fn residual(&self, bundle: &SolutionBundle) -> DVector<f64> {
        let x = self
            .layout
            .join([&bundle.u_minus, &bundle.u_plus, &bundle.lambda, &bundle.u_tilde]);
        self.rhs() - self.apply(&x)
    }

    /// A copy whose exterior block carries the symmetric reduced form.
    pub fn with_reduced_exterior(&self) -> Result<CoupledSystem> {
        let mut out = self.clone();
        if out.exterior.reduced.is_none() {
            out.exterior = symmetric_reduce(&self.exterior)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoupledMethod {
    /// CG on the Schur complement, exterior λ eliminated so the operator is
    /// symmetric.
    SchurCg,
    /// GMRES on the Schur complement with the unreduced exterior system.
    SchurGmres,
    /// Dense LU of the monolithic matrix.
    #[serde(alias = "direct")]
    MonolithicDirect,
}

impl std::str::FromStr for CoupledMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schur-cg" => Ok(Self::SchurCg),
            "schur-gmres" => Ok(Self::SchurGmres),
            "direct" | "monolithic-direct" => Ok(Self::MonolithicDirect),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for CoupledMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SchurCg => "schur-cg",
            Self::SchurGmres => "schur-gmres",
            Self::MonolithicDirect => "monolithic-direct",
        })
    }
}

/// Outer and inner solver settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledConfig {
    pub method: CoupledMethod,
    pub outer: SolverConfig,
    pub interior: SolverConfig,
    /// The Krylov method here is overridden by `method`.
    pub exterior: SolverConfig,
}

impl CoupledConfig {
    /// Outer tolerance 1e-8 with inner solves a hundred times tighter.
    pub fn new(method: CoupledMethod) -> Self {
        let outer = match method {
            CoupledMethod::SchurGmres => SolverConfig::gmres(1e-8, PreconditionerKind::Mass),
            _ => SolverConfig::cg(1e-8, PreconditionerKind::Mass),
        };
        let exterior = match method {
            CoupledMethod::SchurGmres => SolverConfig::gmres(1e-10, PreconditionerKind::Mass),
            _ => SolverConfig::cg(1e-10, PreconditionerKind::Mass),
        };
        Self {
            method,
            outer,
            interior: SolverConfig::cg(1e-10, PreconditionerKind::Jacobi),
            exterior,
        }
    }

    /// Same settings with every inner preconditioner switched off.
    pub fn unpreconditioned(mut self) -> Self {
        self.interior.preconditioner = PreconditionerKind::None;
        self.exterior.preconditioner = PreconditionerKind::None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.outer.validate()?;
        self.interior.validate()?;
        self.exterior.validate()
    }

    pub(crate) fn exterior_for_method(&self) -> SolverConfig {
        let mut c = self.exterior.clone();
        c.method = match self.method {
            CoupledMethod::SchurCg => KrylovMethod::Cg,
            _ => KrylovMethod::Gmres,
        };
        c
    }
}

/// Discrete solution with solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionBundle {
    pub u_minus: DVector<f64>,
    pub u_plus: DVector<f64>,
    pub lambda: DVector<f64>,
    pub u_tilde: DVector<f64>,
    pub method: String,
    /// Outer iteration history (empty for the direct solve).
    pub outer: IterationTrace,
    /// Iterations of each interior solve, in order.
    pub interior_iterations: Vec<usize>,
    /// Iterations of each exterior solve, in order.
    pub exterior_iterations: Vec<usize>,
    pub wall_time: f64,
}

impl SolutionBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn outer_iterations(&self) -> usize {
        self.outer.iterations()
    }

    pub fn mean_interior_iterations(&self) -> f64 {
        mean(&self.interior_iterations)
    }

    pub fn mean_exterior_iterations(&self) -> f64 {
        mean(&self.exterior_iterations)
    }

    /// Largest relative difference over the four unknowns.
    pub fn max_relative_difference(&self, other: &SolutionBundle) -> f64 {
        [
            (&self.u_minus, &other.u_minus),
            (&self.u_plus, &other.u_plus),
            (&self.lambda, &other.lambda),
            (&self.u_tilde, &other.u_tilde),
        ]
        .iter()
        .map(|(a, b)| {
            let scale = b.norm().max(a.norm());
            if scale == 0.0 {
                0.0
            } else {
                (*a - *b).norm() / scale
            }
        })
        .fold(0.0, f64::max)
    }
}

fn mean(v: &[usize]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<usize>() as f64 / v.len() as f64
    }
}

/// Solves the coupled system with the configured method.
pub fn solve_coupled(system: &CoupledSystem, config: &CoupledConfig) -> Result<SolutionBundle> {
    config.validate()?;
    let clock = Stopwatch::start();
    match config.method {
        CoupledMethod::MonolithicDirect => {
            let x = dense_solve(&system.to_dense(), &system.rhs())?;
            let [u_minus, u_plus, lambda, u_tilde] = system.layout.split(&x);
            Ok(SolutionBundle {
                u_minus,
                u_plus,
                lambda,
                u_tilde,
                method: config.method.to_string(),
                outer: IterationTrace {
                    converged: true,
                    wall_time: clock.seconds(),
                    ..Default::default()
                },
                interior_iterations: vec![],
                exterior_iterations: vec![],
                wall_time: clock.seconds(),
            })
        }
        CoupledMethod::SchurCg | CoupledMethod::SchurGmres => {
            let system: Cow<CoupledSystem> =
                if config.method == CoupledMethod::SchurCg && system.exterior.reduced.is_none() {
                    Cow::Owned(system.with_reduced_exterior()?)
                } else {
                    Cow::Borrowed(system)
                };
            let schur = SchurComplement::new(&system, config)?;
            let (u_tilde, outer) = schur.solve()?;
            let (u_minus, u_plus, lambda) = schur.inner_solves(&u_tilde, true)?;
            let (interior_iterations, exterior_iterations) = schur.inner_iteration_counts();
            Ok(SolutionBundle {
                u_minus,
                u_plus,
                lambda,
                u_tilde,
                method: config.method.to_string(),
                outer,
                interior_iterations,
                exterior_iterations,
                wall_time: clock.seconds(),
            })
        }
    }
}
