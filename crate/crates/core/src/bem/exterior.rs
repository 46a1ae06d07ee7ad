use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use super::assembly::BoundaryOperators;
use super::space::TraceSpace;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::TriangleRule;
use crate::solvers::{
    cg, gmres, CholeskySolver, DiagonalPreconditioner, FnOperator, IterationTrace, LinearOperator, PreconditionerKind,
    SolverConfig, SpdInverse,
};

/// The exterior form over (u⁺, λ, ũ) for a fixed penalty τ.
///
/// Rows are ordered (v, φ, ṽ) to match the unknowns (u⁺, λ, ũ):
///
/// ```text
/// [ W + τP_ww      ½M_wλ + K'   −τP_wm ]
/// [ −½M_λw − K     V             M_λm  ]
/// [ −τP_mw        −M_mλ          τP_mm ]
/// ```
#[derive(Debug, Clone)]
pub struct ExteriorBlocks {
    pub tau: f64,
    pub w_w: DMatrix<f64>,
    pub w_lambda: DMatrix<f64>,
    pub lambda_w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// τP_wm; enters the v-row with a minus sign.
    pub penalty_wm: CsrMatrix<f64>,
    /// M_λm; enters the ṽ-row transposed with a minus sign.
    pub mass_lm: CsrMatrix<f64>,
    /// τP_mm.
    pub penalty_mm: CsrMatrix<f64>,
    pub mass_ww: CsrMatrix<f64>,
    pub mass_ll: CsrMatrix<f64>,
    /// The hypersingular matrix alone, without the penalty.
    pub w_hyp: DMatrix<f64>,
    pub reduced: Option<ReducedExterior>,
}

/// b_h with λ eliminated through `Vλ = (½M_λw + K) u⁺ − M_λm ũ`.
///
/// Writing `Q = ½M_λw + K`, the reduced form over (u⁺, ũ) is
///
/// ```text
/// [ W + τP_ww + QᵀV⁻¹Q          −(τP_wm + QᵀV⁻¹M_λm)   ]
/// [ −(τP_mw + M_mλV⁻¹Q)         τP_mm + M_mλV⁻¹M_λm    ]
/// ```
///
/// The (ũ, ũ) block is only applied as an operator.
#[derive(Clone)]
pub struct ReducedExterior {
    pub w_w: DMatrix<f64>,
    q: DMatrix<f64>,
    vinv_q: DMatrix<f64>,
    v_chol: CholeskySolver,
    mass_lm: CsrMatrix<f64>,
    penalty_wm: CsrMatrix<f64>,
    penalty_mm: CsrMatrix<f64>,
}

impl std::fmt::Debug for ReducedExterior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReducedExterior")
            .field("n_w", &self.w_w.nrows())
            .field("n_lambda", &self.q.nrows())
            .finish()
    }
}

fn sparse_to_dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

pub fn assemble_exterior(ops: &BoundaryOperators, tau: f64) -> Result<ExteriorBlocks> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("τ must be positive, got {tau}")));
    }
    let half_mass = sparse_to_dense(&ops.mass_lw) * 0.5;
    let lambda_w = -(&half_mass + &ops.k);
    let w_lambda = half_mass.transpose() + &ops.kp;
    let w_w = &ops.w_hyp + sparse_to_dense(&ops.penalty_ww) * tau;
    Ok(ExteriorBlocks {
        tau,
        w_w,
        w_lambda,
        lambda_w,
        v: ops.v.clone(),
        penalty_wm: &ops.penalty_wm * tau,
        mass_lm: ops.mass_lm.clone(),
        penalty_mm: &ops.penalty_mm * tau,
        mass_ww: ops.mass_ww.clone(),
        mass_ll: ops.mass_ll.clone(),
        w_hyp: ops.w_hyp.clone(),
        reduced: None,
    })
}

/// Eliminates λ with a Cholesky factorization of V.
pub fn symmetric_reduce(blocks: &ExteriorBlocks) -> Result<ExteriorBlocks> {
    let v_chol = CholeskySolver::new(blocks.v.clone()).map_err(|_| {
        Error::Factorization(
            "single layer matrix is not positive definite (broken quadrature or degenerate mesh)".into(),
        )
    })?;
    let q = -&blocks.lambda_w;
    let y = v_chol.solve_lower(&q);
    let mut w_w = &blocks.w_w + y.transpose() * &y;
    // exact symmetry up to the rounding of the product
    let sym = (&w_w + w_w.transpose()) * 0.5;
    w_w = sym;
    let vinv_q = v_chol.solve_matrix(&q);
    let mut out = blocks.clone();
    out.reduced = Some(ReducedExterior {
        w_w,
        q,
        vinv_q,
        v_chol,
        mass_lm: blocks.mass_lm.clone(),
        penalty_wm: blocks.penalty_wm.clone(),
        penalty_mm: blocks.penalty_mm.clone(),
    });
    Ok(out)
}

impl ReducedExterior {
    pub fn n_w(&self) -> usize {
        self.w_w.nrows()
    }

    pub fn n_m(&self) -> usize {
        self.penalty_mm.nrows()
    }

    /// (v, w̃) block applied to a trace vector.
    pub fn apply_wm(&self, x: &DVector<f64>) -> DVector<f64> {
        let mx = &self.mass_lm * x;
        -(&self.penalty_wm * x + self.vinv_q.tr_mul(&mx))
    }

    /// (ṽ, w) block applied to a W vector.
    pub fn apply_mw(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = &self.vinv_q * x;
        -(self.penalty_wm.transpose() * x + self.mass_lm.transpose() * &y)
    }

    /// (ṽ, w̃) block.
    pub fn apply_mm(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.v_chol.solve(&(&self.mass_lm * x));
        &self.penalty_mm * x + self.mass_lm.transpose() * &y
    }

    /// λ = V⁻¹(Q u⁺ − M_λm ũ).
    pub fn recover_lambda(&self, u_plus: &DVector<f64>, u_tilde: &DVector<f64>) -> DVector<f64> {
        self.v_chol.solve(&(&self.q * u_plus - &self.mass_lm * u_tilde))
    }

    /// Dense reduced matrix over (u⁺, ũ); intended for small meshes.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (nw, nm) = (self.n_w(), self.n_m());
        let mut out = DMatrix::zeros(nw + nm, nw + nm);
        out.view_mut((0, 0), (nw, nw)).copy_from(&self.w_w);
        for j in 0..nm {
            let e = DVector::from_fn(nm, |i, _| if i == j { 1.0 } else { 0.0 });
            out.view_mut((0, nw + j), (nw, 1)).copy_from(&self.apply_wm(&e));
            out.view_mut((nw, nw + j), (nm, 1)).copy_from(&self.apply_mm(&e));
        }
        for j in 0..nw {
            let e = DVector::from_fn(nw, |i, _| if i == j { 1.0 } else { 0.0 });
            out.view_mut((nw, j), (nm, 1)).copy_from(&self.apply_mw(&e));
        }
        out
    }
}

impl ExteriorBlocks {
    pub fn n_w(&self) -> usize {
        self.w_w.nrows()
    }

    pub fn n_lambda(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_m(&self) -> usize {
        self.penalty_mm.nrows()
    }

    /// Rows (v, φ) of b_h applied to (u⁺, λ) with ũ = 0.
    pub fn apply_exterior(&self, u: &DVector<f64>, lambda: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (
            &self.w_w * u + &self.w_lambda * lambda,
            &self.lambda_w * u + &self.v * lambda,
        )
    }

    /// Contributions of ũ to the (v, φ) rows.
    pub fn apply_trace_columns(&self, u_tilde: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (-(&self.penalty_wm * u_tilde), &self.mass_lm * u_tilde)
    }

    /// The ṽ-row of b_h.
    pub fn apply_trace_row(&self, u: &DVector<f64>, lambda: &DVector<f64>, u_tilde: &DVector<f64>) -> DVector<f64> {
        &self.penalty_mm * u_tilde - self.penalty_wm.transpose() * u - self.mass_lm.transpose() * lambda
    }

    /// Dense b_h matrix over (u⁺, λ, ũ).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (nw, nl, nm) = (self.n_w(), self.n_lambda(), self.n_m());
        let n = nw + nl + nm;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (nw, nw)).copy_from(&self.w_w);
        a.view_mut((0, nw), (nw, nl)).copy_from(&self.w_lambda);
        a.view_mut((nw, 0), (nl, nw)).copy_from(&self.lambda_w);
        a.view_mut((nw, nw), (nl, nl)).copy_from(&self.v);
        for (i, m, v) in self.penalty_wm.triplet_iter() {
            a[(i, nw + nl + m)] -= v;
            a[(nw + nl + m, i)] -= v;
        }
        for (l, m, v) in self.mass_lm.triplet_iter() {
            a[(nw + l, nw + nl + m)] += v;
            a[(nw + nl + m, nw + l)] -= v;
        }
        for (i, j, v) in self.penalty_mm.triplet_iter() {
            a[(nw + nl + i, nw + nl + j)] += v;
        }
        a
    }
}

/// Solves the exterior problem with ũ fixed. Uses CG on the reduced form
/// when `blocks.reduced` is present and `config.method` is CG, otherwise
/// GMRES on the unreduced (u⁺, λ) system.
pub fn solve_exterior_dirichlet(
    blocks: &ExteriorBlocks,
    trace_data: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, DVector<f64>, IterationTrace)> {
    if trace_data.len() != blocks.n_m() {
        return Err(Error::InvalidArgument(format!(
            "trace data has {} entries, trace space has {}",
            trace_data.len(),
            blocks.n_m()
        )));
    }
    let ctx = ExteriorSolver::new(blocks, config)?;
    let (rv, rphi) = blocks.apply_trace_columns(trace_data);
    ctx.solve(&(-rv), &(-rphi))
}

type BoxedOperator<'a> = Option<Box<dyn LinearOperator + 'a>>;

/// Factorized preconditioners for repeated exterior solves.
pub(crate) struct ExteriorSolver<'a> {
    blocks: &'a ExteriorBlocks,
    config: SolverConfig,
    precond_w: Option<Box<dyn LinearOperator + 'a>>,
    precond_l: Option<Box<dyn LinearOperator + 'a>>,
}

impl<'a> ExteriorSolver<'a> {
    pub fn new(blocks: &'a ExteriorBlocks, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let use_reduced = blocks.reduced.is_some() && config.method == crate::solvers::KrylovMethod::Cg;
        if config.method == crate::solvers::KrylovMethod::Cg && blocks.reduced.is_none() {
            return Err(Error::InvalidArgument(
                "CG needs the symmetric reduced exterior form; call symmetric_reduce first".into(),
            ));
        }
        let (precond_w, precond_l): (BoxedOperator, BoxedOperator) = match config.preconditioner {
            PreconditionerKind::None => (None, None),
            PreconditionerKind::Mass => (
                Some(Box::new(SpdInverse::new(&blocks.mass_ww)?)),
                Some(Box::new(SpdInverse::new(&blocks.mass_ll)?)),
            ),
            PreconditionerKind::Jacobi => {
                let ww = if use_reduced {
                    &blocks.reduced.as_ref().unwrap().w_w
                } else {
                    &blocks.w_w
                };
                (
                    Some(Box::new(DiagonalPreconditioner::from_dense(ww)?)),
                    Some(Box::new(DiagonalPreconditioner::from_dense(&blocks.v)?)),
                )
            }
        };
        Ok(Self {
            blocks,
            config: config.clone(),
            precond_w,
            precond_l,
        })
    }

    /// Solves rows (v, φ) for (u⁺, λ) with right-hand sides `f_w`, `f_l`.
    pub fn solve(
        &self,
        f_w: &DVector<f64>,
        f_l: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>, IterationTrace)> {
        let b = self.blocks;
        match (&b.reduced, self.config.method) {
            (Some(red), crate::solvers::KrylovMethod::Cg) => {
                // λ = V⁻¹(f_l + Q u), so (W + τP + QᵀV⁻¹Q) u = f_w − QᵀV⁻¹f_l
                let rhs = f_w - red.vinv_q.tr_mul(f_l);
                let (u, trace) = cg(&red.w_w, self.precond_w.as_deref(), &rhs, &self.config)?;
                let lambda = &red.vinv_q * &u + red.v_chol.solve(f_l);
                Ok((u, lambda, trace))
            }
            _ => {
                let (nw, nl) = (b.n_w(), b.n_lambda());
                let op = FnOperator::new(nw + nl, |x: &DVector<f64>| {
                    let u = x.rows(0, nw).into_owned();
                    let l = x.rows(nw, nl).into_owned();
                    let (rw, rl) = b.apply_exterior(&u, &l);
                    let mut y = DVector::zeros(nw + nl);
                    y.rows_mut(0, nw).copy_from(&rw);
                    y.rows_mut(nw, nl).copy_from(&rl);
                    y
                });
                let pw = self.precond_w.as_deref();
                let pl = self.precond_l.as_deref();
                let precond = FnOperator::new(nw + nl, |x: &DVector<f64>| {
                    let mut y = x.clone();
                    if let Some(p) = pw {
                        y.rows_mut(0, nw).copy_from(&p.apply(&x.rows(0, nw).into_owned()));
                    }
                    if let Some(p) = pl {
                        y.rows_mut(nw, nl).copy_from(&p.apply(&x.rows(nw, nl).into_owned()));
                    }
                    y
                });
                let mut rhs = DVector::zeros(nw + nl);
                rhs.rows_mut(0, nw).copy_from(f_w);
                rhs.rows_mut(nw, nl).copy_from(f_l);
                let has_precond = pw.is_some() || pl.is_some();
                let mut cfg = self.config.clone();
                cfg.method = crate::solvers::KrylovMethod::Gmres;
                let (x, trace) = gmres(&op, if has_precond { Some(&precond) } else { None }, &rhs, &cfg)?;
                Ok((x.rows(0, nw).into_owned(), x.rows(nw, nl).into_owned(), trace))
            }
        }
    }
}

/// Options for [`evaluate_exterior_potential`].
#[derive(Debug, Clone)]
pub struct PotentialOptions {
    /// Gauss points per axis on each triangle.
    pub points_per_axis: usize,
    /// Points closer than this multiple of the local triangle diameter to a
    /// triangle are rejected.
    pub min_distance_factor: f64,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self {
            points_per_axis: 6,
            min_distance_factor: 1.0,
        }
    }
}

/// Representation formula `u(x) = −∫ G(x,y) λ(y) dy + ∫ ∂G/∂n_y(x,y) u⁺(y) dy`
/// for points outside Ω⁻ (normals point out of Ω⁻).
pub fn evaluate_exterior_potential(
    w_space: &TraceSpace,
    lambda_space: &TraceSpace,
    points: &[Point],
    u_plus: &DVector<f64>,
    lambda: &DVector<f64>,
    options: &PotentialOptions,
) -> Result<Vec<f64>> {
    w_space.check_same_surface(lambda_space)?;
    if u_plus.len() != w_space.n_dofs() || lambda.len() != lambda_space.n_dofs() {
        return Err(Error::InvalidArgument(
            "coefficient vectors do not match the spaces".into(),
        ));
    }
    if options.points_per_axis == 0 {
        return Err(Error::Quadrature("points_per_axis must be at least 1".into()));
    }
    let surface = w_space.surface();
    let rule = TriangleRule::with_points_per_axis(options.points_per_axis);
    let bary = rule.barycentric();
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        for t in 0..surface.n_triangles() {
            let c = surface.centroid(t);
            let radius = surface
                .triangle_vertices(t)
                .iter()
                .map(|v| (v - c).norm())
                .fold(0.0, f64::max);
            // lower bound on the distance from x to the triangle
            let near = (c - x).norm() - radius;
            if near < options.min_distance_factor * surface.diameters[t] {
                return Err(Error::InvalidArgument(format!(
                    "point ({:.4}, {:.4}, {:.4}) is too close to the boundary for regular quadrature",
                    x.x, x.y, x.z
                )));
            }
        }
        if surface.solid_angle_sum(x) > 2.0 * std::f64::consts::PI {
            return Err(Error::InvalidArgument(format!(
                "point ({:.4}, {:.4}, {:.4}) lies inside the interior domain",
                x.x, x.y, x.z
            )));
        }
        let mut acc = 0.0;
        for t in 0..surface.n_triangles() {
            let n = surface.outward_normals[t];
            let area = surface.areas[t];
            for (b, w) in bary.iter().zip(&rule.weights) {
                let y = surface.point(t, b);
                let d = x - y;
                let r = d.norm();
                let g = super::kernel::FOUR_PI_INV / r;
                let dl = g * d.dot(&n) / (r * r);
                let wq = 2.0 * area * w;
                acc += wq * (dl * w_space.evaluate(u_plus, t, b) - g * lambda_space.evaluate(lambda, t, b));
            }
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::BemQuadrature;
    use crate::mesh::{extract_boundary, generate_ball_mesh};
    use std::sync::Arc;

    fn sphere_ops(n: usize) -> BoundaryOperators {
        let s = Arc::new(extract_boundary(&generate_ball_mesh(n).unwrap()).unwrap());
        BoundaryOperators::assemble(
            TraceSpace::p1(s.clone()),
            TraceSpace::p1(s.clone()),
            TraceSpace::dp1(s),
            &BemQuadrature::default(),
        )
        .unwrap()
    }

    fn ones(n: usize) -> DVector<f64> {
        DVector::from_element(n, 1.0)
    }

    #[test]
    fn rejects_non_positive_tau() {
        let o = sphere_ops(1);
        assert!(assemble_exterior(&o, 0.0).is_err());
        assert!(assemble_exterior(&o, f64::NAN).is_err());
    }

    #[test]
    fn reduced_form_is_symmetric_and_exact() {
        let o = sphere_ops(2);
        let b = symmetric_reduce(&assemble_exterior(&o, 10.0).unwrap()).unwrap();
        let red = b.reduced.as_ref().unwrap().to_dense();
        assert!((&red - red.transpose()).norm() <= 1e-10 * red.norm());
        // block elimination of λ from the dense unreduced matrix
        let full = b.to_dense();
        let (nw, nl, nm) = (b.n_w(), b.n_lambda(), b.n_m());
        let keep: Vec<usize> = (0..nw).chain(nw + nl..nw + nl + nm).collect();
        let a = full.select_rows(&keep).select_columns(&keep);
        let c = full.select_rows(&keep).columns(nw, nl).into_owned();
        let r = full.rows(nw, nl).select_columns(&keep);
        let schur = a - c * b.v.clone().lu().solve(&r).unwrap();
        assert!((&schur - &red).norm() <= 1e-10 * red.norm());
        // reduced quadratic form at constants is nonnegative
        let one = ones(nw + nm);
        assert!(one.dot(&(&red * &one)) >= 0.0);
    }

    #[test]
    fn penalty_scaling_touches_only_penalty_blocks() {
        let o = sphere_ops(1);
        let a = assemble_exterior(&o, 5.0).unwrap().to_dense();
        let b = assemble_exterior(&o, 10.0).unwrap().to_dense();
        let c = assemble_exterior(&o, 20.0).unwrap().to_dense();
        // linear in τ: the difference doubles with the increment
        assert!(((&c - &b) - (&b - &a) * 2.0).norm() < 1e-12 * c.norm());
        let nw = o.w_space.n_dofs();
        let nl = o.lambda_space.n_dofs();
        assert_eq!(a.rows(nw, nl), b.rows(nw, nl));
    }

    #[test]
    fn quadratic_form_without_lambda_is_hypersingular_energy() {
        let o = sphere_ops(2);
        let b = assemble_exterior(&o, 10.0).unwrap();
        let s = o.w_space.surface().clone();
        let w = DVector::from_iterator(s.n_vertices(), s.vertices.iter().map(|p| p.x + 0.3 * p.y * p.z));
        // w̃ equal to w as a function: interpolate into dP1
        let wt = o.m_space.interpolate_per_triangle(&|_, p| p.x + 0.3 * p.y * p.z);
        let wt = {
            // nodal dP1 values at the triangle vertices equal w there
            let mut v = wt.clone();
            for t in 0..s.n_triangles() {
                for (k, &d) in o.m_space.local_dofs(t).iter().enumerate() {
                    v[d] = w[s.triangles[t][k]];
                }
            }
            v
        };
        let n = b.n_w() + b.n_lambda() + b.n_m();
        let mut x = DVector::zeros(n);
        x.rows_mut(0, b.n_w()).copy_from(&w);
        x.rows_mut(b.n_w() + b.n_lambda(), b.n_m()).copy_from(&wt);
        let q = x.dot(&(b.to_dense() * &x));
        let ww = w.dot(&(&o.w_hyp * &w));
        assert!((q - ww).abs() < 1e-10 * ww, "{q} vs {ww}");
        assert!(ww > 0.0);
    }

    #[test]
    fn constant_data_row_residual_decays() {
        // u⁺ = ũ = 1 with λ = −1 (the flux of 1/r) satisfies the φ-row
        let mut res = Vec::new();
        for n in [2, 4] {
            let o = sphere_ops(n);
            let b = assemble_exterior(&o, 10.0).unwrap();
            let lam = -ones(b.n_lambda());
            let (_, r) = b.apply_exterior(&ones(b.n_w()), &lam);
            let (_, rt) = b.apply_trace_columns(&ones(b.n_m()));
            let r = r + rt;
            let lumped = &o.mass_ll * ones(b.n_lambda());
            res.push(r.iter().zip(lumped.iter()).map(|(x, m)| x * x / m).sum::<f64>().sqrt());
        }
        assert!(res[1] < 0.6 * res[0], "{res:?}");
    }

    #[test]
    fn unit_trace_gives_unit_flux() {
        let mut errs = Vec::new();
        for n in [2, 4] {
            let o = sphere_ops(n);
            let b = symmetric_reduce(&assemble_exterior(&o, 10.0).unwrap()).unwrap();
            let cfg = SolverConfig::cg(1e-10, PreconditionerKind::Mass);
            let (u, lam, trace) = solve_exterior_dirichlet(&b, &ones(b.n_m()), &cfg).unwrap();
            assert!(trace.converged);
            errs.push(o.lambda_space.l2_distance(&lam, &|_, _| -1.0));
            assert!(o.w_space.l2_distance(&u, &|_, _| 1.0) < 0.1);
        }
        assert!(errs[1] < 0.6 * errs[0], "{errs:?}");
    }

    #[test]
    fn zero_trace_gives_zero() {
        let o = sphere_ops(1);
        let b = symmetric_reduce(&assemble_exterior(&o, 10.0).unwrap()).unwrap();
        for cfg in [
            SolverConfig::cg(1e-10, PreconditionerKind::None),
            SolverConfig::gmres(1e-10, PreconditionerKind::Mass),
        ] {
            let (u, lam, _) = solve_exterior_dirichlet(&b, &DVector::zeros(b.n_m()), &cfg).unwrap();
            assert_eq!(u.amax(), 0.0);
            assert_eq!(lam.amax(), 0.0);
        }
        let bad = DVector::zeros(b.n_m() + 1);
        assert!(solve_exterior_dirichlet(&b, &bad, &SolverConfig::cg(1e-10, PreconditionerKind::None)).is_err());
    }

    #[test]
    fn reduced_and_unreduced_paths_agree() {
        let o = sphere_ops(2);
        let b = symmetric_reduce(&assemble_exterior(&o, 10.0).unwrap()).unwrap();
        let s = o.m_space.surface().clone();
        let data = o.m_space.interpolate(&|p| 1.0 + 0.5 * p.z * p.x);
        let _ = s;
        let (u1, l1, _) =
            solve_exterior_dirichlet(&b, &data, &SolverConfig::cg(1e-10, PreconditionerKind::Mass)).unwrap();
        let (u2, l2, _) =
            solve_exterior_dirichlet(&b, &data, &SolverConfig::gmres(1e-10, PreconditionerKind::Mass)).unwrap();
        assert!((&u1 - &u2).amax() < 1e-6 && (&l1 - &l2).amax() < 1e-6);
        // GMRES against a dense direct solve of the unreduced system
        let full = b.to_dense();
        let n = b.n_w() + b.n_lambda();
        let (fw, fl) = b.apply_trace_columns(&data);
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, b.n_w()).copy_from(&(-fw));
        rhs.rows_mut(b.n_w(), b.n_lambda()).copy_from(&(-fl));
        let x = crate::solvers::dense_solve(&full.view((0, 0), (n, n)).into_owned(), &rhs).unwrap();
        assert!((x.rows(0, b.n_w()) - &u2).amax() < 1e-6);
        assert!((x.rows(b.n_w(), b.n_lambda()) - &l2).amax() < 1e-6);
    }

    #[test]
    fn cg_needs_reduced_form() {
        let o = sphere_ops(1);
        let b = assemble_exterior(&o, 10.0).unwrap();
        let r = solve_exterior_dirichlet(&b, &ones(b.n_m()), &SolverConfig::cg(1e-8, PreconditionerKind::None));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn potential_of_the_sphere_solution() {
        let o = sphere_ops(4);
        let opts = PotentialOptions::default();
        // exact data u⁺ = 1, λ = −1 represent 1/r outside the unit sphere
        let u = ones(o.w_space.n_dofs());
        let lam = -ones(o.lambda_space.n_dofs());
        let pts = [
            Point::new(2.0, 0.0, 0.0),
            Point::new(0.0, 0.0, 10.0),
            Point::new(1.2, 1.2, 0.5),
        ];
        let vals = evaluate_exterior_potential(&o.w_space, &o.lambda_space, &pts, &u, &lam, &opts).unwrap();
        assert!((vals[0] - 0.5).abs() < 0.02, "{vals:?}");
        assert!((vals[1] - 0.1).abs() < 0.004, "{vals:?}");
        assert!((vals[2] - 1.0 / pts[2].norm()).abs() < 0.02, "{vals:?}");
        let zero = evaluate_exterior_potential(
            &o.w_space,
            &o.lambda_space,
            &pts,
            &DVector::zeros(u.len()),
            &DVector::zeros(lam.len()),
            &opts,
        )
        .unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        for bad in [Point::new(1.01, 0.0, 0.0), Point::new(0.0, 0.1, 0.0)] {
            let r = evaluate_exterior_potential(&o.w_space, &o.lambda_space, &[bad], &u, &lam, &opts);
            assert!(matches!(r, Err(Error::InvalidArgument(_))));
        }
    }
}
