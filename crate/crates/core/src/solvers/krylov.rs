use nalgebra::{DMatrix, DVector};

use super::{IterationTrace, LinearOperator, SolverConfig, Stopwatch};
use crate::error::{Error, Result, SolverError};

fn check_dims(op: &dyn LinearOperator, precond: Option<&dyn LinearOperator>, rhs: &DVector<f64>) -> Result<()> {
    if op.dim() != rhs.len() {
        return Err(Error::InvalidArgument(format!(
            "operator dimension {} does not match rhs length {}",
            op.dim(),
            rhs.len()
        )));
    }
    if let Some(p) = precond {
        if p.dim() != rhs.len() {
            return Err(Error::InvalidArgument(format!(
                "preconditioner dimension {} does not match rhs length {}",
                p.dim(),
                rhs.len()
            )));
        }
    }
    Ok(())
}

fn precondition(precond: Option<&dyn LinearOperator>, r: &DVector<f64>) -> DVector<f64> {
    match precond {
        Some(p) => p.apply(r),
        None => r.clone(),
    }
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// The residual recorded in the trace is `sqrt(r^T M^-1 r)` relative to its
/// initial value, so without a preconditioner it is the relative Euclidean
/// residual.
pub fn cg(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    rhs: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationTrace)> {
    cg_observed(op, precond, rhs, config, &mut |_| {})
}

pub(crate) fn cg_observed(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    rhs: &DVector<f64>,
    config: &SolverConfig,
    observe: &mut dyn FnMut(&DVector<f64>),
) -> Result<(DVector<f64>, IterationTrace)> {
    config.validate()?;
    check_dims(op, precond, rhs)?;
    let clock = Stopwatch::start();
    let n = rhs.len();
    let mut trace = IterationTrace::default();
    let mut x = DVector::zeros(n);
    let mut r = rhs.clone();
    let mut z = precondition(precond, &r);
    let mut rz = r.dot(&z);
    if !rz.is_finite() || rz < 0.0 {
        return Err(SolverError::Breakdown {
            method: "cg",
            reason: "preconditioner is not positive definite".into(),
            history: vec![],
        }
        .into());
    }
    let r0 = rz.sqrt();
    trace.residuals.push(if r0 == 0.0 { 0.0 } else { 1.0 });
    trace.times.push(clock.seconds());
    if r0 == 0.0 {
        trace.converged = true;
        trace.wall_time = clock.seconds();
        return Ok((x, trace));
    }
    let mut p = z.clone();
    for _ in 0..config.max_iterations {
        let ap = op.apply(&p);
        let pap = p.dot(&ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(SolverError::Breakdown {
                method: "cg",
                reason: format!("non-positive curvature p^T A p = {pap:.3e}"),
                history: trace.residuals,
            }
            .into());
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        observe(&x);
        r.axpy(-alpha, &ap, 1.0);
        z = precondition(precond, &r);
        let rz_new = r.dot(&z);
        if !rz_new.is_finite() {
            return Err(SolverError::Breakdown {
                method: "cg",
                reason: "residual is not finite".into(),
                history: trace.residuals,
            }
            .into());
        }
        let rel = rz_new.max(0.0).sqrt() / r0;
        trace.residuals.push(rel);
        trace.times.push(clock.seconds());
        if rel <= config.tolerance {
            trace.converged = true;
            trace.wall_time = clock.seconds();
            return Ok((x, trace));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p.axpy(1.0, &z, beta);
    }
    Err(SolverError::NotConverged {
        method: "cg",
        iterations: config.max_iterations,
        last_residual: *trace.residuals.last().unwrap(),
        history: trace.residuals,
    }
    .into())
}

/// Restarted GMRES with left preconditioning from a zero initial guess.
///
/// Minimizes `|M^-1 (b - A x)|`; the recorded residual is that quantity
/// relative to `|M^-1 b|`.
pub fn gmres(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    rhs: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationTrace)> {
    config.validate()?;
    check_dims(op, precond, rhs)?;
    let clock = Stopwatch::start();
    let n = rhs.len();
    let m = config.restart.min(n.max(1));
    let mut trace = IterationTrace::default();
    let mut x = DVector::zeros(n);
    let b_norm = precondition(precond, rhs).norm();
    if !b_norm.is_finite() {
        return Err(SolverError::Breakdown {
            method: "gmres",
            reason: "right-hand side is not finite".into(),
            history: vec![],
        }
        .into());
    }
    trace.residuals.push(if b_norm == 0.0 { 0.0 } else { 1.0 });
    trace.times.push(clock.seconds());
    if b_norm == 0.0 {
        trace.converged = true;
        trace.wall_time = clock.seconds();
        return Ok((x, trace));
    }
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let r = precondition(precond, &(rhs - op.apply(&x)));
        let beta = r.norm();
        if beta / b_norm <= config.tolerance {
            trace.converged = true;
            break;
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
        basis.push(r / beta);
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = DVector::<f64>::zeros(m + 1);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if iterations >= config.max_iterations {
                break;
            }
            iterations += 1;
            let mut w = precondition(precond, &op.apply(&basis[k]));
            for (i, v) in basis.iter().enumerate() {
                let hik = w.dot(v);
                h[(i, k)] = hik;
                w.axpy(-hik, v, 1.0);
            }
            let hk1 = w.norm();
            h[(k + 1, k)] = hk1;
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let denom = h[(k, k)].hypot(h[(k + 1, k)]);
            if !denom.is_finite() {
                return Err(SolverError::Breakdown {
                    method: "gmres",
                    reason: "Hessenberg entry is not finite".into(),
                    history: trace.residuals,
                }
                .into());
            }
            if denom == 0.0 {
                return Err(SolverError::Breakdown {
                    method: "gmres",
                    reason: "operator is singular on the Krylov space".into(),
                    history: trace.residuals,
                }
                .into());
            }
            cs[k] = h[(k, k)] / denom;
            sn[k] = h[(k + 1, k)] / denom;
            h[(k, k)] = denom;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let rel = g[k + 1].abs() / b_norm;
            trace.residuals.push(rel);
            trace.times.push(clock.seconds());
            if rel <= config.tolerance || hk1 <= f64::EPSILON * beta {
                break;
            }
            basis.push(w / hk1);
        }
        // back substitution on the triangular part
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], 1.0);
        }
        if trace.residuals.last().is_some_and(|&r| r <= config.tolerance) {
            // confirm with the true residual before returning
            let true_rel = precondition(precond, &(rhs - op.apply(&x))).norm() / b_norm;
            if true_rel <= config.tolerance * 10.0 {
                trace.converged = true;
                break;
            }
        }
    }
    trace.wall_time = clock.seconds();
    if trace.converged {
        Ok((x, trace))
    } else {
        Err(SolverError::NotConverged {
            method: "gmres",
            iterations,
            last_residual: *trace.residuals.last().unwrap(),
            history: trace.residuals,
        }
        .into())
    }
}
