//! Relaxed Jacobi iteration between the interior and exterior problems.
//!
//! Step 1 solves both subdomain problems for the current trace ũⁿ. Step 2
//! updates the trace from the ṽ-row of the form, damped by
//! `σ (τ/h) <ũⁿ⁺¹ − ũⁿ, ṽ>`. The step-2 matrix `(2 + σ) τ P_mm` is factorized
//! once.

use std::borrow::Cow;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{IterationTrace, LinearOperator, SpdInverse, Stopwatch};
use crate::coupling::{CoupledConfig, CoupledMethod, CoupledSystem, SchurComplement, SolutionBundle};
use crate::error::{Error, Result, SolverError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobiConfig {
    /// Stop once `‖ũⁿ⁺¹ − ũⁿ‖_{L²(Γ)} ≤ tolerance · max(‖ũⁿ⁺¹‖_{L²(Γ)}, 1)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Divergence is flagged when the increment grows by `divergence_factor`
    /// over `divergence_window` consecutive iterations.
    pub divergence_window: usize,
    pub divergence_factor: f64,
    /// Interior and exterior solver settings; the outer settings are unused.
    pub inner: CoupledConfig,
    /// Starting trace; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20_000,
            divergence_window: 5,
            divergence_factor: 10.0,
            inner: CoupledConfig::new(CoupledMethod::SchurCg),
            initial: None,
        }
    }
}

impl JacobiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Jacobi tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if self.divergence_window == 0 || !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidArgument(
                "divergence window must be at least 1 and factor above 1".into(),
            ));
        }
        self.inner.validate()
    }
}

/// Result of one Jacobi run, with divergence and stagnation reported as data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobiOutcome {
    pub sigma: f64,
    pub converged: bool,
    pub diverged: bool,
    /// Converged, or still contracting when the iteration budget ran out
    /// (squared increments summable). See [`JacobiOutcome::decay_rate`].
    pub stable: bool,
    pub iterations: usize,
    /// `Σ ‖ũⁿ⁺¹ − ũⁿ‖²_{L²(Γ)}` over the run.
    pub squared_increment_sum: f64,
    pub trace: IterationTrace,
    #[serde(skip)]
    pub bundle: Option<SolutionBundle>,
}

/// Window used to estimate the asymptotic contraction of the increments.
const RATE_WINDOW: usize = 50;

impl JacobiOutcome {
    /// Geometric mean ratio of successive increments over the last
    /// iterations; below one means the increments decay geometrically.
    pub fn decay_rate(&self) -> Option<f64> {
        decay_rate(&self.trace.increments)
    }
}

fn decay_rate(incs: &[f64]) -> Option<f64> {
    let k = incs.len();
    if k < 2 {
        return None;
    }
    let w = (k - 1).min(RATE_WINDOW);
    let (a, b) = (incs[k - 1 - w], incs[k - 1]);
    if a > 0.0 && b.is_finite() {
        Some((b / a).powf(1.0 / w as f64))
    } else {
        None
    }
}

/// Runs the iteration to convergence. Divergence and running out of
/// iterations are errors; see [`run_relaxed_jacobi`] for a non-failing form.
pub fn relaxed_jacobi(
    system: &CoupledSystem,
    sigma: f64,
    config: &JacobiConfig,
) -> Result<(SolutionBundle, IterationTrace)> {
    let outcome = run_relaxed_jacobi(system, sigma, config)?;
    if outcome.diverged {
        return Err(SolverError::Diverged {
            sigma,
            iterations: outcome.iterations,
            history: outcome.trace.increments,
        }
        .into());
    }
    if !outcome.converged {
        return Err(SolverError::NotConverged {
            method: "relaxed Jacobi",
            iterations: outcome.iterations,
            last_residual: outcome.trace.increments.last().copied().unwrap_or(f64::NAN),
            history: outcome.trace.increments,
        }
        .into());
    }
    let bundle = outcome.bundle.expect("converged run carries its solution");
    Ok((bundle, outcome.trace))
}

pub fn run_relaxed_jacobi(system: &CoupledSystem, sigma: f64, config: &JacobiConfig) -> Result<JacobiOutcome> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    config.validate()?;
    let clock = Stopwatch::start();
    let n = system.layout.n_trace;
    let mut u_tilde = match &config.initial {
        Some(v) if v.len() != n => {
            return Err(Error::InvalidArgument(format!(
                "initial trace has {} entries, expected {n}",
                v.len()
            )))
        }
        Some(v) => DVector::from_column_slice(v),
        None => DVector::zeros(n),
    };

    // the inner exterior solver may need the symmetric reduced blocks
    let system: Cow<CoupledSystem> =
        if config.inner.exterior_for_method().method == super::KrylovMethod::Cg && system.exterior.reduced.is_none() {
            Cow::Owned(system.with_reduced_exterior()?)
        } else {
            Cow::Borrowed(system)
        };
    let schur = SchurComplement::new(&system, &config.inner)?;

    let p_int = &system.interior.nitsche.penalty_mm;
    let step2 = SpdInverse::new(&(&(p_int * (1.0 + sigma)) + &system.exterior.penalty_mm))?;
    let mass = system.spaces.m.mass_matrix(&system.spaces.m)?;
    let l2 = |v: &DVector<f64>| (v.dot(&(&mass * v))).max(0.0).sqrt();

    let mut trace = IterationTrace::default();
    let mut squared_sum = 0.0;
    let mut converged = false;
    let mut diverged = false;
    for it in 0..config.max_iterations {
        let (um, up, lam) = schur.inner_solves(&u_tilde, true)?;
        // the rhs of the ṽ-row is zero
        let coupling_row = system.trace_row(&um, &up, &lam, &DVector::zeros(n));
        let rhs = p_int * &u_tilde * sigma - coupling_row;
        let next = step2.apply(&rhs);
        let d = &next - &u_tilde;
        let inc = l2(&d);
        trace.increments.push(inc);
        trace.times.push(clock.seconds());
        squared_sum += inc * inc;
        let scale = l2(&next).max(1.0);
        u_tilde = next;

        if !inc.is_finite() {
            diverged = true;
            break;
        }
        if inc <= config.tolerance * scale {
            converged = true;
            break;
        }
        let w = config.divergence_window;
        if it >= w {
            let incs = &trace.increments;
            let k = incs.len() - 1;
            let growing = (k - w..k).all(|i| incs[i + 1] > incs[i]);
            if growing && incs[k] >= config.divergence_factor * incs[k - w] {
                diverged = true;
                break;
            }
        }
    }
    trace.converged = converged;
    trace.wall_time = clock.seconds();

    let bundle = if converged {
        // inner solutions consistent with the final trace
        let (um, up, lam) = schur.inner_solves(&u_tilde, true)?;
        let (interior_iterations, exterior_iterations) = schur.inner_iteration_counts();
        Some(SolutionBundle {
            u_minus: um,
            u_plus: up,
            lambda: lam,
            u_tilde,
            method: "relaxed-jacobi".into(),
            outer: trace.clone(),
            interior_iterations,
            exterior_iterations,
            wall_time: clock.seconds(),
        })
    } else {
        None
    };
    let stable = converged || (!diverged && decay_rate(&trace.increments).is_some_and(|r| r < 1.0));
    Ok(JacobiOutcome {
        sigma,
        converged,
        diverged,
        stable,
        iterations: trace.increments.len(),
        squared_increment_sum: squared_sum,
        trace,
        bundle,
    })
}

/// Empirical relaxation threshold: the smallest σ (up to the bisection
/// resolution) at which the iteration is stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaSearch {
    /// `None` when even the upper end of the bracket is unstable.
    pub sigma_star: Option<f64>,
    /// Every `(σ, stable)` pair evaluated, in evaluation order.
    pub evaluations: Vec<(f64, bool)>,
}

/// Log-scale bisection for the stability threshold over `[lo, hi]`,
/// stopping once `hi / lo ≤ ratio`.
pub fn find_sigma_threshold(
    system: &CoupledSystem,
    config: &JacobiConfig,
    lo: f64,
    hi: f64,
    ratio: f64,
) -> Result<SigmaSearch> {
    if !(lo > 0.0 && hi > lo && ratio > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < lo < hi and ratio > 1, got lo={lo}, hi={hi}, ratio={ratio}"
        )));
    }
    let mut evaluations = Vec::new();
    let mut run = |s: f64| -> Result<bool> {
        let ok = run_relaxed_jacobi(system, s, config)?.stable;
        evaluations.push((s, ok));
        Ok(ok)
    };
    if !run(hi)? {
        return Ok(SigmaSearch {
            sigma_star: None,
            evaluations,
        });
    }
    if run(lo)? {
        return Ok(SigmaSearch {
            sigma_star: Some(lo),
            evaluations,
        });
    }
    let (mut a, mut b) = (lo, hi);
    while b / a > ratio {
        let mid = (a * b).sqrt();
        if run(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(SigmaSearch {
        sigma_star: Some(b),
        evaluations,
    })
}
