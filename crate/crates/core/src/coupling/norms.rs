use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{CoupledSystem, SolutionBundle, Spaces};
use crate::error::{Error, Result};
use crate::fem::ScalarField;
use crate::mesh::Point;
use crate::quadrature::TriangleRule;

/// Analytic u⁻, u⁺ and λ = ∂_n u⁺ (normal pointing out of Ω⁻).
#[derive(Clone)]
pub struct ExactSolution {
    pub u_minus: ScalarField,
    pub u_plus: ScalarField,
    pub lambda: ScalarField,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution(..)")
    }
}

/// Errors of a discrete solution. The fractional-order entries are
/// operator-induced surrogates, equivalent to but not equal to the true
/// H^{±1/2} norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2_interior: f64,
    pub l2_u_plus: f64,
    pub l2_lambda: f64,
    /// `(τ ‖h^{-1/2}(u_h⁻ − ũ_h)‖²)^{1/2}`
    pub penalty_interior: f64,
    /// `(τ ‖h^{-1/2}(u_h⁺ − ũ_h)‖²)^{1/2}`
    pub penalty_exterior: f64,
    /// `‖h^{1/2}(λ − ∂_n u_h⁻)‖`
    pub flux: f64,
    /// `‖h^{1/2}(λ − λ_h)‖`
    pub weighted_lambda: f64,
    /// `⟨V e, e⟩^{1/2}` for the λ error against its interpolant.
    pub single_layer_lambda: f64,
    /// `(⟨W e, e⟩ + (∫e)²)^{1/2}` for the u⁺ error against its interpolant.
    pub hypersingular_u_plus: f64,
    /// `‖u_h⁻|_Γ − u_h⁺‖ / ‖u_h⁺‖` in L²(Γ).
    pub mismatch: f64,
}

fn surface_rule() -> (TriangleRule, Vec<[f64; 3]>) {
    let rule = TriangleRule::with_degree(8);
    let bary = rule.barycentric();
    (rule, bary)
}

/// Relative interface mismatch `‖u_h⁻|_Γ − u_h⁺‖ / ‖u_h⁺‖` in L²(Γ); the
/// absolute value when u_h⁺ vanishes.
pub fn interface_mismatch(spaces: &Spaces, u_minus: &DVector<f64>, u_plus: &DVector<f64>) -> f64 {
    let s = spaces.w.surface();
    let (rule, bary) = surface_rule();
    let (mut diff, mut norm) = (0.0, 0.0);
    for t in 0..s.n_triangles() {
        for (b, w) in bary.iter().zip(&rule.weights) {
            let wq = 2.0 * w * s.areas[t];
            let up = spaces.w.evaluate(u_plus, t, b);
            let um = spaces.volume.evaluate_on_facet(u_minus, t, b);
            diff += wq * (um - up).powi(2);
            norm += wq * up * up;
        }
    }
    if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    }
}

/// Normal derivative of the interior discrete field on facet `t`.
fn interior_flux(spaces: &Spaces, coeffs: &DVector<f64>, t: usize, bary: &[f64; 3]) -> f64 {
    let vol = &spaces.volume;
    let (k, b) = vol.facet_to_tet_bary(t, bary);
    let geo = vol.geometry(k);
    let mut vals = [0.0; 10];
    let mut grads = [Point::zeros(); 10];
    vol.eval_basis(&geo, &b, &mut vals, &mut grads);
    let n = vol.surface().outward_normals[t];
    vol.local_dofs(k)
        .iter()
        .zip(grads.iter())
        .map(|(&d, g)| coeffs[d] * g.dot(&n))
        .sum()
}

pub fn error_norms(system: &CoupledSystem, bundle: &SolutionBundle, exact: &ExactSolution) -> Result<ErrorNorms> {
    let sp = &system.spaces;
    let l = system.layout;
    if bundle.u_minus.len() != l.n_minus
        || bundle.u_plus.len() != l.n_plus
        || bundle.lambda.len() != l.n_lambda
        || bundle.u_tilde.len() != l.n_trace
    {
        return Err(Error::InvalidArgument("bundle does not match the system layout".into()));
    }
    let s = sp.w.surface();
    let (rule, bary) = surface_rule();
    let (mut pen_i, mut pen_e, mut flux, mut wl) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..s.n_triangles() {
        let h = s.diameters[t];
        for (b, w) in bary.iter().zip(&rule.weights) {
            let wq = 2.0 * w * s.areas[t];
            let x = s.point(t, b);
            let ut = sp.m.evaluate(&bundle.u_tilde, t, b);
            let um = sp.volume.evaluate_on_facet(&bundle.u_minus, t, b);
            let up = sp.w.evaluate(&bundle.u_plus, t, b);
            let lam_ex = (exact.lambda)(&x);
            pen_i += wq * (um - ut).powi(2) / h;
            pen_e += wq * (up - ut).powi(2) / h;
            flux += wq * h * (lam_ex - interior_flux(sp, &bundle.u_minus, t, b)).powi(2);
            wl += wq * h * (lam_ex - sp.lambda.evaluate(&bundle.lambda, t, b)).powi(2);
        }
    }
    let e_lam = sp.lambda.interpolate(&|p| (exact.lambda)(p)) - &bundle.lambda;
    let e_up = sp.w.interpolate(&|p| (exact.u_plus)(p)) - &bundle.u_plus;
    let ext = &system.exterior;
    let mean = (&ext.mass_ww * &e_up).sum();
    Ok(ErrorNorms {
        l2_interior: sp.volume.l2_distance(&bundle.u_minus, &|p| (exact.u_minus)(p)),
        l2_u_plus: sp.w.l2_distance(&bundle.u_plus, &|_, p| (exact.u_plus)(p)),
        l2_lambda: sp.lambda.l2_distance(&bundle.lambda, &|_, p| (exact.lambda)(p)),
        penalty_interior: (system.tau * pen_i).sqrt(),
        penalty_exterior: (system.tau * pen_e).sqrt(),
        flux: flux.sqrt(),
        weighted_lambda: wl.sqrt(),
        single_layer_lambda: e_lam.dot(&(&ext.v * &e_lam)).max(0.0).sqrt(),
        hypersingular_u_plus: (e_up.dot(&(&ext.w_hyp * &e_up)) + mean * mean).max(0.0).sqrt(),
        mismatch: interface_mismatch(sp, &bundle.u_minus, &bundle.u_plus),
    })
}
