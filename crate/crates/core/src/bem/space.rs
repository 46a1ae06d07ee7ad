use std::sync::Arc;

use nalgebra::{DVector, Matrix3};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point, SurfaceMesh};
use crate::quadrature::TriangleRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Continuity {
    Continuous,
    Discontinuous,
}

/// Piecewise polynomial space of degree 0 or 1 on the interface triangulation.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    surface: Arc<SurfaceMesh>,
    degree: usize,
    continuity: Continuity,
    dof_map: Vec<usize>,
    n_dofs: usize,
}

impl TraceSpace {
    pub fn new(surface: Arc<SurfaceMesh>, degree: usize, continuity: Continuity) -> Result<Self> {
        let nt = surface.n_triangles();
        let (dof_map, n_dofs) = match (degree, continuity) {
            (0, Continuity::Discontinuous) => ((0..nt).collect(), nt),
            (0, Continuity::Continuous) => {
                return Err(Error::Unsupported(
                    "continuous piecewise constants are not a valid trace space".into(),
                ))
            }
            (1, Continuity::Continuous) => (
                surface.triangles.iter().flat_map(|t| *t).collect(),
                surface.n_vertices(),
            ),
            (1, Continuity::Discontinuous) => ((0..3 * nt).collect(), 3 * nt),
            (d, _) => return Err(Error::Unsupported(format!("trace space degree {d} (supported: 0, 1)"))),
        };
        Ok(Self {
            surface,
            degree,
            continuity,
            dof_map,
            n_dofs,
        })
    }

    pub fn p0(surface: Arc<SurfaceMesh>) -> Self {
        Self::new(surface, 0, Continuity::Discontinuous).expect("valid space")
    }

    pub fn p1(surface: Arc<SurfaceMesh>) -> Self {
        Self::new(surface, 1, Continuity::Continuous).expect("valid space")
    }

    pub fn dp1(surface: Arc<SurfaceMesh>) -> Self {
        Self::new(surface, 1, Continuity::Discontinuous).expect("valid space")
    }

    pub fn surface(&self) -> &Arc<SurfaceMesh> {
        &self.surface
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Number of basis functions supported on each triangle.
    pub fn n_local(&self) -> usize {
        if self.degree == 0 {
            1
        } else {
            3
        }
    }

    pub fn local_dofs(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.dof_map[n * t..n * (t + 1)]
    }

    pub fn same_surface(&self, other: &TraceSpace) -> bool {
        Arc::ptr_eq(&self.surface, &other.surface)
    }

    pub(crate) fn check_same_surface(&self, other: &TraceSpace) -> Result<()> {
        if self.same_surface(other) {
            Ok(())
        } else {
            Err(Error::Structure("trace spaces live on different surface meshes".into()))
        }
    }

    /// Rows express the local basis in terms of the three barycentric
    /// coordinates; only the first `n_local` rows are meaningful.
    pub(crate) fn barycentric_coefficients(&self) -> Matrix3<f64> {
        if self.degree == 0 {
            Matrix3::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        } else {
            Matrix3::identity()
        }
    }

    /// Local basis values at barycentric point `bary`.
    pub fn eval_local(&self, bary: &[f64; 3], out: &mut [f64]) {
        if self.degree == 0 {
            out[0] = 1.0;
        } else {
            out[..3].copy_from_slice(bary);
        }
    }

    pub fn evaluate(&self, coeffs: &DVector<f64>, t: usize, bary: &[f64; 3]) -> f64 {
        let mut vals = [0.0; 3];
        self.eval_local(bary, &mut vals);
        self.local_dofs(t).iter().zip(vals).map(|(&d, v)| coeffs[d] * v).sum()
    }

    /// Galerkin mass matrix `M[i][j] = ∫ψ_i φ_j` with `self` as test space.
    pub fn mass_matrix(&self, trial: &TraceSpace) -> Result<CsrMatrix<f64>> {
        self.weighted_mass(trial, |_| 1.0)
    }

    /// Penalty mass `∫ h_E^-1 ψ_i φ_j` with the local facet diameter `h_E`.
    pub fn penalty_mass(&self, trial: &TraceSpace) -> Result<CsrMatrix<f64>> {
        let s = self.surface.clone();
        self.weighted_mass(trial, move |t| 1.0 / s.diameters[t])
    }

    fn weighted_mass(&self, trial: &TraceSpace, weight: impl Fn(usize) -> f64) -> Result<CsrMatrix<f64>> {
        self.check_same_surface(trial)?;
        let ta = self.barycentric_coefficients();
        let tb = trial.barycentric_coefficients();
        // exact P1 mass on a triangle of unit area
        let m1 = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 12.0;
        let local = ta * m1 * tb.transpose();
        let mut coo = CooMatrix::new(self.n_dofs, trial.n_dofs);
        for t in 0..self.surface.n_triangles() {
            let scale = self.surface.areas[t] * weight(t);
            for (a, &i) in self.local_dofs(t).iter().enumerate() {
                for (b, &j) in trial.local_dofs(t).iter().enumerate() {
                    coo.push(i, j, scale * local[(a, b)]);
                }
            }
        }
        Ok(CsrMatrix::from(&coo))
    }

    /// Nodal interpolation for P1 spaces; for P0 the triangle mean (the L2
    /// projection) computed with a degree-8 rule.
    pub fn interpolate(&self, f: &dyn Fn(&Point) -> f64) -> DVector<f64> {
        let mut c = DVector::zeros(self.n_dofs);
        match (self.degree, self.continuity) {
            (0, _) => {
                let rule = TriangleRule::with_degree(8);
                for t in 0..self.surface.n_triangles() {
                    let mean: f64 = rule
                        .barycentric()
                        .into_iter()
                        .zip(&rule.weights)
                        .map(|(b, w)| 2.0 * w * f(&self.surface.point(t, &b)))
                        .sum();
                    c[t] = mean;
                }
            }
            (_, Continuity::Continuous) => {
                for (v, p) in self.surface.vertices.iter().enumerate() {
                    c[v] = f(p);
                }
            }
            (_, Continuity::Discontinuous) => {
                for t in 0..self.surface.n_triangles() {
                    let tri = self.surface.triangles[t];
                    for (a, &d) in self.local_dofs(t).iter().enumerate() {
                        c[d] = f(&self.surface.vertices[tri[a]]);
                    }
                }
            }
        }
        c
    }

    /// Interpolation of data given per (triangle, corner), e.g. a piecewise
    /// smooth field with different one-sided values at vertices.
    pub fn interpolate_per_triangle(&self, f: &dyn Fn(usize, &Point) -> f64) -> DVector<f64> {
        let mut c = DVector::zeros(self.n_dofs);
        for t in 0..self.surface.n_triangles() {
            let tri = self.surface.triangles[t];
            if self.degree == 0 {
                c[t] = f(t, &self.surface.centroid(t));
            } else {
                for (a, &d) in self.local_dofs(t).iter().enumerate() {
                    c[d] = f(t, &self.surface.vertices[tri[a]]);
                }
            }
        }
        c
    }

    pub fn l2_norm(&self, coeffs: &DVector<f64>) -> f64 {
        self.l2_distance(coeffs, &|_, _| 0.0)
    }

    /// `‖u_h − g‖_{L²(Γ_h)}` with `g(t, x)` evaluated on triangle `t`.
    pub fn l2_distance(&self, coeffs: &DVector<f64>, g: &dyn Fn(usize, &Point) -> f64) -> f64 {
        let rule = TriangleRule::with_degree(8);
        let mut acc = 0.0;
        for t in 0..self.surface.n_triangles() {
            let area = self.surface.areas[t];
            for (b, w) in rule.barycentric().into_iter().zip(&rule.weights) {
                let x = self.surface.point(t, &b);
                let d = self.evaluate(coeffs, t, &b) - g(t, &x);
                acc += 2.0 * w * area * d * d;
            }
        }
        acc.sqrt()
    }

    /// Coefficients of the constant function 1.
    pub fn constant(&self, value: f64) -> DVector<f64> {
        DVector::from_element(self.n_dofs, value)
    }
}
