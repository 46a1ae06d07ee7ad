use std::path::Path;

use nalgebra::{DMatrix, Matrix3};
use nalgebra_sparse::CsrMatrix;

use super::integrate::{BemQuadrature, PairIntegrals, PairIntegrator};
use super::space::{Continuity, TraceSpace};
use crate::error::{Error, Result};
use crate::mesh::{Point, SurfaceMesh};

/// Galerkin matrices of the boundary integral operators and the mass
/// matrices coupling the three interface spaces.
///
/// `W` is the Dirichlet space of u⁺, `Λ` the Neumann space of λ and `M` the
/// space of the hybrid trace ũ.
#[derive(Debug, Clone)]
pub struct BoundaryOperators {
    pub w_space: TraceSpace,
    pub lambda_space: TraceSpace,
    pub m_space: TraceSpace,
    /// ⟨Vφ_j, ζ_i⟩ on Λ × Λ.
    pub v: DMatrix<f64>,
    /// ⟨Kw_j, ζ_i⟩ with test Λ and trial W.
    pub k: DMatrix<f64>,
    /// ⟨K'λ_j, v_i⟩ with test W and trial Λ; the transpose of `k`.
    pub kp: DMatrix<f64>,
    /// ⟨Ww_j, v_i⟩ on W × W.
    pub w_hyp: DMatrix<f64>,
    pub mass_ww: CsrMatrix<f64>,
    pub mass_ll: CsrMatrix<f64>,
    pub mass_lw: CsrMatrix<f64>,
    pub mass_lm: CsrMatrix<f64>,
    pub mass_wm: CsrMatrix<f64>,
    pub mass_mm: CsrMatrix<f64>,
    /// `h_E^-1`-weighted masses used by the penalty terms.
    pub penalty_ww: CsrMatrix<f64>,
    pub penalty_wm: CsrMatrix<f64>,
    pub penalty_mm: CsrMatrix<f64>,
}

/// Surface curls `n × ∇_Γ λ_a` of the three barycentric functions.
fn surface_curls(surface: &SurfaceMesh, t: usize) -> [Point; 3] {
    let v = surface.triangle_vertices(t);
    let n = surface.outward_normals[t];
    let two_area = 2.0 * surface.areas[t];
    let mut out = [Point::zeros(); 3];
    for a in 0..3 {
        let e = v[(a + 2) % 3] - v[(a + 1) % 3];
        let grad = n.cross(&e) / two_area;
        out[a] = n.cross(&grad);
    }
    out
}

fn scatter(mat: &mut DMatrix<f64>, test: &TraceSpace, trial: &TraceSpace, t: usize, s: usize, local: &Matrix3<f64>) {
    let mapped = test.barycentric_coefficients() * local * trial.barycentric_coefficients().transpose();
    for (a, &i) in test.local_dofs(t).iter().enumerate() {
        for (b, &j) in trial.local_dofs(s).iter().enumerate() {
            mat[(i, j)] += mapped[(a, b)];
        }
    }
}

fn to_matrix(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

fn check_hypersingular_space(space: &TraceSpace) -> Result<()> {
    if space.degree() < 1 || space.continuity() != Continuity::Continuous {
        return Err(Error::Unsupported(
            "the hypersingular operator needs a continuous space of degree ≥ 1".into(),
        ));
    }
    Ok(())
}

/// Which operators a pass over all triangle pairs should produce.
struct Targets<'a> {
    v: Option<(&'a TraceSpace, &'a TraceSpace, &'a mut DMatrix<f64>)>,
    k: Option<(&'a TraceSpace, &'a TraceSpace, &'a mut DMatrix<f64>)>,
    w: Option<(&'a TraceSpace, &'a mut DMatrix<f64>)>,
}

fn assemble_pass(surface: &SurfaceMesh, quad: &BemQuadrature, mut targets: Targets<'_>) -> Result<()> {
    let integ = PairIntegrator::new(surface, quad)?;
    let curls: Vec<[Point; 3]> = (0..surface.n_triangles()).map(|t| surface_curls(surface, t)).collect();
    let with_dl = targets.k.is_some();
    for t in 0..surface.n_triangles() {
        for s in t..surface.n_triangles() {
            let p: PairIntegrals = integ.integrate(t, s, with_dl);
            if let Some((test, trial, m)) = targets.v.as_mut() {
                let g = to_matrix(&p.g);
                scatter(m, test, trial, t, s, &g);
                if t != s {
                    scatter(m, test, trial, s, t, &g.transpose());
                }
            }
            if let Some((test, trial, m)) = targets.k.as_mut() {
                scatter(m, test, trial, t, s, &to_matrix(&p.dy));
                if t != s {
                    scatter(m, test, trial, s, t, &to_matrix(&p.dx).transpose());
                }
            }
            if let Some((space, m)) = targets.w.as_mut() {
                let g0 = p.g_total();
                let wl = Matrix3::from_fn(|a, b| curls[t][a].dot(&curls[s][b]) * g0);
                scatter(m, space, space, t, s, &wl);
                if t != s {
                    scatter(m, space, space, s, t, &wl.transpose());
                }
            }
        }
    }
    // the two halves of each entry are accumulated in different orders
    if let Some((test, trial, m)) = targets.v {
        if same_space(test, trial) {
            symmetrize(m);
        }
    }
    if let Some((_, m)) = targets.w {
        symmetrize(m);
    }
    Ok(())
}

fn same_space(a: &TraceSpace, b: &TraceSpace) -> bool {
    a.same_surface(b) && a.degree() == b.degree() && a.continuity() == b.continuity()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Single layer matrix `⟨Vφ_j, ζ_i⟩`.
pub fn assemble_single_layer(trial: &TraceSpace, test: &TraceSpace, quad: &BemQuadrature) -> Result<DMatrix<f64>> {
    test.check_same_surface(trial)?;
    let mut v = DMatrix::zeros(test.n_dofs(), trial.n_dofs());
    assemble_pass(
        test.surface(),
        quad,
        Targets {
            v: Some((test, trial, &mut v)),
            k: None,
            w: None,
        },
    )?;
    Ok(v)
}

/// Double layer matrix `⟨Kw_j, ζ_i⟩` with the kernel `∂G/∂n_y`.
pub fn assemble_double_layer(trial: &TraceSpace, test: &TraceSpace, quad: &BemQuadrature) -> Result<DMatrix<f64>> {
    test.check_same_surface(trial)?;
    let mut k = DMatrix::zeros(test.n_dofs(), trial.n_dofs());
    assemble_pass(
        test.surface(),
        quad,
        Targets {
            v: None,
            k: Some((test, trial, &mut k)),
            w: None,
        },
    )?;
    Ok(k)
}

/// Adjoint double layer `⟨K'λ_j, v_i⟩`, obtained as the transpose of the
/// double layer matrix with the roles of the spaces swapped.
pub fn assemble_adjoint_double_layer(
    trial: &TraceSpace,
    test: &TraceSpace,
    quad: &BemQuadrature,
) -> Result<DMatrix<f64>> {
    Ok(assemble_double_layer(test, trial, quad)?.transpose())
}

/// Hypersingular matrix via `⟨Ww, v⟩ = ∫∫ G(x,y) curl_Γ w(y) · curl_Γ v(x)`.
pub fn assemble_hypersingular(trial: &TraceSpace, test: &TraceSpace, quad: &BemQuadrature) -> Result<DMatrix<f64>> {
    check_hypersingular_space(trial)?;
    check_hypersingular_space(test)?;
    test.check_same_surface(trial)?;
    if trial.n_dofs() != test.n_dofs() {
        return Err(Error::Unsupported(
            "hypersingular assembly uses one space for test and trial".into(),
        ));
    }
    let mut w = DMatrix::zeros(test.n_dofs(), trial.n_dofs());
    assemble_pass(
        test.surface(),
        quad,
        Targets {
            v: None,
            k: None,
            w: Some((test, &mut w)),
        },
    )?;
    Ok(w)
}

impl BoundaryOperators {
    /// Assembles V, K, K' and W in a single pass over triangle pairs, plus
    /// all mass matrices.
    pub fn assemble(
        w_space: TraceSpace,
        lambda_space: TraceSpace,
        m_space: TraceSpace,
        quad: &BemQuadrature,
    ) -> Result<Self> {
        w_space.check_same_surface(&lambda_space)?;
        w_space.check_same_surface(&m_space)?;
        check_hypersingular_space(&w_space)?;
        let mut v = DMatrix::zeros(lambda_space.n_dofs(), lambda_space.n_dofs());
        let mut k = DMatrix::zeros(lambda_space.n_dofs(), w_space.n_dofs());
        let mut w_hyp = DMatrix::zeros(w_space.n_dofs(), w_space.n_dofs());
        assemble_pass(
            w_space.surface(),
            quad,
            Targets {
                v: Some((&lambda_space, &lambda_space, &mut v)),
                k: Some((&lambda_space, &w_space, &mut k)),
                w: Some((&w_space, &mut w_hyp)),
            },
        )?;
        let kp = k.transpose();
        Ok(Self {
            mass_ww: w_space.mass_matrix(&w_space)?,
            mass_ll: lambda_space.mass_matrix(&lambda_space)?,
            mass_lw: lambda_space.mass_matrix(&w_space)?,
            mass_lm: lambda_space.mass_matrix(&m_space)?,
            mass_wm: w_space.mass_matrix(&m_space)?,
            mass_mm: m_space.mass_matrix(&m_space)?,
            penalty_ww: w_space.penalty_mass(&w_space)?,
            penalty_wm: w_space.penalty_mass(&m_space)?,
            penalty_mm: m_space.penalty_mass(&m_space)?,
            w_space,
            lambda_space,
            m_space,
            v,
            k,
            kp,
            w_hyp,
        })
    }

    /// Writes the dense operators in Matrix Market array format.
    pub fn export_matrix_market(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, m) in [("V", &self.v), ("K", &self.k), ("Kp", &self.kp), ("W", &self.w_hyp)] {
            std::fs::write(dir.join(format!("{name}.mtx")), crate::io::dense_matrix_market(m))?;
        }
        Ok(())
    }
}
