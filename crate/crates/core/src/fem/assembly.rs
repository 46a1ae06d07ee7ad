use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::space::VolumeSpace;
use crate::bem::TraceSpace;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::{TetRule, TriangleRule};
use crate::solvers::{cg, DiagonalPreconditioner, IterationTrace, LinearOperator, PreconditionerKind, SolverConfig};

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Reaction coefficient ε.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(ScalarField),
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Coefficient {
    fn eval(&self, x: &Point) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(g) => g(x),
        }
    }
}

/// Volume part of the interior form: `∫∇w·∇v + ∫ε w v`.
#[derive(Debug, Clone)]
pub struct VolumeForms {
    pub stiffness_plus_mass: CsrMatrix<f64>,
}

/// Boundary part of the interior form for a given penalty τ.
///
/// With `C[i][j] = ⟨∂_n φ_j, φ_i⟩`, `D[i][m] = ⟨ψ_m, ∂_n φ_i⟩` and the
/// `h_E^-1`-weighted masses `P`, the (u⁻, ũ) matrix of the interior form is
///
/// ```text
/// [ S − C − Cᵀ + τP_vv    D − τP_vm ]
/// [ (D − τP_vm)ᵀ          τP_mm     ]
/// ```
#[derive(Debug, Clone)]
pub struct NitscheForms {
    pub tau: f64,
    pub nitsche_consistency: CsrMatrix<f64>,
    /// τ P_vv.
    pub penalty_vv: CsrMatrix<f64>,
    pub trace_consistency: CsrMatrix<f64>,
    /// τ P_vm.
    pub penalty_vm: CsrMatrix<f64>,
    /// τ P_mm.
    pub penalty_mm: CsrMatrix<f64>,
}

/// The interior form over (u⁻, ũ) plus the load vector.
#[derive(Debug, Clone)]
pub struct InteriorBlocks {
    pub volume: VolumeForms,
    pub nitsche: NitscheForms,
    pub load: DVector<f64>,
    /// (v, w) block.
    pub system: CsrMatrix<f64>,
    /// (v, w̃) block; the (ṽ, w) block is its transpose.
    pub coupling: CsrMatrix<f64>,
}

fn check_quadrature_degree(d: usize) -> Result<()> {
    if d > 40 {
        return Err(Error::Quadrature(format!(
            "quadrature degree {d} exceeds the supported maximum of 40"
        )));
    }
    Ok(())
}

pub fn assemble_interior(space: &VolumeSpace, epsilon: &Coefficient) -> Result<VolumeForms> {
    if let Coefficient::Constant(c) = epsilon {
        if *c < 0.0 || !c.is_finite() {
            return Err(Error::InvalidCoefficient(format!("ε = {c} is negative")));
        }
    }
    let degree = match epsilon {
        Coefficient::Constant(_) => 2 * space.degree(),
        Coefficient::Field(_) => 2 * space.degree() + 2,
    };
    let rule = TetRule::with_degree(degree);
    let bary = rule.barycentric();
    let nl = space.n_local();
    let mut coo = CooMatrix::new(space.n_dofs(), space.n_dofs());
    let mut vals = [0.0; 10];
    let mut grads = [Point::zeros(); 10];
    let mut local = vec![0.0; nl * nl];
    for k in 0..space.mesh().n_tets() {
        let geo = space.geometry(k);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (b, w) in bary.iter().zip(&rule.weights) {
            let x = geo.point(b);
            let eps = epsilon.eval(&x);
            if eps < 0.0 || !eps.is_finite() {
                return Err(Error::InvalidCoefficient(format!(
                    "ε = {eps} at ({:.4}, {:.4}, {:.4})",
                    x.x, x.y, x.z
                )));
            }
            space.eval_basis(&geo, b, &mut vals, &mut grads);
            let wq = 6.0 * geo.volume * w;
            for i in 0..nl {
                for j in 0..nl {
                    local[i * nl + j] += wq * (grads[i].dot(&grads[j]) + eps * vals[i] * vals[j]);
                }
            }
        }
        let dofs = space.local_dofs(k);
        for i in 0..nl {
            for j in 0..nl {
                coo.push(dofs[i], dofs[j], local[i * nl + j]);
            }
        }
    }
    Ok(VolumeForms {
        stiffness_plus_mass: CsrMatrix::from(&coo),
    })
}

pub fn assemble_nitsche(space: &VolumeSpace, trace: &TraceSpace, tau: f64) -> Result<NitscheForms> {
    if !std::sync::Arc::ptr_eq(space.surface(), trace.surface()) {
        return Err(Error::Structure(
            "trace space is not built on the boundary of this volume space".into(),
        ));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("τ must be positive, got {tau}")));
    }
    let surface = space.surface();
    let rule = TriangleRule::with_degree(2 * space.degree().max(trace.degree()) + 1);
    let bary = rule.barycentric();
    let (nv, nm) = (space.n_dofs(), trace.n_dofs());
    let mut c = CooMatrix::new(nv, nv);
    let mut pvv = CooMatrix::new(nv, nv);
    let mut d = CooMatrix::new(nv, nm);
    let mut pvm = CooMatrix::new(nv, nm);
    let mut pmm = CooMatrix::new(nm, nm);
    let nl = space.n_local();
    let ml = trace.n_local();
    let mut vals = [0.0; 10];
    let mut grads = [Point::zeros(); 10];
    let mut psi = [0.0; 3];
    for t in 0..surface.n_triangles() {
        let n = surface.outward_normals[t];
        let area = surface.areas[t];
        let inv_h = 1.0 / surface.diameters[t];
        let k = space.mesh().boundary_facets[t].tet;
        let geo = space.geometry(k);
        let vd = space.local_dofs(k);
        let md = trace.local_dofs(t);
        let mut lc = [[0.0; 10]; 10];
        let mut lp = [[0.0; 10]; 10];
        let mut ld = [[0.0; 3]; 10];
        let mut lpm = [[0.0; 3]; 10];
        let mut lmm = [[0.0; 3]; 3];
        for (b, w) in bary.iter().zip(&rule.weights) {
            let (_, tb) = space.facet_to_tet_bary(t, b);
            space.eval_basis(&geo, &tb, &mut vals, &mut grads);
            trace.eval_local(b, &mut psi);
            let wq = 2.0 * area * w;
            for i in 0..nl {
                let dn_i = grads[i].dot(&n);
                for j in 0..nl {
                    lc[i][j] += wq * grads[j].dot(&n) * vals[i];
                    lp[i][j] += wq * inv_h * vals[i] * vals[j];
                }
                for m in 0..ml {
                    ld[i][m] += wq * psi[m] * dn_i;
                    lpm[i][m] += wq * inv_h * vals[i] * psi[m];
                }
            }
            for a in 0..ml {
                for m in 0..ml {
                    lmm[a][m] += wq * inv_h * psi[a] * psi[m];
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                c.push(vd[i], vd[j], lc[i][j]);
                pvv.push(vd[i], vd[j], tau * lp[i][j]);
            }
            for m in 0..ml {
                d.push(vd[i], md[m], ld[i][m]);
                pvm.push(vd[i], md[m], tau * lpm[i][m]);
            }
        }
        for a in 0..ml {
            for m in 0..ml {
                pmm.push(md[a], md[m], tau * lmm[a][m]);
            }
        }
    }
    Ok(NitscheForms {
        tau,
        nitsche_consistency: CsrMatrix::from(&c),
        penalty_vv: CsrMatrix::from(&pvv),
        trace_consistency: CsrMatrix::from(&d),
        penalty_vm: CsrMatrix::from(&pvm),
        penalty_mm: CsrMatrix::from(&pmm),
    })
}

/// Load vector `∫ f φ_i` with a rule exact for polynomials of degree `degree`.
pub fn assemble_load(space: &VolumeSpace, f: &dyn Fn(&Point) -> f64, degree: usize) -> Result<DVector<f64>> {
    check_quadrature_degree(degree)?;
    let rule = TetRule::with_degree(degree);
    let bary = rule.barycentric();
    let mut load = DVector::zeros(space.n_dofs());
    let mut vals = [0.0; 10];
    let mut grads = [Point::zeros(); 10];
    for k in 0..space.mesh().n_tets() {
        let geo = space.geometry(k);
        let dofs = space.local_dofs(k);
        for (b, w) in bary.iter().zip(&rule.weights) {
            let fx = f(&geo.point(b));
            if fx == 0.0 {
                continue;
            }
            space.eval_basis(&geo, b, &mut vals, &mut grads);
            let wq = 6.0 * geo.volume * w * fx;
            for (i, &d) in dofs.iter().enumerate() {
                load[d] += wq * vals[i];
            }
        }
    }
    Ok(load)
}

impl InteriorBlocks {
    pub fn new(volume: VolumeForms, nitsche: NitscheForms, load: DVector<f64>) -> Result<Self> {
        let n = volume.stiffness_plus_mass.nrows();
        if nitsche.nitsche_consistency.nrows() != n || load.len() != n {
            return Err(Error::Structure(
                "volume, Nitsche and load blocks have inconsistent sizes".into(),
            ));
        }
        let c = &nitsche.nitsche_consistency;
        let system = &(&(&volume.stiffness_plus_mass - c) - &c.transpose()) + &nitsche.penalty_vv;
        let coupling = &nitsche.trace_consistency - &nitsche.penalty_vm;
        Ok(Self {
            volume,
            nitsche,
            load,
            system,
            coupling,
        })
    }

    pub fn tau(&self) -> f64 {
        self.nitsche.tau
    }

    pub fn n_volume(&self) -> usize {
        self.system.nrows()
    }

    pub fn n_trace(&self) -> usize {
        self.coupling.ncols()
    }

    /// Dense (u⁻, ũ) matrix of the interior form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (nv, nm) = (self.n_volume(), self.n_trace());
        let mut a = DMatrix::zeros(nv + nm, nv + nm);
        for (i, j, v) in self.system.triplet_iter() {
            a[(i, j)] += v;
        }
        for (i, m, v) in self.coupling.triplet_iter() {
            a[(i, nv + m)] += v;
            a[(nv + m, i)] += v;
        }
        for (a_, m, v) in self.nitsche.penalty_mm.triplet_iter() {
            a[(nv + a_, nv + m)] += v;
        }
        a
    }

    /// Writes the sparse blocks as Matrix Market files into `dir`.
    pub fn export_matrix_market(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let save = |name: &str, m: &CsrMatrix<f64>| -> Result<()> {
            nalgebra_sparse::io::save_to_matrix_market_file(m, dir.join(name))
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
        };
        save("stiffness_plus_mass.mtx", &self.volume.stiffness_plus_mass)?;
        save("nitsche_consistency.mtx", &self.nitsche.nitsche_consistency)?;
        save("penalty_vv.mtx", &self.nitsche.penalty_vv)?;
        save("trace_consistency.mtx", &self.nitsche.trace_consistency)?;
        save("penalty_vm.mtx", &self.nitsche.penalty_vm)?;
        save("penalty_mm.mtx", &self.nitsche.penalty_mm)?;
        save("system.mtx", &self.system)
    }
}

/// Solves the interior problem with ũ given as Nitsche-weak Dirichlet data:
/// `A_vv u = F − A_vm ũ`, by preconditioned CG.
pub fn solve_interior_dirichlet(
    blocks: &InteriorBlocks,
    trace_data: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationTrace)> {
    if trace_data.len() != blocks.n_trace() {
        return Err(Error::InvalidArgument(format!(
            "trace data has {} entries, trace space has {}",
            trace_data.len(),
            blocks.n_trace()
        )));
    }
    let rhs = &blocks.load - &blocks.coupling * trace_data;
    solve_interior_system(blocks, &rhs, config)
}

pub(crate) fn solve_interior_system(
    blocks: &InteriorBlocks,
    rhs: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationTrace)> {
    let precond: Option<Box<dyn LinearOperator>> = match config.preconditioner {
        PreconditionerKind::None => None,
        PreconditionerKind::Jacobi => Some(Box::new(DiagonalPreconditioner::new(&blocks.system)?)),
        PreconditionerKind::Mass => {
            return Err(Error::InvalidArgument(
                "the interior solve supports the none and jacobi preconditioners".into(),
            ))
        }
    };
    cg(&blocks.system, precond.as_deref(), rhs, config)
}
