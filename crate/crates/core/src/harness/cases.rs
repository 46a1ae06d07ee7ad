use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bem::{assemble_exterior, symmetric_reduce, BemQuadrature, BoundaryOperators, Continuity, TraceSpace};
use crate::coupling::{assemble_coupled, CoupledSystem, ExactSolution, Spaces};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_interior, assemble_load, assemble_nitsche, build_volume_space, Coefficient, InteriorBlocks, ScalarField,
};
use crate::mesh::{generate_ball_mesh, generate_cube_mesh, Point, TetMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Unit ball, meshed by `generate_ball_mesh`.
    Ball,
    /// Unit cube `(0,1)^3`.
    Cube,
}

impl Domain {
    pub fn mesh(&self, n: usize) -> Result<TetMesh> {
        match self {
            Domain::Ball => generate_ball_mesh(n),
            Domain::Cube => generate_cube_mesh(n),
        }
    }
}

/// Polynomial degrees: `j` for u⁻, `k` for u⁺, `l` for λ, `m` for ũ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degrees {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

impl Degrees {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.j) {
            return Err(Error::Unsupported(format!(
                "interior degree j = {} (supported: 1, 2)",
                self.j
            )));
        }
        if self.k != 1 {
            return Err(Error::Unsupported(format!(
                "Dirichlet trace degree k = {} (supported: 1)",
                self.k
            )));
        }
        if self.l > 1 || self.m > 1 {
            return Err(Error::Unsupported(format!(
                "trace degrees l = {}, m = {} (supported: 0, 1)",
                self.l, self.m
            )));
        }
        Ok(())
    }
}

/// A test problem: domain, data and, when known, the exact solution.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub domain: Domain,
    pub epsilon: f64,
    pub forcing: ScalarField,
    pub exact: Option<ExactSolution>,
    pub degrees: Degrees,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("epsilon", &self.epsilon)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Interior field of the sphere problem, a function of `s = π|x|²`.
fn sphere_u_minus(x: &Point) -> f64 {
    let s = PI * x.norm_squared();
    (s.sin() + s.cos()) / (2.0 * PI) + (2.0 * PI + 1.0) / (2.0 * PI)
}

/// `∇u⁻ = (cos s − sin s) x`.
pub fn sphere_grad_u_minus(x: &Point) -> Point {
    let s = PI * x.norm_squared();
    x * (s.cos() - s.sin())
}

/// `−Δu⁻ + u⁻` with `Δu⁻ = 3(cos s − sin s) − 2π|x|²(sin s + cos s)`.
fn sphere_forcing(x: &Point) -> f64 {
    let r2 = x.norm_squared();
    let s = PI * r2;
    let lap = 3.0 * (s.cos() - s.sin()) - 2.0 * PI * r2 * (s.sin() + s.cos());
    -lap + sphere_u_minus(x)
}

/// Unit ball with ε = 1, `u⁺ = 1/|x|` outside and a radial interior field
/// matching value and flux on the sphere.
pub fn sphere_case() -> ManufacturedCase {
    ManufacturedCase {
        name: "sphere".into(),
        domain: Domain::Ball,
        epsilon: 1.0,
        forcing: Arc::new(sphere_forcing),
        exact: Some(ExactSolution {
            u_minus: Arc::new(sphere_u_minus),
            u_plus: Arc::new(|x: &Point| 1.0 / x.norm()),
            // −1/r² along the outward radial direction; evaluated on Γ_h
            lambda: Arc::new(|x: &Point| -1.0 / x.norm_squared()),
        }),
        degrees: Degrees { j: 1, k: 1, l: 1, m: 1 },
    }
}

/// Unit cube with `f = 1`, ε = 1; no closed-form solution.
pub fn cube_case() -> ManufacturedCase {
    ManufacturedCase {
        name: "cube".into(),
        domain: Domain::Cube,
        epsilon: 1.0,
        forcing: Arc::new(|_: &Point| 1.0),
        exact: None,
        degrees: Degrees { j: 1, k: 1, l: 0, m: 1 },
    }
}

impl ManufacturedCase {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sphere" => Ok(sphere_case()),
            "cube" => Ok(cube_case()),
            other => Err(Error::InvalidArgument(format!("unknown case '{other}' (sphere, cube)"))),
        }
    }

    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("the {} case has no exact solution", self.name)))
    }
}

fn trace_space(surface: Arc<crate::mesh::SurfaceMesh>, degree: usize, continuous: bool) -> Result<TraceSpace> {
    if degree == 0 {
        TraceSpace::new(surface, 0, Continuity::Discontinuous)
    } else {
        let c = if continuous {
            Continuity::Continuous
        } else {
            Continuity::Discontinuous
        };
        TraceSpace::new(surface, degree, c)
    }
}

/// Everything needed to discretize a case on one mesh level.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub n: usize,
    pub degrees: Degrees,
    pub tau: f64,
    pub quadrature: BemQuadrature,
    /// Precompute the reduced exterior form (needed by the CG paths).
    pub reduce: bool,
}

/// Spaces on one mesh level: V_h^j, continuous W_h^k, Λ_h^l (continuous for
/// l = 1) and discontinuous M_h^m.
pub fn build_spaces(case: &ManufacturedCase, n: usize, degrees: Degrees) -> Result<Spaces> {
    degrees.validate()?;
    let mesh = Arc::new(case.domain.mesh(n)?);
    let volume = build_volume_space(mesh, degrees.j)?;
    let surface = volume.surface().clone();
    Ok(Spaces {
        w: trace_space(surface.clone(), degrees.k, true)?,
        lambda: trace_space(surface.clone(), degrees.l, true)?,
        m: trace_space(surface, degrees.m, false)?,
        volume,
    })
}

/// Assembles the coupled system, reusing the τ-independent operators.
pub struct LevelAssembly {
    pub spaces: Spaces,
    pub operators: BoundaryOperators,
    volume: crate::fem::VolumeForms,
    load: nalgebra::DVector<f64>,
}

impl LevelAssembly {
    pub fn new(case: &ManufacturedCase, n: usize, degrees: Degrees, quad: &BemQuadrature) -> Result<Self> {
        let spaces = build_spaces(case, n, degrees)?;
        let operators = BoundaryOperators::assemble(spaces.w.clone(), spaces.lambda.clone(), spaces.m.clone(), quad)?;
        let volume = assemble_interior(&spaces.volume, &Coefficient::Constant(case.epsilon))?;
        let f = case.forcing.clone();
        let load = assemble_load(&spaces.volume, &move |p| f(p), 2 * degrees.j + 4)?;
        Ok(Self {
            spaces,
            operators,
            volume,
            load,
        })
    }

    pub fn system(&self, tau: f64, reduce: bool) -> Result<CoupledSystem> {
        let nitsche = assemble_nitsche(&self.spaces.volume, &self.spaces.m, tau)?;
        let interior = InteriorBlocks::new(self.volume.clone(), nitsche, self.load.clone())?;
        let mut exterior = assemble_exterior(&self.operators, tau)?;
        if reduce {
            exterior = symmetric_reduce(&exterior)?;
        }
        assemble_coupled(self.spaces.clone(), interior, exterior, tau)
    }
}

pub fn discretize(case: &ManufacturedCase, d: &Discretization) -> Result<CoupledSystem> {
    LevelAssembly::new(case, d.n, d.degrees, &d.quadrature)?.system(d.tau, d.reduce)
}
