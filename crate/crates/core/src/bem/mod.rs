//! Interface spaces and Galerkin boundary element operators for the exterior
//! Laplace problem.

mod assembly;
mod exterior;
mod integrate;
mod kernel;
mod space;

pub use assembly::{
    assemble_adjoint_double_layer, assemble_double_layer, assemble_hypersingular, assemble_single_layer,
    BoundaryOperators,
};
pub(crate) use exterior::ExteriorSolver;
pub use exterior::{
    assemble_exterior, evaluate_exterior_potential, solve_exterior_dirichlet, symmetric_reduce, ExteriorBlocks,
    PotentialOptions, ReducedExterior,
};
pub use integrate::BemQuadrature;
pub use kernel::{double_layer_kernel, greens_kernel};
pub use space::{Continuity, TraceSpace};
