//! Continuous Lagrange spaces on tetrahedra and the interior Nitsche form.

mod assembly;
mod space;

pub(crate) use assembly::solve_interior_system;
pub use assembly::{
    assemble_interior, assemble_load, assemble_nitsche, solve_interior_dirichlet, Coefficient, InteriorBlocks,
    NitscheForms, ScalarField, VolumeForms,
};
pub use space::{build_volume_space, VolumeSpace};
