//! Test problems, experiment drivers and result tables.

mod cases;
mod experiments;

pub use cases::{
    build_spaces, cube_case, discretize, sphere_case, sphere_grad_u_minus, Degrees, Discretization, Domain,
    LevelAssembly, ManufacturedCase,
};
pub use experiments::{
    fit_slope, run_convergence, run_jacobi_study, run_tau_sweep, ExperimentConfig, Level, ResultRow, ResultTable,
    CSV_COLUMNS,
};
