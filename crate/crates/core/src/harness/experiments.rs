//! Experiment configuration, result tables and the convergence, τ-sweep and
//! relaxed Jacobi drivers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use super::cases::{Degrees, LevelAssembly, ManufacturedCase};
use crate::bem::BemQuadrature;
use crate::coupling::{
    error_norms, interface_mismatch, solve_coupled, CoupledConfig, CoupledMethod, CoupledSystem, SolutionBundle,
};
use crate::error::{Error, Result};
use crate::mesh::mesh_size;
use crate::solvers::{run_relaxed_jacobi, IterationTrace, JacobiConfig};

/// Parameters of one experiment. Scalar `tau`/`sigma` entries are accepted
/// in place of one-element lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `sphere` or `cube`.
    pub case: String,
    /// Refinement levels; level `k` uses `base_n · 2^(k−1)` cells per axis.
    pub levels: Vec<usize>,
    #[serde(default = "default_base_n")]
    pub base_n: usize,
    /// Defaults to the case's degrees.
    #[serde(default)]
    pub degrees: Option<Degrees>,
    #[serde(default = "default_tau", deserialize_with = "one_or_many")]
    pub tau: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub sigma: Vec<f64>,
    #[serde(default = "default_solver")]
    pub solver: CoupledConfig,
    #[serde(default)]
    pub jacobi: JacobiConfig,
    #[serde(default)]
    pub quadrature: BemQuadrature,
    /// CSV destination.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_base_n() -> usize {
    4
}

fn default_tau() -> Vec<f64> {
    vec![10.0]
}

fn default_solver() -> CoupledConfig {
    CoupledConfig::new(CoupledMethod::SchurCg)
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    /// Defaults for `case` on the given levels.
    pub fn new(case: &str, levels: Vec<usize>) -> Self {
        Self {
            case: case.into(),
            levels,
            base_n: default_base_n(),
            degrees: None,
            tau: default_tau(),
            sigma: Vec::new(),
            solver: default_solver(),
            jacobi: JacobiConfig::default(),
            quadrature: BemQuadrature::default(),
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn manufactured_case(&self) -> Result<ManufacturedCase> {
        ManufacturedCase::by_name(&self.case)
    }

    pub fn degrees(&self) -> Result<Degrees> {
        Ok(match self.degrees {
            Some(d) => d,
            None => self.manufactured_case()?.degrees,
        })
    }

    /// Cells per axis at `level`.
    pub fn cells(&self, level: usize) -> Result<usize> {
        if level == 0 || level > 16 {
            return Err(Error::InvalidArgument(format!("mesh level {level} outside 1..=16")));
        }
        self.base_n
            .checked_mul(1 << (level - 1))
            .ok_or_else(|| Error::InvalidArgument(format!("mesh level {level} too fine")))
    }

    pub fn validate(&self) -> Result<()> {
        self.manufactured_case()?;
        self.degrees()?.validate()?;
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument("at least one mesh level is required".into()));
        }
        if self.base_n == 0 {
            return Err(Error::InvalidArgument("base_n must be at least 1".into()));
        }
        for &l in &self.levels {
            self.cells(l)?;
        }
        if self.tau.is_empty() || self.tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidArgument("tau values must be positive and finite".into()));
        }
        if self.sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(
                "sigma values must be positive and finite".into(),
            ));
        }
        self.solver.validate()?;
        self.jacobi.validate()?;
        self.quadrature.validate()
    }
}

/// One line of a result table. Errors are absent when the case has no
/// exact solution or the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub level: usize,
    pub h: f64,
    pub dofs_interior: usize,
    /// Boundary element unknowns, u⁺ and λ.
    pub dofs_boundary: usize,
    pub err_l2_interior: Option<f64>,
    pub err_l2_uplus: Option<f64>,
    pub err_l2_lambda: Option<f64>,
    pub err_mismatch: Option<f64>,
    pub outer_iters: usize,
    /// Mean iterations per interior solve.
    pub inner_iters_interior: f64,
    /// Mean iterations per exterior solve.
    pub inner_iters_exterior: f64,
    /// Solve time, excluding assembly.
    pub time_s: f64,
    /// `max |b − A x|` of the monolithic system over all test functions.
    pub residual: Option<f64>,
    /// Swept parameter (τ or σ) of this row.
    pub parameter: Option<f64>,
    /// `ok`, `failed: ...`, `diverged`, `not-converged`.
    pub status: String,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    /// `‖u⁺ − u_h⁺‖ + ‖λ − λ_h‖` on Γ.
    pub fn err_boundary(&self) -> Option<f64> {
        Some(self.err_l2_uplus? + self.err_l2_lambda?)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResultTable {
    /// Name of the swept parameter column, if any.
    pub parameter: Option<String>,
    pub rows: Vec<ResultRow>,
    /// Per-run iteration traces (relaxed Jacobi increments).
    pub traces: Vec<(String, IterationTrace)>,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "level",
    "h",
    "dofs_interior",
    "dofs_boundary",
    "err_L2_interior",
    "err_L2_uplus",
    "err_L2_lambda",
    "err_mismatch",
    "outer_iters",
    "inner_iters_interior",
    "inner_iters_exterior",
    "time_s",
];

impl ResultTable {
    /// Sorts rows by decreasing `h`, keeping the order of equal-`h` rows.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| b.h.total_cmp(&a.h));
    }

    /// Least-squares slope of `log(metric)` against `log(h)` over the rows
    /// with a positive finite value.
    pub fn slope(&self, metric: impl Fn(&ResultRow) -> Option<f64>) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| {
                metric(r)
                    .filter(|e| e.is_finite() && *e > 0.0)
                    .map(|e| (r.h.ln(), e.ln()))
            })
            .collect();
        fit_slope(&pts)
    }

    /// CSV with the standard columns; a swept parameter adds a leading
    /// column and a trailing `status` column.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = Vec::new();
        if let Some(p) = &self.parameter {
            header.push(p.clone());
        }
        header.extend(CSV_COLUMNS.iter().map(|s| s.to_string()));
        if self.parameter.is_some() {
            header.push("status".into());
        }
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        for r in &self.rows {
            let mut rec = Vec::new();
            if self.parameter.is_some() {
                rec.push(opt(r.parameter));
            }
            rec.extend([
                r.level.to_string(),
                format!("{:.10e}", r.h),
                r.dofs_interior.to_string(),
                r.dofs_boundary.to_string(),
                opt(r.err_l2_interior),
                opt(r.err_l2_uplus),
                opt(r.err_l2_lambda),
                opt(r.err_mismatch),
                r.outer_iters.to_string(),
                format!("{:.2}", r.inner_iters_interior),
                format!("{:.2}", r.inner_iters_exterior),
                format!("{:.3}", r.time_s),
            ]);
            if self.parameter.is_some() {
                rec.push(r.status.clone());
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> Result<f64> {
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope needs at least two points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope needs at least two distinct h".into()));
    }
    Ok(sxy / sxx)
}

/// An assembled mesh level with its size.
pub struct Level {
    pub level: usize,
    pub h: f64,
    pub assembly: LevelAssembly,
}

impl Level {
    pub fn new(config: &ExperimentConfig, case: &ManufacturedCase, level: usize) -> Result<Self> {
        let n = config.cells(level)?;
        let assembly = LevelAssembly::new(case, n, config.degrees()?, &config.quadrature)?;
        let h = mesh_size(assembly.spaces.volume.mesh())?;
        Ok(Self { level, h, assembly })
    }

    fn empty_row(&self, status: String) -> ResultRow {
        let sp = &self.assembly.spaces;
        ResultRow {
            level: self.level,
            h: self.h,
            dofs_interior: sp.volume.n_dofs(),
            dofs_boundary: sp.w.n_dofs() + sp.lambda.n_dofs(),
            err_l2_interior: None,
            err_l2_uplus: None,
            err_l2_lambda: None,
            err_mismatch: None,
            outer_iters: 0,
            inner_iters_interior: 0.0,
            inner_iters_exterior: 0.0,
            time_s: 0.0,
            residual: None,
            parameter: None,
            status,
        }
    }

    fn row(&self, case: &ManufacturedCase, system: &CoupledSystem, bundle: &SolutionBundle) -> Result<ResultRow> {
        let mut row = self.empty_row("ok".into());
        row.err_mismatch = Some(interface_mismatch(&system.spaces, &bundle.u_minus, &bundle.u_plus));
        if let Some(exact) = &case.exact {
            let e = error_norms(system, bundle, exact)?;
            row.err_l2_interior = Some(e.l2_interior);
            row.err_l2_uplus = Some(e.l2_u_plus);
            row.err_l2_lambda = Some(e.l2_lambda);
        }
        row.outer_iters = bundle.outer_iterations();
        row.inner_iters_interior = bundle.mean_interior_iterations();
        row.inner_iters_exterior = bundle.mean_exterior_iterations();
        row.time_s = bundle.wall_time;
        row.residual = Some(system.residual(bundle).amax());
        Ok(row)
    }

    /// Solves at `tau` with `solver` and measures the errors.
    pub fn solve(
        &self,
        case: &ManufacturedCase,
        tau: f64,
        solver: &CoupledConfig,
    ) -> Result<(ResultRow, SolutionBundle)> {
        let needs_reduced = solver.method == CoupledMethod::SchurCg;
        let system = self.assembly.system(tau, needs_reduced)?;
        let bundle = solve_coupled(&system, solver)?;
        Ok((self.row(case, &system, &bundle)?, bundle))
    }

    /// As [`Level::solve`], turning solver failures into a failed row.
    pub fn solve_or_fail(&self, case: &ManufacturedCase, tau: f64, solver: &CoupledConfig) -> Result<ResultRow> {
        match self.solve(case, tau, solver) {
            Ok((row, _)) => Ok(row),
            Err(e @ (Error::Solver(_) | Error::Factorization(_))) => Ok(self.empty_row(format!("failed: {e}"))),
            Err(e) => Err(e),
        }
    }
}

fn finish(config: &ExperimentConfig, mut table: ResultTable) -> Result<ResultTable> {
    table.sort();
    if let Some(path) = &config.output {
        table.write_csv(path)?;
    }
    Ok(table)
}

/// Solves every level at the first τ of the config.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let case = config.manufactured_case()?;
    let tau = config.tau[0];
    let mut table = ResultTable::default();
    for &level in &config.levels {
        log::info!("convergence: level {level}");
        let lv = Level::new(config, &case, level)?;
        table.rows.push(lv.solve(&case, tau, &config.solver)?.0);
    }
    finish(config, table)
}

/// Solves every (τ, level) pair; solver failures become failed rows.
pub fn run_tau_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let case = config.manufactured_case()?;
    let mut table = ResultTable {
        parameter: Some("tau".into()),
        ..Default::default()
    };
    for &level in &config.levels {
        let lv = Level::new(config, &case, level)?;
        for &tau in &config.tau {
            log::info!("tau sweep: level {level}, tau {tau}");
            let mut row = lv.solve_or_fail(&case, tau, &config.solver)?;
            row.parameter = Some(tau);
            table.rows.push(row);
        }
    }
    finish(config, table)
}

/// Relaxed Jacobi for every (σ, level) pair at the first τ. Divergence and
/// stagnation are recorded in the row status; increments go to `traces`.
pub fn run_jacobi_study(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    if config.sigma.is_empty() {
        return Err(Error::InvalidArgument("the Jacobi study needs a sigma list".into()));
    }
    let case = config.manufactured_case()?;
    let tau = config.tau[0];
    let mut table = ResultTable {
        parameter: Some("sigma".into()),
        ..Default::default()
    };
    for &level in &config.levels {
        let lv = Level::new(config, &case, level)?;
        let system = lv.assembly.system(tau, true)?;
        for &sigma in &config.sigma {
            log::info!("jacobi: level {level}, sigma {sigma}");
            let out = run_relaxed_jacobi(&system, sigma, &config.jacobi)?;
            let mut row = match &out.bundle {
                Some(b) => lv.row(&case, &system, b)?,
                None => lv.empty_row(String::new()),
            };
            row.status = if out.converged {
                "ok".into()
            } else if out.diverged {
                "diverged".into()
            } else {
                "not-converged".into()
            };
            row.outer_iters = out.iterations;
            row.time_s = out.trace.wall_time;
            row.parameter = Some(sigma);
            table.rows.push(row);
            table.traces.push((format!("level{level}_sigma{sigma}"), out.trace));
        }
    }
    let table = finish(config, table)?;
    if let Some(path) = &config.output {
        let stem = path.with_extension("");
        for (name, trace) in &table.traces {
            let p = PathBuf::from(format!("{}_{name}.csv", stem.display()));
            std::fs::write(p, trace.to_csv()?)?;
        }
    }
    Ok(table)
}
