//! Exit criteria of the solver, one PASS/FAIL line each.
//!
//! The lines are written straight to stdout so they show up without
//! `--nocapture`. Expensive assemblies (three sphere and three cube levels)
//! are shared between criteria.

use std::io::Write;
use std::sync::Arc;

use hybrid_fembem::bem::{BemQuadrature, BoundaryOperators, TraceSpace};
use hybrid_fembem::coupling::{solve_coupled, CoupledConfig, CoupledMethod, SolutionBundle};
use hybrid_fembem::harness::{
    cube_case, discretize, sphere_case, Discretization, ExperimentConfig, Level, ManufacturedCase, ResultRow,
    ResultTable,
};
use hybrid_fembem::mesh::{extract_boundary, generate_ball_mesh, mesh_size};
use hybrid_fembem::solvers::{find_sigma_threshold, relaxed_jacobi, run_relaxed_jacobi, JacobiConfig};
use hybrid_fembem::Result;
use nalgebra::DVector;

const OUTER_TOL: f64 = 1e-8;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(name: &'static str, outcome: Result<(bool, String)>) -> Verdict {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    let mut out = std::io::stdout();
    let _ = writeln!(out, "[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
    Verdict { name, pass, detail }
}

/// Assembled levels and their solutions with and without inner
/// preconditioning.
struct Study {
    case: ManufacturedCase,
    levels: Vec<Level>,
    pre: Vec<(ResultRow, SolutionBundle)>,
    plain: Vec<ResultRow>,
}

fn study(config: &ExperimentConfig, unpreconditioned: bool) -> Result<Study> {
    let case = config.manufactured_case()?;
    let mut levels = Vec::new();
    let (mut pre, mut plain) = (Vec::new(), Vec::new());
    for &l in &config.levels {
        let lv = Level::new(config, &case, l)?;
        pre.push(lv.solve(&case, 10.0, &config.solver)?);
        if unpreconditioned {
            plain.push(lv.solve(&case, 10.0, &config.solver.clone().unpreconditioned())?.0);
        }
        levels.push(lv);
    }
    Ok(Study {
        case,
        levels,
        pre,
        plain,
    })
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn table(rows: impl IntoIterator<Item = ResultRow>) -> ResultTable {
    let mut t = ResultTable {
        rows: rows.into_iter().collect(),
        ..Default::default()
    };
    t.sort();
    t
}

fn sphere_convergence(s: &Study) -> Result<(bool, String)> {
    let t = table(s.pre.iter().map(|p| p.0.clone()));
    let interior = t.slope(|r| r.err_l2_interior)?;
    let boundary = t.slope(|r| r.err_boundary())?;
    let errs: Vec<String> = t
        .rows
        .iter()
        .map(|r| {
            format!(
                "h={:.3} L2={:.3e} bnd={:.3e}",
                r.h,
                r.err_l2_interior.unwrap_or(f64::NAN),
                r.err_boundary().unwrap_or(f64::NAN)
            )
        })
        .collect();
    Ok((
        interior >= 1.8 && boundary >= 0.9,
        format!(
            "interior L2 slope {interior:.3} (>= 1.8), u+ + lambda slope {boundary:.3} (>= 0.9); {}",
            errs.join("; ")
        ),
    ))
}

fn cube_convergence(s: &Study) -> Result<(bool, String)> {
    let t = table(s.pre.iter().map(|p| p.0.clone()));
    let slope = t.slope(|r| r.err_mismatch)?;
    let errs: Vec<String> = t
        .rows
        .iter()
        .map(|r| format!("h={:.3} mismatch={:.3e}", r.h, r.err_mismatch.unwrap_or(f64::NAN)))
        .collect();
    let decreasing = t.rows.windows(2).all(|w| w[1].err_mismatch < w[0].err_mismatch);
    Ok((
        slope >= 1.5 && decreasing,
        format!(
            "mismatch slope {slope:.3} (>= 1.5), decreasing {decreasing}; {}",
            errs.join("; ")
        ),
    ))
}

fn tau_plateau(s: &Study) -> Result<(bool, String)> {
    // mid-level mesh
    let lv = &s.levels[1];
    let cg = CoupledConfig::new(CoupledMethod::SchurCg);
    let mut rows = Vec::new();
    for tau in [0.1, 10.0, 100.0, 1000.0] {
        let mut row = lv.solve_or_fail(&s.case, tau, &cg)?;
        if !row.ok() {
            // the discrete solution is method independent; measure it directly
            let direct = lv
                .solve(&s.case, tau, &CoupledConfig::new(CoupledMethod::MonolithicDirect))?
                .0;
            row.err_l2_interior = direct.err_l2_interior;
            row.err_l2_uplus = direct.err_l2_uplus;
            row.err_l2_lambda = direct.err_l2_lambda;
        }
        rows.push((tau, row));
    }
    let err = |r: &ResultRow| -> [f64; 2] {
        [
            r.err_l2_interior.unwrap_or(f64::NAN),
            r.err_boundary().unwrap_or(f64::NAN),
        ]
    };
    let plateau: Vec<[f64; 2]> = rows[1..].iter().map(|(_, r)| err(r)).collect();
    let small = err(&rows[0].1);
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, name) in ["interior", "boundary"].iter().enumerate() {
        let hi = plateau.iter().map(|e| e[k]).fold(f64::MIN, f64::max);
        let lo = plateau.iter().map(|e| e[k]).fold(f64::MAX, f64::min);
        let flat = hi / lo <= 2.0;
        let jump = small[k] / hi;
        pass &= flat && jump >= 5.0;
        detail.push(format!(
            "{name}: plateau max/min {:.3} (<= 2), tau=0.1 / plateau max {jump:.2} (>= 5)",
            hi / lo
        ));
    }
    let iters: Vec<usize> = rows[1..].iter().map(|(_, r)| r.outer_iters).collect();
    let plateau_ok = rows[1..].iter().all(|(_, r)| r.ok());
    let nondecreasing = plateau_ok && iters.windows(2).all(|w| w[1] >= w[0]);
    pass &= nondecreasing;
    detail.push(format!(
        "outer iterations at tau 10/100/1000: {iters:?} (nondecreasing); tau=0.1 schur-cg status: {}",
        rows[0].1.status
    ));
    Ok((pass, detail.join("; ")))
}

fn preconditioning(s: &Study) -> Result<(bool, String)> {
    let mut pass = true;
    let mut detail = Vec::new();
    for ((pre, _), plain) in s.pre.iter().zip(&s.plain) {
        let ok = pre.inner_iters_interior <= plain.inner_iters_interior
            && pre.inner_iters_exterior <= plain.inner_iters_exterior;
        pass &= ok;
        detail.push(format!(
            "level {}: interior {:.1} vs {:.1}, exterior {:.1} vs {:.1}, time {:.1}s vs {:.1}s",
            pre.level,
            pre.inner_iters_interior,
            plain.inner_iters_interior,
            pre.inner_iters_exterior,
            plain.inner_iters_exterior,
            pre.time_s,
            plain.time_s
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn operator_identities() -> Result<(bool, String)> {
    let quad = BemQuadrature::default();
    let mut pass = true;
    let mut detail = Vec::new();
    let (mut identity, mut v_gap, mut hs) = (Vec::new(), Vec::new(), Vec::new());
    for n in [2, 4, 8] {
        let mesh = generate_ball_mesh(n)?;
        hs.push(mesh_size(&mesh)?);
        let s = Arc::new(extract_boundary(&mesh)?);
        let p1 = TraceSpace::p1(s.clone());
        let ops =
            BoundaryOperators::assemble(p1.clone(), TraceSpace::p0(s.clone()), TraceSpace::dp1(s.clone()), &quad)?;
        let ops_p1 = BoundaryOperators::assemble(p1.clone(), p1.clone(), TraceSpace::dp1(s.clone()), &quad)?;

        let v = &ops_p1.v;
        let v_sym = (v - v.transpose()).norm() / v.norm();
        let v_min = v.clone().symmetric_eigen().eigenvalues.min();
        let w = &ops.w_hyp;
        let w_sym = (w - w.transpose()).norm() / w.norm();
        let w_eig = w.clone().symmetric_eigen().eigenvalues;
        let w_psd = w_eig.min() >= -1e-10 * w_eig.max();
        let one = DVector::from_element(p1.n_dofs(), 1.0);
        let w_one = (w * &one).norm() / w.norm();
        let kp_exact = ops.kp == ops.k.transpose();
        let ok = v_sym <= 1e-10 && v_min > 0.0 && w_sym <= 1e-10 && w_psd && w_one <= 1e-8 && kp_exact;
        pass &= ok;
        detail.push(format!(
            "n={n}: V asym {v_sym:.1e} min eig {v_min:.2e}, W asym {w_sym:.1e} min/max eig {:.1e}, |W1|/|W| {w_one:.1e}, K'=K^T {kp_exact}",
            w_eig.min() / w_eig.max()
        ));

        // <V1, 1> against |Γ_h| (V1 = 1 on the unit sphere)
        let area: f64 = s.areas.iter().sum();
        v_gap.push((one.dot(&(v * &one)) - area).abs());

        // (½Id − K)1 = 1 tested against piecewise constants
        let m1 = &ops.mass_lw * &one;
        let r = &m1 * 0.5 - &ops.k * &one - &m1;
        identity.push(r.iter().zip(&s.areas).map(|(x, a)| x * x / a).sum::<f64>().sqrt());
    }
    // O(h²) + 1e-8 with the constant taken from the coarsest level
    let c = (v_gap[0] - 1e-8).max(0.0) / (hs[0] * hs[0]);
    let v_ok = v_gap.iter().zip(&hs).all(|(g, h)| *g <= c * h * h + 1e-8);
    let v_ratio: Vec<f64> = v_gap.windows(2).map(|w| w[0] / w[1]).collect();
    pass &= v_ok;
    detail.push(format!(
        "|<V1,1> - |Gamma_h|| = {} (ratios {v_ratio:.2?}, h ratios {:.2?}), within C h^2 + 1e-8: {v_ok}",
        sci(&v_gap),
        hs.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>()
    ));
    let decay_ok = identity
        .windows(2)
        .zip(hs.windows(2))
        .all(|(e, h)| e[1] <= e[0] * h[1] / h[0]);
    pass &= decay_ok;
    detail.push(format!(
        "constants-identity residual {}: decays at least O(h) {decay_ok}",
        sci(&identity)
    ));
    Ok((pass, detail.join("; ")))
}

fn coercivity() -> Result<(bool, String)> {
    let case = cube_case();
    let min_eig = |tau: f64| -> Result<f64> {
        let d = Discretization {
            n: 2,
            degrees: case.degrees,
            tau,
            quadrature: BemQuadrature::default(),
            reduce: false,
        };
        Ok(discretize(&case, &d)?.symmetric_part().symmetric_eigenvalues().min())
    };
    let (a, b) = (min_eig(10.0)?, min_eig(0.01)?);
    Ok((
        a > 0.0 && b < 0.0,
        format!("min eigenvalue of the symmetric part: {a:.3e} at tau=10 (> 0), {b:.3e} at tau=0.01 (< 0)"),
    ))
}

fn cross_method(sphere: &Study) -> Result<(bool, String)> {
    let lv = &sphere.levels[0];
    let system = lv.assembly.system(10.0, true)?;
    let direct = solve_coupled(&system, &CoupledConfig::new(CoupledMethod::MonolithicDirect))?;
    let mut runs: Vec<(String, SolutionBundle)> = Vec::new();
    for m in [CoupledMethod::SchurCg, CoupledMethod::SchurGmres] {
        runs.push((m.to_string(), solve_coupled(&system, &CoupledConfig::new(m))?));
    }
    let sigma = 1.0;
    let (jac, _) = relaxed_jacobi(&system, sigma, &JacobiConfig::default())?;
    runs.push((format!("relaxed-jacobi(sigma={sigma})"), jac));
    let bound = 10.0 * OUTER_TOL;
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, b) in &runs {
        let d = b.max_relative_difference(&direct);
        pass &= d <= bound;
        detail.push(format!("{name} vs direct {d:.2e}"));
    }
    Ok((pass, format!("{} (<= {bound:.0e})", detail.join(", "))))
}

fn jacobi_dichotomy(sphere: &Study) -> Result<(bool, String)> {
    // the search classifies by decay over a short budget; the verdict runs
    // at σ* and above get the full budget and must actually converge
    let search_config = JacobiConfig {
        max_iterations: 2000,
        ..Default::default()
    };
    let config = JacobiConfig::default();
    let cube = cube_case();
    let coarse_cube = discretize(
        &cube,
        &Discretization {
            n: 2,
            degrees: cube.degrees,
            tau: 10.0,
            quadrature: BemQuadrature::default(),
            reduce: true,
        },
    )?;
    let coarse_sphere = sphere.levels[0].assembly.system(10.0, true)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, system) in [("coarse cube", &coarse_cube), ("coarse sphere", &coarse_sphere)] {
        let search = find_sigma_threshold(system, &search_config, 0.1, 1e4, 1.5)?;
        let Some(star) = search.sigma_star else {
            pass = false;
            detail.push(format!("{name}: no stable sigma in [0.1, 1e4]"));
            continue;
        };
        let above: Vec<_> = [star, 10.0 * star]
            .iter()
            .map(|&s| run_relaxed_jacobi(system, s, &config))
            .collect::<Result<_>>()?;
        let summable = above.iter().all(|o| o.converged && o.squared_increment_sum.is_finite());
        let below = run_relaxed_jacobi(system, star / 10.0, &config)?;
        let flagged = below.diverged || !below.converged;
        pass &= summable && flagged;
        detail.push(format!(
            "{name}: sigma* = {star:.3}, sigma* and 10 sigma* converge {summable} ({} and {} iterations, sums of squared increments {:.2e}, {:.2e}), sigma*/10 {}",
            above[0].iterations,
            above[1].iterations,
            above[0].squared_increment_sum,
            above[1].squared_increment_sum,
            if below.diverged {
                "diverged".to_string()
            } else if below.converged {
                format!("converged in {} iterations", below.iterations)
            } else {
                "not converged".to_string()
            }
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn consistency(studies: &[&Study]) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for s in studies {
        for (row, _) in &s.pre {
            worst = worst.max(row.residual.unwrap_or(f64::INFINITY));
            count += 1;
        }
    }
    Ok((
        worst <= OUTER_TOL,
        format!("max |b - A x| over {count} solved meshes: {worst:.3e} (<= 1e-8)"),
    ))
}

#[test]
fn acceptance_criteria() {
    let sphere_cfg = ExperimentConfig::new("sphere", vec![1, 2, 3]);
    let cube_cfg = ExperimentConfig::new("cube", vec![1, 2, 3]);
    assert_eq!(sphere_case().degrees, sphere_cfg.degrees().unwrap());

    // start the report on a fresh line after the test harness prefix
    let _ = writeln!(std::io::stdout());
    let sphere = study(&sphere_cfg, true).expect("sphere study");
    let cube = study(&cube_cfg, false).expect("cube study");

    let verdicts = [
        report("sphere convergence", sphere_convergence(&sphere)),
        report("cube convergence", cube_convergence(&cube)),
        report("tau plateau", tau_plateau(&sphere)),
        report("preconditioning ordering", preconditioning(&sphere)),
        report("operator identity suite", operator_identities()),
        report("coercivity threshold", coercivity()),
        report("cross-method equivalence", cross_method(&sphere)),
        report("jacobi dichotomy", jacobi_dichotomy(&sphere)),
        report("galerkin consistency", consistency(&[&sphere, &cube])),
    ];
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| format!("{}: {}", v.name, v.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
