//! Randomized invariant checks on coarse meshes.

use anyhow::Result;
use hybrid_fembem::coupling::{solve_coupled, CoupledConfig, CoupledMethod, SchurComplement};
use hybrid_fembem::harness::{ExperimentConfig, Level};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 4;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Largest `|xᵀAy − yᵀAx| / (‖A‖‖x‖‖y‖)` over random pairs.
fn asymmetry(rng: &mut ChaCha8Rng, apply: &dyn Fn(&DVector<f64>) -> DVector<f64>, n: usize, scale: f64) -> f64 {
    (0..SAMPLES)
        .map(|_| {
            let (x, y) = (random_vector(rng, n), random_vector(rng, n));
            (x.dot(&apply(&y)) - y.dot(&apply(&x))).abs() / (scale * x.norm() * y.norm())
        })
        .fold(0.0, f64::max)
}

fn min_rayleigh(rng: &mut ChaCha8Rng, a: &DMatrix<f64>) -> f64 {
    (0..SAMPLES)
        .map(|_| {
            let x = random_vector(rng, a.ncols());
            x.dot(&(a * &x)) / x.norm_squared()
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_case(case: &str, base_n: usize, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<()> {
    let mut config = ExperimentConfig::new(case, vec![1]);
    config.base_n = base_n;
    let mc = config.manufactured_case()?;
    let level = Level::new(&config, &mc, 1)?;
    let ops = &level.assembly.operators;
    let tag = |s: &str| format!("{case} n={base_n} {s}");

    let v = &ops.v;
    let asym = asymmetry(rng, &|x| v * x, v.ncols(), v.norm());
    let ray = min_rayleigh(rng, v);
    report.line(
        &tag("single layer"),
        asym <= 1e-10 && ray > 0.0,
        format!("asymmetry {asym:.1e}, min Rayleigh quotient {ray:.2e}"),
    );

    let w = &ops.w_hyp;
    let asym = asymmetry(rng, &|x| w * x, w.ncols(), w.norm());
    let ray = min_rayleigh(rng, w);
    let one = DVector::from_element(w.ncols(), 1.0);
    let kernel = (w * &one).norm() / (w.norm() * one.norm());
    report.line(
        &tag("hypersingular"),
        asym <= 1e-10 && ray >= -1e-10 * w.norm() && kernel <= 1e-8,
        format!("asymmetry {asym:.1e}, min Rayleigh quotient {ray:.2e}, |W1| {kernel:.1e}"),
    );
    report.line(
        &tag("adjoint double layer"),
        ops.kp == ops.k.transpose(),
        "K' equals K^T entrywise".into(),
    );

    let m1 = &ops.mass_lw * &one;
    let r = (&m1 * 0.5 - &ops.k * &one - &m1).amax() / m1.amax();
    report.line(
        &tag("constants identity"),
        r <= 1e-6,
        format!("relative residual {r:.1e}"),
    );

    let tau = config.tau[0];
    let full = level.assembly.system(tau, false)?;
    let dense = full.to_dense();
    let x = random_vector(rng, full.layout.total());
    let gap = (full.apply(&x) - &dense * &x).amax() / (dense.norm() * x.amax());
    report.line(
        &tag("operator application"),
        gap <= 1e-12,
        format!("matrix-free vs dense {gap:.1e}"),
    );
    let min_eig = full.symmetric_part().symmetric_eigenvalues().min();
    report.line(
        &tag("coercivity"),
        min_eig > 0.0,
        format!("min eigenvalue of the symmetric part at tau={tau}: {min_eig:.2e}"),
    );

    let reduced = level.assembly.system(tau, true)?;
    let cg = CoupledConfig::new(CoupledMethod::SchurCg);
    let schur = SchurComplement::new(&reduced, &cg)?;
    let s_apply = |x: &DVector<f64>| schur.residual(x, false).expect("inner solve failed");
    let n = schur.dim();
    let scale = s_apply(&DVector::from_element(n, 1.0)).norm() / (n as f64).sqrt();
    let asym = asymmetry(rng, &s_apply, n, scale);
    report.line(&tag("schur symmetry"), asym <= 1e-7, format!("asymmetry {asym:.1e}"));

    let direct = solve_coupled(&full, &CoupledConfig::new(CoupledMethod::MonolithicDirect))?;
    let mut worst = 0.0f64;
    let mut residual = full.residual(&direct).amax();
    for (method, system) in [(CoupledMethod::SchurCg, &reduced), (CoupledMethod::SchurGmres, &full)] {
        let b = solve_coupled(system, &CoupledConfig::new(method))?;
        worst = worst.max(b.max_relative_difference(&direct));
        residual = residual.max(system.residual(&b).amax());
    }
    report.line(
        &tag("method agreement"),
        worst <= 1e-7,
        format!("max relative difference to direct {worst:.1e}"),
    );
    report.line(
        &tag("galerkin residual"),
        residual <= 1e-8,
        format!("max |b - Ax| {residual:.1e}"),
    );
    Ok(())
}

/// Runs every check and returns the number of failures.
pub fn run(seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report { failures: 0 };
    check_case("cube", 2, &mut rng, &mut report)?;
    check_case("sphere", 4, &mut rng, &mut report)?;
    Ok(report.failures)
}
