//! Property tests for the structural invariants of the public types.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use hybrid_fembem::bem::{assemble_exterior, symmetric_reduce, BemQuadrature, TraceSpace};
use hybrid_fembem::coupling::{solve_coupled, CoupledConfig, CoupledMethod};
use hybrid_fembem::fem::{assemble_interior, build_volume_space, Coefficient};
use hybrid_fembem::harness::{
    cube_case, sphere_case, sphere_grad_u_minus, Degrees, ExperimentConfig, LevelAssembly, ResultRow, ResultTable,
};
use hybrid_fembem::mesh::{extract_boundary, generate_ball_mesh, generate_cube_mesh, Point, TetMesh, TET_FACES};
use hybrid_fembem::solvers::{cg, gmres, KrylovMethod, PreconditionerKind, SolverConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn mesh(ball: bool, n: usize) -> TetMesh {
    if ball {
        generate_ball_mesh(n).unwrap()
    } else {
        generate_cube_mesh(n).unwrap()
    }
}

fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).norm() / a.norm()
}

/// Coarse cube assembly shared by the τ-parametrised properties.
fn cube_level() -> &'static LevelAssembly {
    static LEVEL: OnceLock<LevelAssembly> = OnceLock::new();
    LEVEL.get_or_init(|| {
        let case = cube_case();
        LevelAssembly::new(&case, 2, case.degrees, &BemQuadrature::default()).unwrap()
    })
}

fn unit_vector() -> impl Strategy<Value = Point> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("away from the origin", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Point::new(x, y, z).normalize())
}

fn row(h: f64, err: f64) -> ResultRow {
    ResultRow {
        level: 1,
        h,
        dofs_interior: 1,
        dofs_boundary: 1,
        err_l2_interior: Some(err),
        err_l2_uplus: None,
        err_l2_lambda: None,
        err_mismatch: None,
        outer_iters: 0,
        inner_iters_interior: 0.0,
        inner_iters_exterior: 0.0,
        time_s: 0.0,
        residual: None,
        parameter: None,
        status: "ok".into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tets_are_positive_and_facets_are_owned_once_or_twice(n in 1usize..5, ball: bool) {
        let m = mesh(ball, n);
        let mut owners: HashMap<[usize; 3], usize> = HashMap::new();
        for k in 0..m.n_tets() {
            prop_assert!(m.tet_volume(k) > 0.0);
            for face in TET_FACES {
                let mut f = face.map(|i| m.tets[k][i]);
                f.sort_unstable();
                *owners.entry(f).or_default() += 1;
            }
        }
        prop_assert!(owners.values().all(|&c| c == 1 || c == 2));
        let once = owners.values().filter(|&&c| c == 1).count();
        prop_assert_eq!(once, m.boundary_facets.len());
        for bf in &m.boundary_facets {
            let mut f = bf.vertices;
            f.sort_unstable();
            prop_assert_eq!(owners[&f], 1);
            let mut g = TET_FACES[bf.local_face].map(|i| m.tets[bf.tet][i]);
            g.sort_unstable();
            prop_assert_eq!(f, g);
        }
    }

    #[test]
    fn boundary_is_closed_and_consistently_oriented(n in 1usize..5, ball: bool) {
        let s = extract_boundary(&mesh(ball, n)).unwrap();
        // every directed edge once, and its reverse once
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &s.triangles {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &c) in &directed {
            prop_assert_eq!(c, 1);
            prop_assert_eq!(directed.get(&(b, a)), Some(&1));
        }
    }

    #[test]
    fn normals_are_unit_and_outward(n in 1usize..5, ball: bool) {
        let s = extract_boundary(&mesh(ball, n)).unwrap();
        let center = if ball { Point::zeros() } else { Point::new(0.5, 0.5, 0.5) };
        for t in 0..s.n_triangles() {
            let nrm = s.outward_normals[t];
            prop_assert!((nrm.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(nrm.dot(&(s.centroid(t) - center)) > 0.0);
            prop_assert!(s.areas[t] > 0.0);
            let [a, b, c] = s.triangle_vertices(t);
            // vertex order agrees with the normal
            prop_assert!((b - a).cross(&(c - a)).dot(&nrm) > 0.0);
        }
    }

    #[test]
    fn volume_dofs_follow_the_lagrange_count(n in 1usize..4, j in 1usize..3) {
        let m = Arc::new(generate_cube_mesh(n).unwrap());
        let v = build_volume_space(m, j).unwrap();
        prop_assert_eq!(v.n_dofs(), (j * n + 1).pow(3));
        // shared facet nodes carry one global index: no two DOFs sit at the same point
        let mut seen: HashMap<[i64; 3], usize> = HashMap::new();
        for (d, p) in v.dof_points().iter().enumerate() {
            let key = [p.x, p.y, p.z].map(|c| (c * 1e9).round() as i64);
            prop_assert!(seen.insert(key, d).is_none());
        }
        for k in 0..v.mesh().n_tets() {
            for &d in v.local_dofs(k) {
                prop_assert!(d < v.n_dofs());
            }
        }
    }

    #[test]
    fn trace_spaces_share_only_when_continuous(n in 1usize..4, ball: bool) {
        let s = Arc::new(extract_boundary(&mesh(ball, n)).unwrap());
        let (p0, p1, dp1) = (TraceSpace::p0(s.clone()), TraceSpace::p1(s.clone()), TraceSpace::dp1(s.clone()));
        prop_assert_eq!(p0.n_dofs(), s.n_triangles());
        prop_assert_eq!(p1.n_dofs(), s.n_vertices());
        prop_assert_eq!(dp1.n_dofs(), 3 * s.n_triangles());
        let mut uses = vec![0usize; dp1.n_dofs()];
        for t in 0..s.n_triangles() {
            prop_assert_eq!(p1.local_dofs(t), &s.triangles[t][..]);
            for &d in dp1.local_dofs(t) {
                uses[d] += 1;
            }
        }
        prop_assert!(uses.iter().all(|&u| u == 1));
    }

    #[test]
    fn interior_forms_are_symmetric(tau in 0.5f64..1e3, eps in 0.0f64..4.0) {
        let m = Arc::new(generate_cube_mesh(2).unwrap());
        let v = build_volume_space(m, 1).unwrap();
        let a = DMatrix::from(&assemble_interior(&v, &Coefficient::Constant(eps)).unwrap().stiffness_plus_mass);
        prop_assert!(relative_asymmetry(&a) <= 1e-12);
        let eig = a.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= -1e-12 * eig.max());
        if eps >= 0.1 {
            prop_assert!(eig.min() > 0.0);
        }
        let full = cube_level().system(tau, false).unwrap();
        prop_assert!(relative_asymmetry(&full.interior.to_dense()) <= 1e-12);
    }

    #[test]
    fn reduced_exterior_is_symmetric(tau in 0.5f64..1e3) {
        let ext = symmetric_reduce(&assemble_exterior(&cube_level().operators, tau).unwrap()).unwrap();
        let r = ext.reduced.as_ref().unwrap().to_dense();
        prop_assert!(relative_asymmetry(&r) <= 1e-10);
    }

    #[test]
    fn interior_and_exterior_meet_only_through_the_trace(tau in 0.5f64..1e3) {
        let sys = cube_level().system(tau, false).unwrap();
        let a = sys.to_dense();
        let [o_minus, o_plus, _, o_trace] = sys.layout.offsets();
        let nm = sys.layout.n_minus;
        let ext = o_trace - o_plus;
        prop_assert_eq!(a.view((o_minus, o_plus), (nm, ext)).amax(), 0.0);
        prop_assert_eq!(a.view((o_plus, o_minus), (ext, nm)).amax(), 0.0);
    }

    #[test]
    fn successful_solves_meet_their_tolerance(tau in 5.0f64..1e3, gmres_outer: bool) {
        let method = if gmres_outer { CoupledMethod::SchurGmres } else { CoupledMethod::SchurCg };
        let sys = cube_level().system(tau, method == CoupledMethod::SchurCg).unwrap();
        let config = CoupledConfig::new(method);
        let b = solve_coupled(&sys, &config).unwrap();
        prop_assert!(b.outer.converged);
        prop_assert!(b.outer.final_residual().unwrap() <= config.outer.tolerance);
    }

    #[test]
    fn krylov_traces_are_consistent(n in 2usize..20, seed in 0u64..1000, use_gmres: bool) {
        // diagonally dominant SPD matrix from a seeded pattern
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j { 2.0 * n as f64 } else { (((i + j) as u64 * 31 + seed) % 7) as f64 / 7.0 }
        });
        let rhs = DVector::from_fn(n, |i, _| ((i as u64 + seed) % 5) as f64 - 2.0);
        let config = if use_gmres {
            SolverConfig::gmres(1e-10, PreconditionerKind::None)
        } else {
            SolverConfig::cg(1e-10, PreconditionerKind::None)
        };
        let (x, trace) = if use_gmres { gmres(&a, None, &rhs, &config) } else { cg(&a, None, &rhs, &config) }.unwrap();
        prop_assert!(trace.converged);
        prop_assert_eq!(trace.times.len(), trace.residuals.len());
        prop_assert_eq!(trace.iterations() + 1, trace.residuals.len());
        prop_assert!(trace.final_residual().unwrap() <= config.tolerance);
        prop_assert!(trace.increments.is_empty());
        let rel = (&a * &x - &rhs).norm() / rhs.norm().max(1e-300);
        prop_assert!(rel <= 1e-8);
    }

    #[test]
    fn solver_config_accepts_exactly_positive_settings(tol in -1.0f64..1.0, max_it in 0usize..3, restart in 0usize..3, use_gmres: bool) {
        let mut c = SolverConfig::cg(1.0, PreconditionerKind::None);
        c.tolerance = tol;
        c.max_iterations = max_it;
        c.restart = restart;
        c.method = if use_gmres { KrylovMethod::Gmres } else { KrylovMethod::Cg };
        let ok = tol > 0.0 && max_it >= 1 && (!use_gmres || restart >= 1);
        prop_assert_eq!(c.validate().is_ok(), ok);
    }

    #[test]
    fn sphere_fields_satisfy_the_transmission_conditions(x in unit_vector()) {
        let case = sphere_case();
        let ex = case.exact.as_ref().unwrap();
        prop_assert!(((ex.u_minus)(&x) - (ex.u_plus)(&x)).abs() <= 1e-12);
        prop_assert!((sphere_grad_u_minus(&x).dot(&x) - (ex.lambda)(&x)).abs() <= 1e-12);
    }

    #[test]
    fn experiment_config_validation(levels in prop::collection::vec(0usize..20, 0..4), j in 0usize..4, l in 0usize..3, m in 0usize..3) {
        let mut c = ExperimentConfig::new("sphere", levels.clone());
        c.degrees = Some(Degrees { j, k: 1, l, m });
        let ok = !levels.is_empty() && levels.iter().all(|&v| (1..=16).contains(&v)) && (1..=2).contains(&j) && l <= 1 && m <= 1;
        prop_assert_eq!(c.validate().is_ok(), ok);
    }

    #[test]
    fn result_tables_sort_by_decreasing_h(hs in prop::collection::vec(1e-3f64..1.0, 0..8)) {
        let mut t = ResultTable { rows: hs.iter().map(|&h| row(h, h * h)).collect(), ..Default::default() };
        t.sort();
        prop_assert!(t.rows.windows(2).all(|w| w[0].h >= w[1].h));
        let distinct = {
            let mut v: Vec<u64> = hs.iter().map(|h| h.to_bits()).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        let slope = t.slope(|r| r.err_l2_interior);
        if distinct >= 2 {
            let s = slope.unwrap();
            prop_assert!((s - 2.0).abs() <= 1e-6);
        } else {
            prop_assert!(slope.is_err());
        }
    }
}
