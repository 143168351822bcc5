use equimorse_core::backend::{build_backend, BackendMatrices};
use equimorse_core::catalog::{catalog, entry, CaseParams, CASES};
use equimorse_core::pipeline::{periodicity, verify_case, VerifySettings};
use equimorse_core::spectral::{
    betti_numbers, spectrum, sweep_s, SolverKind, SolverOptions, TraceSpec,
};

fn backend(case: &str, grid: usize) -> BackendMatrices {
    let params = CaseParams {
        grid,
        ..Default::default()
    };
    let (g, f) = catalog(case, &params).unwrap();
    build_backend(&g, &f).unwrap()
}

#[test]
fn kernel_dimensions_match_catalog() {
    for case in CASES {
        let e = entry(case).unwrap();
        let b = backend(case, 64);
        let kmax = e.expected_betti.len() - 1;
        let r = betti_numbers(&b, kmax, &e.betti_probes, &SolverOptions::default()).unwrap();
        assert_eq!(r.betti, e.expected_betti, "{case}");
    }
}

#[test]
fn kernel_dimensions_stable_under_refinement() {
    for case in ["sphere_height", "torus_height"] {
        let e = entry(case).unwrap();
        let coarse = betti_numbers(&backend(case, 64), 4, &e.betti_probes, &SolverOptions::default()).unwrap();
        let fine = betti_numbers(&backend(case, 128), 4, &e.betti_probes, &SolverOptions::default()).unwrap();
        assert_eq!(coarse.betti, fine.betti, "{case}");
    }
}

#[test]
fn verification_passes_on_coarse_grids() {
    for case in ["sphere_height", "torus_height", "circle_trivial"] {
        let params = CaseParams {
            grid: 64,
            ..Default::default()
        };
        let (g, f) = catalog(case, &params).unwrap();
        let settings = VerifySettings {
            betti_probes: entry(case).unwrap().betti_probes,
            ..Default::default()
        };
        let r = verify_case(case, &g, &f, &settings).unwrap();
        assert!(r.passed(), "{case}: {r:?}");
        assert!(r.slack_thm1.iter().all(|&x| x >= 0));
        for p in &r.slack_thm2 {
            assert!(p.slack.iter().all(|&x| x >= -1e-8), "{case} s={}", p.s);
        }
        assert_eq!(r.euler.lhs, r.euler.rhs);
    }
}

#[test]
fn shift_periodicity_in_top_degrees() {
    let b = backend("sphere_height", 48);
    let p = periodicity(&b, 2, &SolverOptions::default()).unwrap();
    assert!(p.pass, "{p:?}");
}

#[test]
fn free_torus_breaks_shift_periodicity_below_top_degree() {
    // kernel counterexample: β¹ = 1 while β³ = 0
    let b = backend("torus_height", 48);
    let r = betti_numbers(&b, 3, &[0.0], &SolverOptions::default()).unwrap();
    assert_eq!((r.betti[1], r.betti[3]), (1, 0));
    assert!(!periodicity(&b, 1, &SolverOptions::default()).unwrap().pass);
}

#[test]
fn sweep_gap_grows_and_trace_approaches_kernel() {
    let b = backend("sphere_height", 64);
    let s_list = [0.0, 4.0, 8.0, 16.0, 32.0];
    let r = sweep_s(&b, 0, &s_list, None, &TraceSpec::default(), &SolverOptions::default()).unwrap();
    assert!(r.points.iter().all(|p| p.report.kernel_dim == 1));
    assert!(r.gap_monotone_from.is_some_and(|s| s <= 4.0), "{:?}", r.gap_monotone_from);
    let mu: Vec<f64> = r.points.iter().map(|p| p.mu).collect();
    assert!(mu.windows(2).skip(1).all(|w| w[1] <= w[0] + 1e-12), "{mu:?}");
    assert!(mu.last().unwrap() - 1.0 < 1e-6);
}

#[test]
fn iterative_solver_agrees_with_dense() {
    let b = backend("sphere_height", 256);
    let dense = spectrum(&b, 2, 4.0, Some(6), &SolverOptions { kind: SolverKind::Dense, ..Default::default() }).unwrap();
    let iter = spectrum(&b, 2, 4.0, Some(6), &SolverOptions { kind: SolverKind::Iterative, ..Default::default() }).unwrap();
    assert_eq!(dense.kernel_dim, iter.kernel_dim);
    for (a, c) in dense.eigenvalues.iter().zip(&iter.eigenvalues) {
        assert!((a - c).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {c}");
    }
}

#[test]
fn spectra_are_deterministic() {
    let b = backend("torus_height", 64);
    let opts = SolverOptions { kind: SolverKind::Iterative, ..Default::default() };
    let a = spectrum(&b, 1, 8.0, Some(4), &opts).unwrap();
    let c = spectrum(&b, 1, 8.0, Some(4), &opts).unwrap();
    assert_eq!(a, c);
}
