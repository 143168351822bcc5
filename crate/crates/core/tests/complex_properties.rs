use equimorse_core::backend::{build_backend, validate_backend, Geometry, InvariantFunction, RevolutionProfile, TrigTerm};
use equimorse_core::cartan::{build_deformed, deformed_deq, degree_space, expansion_residual, EqForm};
use equimorse_core::catalog::{catalog, CaseParams};
use equimorse_core::linalg;
use proptest::prelude::*;

fn torus_backend(tube: f64, gap: f64, weight: u32, grid: usize, amp: f64) -> equimorse_core::backend::BackendMatrices {
    let g = Geometry::Revolution(RevolutionProfile::torus(tube, tube + gap, weight, grid));
    let f = InvariantFunction::Trig {
        terms: vec![
            TrigTerm { cos: 0.0, sin: 1.0, freq: 1.0 / tube },
            TrigTerm { cos: amp, sin: 0.0, freq: 2.0 / tube },
        ],
    };
    build_backend(&g, &f).unwrap()
}

fn sphere_backend(radius: f64, weight: u32, grid: usize) -> equimorse_core::backend::BackendMatrices {
    let g = Geometry::Revolution(RevolutionProfile::sphere(radius, weight, grid));
    let f = InvariantFunction::Trig {
        terms: vec![InvariantFunction::cos(1.0 / radius, 1.0)],
    };
    build_backend(&g, &f).unwrap()
}

fn random_form(b: &equimorse_core::backend::BackendMatrices, k: usize, seed: &[f64]) -> EqForm {
    let space = degree_space(b, k);
    let coeffs = (0..space.dim).map(|i| seed[i % seed.len()] * ((i * 7 + 3) % 11) as f64).collect();
    EqForm::new(space, coeffs).unwrap()
}

fn vmax(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn deformed_adjoint_identity(
        tube in 0.5f64..2.0,
        gap in 0.5f64..3.0,
        weight in 1u32..4,
        grid in 16usize..64,
        s in 0.0f64..20.0,
        k in 0usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 1..9),
    ) {
        let b = torus_backend(tube, gap, weight, grid, 0.0);
        let ops = build_deformed(&b, s, k).unwrap();
        let x = random_form(&b, k, &seed);
        let y = random_form(&b, k + 1, &seed[..seed.len().max(2) - 1]);
        let lhs = ops.d.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&ops.d_star.apply(&y).unwrap());
        let scale = 1.0 + ops.d.apply(&x).unwrap().norm() * y.norm();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn deformed_differential_squares_to_zero(
        radius in 0.5f64..2.0,
        weight in 1u32..4,
        grid in 16usize..64,
        s in 0.0f64..20.0,
        k in 0usize..4,
        seed in proptest::collection::vec(-1.0f64..1.0, 1..9),
    ) {
        let b = sphere_backend(radius, weight, grid);
        let d0 = deformed_deq(&b, s, k).unwrap();
        let d1 = deformed_deq(&b, s, k + 1).unwrap();
        let x = random_form(&b, k, &seed);
        let dx = d0.apply(&x).unwrap();
        let ddx = d1.apply(&dx).unwrap();
        let scale = 1.0 + linalg::norm_inf(&d1.matrix) * vmax(&dx.coeffs);
        prop_assert!(vmax(&ddx.coeffs) <= 1e-12 * scale);
    }

    #[test]
    fn laplacian_is_nonnegative(
        tube in 0.5f64..2.0,
        gap in 0.5f64..3.0,
        amp in -0.3f64..0.3,
        grid in 16usize..48,
        s in 0.0f64..20.0,
        k in 0usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 1..9),
    ) {
        let b = torus_backend(tube, gap, 1, grid, amp);
        let lap = build_deformed(&b, s, k).unwrap().laplacian;
        let x = random_form(&b, k, &seed);
        let q = lap.apply(&x).unwrap().inner(&x);
        prop_assert!(q >= -1e-10 * (1.0 + linalg::norm_inf(&lap.matrix)) * x.inner(&x));
    }

    #[test]
    fn backend_identities_hold(
        tube in 0.5f64..2.0,
        gap in 0.5f64..3.0,
        weight in 1u32..5,
        grid in 16usize..96,
    ) {
        let b = torus_backend(tube, gap, weight, grid, 0.1);
        let r = validate_backend(&b).unwrap();
        prop_assert!(r.min_mass > 0.0);
    }
}

#[test]
fn witten_expansion_on_every_case() {
    for case in ["sphere_height", "sphere_bumpy", "torus_height", "circle_trivial"] {
        let params = CaseParams {
            grid: 64,
            ..Default::default()
        };
        let (g, f) = catalog(case, &params).unwrap();
        let b = build_backend(&g, &f).unwrap();
        for k in 0..=4 {
            for s in [0.5, 3.0, 17.0] {
                let r = expansion_residual(&b, s, k, 20).unwrap();
                assert!(r <= 1e-10, "{case} k={k} s={s}: {r}");
            }
        }
    }
}

#[test]
fn undeformed_operator_is_bit_identical_at_zero() {
    let b = sphere_backend(1.0, 2, 32);
    for k in 0..4 {
        let a = build_deformed(&b, 0.0, k).unwrap().laplacian.matrix;
        let c = equimorse_core::cartan::build_delta_eq(&b, k).unwrap().matrix;
        assert_eq!(a, c);
    }
}

#[test]
fn negative_s_is_rejected() {
    let b = sphere_backend(1.0, 1, 16);
    assert!(deformed_deq(&b, -1.0, 0).is_err());
}
