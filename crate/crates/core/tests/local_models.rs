use equimorse_core::local::*;

#[test]
fn oscillator_grid_matches_closed_form() {
    for a in [1.0, 10.0] {
        let grid = ho_grid_spectrum(a, 5, 600);
        for (g, e) in grid.iter().zip(ho_spectrum(a, 5)) {
            assert!((g - e).abs() / e < 1e-3, "a={a}: {g} vs {e}");
        }
    }
}

#[test]
fn ground_state_normalised_and_localising() {
    for a in [10.0, 100.0, 1000.0] {
        let w = ho_ground(a);
        assert!((w.norm_squared() - 1.0).abs() < 1e-10);
        assert!(w.operator_residual(4000) < 1e-3, "a={a}");
    }
    let pairing: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&a| ho_ground(a).bump_pairing())
        .collect();
    assert!(pairing.windows(2).all(|p| p[1] > p[0]));
    assert!(1.0 - pairing[2] < 1e-2, "{pairing:?}");
}

#[test]
fn block_matrix_residuals() {
    for s in [0.0, 0.5, 5.0, 50.0] {
        for m in [0.0, 1.0, 3.0] {
            for eps in [1, -1] {
                let pairs = block_matrix_eigen(s, m, eps);
                let r = s.hypot(m);
                assert!((pairs[0].value + 2.0 * r).abs() < 1e-12);
                assert!((pairs[1].value - 2.0 * r).abs() < 1e-12);
                assert!(block_residual(s, m, eps) < 1e-12 * (1.0 + r));
                let v = pairs[0].vector;
                let w = pairs[1].vector;
                assert!((v[0] * w[0] + v[1] * w[1]).abs() < 1e-14 || r == 0.0);
            }
        }
    }
}

#[test]
fn low_eigenvector_aligns_with_sign() {
    // ε = +1 favours t, ε = −1 favours η as s grows
    let p = block_matrix_eigen(1e4, 1.0, 1);
    assert!(p[0].vector[0].abs() > 1.0 - 1e-8);
    let p = block_matrix_eigen(1e4, 1.0, -1);
    assert!(p[0].vector[1].abs() > 1.0 - 1e-8);
}

#[test]
fn branch_spectra_match_disk_grid() {
    for s in [5.0, 10.0] {
        for m in [1u32, 2, 5] {
            for eps in [1i8, -1] {
                let (a, b) = ab_branch_spectra(s, f64::from(m), eps, 3);
                let (ga, gb) = ab_branch_grid(s, m, eps, 3, 400).unwrap();
                for (exp, got) in [(&a, &ga), (&b, &gb)] {
                    for (e, g) in exp.eigenvalues.iter().zip(&got.eigenvalues) {
                        let err = branch_relative_error(*e, *g, s);
                        assert!(
                            err < 1e-2,
                            "s={s} m={m} ε={eps} {}: {e} vs {g}",
                            exp.label
                        );
                    }
                }
            }
        }
    }
}

fn point(weights: Vec<u32>, eps: Vec<i8>, lambdas: Vec<i8>) -> LocalPointModel {
    LocalPointModel {
        n: 2 * weights.len() + lambdas.len(),
        weights,
        eps,
        lambdas,
    }
}

#[test]
fn point_contributions_match_grid_counts() {
    let models = [
        point(vec![1], vec![1], vec![]),
        point(vec![1], vec![-1], vec![]),
        point(vec![2], vec![1], vec![]),
        point(vec![], vec![], vec![1]),
        point(vec![], vec![], vec![-1]),
    ];
    for model in &models {
        let counts = point_oracle_counts(model, 64.0, 4).unwrap();
        for c in &counts {
            assert_eq!(c.count, point_contribution(model, c.k), "{model:?} {c:?}");
            assert!(c.separated, "{model:?} {c:?}");
        }
    }
}

#[test]
fn orbit_contributions_match_grid_counts() {
    for lam in [1i8, -1] {
        let model = LocalOrbitModel {
            weight: 1,
            transverse: point(vec![], vec![], vec![lam]),
        };
        let counts = orbit_oracle_counts(&model, 8.0, 64.0, 4).unwrap();
        for c in &counts {
            assert_eq!(c.count, orbit_contribution(&model, c.k), "{c:?}");
            assert!(c.separated, "{c:?}");
        }
    }
}

#[test]
fn torus_window_around_saddle_orbit() {
    let counts = torus_window_counts(std::f64::consts::FRAC_PI_2, 1.0, 64.0, 3).unwrap();
    let got: Vec<usize> = counts.iter().map(|c| c.count).collect();
    assert_eq!(got, vec![0, 1, 0, 0]);
}

#[test]
fn unsupported_oracle_is_a_config_error() {
    let model = point(vec![1, 1], vec![1, 1], vec![]);
    assert!(point_oracle_counts(&model, 64.0, 2).is_err());
}
