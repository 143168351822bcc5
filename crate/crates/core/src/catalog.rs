//! Named model cases: a geometry plus an invariant Morse function.

use serde::{Deserialize, Serialize};

use crate::backend::{Geometry, InvariantFunction, RevolutionProfile, TrigTerm};
use crate::error::{Error, Result};
use crate::pipeline::find_critical_levels;
use crate::spectral::DEFAULT_PROBES;

pub const CASES: [&str; 4] = ["sphere_height", "sphere_bumpy", "torus_height", "circle_trivial"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseParams {
    pub grid: usize,
    pub weight: u32,
    /// Amplitude of the `cos 3θ` bump on the sphere.
    pub bump: f64,
    pub sphere_radius: f64,
    pub tube_radius: f64,
    pub center_radius: f64,
}

impl Default for CaseParams {
    fn default() -> Self {
        Self {
            grid: 256,
            weight: 1,
            bump: 0.6,
            sphere_radius: 1.0,
            tube_radius: 1.0,
            center_radius: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub expected_betti: Vec<usize>,
    pub expected_tilde_c: Vec<usize>,
    pub euler_characteristic: i64,
    /// Deformation parameters at which `dim ker Δ_eq,s^k` is compared.
    pub betti_probes: Vec<f64>,
}

pub fn entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "sphere_height",
            description: "round S² rotated about its axis, f = cos θ; fixed points of index 2 and 0",
            expected_betti: vec![1, 0, 2, 0, 2, 0],
            expected_tilde_c: vec![1, 0, 2, 0, 2, 0],
            euler_characteristic: 2,
            betti_probes: DEFAULT_PROBES.to_vec(),
        },
        CatalogEntry {
            name: "sphere_bumpy",
            description: "round S², f = cos θ + c cos 3θ; two fixed points plus critical latitudes of index 0 and 1 (c > 1/3)",
            expected_betti: vec![1, 0, 2, 0, 2, 0],
            expected_tilde_c: vec![2, 1, 2, 0, 2, 0],
            euler_characteristic: 2,
            // at s = 16 the orbit tunnelling pair sits inside the kernel window
            betti_probes: vec![0.0, 4.0, 8.0],
        },
        CatalogEntry {
            name: "torus_height",
            description: "torus of revolution (r = 1, R = 3), free rotation, f = sin θ on the tube; orbits of index 1 and 0",
            expected_betti: vec![1, 1, 0, 0, 0],
            expected_tilde_c: vec![1, 1, 0, 0, 0],
            euler_characteristic: 0,
            betti_probes: DEFAULT_PROBES.to_vec(),
        },
        CatalogEntry {
            name: "circle_trivial",
            description: "the circle acting on itself; a single critical orbit of index 0",
            expected_betti: vec![1, 0, 0, 0, 0],
            expected_tilde_c: vec![1, 0, 0, 0, 0],
            euler_characteristic: 0,
            betti_probes: DEFAULT_PROBES.to_vec(),
        },
    ]
}

pub fn entry(name: &str) -> Result<CatalogEntry> {
    entries()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownCase(name.to_string()))
}

fn validate(params: &CaseParams) -> Result<()> {
    if params.weight == 0 {
        return Err(Error::Config("weight m must be a positive integer".to_string()));
    }
    if params.grid < 16 {
        return Err(Error::Config(format!(
            "grid N = {} is below the minimum of 16",
            params.grid
        )));
    }
    for (name, v) in [
        ("sphere_radius", params.sphere_radius),
        ("tube_radius", params.tube_radius),
        ("center_radius", params.center_radius),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("{name} must be positive")));
        }
    }
    if params.center_radius <= params.tube_radius {
        return Err(Error::Config(
            "torus needs center_radius > tube_radius".to_string(),
        ));
    }
    if !params.bump.is_finite() {
        return Err(Error::Config("bump must be finite".to_string()));
    }
    Ok(())
}

/// Geometry and invariant function of a named case, checked for Morse
/// non-degeneracy.
pub fn catalog(name: &str, params: &CaseParams) -> Result<(Geometry, InvariantFunction)> {
    validate(params)?;
    let (geometry, f) = match name {
        "sphere_height" => {
            let r = params.sphere_radius;
            (
                Geometry::Revolution(RevolutionProfile::sphere(r, params.weight, params.grid)),
                InvariantFunction::Trig {
                    terms: vec![InvariantFunction::cos(1.0 / r, 1.0)],
                },
            )
        }
        "sphere_bumpy" => {
            let r = params.sphere_radius;
            (
                Geometry::Revolution(RevolutionProfile::sphere(r, params.weight, params.grid)),
                InvariantFunction::Trig {
                    terms: vec![
                        InvariantFunction::cos(1.0 / r, 1.0),
                        InvariantFunction::cos(3.0 / r, params.bump),
                    ],
                },
            )
        }
        "torus_height" => {
            let t = params.tube_radius;
            (
                Geometry::Revolution(RevolutionProfile::torus(
                    t,
                    params.center_radius,
                    params.weight,
                    params.grid,
                )),
                InvariantFunction::Trig {
                    terms: vec![TrigTerm {
                        cos: 0.0,
                        sin: 1.0,
                        freq: 1.0 / t,
                    }],
                },
            )
        }
        "circle_trivial" => (
            Geometry::Circle {
                weight: params.weight,
            },
            InvariantFunction::Constant { value: 0.0 },
        ),
        other => return Err(Error::UnknownCase(other.to_string())),
    };
    find_critical_levels(&geometry, &f)?;
    Ok((geometry, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{morse_counts, LevelKind};

    #[test]
    fn every_case_builds() {
        for name in CASES {
            catalog(name, &CaseParams::default()).unwrap();
        }
    }

    #[test]
    fn unknown_case() {
        assert!(matches!(
            catalog("klein_bottle", &CaseParams::default()),
            Err(Error::UnknownCase(_))
        ));
    }

    #[test]
    fn bumpy_levels_match_brute_force_signs() {
        let (g, f) = catalog("sphere_bumpy", &CaseParams::default()).unwrap();
        let lv = find_critical_levels(&g, &f).unwrap();
        let orbits: Vec<_> = lv.iter().filter(|l| l.kind == LevelKind::Orbit).collect();
        assert_eq!(lv.len(), 4);
        assert_eq!(orbits.len(), 2);
        // roots of f' at cos θ = ±1/3
        assert!((orbits[0].theta.cos() - 1.0 / 3.0).abs() < 1e-10);
        assert!((orbits[1].theta.cos() + 1.0 / 3.0).abs() < 1e-10);
        for l in &lv {
            // brute-force second difference of f
            let h = 1e-4;
            let fd = (f.value(l.theta + h) - 2.0 * f.value(l.theta) + f.value(l.theta - h)) / (h * h);
            let expect = if fd < 0.0 {
                if l.kind == LevelKind::FixedPoint { 2 } else { 1 }
            } else {
                0
            };
            assert_eq!(l.index, expect, "{l:?}");
        }
        let counts = morse_counts(&lv, 5);
        assert_eq!(counts.tilde_c, entry("sphere_bumpy").unwrap().expected_tilde_c);
    }

    #[test]
    fn degenerate_bump_is_rejected() {
        let params = CaseParams {
            bump: 1.0 / 3.0,
            ..Default::default()
        };
        assert!(matches!(
            catalog("sphere_bumpy", &params),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn small_grid_is_a_config_error() {
        let params = CaseParams {
            grid: 8,
            ..Default::default()
        };
        assert!(matches!(catalog("sphere_height", &params), Err(Error::Config(_))));
    }
}
