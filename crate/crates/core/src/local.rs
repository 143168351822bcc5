//! Flat local models at critical points and orbits, with grid oracles.
//!
//! Closed forms: the harmonic oscillator `-d²/dx² + a²x²`, the 2×2 block
//! coupling `t` and the normalised area form `η`, and the two branch
//! spectra of the rotation-plane model. Grid oracles assemble the same
//! operators with the revolution backend on truncated flat models (disk,
//! cylinder, segment) and count near-zero eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::backend::{
    build_backend, EndKind, Geometry, InvariantFunction, LineProfile, RevolutionProfile,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::full_spectrum;

/// `{a(1+2p) : p = 0..count}`.
pub fn ho_spectrum(a: f64, count: usize) -> Vec<f64> {
    (0..count).map(|p| a * (1.0 + 2.0 * p as f64)).collect()
}

/// Lowest eigenvalues of the oscillator by second-order differences on
/// `[-R, R]`, `R = √(40/a)`, with `cells` intervals and Dirichlet ends.
pub fn ho_grid_spectrum(a: f64, count: usize, cells: usize) -> Vec<f64> {
    let r = (40.0 / a).sqrt();
    let h = 2.0 * r / cells as f64;
    let n = cells - 1;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let x = -r + h * (i + 1) as f64;
        m[(i, i)] = 2.0 / (h * h) + a * a * x * x;
        if i + 1 < n {
            m[(i, i + 1)] = -1.0 / (h * h);
            m[(i + 1, i)] = -1.0 / (h * h);
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(count);
    ev
}

/// Normalised oscillator ground state `W_a(x) = (a/π)^{1/4} e^{-a x²/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub a: f64,
}

pub fn ho_ground(a: f64) -> GroundState {
    GroundState { a }
}

impl GroundState {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a / std::f64::consts::PI).powf(0.25) * (-0.5 * self.a * x * x).exp()
    }

    fn composite(&self, lo: f64, hi: f64, panels: usize, g: impl Fn(f64) -> f64) -> f64 {
        let h = (hi - lo) / panels as f64;
        (0..panels)
            .map(|i| {
                let x0 = lo + h * i as f64;
                linalg::gauss4(x0, x0 + h, &g)
            })
            .sum()
    }

    /// `∫ W_a²` over `±12/√a`, where the neglected tail is below 1e-60.
    pub fn norm_squared(&self) -> f64 {
        let r = 12.0 / self.a.sqrt();
        self.composite(-r, r, 2000, |x| self.eval(x).powi(2))
    }

    /// `⟨β W_a, W_a⟩` for the bump `β(x) = e^{1 - 1/(1-x²)}` on `(-1, 1)`.
    pub fn bump_pairing(&self) -> f64 {
        self.composite(-1.0, 1.0, 4000, |x| bump(x) * self.eval(x).powi(2))
    }

    /// Max interior error of `(-d²/dx² + a²x²) W_a − a W_a` on a grid,
    /// relative to `max |a W_a|`.
    pub fn operator_residual(&self, cells: usize) -> f64 {
        let a = self.a;
        let r = (40.0 / a).sqrt();
        let h = 2.0 * r / cells as f64;
        let mut worst = 0.0_f64;
        let peak = a * self.eval(0.0);
        for i in 1..cells {
            let x = -r + h * i as f64;
            let lap = -(self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h);
            let res = lap + a * a * x * x * self.eval(x) - a * self.eval(x);
            worst = worst.max(res.abs());
        }
        worst / peak
    }
}

/// Smooth bump with `β(0) = 1`, supported in `[-1, 1]`.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: [f64; 2],
}

/// Eigen-decomposition of `[[-2εs, 2m], [2m, 2εs]]` on the basis `(t, η)`,
/// ascending: `-2√(s²+m²)` then `+2√(s²+m²)`.
pub fn block_matrix_eigen(s: f64, m: f64, eps: i8) -> [EigenPair; 2] {
    let e = f64::from(eps.signum());
    let r = s.hypot(m);
    let pair = |sign: f64| {
        let lam = 2.0 * sign * r;
        // (m, εs ± r) from the first row, (±r − εs, m) from the second
        let a = [m, e * s + sign * r];
        let b = [sign * r - e * s, m];
        let na = a[0].hypot(a[1]);
        let nb = b[0].hypot(b[1]);
        let (v, n) = if na >= nb { (a, na) } else { (b, nb) };
        EigenPair {
            value: lam,
            vector: [v[0] / n, v[1] / n],
        }
    };
    [pair(-1.0), pair(1.0)]
}

pub fn block_matrix(s: f64, m: f64, eps: i8) -> [[f64; 2]; 2] {
    let e = f64::from(eps.signum());
    [[-2.0 * e * s, 2.0 * m], [2.0 * m, 2.0 * e * s]]
}

/// Max of `‖Mv − λv‖` over both pairs.
pub fn block_residual(s: f64, m: f64, eps: i8) -> f64 {
    let mat = block_matrix(s, m, eps);
    block_matrix_eigen(s, m, eps)
        .iter()
        .map(|p| {
            let v = p.vector;
            let r0 = mat[0][0] * v[0] + mat[0][1] * v[1] - p.value * v[0];
            let r1 = mat[1][0] * v[0] + mat[1][1] * v[1] - p.value * v[1];
            r0.hypot(r1)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSpectrum {
    pub label: String,
    pub eigenvalues: Vec<f64>,
}

/// Branch A (invariant functions) `2s(1+2p) − 2εs` and branch B (the
/// `{t, η}` fibre) `2s'(1+2p) ± 2s'`, `s' = √(s²+m²)`, lowest `count` each.
pub fn ab_branch_spectra(s: f64, m: f64, eps: i8, count: usize) -> (BranchSpectrum, BranchSpectrum) {
    let e = f64::from(eps.signum());
    let a = (0..count)
        .map(|p| 2.0 * s * (1.0 + 2.0 * p as f64) - 2.0 * e * s)
        .collect();
    let sp = s.hypot(m);
    let mut b: Vec<f64> = (0..count)
        .flat_map(|p| {
            let base = 2.0 * sp * (1.0 + 2.0 * p as f64);
            [base - 2.0 * sp, base + 2.0 * sp]
        })
        .collect();
    b.sort_by(f64::total_cmp);
    b.truncate(count);
    (
        BranchSpectrum {
            label: "A".to_string(),
            eigenvalues: a,
        },
        BranchSpectrum {
            label: "B".to_string(),
            eigenvalues: b,
        },
    )
}

/// Disk of radius `R` around a fixed point of weight `m` with
/// `f = ε r²/2`; natural ends for minima, pinned ends for maxima.
fn disk_backend(s: f64, m: u32, eps: i8, cells: usize) -> Result<crate::backend::BackendMatrices> {
    let radius = (60.0 / s).sqrt().max(0.5);
    let outer = if eps > 0 { EndKind::Free } else { EndKind::Clamped };
    build_backend(
        &Geometry::Revolution(RevolutionProfile::disk(radius, outer, m, cells)),
        &InvariantFunction::Quadratic {
            center: 0.0,
            curvature: f64::from(eps.signum()),
        },
    )
}

/// Both branches from the assembled flat disk operator: degree 0 holds the
/// invariant functions, degree 2 the coupled `{t⊗u, w dθ∧dψ}` system.
pub fn ab_branch_grid(s: f64, m: u32, eps: i8, count: usize, cells: usize) -> Result<(BranchSpectrum, BranchSpectrum)> {
    check_eps(eps)?;
    if !(s > 0.0) || m == 0 {
        return Err(Error::Config("branch oracle needs s > 0 and m ≥ 1".to_string()));
    }
    let b = disk_backend(s, m, eps, cells)?;
    let mut a = full_spectrum(&b, 0, s)?;
    let mut c = full_spectrum(&b, 2, s)?;
    a.truncate(count);
    c.truncate(count);
    Ok((
        BranchSpectrum {
            label: "A".to_string(),
            eigenvalues: a,
        },
        BranchSpectrum {
            label: "B".to_string(),
            eigenvalues: c,
        },
    ))
}

/// Relative error of a grid eigenvalue; zero targets are measured against `2s`.
pub fn branch_relative_error(expected: f64, got: f64, s: f64) -> f64 {
    (got - expected).abs() / expected.abs().max(2.0 * s)
}

fn check_eps(eps: i8) -> Result<()> {
    if eps != 1 && eps != -1 {
        return Err(Error::Config(format!("sign {eps} must be ±1")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPointModel {
    pub n: usize,
    pub weights: Vec<u32>,
    pub eps: Vec<i8>,
    pub lambdas: Vec<i8>,
}

impl LocalPointModel {
    pub fn q(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.len() != self.weights.len() {
            return Err(Error::Config("one sign per rotation plane".to_string()));
        }
        if 2 * self.q() + self.lambdas.len() != self.n {
            return Err(Error::Config(format!(
                "2q + #λ = {} does not match n = {}",
                2 * self.q() + self.lambdas.len(),
                self.n
            )));
        }
        if self.weights.contains(&0) {
            return Err(Error::Config("weights must be positive".to_string()));
        }
        for &e in self.eps.iter().chain(&self.lambdas) {
            check_eps(e)?;
        }
        Ok(())
    }

    /// `2·#{ε_i = −1} + #{λ_ℓ = −1}`.
    pub fn index(&self) -> usize {
        2 * self.eps.iter().filter(|&&e| e < 0).count()
            + self.lambdas.iter().filter(|&&l| l < 0).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalOrbitModel {
    pub weight: u32,
    pub transverse: LocalPointModel,
}

impl LocalOrbitModel {
    pub fn index(&self) -> usize {
        self.transverse.index()
    }
}

/// 1 iff `index ≤ k` and `k − index` is even.
pub fn point_contribution(model: &LocalPointModel, k: usize) -> usize {
    let i = model.index();
    usize::from(i <= k && (k - i).is_multiple_of(2))
}

/// 1 iff the transversal index equals `k`.
pub fn orbit_contribution(model: &LocalOrbitModel, k: usize) -> usize {
    usize::from(model.index() == k)
}

/// `Σ_p point_contribution + Σ_o orbit_contribution = c̃_k`.
pub fn asymptotic_counts(points: &[LocalPointModel], orbits: &[LocalOrbitModel], k: usize) -> usize {
    points.iter().map(|p| point_contribution(p, k)).sum::<usize>()
        + orbits.iter().map(|o| orbit_contribution(o, k)).sum::<usize>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCount {
    pub k: usize,
    /// Eigenvalues below `s/10`.
    pub count: usize,
    /// First eigenvalue at or above `s/10`.
    pub next: Option<f64>,
    /// Whether `next ≥ s/2`.
    pub separated: bool,
}

fn count_near_zero(b: &crate::backend::BackendMatrices, s: f64, kmax: usize) -> Result<Vec<OracleCount>> {
    (0..=kmax)
        .map(|k| {
            let ev = full_spectrum(b, k, s)?;
            let count = ev.iter().filter(|&&l| l < s / 10.0).count();
            let next = ev.get(count).copied();
            Ok(OracleCount {
                k,
                count,
                next,
                separated: next.is_none_or(|v| v >= s / 2.0),
            })
        })
        .collect()
}

pub const ORACLE_CELLS: usize = 256;

/// Near-zero eigenvalue counts of the discretised flat point model
/// (`q = 1, n = 2`: disk; `q = 0, n = 1`: segment with trivial action).
pub fn point_oracle_counts(model: &LocalPointModel, s: f64, kmax: usize) -> Result<Vec<OracleCount>> {
    model.validate()?;
    let b = match (model.q(), model.n) {
        (1, 2) => disk_backend(s, model.weights[0], model.eps[0], ORACLE_CELLS)?,
        (0, 1) => {
            let lam = model.lambdas[0];
            let half = (60.0 / s).sqrt().max(0.5);
            let end = if lam > 0 { EndKind::Free } else { EndKind::Clamped };
            build_backend(
                &Geometry::Line(LineProfile {
                    x_start: -half,
                    x_end: half,
                    start: end,
                    end,
                    grid: ORACLE_CELLS,
                }),
                &InvariantFunction::Quadratic {
                    center: 0.0,
                    curvature: f64::from(lam),
                },
            )?
        }
        _ => {
            return Err(Error::Config(
                "grid oracle is available for q = 1, n = 2 and q = 0, n = 1".to_string(),
            ))
        }
    };
    count_near_zero(&b, s, kmax)
}

/// Near-zero counts for `S¹_ρ × [-R, R]` with `f = λ x²/2` (one transverse
/// direction). The orbit radius `ρ` is explicit: the paired states of
/// energy `m²ρ²` do not scale with `s`.
pub fn orbit_oracle_counts(model: &LocalOrbitModel, radius: f64, s: f64, kmax: usize) -> Result<Vec<OracleCount>> {
    model.transverse.validate()?;
    if model.transverse.n != 1 || model.transverse.q() != 0 {
        return Err(Error::Config(
            "orbit grid oracle supports one transverse direction".to_string(),
        ));
    }
    let lam = model.transverse.lambdas[0];
    let half = (60.0 / s).sqrt().max(0.5);
    let ends = if lam > 0 { EndKind::Free } else { EndKind::Clamped };
    let b = build_backend(
        &Geometry::Revolution(RevolutionProfile::cylinder(
            radius,
            half,
            ends,
            model.weight,
            ORACLE_CELLS,
        )),
        &InvariantFunction::Quadratic {
            center: 0.0,
            curvature: f64::from(lam),
        },
    )?;
    count_near_zero(&b, s, kmax)
}

/// The torus of revolution cut to a window around a critical orbit of
/// `f = sin(θ/r)`; ends natural at minima, pinned at maxima.
pub fn torus_window_counts(theta0: f64, half_width: f64, s: f64, kmax: usize) -> Result<Vec<OracleCount>> {
    let f = InvariantFunction::Trig {
        terms: vec![crate::backend::TrigTerm {
            cos: 0.0,
            sin: 1.0,
            freq: 1.0,
        }],
    };
    let ends = if f.d2(theta0) > 0.0 {
        EndKind::Free
    } else {
        EndKind::Clamped
    };
    let profile = RevolutionProfile {
        theta_start: theta0 - half_width,
        theta_end: theta0 + half_width,
        start: ends,
        end: ends,
        radius: crate::backend::Radius::Torus {
            tube: 1.0,
            center: 3.0,
        },
        weight: 1,
        grid: ORACLE_CELLS,
    };
    let b = build_backend(&Geometry::Revolution(profile), &f)?;
    count_near_zero(&b, s, kmax)
}

/// `Σ λ_i Z_i` on the `2ⁿ`-dimensional exterior algebra, built from
/// explicit `dx_i∧` and `dx_i⌟` matrices on the monomial basis (bitmasks).
pub fn exterior_fiber_hessian(lambdas: &[f64]) -> DMatrix<f64> {
    let n = lambdas.len();
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for (i, &l) in lambdas.iter().enumerate() {
        let mut wedge = DMatrix::zeros(dim, dim);
        for set in 0..dim {
            if set & (1 << i) == 0 {
                let sign = if (set & ((1 << i) - 1)).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                wedge[(set | (1 << i), set)] = sign;
            }
        }
        let contract = wedge.transpose();
        let z = &wedge * &contract - &contract * &wedge;
        h += z * l;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_closed_form() {
        assert_eq!(ho_spectrum(1.0, 3), vec![1.0, 3.0, 5.0]);
        assert_eq!(ho_spectrum(4.0, 2), vec![4.0, 12.0]);
    }

    #[test]
    fn block_eigen_values() {
        let p = block_matrix_eigen(3.0, 4.0, 1);
        assert!((p[0].value + 10.0).abs() < 1e-14);
        assert!((p[1].value - 10.0).abs() < 1e-14);
        assert!(block_residual(3.0, 4.0, 1) < 1e-12);
    }

    #[test]
    fn block_eigen_diagonal_limit() {
        let p = block_matrix_eigen(2.0, 0.0, 1);
        assert_eq!(p[0].value, -4.0);
        assert_eq!(p[0].vector.map(f64::abs), [1.0, 0.0]);
        assert_eq!(p[1].vector.map(f64::abs), [0.0, 1.0]);
    }

    #[test]
    fn branch_formulas() {
        let (a, _) = ab_branch_spectra(5.0, 1e-12, 1, 2);
        assert_eq!(a.eigenvalues, vec![0.0, 20.0]);
        let (a, _) = ab_branch_spectra(5.0, 1.0, -1, 1);
        assert_eq!(a.eigenvalues, vec![20.0]);
        let (_, b) = ab_branch_spectra(3.0, 4.0, 1, 3);
        assert_eq!(b.eigenvalues, vec![0.0, 20.0, 20.0]);
    }

    #[test]
    fn contributions() {
        let idx2 = LocalPointModel {
            n: 2,
            weights: vec![1],
            eps: vec![-1],
            lambdas: vec![],
        };
        let got: Vec<usize> = (0..5).map(|k| point_contribution(&idx2, k)).collect();
        assert_eq!(got, vec![0, 0, 1, 0, 1]);
        let idx0 = LocalPointModel {
            eps: vec![1],
            ..idx2.clone()
        };
        assert_eq!(point_contribution(&idx0, 0), 1);
        let orbit = LocalOrbitModel {
            weight: 1,
            transverse: LocalPointModel {
                n: 1,
                weights: vec![],
                eps: vec![],
                lambdas: vec![-1],
            },
        };
        assert_eq!(orbit_contribution(&orbit, 1), 1);
        assert_eq!(orbit_contribution(&orbit, 3), 0);
        assert_eq!(asymptotic_counts(&[idx0, idx2], &[], 4), 2);
    }

    #[test]
    fn z_sign_rule_on_exterior_fiber() {
        let lambdas = [0.7, -1.3, 2.0];
        let h = exterior_fiber_hessian(&lambdas);
        for set in 0..8usize {
            let expect: f64 = lambdas
                .iter()
                .enumerate()
                .map(|(i, l)| if set & (1 << i) != 0 { *l } else { -*l })
                .sum();
            for col in 0..8 {
                let v = h[(set, col)];
                if col == set {
                    assert!((v - expect).abs() < 1e-14);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn model_validation() {
        let bad = LocalPointModel {
            n: 3,
            weights: vec![1],
            eps: vec![1],
            lambdas: vec![],
        };
        assert!(bad.validate().is_err());
    }
}
