//! Morse data of catalog models and the end-to-end inequality checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendMatrices, EndKind, Geometry, InvariantFunction};
use crate::error::{Error, Result};
use crate::spectral::{self, SolverOptions, SpectrumReport, TraceSpec};

pub const SCAN_SAMPLES: usize = 4096;
pub const ROOT_TOLERANCE: f64 = 1e-12;
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
pub const THEOREM2_TOLERANCE: f64 = 1e-8;
pub const LOCALIZATION_TOLERANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    FixedPoint,
    Orbit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalLevel {
    pub kind: LevelKind,
    pub theta: f64,
    /// Morse index in the directions normal to the level.
    pub index: usize,
    pub weight: u32,
    pub hessian: Vec<f64>,
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    while hi - lo > ROOT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `g` on `[lo, hi]` by a uniform sign-change scan plus bisection.
/// With `periodic`, samples are offset by half a step and wrap around.
fn scan_roots(g: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64, periodic: bool) -> Vec<f64> {
    let h = (hi - lo) / SCAN_SAMPLES as f64;
    let xs: Vec<f64> = if periodic {
        (0..=SCAN_SAMPLES).map(|j| lo + h * (j as f64 + 0.5)).collect()
    } else {
        (1..SCAN_SAMPLES).map(|j| lo + h * j as f64).collect()
    };
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            roots.push(bisect(g, a, b));
        }
    }
    // tangential roots: |g| dips to zero without a sign change
    for w in xs.windows(3) {
        let (ga, gb, gc) = (g(w[0]), g(w[1]), g(w[2]));
        if gb.abs() < ga.abs() && gb.abs() <= gc.abs() && ga * gb > 0.0 && gb * gc > 0.0 {
            let x = golden_min(|x| g(x).abs(), w[0], w[2]);
            if g(x).abs() <= TANGENT_TOLERANCE {
                roots.push(x);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    if periodic {
        let span = hi - lo;
        for r in roots.iter_mut() {
            if *r >= hi {
                *r -= span;
            }
        }
        roots.sort_by(f64::total_cmp);
    }
    roots
}

const TANGENT_TOLERANCE: f64 = 1e-10;

fn golden_min(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while b - a > ROOT_TOLERANCE {
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

fn check_hessian(theta: f64, h: f64) -> Result<()> {
    if h.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate { theta, hessian: h });
    }
    Ok(())
}

/// Critical fixed points and orbits of an invariant function, sorted by θ.
pub fn find_critical_levels(geometry: &Geometry, f: &InvariantFunction) -> Result<Vec<CriticalLevel>> {
    let d1 = |x: f64| f.d1(x);
    let mut levels = Vec::new();
    match geometry {
        Geometry::Revolution(p) => {
            let periodic = p.is_periodic();
            for (x, kind) in [(p.theta_start, p.start), (p.theta_end, p.end)] {
                if kind == EndKind::Pole {
                    let h = f.d2(x);
                    check_hessian(x, h)?;
                    levels.push(CriticalLevel {
                        kind: LevelKind::FixedPoint,
                        theta: x,
                        index: if h < 0.0 { 2 } else { 0 },
                        weight: p.weight,
                        hessian: vec![h, h],
                    });
                }
            }
            for x in scan_roots(d1, p.theta_start, p.theta_end, periodic) {
                let h = f.d2(x);
                check_hessian(x, h)?;
                levels.push(CriticalLevel {
                    kind: LevelKind::Orbit,
                    theta: x,
                    index: usize::from(h < 0.0),
                    weight: p.weight,
                    hessian: vec![h],
                });
            }
        }
        Geometry::Circle { weight } => levels.push(CriticalLevel {
            kind: LevelKind::Orbit,
            theta: 0.0,
            index: 0,
            weight: *weight,
            hessian: Vec::new(),
        }),
        Geometry::Line(p) => {
            let periodic = p.start == EndKind::Periodic;
            for x in scan_roots(d1, p.x_start, p.x_end, periodic) {
                let h = f.d2(x);
                check_hessian(x, h)?;
                levels.push(CriticalLevel {
                    kind: LevelKind::FixedPoint,
                    theta: x,
                    index: usize::from(h < 0.0),
                    weight: 0,
                    hessian: vec![h],
                });
            }
        }
    }
    levels.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(levels)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseCounts {
    pub c: Vec<usize>,
    pub d: Vec<usize>,
    pub tilde_c: Vec<usize>,
}

/// `c_k` (fixed points), `d_k` (orbits) and `c̃_k = d_k + c_k + c_{k-2} + …`.
pub fn morse_counts(levels: &[CriticalLevel], kmax: usize) -> MorseCounts {
    let mut c = vec![0; kmax + 1];
    let mut d = vec![0; kmax + 1];
    for l in levels {
        if l.index <= kmax {
            match l.kind {
                LevelKind::FixedPoint => c[l.index] += 1,
                LevelKind::Orbit => d[l.index] += 1,
            }
        }
    }
    let tilde_c = (0..=kmax)
        .map(|k| d[k] + (0..=k / 2).map(|i| c[k - 2 * i]).sum::<usize>())
        .collect();
    MorseCounts { c, d, tilde_c }
}

/// Alternating partial sums `Σ_{j≤k} (-1)^{k-j} x_j`.
pub fn alternating_sums<T: Copy + Into<f64>>(x: &[T]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for &v in x {
        acc = v.into() - acc;
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    pub n: usize,
    /// `slack_{n+2} == slack_n`, if both are available.
    pub period_two_from_n: Option<bool>,
    /// `slack_{n+1} == slack_n`, the literal reading of the stabilization claim.
    pub equal_from_n: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub slack: Vec<i64>,
    pub pass: bool,
    pub stabilization: Stabilization,
}

pub fn verify_theorem1(counts: &MorseCounts, betti: &[usize], n: usize) -> Theorem1Report {
    let len = counts.tilde_c.len().min(betti.len());
    let mut slack = Vec::with_capacity(len);
    let mut acc = 0_i64;
    for (&c, &b) in counts.tilde_c.iter().zip(betti) {
        acc = (c as i64 - b as i64) - acc;
        slack.push(acc);
    }
    let at = |k: usize| slack.get(k).copied();
    let stabilization = Stabilization {
        n,
        period_two_from_n: at(n + 2).zip(at(n)).map(|(a, b)| a == b),
        equal_from_n: at(n + 1).zip(at(n)).map(|(a, b)| a == b),
    };
    Theorem1Report {
        pass: slack.iter().all(|&s| s >= 0),
        slack,
        stabilization,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Point {
    pub s: f64,
    pub mu: Vec<f64>,
    pub slack: Vec<f64>,
    pub pass: bool,
}

/// `μ^k_{eq,s} = tr φ(Δ_eq,s^k)` for `k = 0..=kmax` from full spectra.
pub fn mu_values(backend: &BackendMatrices, s: f64, kmax: usize, trace: &TraceSpec) -> Result<Vec<f64>> {
    trace.validate()?;
    (0..=kmax)
        .into_par_iter()
        .map(|k| Ok(spectral::trace_values(&spectral::full_spectrum(backend, k, s)?, trace)))
        .collect()
}

/// `slack_k(s) = Σ (-1)^{k-j} (μ^j_{eq,s} − β^j) ≥ −1e-8` at each probed `s`.
pub fn verify_theorem2(
    backend: &BackendMatrices,
    s_list: &[f64],
    kmax: usize,
    betti: &[usize],
    trace: &TraceSpec,
) -> Result<Vec<Theorem2Point>> {
    if betti.len() <= kmax {
        return Err(Error::Config(format!(
            "Betti numbers up to degree {kmax} are required"
        )));
    }
    s_list
        .iter()
        .map(|&s| {
            let mu = mu_values(backend, s, kmax, trace)?;
            let diff: Vec<f64> = mu
                .iter()
                .zip(betti)
                .map(|(m, &b)| m - b as f64)
                .collect();
            let slack = alternating_sums(&diff);
            Ok(Theorem2Point {
                s,
                pass: slack.iter().all(|&v| v >= -THEOREM2_TOLERANCE),
                mu,
                slack,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub s: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Largest `|slack_thm2(s) − slack_thm1|` over the degrees of `point`.
pub fn localization(point: &Theorem2Point, thm1: &Theorem1Report) -> Localization {
    let max_deviation = point
        .slack
        .iter()
        .zip(&thm1.slack)
        .map(|(a, &b)| (a - b as f64).abs())
        .fold(0.0, f64::max);
    Localization {
        s: point.s,
        max_deviation,
        pass: max_deviation <= LOCALIZATION_TOLERANCE,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerReport {
    /// `β^n − β^{n+1}`
    pub lhs: i64,
    /// `(-1)^n χ(M)` with χ from the fixed-point tally.
    pub rhs: i64,
    pub chi: i64,
    pub pass: bool,
    /// `(c_{n-1} + c_{n-3} + …) − (c_n + c_{n-2} + …)`
    pub count_lhs: i64,
    /// `(-1)^{n-1} χ(M)`
    pub count_rhs: i64,
    pub count_pass: bool,
}

pub fn euler_characteristic(levels: &[CriticalLevel]) -> i64 {
    levels
        .iter()
        .filter(|l| l.kind == LevelKind::FixedPoint)
        .map(|l| if l.index % 2 == 0 { 1 } else { -1 })
        .sum()
}

fn sign(p: usize) -> i64 {
    if p.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn euler_checks(n: usize, levels: &[CriticalLevel], counts: &MorseCounts, betti: &[usize]) -> Result<EulerReport> {
    if betti.len() < n + 2 {
        return Err(Error::Config(format!(
            "Betti numbers up to degree {} are required",
            n + 1
        )));
    }
    let chi = euler_characteristic(levels);
    let lhs = betti[n] as i64 - betti[n + 1] as i64;
    let rhs = sign(n) * chi;
    let c = |k: usize| counts.c.get(k).copied().unwrap_or(0) as i64;
    let odd_side: i64 = (0..=n).filter(|j| (n - j) % 2 == 1).map(c).sum();
    let even_side: i64 = (0..=n).filter(|j| (n - j).is_multiple_of(2)).map(c).sum();
    let count_lhs = odd_side - even_side;
    let count_rhs = sign(n + 1) * chi;
    Ok(EulerReport {
        lhs,
        rhs,
        chi,
        pass: lhs == rhs,
        count_lhs,
        count_rhs,
        count_pass: count_lhs == count_rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Periodicity {
    pub k: usize,
    pub max_relative_difference: f64,
    pub pass: bool,
}

/// Compare the full spectra of `Δ_eq^k` and `Δ_eq^{k+2}`.
pub fn periodicity(backend: &BackendMatrices, k: usize, opts: &SolverOptions) -> Result<Periodicity> {
    let a = spectral::spectrum(backend, k, 0.0, None, opts)?;
    let b = spectral::spectrum(backend, k + 2, 0.0, None, opts)?;
    Ok(compare_spectra(k, &a, &b, 1e-10))
}

pub fn compare_spectra(k: usize, a: &SpectrumReport, b: &SpectrumReport, tol: f64) -> Periodicity {
    if a.eigenvalues.len() != b.eigenvalues.len() {
        return Periodicity {
            k,
            max_relative_difference: f64::INFINITY,
            pass: false,
        };
    }
    let scale = a
        .eigenvalues
        .iter()
        .chain(&b.eigenvalues)
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let d = a
        .eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max);
    Periodicity {
        k,
        max_relative_difference: d,
        pass: d <= tol,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    /// Highest degree for the trace inequalities (Morse counts and Betti numbers extend to n+3).
    pub kmax: usize,
    pub betti_probes: Vec<f64>,
    pub s_list: Vec<f64>,
    pub trace: TraceSpec,
    pub solver: SolverOptions,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            kmax: 3,
            betti_probes: spectral::DEFAULT_PROBES.to_vec(),
            s_list: vec![0.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            trace: TraceSpec::default(),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerSummary {
    pub lhs: i64,
    pub rhs: i64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: String,
    #[serde(rename = "N")]
    pub n_grid: usize,
    pub s_probes: Vec<f64>,
    pub betti: Vec<usize>,
    pub c: Vec<usize>,
    pub d: Vec<usize>,
    pub tilde_c: Vec<usize>,
    pub slack_thm1: Vec<i64>,
    pub slack_thm2: Vec<Theorem2Point>,
    pub euler: EulerSummary,
    pub status: String,
    pub levels: Vec<CriticalLevel>,
    pub stabilization: Stabilization,
    pub euler_counts: EulerSummary,
    pub localization: Option<Localization>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status == "PASS"
    }
}

fn grid_size(geometry: &Geometry) -> usize {
    match geometry {
        Geometry::Revolution(p) => p.grid,
        Geometry::Line(p) => p.grid,
        Geometry::Circle { .. } => 0,
    }
}

/// Full verification run: critical data, Betti numbers, both theorems and
/// the Euler-characteristic identities.
pub fn verify_case(
    case: &str,
    geometry: &Geometry,
    f: &InvariantFunction,
    settings: &VerifySettings,
) -> Result<VerificationReport> {
    settings.trace.validate()?;
    let backend = crate::backend::build_backend(geometry, f)?;
    crate::backend::validate_backend(&backend)?;
    let n = backend.n;
    let levels = find_critical_levels(geometry, f)?;
    let kb = settings.kmax.max(n + 3);
    let betti = spectral::betti_numbers(&backend, kb, &settings.betti_probes, &settings.solver)?;
    let counts = morse_counts(&levels, kb);
    let thm1 = verify_theorem1(&counts, &betti.betti, n);
    let thm2 = verify_theorem2(
        &backend,
        &settings.s_list,
        settings.kmax,
        &betti.betti,
        &settings.trace,
    )?;
    let euler = euler_checks(n, &levels, &counts, &betti.betti)?;
    let localization = thm2
        .iter()
        .max_by(|a, b| a.s.total_cmp(&b.s))
        .filter(|p| p.s > 0.0)
        .map(|p| localization(p, &thm1));
    let pass = thm1.pass && thm2.iter().all(|p| p.pass) && euler.pass && euler.count_pass;
    Ok(VerificationReport {
        case: case.to_string(),
        n_grid: grid_size(geometry),
        s_probes: settings.s_list.clone(),
        betti: betti.betti,
        c: counts.c,
        d: counts.d,
        tilde_c: counts.tilde_c,
        slack_thm1: thm1.slack,
        slack_thm2: thm2,
        euler: EulerSummary {
            lhs: euler.lhs,
            rhs: euler.rhs,
            pass: euler.pass,
        },
        status: if pass { "PASS" } else { "FAIL" }.to_string(),
        levels,
        stabilization: thm1.stabilization,
        euler_counts: EulerSummary {
            lhs: euler.count_lhs,
            rhs: euler.count_rhs,
            pass: euler.count_pass,
        },
        localization,
    })
}
