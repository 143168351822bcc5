use std::path::{Path, PathBuf};

use equimorse_core::backend::{build_backend, validate_backend, BackendMatrices};
use equimorse_core::catalog::{catalog as case_geometry, entries, entry, CaseParams};
use equimorse_core::local::{
    ab_branch_grid, ab_branch_spectra, block_matrix_eigen, block_residual, branch_relative_error,
    ho_grid_spectrum, ho_spectrum, orbit_contribution, orbit_oracle_counts, point_contribution,
    point_oracle_counts, EigenPair, LocalOrbitModel, LocalPointModel, OracleCount,
};
use equimorse_core::pipeline::{verify_case, VerificationReport, VerifySettings};
use equimorse_core::spectral::{spectrum as solve, sweep_s};
use serde::Serialize;

use crate::config::{LocalKind, RunConfig};
use crate::output::{csv, emit, json, num};
use crate::CliError;

pub const OSCILLATOR_TOLERANCE: f64 = 1e-3;
pub const BLOCK_TOLERANCE: f64 = 1e-12;
pub const BRANCH_TOLERANCE: f64 = 1e-2;
const OSCILLATOR_CELLS: usize = 600;
const SWEEP_COUNT: usize = 10;

#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    #[serde(flatten)]
    report: &'a T,
    config: &'a RunConfig,
}

fn backend(c: &RunConfig) -> Result<BackendMatrices, CliError> {
    let (g, f) = case_geometry(&c.case, &c.geometry)?;
    let b = build_backend(&g, &f)?;
    validate_backend(&b)?;
    Ok(b)
}

fn join(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn catalog(as_json: bool) -> Result<bool, CliError> {
    #[derive(Serialize)]
    struct Listing {
        defaults: CaseParams,
        cases: Vec<equimorse_core::catalog::CatalogEntry>,
    }
    let listing = Listing {
        defaults: CaseParams::default(),
        cases: entries(),
    };
    if as_json {
        emit(None, &json(&listing)?)?;
        return Ok(true);
    }
    let d = &listing.defaults;
    let mut text = format!(
        "defaults: N={} m={} bump={} sphere_radius={} tube_radius={} center_radius={}\n",
        d.grid, d.weight, d.bump, d.sphere_radius, d.tube_radius, d.center_radius
    );
    for e in &listing.cases {
        text.push_str(&format!(
            "{}\n  {}\n  betti=({}) tilde_c=({}) chi={} probes={:?}\n",
            e.name,
            e.description,
            join(&e.expected_betti),
            join(&e.expected_tilde_c),
            e.euler_characteristic,
            e.betti_probes
        ));
    }
    emit(None, text.as_bytes())?;
    Ok(true)
}

pub fn verify_report(c: &RunConfig) -> Result<VerificationReport, CliError> {
    let (g, f) = case_geometry(&c.case, &c.geometry)?;
    let e = entry(&c.case)?;
    let settings = VerifySettings {
        kmax: c.spectral.kmax.unwrap_or(g.dimension() + 1),
        betti_probes: c.spectral.betti_probes.clone().unwrap_or(e.betti_probes),
        s_list: c.spectral.s_list.clone(),
        trace: c.trace,
        solver: c.solver,
    };
    Ok(verify_case(&c.case, &g, &f, &settings)?)
}

pub fn verify(c: &RunConfig) -> Result<bool, CliError> {
    let report = verify_report(c)?;
    emit(
        c.output.path.as_deref(),
        &json(&WithConfig {
            report: &report,
            config: c,
        })?,
    )?;
    eprintln!("{}: {}", report.case, report.status);
    Ok(report.passed())
}

pub fn spectrum(c: &RunConfig) -> Result<bool, CliError> {
    let b = backend(c)?;
    let report = solve(&b, c.spectral.k, c.spectral.s, c.spectral.count, &c.solver)?;
    if let Some(path) = &c.output.csv {
        let rows: Vec<Vec<String>> = report
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, v)| vec![report.k.to_string(), num(report.s), i.to_string(), num(*v)])
            .collect();
        emit(Some(path), &csv(&["k", "s", "index", "value"], &rows)?)?;
    }
    emit(
        c.output.path.as_deref(),
        &json(&WithConfig {
            report: &report,
            config: c,
        })?,
    )?;
    Ok(true)
}

pub fn sweep(c: &RunConfig) -> Result<bool, CliError> {
    let header = ["record", "k", "s", "index", "value", "gap"];
    let mut rows = Vec::new();
    if !c.spectral.s_list.is_empty() {
        let b = backend(c)?;
        let count = Some(c.spectral.count.unwrap_or(SWEEP_COUNT));
        let r = sweep_s(&b, c.spectral.k, &c.spectral.s_list, count, &c.trace, &c.solver)?;
        for p in &r.points {
            let (k, s) = (p.report.k.to_string(), num(p.report.s));
            let gap = p.report.gap.map(num).unwrap_or_default();
            for (i, v) in p.report.eigenvalues.iter().enumerate() {
                rows.push(vec!["eig".into(), k.clone(), s.clone(), i.to_string(), num(*v), gap.clone()]);
            }
            rows.push(vec!["mu".into(), k, s, String::new(), num(p.mu), gap]);
        }
    }
    emit(c.output.path.as_deref(), &csv(&header, &rows)?)?;
    Ok(true)
}

#[derive(Serialize)]
struct Comparison {
    closed: Vec<f64>,
    grid: Vec<f64>,
    relative_error: Vec<f64>,
    pass: bool,
}

impl Comparison {
    fn new(closed: Vec<f64>, grid: Vec<f64>, tol: f64, err: impl Fn(f64, f64) -> f64) -> Self {
        let relative_error: Vec<f64> = closed.iter().zip(&grid).map(|(&e, &g)| err(e, g)).collect();
        let pass = grid.len() == closed.len() && relative_error.iter().all(|&r| r <= tol);
        Self {
            closed,
            grid,
            relative_error,
            pass,
        }
    }
}

#[derive(Serialize)]
struct PlaneReport {
    weight: u32,
    eps: i8,
    block_pairs: [EigenPair; 2],
    block_residual: f64,
    branch_a: Comparison,
    branch_b: Comparison,
}

#[derive(Serialize)]
struct ContributionRow {
    k: usize,
    expected: usize,
    grid: Option<OracleCount>,
    pass: bool,
}

#[derive(Serialize)]
struct LocalReport {
    kind: LocalKind,
    index: usize,
    s: f64,
    oscillator: Comparison,
    planes: Vec<PlaneReport>,
    contributions: Vec<ContributionRow>,
    /// Why grid counts are missing, when they are.
    grid_note: Option<String>,
    pass: bool,
}

fn local_report(c: &RunConfig) -> Result<LocalReport, CliError> {
    let l = &c.local;
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(l.s) || !positive(l.ho_a) {
        return Err(CliError::Usage("local model needs s > 0 and ho_a > 0".to_string()));
    }
    let a = l.ho_a;
    let oscillator = Comparison::new(
        ho_spectrum(a, 5),
        ho_grid_spectrum(a, 5, OSCILLATOR_CELLS),
        OSCILLATOR_TOLERANCE,
        |e, g| (g - e).abs() / e,
    );

    let point = LocalPointModel {
        n: 2 * l.weights.len() + l.lambdas.len(),
        weights: l.weights.clone(),
        eps: l.eps.clone(),
        lambdas: l.lambdas.clone(),
    };
    let (index, expected, oracle): (usize, Vec<usize>, equimorse_core::Result<Vec<OracleCount>>) = match l.kind {
        LocalKind::Point => {
            point.validate()?;
            (
                point.index(),
                (0..=l.kmax).map(|k| point_contribution(&point, k)).collect(),
                point_oracle_counts(&point, l.s, l.kmax),
            )
        }
        LocalKind::Orbit => {
            if l.weights.len() != 1 || !l.eps.is_empty() {
                return Err(CliError::Usage(
                    "an orbit model takes one weight (the orbit speed) and no ε".to_string(),
                ));
            }
            let orbit = LocalOrbitModel {
                weight: l.weights[0],
                transverse: LocalPointModel {
                    n: l.lambdas.len(),
                    weights: vec![],
                    eps: vec![],
                    lambdas: l.lambdas.clone(),
                },
            };
            orbit.transverse.validate()?;
            (
                orbit.index(),
                (0..=l.kmax).map(|k| orbit_contribution(&orbit, k)).collect(),
                orbit_oracle_counts(&orbit, l.orbit_radius, l.s, l.kmax),
            )
        }
    };
    let (counts, grid_note) = match oracle {
        Ok(v) => (Some(v), None),
        Err(equimorse_core::Error::Config(m)) => (None, Some(m)),
        Err(e) => return Err(e.into()),
    };
    let contributions: Vec<ContributionRow> = expected
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let grid = counts.as_ref().map(|v| v[k].clone());
            let pass = grid.as_ref().is_none_or(|g| g.count == e && g.separated);
            ContributionRow {
                k,
                expected: e,
                grid,
                pass,
            }
        })
        .collect();

    let mut planes = Vec::new();
    if l.kind == LocalKind::Point {
        for (&m, &eps) in l.weights.iter().zip(&l.eps) {
            let (ca, cb) = ab_branch_spectra(l.s, f64::from(m), eps, 3);
            let (ga, gb) = ab_branch_grid(l.s, m, eps, 3, l.cells)?;
            let err = |e: f64, g: f64| branch_relative_error(e, g, l.s);
            planes.push(PlaneReport {
                weight: m,
                eps,
                block_pairs: block_matrix_eigen(l.s, f64::from(m), eps),
                block_residual: block_residual(l.s, f64::from(m), eps),
                branch_a: Comparison::new(ca.eigenvalues, ga.eigenvalues, BRANCH_TOLERANCE, err),
                branch_b: Comparison::new(cb.eigenvalues, gb.eigenvalues, BRANCH_TOLERANCE, err),
            });
        }
    }
    let pass = oscillator.pass
        && contributions.iter().all(|r| r.pass)
        && planes
            .iter()
            .all(|p| p.block_residual <= BLOCK_TOLERANCE * (1.0 + 2.0 * l.s.hypot(f64::from(p.weight))) && p.branch_a.pass && p.branch_b.pass);
    Ok(LocalReport {
        kind: l.kind,
        index,
        s: l.s,
        oscillator,
        planes,
        contributions,
        grid_note,
        pass,
    })
}

pub fn local(c: &RunConfig) -> Result<bool, CliError> {
    let report = local_report(c)?;
    emit(
        c.output.path.as_deref(),
        &json(&WithConfig {
            report: &report,
            config: c,
        })?,
    )?;
    Ok(report.pass)
}

pub fn report(inputs: &[PathBuf], out: Option<&Path>) -> Result<bool, CliError> {
    let mut rows = Vec::new();
    let mut all_pass = true;
    for path in inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
        let r: VerificationReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        all_pass &= r.passed();
        let mut push = |record: &str, k: usize, s: Option<f64>, v: String| {
            rows.push(vec![
                record.to_string(),
                r.case.clone(),
                k.to_string(),
                s.map(num).unwrap_or_default(),
                v,
            ]);
        };
        for (name, seq) in [("betti", &r.betti), ("c", &r.c), ("d", &r.d), ("tilde_c", &r.tilde_c)] {
            for (k, v) in seq.iter().enumerate() {
                push(name, k, None, v.to_string());
            }
        }
        for (k, v) in r.slack_thm1.iter().enumerate() {
            push("slack_thm1", k, None, v.to_string());
        }
        for p in &r.slack_thm2 {
            for (k, v) in p.mu.iter().enumerate() {
                push("mu", k, Some(p.s), num(*v));
            }
            for (k, v) in p.slack.iter().enumerate() {
                push("slack_thm2", k, Some(p.s), num(*v));
            }
        }
    }
    emit(out, &csv(&["record", "case", "k", "s", "value"], &rows)?)?;
    Ok(all_pass)
}
