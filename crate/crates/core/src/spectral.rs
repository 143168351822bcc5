//! Symmetric eigenproblems, kernel detection and trace functionals.
//!
//! Operators are self-adjoint in a diagonal mass inner product; they are
//! reduced to Euclidean-symmetric form by `M^{1/2} A M^{-1/2}` before
//! solving. Small problems use a dense decomposition, large partial
//! problems a shift-invert subspace iteration with a fixed start block.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::BackendMatrices;
use crate::cartan::deformed_laplacian;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

pub const DENSE_LIMIT: usize = 2000;
pub const TAU_REL: f64 = 1e-3;
pub const TAU_ABS_FACTOR: f64 = 1e-9;
pub const SEPARATION: f64 = 100.0;
pub const TAIL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_PROBES: [f64; 3] = [0.0, 4.0, 16.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub max_iterations: usize,
    /// Residual target relative to the operator norm.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Auto,
            max_iterations: 500,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub k: usize,
    pub s: f64,
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub gap: Option<f64>,
    pub residual_norms: Vec<f64>,
    pub dim: usize,
}

impl SpectrumReport {
    pub fn is_full(&self) -> bool {
        self.eigenvalues.len() == self.dim
    }

    /// Largest eigenvalue counted as kernel, if any.
    pub fn kernel_max(&self) -> Option<f64> {
        self.kernel_dim
            .checked_sub(1)
            .map(|i| self.eigenvalues[i])
    }
}

/// Raw eigen-decomposition of a Euclidean-symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub norm: f64,
}

fn residuals(s: &Mat, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let v: Vec<f64> = vectors.column(i).iter().copied().collect();
            let sv = linalg::matvec(s, &v);
            sv.iter()
                .zip(&v)
                .map(|(a, b)| (a - lam * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn dense_pairs(s: &Mat, count: usize) -> EigenPairs {
    let n = s.rows();
    let norm = linalg::norm_inf(s);
    if n == 0 {
        return EigenPairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
            residuals: Vec::new(),
            norm,
        };
    }
    let eig = SymmetricEigen::new(linalg::to_dense(s));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(count);
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, order.len());
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    let residuals = residuals(s, &values, &vectors);
    EigenPairs {
        values,
        vectors,
        residuals,
        norm,
    }
}

/// Shift-invert subspace iteration with Rayleigh–Ritz extraction.
fn iterative_pairs(s: &Mat, count: usize, opts: &SolverOptions) -> Result<EigenPairs> {
    let n = s.rows();
    let norm = linalg::norm_inf(s);
    let block = (count + 8).min(n);
    let shift = 1e-8 * norm.max(1.0);
    let k = linalg::add(s, &linalg::scale(&linalg::identity(n), shift));
    let ldl = sprs_ldl::Ldl::new()
        .numeric(k.view())
        .map_err(|_| Error::Solver {
            iterations: 0,
            residual: f64::NAN,
        })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x00e1_9e05);
    let mut x = DMatrix::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    let target = opts.tolerance * norm.max(1.0);
    let mut worst = f64::INFINITY;
    for iter in 1..=opts.max_iterations {
        let mut y = DMatrix::zeros(n, block);
        for c in 0..block {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let sol = ldl.solve(&col);
            y.set_column(c, &nalgebra::DVector::from_vec(sol));
        }
        let q = y.qr().q();
        // Rayleigh–Ritz on span(q)
        let mut sq = DMatrix::zeros(n, block);
        for c in 0..block {
            let col: Vec<f64> = q.column(c).iter().copied().collect();
            sq.set_column(c, &nalgebra::DVector::from_vec(linalg::matvec(s, &col)));
        }
        let h = q.transpose() * &sq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut v = DMatrix::zeros(block, block);
        for (c, &i) in order.iter().enumerate() {
            v.set_column(c, &eig.eigenvectors.column(i));
        }
        x = &q * v;
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let head = x.columns(0, count).into_owned();
        let res = residuals(s, &values[..count], &head);
        worst = res.iter().copied().fold(0.0, f64::max);
        if worst <= target {
            return Ok(EigenPairs {
                values: values[..count].to_vec(),
                vectors: head,
                residuals: res,
                norm,
            });
        }
        if iter == opts.max_iterations {
            break;
        }
    }
    Err(Error::Solver {
        iterations: opts.max_iterations,
        residual: worst,
    })
}

/// Smallest `count` eigenpairs (all if `None`) of a Euclidean-symmetric matrix.
pub fn eigen_pairs(s: &Mat, count: Option<usize>, opts: &SolverOptions) -> Result<EigenPairs> {
    let n = s.rows();
    let count = count.unwrap_or(n).min(n);
    let dense = match opts.kind {
        SolverKind::Dense => true,
        SolverKind::Iterative => count == n,
        SolverKind::Auto => n < DENSE_LIMIT || count == n,
    };
    if dense || count == 0 {
        Ok(dense_pairs(s, count))
    } else {
        iterative_pairs(s, count, opts)
    }
}

/// Kernel size and gap from an ascending eigenvalue list.
///
/// `τ_abs = 1e-9‖op‖`; the gap is the first eigenvalue above `τ_abs`; the
/// kernel is everything below `τ_abs + 1e-3·gap`. A factor-100 separation
/// between the largest kernel eigenvalue (or `τ_abs`) and the gap is
/// required, otherwise the kernel is ambiguous.
pub fn detect_kernel(values: &[f64], norm: f64, full: bool, degree: usize) -> Result<(usize, Option<f64>)> {
    let tau_abs = TAU_ABS_FACTOR * norm.max(f64::MIN_POSITIVE);
    let gap = values.iter().copied().find(|&l| l > tau_abs);
    let Some(g) = gap else {
        if full {
            return Ok((values.len(), None));
        }
        return Err(Error::AmbiguousKernel {
            degree,
            kernel_max: values.last().copied().unwrap_or(0.0),
            gap: f64::NAN,
        });
    };
    let kernel = values
        .iter()
        .filter(|&&l| l < tau_abs + TAU_REL * g)
        .count();
    let kernel_max = if kernel > 0 {
        values[kernel - 1].abs()
    } else {
        0.0
    };
    let gap = if kernel < values.len() {
        values[kernel]
    } else {
        g
    };
    if gap < SEPARATION * kernel_max.max(tau_abs) {
        return Err(Error::AmbiguousKernel {
            degree,
            kernel_max,
            gap,
        });
    }
    Ok((kernel, Some(gap)))
}

/// Solve a mass-self-adjoint operator and report its low spectrum.
pub fn eigensolve(
    op: &Mat,
    mass: &[f64],
    count: Option<usize>,
    opts: &SolverOptions,
) -> Result<(SpectrumReport, EigenPairs)> {
    let s = linalg::mass_symmetrize(op, mass);
    let pairs = eigen_pairs(&s, count, opts)?;
    let full = pairs.values.len() == s.rows();
    let (kernel_dim, gap) = detect_kernel(&pairs.values, pairs.norm, full, 0)?;
    let report = SpectrumReport {
        k: 0,
        s: 0.0,
        eigenvalues: pairs.values.clone(),
        kernel_dim,
        gap,
        residual_norms: pairs.residuals.clone(),
        dim: s.rows(),
    };
    Ok((report, pairs))
}

/// Spectrum of `Δ_eq,s^k`.
pub fn spectrum(
    backend: &BackendMatrices,
    k: usize,
    s: f64,
    count: Option<usize>,
    opts: &SolverOptions,
) -> Result<SpectrumReport> {
    Ok(spectrum_with_vectors(backend, k, s, count, opts)?.0)
}

pub fn spectrum_with_vectors(
    backend: &BackendMatrices,
    k: usize,
    s: f64,
    count: Option<usize>,
    opts: &SolverOptions,
) -> Result<(SpectrumReport, EigenPairs)> {
    let lap = deformed_laplacian(backend, s, k)?;
    match eigensolve(&lap.matrix, &lap.domain.mass, count, opts) {
        Ok((mut report, pairs)) => {
            report.k = k;
            report.s = s;
            Ok((report, pairs))
        }
        Err(Error::AmbiguousKernel {
            kernel_max, gap, ..
        }) => Err(Error::AmbiguousKernel {
            degree: k,
            kernel_max,
            gap,
        }),
        Err(e) => Err(e),
    }
}

/// Full ascending spectrum of `Δ_eq,s^k` without kernel classification.
pub fn full_spectrum(backend: &BackendMatrices, k: usize, s: f64) -> Result<Vec<f64>> {
    let lap = deformed_laplacian(backend, s, k)?;
    let sym = linalg::mass_symmetrize(&lap.matrix, &lap.domain.mass);
    Ok(dense_pairs(&sym, sym.rows()).values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    #[default]
    ExpDecay,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    pub kind: PhiKind,
    pub scale: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            kind: PhiKind::ExpDecay,
            scale: 1.0,
        }
    }
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Config(format!("phi scale {} must be positive", self.scale)));
        }
        Ok(())
    }

    pub fn phi(&self, x: f64) -> f64 {
        let y = x.max(0.0) / self.scale;
        match self.kind {
            PhiKind::ExpDecay => (-y).exp(),
            PhiKind::Gaussian => (-y * y).exp(),
        }
    }
}

/// `tr φ(Δ) = Σ φ(λ_j)`; a partial spectrum is accepted only when the
/// unseen tail is bounded by `φ(λ_last)·(dim − count) ≤ 1e-6`.
pub fn trace_phi(report: &SpectrumReport, spec: &TraceSpec) -> Result<f64> {
    spec.validate()?;
    if !report.is_full() {
        let missing = (report.dim - report.eigenvalues.len()) as f64;
        let last = report.eigenvalues.last().copied().unwrap_or(0.0);
        let bound = spec.phi(last) * missing;
        if bound > TAIL_TOLERANCE {
            return Err(Error::TraceTail { bound });
        }
    }
    Ok(trace_values(&report.eigenvalues, spec))
}

pub fn trace_values(values: &[f64], spec: &TraceSpec) -> f64 {
    values.iter().map(|&l| spec.phi(l)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BettiReport {
    pub betti: Vec<usize>,
    pub probes: Vec<f64>,
    /// Kernel dimension per probe (rows) and degree (columns).
    pub per_probe: Vec<Vec<usize>>,
    /// Smallest ratio gap / max(kernel_max, τ_abs) over all solves.
    pub min_separation: f64,
}

/// `β_eq^k = dim ker Δ_eq,s^k` for `k = 0..=kmax`, checked on every probe `s`.
pub fn betti_numbers(
    backend: &BackendMatrices,
    kmax: usize,
    probes: &[f64],
    opts: &SolverOptions,
) -> Result<BettiReport> {
    let probes = if probes.is_empty() {
        vec![0.0]
    } else {
        probes.to_vec()
    };
    let jobs: Vec<(usize, usize)> = (0..probes.len())
        .flat_map(|p| (0..=kmax).map(move |k| (p, k)))
        .collect();
    let reports: Vec<(SpectrumReport, f64)> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let (r, pairs) = spectrum_with_vectors(backend, k, probes[p], None, opts)?;
            Ok((r, pairs.norm))
        })
        .collect::<Result<_>>()?;
    let mut per_probe = vec![vec![0; kmax + 1]; probes.len()];
    let mut min_separation = f64::INFINITY;
    for (&(p, k), (r, norm)) in jobs.iter().zip(&reports) {
        per_probe[p][k] = r.kernel_dim;
        if let Some(g) = r.gap {
            let tau = TAU_ABS_FACTOR * norm;
            let floor = r.kernel_max().map(f64::abs).unwrap_or(0.0).max(tau);
            min_separation = min_separation.min(g / floor);
        }
    }
    for k in 0..=kmax {
        let dims: Vec<usize> = per_probe.iter().map(|row| row[k]).collect();
        if dims.iter().any(|&d| d != dims[0]) {
            return Err(Error::SweepKernel { dims });
        }
    }
    Ok(BettiReport {
        betti: per_probe[0].clone(),
        probes,
        per_probe,
        min_separation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub report: SpectrumReport,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub k: usize,
    pub points: Vec<SweepPoint>,
    /// Smallest probed `s` beyond which the gap never decreases.
    pub gap_monotone_from: Option<f64>,
}

/// Low spectra and `μ^k_{eq,s}` along an ascending list of `s`.
pub fn sweep_s(
    backend: &BackendMatrices,
    k: usize,
    s_list: &[f64],
    count: Option<usize>,
    trace: &TraceSpec,
    opts: &SolverOptions,
) -> Result<SweepReport> {
    trace.validate()?;
    if s_list.windows(2).any(|w| w[1] < w[0]) || s_list.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::Config("s_list must be ascending and nonnegative".to_string()));
    }
    let points: Vec<SweepPoint> = s_list
        .par_iter()
        .map(|&s| {
            let report = spectrum(backend, k, s, count, opts)?;
            // μ from the full spectrum: a truncated tail is not bounded at small s
            let mu = trace_values(&full_spectrum(backend, k, s)?, trace);
            Ok(SweepPoint { report, mu })
        })
        .collect::<Result<_>>()?;
    let dims: Vec<usize> = points.iter().map(|p| p.report.kernel_dim).collect();
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::SweepKernel { dims });
    }
    let gaps: Vec<f64> = points
        .iter()
        .map(|p| p.report.gap.unwrap_or(f64::INFINITY))
        .collect();
    let mut from = if points.is_empty() { None } else { Some(points.len() - 1) };
    for i in (0..points.len().saturating_sub(1)).rev() {
        if gaps[i] <= gaps[i + 1] {
            from = Some(i);
        } else {
            break;
        }
    }
    Ok(SweepReport {
        k,
        gap_monotone_from: from.map(|i| points[i].report.s),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_backend, Geometry, InvariantFunction, RevolutionProfile};

    fn report(values: Vec<f64>, dim: usize) -> SpectrumReport {
        SpectrumReport {
            k: 0,
            s: 0.0,
            residual_norms: vec![0.0; values.len()],
            eigenvalues: values,
            kernel_dim: 0,
            gap: None,
            dim,
        }
    }

    #[test]
    fn identity_spectrum() {
        let id = linalg::identity(5);
        let (r, _) = eigensolve(&id, &[1.0; 5], Some(3), &SolverOptions::default()).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.kernel_dim, 0);
    }

    #[test]
    fn trace_of_explicit_spectrum() {
        let spec = TraceSpec::default();
        let r = report(vec![0.0, 0.0, 5.0, 9.0], 4);
        let t = trace_phi(&r, &spec).unwrap();
        assert!((t - (2.0 + (-5.0f64).exp() + (-9.0f64).exp())).abs() < 1e-15);
        assert_eq!(trace_phi(&report(vec![], 0), &spec).unwrap(), 0.0);
    }

    #[test]
    fn trace_tail_is_enforced() {
        let spec = TraceSpec::default();
        let r = report(vec![0.0, 1.0], 10);
        assert!(matches!(trace_phi(&r, &spec), Err(Error::TraceTail { .. })));
        let r = report(vec![0.0, 40.0], 10);
        assert!(trace_phi(&r, &spec).is_ok());
    }

    #[test]
    fn gaussian_phi() {
        let spec = TraceSpec {
            kind: PhiKind::Gaussian,
            scale: 2.0,
        };
        assert_eq!(spec.phi(0.0), 1.0);
        assert!((spec.phi(2.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_detection_rules() {
        assert_eq!(detect_kernel(&[1e-14, 2.0, 3.0], 10.0, true, 0).unwrap(), (1, Some(2.0)));
        assert_eq!(detect_kernel(&[0.0, 0.0], 1.0, true, 0).unwrap(), (2, None));
        // τ_abs = 1e-9: a kernel value at 1e-10 but the gap only 5e-8
        assert!(matches!(
            detect_kernel(&[1e-10, 5e-8, 1.0], 1.0, true, 0),
            Err(Error::AmbiguousKernel { .. })
        ));
    }

    fn sphere(n: usize) -> BackendMatrices {
        let f = InvariantFunction::Trig {
            terms: vec![InvariantFunction::cos(1.0, 1.0)],
        };
        build_backend(&Geometry::Revolution(RevolutionProfile::sphere(1.0, 1, n)), &f).unwrap()
    }

    #[test]
    fn sphere_function_laplacian_first_eigenvalue() {
        let b = sphere(256);
        let r = spectrum(&b, 0, 0.0, Some(4), &SolverOptions::default()).unwrap();
        assert_eq!(r.kernel_dim, 1);
        assert!((r.eigenvalues[1] - 2.0).abs() < 0.04, "{:?}", r.eigenvalues);
        assert!((r.eigenvalues[2] - 6.0).abs() < 0.12, "{:?}", r.eigenvalues);
    }

    #[test]
    fn dense_and_iterative_agree() {
        let b = sphere(128);
        let lap = deformed_laplacian(&b, 3.0, 1).unwrap();
        let s = linalg::mass_symmetrize(&lap.matrix, &lap.domain.mass);
        let d = eigen_pairs(
            &s,
            Some(10),
            &SolverOptions {
                kind: SolverKind::Dense,
                ..Default::default()
            },
        )
        .unwrap();
        let it = iterative_pairs(&s, 10, &SolverOptions::default()).unwrap();
        for (a, b) in d.values.iter().zip(&it.values) {
            assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn deformed_kernel_persists_with_gap() {
        let b = sphere(256);
        let r = spectrum(&b, 0, 10.0, Some(3), &SolverOptions::default()).unwrap();
        assert!(r.eigenvalues[0] < 1e-3);
        assert!(r.eigenvalues[1] > 1.0);
    }
}
