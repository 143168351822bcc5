//! Run configuration: a TOML file with one section per stage, overridable
//! from the command line.

use std::path::{Path, PathBuf};

use equimorse_core::catalog::CaseParams;
use equimorse_core::spectral::{SolverOptions, TraceSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    /// Degree for `spectrum` and `sweep`.
    pub k: usize,
    /// Highest verified degree; `n + 1` when absent.
    pub kmax: Option<usize>,
    /// Deformation parameter for `spectrum`.
    pub s: f64,
    pub s_list: Vec<f64>,
    /// Eigenvalues per solve; all when absent (`spectrum`) or 10 (`sweep`).
    pub count: Option<usize>,
    /// Kernel probe set; the catalog's choice when absent.
    pub betti_probes: Option<Vec<f64>>,
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self {
            k: 0,
            kmax: None,
            s: 0.0,
            s_list: vec![0.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            count: None,
            betti_probes: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalKind {
    Point,
    Orbit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalSection {
    pub kind: LocalKind,
    /// Rotation weights `m_i` (point) or the orbit speed (orbit, one entry).
    pub weights: Vec<u32>,
    pub eps: Vec<i8>,
    pub lambdas: Vec<i8>,
    pub s: f64,
    /// Oscillator frequency for the one-dimensional check.
    pub ho_a: f64,
    pub orbit_radius: f64,
    pub kmax: usize,
    /// Radial cells for the branch comparison.
    pub cells: usize,
}

impl Default for LocalSection {
    fn default() -> Self {
        Self {
            kind: LocalKind::Point,
            weights: vec![1],
            eps: vec![1],
            lambdas: vec![],
            s: 64.0,
            ho_a: 1.0,
            orbit_radius: 8.0,
            kmax: 4,
            cells: 400,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    /// Eigenvalue CSV for `spectrum`.
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub geometry: CaseParams,
    pub spectral: SpectralSection,
    pub trace: TraceSpec,
    pub solver: SolverOptions,
    pub local: LocalSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: "sphere_height".to_string(),
            geometry: CaseParams::default(),
            spectral: SpectralSection::default(),
            trace: TraceSpec::default(),
            solver: SolverOptions::default(),
            local: LocalSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Checks that do not need the catalog.
    pub fn validate(&self) -> Result<(), CliError> {
        let s_ok = |s: f64| s.is_finite() && s >= 0.0;
        if !self.spectral.s_list.iter().all(|&s| s_ok(s)) || !s_ok(self.spectral.s) {
            return Err(CliError::Usage("deformation parameters must be finite and ≥ 0".to_string()));
        }
        if self.spectral.s_list.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Usage("s_list must be ascending".to_string()));
        }
        if self.spectral.count == Some(0) {
            return Err(CliError::Usage("count must be positive".to_string()));
        }
        self.trace.validate()?;
        Ok(())
    }
}
