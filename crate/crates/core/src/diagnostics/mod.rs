//! Runnable experiments for the structural properties of the scheme, and the
//! CSV/VTK writers.

mod convergence;
mod experiments;
mod orders;
mod output;

pub use convergence::{convergence_study, Refinement};
pub use experiments::{
    perturbation_experiment, power_balance_series, power_balance_study, probe_suite, regularity_study,
    schur_equivalence, weak_residual_experiment, PerturbationKind, PowerBalanceSeries,
};
pub use orders::{asymptotic_order, observed_orders, window_ratios, window_start};
pub use output::{write_field_vtk, write_power_balance_csv, write_timeseries_csv};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::mqs::MqsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("{0}")]
    Io(String),
    #[error("a refinement study needs at least 3 levels, got {levels}")]
    InsufficientLevels { levels: usize },
    #[error(transparent)]
    Mqs(#[from] MqsError),
}

impl From<std::io::Error> for DiagnosticsError {
    fn from(e: std::io::Error) -> Self {
        DiagnosticsError::Io(e.to_string())
    }
}

impl From<csv::Error> for DiagnosticsError {
    fn from(e: csv::Error) -> Self {
        DiagnosticsError::Io(e.to_string())
    }
}

/// Outcome of one experiment. `criterion` states what `pass` means.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: String,
    pub pass: bool,
    pub criterion: String,
    pub measured: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentResult {
    pub fn new(name: &str, criterion: &str) -> Self {
        Self { name: name.into(), pass: false, criterion: criterion.into(), measured: BTreeMap::new(), artifacts: Vec::new() }
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> f64 {
        self.measured.get(key).copied().unwrap_or(f64::NAN)
    }

    /// `name.key=value` lines, keys sorted.
    pub fn to_kv(&self) -> String {
        let mut s = format!("{}.pass={}\n", self.name, self.pass);
        for (k, v) in &self.measured {
            let _ = writeln!(s, "{}.{k}={v}", self.name);
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "{}.artifact={}", self.name, a.display());
        }
        s
    }
}

/// Plain-text table: one line per experiment, then its measured values.
pub fn summary_table(results: &[ExperimentResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(4).max(10);
    let mut s = format!("{:<width$}  {:<6}  criterion\n", "experiment", "result");
    for r in results {
        let _ = writeln!(s, "{:<width$}  {:<6}  {}", r.name, if r.pass { "PASS" } else { "FAIL" }, r.criterion);
        for (k, v) in &r.measured {
            let _ = writeln!(s, "{:<width$}    {k} = {v:.6e}", "");
        }
    }
    s
}

/// Writes `summary.txt` and `summary.kv` into `dir`.
pub fn write_summary(dir: &Path, results: &[ExperimentResult]) -> Result<Vec<PathBuf>, DiagnosticsError> {
    std::fs::create_dir_all(dir)?;
    let txt = dir.join("summary.txt");
    let kv = dir.join("summary.kv");
    std::fs::write(&txt, summary_table(results))?;
    std::fs::write(&kv, results.iter().map(|r| r.to_kv()).collect::<String>())?;
    Ok(vec![txt, kv])
}
