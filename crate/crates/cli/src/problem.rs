//! Problem files: JSON with inline matrices or Matrix Market references.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use saddle_rotor::mtx::read_matrix_market_file;
use saddle_rotor::{Matrix, SaddlePointMatrix};
use serde::{Deserialize, Serialize};

/// A matrix given inline as rows or as a path to a Matrix Market file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Tolerances {
    /// Off-diagonal and Riccati residual limit relative to `‖B‖`.
    pub structural: f64,
    /// Kernel classification threshold relative to `‖B‖`.
    pub zero_tol_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { structural: 1e-10, zero_tol_rel: saddle_rotor::spectral::DEFAULT_ZERO_TOL_REL }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProblemFile {
    pub a_plus: MatrixSource,
    pub a_minus: MatrixSource,
    pub w: MatrixSource,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Marks an error as bad input (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn inline_matrix(rows: &[Vec<f64>], name: &str) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        bail!(InputError(format!("{name}: inline matrix is empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        bail!(InputError(format!("{name}: row {i} has {} entries, expected {ncols}", rows[i].len())));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), ncols), flat).expect("row lengths checked"))
}

fn resolve(source: &MatrixSource, base: &Path, name: &str) -> Result<Matrix> {
    match source {
        MatrixSource::Inline(rows) => inline_matrix(rows, name),
        MatrixSource::File { path } => {
            let full = if path.is_absolute() { path.clone() } else { base.join(path) };
            read_matrix_market_file(&full).with_context(|| format!("{name}: reading {}", full.display()))
        }
    }
}

/// Parses and validates a problem file; relative paths resolve against its directory.
pub fn load_problem(path: &Path) -> Result<(SaddlePointMatrix, Tolerances)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let problem: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| InputError(format!("{}: invalid problem file: {e}", path.display())))?;
    let t = problem.tolerances;
    if !(t.structural > 0.0 && t.zero_tol_rel >= 0.0) {
        bail!(InputError(format!("tolerances must be positive, got {t:?}")));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let a_plus = resolve(&problem.a_plus, base, "aPlus")?;
    let a_minus = resolve(&problem.a_minus, base, "aMinus")?;
    let w = resolve(&problem.w, base, "w")?;
    Ok((SaddlePointMatrix::assemble(a_plus, a_minus, w)?, t))
}
