use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use tempfile::NamedTempFile;

use crate::error::CliError;
use crate::scenario::Rows;

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_toml<S: serde::Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let text = toml::to_string(value).map_err(|e| CliError::Scenario(format!("serialising {}: {e}", path.display())))?;
    write_atomic(path, text.as_bytes())
}

pub fn rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
