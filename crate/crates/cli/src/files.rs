//! Output guards and the label CSV format.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Resolves the files a command will write inside `dir`, refusing to
/// replace existing ones unless `force` is set.
pub fn prepare_outputs(dir: &Path, names: &[&str], force: bool) -> Result<Vec<PathBuf>, CliError> {
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !force {
        if let Some(existing) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::Usage(format!(
                "{} already exists (pass --force to overwrite)",
                existing.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(paths)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    use std::io::Write;
    writeln!(w).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn csv_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// Reads the `cluster` column of a CSV that also has an `edge` column,
/// ordered by edge index. Other columns are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Usage(format!("{}: no `{name}` column", path.display())))
    };
    let (edge_col, cluster_col) = (column("edge")?, column("cluster")?);
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse = |col: usize| -> Result<usize, CliError> {
            record
                .get(col)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Usage(format!("{}: row {}: expected a non-negative integer", path.display(), line + 1)))
        };
        rows.push((parse(edge_col)?, parse(cluster_col)?));
    }
    rows.sort_unstable();
    for (expect, &(edge, _)) in rows.iter().enumerate() {
        if edge != expect {
            return Err(CliError::Usage(format!(
                "{}: edge indices must be 0..{} without gaps or repeats",
                path.display(),
                rows.len()
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, c)| c).collect())
}
