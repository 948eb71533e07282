//! Corpus discovery: a directory of `.json`/`.xlsx` workbooks or single files.

use std::path::{Path, PathBuf};

use sheetprobe::ingest::{load_any, IngestWarning};
use sheetprobe::Workbook;

use crate::{io_err, PipelineError, Result};

fn is_workbook_file(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("json" | "xlsx" | "xlsm")
    )
}

/// Expands directories (non-recursively) into their workbook files, sorted
/// by file name so that corpus order is stable.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(io_err(input))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_workbook_file(p))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

/// Loads every workbook of a corpus. Any failure aborts.
pub fn load_corpus(inputs: &[PathBuf]) -> Result<Vec<(Workbook, Vec<IngestWarning>)>> {
    let files = expand_inputs(inputs)?;
    if files.is_empty() {
        return Err(PipelineError::Usage(
            "no .json or .xlsx workbooks found in the given inputs".into(),
        ));
    }
    files
        .iter()
        .map(|f| load_any(f).map_err(PipelineError::from))
        .collect()
}
