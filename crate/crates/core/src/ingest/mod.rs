//! Loading workbooks from xlsx and from the canonical JSON grid format.

mod json;
mod numfmt;
mod xlsx;
mod xml;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sheet::{Sheet, TableRange};

pub use json::{from_json_str, load_json, save_json, to_json_string};
pub use xlsx::{load_xlsx, load_xlsx_bytes, XlsxLoad};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("JSON error at {path}: {message}")]
    Json { path: String, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid xlsx archive: {0}")]
    Archive(String),
    #[error("malformed xlsx part {part}: {message}")]
    Part { part: String, message: String },
    #[error("unsupported input {0}: expected .xlsx or .json")]
    UnsupportedInput(PathBuf),
}

/// A named sheet with optional ground-truth table annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSheet {
    pub name: String,
    pub sheet: Sheet,
    pub tables: Vec<TableRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workbook {
    pub name: String,
    pub sheets: Vec<NamedSheet>,
}

impl Workbook {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            sheets: Vec::new(),
        }
    }

    pub fn sheet(&self, name: &str) -> Option<&NamedSheet> {
        self.sheets.iter().find(|s| s.name == name)
    }

    /// Trims every sheet to its used range, shifting table annotations by
    /// the removed offset. Annotations that end up outside the trimmed
    /// grid are clipped to it.
    pub fn trimmed(&self) -> Workbook {
        let sheets = self
            .sheets
            .iter()
            .map(|ns| {
                let (sheet, (dr, dc)) = ns.sheet.trimmed();
                let bounds = TableRange::from_corners(1, 1, sheet.rows(), sheet.cols());
                let tables = ns
                    .tables
                    .iter()
                    .filter_map(|t| t.shifted(-(dr as i64), -(dc as i64)))
                    .filter_map(|t| t.intersection(&bounds))
                    .collect();
                NamedSheet {
                    name: ns.name.clone(),
                    sheet,
                    tables,
                }
            })
            .collect();
        Workbook {
            name: self.name.clone(),
            sheets,
        }
    }
}

/// A non-fatal condition met while loading.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct IngestWarning {
    pub sheet: Option<String>,
    pub message: String,
}

/// Loads `.xlsx` or canonical `.json` by extension.
pub fn load_any(path: &Path) -> Result<(Workbook, Vec<IngestWarning>), IngestError> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("xlsx") | Some("xlsm") => load_xlsx(path).map(|l| (l.workbook, l.warnings)),
        Some("json") => load_json(path).map(|wb| (wb, Vec::new())),
        _ => Err(IngestError::UnsupportedInput(path.to_path_buf())),
    }
}
