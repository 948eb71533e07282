//! Canonical JSON workbook format.
//!
//! ```json
//! {"name": "wb", "sheets": [{"name": "S1", "rows": 2, "cols": 2,
//!   "col_widths": [8.43, 8.43],
//!   "cells": [{"r": 1, "c": 1, "t": "day",
//!              "f": {"bt": false, "bb": true, "bl": false, "br": false, "bold": true, "fill": "#FFFF00"}}],
//!   "tables": ["A1:B2"]}]}
//! ```
//!
//! Cells are listed sparsely in row-major order. `row_height` is an
//! optional extension, omitted when it equals the default of 1.0.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, NamedSheet, Workbook};
use crate::sheet::{CellData, CellFormat, Rgb, Sheet, TableRange};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkbookDoc {
    name: String,
    sheets: Vec<SheetDoc>,
}

fn default_row_height() -> f64 {
    1.0
}

fn is_default_row_height(h: &f64) -> bool {
    *h == 1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SheetDoc {
    name: String,
    rows: u32,
    cols: u32,
    col_widths: Vec<f64>,
    #[serde(
        default = "default_row_height",
        skip_serializing_if = "is_default_row_height"
    )]
    row_height: f64,
    cells: Vec<CellDoc>,
    #[serde(default)]
    tables: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDoc {
    r: u32,
    c: u32,
    #[serde(default)]
    t: String,
    #[serde(default)]
    f: FormatDoc,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormatDoc {
    #[serde(default)]
    bt: bool,
    #[serde(default)]
    bb: bool,
    #[serde(default)]
    bl: bool,
    #[serde(default)]
    br: bool,
    #[serde(default)]
    bold: bool,
    #[serde(default)]
    fill: Option<Rgb>,
}

impl From<&CellFormat> for FormatDoc {
    fn from(f: &CellFormat) -> Self {
        Self {
            bt: f.border_top,
            bb: f.border_bottom,
            bl: f.border_left,
            br: f.border_right,
            bold: f.bold,
            fill: f.fill,
        }
    }
}

impl From<&FormatDoc> for CellFormat {
    fn from(f: &FormatDoc) -> Self {
        Self {
            border_top: f.bt,
            border_bottom: f.bb,
            border_left: f.bl,
            border_right: f.br,
            bold: f.bold,
            fill: f.fill,
        }
    }
}

fn schema(path: String, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        path,
        message: message.into(),
    }
}

fn to_doc(wb: &Workbook) -> WorkbookDoc {
    WorkbookDoc {
        name: wb.name.clone(),
        sheets: wb
            .sheets
            .iter()
            .map(|ns| SheetDoc {
                name: ns.name.clone(),
                rows: ns.sheet.rows(),
                cols: ns.sheet.cols(),
                col_widths: ns.sheet.col_widths().to_vec(),
                row_height: ns.sheet.row_height(),
                cells: ns
                    .sheet
                    .iter()
                    .filter(|(_, c)| !c.is_default())
                    .map(|(a, c)| CellDoc {
                        r: a.row(),
                        c: a.col(),
                        t: c.text.clone(),
                        f: (&c.format).into(),
                    })
                    .collect(),
                tables: ns.tables.iter().map(TableRange::to_a1).collect(),
            })
            .collect(),
    }
}

fn from_doc(doc: WorkbookDoc) -> Result<Workbook, IngestError> {
    let mut names = HashSet::new();
    let mut sheets = Vec::with_capacity(doc.sheets.len());
    for (si, sd) in doc.sheets.into_iter().enumerate() {
        let base = format!("sheets[{si}]");
        if !names.insert(sd.name.clone()) {
            return Err(schema(
                format!("{base}.name"),
                format!("duplicate sheet name {:?}", sd.name),
            ));
        }
        if sd.rows == 0 {
            return Err(schema(format!("{base}.rows"), "must be >= 1"));
        }
        if sd.cols == 0 {
            return Err(schema(format!("{base}.cols"), "must be >= 1"));
        }
        if sd.col_widths.len() != sd.cols as usize {
            return Err(schema(
                format!("{base}.col_widths"),
                format!("expected {} entries, got {}", sd.cols, sd.col_widths.len()),
            ));
        }
        if let Some(i) = sd
            .col_widths
            .iter()
            .position(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(schema(
                format!("{base}.col_widths[{i}]"),
                "width must be > 0",
            ));
        }
        if !(sd.row_height.is_finite() && sd.row_height > 0.0) {
            return Err(schema(format!("{base}.row_height"), "must be > 0"));
        }
        let mut cells = vec![CellData::default(); sd.rows as usize * sd.cols as usize];
        let mut seen = HashSet::new();
        for (ci, cd) in sd.cells.iter().enumerate() {
            let cpath = format!("{base}.cells[{ci}]");
            if cd.r == 0 || cd.r > sd.rows {
                return Err(schema(
                    format!("{cpath}.r"),
                    format!("row {} outside 1..={}", cd.r, sd.rows),
                ));
            }
            if cd.c == 0 || cd.c > sd.cols {
                return Err(schema(
                    format!("{cpath}.c"),
                    format!("column {} outside 1..={}", cd.c, sd.cols),
                ));
            }
            if !seen.insert((cd.r, cd.c)) {
                return Err(schema(cpath, format!("duplicate cell ({},{})", cd.r, cd.c)));
            }
            let idx = (cd.r - 1) as usize * sd.cols as usize + (cd.c - 1) as usize;
            cells[idx] = CellData::with_format(cd.t.clone(), (&cd.f).into());
        }
        let sheet = Sheet::from_parts(sd.rows, sd.cols, cells, sd.col_widths, sd.row_height)
            .map_err(|e| schema(base.clone(), e.to_string()))?;
        let mut tables = Vec::with_capacity(sd.tables.len());
        for (ti, t) in sd.tables.iter().enumerate() {
            let tpath = format!("{base}.tables[{ti}]");
            let r = TableRange::from_a1(t).map_err(|e| schema(tpath.clone(), e.to_string()))?;
            if !sheet.contains(r.bottom_right()) {
                return Err(schema(
                    tpath,
                    format!("range {t} exceeds the {}x{} grid", sd.rows, sd.cols),
                ));
            }
            tables.push(r);
        }
        sheets.push(NamedSheet {
            name: sd.name,
            sheet,
            tables,
        });
    }
    Ok(Workbook {
        name: doc.name,
        sheets,
    })
}

pub fn to_json_string(wb: &Workbook) -> String {
    serde_json::to_string_pretty(&to_doc(wb)).expect("workbook serializes")
}

pub fn from_json_str(s: &str) -> Result<Workbook, IngestError> {
    let de = &mut serde_json::Deserializer::from_str(s);
    let doc: WorkbookDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        IngestError::Json {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    from_doc(doc)
}

pub fn load_json(path: &Path) -> Result<Workbook, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json_str(&text)
}

pub fn save_json(wb: &Workbook, path: &Path) -> Result<(), IngestError> {
    let mut text = to_json_string(wb);
    text.push('\n');
    std::fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
