//! Spreadsheet-to-image probing toolkit.
//!
//! Converts spreadsheets into images under controlled settings, derives
//! self-supervised ground truth for OCR, spatial position, visual format
//! and table detection tasks, and scores model answers against it.

pub mod client;
pub mod ingest;
pub mod metrics;
pub mod parsing;
pub mod prompt;
pub mod render;
pub mod sheet;
pub mod synth;
pub mod task;
pub mod transform;
pub mod truth;

pub use ingest::{IngestError, NamedSheet, Workbook};
pub use sheet::{
    AddressError, AddressForm, CellAddress, CellData, CellFormat, Rgb, Sheet, SheetError,
    TableRange,
};
