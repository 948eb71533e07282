//! `ingest`: convert inputs to canonical JSON and report which sheets
//! satisfy the model image limits under each setting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sheetprobe::ingest::{load_any, save_json, IngestWarning};
use sheetprobe::render::{render, validate_image, RenderConfig};
use sheetprobe::task::sanitize_name;
use sheetprobe::transform::{apply_setting, Setting};
use sheetprobe::Sheet;

use crate::corpus::expand_inputs;
use crate::{create_dir, write_json, Outcome, PipelineError, Result};

pub const FILTER_REPORT_FILE: &str = "filter_report.json";

#[derive(Debug, Clone, Serialize)]
pub struct SettingCheck {
    pub setting: Setting,
    pub passed: bool,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub byte_size: Option<usize>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SheetCheck {
    pub workbook: String,
    pub sheet: String,
    pub rows: u32,
    pub cols: u32,
    pub tables: usize,
    pub settings: Vec<SettingCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    pub sheets: Vec<SheetCheck>,
    /// Number of sheets passing the image limits, per setting.
    pub pass_counts: BTreeMap<Setting, usize>,
    pub warnings: Vec<IngestWarning>,
    pub failures: Vec<FileFailure>,
    pub written: Vec<String>,
}

/// Renders one sheet under one setting and checks it against the limits.
pub fn check_sheet(sheet: &Sheet, setting: Setting, cfg: &RenderConfig) -> SettingCheck {
    let t = apply_setting(sheet, setting);
    match render(&t, cfg) {
        Ok((_, png)) => match validate_image(&png) {
            Ok(v) => SettingCheck {
                setting,
                passed: v.passed,
                width: Some(v.width),
                height: Some(v.height),
                byte_size: Some(v.byte_size),
                failures: v.failures,
            },
            Err(e) => SettingCheck {
                setting,
                passed: false,
                width: None,
                height: None,
                byte_size: None,
                failures: vec![e.to_string()],
            },
        },
        Err(e) => SettingCheck {
            setting,
            passed: false,
            width: None,
            height: None,
            byte_size: None,
            failures: vec![e.to_string()],
        },
    }
}

pub fn cmd_ingest(
    inputs: &[PathBuf],
    out_dir: &Path,
    cfg: &RenderConfig,
) -> Result<(FilterReport, Outcome)> {
    if inputs.is_empty() {
        return Err(PipelineError::Usage(
            "ingest needs at least one input file or directory".into(),
        ));
    }
    let files = expand_inputs(inputs)?;
    if files.is_empty() {
        return Err(PipelineError::Usage(
            "no .json or .xlsx workbooks found in the given inputs".into(),
        ));
    }
    create_dir(out_dir)?;
    let mut report = FilterReport {
        sheets: Vec::new(),
        pass_counts: Setting::ALL.iter().map(|s| (*s, 0)).collect(),
        warnings: Vec::new(),
        failures: Vec::new(),
        written: Vec::new(),
    };
    for file in &files {
        let (wb, warnings) = match load_any(file) {
            Ok(x) => x,
            Err(e) => {
                tracing::warn!("{}: {e}", file.display());
                report.failures.push(FileFailure {
                    path: file.display().to_string(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        report.warnings.extend(warnings);
        let out_name = format!("{}.json", sanitize_name(&wb.name));
        save_json(&wb, &out_dir.join(&out_name))?;
        report.written.push(out_name);
        for ns in &wb.sheets {
            let settings: Vec<SettingCheck> = Setting::ALL
                .iter()
                .map(|s| check_sheet(&ns.sheet, *s, cfg))
                .collect();
            for c in &settings {
                if c.passed {
                    *report
                        .pass_counts
                        .get_mut(&c.setting)
                        .expect("all settings") += 1;
                }
            }
            report.sheets.push(SheetCheck {
                workbook: wb.name.clone(),
                sheet: ns.name.clone(),
                rows: ns.sheet.rows(),
                cols: ns.sheet.cols(),
                tables: ns.tables.len(),
                settings,
            });
        }
    }
    write_json(&out_dir.join(FILTER_REPORT_FILE), &report)?;
    if report.failures.len() == files.len() {
        return Err(PipelineError::AllFailed(files.len()));
    }
    let outcome = Outcome::from_failures(report.failures.len());
    Ok((report, outcome))
}
