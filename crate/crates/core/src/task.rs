//! Task instances: one (image, prompt, ground truth) triple per
//! task × setting × shot, plus the rules tying a task and setting to an
//! output grammar.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptBundle;
use crate::sheet::{AddressForm, CellAddress, Sheet};
use crate::transform::Setting;
use crate::truth::{FormatKind, OcrTruth, SpatialTruth, TableTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Ocr,
    Spatial,
    Format,
    Table,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Ocr,
        TaskKind::Spatial,
        TaskKind::Format,
        TaskKind::Table,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Ocr => "ocr",
            TaskKind::Spatial => "spatial",
            TaskKind::Format => "format",
            TaskKind::Table => "table",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                format!("unknown task {s:?} (expected one of ocr, spatial, format, table)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shot {
    Zero,
    One,
}

impl Shot {
    pub const ALL: [Shot; 2] = [Shot::Zero, Shot::One];

    pub fn as_str(&self) -> &'static str {
        match self {
            Shot::Zero => "zero",
            Shot::One => "one",
        }
    }
}

impl fmt::Display for Shot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shot {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" | "0" => Ok(Shot::Zero),
            "one" | "1" => Ok(Shot::One),
            _ => Err(format!("unknown shot {s:?} (expected zero or one)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grammar {
    OcrLines,
    PairLines,
    AddressLines,
    FourBoundariesJson,
    RangeLines,
}

impl Grammar {
    pub fn as_str(&self) -> &'static str {
        match self {
            Grammar::OcrLines => "ocr_lines",
            Grammar::PairLines => "pair_lines",
            Grammar::AddressLines => "address_lines",
            Grammar::FourBoundariesJson => "four_boundaries_json",
            Grammar::RangeLines => "range_lines",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("the format task cannot run under style_change: that setting removes the bold and fill formats being probed")]
    FormatUnderStyleChange,
    #[error("{0}")]
    Invalid(String),
}

/// Rejects task/setting pairs that make no sense.
pub fn check_combination(task: TaskKind, setting: Setting) -> Result<(), ConfigError> {
    if task == TaskKind::Format && setting == Setting::StyleChange {
        return Err(ConfigError::FormatUnderStyleChange);
    }
    Ok(())
}

/// Address notation requested from the model. The image only carries
/// addresses under AddressAugment, so other settings use the row,col form.
pub fn address_form_for(setting: Setting) -> AddressForm {
    match setting {
        Setting::AddressAugment => AddressForm::A1,
        _ => AddressForm::Rc,
    }
}

pub fn grammar_for(task: TaskKind, setting: Setting) -> Grammar {
    match task {
        TaskKind::Ocr => Grammar::OcrLines,
        TaskKind::Spatial => Grammar::PairLines,
        TaskKind::Format => Grammar::AddressLines,
        TaskKind::Table if setting == Setting::AddressAugment => Grammar::RangeLines,
        TaskKind::Table => Grammar::FourBoundariesJson,
    }
}

/// Per-row and per-column lists of non-empty display texts of the sheet the
/// model saw. Boundary mapping runs against these.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SheetLines {
    pub rows: Vec<Vec<String>>,
    pub cols: Vec<Vec<String>>,
}

impl SheetLines {
    pub fn of(s: &Sheet) -> Self {
        Self {
            rows: s.row_lines(),
            cols: s.col_lines(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    Ocr(OcrTruth),
    Spatial(SpatialTruth),
    Format {
        format: FormatKind,
        address_form: AddressForm,
        addresses: BTreeSet<CellAddress>,
    },
    Table {
        truth: TableTruth,
        lines: SheetLines,
    },
}

impl GroundTruth {
    pub fn task(&self) -> TaskKind {
        match self {
            GroundTruth::Ocr(_) => TaskKind::Ocr,
            GroundTruth::Spatial(_) => TaskKind::Spatial,
            GroundTruth::Format { .. } => TaskKind::Format,
            GroundTruth::Table { .. } => TaskKind::Table,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub workbook: String,
    pub sheet: String,
    pub task: TaskKind,
    pub setting: Setting,
    pub shot: Shot,
    /// Set for format instances: the one format this instance probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatKind>,
    /// Relative to the directory holding the task file.
    pub image_path: String,
    pub layout_path: String,
    pub grammar: Grammar,
    pub prompt: PromptBundle,
    pub ground_truth: GroundTruth,
}

/// Restricts names to characters safe in file names and ids.
pub fn sanitize_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// `<workbook>__<sheet>__<task>[_<format>]__<setting>__<shot>`
pub fn instance_id(
    workbook: &str,
    sheet: &str,
    task: TaskKind,
    format: Option<FormatKind>,
    setting: Setting,
    shot: Shot,
) -> String {
    let task_part = match format {
        Some(f) => format!("{task}_{f}"),
        None => task.to_string(),
    };
    format!(
        "{}__{}__{task_part}__{setting}__{shot}",
        sanitize_name(workbook),
        sanitize_name(sheet)
    )
}

/// `<workbook>__<sheet>__<setting>`, the stem shared by a PNG and its layout.
pub fn image_stem(workbook: &str, sheet: &str, setting: Setting) -> String {
    format!(
        "{}__{}__{setting}",
        sanitize_name(workbook),
        sanitize_name(sheet)
    )
}
