//! The spreadsheet-to-image settings: column width adjustment, style
//! normalization and address augmentation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sheet::{CellAddress, Sheet};

/// Longest content prefix a column is widened to show.
pub const WIDTH_CAP_CHARS: usize = 15;
/// Extra character of padding added after the widest text.
pub const WIDTH_PADDING_CHARS: usize = 1;
/// Narrowest adjusted column.
pub const MIN_ADJUSTED_WIDTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "colwidth_adjust")]
    ColWidthAdjust,
    #[serde(rename = "style_change")]
    StyleChange,
    #[serde(rename = "address_augment")]
    AddressAugment,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting::Vanilla,
        Setting::ColWidthAdjust,
        Setting::StyleChange,
        Setting::AddressAugment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Vanilla => "vanilla",
            Setting::ColWidthAdjust => "colwidth_adjust",
            Setting::StyleChange => "style_change",
            Setting::AddressAugment => "address_augment",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setting::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown setting {s:?} (expected one of vanilla, colwidth_adjust, style_change, address_augment)"))
    }
}

/// Number of Unicode scalar values in `text`.
pub fn display_len(text: &str) -> usize {
    text.chars().count()
}

fn adjust_widths_with(sheet: &Sheet, cap_for: impl Fn(CellAddress) -> usize) -> Sheet {
    let mut out = sheet.clone();
    let mut widest = vec![0usize; sheet.cols() as usize];
    for (addr, cell) in sheet.iter() {
        if cell.is_null() {
            continue;
        }
        let len = display_len(&cell.text).min(cap_for(addr));
        let w = &mut widest[addr.col() as usize - 1];
        *w = (*w).max(len);
    }
    for (slot, w) in out.col_widths_mut().iter_mut().zip(widest) {
        *slot = (w + WIDTH_PADDING_CHARS).max(MIN_ADJUSTED_WIDTH) as f64;
    }
    out
}

/// Sets each column to its longest text (capped at 15 characters) plus one
/// character of padding, never narrower than 4.
pub fn adjust_column_widths(sheet: &Sheet) -> Sheet {
    adjust_widths_with(sheet, |_| WIDTH_CAP_CHARS)
}

/// Removes fills and bold from every cell. Borders are kept.
pub fn normalize_style(sheet: &Sheet) -> Sheet {
    let mut out = sheet.clone();
    for (_, cell) in out.cells_mut() {
        cell.format.bold = false;
        cell.format.fill = None;
    }
    out
}

fn address_tag(addr: CellAddress) -> String {
    format!("{}, ", addr.to_a1())
}

/// Prefixes each non-null cell's text with its A1 address and a comma,
/// e.g. `A1, day`. Not idempotent.
pub fn augment_addresses(sheet: &Sheet) -> Sheet {
    let mut out = sheet.clone();
    for (addr, cell) in out.cells_mut() {
        if !cell.is_null() {
            cell.text = format!("{}{}", address_tag(addr), cell.text);
        }
    }
    out
}

/// A sheet produced by [`apply_setting`]. Deliberately not a [`Sheet`], so a
/// transformed sheet cannot be fed back through another setting by accident.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSheet {
    setting: Setting,
    sheet: Sheet,
}

impl TransformedSheet {
    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn sheet(&self) -> &Sheet {
        &self.sheet
    }

    pub fn into_sheet(self) -> Sheet {
        self.sheet
    }
}

impl std::ops::Deref for TransformedSheet {
    type Target = Sheet;
    fn deref(&self) -> &Sheet {
        &self.sheet
    }
}

/// Applies one setting to a pristine sheet.
///
/// StyleChange builds on the width adjustment. AddressAugment tags first and
/// sizes columns afterwards, with the cap widened by each cell's tag so the
/// address prefix stays visible.
pub fn apply_setting(sheet: &Sheet, setting: Setting) -> TransformedSheet {
    let out = match setting {
        Setting::Vanilla => sheet.clone(),
        Setting::ColWidthAdjust => adjust_column_widths(sheet),
        Setting::StyleChange => normalize_style(&adjust_column_widths(sheet)),
        Setting::AddressAugment => {
            let tagged = augment_addresses(sheet);
            adjust_widths_with(&tagged, |addr| {
                WIDTH_CAP_CHARS + display_len(&address_tag(addr))
            })
        }
    };
    TransformedSheet {
        setting,
        sheet: out,
    }
}
