//! Self-supervised ground truth for the four probing tasks, read straight
//! off a (usually transformed) sheet. All texts are display texts, the same
//! strings the renderer draws.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sheet::{AddressForm, CellAddress, CellFormat, Sheet, TableRange};

/// Spatial queries per sheet when not configured otherwise.
pub const DEFAULT_SPATIAL_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TruthError {
    #[error("asked for {requested} unique-valued cells but the sheet has only {available}")]
    InsufficientUniqueness { requested: usize, available: usize },
    #[error("table range {range} lies outside the {rows}x{cols} sheet")]
    OutOfBounds { range: String, rows: u32, cols: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrCell {
    pub addr: CellAddress,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OcrTruth {
    pub sequence: Vec<OcrCell>,
}

impl OcrTruth {
    pub fn texts(&self) -> Vec<String> {
        self.sequence.iter().map(|c| c.text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialTruth {
    pub queries: Vec<String>,
    pub answers: BTreeMap<String, CellAddress>,
    pub address_form: AddressForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatKind {
    TopBorder,
    BottomBorder,
    LeftBorder,
    RightBorder,
    Bold,
    Fill,
}

impl FormatKind {
    pub const ALL: [FormatKind; 6] = [
        FormatKind::TopBorder,
        FormatKind::BottomBorder,
        FormatKind::LeftBorder,
        FormatKind::RightBorder,
        FormatKind::Bold,
        FormatKind::Fill,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FormatKind::TopBorder => "top_border",
            FormatKind::BottomBorder => "bottom_border",
            FormatKind::LeftBorder => "left_border",
            FormatKind::RightBorder => "right_border",
            FormatKind::Bold => "bold",
            FormatKind::Fill => "fill",
        }
    }

    /// Wording used inside prompts.
    pub fn description(&self) -> &'static str {
        match self {
            FormatKind::TopBorder => "a top border",
            FormatKind::BottomBorder => "a bottom border",
            FormatKind::LeftBorder => "a left border",
            FormatKind::RightBorder => "a right border",
            FormatKind::Bold => "bold font",
            FormatKind::Fill => "a fill (background) color",
        }
    }

    pub fn holds(&self, f: &CellFormat) -> bool {
        match self {
            FormatKind::TopBorder => f.border_top,
            FormatKind::BottomBorder => f.border_bottom,
            FormatKind::LeftBorder => f.border_left,
            FormatKind::RightBorder => f.border_right,
            FormatKind::Bold => f.bold,
            FormatKind::Fill => f.fill.is_some(),
        }
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormatKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown format {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FormatTruth {
    pub sets: BTreeMap<FormatKind, BTreeSet<CellAddress>>,
}

impl FormatTruth {
    pub fn get(&self, kind: FormatKind) -> BTreeSet<CellAddress> {
        self.sets.get(&kind).cloned().unwrap_or_default()
    }
}

/// Non-empty texts along the four edges of one table, in reading order.
/// Doubles as the predicted-boundaries shape.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BorderContents {
    pub top: Vec<String>,
    pub bottom: Vec<String>,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TableTruth {
    pub ranges: Vec<TableRange>,
    pub boundaries: Vec<BorderContents>,
}

pub fn extract_ocr(s: &Sheet) -> OcrTruth {
    let sequence = s
        .iter()
        .filter(|(_, c)| !c.is_null())
        .map(|(addr, c)| OcrCell {
            addr,
            text: c.display_text(),
        })
        .filter(|c| !c.text.is_empty())
        .collect();
    OcrTruth { sequence }
}

/// Non-null cells whose display text occurs exactly once, row-major.
pub fn unique_cells(s: &Sheet) -> Vec<(CellAddress, String)> {
    let ocr = extract_ocr(s);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in &ocr.sequence {
        *counts.entry(c.text.as_str()).or_default() += 1;
    }
    ocr.sequence
        .iter()
        .filter(|c| counts[c.text.as_str()] == 1)
        .map(|c| (c.addr, c.text.clone()))
        .collect()
}

/// Samples `k` unique-valued cells and shuffles them with a ChaCha8
/// generator seeded by `seed`.
pub fn extract_spatial(
    s: &Sheet,
    k: usize,
    seed: u64,
    form: AddressForm,
) -> Result<SpatialTruth, TruthError> {
    let mut pool = unique_cells(s);
    if pool.len() < k {
        return Err(TruthError::InsufficientUniqueness {
            requested: k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(k);
    let queries = pool.iter().map(|(_, t)| t.clone()).collect();
    let answers = pool.into_iter().map(|(a, t)| (t, a)).collect();
    Ok(SpatialTruth {
        queries,
        answers,
        address_form: form,
    })
}

/// `k` capped at the number of available unique-valued cells.
pub fn default_spatial_k(s: &Sheet, requested: usize) -> usize {
    requested.min(unique_cells(s).len())
}

pub fn extract_formats(s: &Sheet) -> FormatTruth {
    let mut sets: BTreeMap<FormatKind, BTreeSet<CellAddress>> = FormatKind::ALL
        .iter()
        .map(|k| (*k, BTreeSet::new()))
        .collect();
    for (addr, cell) in s.iter() {
        for kind in FormatKind::ALL {
            if kind.holds(&cell.format) {
                sets.get_mut(&kind).expect("all kinds present").insert(addr);
            }
        }
    }
    FormatTruth { sets }
}

fn texts_along(s: &Sheet, cells: impl Iterator<Item = (u32, u32)>) -> Vec<String> {
    cells
        .map(|(r, c)| s.cell(r, c))
        .filter(|c| !c.is_null())
        .map(|c| c.display_text())
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn border_contents(s: &Sheet, r: &TableRange) -> Result<BorderContents, TruthError> {
    if r.bottom() > s.rows() || r.right() > s.cols() {
        return Err(TruthError::OutOfBounds {
            range: r.to_a1(),
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    Ok(BorderContents {
        top: texts_along(s, (r.left()..=r.right()).map(|c| (r.top(), c))),
        bottom: texts_along(s, (r.left()..=r.right()).map(|c| (r.bottom(), c))),
        left: texts_along(s, (r.top()..=r.bottom()).map(|row| (row, r.left()))),
        right: texts_along(s, (r.top()..=r.bottom()).map(|row| (row, r.right()))),
    })
}

pub fn extract_table_boundaries(
    s: &Sheet,
    ranges: &[TableRange],
) -> Result<TableTruth, TruthError> {
    let boundaries = ranges
        .iter()
        .map(|r| border_contents(s, r))
        .collect::<Result<_, _>>()?;
    Ok(TableTruth {
        ranges: ranges.to_vec(),
        boundaries,
    })
}
