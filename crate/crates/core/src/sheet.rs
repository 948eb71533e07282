//! Spreadsheet data model and address notation.
//!
//! Addresses are 1-based. Two textual forms are supported: the spreadsheet
//! A1 form (`B26`) and the image-space row-first form (`26,2`) used when the
//! rendered image carries no coordinate cues.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Error produced when an address, range or color string cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("invalid A1 address {0:?}")]
    InvalidA1(String),
    #[error("invalid row,col address {0:?}")]
    InvalidRc(String),
    #[error("invalid range {0:?}")]
    InvalidRange(String),
    #[error("row and column must be >= 1 (got row={row}, col={col})")]
    NonPositive { row: u32, col: u32 },
    #[error("invalid color {0:?}, expected #RRGGBB")]
    InvalidColor(String),
}

/// A 1-based cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct CellAddress {
    row: u32,
    col: u32,
}

impl CellAddress {
    pub fn new(row: u32, col: u32) -> Result<Self, AddressError> {
        if row == 0 || col == 0 {
            return Err(AddressError::NonPositive { row, col });
        }
        Ok(Self { row, col })
    }

    pub fn row(&self) -> u32 {
        self.row
    }

    pub fn col(&self) -> u32 {
        self.col
    }

    /// Returns the address in A1 notation, e.g. `B26`.
    pub fn to_a1(&self) -> String {
        format!("{}{}", column_letters(self.col), self.row)
    }

    /// Parses A1 notation. Column letters are case-insensitive.
    pub fn from_a1(s: &str) -> Result<Self, AddressError> {
        let err = || AddressError::InvalidA1(s.to_string());
        let split = s.find(|c: char| !c.is_ascii_alphabetic()).ok_or_else(err)?;
        let (letters, digits) = s.split_at(split);
        if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let col = column_index(letters).ok_or_else(err)?;
        let row: u32 = digits.parse().map_err(|_| err())?;
        Self::new(row, col).map_err(|_| err())
    }

    /// Returns the row-first comma form, e.g. `26,2`.
    pub fn to_rc(&self) -> String {
        format!("{},{}", self.row, self.col)
    }

    /// Parses the row-first comma form. Whitespace around either number is allowed.
    pub fn from_rc(s: &str) -> Result<Self, AddressError> {
        let err = || AddressError::InvalidRc(s.to_string());
        let (r, c) = s.split_once(',').ok_or_else(err)?;
        let parse = |p: &str| -> Result<u32, AddressError> {
            let p = p.trim();
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            p.parse().map_err(|_| err())
        };
        Self::new(parse(r)?, parse(c)?).map_err(|_| err())
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_a1())
    }
}

impl TryFrom<(u32, u32)> for CellAddress {
    type Error = AddressError;
    fn try_from((row, col): (u32, u32)) -> Result<Self, Self::Error> {
        Self::new(row, col)
    }
}

impl From<CellAddress> for (u32, u32) {
    fn from(a: CellAddress) -> Self {
        (a.row, a.col)
    }
}

/// Bijective base-26 column letters: 1 → A, 26 → Z, 27 → AA.
pub fn column_letters(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Inverse of [`column_letters`]. Returns `None` on non-letters or overflow.
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() {
        return None;
    }
    let mut acc: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        let v = (b.to_ascii_uppercase() - b'A') as u32 + 1;
        acc = acc.checked_mul(26)?.checked_add(v)?;
    }
    Some(acc)
}

/// Which textual address form a task uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddressForm {
    Rc,
    A1,
}

impl AddressForm {
    pub fn format(&self, addr: CellAddress) -> String {
        match self {
            AddressForm::Rc => addr.to_rc(),
            AddressForm::A1 => addr.to_a1(),
        }
    }

    pub fn parse(&self, s: &str) -> Result<CellAddress, AddressError> {
        match self {
            AddressForm::Rc => CellAddress::from_rc(s),
            AddressForm::A1 => CellAddress::from_a1(s),
        }
    }
}

/// An 8-bit RGB color, serialized as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(0xFF, 0xFF, 0xFF);
    pub const BLACK: Rgb = Rgb(0, 0, 0);

    pub fn to_hex(&self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

impl FromStr for Rgb {
    type Err = AddressError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(AddressError::InvalidColor(s.to_string()));
        }
        let v =
            u32::from_str_radix(hex, 16).map_err(|_| AddressError::InvalidColor(s.to_string()))?;
        Ok(Rgb((v >> 16) as u8, (v >> 8) as u8, v as u8))
    }
}

impl TryFrom<String> for Rgb {
    type Error = AddressError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Rgb> for String {
    fn from(c: Rgb) -> Self {
        c.to_hex()
    }
}

/// The six visual format dimensions tracked per cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellFormat {
    pub border_top: bool,
    pub border_bottom: bool,
    pub border_left: bool,
    pub border_right: bool,
    pub bold: bool,
    pub fill: Option<Rgb>,
}

impl CellFormat {
    pub fn is_default(&self) -> bool {
        *self == CellFormat::default()
    }

    pub fn with_all_borders(mut self) -> Self {
        self.border_top = true;
        self.border_bottom = true;
        self.border_left = true;
        self.border_right = true;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellData {
    pub text: String,
    pub format: CellFormat,
}

impl CellData {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            format: CellFormat::default(),
        }
    }

    pub fn with_format(text: impl Into<String>, format: CellFormat) -> Self {
        Self {
            text: text.into(),
            format,
        }
    }

    /// A cell whose text is empty after trimming trailing whitespace is null.
    pub fn is_null(&self) -> bool {
        self.text.trim_end().is_empty()
    }

    /// Text as it appears on a single rendered line: line breaks become
    /// spaces and surrounding whitespace is trimmed. Ground truth and
    /// boundary matching all compare this form.
    pub fn display_text(&self) -> String {
        display_text(&self.text)
    }

    pub fn is_default(&self) -> bool {
        self.text.is_empty() && self.format.is_default()
    }
}

pub fn display_text(text: &str) -> String {
    let joined: String = text
        .chars()
        .map(|c| {
            if c == '\n' || c == '\r' || c == '\t' {
                ' '
            } else {
                c
            }
        })
        .collect();
    joined.trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SheetError {
    #[error("sheet must have at least one row and one column (got {rows}x{cols})")]
    Empty { rows: u32, cols: u32 },
    #[error("expected {expected} cells for a {rows}x{cols} grid, got {got}")]
    CellCount {
        rows: u32,
        cols: u32,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} column widths, got {got}")]
    WidthCount { expected: usize, got: usize },
    #[error("column width at index {index} must be positive and finite (got {width})")]
    BadWidth { index: usize, width: f64 },
    #[error("row height must be positive and finite (got {0})")]
    BadRowHeight(f64),
    #[error("cell {addr} lies outside the {rows}x{cols} sheet")]
    OutOfBounds {
        addr: CellAddress,
        rows: u32,
        cols: u32,
    },
}

/// Excel's default column width in character units.
pub const DEFAULT_COL_WIDTH: f64 = 8.43;

/// A dense rectangular grid of cells with per-column widths in character
/// units and a uniform row height (1.0 = one default row).
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    rows: u32,
    cols: u32,
    cells: Vec<CellData>,
    col_widths: Vec<f64>,
    row_height: f64,
}

impl Sheet {
    /// An empty grid with default column widths.
    pub fn blank(rows: u32, cols: u32) -> Result<Self, SheetError> {
        if rows == 0 || cols == 0 {
            return Err(SheetError::Empty { rows, cols });
        }
        Ok(Self {
            rows,
            cols,
            cells: vec![CellData::default(); rows as usize * cols as usize],
            col_widths: vec![DEFAULT_COL_WIDTH; cols as usize],
            row_height: 1.0,
        })
    }

    pub fn from_parts(
        rows: u32,
        cols: u32,
        cells: Vec<CellData>,
        col_widths: Vec<f64>,
        row_height: f64,
    ) -> Result<Self, SheetError> {
        if rows == 0 || cols == 0 {
            return Err(SheetError::Empty { rows, cols });
        }
        let expected = rows as usize * cols as usize;
        if cells.len() != expected {
            return Err(SheetError::CellCount {
                rows,
                cols,
                expected,
                got: cells.len(),
            });
        }
        if col_widths.len() != cols as usize {
            return Err(SheetError::WidthCount {
                expected: cols as usize,
                got: col_widths.len(),
            });
        }
        if let Some((index, &width)) = col_widths
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(SheetError::BadWidth { index, width });
        }
        if !(row_height.is_finite() && row_height > 0.0) {
            return Err(SheetError::BadRowHeight(row_height));
        }
        Ok(Self {
            rows,
            cols,
            cells,
            col_widths,
            row_height,
        })
    }

    /// Builds a sheet from row-major text rows; short rows are padded with nulls.
    pub fn from_text_rows<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self, SheetError> {
        let m = rows.len() as u32;
        let n = rows.iter().map(|r| r.len()).max().unwrap_or(0) as u32;
        let mut sheet = Self::blank(m, n)?;
        for (i, row) in rows.iter().enumerate() {
            for (j, text) in row.iter().enumerate() {
                sheet.cells[i * n as usize + j].text = text.as_ref().to_string();
            }
        }
        Ok(sheet)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn col_widths(&self) -> &[f64] {
        &self.col_widths
    }

    pub fn row_height(&self) -> f64 {
        self.row_height
    }

    pub fn contains(&self, addr: CellAddress) -> bool {
        addr.row() <= self.rows && addr.col() <= self.cols
    }

    fn index(&self, row: u32, col: u32) -> usize {
        (row as usize - 1) * self.cols as usize + (col as usize - 1)
    }

    /// Cell at 1-based `(row, col)`. Panics when out of bounds.
    pub fn cell(&self, row: u32, col: u32) -> &CellData {
        assert!(
            row >= 1 && row <= self.rows && col >= 1 && col <= self.cols,
            "cell ({row},{col}) out of bounds"
        );
        &self.cells[self.index(row, col)]
    }

    pub fn get(&self, addr: CellAddress) -> Option<&CellData> {
        self.contains(addr)
            .then(|| &self.cells[self.index(addr.row(), addr.col())])
    }

    pub fn cell_mut(&mut self, row: u32, col: u32) -> &mut CellData {
        assert!(
            row >= 1 && row <= self.rows && col >= 1 && col <= self.cols,
            "cell ({row},{col}) out of bounds"
        );
        let i = self.index(row, col);
        &mut self.cells[i]
    }

    pub fn set(&mut self, addr: CellAddress, data: CellData) -> Result<(), SheetError> {
        if !self.contains(addr) {
            return Err(SheetError::OutOfBounds {
                addr,
                rows: self.rows,
                cols: self.cols,
            });
        }
        *self.cell_mut(addr.row(), addr.col()) = data;
        Ok(())
    }

    pub fn set_text(&mut self, row: u32, col: u32, text: impl Into<String>) {
        self.cell_mut(row, col).text = text.into();
    }

    pub fn set_col_width(&mut self, col: u32, width: f64) -> Result<(), SheetError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(SheetError::BadWidth {
                index: col as usize - 1,
                width,
            });
        }
        self.col_widths[col as usize - 1] = width;
        Ok(())
    }

    /// Row-major iterator over `(address, cell)`.
    pub fn iter(&self) -> impl Iterator<Item = (CellAddress, &CellData)> + '_ {
        let cols = self.cols;
        self.cells.iter().enumerate().map(move |(i, c)| {
            let row = (i as u32) / cols + 1;
            let col = (i as u32) % cols + 1;
            (CellAddress { row, col }, c)
        })
    }

    pub(crate) fn cells_mut(&mut self) -> impl Iterator<Item = (CellAddress, &mut CellData)> + '_ {
        let cols = self.cols;
        self.cells.iter_mut().enumerate().map(move |(i, c)| {
            let row = (i as u32) / cols + 1;
            let col = (i as u32) % cols + 1;
            (CellAddress { row, col }, c)
        })
    }

    pub(crate) fn col_widths_mut(&mut self) -> &mut [f64] {
        &mut self.col_widths
    }

    /// Display texts of the non-null cells of each row, left to right.
    pub fn row_lines(&self) -> Vec<Vec<String>> {
        (1..=self.rows)
            .map(|r| {
                (1..=self.cols)
                    .map(|c| self.cell(r, c))
                    .filter(|c| !c.is_null())
                    .map(CellData::display_text)
                    .collect()
            })
            .collect()
    }

    /// Display texts of the non-null cells of each column, top to bottom.
    pub fn col_lines(&self) -> Vec<Vec<String>> {
        (1..=self.cols)
            .map(|c| {
                (1..=self.rows)
                    .map(|r| self.cell(r, c))
                    .filter(|c| !c.is_null())
                    .map(CellData::display_text)
                    .collect()
            })
            .collect()
    }

    /// Minimal bounding box (inclusive, 1-based) of cells that are non-null
    /// or carry any format. `None` when every cell is default.
    pub fn used_bounds(&self) -> Option<TableRange> {
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for (addr, cell) in self.iter() {
            if cell.is_null() && cell.format.is_default() {
                continue;
            }
            let (r, c) = (addr.row(), addr.col());
            bounds = Some(match bounds {
                None => (r, c, r, c),
                Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
            });
        }
        bounds.map(|(r0, c0, r1, c1)| TableRange::from_corners(r0, c0, r1, c1))
    }

    /// Copies out a sub-rectangle as a new sheet.
    pub fn crop(&self, range: TableRange) -> Result<Sheet, SheetError> {
        for addr in [range.top_left(), range.bottom_right()] {
            if !self.contains(addr) {
                return Err(SheetError::OutOfBounds {
                    addr,
                    rows: self.rows,
                    cols: self.cols,
                });
            }
        }
        let (r0, c0) = (range.top_left().row(), range.top_left().col());
        let (r1, c1) = (range.bottom_right().row(), range.bottom_right().col());
        let mut cells = Vec::with_capacity(((r1 - r0 + 1) * (c1 - c0 + 1)) as usize);
        for r in r0..=r1 {
            for c in c0..=c1 {
                cells.push(self.cell(r, c).clone());
            }
        }
        let widths = self.col_widths[(c0 - 1) as usize..c1 as usize].to_vec();
        Sheet::from_parts(r1 - r0 + 1, c1 - c0 + 1, cells, widths, self.row_height)
    }

    /// Trims the sheet to its used range. Returns the trimmed sheet and the
    /// `(row, col)` offset that was removed from the top-left. An entirely
    /// default sheet trims to a single empty cell.
    pub fn trimmed(&self) -> (Sheet, (u32, u32)) {
        match self.used_bounds() {
            Some(b) => {
                let off = (b.top_left().row() - 1, b.top_left().col() - 1);
                (self.crop(b).expect("used bounds lie inside the sheet"), off)
            }
            None => {
                let mut s = Sheet::blank(1, 1).expect("1x1");
                s.col_widths[0] = self.col_widths[0];
                s.row_height = self.row_height;
                (s, (0, 0))
            }
        }
    }
}

/// A rectangular cell range with ordered corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TableRange {
    top_left: CellAddress,
    bottom_right: CellAddress,
}

impl TableRange {
    /// Builds a range from any two corners, normalizing so that the
    /// top-left corner is component-wise minimal.
    pub fn new(a: CellAddress, b: CellAddress) -> Self {
        Self::from_corners(a.row(), a.col(), b.row(), b.col())
    }

    /// Corner components must be >= 1; panics otherwise.
    pub fn from_corners(r0: u32, c0: u32, r1: u32, c1: u32) -> Self {
        let tl = CellAddress::new(r0.min(r1), c0.min(c1)).expect("positive corner");
        let br = CellAddress::new(r0.max(r1), c0.max(c1)).expect("positive corner");
        Self {
            top_left: tl,
            bottom_right: br,
        }
    }

    pub fn top_left(&self) -> CellAddress {
        self.top_left
    }

    pub fn bottom_right(&self) -> CellAddress {
        self.bottom_right
    }

    pub fn top(&self) -> u32 {
        self.top_left.row()
    }
    pub fn bottom(&self) -> u32 {
        self.bottom_right.row()
    }
    pub fn left(&self) -> u32 {
        self.top_left.col()
    }
    pub fn right(&self) -> u32 {
        self.bottom_right.col()
    }

    pub fn height(&self) -> u32 {
        self.bottom() - self.top() + 1
    }

    pub fn width(&self) -> u32 {
        self.right() - self.left() + 1
    }

    pub fn area(&self) -> u64 {
        self.height() as u64 * self.width() as u64
    }

    pub fn contains(&self, addr: CellAddress) -> bool {
        (self.top()..=self.bottom()).contains(&addr.row())
            && (self.left()..=self.right()).contains(&addr.col())
    }

    pub fn intersection(&self, other: &TableRange) -> Option<TableRange> {
        let top = self.top().max(other.top());
        let bottom = self.bottom().min(other.bottom());
        let left = self.left().max(other.left());
        let right = self.right().min(other.right());
        (top <= bottom && left <= right).then(|| TableRange::from_corners(top, left, bottom, right))
    }

    /// Intersection over union of the two cell sets.
    pub fn iou(&self, other: &TableRange) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    /// Row-major iterator over every member address.
    pub fn cells(&self) -> impl Iterator<Item = CellAddress> + '_ {
        (self.top()..=self.bottom()).flat_map(move |r| {
            (self.left()..=self.right()).map(move |c| CellAddress { row: r, col: c })
        })
    }

    /// Moves the range by a signed offset; `None` if a corner would leave
    /// the positive quadrant.
    pub fn shifted(&self, drow: i64, dcol: i64) -> Option<TableRange> {
        let f = |v: u32, d: i64| -> Option<u32> {
            u32::try_from(v as i64 + d).ok().filter(|&x| x >= 1)
        };
        Some(TableRange::from_corners(
            f(self.top(), drow)?,
            f(self.left(), dcol)?,
            f(self.bottom(), drow)?,
            f(self.right(), dcol)?,
        ))
    }

    pub fn to_a1(&self) -> String {
        format!("{}:{}", self.top_left.to_a1(), self.bottom_right.to_a1())
    }

    /// Parses `<a1>:<a1>`; unordered corners are normalized. A bare single
    /// address is not accepted.
    pub fn from_a1(s: &str) -> Result<Self, AddressError> {
        let err = || AddressError::InvalidRange(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(err)?;
        let a = CellAddress::from_a1(a.trim()).map_err(|_| err())?;
        let b = CellAddress::from_a1(b.trim()).map_err(|_| err())?;
        Ok(Self::new(a, b))
    }
}

impl fmt::Display for TableRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_a1())
    }
}

impl Serialize for TableRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_a1())
    }
}

impl<'de> Deserialize<'de> for TableRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TableRange::from_a1(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(r: u32, c: u32) -> CellAddress {
        CellAddress::new(r, c).unwrap()
    }

    /// Column letters by counting upward in a bijective base-26 odometer,
    /// independent of the division-based conversion.
    fn odometer_columns(n: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        let mut digits: Vec<u8> = vec![b'A'];
        for _ in 0..n {
            out.push(String::from_utf8(digits.clone()).unwrap());
            let mut i = digits.len();
            loop {
                if i == 0 {
                    digits.insert(0, b'A');
                    break;
                }
                i -= 1;
                if digits[i] == b'Z' {
                    digits[i] = b'A';
                } else {
                    digits[i] += 1;
                    break;
                }
            }
        }
        out
    }

    #[test]
    fn a1_examples() {
        assert_eq!(addr(1, 1).to_a1(), "A1");
        assert_eq!(addr(26, 2).to_a1(), "B26");
        assert_eq!(addr(1, 27).to_a1(), "AA1");
        assert_eq!(CellAddress::from_a1("A1").unwrap(), addr(1, 1));
        assert_eq!(CellAddress::from_a1("B26").unwrap(), addr(26, 2));
        assert_eq!(CellAddress::from_a1("ZZ9").unwrap(), addr(9, 702));
    }

    #[test]
    fn column_letters_match_odometer_for_first_thousand() {
        let expected = odometer_columns(1000);
        for (i, letters) in expected.iter().enumerate() {
            let col = i as u32 + 1;
            assert_eq!(&column_letters(col), letters, "col {col}");
            assert_eq!(column_index(letters), Some(col));
        }
        assert_eq!(expected[701], "ZZ");
        assert_eq!(expected[702], "AAA");
    }

    #[test]
    fn column_letters_sort_in_grid_order() {
        let cols: Vec<String> = (1..=1000).map(column_letters).collect();
        for w in cols.windows(2) {
            assert!(
                (w[0].len(), &w[0]) < (w[1].len(), &w[1]),
                "{} !< {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn a1_parse_errors_name_input() {
        for bad in ["", "A", "12", "A0", "1A", "A1B", "A-1", "Ä1"] {
            let e = CellAddress::from_a1(bad).unwrap_err();
            assert!(e.to_string().contains(&format!("{bad:?}")), "{e}");
        }
        assert!(CellAddress::from_a1("ZZZZZZZZZ1").is_err());
    }

    #[test]
    fn rc_examples() {
        assert_eq!(addr(26, 2).to_rc(), "26,2");
        assert_eq!(addr(1, 1).to_rc(), "1,1");
        assert_eq!(CellAddress::from_rc("3,5").unwrap(), addr(3, 5));
        assert_eq!(CellAddress::from_rc(" 3 , 5 ").unwrap(), addr(3, 5));
        for bad in ["0,1", "1,0", "a,1", "1", "1,2,3", "-1,2", ","] {
            assert!(CellAddress::from_rc(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn range_examples() {
        let r = TableRange::new(addr(1, 1), addr(9, 4));
        assert_eq!(r.to_a1(), "A1:D9");
        let r = TableRange::from_a1("A4:D120").unwrap();
        assert_eq!((r.top_left(), r.bottom_right()), (addr(4, 1), addr(120, 4)));
        assert_eq!(TableRange::new(addr(2, 1), addr(2, 1)).to_a1(), "A2:A2");
        let swapped = TableRange::from_a1("D9:A1").unwrap();
        assert_eq!(swapped.to_a1(), "A1:D9");
        assert_eq!(TableRange::from_a1(&swapped.to_a1()).unwrap(), swapped);
        assert!(TableRange::from_a1("A1D9").is_err());
        assert!(TableRange::from_a1("A1:9").is_err());
    }

    #[test]
    fn rgb_hex() {
        assert_eq!("#FFFF00".parse::<Rgb>().unwrap(), Rgb(255, 255, 0));
        assert_eq!(Rgb(1, 2, 171).to_hex(), "#0102AB");
        assert!("#FFF".parse::<Rgb>().is_err());
    }

    #[test]
    fn sheet_validation() {
        assert!(Sheet::blank(0, 1).is_err());
        assert!(Sheet::from_parts(1, 2, vec![CellData::default(); 2], vec![1.0], 1.0).is_err());
        assert!(Sheet::from_parts(1, 1, vec![CellData::default()], vec![0.0], 1.0).is_err());
        assert!(Sheet::from_parts(1, 1, vec![], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn null_cells_and_display_text() {
        assert!(CellData::new("").is_null());
        assert!(CellData::new("  \n").is_null());
        assert!(!CellData::new(" x").is_null());
        assert_eq!(display_text("a\nb "), "a b");
    }

    #[test]
    fn trim_keeps_formatted_empty_cells() {
        let mut s = Sheet::blank(5, 5).unwrap();
        s.set_text(2, 2, "x");
        s.cell_mut(4, 3).format.fill = Some(Rgb(1, 2, 3));
        let (t, off) = s.trimmed();
        assert_eq!((t.rows(), t.cols()), (3, 2));
        assert_eq!(off, (1, 1));
        assert_eq!(t.cell(1, 1).text, "x");
        assert_eq!(t.cell(3, 2).format.fill, Some(Rgb(1, 2, 3)));
        let (again, off2) = t.trimmed();
        assert_eq!(again, t);
        assert_eq!(off2, (0, 0));
    }

    #[test]
    fn row_and_col_lines_skip_nulls() {
        let s = Sheet::from_text_rows(&[vec!["a", "", "b"], vec!["", "", "c"]]).unwrap();
        assert_eq!(s.row_lines(), vec![vec!["a", "b"], vec!["c"]]);
        assert_eq!(s.col_lines(), vec![vec!["a"], vec![], vec!["b", "c"]]);
    }

    #[test]
    fn iou_and_shift() {
        let a = TableRange::from_a1("A1:B2").unwrap();
        let b = TableRange::from_a1("B2:C3").unwrap();
        assert!((a.iou(&b) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(a.shifted(1, 0).unwrap().to_a1(), "A2:B3");
        assert!(a.shifted(-1, 0).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn range_normalization_idempotent(r0 in 1u32..500, c0 in 1u32..500, r1 in 1u32..500, c1 in 1u32..500) {
                let r = TableRange::from_corners(r0, c0, r1, c1);
                prop_assert!(r.top() <= r.bottom() && r.left() <= r.right());
                prop_assert_eq!(TableRange::new(r.top_left(), r.bottom_right()), r);
                prop_assert_eq!(TableRange::from_a1(&r.to_a1()).unwrap(), r);
            }
        }
    }
}
