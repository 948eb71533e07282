//! Deterministic sheet rasterizer.
//!
//! Glyphs come from a pre-rasterized Noto Sans Mono face (regular and
//! bold), so output is byte-identical across platforms. Text advances by a
//! fixed `char_width_px` per Unicode scalar value.

use noto_sans_mono_bitmap::{get_raster, FontWeight, RasterHeight, RasterizedChar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sheet::{CellAddress, Rgb, Sheet};

/// Images are accepted by hosted models only below this byte size.
pub const MAX_IMAGE_BYTES: usize = 4_000_000;
pub const MIN_IMAGE_DIM: u32 = 50;
pub const MAX_IMAGE_DIM: u32 = 10_000;

pub const BACKGROUND: Rgb = Rgb::WHITE;
pub const TEXT_COLOR: Rgb = Rgb::BLACK;
pub const BORDER_COLOR: Rgb = Rgb::BLACK;
pub const GRID_COLOR: Rgb = Rgb(0xD9, 0xD9, 0xD9);
/// Horizontal text inset from the cell's left edge.
pub const TEXT_INSET_PX: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("invalid render config: {0}")]
    Config(String),
    #[error("rendered image would be {width}x{height} px, above the {MAX_IMAGE_DIM} px limit")]
    Oversize { width: u64, height: u64 },
    #[error("layout is for a {layout_rows}x{layout_cols} grid but the sheet is {rows}x{cols}")]
    LayoutMismatch {
        layout_rows: u32,
        layout_cols: u32,
        rows: u32,
        cols: u32,
    },
    #[error("cannot decode PNG: {0}")]
    Format(String),
    #[error("PNG encoding failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub char_width_px: u32,
    pub row_height_px: u32,
    pub grid_lines: bool,
    /// Nominal glyph size. Mapped to the smallest embedded raster box that
    /// holds it (16, 20, 24 or 32 px).
    pub font_size_px: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            char_width_px: 8,
            row_height_px: 20,
            grid_lines: true,
            font_size_px: 14,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.char_width_px < 4 {
            return Err(RenderError::Config(format!(
                "char_width_px must be >= 4 (got {})",
                self.char_width_px
            )));
        }
        if self.row_height_px < self.font_size_px + 2 {
            return Err(RenderError::Config(format!(
                "row_height_px ({}) must be >= font_size_px + 2 ({})",
                self.row_height_px,
                self.font_size_px + 2
            )));
        }
        self.raster_height()?;
        Ok(())
    }

    fn raster_height(&self) -> Result<RasterHeight, RenderError> {
        Ok(match self.font_size_px {
            0..=16 => RasterHeight::Size16,
            17..=20 => RasterHeight::Size20,
            21..=24 => RasterHeight::Size24,
            25..=32 => RasterHeight::Size32,
            n => {
                return Err(RenderError::Config(format!(
                    "font_size_px {n} exceeds the largest embedded size (32)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// A cell whose text is wider than its own rectangle. The text is drawn
/// through `through_col` (inclusive) and clipped at `clip_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverflowSpan {
    pub row: u32,
    pub col: u32,
    pub through_col: u32,
    pub clip_x: u32,
}

/// Pixel geometry of a rendered sheet.
///
/// `image_width`/`image_height` cover the cell grid exactly; the PNG canvas
/// may be larger (`canvas_*`) because small sheets are padded to the
/// minimum accepted image size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutMap {
    pub rows: u32,
    pub cols: u32,
    pub image_width: u32,
    pub image_height: u32,
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub cell_rects: Vec<Vec<PixelRect>>,
    pub overflow: Vec<OverflowSpan>,
}

impl LayoutMap {
    pub fn rect(&self, addr: CellAddress) -> PixelRect {
        self.cell_rects[addr.row() as usize - 1][addr.col() as usize - 1]
    }

    pub fn overflow_of(&self, addr: CellAddress) -> Option<&OverflowSpan> {
        self.overflow
            .iter()
            .find(|o| o.row == addr.row() && o.col == addr.col())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layout serializes")
    }
}

fn text_width_px(text: &str, cfg: &RenderConfig) -> u64 {
    TEXT_INSET_PX as u64 + text.chars().count() as u64 * cfg.char_width_px as u64
}

/// Computes cell rectangles. Column pixel width is
/// `round(width_chars * char_width_px)` (at least 1 px).
pub fn layout(sheet: &Sheet, cfg: &RenderConfig) -> Result<LayoutMap, RenderError> {
    cfg.validate()?;
    let col_px: Vec<u64> = sheet
        .col_widths()
        .iter()
        .map(|w| ((w * cfg.char_width_px as f64).round() as u64).max(1))
        .collect();
    let row_px = ((sheet.row_height() * cfg.row_height_px as f64).round() as u64).max(1);
    let width: u64 = col_px.iter().sum();
    let height: u64 = row_px * sheet.rows() as u64;
    if width > MAX_IMAGE_DIM as u64 || height > MAX_IMAGE_DIM as u64 {
        return Err(RenderError::Oversize { width, height });
    }
    let mut col_x = Vec::with_capacity(col_px.len());
    let mut acc = 0u32;
    for w in &col_px {
        col_x.push(acc);
        acc += *w as u32;
    }
    let cell_rects: Vec<Vec<PixelRect>> = (0..sheet.rows())
        .map(|r| {
            (0..sheet.cols() as usize)
                .map(|c| PixelRect {
                    x: col_x[c],
                    y: r * row_px as u32,
                    w: col_px[c] as u32,
                    h: row_px as u32,
                })
                .collect()
        })
        .collect();

    let mut overflow = Vec::new();
    for r in 1..=sheet.rows() {
        for c in 1..=sheet.cols() {
            let cell = sheet.cell(r, c);
            if cell.is_null() {
                continue;
            }
            let rect = cell_rects[r as usize - 1][c as usize - 1];
            let text = cell.display_text();
            if text_width_px(&text, cfg) <= rect.w as u64 {
                continue;
            }
            let mut through = c;
            while through < sheet.cols() && sheet.cell(r, through + 1).is_null() {
                through += 1;
            }
            let last = cell_rects[r as usize - 1][through as usize - 1];
            overflow.push(OverflowSpan {
                row: r,
                col: c,
                through_col: through,
                clip_x: last.x + last.w,
            });
        }
    }

    Ok(LayoutMap {
        rows: sheet.rows(),
        cols: sheet.cols(),
        image_width: width as u32,
        image_height: height as u32,
        canvas_width: (width as u32).max(MIN_IMAGE_DIM),
        canvas_height: (height as u32).max(MIN_IMAGE_DIM),
        cell_rects,
        overflow,
    })
}

/// Where one glyph of one cell is drawn. `(x, y)` is the top-left of its
/// raster box; drawing is clipped horizontally to `clip_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphAnchor {
    pub row: u32,
    pub col: u32,
    pub ch: char,
    pub bold: bool,
    pub x: u32,
    pub y: u32,
    pub clip_x: u32,
}

/// All glyph placements for a sheet, in row-major cell order.
pub fn glyph_anchors(sheet: &Sheet, lm: &LayoutMap, cfg: &RenderConfig) -> Vec<GlyphAnchor> {
    let raster_h = cfg.raster_height().map(|h| h.val() as u32).unwrap_or(16);
    let mut out = Vec::new();
    for (addr, cell) in sheet.iter() {
        if cell.is_null() {
            continue;
        }
        let rect = lm.rect(addr);
        let clip_x = lm.overflow_of(addr).map_or(rect.x + rect.w, |o| o.clip_x);
        let y = rect.y + rect.h.saturating_sub(raster_h) / 2;
        for (i, ch) in cell.display_text().chars().enumerate() {
            let x = rect.x as u64 + TEXT_INSET_PX as u64 + i as u64 * cfg.char_width_px as u64;
            if x >= clip_x as u64 {
                break;
            }
            if ch == ' ' {
                continue;
            }
            out.push(GlyphAnchor {
                row: addr.row(),
                col: addr.col(),
                ch,
                bold: cell.format.bold,
                x: x as u32,
                y,
                clip_x,
            });
        }
    }
    out
}

struct Canvas {
    width: u32,
    height: u32,
    px: Vec<u8>,
}

impl Canvas {
    fn new(width: u32, height: u32, bg: Rgb) -> Self {
        let mut px = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            px.extend_from_slice(&[bg.0, bg.1, bg.2]);
        }
        Self { width, height, px }
    }

    fn put(&mut self, x: u32, y: u32, c: Rgb) {
        if x < self.width && y < self.height {
            let i = (y as usize * self.width as usize + x as usize) * 3;
            self.px[i..i + 3].copy_from_slice(&[c.0, c.1, c.2]);
        }
    }

    fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Rgb(self.px[i], self.px[i + 1], self.px[i + 2])
    }

    /// Integer alpha blend of `c` over the current pixel.
    fn blend(&mut self, x: u32, y: u32, c: Rgb, alpha: u8) {
        if alpha == 0 || x >= self.width || y >= self.height {
            return;
        }
        let bg = self.get(x, y);
        let a = alpha as u32;
        let mix = |f: u8, b: u8| ((f as u32 * a + b as u32 * (255 - a) + 127) / 255) as u8;
        self.put(x, y, Rgb(mix(c.0, bg.0), mix(c.1, bg.1), mix(c.2, bg.2)));
    }

    fn fill_rect(&mut self, r: PixelRect, c: Rgb) {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                self.put(x, y, c);
            }
        }
    }

    fn hline(&mut self, x0: u32, x1: u32, y: u32, c: Rgb) {
        for x in x0..x1 {
            self.put(x, y, c);
        }
    }

    fn vline(&mut self, x: u32, y0: u32, y1: u32, c: Rgb) {
        for y in y0..y1 {
            self.put(x, y, c);
        }
    }
}

fn raster_for(ch: char, bold: bool, size: RasterHeight) -> Option<RasterizedChar> {
    let weight = if bold {
        FontWeight::Bold
    } else {
        FontWeight::Regular
    };
    get_raster(ch, weight, size).or_else(|| get_raster('?', weight, size))
}

/// Paints the sheet and encodes it as an RGB8 PNG.
///
/// Layers: fills, then text (overflowing into empty right neighbours),
/// then borders, then light grid lines on edges without a border.
pub fn rasterize(
    sheet: &Sheet,
    lm: &LayoutMap,
    cfg: &RenderConfig,
) -> Result<Vec<u8>, RenderError> {
    cfg.validate()?;
    if lm.rows != sheet.rows() || lm.cols != sheet.cols() {
        return Err(RenderError::LayoutMismatch {
            layout_rows: lm.rows,
            layout_cols: lm.cols,
            rows: sheet.rows(),
            cols: sheet.cols(),
        });
    }
    let size = cfg.raster_height()?;
    let mut cv = Canvas::new(lm.canvas_width, lm.canvas_height, BACKGROUND);

    for (addr, cell) in sheet.iter() {
        if let Some(fill) = cell.format.fill {
            cv.fill_rect(lm.rect(addr), fill);
        }
    }

    for g in glyph_anchors(sheet, lm, cfg) {
        let Some(raster) = raster_for(g.ch, g.bold, size) else {
            continue;
        };
        let row_rect = lm.cell_rects[g.row as usize - 1][g.col as usize - 1];
        let y_end = row_rect.y + row_rect.h;
        for (dy, line) in raster.raster().iter().enumerate() {
            let y = g.y + dy as u32;
            if y >= y_end {
                break;
            }
            for (dx, &alpha) in line.iter().enumerate() {
                let x = g.x + dx as u32;
                if x >= g.clip_x {
                    break;
                }
                cv.blend(x, y, TEXT_COLOR, alpha);
            }
        }
    }

    for (addr, cell) in sheet.iter() {
        let r = lm.rect(addr);
        let f = cell.format;
        if f.border_top {
            cv.hline(r.x, r.x + r.w, r.y, BORDER_COLOR);
        }
        if f.border_bottom {
            cv.hline(r.x, r.x + r.w, r.y + r.h - 1, BORDER_COLOR);
        }
        if f.border_left {
            cv.vline(r.x, r.y, r.y + r.h, BORDER_COLOR);
        }
        if f.border_right {
            cv.vline(r.x + r.w - 1, r.y, r.y + r.h, BORDER_COLOR);
        }
    }

    if cfg.grid_lines {
        paint_grid(sheet, lm, &mut cv);
    }
    encode_png(&cv)
}

fn paint_grid(sheet: &Sheet, lm: &LayoutMap, cv: &mut Canvas) {
    // Right edges covered by overflowing text are not ruled.
    let spanned = |row: u32, col: u32| {
        lm.overflow
            .iter()
            .any(|o| o.row == row && o.col <= col && col < o.through_col)
    };
    for (addr, cell) in sheet.iter() {
        let (row, col) = (addr.row(), addr.col());
        let r = lm.rect(addr);
        let f = cell.format;
        let right_neighbor_left = col < sheet.cols() && sheet.cell(row, col + 1).format.border_left;
        if !f.border_right && !right_neighbor_left && !spanned(row, col) {
            cv.vline(r.x + r.w - 1, r.y, r.y + r.h, GRID_COLOR);
        }
        let below_top = row < sheet.rows() && sheet.cell(row + 1, col).format.border_top;
        if !f.border_bottom && !below_top {
            cv.hline(r.x, r.x + r.w, r.y + r.h - 1, GRID_COLOR);
        }
        if col == 1 && !f.border_left {
            cv.vline(r.x, r.y, r.y + r.h, GRID_COLOR);
        }
        if row == 1 && !f.border_top {
            cv.hline(r.x, r.x + r.w, r.y, GRID_COLOR);
        }
    }
}

fn encode_png(cv: &Canvas) -> Result<Vec<u8>, RenderError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, cv.width, cv.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Adaptive);
        let mut w = enc
            .write_header()
            .map_err(|e| RenderError::Encode(e.to_string()))?;
        w.write_image_data(&cv.px)
            .map_err(|e| RenderError::Encode(e.to_string()))?;
        w.finish().map_err(|e| RenderError::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// Encodes raw RGB8 pixels; used for constructing test and probe images.
pub fn encode_rgb(width: u32, height: u32, pixels: &[u8]) -> Result<Vec<u8>, RenderError> {
    if pixels.len() != width as usize * height as usize * 3 {
        return Err(RenderError::Encode(
            "pixel buffer does not match dimensions".into(),
        ));
    }
    encode_png(&Canvas {
        width,
        height,
        px: pixels.to_vec(),
    })
}

/// Decoded RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Rgb(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, RenderError> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| RenderError::Format(e.to_string()))?;
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| RenderError::Format("image too large".into()))?
    ];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RenderError::Format(e.to_string()))?;
    buf.truncate(info.buffer_size());
    let pixels = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        other => {
            return Err(RenderError::Format(format!(
                "unsupported color type {other:?}"
            )))
        }
    };
    Ok(RgbImage {
        width: info.width,
        height: info.height,
        pixels,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImageValidation {
    pub width: u32,
    pub height: u32,
    pub byte_size: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Checks hosted-model input limits: fewer than 4 MB and both dimensions
/// within [50, 10000] px. Only the PNG header is decoded.
pub fn validate_image(png_bytes: &[u8]) -> Result<ImageValidation, RenderError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(png_bytes));
    let reader = decoder
        .read_info()
        .map_err(|e| RenderError::Format(e.to_string()))?;
    let (width, height) = (reader.info().width, reader.info().height);
    let mut failures = Vec::new();
    if png_bytes.len() >= MAX_IMAGE_BYTES {
        failures.push(format!(
            "size {} bytes is not below {} bytes",
            png_bytes.len(),
            MAX_IMAGE_BYTES
        ));
    }
    for (name, v) in [("width", width), ("height", height)] {
        if v < MIN_IMAGE_DIM {
            failures.push(format!("{name} {v} px is below {MIN_IMAGE_DIM} px"));
        } else if v > MAX_IMAGE_DIM {
            failures.push(format!("{name} {v} px exceeds {MAX_IMAGE_DIM} px"));
        }
    }
    Ok(ImageValidation {
        width,
        height,
        byte_size: png_bytes.len(),
        passed: failures.is_empty(),
        failures,
    })
}

/// Layout plus PNG in one call.
pub fn render(sheet: &Sheet, cfg: &RenderConfig) -> Result<(LayoutMap, Vec<u8>), RenderError> {
    let lm = layout(sheet, cfg)?;
    let png = rasterize(sheet, &lm, cfg)?;
    Ok((lm, png))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheet::{CellData, CellFormat};

    fn cfg() -> RenderConfig {
        RenderConfig::default()
    }

    #[test]
    fn config_invariants() {
        assert!(cfg().validate().is_ok());
        assert!(RenderConfig {
            char_width_px: 3,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(RenderConfig {
            row_height_px: 15,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(RenderConfig {
            font_size_px: 40,
            row_height_px: 60,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn single_cell_layout() {
        let mut s = Sheet::blank(1, 1).unwrap();
        s.set_col_width(1, 8.0).unwrap();
        let lm = layout(&s, &cfg()).unwrap();
        assert_eq!((lm.image_width, lm.image_height), (64, 20));
        assert_eq!((lm.canvas_width, lm.canvas_height), (64, 50));
    }

    #[test]
    fn column_offsets_are_prefix_sums() {
        let mut s = Sheet::blank(1, 2).unwrap();
        s.set_col_width(1, 4.0).unwrap();
        s.set_col_width(2, 4.0).unwrap();
        let lm = layout(&s, &cfg()).unwrap();
        assert_eq!(lm.cell_rects[0][1].x, 32);
    }

    #[test]
    fn oversize_is_rejected() {
        // 10,001 px wide.
        let mut s = Sheet::blank(1, 1).unwrap();
        s.set_col_width(1, 10_001.0 / 8.0).unwrap();
        assert!(matches!(
            layout(&s, &cfg()),
            Err(RenderError::Oversize { width: 10_001, .. })
        ));
        s.set_col_width(1, 10_000.0 / 8.0).unwrap();
        assert!(layout(&s, &cfg()).is_ok());
        let tall = Sheet::blank(501, 1).unwrap();
        assert!(matches!(
            layout(&tall, &cfg()),
            Err(RenderError::Oversize { height: 10_020, .. })
        ));
    }

    #[test]
    fn rects_tile_the_grid() {
        let mut s = Sheet::blank(3, 4).unwrap();
        for (i, w) in [3.0, 8.43, 1.2, 20.0].iter().enumerate() {
            s.set_col_width(i as u32 + 1, *w).unwrap();
        }
        let lm = layout(&s, &cfg()).unwrap();
        let mut covered = vec![0u8; (lm.image_width * lm.image_height) as usize];
        for row in &lm.cell_rects {
            for r in row {
                for y in r.y..r.y + r.h {
                    for x in r.x..r.x + r.w {
                        covered[(y * lm.image_width + x) as usize] += 1;
                    }
                }
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn fill_color_is_painted() {
        let mut s = Sheet::blank(1, 1).unwrap();
        s.cell_mut(1, 1).format.fill = Some(Rgb(0xFF, 0xFF, 0x00));
        s.set_text(1, 1, "x");
        let (lm, png) = render(
            &s,
            &RenderConfig {
                grid_lines: false,
                ..cfg()
            },
        )
        .unwrap();
        let img = decode_png(&png).unwrap();
        let r = lm.rect(CellAddress::new(1, 1).unwrap());
        // Top-left corner of the rect is outside any glyph.
        assert_eq!(img.pixel(r.x, r.y), Rgb(0xFF, 0xFF, 0x00));
        assert_eq!(
            img.pixel(r.x + r.w - 1, r.y + r.h - 1),
            Rgb(0xFF, 0xFF, 0x00)
        );
        // Padding below the grid is background.
        assert_eq!(img.pixel(0, 40), BACKGROUND);
    }

    #[test]
    fn overflow_extends_into_empty_neighbour() {
        let mut s = Sheet::from_text_rows(&[vec!["Other People", "", "x"]]).unwrap();
        for c in 1..=3 {
            s.set_col_width(c, 6.0).unwrap();
        }
        let c = RenderConfig {
            grid_lines: false,
            ..cfg()
        };
        let (lm, png) = render(&s, &c).unwrap();
        let span = lm.overflow_of(CellAddress::new(1, 1).unwrap()).unwrap();
        assert_eq!(span.through_col, 2);
        assert_eq!(span.clip_x, 96);
        let anchors = glyph_anchors(&s, &lm, &c);
        assert!(anchors.iter().any(|g| g.col == 1 && g.x >= 48));
        let img = decode_png(&png).unwrap();
        let neighbour = lm.cell_rects[0][1];
        let dark = (neighbour.x..neighbour.x + neighbour.w)
            .flat_map(|x| (0..20).map(move |y| (x, y)))
            .any(|(x, y)| img.pixel(x, y) != BACKGROUND);
        assert!(dark, "glyph pixels expected inside the neighbour rect");
        // Nothing from cell A1 is drawn at or beyond the third column.
        assert!(anchors.iter().filter(|g| g.col == 1).all(|g| g.x < 96));
    }

    #[test]
    fn overflow_is_clipped_by_non_empty_neighbour() {
        let mut s = Sheet::from_text_rows(&[vec!["Other People", "y"]]).unwrap();
        s.set_col_width(1, 6.0).unwrap();
        let lm = layout(&s, &cfg()).unwrap();
        let span = lm.overflow_of(CellAddress::new(1, 1).unwrap()).unwrap();
        assert_eq!((span.through_col, span.clip_x), (1, 48));
    }

    #[test]
    fn bold_uses_bold_face() {
        let mut plain = Sheet::from_text_rows(&[vec!["Header"]]).unwrap();
        let mut bold = plain.clone();
        bold.cell_mut(1, 1).format.bold = true;
        plain.set_col_width(1, 10.0).unwrap();
        bold.set_col_width(1, 10.0).unwrap();
        let ink = |s: &Sheet| {
            let (_, png) = render(
                s,
                &RenderConfig {
                    grid_lines: false,
                    ..cfg()
                },
            )
            .unwrap();
            let img = decode_png(&png).unwrap();
            img.pixels.iter().map(|&v| 255 - v as u64).sum::<u64>()
        };
        assert!(ink(&bold) > ink(&plain));
    }

    #[test]
    fn borders_are_black_lines() {
        let mut s = Sheet::blank(3, 3).unwrap();
        *s.cell_mut(2, 2) = CellData::with_format("", CellFormat::default().with_all_borders());
        let (lm, png) = render(&s, &cfg()).unwrap();
        let img = decode_png(&png).unwrap();
        let r = lm.cell_rects[1][1];
        assert_eq!(img.pixel(r.x + 3, r.y), BORDER_COLOR);
        assert_eq!(img.pixel(r.x + 3, r.y + r.h - 1), BORDER_COLOR);
        assert_eq!(img.pixel(r.x, r.y + 5), BORDER_COLOR);
        assert_eq!(img.pixel(r.x + r.w - 1, r.y + 5), BORDER_COLOR);
        // A plain cell's right edge carries a grid line.
        let g = lm.cell_rects[0][0];
        assert_eq!(img.pixel(g.x + g.w - 1, g.y + 5), GRID_COLOR);
    }

    #[test]
    fn blank_sheet_without_grid_is_uniform() {
        let s = Sheet::blank(4, 3).unwrap();
        let (_, png) = render(
            &s,
            &RenderConfig {
                grid_lines: false,
                ..cfg()
            },
        )
        .unwrap();
        let img = decode_png(&png).unwrap();
        assert!(img.pixels.chunks(3).all(|p| p == [255, 255, 255]));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut s =
            Sheet::from_text_rows(&[vec!["day", "cost", ""], vec!["Other People", "12", "é"]])
                .unwrap();
        s.cell_mut(1, 1).format.bold = true;
        s.cell_mut(2, 2).format.fill = Some(Rgb(200, 10, 10));
        let (_, a) = render(&s, &cfg()).unwrap();
        let (_, b) = render(&s, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn glyph_anchors_stay_in_own_rect_unless_overflowing() {
        let s = Sheet::from_text_rows(&[
            vec!["a long piece of text", "", "b"],
            vec!["c", "another long text", "d"],
        ])
        .unwrap();
        let lm = layout(&s, &cfg()).unwrap();
        for g in glyph_anchors(&s, &lm, &cfg()) {
            let addr = CellAddress::new(g.row, g.col).unwrap();
            assert!(
                lm.rect(addr).contains(g.x, g.y) || lm.overflow_of(addr).is_some(),
                "{g:?}"
            );
        }
    }

    #[test]
    fn validation_bounds() {
        let img = |w: u32, h: u32| encode_rgb(w, h, &vec![255; (w * h * 3) as usize]).unwrap();
        let v = validate_image(&img(64, 20)).unwrap();
        assert!(!v.passed);
        assert!(v.failures[0].contains("height"));
        assert!(validate_image(&img(800, 600)).unwrap().passed);
        assert!(matches!(
            validate_image(b"nope"),
            Err(RenderError::Format(_))
        ));
    }
}
